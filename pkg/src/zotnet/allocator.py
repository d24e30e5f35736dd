"""Per-slot rate targets and resource-block assignment.

The personalized policy asks each user for the least rate its predicted zone of
tolerance allows at the target satisfaction; the baseline asks for full demand.
Resource blocks are then packed greedily, largest deficit first.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .zot import ZoTProfile, check_level, min_qos_for

EXHAUSTIVE_LIMIT = 4 ** 10
_EPS = 1e-12


@dataclass(frozen=True)
class Personalized:
    s_min: int = 4

    def __post_init__(self):
        check_level(self.s_min)

    name = "personalized"


@dataclass(frozen=True)
class NonPersonalized:
    name = "baseline"


PolicyKind = Personalized | NonPersonalized


def policy_from_name(name: str, s_min: int = 4) -> PolicyKind:
    if name == "personalized":
        return Personalized(s_min)
    if name in ("baseline", "nonpersonalized", "non-personalized"):
        return NonPersonalized()
    raise ValueError(f"unknown policy {name!r}")


@dataclass
class UserAllocation:
    target_rate: float
    assigned_rbs: list[int] = field(default_factory=list)
    achieved_rate: float = 0.0
    demand: float = 0.0
    feasible: bool = True

    @property
    def qos_p(self) -> float:
        """Provided rate as seen by the user: achieved, capped at demand."""
        return min(self.achieved_rate, self.demand)

    @property
    def delta(self) -> float:
        return max(self.demand - self.qos_p, 0.0)


def optimize_delta(profile: ZoTProfile, s_min: int) -> float:
    """Largest gap that still keeps the predicted satisfaction at ``s_min``."""
    return profile.qos_demand - min_qos_for(profile, s_min)


def target_rate(policy: PolicyKind, profile: ZoTProfile | None, demand: float) -> float:
    if isinstance(policy, NonPersonalized):
        return demand
    return demand - optimize_delta(profile, policy.s_min)


def _decisions(targets, demands, assigned, rates) -> list[UserAllocation]:
    out = []
    for u, (t, d) in enumerate(zip(targets, demands)):
        rbs = sorted(assigned[u])
        achieved = float(sum(rates[u][r] for r in rbs))
        out.append(UserAllocation(float(t), rbs, achieved, float(d), achieved >= t - _EPS))
    return out


def allocate_rbs(targets: Sequence[float], rates, demands: Sequence[float] | None = None,
                 repair: bool = True) -> list[UserAllocation]:
    """Greedy deficit-driven packing.

    Repeatedly the user furthest from its target (lowest id on ties) takes its
    best free block (lowest index on ties), until every target is met or the
    blocks run out. Blocks nobody needs stay idle. With ``repair`` a local
    search then fixes missed targets the greedy order caused and drops
    redundant blocks.
    """
    rates = np.asarray(rates, dtype=float)
    n_users, n_rbs = rates.shape
    if len(targets) != n_users:
        raise ValueError("one target per user required")
    if any(t < 0 for t in targets):
        raise ValueError("targets must be non-negative")
    demands = list(targets) if demands is None else list(demands)
    table = rates.tolist()
    free = list(range(n_rbs))
    deficit = [float(t) for t in targets]
    assigned: list[list[int]] = [[] for _ in range(n_users)]
    while free:
        u = max(range(n_users), key=lambda i: (deficit[i], -i))
        if deficit[u] <= _EPS:
            break
        row = table[u]
        best = max(free, key=lambda r: (row[r], -r))
        free.remove(best)
        assigned[u].append(best)
        deficit[u] -= row[best]
    if repair:
        need = _min_blocks(targets, table)
        used = sum(len(a) for a in assigned)
        met = all(d <= _EPS for d in deficit)
        # skip the search when greedy already hits the bound or no solution exists
        if not (met and used <= need) and need <= n_rbs:
            _repair(targets, table, assigned, free)
    return _decisions(targets, demands, assigned, table)


def _min_blocks(targets, table) -> float:
    """Lower bound on blocks in use: each user alone taking its best blocks."""
    total = 0
    for t, row in zip(targets, table):
        if t <= _EPS:
            continue
        acc = 0.0
        for k, r in enumerate(sorted(row, reverse=True), 1):
            acc += r
            if acc >= t - _EPS:
                total += k
                break
        else:
            return float("inf")
    return total


def _score(targets, ach, used):
    short = waste = 0.0
    for t, a in zip(targets, ach):
        if a < t:
            short += t - a
        else:
            waste += a - t
    return short, used, waste


def _better(x, y, tol=1e-9) -> bool:
    if x[0] < y[0] - tol:
        return True
    if x[0] > y[0] + tol:
        return False
    if x[1] != y[1]:
        return x[1] < y[1]
    return x[2] < y[2] - tol


def _prunable(targets, table, u, rbs, achieved) -> list[int]:
    """Blocks user ``u`` can give back, weakest first, keeping its target met."""
    out = []
    if achieved < targets[u] - _EPS:
        return out
    row = table[u]
    for r in sorted(rbs, key=lambda r: (row[r], -r)):
        if achieved - row[r] >= targets[u] - _EPS:
            achieved -= row[r]
            out.append(r)
    return out


def _repair(targets, table, assigned, free, max_iter: int = 200) -> None:
    """Best-improvement local search after the greedy pass.

    The objective is lexicographic: total shortfall against targets, then
    blocks in use, then surplus rate above targets. Every neighbour is scored
    after returning the blocks its users no longer need. Neighbours are
    single-block moves (idle pool included) and pairwise swaps; while some
    target is still missed, one-for-two trades and three-way rotations are
    tried as well.
    """
    n_users = len(targets)
    targets = [float(t) for t in targets]
    owner = {}
    for u in range(n_users):
        for r in assigned[u]:
            owner[r] = u
    for r in free:
        owner[r] = -1
    blocks = sorted(owner)
    ach = [sum(table[u][r] for r in assigned[u]) for u in range(n_users)]

    # start from a pruned state
    for u in range(n_users):
        for r in _prunable(targets, table, u, assigned[u], ach[u]):
            assigned[u].remove(r)
            ach[u] -= table[u][r]
            owner[r] = -1
    used = sum(len(a) for a in assigned)
    current = _score(targets, ach, used)

    def trial(transfers):
        # transfers: (block, src, dst); -1 is the idle pool
        new = list(ach)
        lists = {}
        du = 0
        for r, a, b in transfers:
            if a >= 0:
                new[a] -= table[a][r]
                lists.setdefault(a, list(assigned[a])).remove(r)
            else:
                du += 1
            if b >= 0:
                new[b] += table[b][r]
                lists.setdefault(b, list(assigned[b])).append(r)
            else:
                du -= 1
        pruned = []
        for u, rbs in lists.items():
            for r in _prunable(targets, table, u, rbs, new[u]):
                new[u] -= table[u][r]
                pruned.append((r, u, -1))
                du -= 1
        return _score(targets, new, used + du), new, used + du, tuple(transfers) + tuple(pruned)

    for _ in range(max_iter):
        best = None

        def consider(ops):
            nonlocal best
            cand = trial(ops)
            if _better(cand[0], current if best is None else best[0]):
                best = cand

        for r in blocks:
            a = owner[r]
            for b in range(-1, n_users):
                if b != a:
                    consider(((r, a, b),))
        for i, r in enumerate(blocks):
            for s_ in blocks[i + 1:]:
                a, b = owner[r], owner[s_]
                if a != b:
                    consider(((r, a, b), (s_, b, a)))
        if current[0] > 1e-9:
            by_owner = {}
            for r in blocks:
                by_owner.setdefault(owner[r], []).append(r)
            for r in blocks:
                a = owner[r]
                for b, theirs in by_owner.items():
                    if b == a:
                        continue
                    for j, s_ in enumerate(theirs):
                        for t_ in theirs[j + 1:]:
                            consider(((r, a, b), (s_, b, a), (t_, b, a)))
            for i, r in enumerate(blocks):
                for j in range(i + 1, len(blocks)):
                    s_ = blocks[j]
                    for t_ in blocks[j + 1:]:
                        a, b, c = owner[r], owner[s_], owner[t_]
                        if len({a, b, c}) == 3:
                            consider(((r, a, b), (s_, b, c), (t_, c, a)))
                            consider(((r, a, c), (s_, b, a), (t_, c, b)))
        if best is None:
            break
        current, ach, used, ops = best
        for r, a, b in ops:
            if a >= 0:
                assigned[a].remove(r)
            if b >= 0:
                assigned[b].append(r)
            owner[r] = b


@lru_cache(maxsize=8)
def _assignments(n_users: int, n_rbs: int) -> np.ndarray:
    """Every map of blocks to {idle, user 1..n}, in lexicographic order."""
    base = n_users + 1
    codes = np.arange(base ** n_rbs, dtype=np.int64)
    powers = base ** np.arange(n_rbs - 1, -1, -1, dtype=np.int64)
    return ((codes[:, None] // powers[None, :]) % base).astype(np.int8)


@lru_cache(maxsize=8)
def _enumeration(n_users: int, n_rbs: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Assignment table, per-user block bitmasks ``(U, N)`` and blocks used per row."""
    table = _assignments(n_users, n_rbs)
    bits = 1 << np.arange(n_rbs - 1, -1, -1, dtype=np.int64)
    masks = np.stack([(table == u + 1) @ bits for u in range(n_users)]).astype(np.int32)
    return table, masks, (table != 0).sum(axis=1)


@lru_cache(maxsize=8)
def _subset_bits(n_rbs: int) -> np.ndarray:
    shifts = np.arange(n_rbs - 1, -1, -1)
    return ((np.arange(1 << n_rbs)[:, None] >> shifts[None, :]) & 1).astype(np.float64)


def _subset_sums(row: np.ndarray) -> np.ndarray:
    """Rate of every block subset, indexed by bitmask (highest bit = block 0)."""
    return _subset_bits(len(row)) @ row


def exhaustive_allocate(targets: Sequence[float], rates, demands: Sequence[float] | None = None) -> list[UserAllocation]:
    """Fewest blocks meeting every target, by full enumeration.

    If no assignment meets all targets, the one covering the most target rate
    is returned (fewest blocks, then lexicographic order, on ties).
    """
    rates = np.asarray(rates, dtype=float)
    n_users, n_rbs = rates.shape
    if (n_users + 1) ** n_rbs > EXHAUSTIVE_LIMIT:
        raise ValueError(f"{n_users} users x {n_rbs} blocks is too large to enumerate")
    targets = np.asarray(targets, dtype=float)
    demands = list(targets) if demands is None else list(demands)
    table, masks, used = _enumeration(n_users, n_rbs)
    sums = [_subset_sums(rates[u]) for u in range(n_users)]
    ok = np.ones(len(table), dtype=bool)
    for u in range(n_users):
        ok &= (sums[u] >= targets[u] - _EPS)[masks[u]]
    if ok.any():
        cost = np.where(ok, used, n_rbs + 1)
        best = int(np.argmin(cost))
    else:
        cover = sum(np.minimum(sums[u], targets[u])[masks[u]] for u in range(n_users))
        top = cover >= cover.max() - 1e-9
        best = int(np.argmin(np.where(top, used, n_rbs + 1)))
    row = table[best]
    assigned = [np.flatnonzero(row == u + 1).tolist() for u in range(n_users)]
    return _decisions(targets.tolist(), demands, assigned, rates.tolist())


def rbs_used(decisions: Sequence[UserAllocation]) -> int:
    return sum(len(d.assigned_rbs) for d in decisions)
