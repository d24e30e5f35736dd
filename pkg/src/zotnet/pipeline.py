"""Development, deployment and production stages end to end.

``run_development`` generates labelled data and trains the two-phase model.
``run_production`` replays a day of per-second slots for the configured users:
move, sample the channel, predict, pick rate targets, assign blocks, measure
satisfaction from the ground-truth oracle and, for the personalized policy,
learn online from the feedback. ``compare`` turns a personalized and a baseline
run into saved-resource and satisfaction figures.

Random streams are keyed by seed, stage, user and purpose, never by policy, so
both policies see the same users, contexts and channel draws.
"""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np
import pandas as pd

from . import _rng
from .allocator import NonPersonalized, Personalized, allocate_rbs
from .channel import ChannelSampler
from .config import SimulationConfig
from .predictor import TrainReport, TwoPhaseModel, cluster_personas, preprocess_trace, train
from .synth import (APPLICATIONS, LOCATIONS, Persona, day_phase, demand_vector, emit_dataset, generate_trace,
                    ground_truth_adequate, uniform_qos, user_seeds)
from .zot import NUM_LEVELS

log = logging.getLogger(__name__)

RESULT_COLUMNS = (
    "ts_index", "user_id", "policy", "application", "location_category", "delta_opt_mbps",
    "target_mbps", "rbs_used", "qos_p_mbps", "sat_pred", "sat_meas", "correct",
)
SUMMARY_FORMAT = "zotnet-run-summary"
COMPARISON_FORMAT = "zotnet-comparison"


# --- development ----------------------------------------------------------

@dataclass
class DevelopmentResult:
    model: TwoPhaseModel
    report: TrainReport
    dataset: pd.DataFrame
    labels: np.ndarray


def run_development(config: SimulationConfig, out_dir: str | Path | None = None) -> DevelopmentResult:
    """Generate the development dataset and train on it.

    With ``withhold_personas`` the true persona ids are ignored and users are
    clustered into ``num_clusters`` personas first.
    """
    personas = config.personas()
    df = emit_dataset(personas, config.dev_users_per_persona, config.dev_duration_s, config.seed,
                      cfg=config.cell, demands=config.demands, ts_len=config.ts_len_s)
    label_col = "persona_id"
    if config.withhold_personas:
        assign, _ = cluster_personas(df, config.num_clusters, config.seed, config.cell, config.demands)
        df = df.assign(cluster_id=df["user_id"].map(assign).astype(np.int64))
        label_col = "cluster_id"
    model, report = train(df, seed=config.seed, label_col=label_col, holdout=config.dev_holdout,
                          cfg=config.cell, demands=config.demands,
                          min_bucket_samples=config.min_bucket_samples,
                          learning_rate=config.learning_rate, drift_threshold=config.drift_threshold)
    log.info("trained: %s", report)
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        df.drop(columns=["cluster_id"], errors="ignore").to_csv(out_dir / "dataset.csv", index=False,
                                                                lineterminator="\n")
        model.save(out_dir / "model.json")
        (out_dir / "train_report.json").write_text(json.dumps(report.as_dict(), indent=2) + "\n")
    return DevelopmentResult(model, report, df, df[label_col].to_numpy())


# --- production -----------------------------------------------------------

@dataclass
class RunSummary:
    policy: str
    num_users: int
    num_slots: int
    ts_len_s: float
    warmup_s: float
    total_provided_mbits: float
    total_provided_mbits_after_warmup: float
    total_demand_mbits: float
    avg_satisfaction: float
    avg_satisfaction_after_warmup: float
    per_user_avg_satisfaction: list
    min_user_avg_satisfaction: float
    max_user_avg_satisfaction: float
    infeasible_slots: int
    misprediction_rate: float | None
    drift_resets: int

    def to_dict(self) -> dict:
        return {"format": SUMMARY_FORMAT, **asdict(self)}

    @classmethod
    def from_dict(cls, d: dict) -> "RunSummary":
        d = dict(d)
        if d.pop("format", SUMMARY_FORMAT) != SUMMARY_FORMAT:
            raise ValueError("not a run summary")
        return cls(**d)


@dataclass
class RunResult:
    records: pd.DataFrame
    summary: RunSummary
    model: TwoPhaseModel | None
    demands: dict


@dataclass
class UserWorld:
    """Everything about one user that does not depend on the policy."""

    trace: object
    adequate: np.ndarray
    rates: np.ndarray


def build_world(config: SimulationConfig) -> list[UserWorld]:
    personas = config.personas()
    worlds = []
    for u, p in enumerate(config.user_personas):
        persona = personas[p]
        trace_seed, tol_seed = user_seeds(config.seed, u, _rng.PRODUCTION)
        trace = generate_trace(persona, config.duration_s, trace_seed, config.cell, config.ts_len_s)
        adequate = ground_truth_adequate(persona, trace, tol_seed, config.demands)
        rates = ChannelSampler(config.cell, config.seed, u, _rng.PRODUCTION).sample_trace(trace.positions)
        worlds.append(UserWorld(trace, adequate, rates))
    return worlds


def run_production(config: SimulationConfig, model: TwoPhaseModel | None = None,
                   policy: str | None = None, world: list[UserWorld] | None = None) -> RunResult:
    """Closed-loop simulation of one policy. The model is updated in place."""
    kind = config.with_(policy=policy).policy_kind if policy else config.policy_kind
    personalized = isinstance(kind, Personalized)
    if personalized and (model is None or not model.trained):
        raise ValueError("the personalized policy needs a trained model")
    world = world if world is not None else build_world(config)
    n_users = len(world)
    n = config.num_slots
    ts_len = config.ts_len_s
    dvec = demand_vector(config.demands)

    locs = [w.trace.location.tolist() for w in world]
    apps = [w.trace.application.tolist() for w in world]
    phases = [day_phase(w.trace.time_of_day).tolist() for w in world]
    demand = [dvec[w.trace.application].tolist() for w in world]
    truth = [w.adequate for w in world]
    rates = np.stack([w.rates for w in world], axis=1)  # (n, U, R)
    if personalized:
        probs = [model.predict_persona(preprocess_trace(w.trace, config.cell)) for w in world]
        lead = [np.argmax(p, axis=1).tolist() for p in probs]
        s_idx = kind.s_min - 1

    shape = (n, n_users)
    target = np.zeros(shape)
    delta_opt = np.zeros(shape)
    qos = np.zeros(shape)
    used = np.zeros(shape, dtype=np.int64)
    sat_meas = np.zeros(shape, dtype=np.int64)
    sat_pred = np.zeros(shape, dtype=np.int64)
    feasible = np.ones(shape, dtype=bool)
    thresholds = np.zeros(NUM_LEVELS)

    for t in range(n):
        targets = []
        preds = []
        for u in range(n_users):
            d = demand[u][t]
            if personalized:
                frac = model.adequate_fractions(probs[u][t], locs[u][t], apps[u][t], phases[u][t])
                preds.append(frac)
                tgt = float(frac[s_idx]) * d
            else:
                tgt = d
            targets.append(tgt)
        decision = allocate_rbs(targets, rates[t], [demand[u][t] for u in range(n_users)])
        for u, alloc in enumerate(decision):
            d = demand[u][t]
            q = alloc.qos_p
            thresholds = truth[u][t]
            meas = 1 + int(np.count_nonzero(q >= thresholds[1:]))
            target[t, u] = targets[u]
            delta_opt[t, u] = d - targets[u]
            qos[t, u] = q
            used[t, u] = len(alloc.assigned_rbs)
            sat_meas[t, u] = meas
            feasible[t, u] = alloc.feasible
            if personalized:
                f = q / d
                pred = 1 + int(np.count_nonzero(f >= preds[u][1:]))
                sat_pred[t, u] = pred
                model.update_bucket(lead[u][t], locs[u][t], apps[u][t], phases[u][t], f, pred, meas)

    records = pd.DataFrame({
        "ts_index": np.repeat(np.arange(n), n_users),
        "user_id": np.tile(np.arange(n_users), n),
        "policy": kind.name,
        "application": np.asarray(APPLICATIONS, dtype=object)[np.stack([w.trace.application for w in world], 1).ravel()],
        "location_category": np.asarray(LOCATIONS, dtype=object)[np.stack([w.trace.location for w in world], 1).ravel()],
        "delta_opt_mbps": delta_opt.ravel(),
        "target_mbps": target.ravel(),
        "rbs_used": used.ravel(),
        "qos_p_mbps": qos.ravel(),
        "sat_pred": pd.array(sat_pred.ravel(), dtype="Int64") if personalized else pd.array([pd.NA] * (n * n_users), dtype="Int64"),
        "sat_meas": sat_meas.ravel(),
        "correct": pd.array(sat_pred.ravel() == sat_meas.ravel(), dtype="boolean") if personalized
        else pd.array([pd.NA] * (n * n_users), dtype="boolean"),
    })
    summary = summarize(records, config, feasible=feasible,
                        drift_resets=model.drift_resets if personalized else 0)
    return RunResult(records, summary, model if personalized else None, dict(config.demands))


def summarize(records: pd.DataFrame, config: SimulationConfig, feasible: np.ndarray | None = None,
              drift_resets: int = 0) -> RunSummary:
    ts_len = config.ts_len_s
    n_users = int(records["user_id"].nunique())
    n_slots = int(records["ts_index"].nunique())
    warm = records["ts_index"].to_numpy() * ts_len >= config.warmup_s
    qos = records["qos_p_mbps"].to_numpy(float)
    sat = records["sat_meas"].to_numpy(float)
    demand = records["application"].map(config.demands).to_numpy(float)
    per_user = records.groupby("user_id")["sat_meas"].mean().tolist()
    if feasible is None:
        infeasible = int((records["qos_p_mbps"] < records["target_mbps"] - 1e-9).groupby(records["ts_index"]).any().sum())
    else:
        infeasible = int((~feasible).any(axis=1).sum())
    correct = records["correct"].dropna()
    return RunSummary(
        policy=str(records["policy"].iloc[0]),
        num_users=n_users,
        num_slots=n_slots,
        ts_len_s=ts_len,
        warmup_s=config.warmup_s,
        total_provided_mbits=float(qos.sum() * ts_len),
        total_provided_mbits_after_warmup=float(qos[warm].sum() * ts_len),
        total_demand_mbits=float(demand.sum() * ts_len),
        avg_satisfaction=float(sat.mean()),
        avg_satisfaction_after_warmup=float(sat[warm].mean()) if warm.any() else float("nan"),
        per_user_avg_satisfaction=[float(x) for x in per_user],
        min_user_avg_satisfaction=float(min(per_user)),
        max_user_avg_satisfaction=float(max(per_user)),
        infeasible_slots=infeasible,
        misprediction_rate=float(1.0 - correct.astype(float).mean()) if len(correct) else None,
        drift_resets=int(drift_resets),
    )


# --- comparison -----------------------------------------------------------

@dataclass
class ComparisonReport:
    total_saved_mbits: float
    total_saved_mbits_after_warmup: float
    baseline_provided_mbits: float
    personalized_provided_mbits: float
    saved_fraction: float
    avg_satisfaction_personalized: float
    avg_satisfaction_baseline: float
    avg_satisfaction_personalized_after_warmup: float
    avg_satisfaction_baseline_after_warmup: float
    min_saved_per_slot_mbps: float
    slots_with_positive_saving: int
    num_slots: int
    saved_per_slot: np.ndarray
    hourly: pd.DataFrame

    def to_dict(self) -> dict:
        d = {k: v for k, v in self.__dict__.items() if k not in ("saved_per_slot", "hourly")}
        return {"format": COMPARISON_FORMAT, **d}


def compare(personalized: pd.DataFrame, baseline: pd.DataFrame, ts_len: float = 1.0,
            demands: dict | None = None, warmup_s: float = 600.0, bin_s: float = 3600.0) -> ComparisonReport:
    """Saved rate ``QoS_NP - QoS_Pr`` per slot, totals, and hourly series."""
    if len(personalized) != len(baseline):
        raise ValueError(f"run lengths differ: {len(personalized)} vs {len(baseline)}")
    keys = ["ts_index", "user_id"]
    a = personalized.sort_values(keys, kind="stable").reset_index(drop=True)
    b = baseline.sort_values(keys, kind="stable").reset_index(drop=True)
    if not a[keys].equals(b[keys]):
        raise ValueError("runs cover different (slot, user) pairs")
    demands = demands or {}
    slot = a["ts_index"].to_numpy()
    per_rec = b["qos_p_mbps"].to_numpy(float) - a["qos_p_mbps"].to_numpy(float)
    n_slots = int(slot.max()) + 1
    saved = np.bincount(slot, weights=per_rec, minlength=n_slots)
    warm = slot * ts_len >= warmup_s
    hour = (slot * ts_len // bin_s).astype(np.int64)
    demand = a["application"].map(demands).to_numpy(float) if demands else np.full(len(a), np.nan)
    frame = pd.DataFrame({
        "hour": hour,
        "qos_np_mbits": b["qos_p_mbps"].to_numpy(float) * ts_len,
        "qos_pr_mbits": a["qos_p_mbps"].to_numpy(float) * ts_len,
        "qos_d_mbits": demand * ts_len,
        "saved_mbits": per_rec * ts_len,
        "sat_np": b["sat_meas"].to_numpy(float),
        "sat_pr": a["sat_meas"].to_numpy(float),
    })
    hourly = frame.groupby("hour").agg(
        qos_np_mbits=("qos_np_mbits", "sum"), qos_pr_mbits=("qos_pr_mbits", "sum"),
        qos_d_mbits=("qos_d_mbits", "sum"), saved_mbits=("saved_mbits", "sum"),
        sat_np=("sat_np", "mean"), sat_pr=("sat_pr", "mean"),
    ).reset_index()
    base_total = float(frame["qos_np_mbits"].sum())
    pers_total = float(frame["qos_pr_mbits"].sum())
    total_saved = float(saved.sum() * ts_len)
    return ComparisonReport(
        total_saved_mbits=total_saved,
        total_saved_mbits_after_warmup=float(per_rec[warm].sum() * ts_len),
        baseline_provided_mbits=base_total,
        personalized_provided_mbits=pers_total,
        saved_fraction=total_saved / base_total if base_total > 0 else 0.0,
        avg_satisfaction_personalized=float(frame["sat_pr"].mean()),
        avg_satisfaction_baseline=float(frame["sat_np"].mean()),
        avg_satisfaction_personalized_after_warmup=float(frame["sat_pr"][warm].mean()),
        avg_satisfaction_baseline_after_warmup=float(frame["sat_np"][warm].mean()),
        min_saved_per_slot_mbps=float(saved.min()),
        slots_with_positive_saving=int((saved > 1e-12).sum()),
        num_slots=n_slots,
        saved_per_slot=saved,
        hourly=hourly,
    )


# --- files ----------------------------------------------------------------

def write_run(run: RunResult, out_dir: str | Path, config: SimulationConfig | None = None) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    run.records[list(RESULT_COLUMNS)].to_csv(out_dir / "results.csv", index=False, lineterminator="\n")
    doc = {**run.summary.to_dict(), "demands": run.demands}
    if config is not None:
        doc["config"] = config.to_dict()
    (out_dir / "summary.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def read_run(out_dir: str | Path) -> tuple[pd.DataFrame, dict]:
    out_dir = Path(out_dir)
    records = pd.read_csv(out_dir / "results.csv", dtype={"sat_pred": "Int64", "correct": "boolean"})
    missing = set(RESULT_COLUMNS) - set(records.columns)
    if missing:
        raise ValueError(f"results file lacks columns {sorted(missing)}")
    summary = json.loads((out_dir / "summary.json").read_text())
    if summary.get("format") != SUMMARY_FORMAT:
        raise ValueError(f"{out_dir / 'summary.json'} is not a run summary")
    return records, summary


def write_comparison(report: ComparisonReport, out: str | Path) -> tuple[Path, Path]:
    """Write ``<out>.json`` (or ``out`` itself if it ends in .json) and an hourly CSV beside it."""
    out = Path(out)
    json_path = out if out.suffix == ".json" else out.with_suffix(".json")
    json_path.parent.mkdir(parents=True, exist_ok=True)
    csv_path = json_path.with_name(json_path.stem + "_hourly.csv")
    json_path.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    report.hourly.to_csv(csv_path, index=False, lineterminator="\n")
    return json_path, csv_path


# --- concept drift --------------------------------------------------------

def mirrored_tolerance(persona: Persona) -> Persona:
    """The same persona with every tightness ``t`` replaced by ``1 - t``."""
    return replace(persona, tolerance={k: 1.0 - t for k, t in persona.tolerance.items()})


@dataclass
class DriftResult:
    errors: np.ndarray
    change_at: int
    window: int
    pre_error_rate: float
    peak_error_rate: float
    recovery_samples: int | None
    drift_resets: int

    def trailing(self) -> np.ndarray:
        """Error rate of each full trailing window, indexed by its last sample."""
        out = np.full(len(self.errors), np.nan)
        c = np.concatenate([[0.0], np.cumsum(self.errors)])
        out[self.window - 1:] = (c[self.window:] - c[:-self.window]) / self.window
        return out


def drift_experiment(model: TwoPhaseModel, before: Persona, after: Persona, n_samples: int, change_at: int,
                     seed: int, config: SimulationConfig | None = None, window: int = 500,
                     threshold: float = 0.1, start_time: float = 0.0, learn: bool = True) -> DriftResult:
    """Stream feedback from one user whose tolerance switches at ``change_at``.

    Provided rates are uniform over ``[0, demand]`` so every satisfaction level
    is exercised. The model is updated online in place. Recovery is the number
    of samples after the change until a trailing window lying wholly after the
    change has an error rate below ``threshold``. With ``learn`` off the model
    is only queried, which gives the frozen-model control.
    """
    config = config or SimulationConfig()
    trace = generate_trace(before, n_samples, _rng.derive_seed(seed, _rng.TRACE), config.cell,
                           config.ts_len_s, start_time)
    feats = preprocess_trace(trace, config.cell)
    probs = model.predict_persona(feats)
    tol_seed = _rng.derive_seed(seed, _rng.TOLERANCE_NOISE)
    truth = np.where((np.arange(len(trace)) < change_at)[:, None],
                     ground_truth_adequate(before, trace, tol_seed, config.demands),
                     ground_truth_adequate(after, trace, tol_seed, config.demands))
    demand = demand_vector(config.demands)[trace.application]
    qos = uniform_qos(_rng.stream(seed, _rng.QOS_SAMPLE), demand)
    measured = 1 + (qos[:, None] >= truth[:, 1:]).sum(axis=1)
    errors = np.zeros(len(trace))
    for i in range(len(trace)):
        if not learn:
            pred = model.predict_satisfaction(feats[i], probs[i], APPLICATIONS[trace.application[i]],
                                              demand[i] - qos[i])
            errors[i] = pred != measured[i]
            continue
        ok = model.online_update(feats[i], probs[i], APPLICATIONS[trace.application[i]], float(qos[i]),
                                 int(measured[i]))
        errors[i] = not ok
    res = DriftResult(errors, change_at, window, float(errors[:change_at].mean()), 0.0, None, model.drift_resets)
    trail = res.trailing()
    post = trail[change_at + window - 1:]
    res.peak_error_rate = float(np.nanmax(trail[change_at:])) if len(trail) > change_at else 0.0
    below = np.flatnonzero(post < threshold)
    if below.size:
        res.recovery_samples = int(below[0] + window)
    return res
