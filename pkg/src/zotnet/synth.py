"""Synthetic personas, mobility traces and the ground-truth satisfaction oracle.

Each persona lives around a handful of anchor places (home, work, a commute
route, somewhere else) and follows a daily schedule. How tolerant a persona is
depends on where it is, which application it runs, and the phase of the day;
that dependence is encoded as a *tightness* in ``[0, 1]`` per
``(location, application, day phase)``:

    q_a5 = demand * (min_frac + (1 - min_frac) * tightness) + noise

with the lower thresholds at fixed fractions of ``q_a5``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterator, Mapping, Sequence

import numpy as np
import pandas as pd

from . import _rng
from .channel import CellConfig, cell_center, clamp_to_cell, grid_cells, step_position
from .zot import ZoTProfile

LOCATIONS = ("home", "work", "commute", "other")
APPLICATIONS = ("video", "voice", "browsing", "gaming")
DAY_PHASES = ("night", "morning", "afternoon", "evening")
DAY_S = 86400
PHASE_S = DAY_S // len(DAY_PHASES)

DEFAULT_DEMANDS = {"video": 5.0, "voice": 0.1, "browsing": 2.0, "gaming": 3.0}

# q_a2..q_a4 as fractions of q_a5
THRESHOLD_FRACTIONS = (0.25, 0.5, 0.75)

DATASET_COLUMNS = (
    "user_id", "persona_id", "ts_index", "time_of_day", "cell_row", "cell_col", "x", "y",
    "location_category", "speed", "application", "qos_p_mbps", "satisfaction",
)


def day_phase(time_of_day) -> np.ndarray | int:
    out = (np.asarray(time_of_day) % DAY_S) // PHASE_S
    return int(out) if out.ndim == 0 else out.astype(np.int64)


def application_demand(application: str, demands: Mapping[str, float] = DEFAULT_DEMANDS) -> float:
    """Demanded rate of an application, Mb/s. Same for every user."""
    try:
        return float(demands[application])
    except KeyError:
        raise ValueError(f"unknown application {application!r}") from None


@dataclass(frozen=True)
class Window:
    start_s: int
    end_s: int
    location: str
    app_mix: Mapping[str, float]


@dataclass
class Persona:
    id: int
    name: str
    anchors: dict[str, tuple[int, int]]
    schedule: list[Window]
    tolerance: dict[tuple[str, str, str], float]
    tolerance_noise_std: float = 0.05
    min_frac: float = 0.4
    anchor_radius_m: float = 15.0
    travel_speed: float = 1.4
    commute_speed: float = 10.0
    dwell_jitter_m: float = 3.0
    session_s: int = 600

    def __post_init__(self):
        if not self.schedule:
            raise ValueError(f"persona {self.name!r} has an empty schedule")
        for w in self.schedule:
            total = sum(w.app_mix.values())
            if abs(total - 1.0) > 1e-9:
                raise ValueError(f"app mix of window {w} sums to {total}")
            if w.location not in LOCATIONS:
                raise ValueError(f"unknown location {w.location!r}")
            if w.location != "other" and w.location not in self.anchors:
                raise ValueError(f"schedule visits {w.location!r} but no anchor is defined")
        for key, t in self.tolerance.items():
            if not 0.0 <= t <= 1.0:
                raise ValueError(f"tightness {t} for {key} outside [0, 1]")
        if not 0.0 <= self.min_frac <= 1.0:
            raise ValueError("min_frac must be in [0, 1]")

    def window_at(self, time_of_day: float) -> int:
        tod = time_of_day % DAY_S
        for i, w in enumerate(self.schedule):
            if w.start_s <= tod < w.end_s:
                return i
        raise ValueError(f"schedule of {self.name!r} does not cover t={tod}")

    def tightness(self, location: str, application: str, phase: int) -> float:
        return self.tolerance[(location, application, DAY_PHASES[phase])]

    def tightness_table(self) -> np.ndarray:
        """Tightness indexed ``[location, application, phase]``."""
        out = np.empty((len(LOCATIONS), len(APPLICATIONS), len(DAY_PHASES)))
        for i, loc in enumerate(LOCATIONS):
            for j, app in enumerate(APPLICATIONS):
                for k, ph in enumerate(DAY_PHASES):
                    out[i, j, k] = self.tolerance[(loc, app, ph)]
        return out


@dataclass(frozen=True)
class ContextRecord:
    ts_index: int
    time_of_day: int
    grid_cell: tuple[int, int]
    position: tuple[float, float]
    location_category: str
    speed: float
    application: str


@dataclass
class Trace:
    """Column-wise storage of a sequence of :class:`ContextRecord`.

    ``location`` and ``application`` hold indices into :data:`LOCATIONS` and
    :data:`APPLICATIONS`.
    """

    ts_index: np.ndarray
    time_of_day: np.ndarray
    cell_row: np.ndarray
    cell_col: np.ndarray
    x: np.ndarray
    y: np.ndarray
    location: np.ndarray
    speed: np.ndarray
    application: np.ndarray

    def __len__(self) -> int:
        return len(self.ts_index)

    def __getitem__(self, i: int) -> ContextRecord:
        return ContextRecord(
            ts_index=int(self.ts_index[i]),
            time_of_day=int(self.time_of_day[i]),
            grid_cell=(int(self.cell_row[i]), int(self.cell_col[i])),
            position=(float(self.x[i]), float(self.y[i])),
            location_category=LOCATIONS[self.location[i]],
            speed=float(self.speed[i]),
            application=APPLICATIONS[self.application[i]],
        )

    def __iter__(self) -> Iterator[ContextRecord]:
        return (self[i] for i in range(len(self)))

    @property
    def positions(self) -> np.ndarray:
        return np.column_stack([self.x, self.y])

    @classmethod
    def from_frame(cls, df: pd.DataFrame) -> "Trace":
        loc = pd.Categorical(df["location_category"], categories=LOCATIONS)
        app = pd.Categorical(df["application"], categories=APPLICATIONS)
        if (loc.codes < 0).any() or (app.codes < 0).any():
            raise ValueError("unknown location or application in frame")
        return cls(
            ts_index=df["ts_index"].to_numpy(np.int64),
            time_of_day=df["time_of_day"].to_numpy(np.int64),
            cell_row=df["cell_row"].to_numpy(np.int64),
            cell_col=df["cell_col"].to_numpy(np.int64),
            x=df["x"].to_numpy(float),
            y=df["y"].to_numpy(float),
            location=loc.codes.astype(np.int64),
            speed=df["speed"].to_numpy(float),
            application=app.codes.astype(np.int64),
        )


# --- location mapping -----------------------------------------------------

def anchor_points(anchors: Mapping[str, tuple[int, int]], cfg: CellConfig) -> dict[str, tuple[float, float]]:
    return {cat: cell_center(cell, cfg) for cat, cell in anchors.items()}


def map_location(position, anchors: Mapping[str, tuple[int, int]], radius_m: float,
                 cfg: CellConfig = CellConfig()) -> str:
    """Category of the nearest anchor within ``radius_m``, else ``"other"``.

    Equal distances resolve in the order home, work, commute, other.
    """
    codes = map_locations(np.asarray([position], dtype=float), anchors, radius_m, cfg)
    return LOCATIONS[codes[0]]


def map_locations(positions: np.ndarray, anchors: Mapping[str, tuple[int, int]], radius_m: float,
                  cfg: CellConfig = CellConfig()) -> np.ndarray:
    positions = np.asarray(positions, dtype=float)
    points = anchor_points(anchors, cfg)
    best = np.full(len(positions), np.inf)
    out = np.full(len(positions), LOCATIONS.index("other"), dtype=np.int64)
    for code, cat in enumerate(LOCATIONS):
        if cat not in points:
            continue
        ax, ay = points[cat]
        d = np.hypot(positions[:, 0] - ax, positions[:, 1] - ay)
        take = (d <= radius_m) & (d < best)
        out[take] = code
        best = np.where(take, d, best)
    return out


# --- traces ---------------------------------------------------------------

def generate_trace(persona: Persona, duration: float, seed: int, cfg: CellConfig = CellConfig(),
                   ts_len: float = 1.0, start_time: float = 0.0) -> Trace:
    """One context record per time slot, driven by the persona's schedule.

    Dwelling users jitter within ``dwell_jitter_m`` of their anchor; commuting
    users shuttle along the commute route at ``commute_speed``; between places
    they walk at ``travel_speed``.
    """
    if duration <= 0:
        raise ValueError("duration must be positive")
    n = int(round(duration / ts_len))
    rng = _rng.stream(seed, _rng.TRACE, persona.id)
    points = anchor_points(persona.anchors, cfg)
    jitter_steps = rng.normal(0.0, persona.dwell_jitter_m / 10.0, size=(n, 2))
    app_draws = rng.random(n)

    t0 = start_time % DAY_S
    tod = ((t0 + np.arange(n) * ts_len) % DAY_S).astype(np.int64)
    first = persona.schedule[persona.window_at(t0)]
    home = points.get(first.location, points.get("home", next(iter(points.values()))))
    pos = home
    offset = (0.0, 0.0)
    leg = 1.0
    window = -1
    session_end = -1.0
    app = 0

    xs = np.empty(n)
    ys = np.empty(n)
    speeds = np.empty(n)
    apps = np.empty(n, dtype=np.int64)
    r = persona.dwell_jitter_m
    for i in range(n):
        w_idx = persona.window_at(tod[i])
        w = persona.schedule[w_idx]
        now = i * ts_len
        if w_idx != window or now >= session_end:
            apps_ = list(w.app_mix)
            cdf = np.cumsum([w.app_mix[a] for a in apps_])
            app = APPLICATIONS.index(apps_[min(int(np.searchsorted(cdf, app_draws[i], side="right")), len(apps_) - 1)])
            session_end = now + persona.session_s
            window = w_idx
        anchor = points.get(w.location, points["home"])
        if w.location == "commute":
            # shuttle back and forth across the route anchor
            half = 0.6 * persona.anchor_radius_m
            target = (anchor[0] + leg * half, anchor[1])
            new = step_position(pos, target, persona.commute_speed, ts_len, cfg)
            if new == clamp_to_cell(target, cfg):
                leg = -leg
            offset = (0.0, 0.0)
        else:
            far = math.hypot(pos[0] - anchor[0], pos[1] - anchor[1]) > 2.0 * r
            if far:
                new = step_position(pos, anchor, persona.travel_speed, ts_len, cfg)
                offset = (new[0] - anchor[0], new[1] - anchor[1])
            else:
                ox = min(max(offset[0] + jitter_steps[i, 0], -r), r)
                oy = min(max(offset[1] + jitter_steps[i, 1], -r), r)
                offset = (ox, oy)
                new = clamp_to_cell((anchor[0] + ox, anchor[1] + oy), cfg)
        speeds[i] = math.hypot(new[0] - pos[0], new[1] - pos[1]) / ts_len
        pos = new
        xs[i], ys[i] = pos
        apps[i] = app

    positions = np.column_stack([xs, ys])
    rows, cols = grid_cells(positions, cfg)
    return Trace(
        ts_index=np.arange(n, dtype=np.int64),
        time_of_day=tod,
        cell_row=rows,
        cell_col=cols,
        x=xs,
        y=ys,
        location=map_locations(positions, persona.anchors, persona.anchor_radius_m, cfg),
        speed=speeds,
        application=apps,
    )


# --- ground truth ---------------------------------------------------------

def _adequate_from_q5(q5: np.ndarray) -> np.ndarray:
    q5 = np.asarray(q5, dtype=float)
    return np.stack([np.zeros_like(q5), *(f * q5 for f in THRESHOLD_FRACTIONS), q5], axis=-1)


def ground_truth_adequate(persona: Persona, trace: Trace, seed: int,
                          demands: Mapping[str, float] = DEFAULT_DEMANDS) -> np.ndarray:
    """Batched ground truth: ``(len(trace), 5)`` adequate thresholds."""
    demand = demand_vector(demands)[trace.application]
    tight = persona.tightness_table()[trace.location, trace.application, day_phase(trace.time_of_day)]
    noise = _rng.hashed_normal(seed, _rng.TOLERANCE_NOISE, persona.id, trace.ts_index)
    q5 = demand * (persona.min_frac + (1.0 - persona.min_frac) * tight) + persona.tolerance_noise_std * noise
    return _adequate_from_q5(np.clip(q5, 0.0, demand))


def ground_truth_profile(persona: Persona, ctx: ContextRecord, seed: int,
                         demands: Mapping[str, float] = DEFAULT_DEMANDS) -> ZoTProfile:
    """True tolerance of ``persona`` in context ``ctx``; deterministic in ``seed``."""
    demand = application_demand(ctx.application, demands)
    phase = day_phase(ctx.time_of_day)
    tight = persona.tightness(ctx.location_category, ctx.application, phase)
    noise = float(_rng.hashed_normal(seed, _rng.TOLERANCE_NOISE, persona.id, ctx.ts_index))
    q5 = demand * (persona.min_frac + (1.0 - persona.min_frac) * tight) + persona.tolerance_noise_std * noise
    q5 = min(max(q5, 0.0), demand)
    return ZoTProfile(demand, tuple(_adequate_from_q5(q5).tolist()))


def demand_vector(demands: Mapping[str, float] = DEFAULT_DEMANDS) -> np.ndarray:
    return np.array([application_demand(a, demands) for a in APPLICATIONS])


def satisfaction_batch(adequate: np.ndarray, qos_p: np.ndarray) -> np.ndarray:
    """Row-wise ``satisfaction_of`` for stacked thresholds."""
    return 1 + (np.asarray(qos_p, dtype=float)[:, None] >= adequate[:, 1:]).sum(axis=1)


# --- default personas -----------------------------------------------------

def _tolerance_table(persona_id: int, base: float) -> dict[tuple[str, str, str], float]:
    rng = np.random.default_rng(1000 + persona_id)
    loc_off = rng.uniform(-0.2, 0.2, len(LOCATIONS))
    app_off = rng.uniform(-0.2, 0.2, len(APPLICATIONS))
    phase_off = rng.uniform(-0.1, 0.1, len(DAY_PHASES))
    table = {}
    for i, loc in enumerate(LOCATIONS):
        for j, app in enumerate(APPLICATIONS):
            for k, ph in enumerate(DAY_PHASES):
                t = base + loc_off[i] + app_off[j] + phase_off[k]
                table[(loc, app, ph)] = float(np.clip(t, 0.02, 0.98))
    return table


def _cell(cfg: CellConfig, x: float, y: float) -> tuple[int, int]:
    rows, cols = grid_cells(np.array([[x, y]]), cfg)
    return int(rows[0]), int(cols[0])


def _h(hours: float) -> int:
    return int(round(hours * 3600))


def default_personas(cfg: CellConfig = CellConfig(), tolerance_noise_std: float = 0.05,
                     min_frac: float = 0.4) -> list[Persona]:
    """Four personas, each living in its own quadrant of the cell."""
    def anchors(cx, cy):
        return {
            "home": _cell(cfg, cx + 30, cy + 30),
            "work": _cell(cfg, cx - 30, cy - 30),
            "commute": _cell(cfg, cx, cy),
            "other": _cell(cfg, cx + 30, cy - 30),
        }

    def sched(*rows):
        return [Window(_h(a), _h(b), loc, mix) for a, b, loc, mix in rows]

    quiet = {"voice": 0.2, "browsing": 0.6, "video": 0.2}
    commuter = Persona(
        0, "commuter", anchors(150, 150),
        sched(
            (0, 7, "home", quiet),
            (7, 8, "commute", {"voice": 0.4, "browsing": 0.4, "video": 0.2}),
            (8, 17, "work", {"voice": 0.3, "browsing": 0.6, "video": 0.1}),
            (17, 18, "commute", {"voice": 0.3, "browsing": 0.3, "video": 0.4}),
            (18, 20, "other", {"browsing": 0.5, "video": 0.3, "voice": 0.2}),
            (20, 24, "home", {"video": 0.6, "browsing": 0.3, "voice": 0.1}),
        ),
        _tolerance_table(0, 0.25), commute_speed=12.0,
    )
    student = Persona(
        1, "student", anchors(-150, 150),
        sched(
            (0, 2, "home", {"gaming": 0.5, "video": 0.3, "browsing": 0.2}),
            (2, 9, "home", quiet),
            (9, 10, "commute", {"browsing": 0.5, "voice": 0.3, "video": 0.2}),
            (10, 16, "work", {"browsing": 0.6, "video": 0.2, "voice": 0.2}),
            (16, 21, "other", {"gaming": 0.4, "browsing": 0.3, "voice": 0.3}),
            (21, 24, "home", {"gaming": 0.4, "video": 0.4, "browsing": 0.2}),
        ),
        _tolerance_table(1, 0.6), commute_speed=5.0,
    )
    homebody = Persona(
        2, "homebody", anchors(-150, -150),
        sched(
            (0, 8, "home", quiet),
            (8, 11, "home", {"browsing": 0.5, "voice": 0.4, "video": 0.1}),
            (11, 13, "other", {"voice": 0.5, "browsing": 0.5}),
            (13, 18, "home", {"video": 0.4, "browsing": 0.4, "voice": 0.2}),
            (18, 24, "home", {"video": 0.5, "browsing": 0.3, "gaming": 0.2}),
        ),
        _tolerance_table(2, 0.45), commute_speed=1.4,
    )
    night_worker = Persona(
        3, "night worker", anchors(150, -150),
        sched(
            (0, 6, "work", {"voice": 0.5, "browsing": 0.5}),
            (6, 7, "commute", {"browsing": 0.4, "video": 0.3, "voice": 0.3}),
            (7, 15, "home", quiet),
            (15, 19, "other", {"video": 0.4, "gaming": 0.3, "browsing": 0.3}),
            (19, 21, "home", {"video": 0.6, "browsing": 0.4}),
            (21, 22, "commute", {"voice": 0.5, "browsing": 0.5}),
            (22, 24, "work", {"voice": 0.5, "browsing": 0.5}),
        ),
        _tolerance_table(3, 0.75), commute_speed=8.0,
    )
    out = [commuter, student, homebody, night_worker]
    for p in out:
        p.tolerance_noise_std = tolerance_noise_std
        p.min_frac = min_frac
    return out


# --- datasets -------------------------------------------------------------

QosPolicy = Callable[[np.random.Generator, np.ndarray], np.ndarray]


def uniform_qos(rng: np.random.Generator, demand: np.ndarray) -> np.ndarray:
    return rng.uniform(0.0, 1.0, size=len(demand)) * demand


def user_seeds(seed: int, user_id: int, stage: int = _rng.DEVELOPMENT) -> tuple[int, int]:
    """``(trace_seed, tolerance_seed)`` of one user in one stage."""
    return (_rng.derive_seed(seed, stage, user_id, _rng.TRACE),
            _rng.derive_seed(seed, stage, user_id, _rng.TOLERANCE_NOISE))


def trace_frame(trace: Trace) -> pd.DataFrame:
    return pd.DataFrame({
        "ts_index": trace.ts_index,
        "time_of_day": trace.time_of_day,
        "cell_row": trace.cell_row,
        "cell_col": trace.cell_col,
        "x": trace.x,
        "y": trace.y,
        "location_category": np.asarray(LOCATIONS, dtype=object)[trace.location],
        "speed": trace.speed,
        "application": np.asarray(APPLICATIONS, dtype=object)[trace.application],
    })


def emit_dataset(personas: Sequence[Persona], users_per_persona: int, duration: float, seed: int,
                 qos_policy: QosPolicy = uniform_qos, path: str | Path | None = None,
                 cfg: CellConfig = CellConfig(), demands: Mapping[str, float] = DEFAULT_DEMANDS,
                 ts_len: float = 1.0) -> pd.DataFrame:
    """Labelled development samples, one row per (user, slot).

    Users are numbered persona by persona. When ``path`` is given the frame is
    also written as CSV with the columns of :data:`DATASET_COLUMNS`.
    """
    if not personas:
        raise ValueError("need at least one persona")
    if users_per_persona < 1:
        raise ValueError("users_per_persona must be >= 1")
    if path is not None:
        path = Path(path)
        if not path.parent.exists():
            raise OSError(f"output directory {path.parent} does not exist")
    dvec = demand_vector(demands)
    frames = []
    user_id = 0
    for persona in personas:
        for _ in range(users_per_persona):
            trace_seed, tol_seed = user_seeds(seed, user_id)
            trace = generate_trace(persona, duration, trace_seed, cfg, ts_len)
            adequate = ground_truth_adequate(persona, trace, tol_seed, demands)
            qos = qos_policy(_rng.stream(seed, _rng.DEVELOPMENT, user_id, _rng.QOS_SAMPLE),
                             dvec[trace.application])
            df = trace_frame(trace)
            df.insert(0, "persona_id", persona.id)
            df.insert(0, "user_id", user_id)
            df["qos_p_mbps"] = qos
            df["satisfaction"] = satisfaction_batch(adequate, qos)
            frames.append(df)
            user_id += 1
    out = pd.concat(frames, ignore_index=True)[list(DATASET_COLUMNS)]
    if path is not None:
        write_dataset(out, path)
    return out


def write_dataset(df: pd.DataFrame, path: str | Path) -> None:
    df[list(DATASET_COLUMNS)].to_csv(path, index=False, lineterminator="\n", encoding="utf-8")


def read_dataset(path: str | Path) -> pd.DataFrame:
    df = pd.read_csv(path)
    missing = set(DATASET_COLUMNS) - set(df.columns)
    if missing:
        raise ValueError(f"dataset is missing columns {sorted(missing)}")
    return df
