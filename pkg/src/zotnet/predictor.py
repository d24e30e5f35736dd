"""Two-phase satisfaction predictor.

Phase 1 maps a context feature vector to persona membership probabilities with
a nearest-centroid softmax. Phase 2 keeps, for every persona and context bucket
``(location, application, day phase)``, an estimate of the five adequate-rate
thresholds. A prediction mixes the persona estimates by membership
probability; satisfaction for any gap then follows from :mod:`zotnet.zot`.

Thresholds are stored as fractions of the application's demand so that buckets
of different applications share one scale.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np
import pandas as pd

from . import _rng
from .channel import CellConfig
from .synth import (APPLICATIONS, DAY_PHASES, DAY_S, DEFAULT_DEMANDS, LOCATIONS, ContextRecord, Trace,
                    application_demand, day_phase, demand_vector)
from .zot import NUM_LEVELS, ZoTProfile, satisfaction_of

FORMAT_NAME = "zotnet-two-phase-model"
FORMAT_VERSION = 1

SPEED_SCALE = 15.0

# feature layout
_SIN, _COS = 0, 1
_PHASE = slice(2, 2 + len(DAY_PHASES))
_LOC = slice(_PHASE.stop, _PHASE.stop + len(LOCATIONS))
_SPEED = _LOC.stop
_APP = slice(_SPEED + 1, _SPEED + 1 + len(APPLICATIONS))
_POS = slice(_APP.stop, _APP.stop + 2)
NUM_FEATURES = _POS.stop


class NotTrainedError(RuntimeError):
    pass


def preprocess(record: ContextRecord, cfg: CellConfig = CellConfig()) -> np.ndarray:
    """Encode one context record as a fixed-length feature vector."""
    v = np.zeros(NUM_FEATURES)
    angle = 2.0 * math.pi * (record.time_of_day % DAY_S) / DAY_S
    v[_SIN] = math.sin(angle)
    v[_COS] = math.cos(angle)
    v[_PHASE.start + day_phase(record.time_of_day)] = 1.0
    v[_LOC.start + LOCATIONS.index(record.location_category)] = 1.0
    v[_SPEED] = record.speed / SPEED_SCALE
    v[_APP.start + APPLICATIONS.index(record.application)] = 1.0
    v[_POS] = np.asarray(record.position) / cfg.cell_radius_m
    return v


def preprocess_trace(trace: Trace, cfg: CellConfig = CellConfig()) -> np.ndarray:
    n = len(trace)
    out = np.zeros((n, NUM_FEATURES))
    angle = 2.0 * np.pi * (trace.time_of_day % DAY_S) / DAY_S
    out[:, _SIN] = np.sin(angle)
    out[:, _COS] = np.cos(angle)
    rows = np.arange(n)
    out[rows, _PHASE.start + day_phase(trace.time_of_day)] = 1.0
    out[rows, _LOC.start + trace.location] = 1.0
    out[:, _SPEED] = trace.speed / SPEED_SCALE
    out[rows, _APP.start + trace.application] = 1.0
    out[:, _POS.start] = trace.x / cfg.cell_radius_m
    out[:, _POS.start + 1] = trace.y / cfg.cell_radius_m
    return out


def decode_bucket(features: np.ndarray) -> tuple[int, int, int]:
    """``(location, application, phase)`` indices recovered from a feature vector."""
    return (int(np.argmax(features[_LOC])), int(np.argmax(features[_APP])),
            int(np.argmax(features[_PHASE])))


# --- threshold fitting ----------------------------------------------------

def fit_threshold(qos: np.ndarray, reached: np.ndarray, upper: float = 1.0) -> float:
    """Decision-stump threshold separating ``reached`` from unreached samples.

    The split minimising misclassifications is placed midway between the two
    neighbouring observations; with several equally good splits the median
    one is taken.
    """
    order = np.argsort(qos, kind="stable")
    q = qos[order]
    y = reached[order].astype(np.int64)
    n = len(q)
    if n == 0:
        raise ValueError("no samples")
    # errors(k): threshold between q[k-1] and q[k]
    pos_below = np.concatenate([[0], np.cumsum(y)])
    neg_above = np.concatenate([[0], np.cumsum((1 - y)[::-1])])[::-1]
    errors = pos_below + neg_above
    best = np.flatnonzero(errors == errors.min())
    k = int(best[len(best) // 2])
    if k == 0:
        return float(q[0])
    if k == n:
        return float(upper)
    return 0.5 * float(q[k - 1] + q[k])


def fit_adequate(frac: np.ndarray, sat: np.ndarray) -> np.ndarray:
    """Five thresholds (fractions of demand) from ``(qos/demand, level)`` pairs."""
    est = np.zeros(NUM_LEVELS)
    for level in range(2, NUM_LEVELS + 1):
        est[level - 1] = fit_threshold(frac, sat >= level)
    return _project(est)


def _project(frac: np.ndarray) -> np.ndarray:
    out = np.sort(np.clip(frac, 0.0, 1.0))
    out[0] = 0.0
    return out


# --- model ----------------------------------------------------------------

@dataclass
class TrainReport:
    phase1_accuracy: float
    phase2_rmse: float
    satisfaction_accuracy: float
    n_train: int
    n_heldout: int
    n_buckets_fitted: int

    def as_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class TwoPhaseModel:
    centroids: np.ndarray | None = None
    scale: np.ndarray | None = None
    temperature: float = 1.0
    bucket: np.ndarray | None = None       # (P, L, A, H, 5) fractions of demand
    bucket_count: np.ndarray | None = None  # (P, L, A, H) training samples per bucket
    fallback: np.ndarray | None = None     # (P, 5)
    demands: dict = field(default_factory=lambda: dict(DEFAULT_DEMANDS))
    cell_radius_m: float = 500.0
    learning_rate: float = 0.1
    drift_threshold: float = 50.0
    drift_decay: float = 0.98
    drift: np.ndarray | None = None         # (P, L, A, H)
    update_count: int = 0
    drift_resets: int = 0

    @property
    def trained(self) -> bool:
        return self.centroids is not None and self.bucket is not None

    @property
    def num_personas(self) -> int:
        self._require()
        return len(self.centroids)

    @property
    def drift_counter(self) -> float:
        return 0.0 if self.drift is None else float(self.drift.max())

    def _require(self):
        if not self.trained:
            raise NotTrainedError("model has not been trained")

    def copy(self) -> "TwoPhaseModel":
        return TwoPhaseModel.from_dict(self.to_dict())

    # phase 1
    def predict_persona(self, features: np.ndarray) -> np.ndarray:
        """Persona probability vector for one feature vector (or a batch)."""
        self._require()
        x = np.atleast_2d(np.asarray(features, dtype=float))
        d2 = (((x[:, None, :] - self.centroids[None]) / self.scale) ** 2).sum(axis=-1)
        logits = -d2 / (2.0 * self.temperature)
        logits -= logits.max(axis=1, keepdims=True)
        p = np.exp(logits)
        p /= p.sum(axis=1, keepdims=True)
        return p[0] if np.ndim(features) == 1 else p

    # phase 2
    def adequate_fractions(self, probs: np.ndarray, loc: int, app: int, phase: int) -> np.ndarray:
        self._require()
        return _project(np.asarray(probs) @ self.bucket[:, loc, app, phase])

    def predict_profile(self, features: np.ndarray, probs: np.ndarray, application: str) -> ZoTProfile:
        loc, app, phase = decode_bucket(features)
        if APPLICATIONS[app] != application:
            app = APPLICATIONS.index(application)
        demand = application_demand(application, self.demands)
        frac = self.adequate_fractions(probs, loc, app, phase)
        return ZoTProfile.project(demand, (frac * demand).tolist())

    def predict_satisfaction(self, features: np.ndarray, probs: np.ndarray, application: str,
                             delta: float) -> int:
        profile = self.predict_profile(features, probs, application)
        if not 0.0 <= delta <= profile.qos_demand + 1e-12:
            raise ValueError("delta must lie in [0, demand]")
        return satisfaction_of(profile, max(profile.qos_demand - delta, 0.0))

    # online learning
    def online_update(self, features: np.ndarray, probs: np.ndarray, application: str,
                      qos_p: float, measured: int) -> bool:
        """Fold one feedback sample into the model; returns whether the prediction was right."""
        loc, _, phase = decode_bucket(features)
        app = APPLICATIONS.index(application)
        demand = application_demand(application, self.demands)
        frac = self.adequate_fractions(probs, loc, app, phase)
        f = qos_p / demand
        predicted = 1 + int(np.count_nonzero(f >= frac[1:]))
        self.update_bucket(int(np.argmax(probs)), loc, app, phase, f, predicted, int(measured))
        return predicted == measured

    def update_bucket(self, persona: int, loc: int, app: int, phase: int, f: float,
                      predicted: int, measured: int) -> None:
        """Move one bucket's thresholds toward consistency with ``(f, measured)``.

        ``f`` is the provided rate as a fraction of demand. On a wrong prediction
        every threshold on the wrong side of ``f`` jumps past it, overshooting by
        ``learning_rate`` times its error. On a right prediction the two
        thresholds bracketing ``f`` creep toward it at a tenth of that rate.
        """
        self._require()
        q = self.bucket[persona, loc, app, phase]
        eta = self.learning_rate
        key = (persona, loc, app, phase)
        self.update_count += 1
        if predicted != measured:
            eps = 1e-9
            for i in range(2, NUM_LEVELS + 1):
                j = i - 1
                if i > measured and q[j] <= f:
                    q[j] = min(f + eta * (f - q[j]) + eps, 1.0)
                elif i <= measured and q[j] > f:
                    q[j] = max(f - eta * (q[j] - f), 0.0)
            q[:] = _project(q)
            self.drift[key] += 1.0
            if self.drift[key] > self.drift_threshold:
                q[:] = self.fallback[persona]
                self.drift[key] = 0.0
                self.drift_resets += 1
            return
        small = 0.1 * eta
        if measured >= 2:
            q[measured - 1] += small * (f - q[measured - 1])
        if measured < NUM_LEVELS:
            q[measured] -= small * (q[measured] - f)
        q[:] = _project(q)
        self.drift[key] *= self.drift_decay

    # persistence
    def to_dict(self) -> dict:
        self._require()
        return {
            "format": FORMAT_NAME,
            "version": FORMAT_VERSION,
            "locations": list(LOCATIONS),
            "applications": list(APPLICATIONS),
            "day_phases": list(DAY_PHASES),
            "num_features": NUM_FEATURES,
            "demands": {a: float(self.demands[a]) for a in APPLICATIONS},
            "cell_radius_m": float(self.cell_radius_m),
            "temperature": float(self.temperature),
            "learning_rate": float(self.learning_rate),
            "drift_threshold": float(self.drift_threshold),
            "drift_decay": float(self.drift_decay),
            "update_count": int(self.update_count),
            "drift_resets": int(self.drift_resets),
            "centroids": self.centroids.tolist(),
            "scale": self.scale.tolist(),
            "bucket": self.bucket.tolist(),
            "bucket_count": self.bucket_count.tolist(),
            "fallback": self.fallback.tolist(),
            "drift": self.drift.tolist(),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "TwoPhaseModel":
        if d.get("format") != FORMAT_NAME:
            raise ValueError("not a two-phase model document")
        if d.get("version") != FORMAT_VERSION:
            raise ValueError(f"unsupported model version {d.get('version')}")
        if (tuple(d["locations"]), tuple(d["applications"]), tuple(d["day_phases"])) != (
                LOCATIONS, APPLICATIONS, DAY_PHASES) or d["num_features"] != NUM_FEATURES:
            raise ValueError("model was built for a different feature layout")
        return cls(
            centroids=np.array(d["centroids"], dtype=float),
            scale=np.array(d["scale"], dtype=float),
            temperature=float(d["temperature"]),
            bucket=np.array(d["bucket"], dtype=float),
            bucket_count=np.array(d["bucket_count"], dtype=np.int64),
            fallback=np.array(d["fallback"], dtype=float),
            demands=dict(d["demands"]),
            cell_radius_m=float(d["cell_radius_m"]),
            learning_rate=float(d["learning_rate"]),
            drift_threshold=float(d["drift_threshold"]),
            drift_decay=float(d["drift_decay"]),
            drift=np.array(d["drift"], dtype=float),
            update_count=int(d["update_count"]),
            drift_resets=int(d["drift_resets"]),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "TwoPhaseModel":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def predict_persona(model: TwoPhaseModel, features: np.ndarray) -> np.ndarray:
    return model.predict_persona(features)


def predict_profile(model: TwoPhaseModel, features: np.ndarray, probs: np.ndarray,
                    application: str) -> ZoTProfile:
    return model.predict_profile(features, probs, application)


def predict_satisfaction(model: TwoPhaseModel, features: np.ndarray, probs: np.ndarray,
                         application: str, delta: float) -> int:
    return model.predict_satisfaction(features, probs, application, delta)


def online_update(model: TwoPhaseModel, features: np.ndarray, probs: np.ndarray, application: str,
                  qos_p: float, measured: int) -> TwoPhaseModel:
    model.online_update(features, probs, application, qos_p, measured)
    return model


# --- training -------------------------------------------------------------

def frame_features(df: pd.DataFrame, cfg: CellConfig = CellConfig()) -> np.ndarray:
    return preprocess_trace(Trace.from_frame(df), cfg)


def split_users(df: pd.DataFrame, label_col: str, holdout: float, seed: int) -> np.ndarray:
    """Boolean mask of held-out rows, ``holdout`` of users per persona label.

    A label with a single user keeps that user for training and holds out the
    last ``holdout`` share of its rows instead.
    """
    mask = np.zeros(len(df), dtype=bool)
    if holdout <= 0:
        return mask
    rng = _rng.stream(seed, _rng.SPLIT)
    users = df.groupby(label_col, sort=True)["user_id"].unique()
    for label, ids in users.items():
        ids = np.sort(ids)
        if len(ids) >= 2:
            k = max(1, int(round(holdout * len(ids))))
            k = min(k, len(ids) - 1)
            chosen = rng.choice(ids, size=k, replace=False)
            mask |= df["user_id"].isin(chosen).to_numpy()
        else:
            rows = np.flatnonzero((df[label_col] == label).to_numpy())
            cut = int(round(len(rows) * (1.0 - holdout)))
            mask[rows[cut:]] = True
    return mask


def train(df: pd.DataFrame, seed: int = 0, label_col: str = "persona_id", holdout: float = 0.2,
          cfg: CellConfig = CellConfig(), demands: Mapping[str, float] = DEFAULT_DEMANDS,
          min_bucket_samples: int = 20, temperature: float = 1.0, learning_rate: float = 0.1,
          drift_threshold: float = 50.0) -> tuple[TwoPhaseModel, TrainReport]:
    """Fit both phases on labelled samples and score them on held-out users."""
    if len(df) == 0:
        raise ValueError("empty training set")
    labels_raw = df[label_col].to_numpy()
    label_values = np.unique(labels_raw)
    if not np.array_equal(label_values, np.arange(len(label_values))):
        raise ValueError(f"{label_col} must be 0..P-1, got {label_values}")
    num_p = len(label_values)
    held = split_users(df, label_col, holdout, seed)
    tr = ~held

    features = frame_features(df, cfg)
    labels = labels_raw.astype(np.int64)
    trace = Trace.from_frame(df)
    dvec = demand_vector(demands)
    frac = df["qos_p_mbps"].to_numpy(float) / dvec[trace.application]
    sat = df["satisfaction"].to_numpy(np.int64)
    phase = day_phase(trace.time_of_day)

    # phase 1: class centroids, pooled within-class spread
    centroids = np.zeros((num_p, NUM_FEATURES))
    resid = np.zeros(NUM_FEATURES)
    for p in range(num_p):
        rows = tr & (labels == p)
        if not rows.any():
            rows = labels == p
        centroids[p] = features[rows].mean(axis=0)
        resid += ((features[rows] - centroids[p]) ** 2).sum(axis=0)
    scale = np.maximum(np.sqrt(resid / max(int(tr.sum()), 1)), 0.05)

    # phase 2: thresholds per persona and bucket
    shape = (num_p, len(LOCATIONS), len(APPLICATIONS), len(DAY_PHASES))
    bucket = np.zeros(shape + (NUM_LEVELS,))
    count = np.zeros(shape, dtype=np.int64)
    fallback = np.zeros((num_p, NUM_LEVELS))
    fitted = 0
    key = np.ravel_multi_index((labels, trace.location, trace.application, phase), shape)
    train_rows = np.flatnonzero(tr)
    order = train_rows[np.argsort(key[train_rows], kind="stable")]
    keys_sorted = key[order]
    starts = np.flatnonzero(np.r_[True, keys_sorted[1:] != keys_sorted[:-1]])
    ends = np.r_[starts[1:], len(order)]
    for p in range(num_p):
        rows = tr & (labels == p)
        fallback[p] = fit_adequate(frac[rows], sat[rows]) if rows.any() else fit_adequate(frac[tr], sat[tr])
    bucket[:] = fallback[:, None, None, None, :]
    for s, e in zip(starts, ends):
        idx = np.unravel_index(keys_sorted[s], shape)
        rows = order[s:e]
        count[idx] = len(rows)
        if len(rows) >= min_bucket_samples:
            bucket[idx] = fit_adequate(frac[rows], sat[rows])
            fitted += 1

    model = TwoPhaseModel(
        centroids=centroids, scale=scale, temperature=temperature, bucket=bucket, bucket_count=count,
        fallback=fallback, demands={a: float(demands[a]) for a in APPLICATIONS},
        cell_radius_m=cfg.cell_radius_m, learning_rate=learning_rate, drift_threshold=drift_threshold,
        drift=np.zeros(shape),
    )
    report = evaluate(model, df[held] if held.any() else df, cfg, label_col)
    report.n_train = int(tr.sum())
    report.n_heldout = int(held.sum())
    report.n_buckets_fitted = fitted
    return model, report


def predicted_adequate(model: TwoPhaseModel, probs: np.ndarray, trace: Trace) -> np.ndarray:
    """Mixture thresholds (Mb/s) for every row of a trace, shape ``(n, 5)``."""
    phase = day_phase(trace.time_of_day)
    per_persona = model.bucket[:, trace.location, trace.application, phase]  # (P, n, 5)
    frac = np.einsum("np,pnk->nk", probs, per_persona)
    frac = np.sort(np.clip(frac, 0.0, 1.0), axis=1)
    frac[:, 0] = 0.0
    return frac * demand_vector(model.demands)[trace.application][:, None]


def evaluate(model: TwoPhaseModel, df: pd.DataFrame, cfg: CellConfig = CellConfig(),
             label_col: str = "persona_id") -> TrainReport:
    """Score a model on labelled samples.

    The threshold RMSE is measured against the samples themselves: for each
    sample and level, how far the predicted threshold would have to move to
    agree with the observed satisfaction.
    """
    trace = Trace.from_frame(df)
    features = preprocess_trace(trace, cfg)
    probs = model.predict_persona(features)
    acc = float(np.mean(np.argmax(probs, axis=1) == df[label_col].to_numpy()))
    adequate = predicted_adequate(model, probs, trace)
    qos = df["qos_p_mbps"].to_numpy(float)
    sat = df["satisfaction"].to_numpy(np.int64)
    levels = np.arange(2, NUM_LEVELS + 1)
    reached = sat[:, None] >= levels[None]
    q = adequate[:, 1:]
    # reached -> threshold must be <= qos; unreached -> threshold must be > qos
    miss = np.where(reached, np.maximum(q - qos[:, None], 0.0), np.maximum(qos[:, None] - q, 0.0))
    pred_sat = 1 + (qos[:, None] >= q).sum(axis=1)
    return TrainReport(
        phase1_accuracy=acc,
        phase2_rmse=float(np.sqrt(np.mean(miss ** 2))),
        satisfaction_accuracy=float(np.mean(pred_sat == sat)),
        n_train=0, n_heldout=len(df), n_buckets_fitted=0,
    )


# --- persona clustering ---------------------------------------------------

def user_behaviour(df: pd.DataFrame, cfg: CellConfig = CellConfig(),
                   demands: Mapping[str, float] = DEFAULT_DEMANDS) -> tuple[np.ndarray, np.ndarray]:
    """Per-user aggregate vectors: mean features plus mean satisfaction per rate quartile."""
    features = frame_features(df, cfg)
    trace = Trace.from_frame(df)
    frac = df["qos_p_mbps"].to_numpy(float) / demand_vector(demands)[trace.application]
    quart = np.clip((frac * 4).astype(np.int64), 0, 3)
    sat = df["satisfaction"].to_numpy(float)
    users = df["user_id"].to_numpy()
    ids = np.unique(users)
    out = np.zeros((len(ids), NUM_FEATURES + 4))
    for k, u in enumerate(ids):
        rows = users == u
        out[k, :NUM_FEATURES] = features[rows].mean(axis=0)
        for qt in range(4):
            sel = rows & (quart == qt)
            out[k, NUM_FEATURES + qt] = sat[sel].mean() / 5.0 if sel.any() else 0.0
    return ids, out


def cluster_personas(df: pd.DataFrame, num_clusters: int, seed: int = 0,
                     cfg: CellConfig = CellConfig(),
                     demands: Mapping[str, float] = DEFAULT_DEMANDS) -> tuple[dict[int, int], np.ndarray]:
    """k-means over per-user behaviour; returns ``{user_id: cluster}`` and centroids."""
    from sklearn.cluster import KMeans

    if num_clusters < 1:
        raise ValueError("num_clusters must be >= 1")
    if len(df) == 0:
        raise ValueError("no samples to cluster")
    ids, agg = user_behaviour(df, cfg, demands)
    if num_clusters > len(ids):
        raise ValueError(f"{num_clusters} clusters requested for {len(ids)} users")
    km = KMeans(n_clusters=num_clusters, n_init=10, max_iter=100, tol=0.0, random_state=seed)
    labels = km.fit_predict(agg)
    # relabel by first appearance so ids are stable across runs
    remap = {}
    for lab in labels:
        remap.setdefault(int(lab), len(remap))
    assign = {int(u): remap[int(lab)] for u, lab in zip(ids, labels)}
    centroids = km.cluster_centers_[[k for k, _ in sorted(remap.items(), key=lambda kv: kv[1])]]
    return assign, centroids
