"""Single-cell downlink link budget and user geometry.

One eNB sits at the origin of a square cell ``[-radius, radius]^2`` tiled into a
``k x k`` grid. Each user sees the same distance-based path loss and log-normal
shadowing on every resource block, with independent Rayleigh fading per block.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from . import _rng


@dataclass(frozen=True)
class CellConfig:
    num_enb: int = 1
    num_users: int = 3
    num_rbs: int = 9
    subcarriers_per_rb: int = 12
    rb_bandwidth_hz: float = 180e3
    carrier_freq_hz: float = 2e9
    shadowing_std_db: float = 8.0
    noise_figure_db: float = 9.0
    noise_density_dbm_hz: float = -174.0
    grid_k: int = 100
    cell_radius_m: float = 500.0
    enb_tx_power_dbm: float = 46.0
    min_distance_m: float = 1.0
    se_cap: float = 7.4

    def __post_init__(self):
        for name in ("num_enb", "num_users", "num_rbs", "subcarriers_per_rb", "grid_k"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        for name in ("rb_bandwidth_hz", "carrier_freq_hz", "cell_radius_m", "min_distance_m", "se_cap"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.shadowing_std_db < 0:
            raise ValueError("shadowing_std_db must be non-negative")
        if self.num_enb != 1:
            raise ValueError("only a single eNB is modelled")

    @property
    def cell_side_m(self) -> float:
        return 2.0 * self.cell_radius_m / self.grid_k

    @property
    def per_rb_tx_power_dbm(self) -> float:
        return self.enb_tx_power_dbm - 10.0 * math.log10(self.num_rbs)

    def to_dict(self) -> dict:
        return asdict(self)


def db_to_linear(db):
    return np.power(10.0, np.asarray(db, dtype=float) / 10.0)


def linear_to_db(x):
    return 10.0 * np.log10(np.asarray(x, dtype=float))


def path_loss_db(d, min_distance: float = 1.0):
    """Distance attenuation ``35.3 + 37.6 log10(d)`` in dB; ``d`` in meters."""
    d = np.maximum(np.asarray(d, dtype=float), min_distance)
    out = 35.3 + 37.6 * np.log10(d)
    return float(out) if out.ndim == 0 else out


def noise_power_dbm(bandwidth_hz: float, noise_figure_db: float,
                    noise_density_dbm_hz: float = -174.0) -> float:
    if bandwidth_hz <= 0:
        raise ValueError("bandwidth must be positive")
    return noise_density_dbm_hz + 10.0 * math.log10(bandwidth_hz) + noise_figure_db


def rb_rate(snr, cfg: CellConfig = CellConfig()):
    """Capped Shannon rate of one resource block, Mb/s."""
    snr = np.asarray(snr, dtype=float)
    se = np.minimum(np.log2(1.0 + np.maximum(snr, 0.0)), cfg.se_cap)
    out = cfg.rb_bandwidth_hz * se / 1e6
    return float(out) if out.ndim == 0 else out


# --- geometry -------------------------------------------------------------

def clamp_to_cell(position, cfg: CellConfig) -> tuple[float, float]:
    r = cfg.cell_radius_m
    return (min(max(float(position[0]), -r), r), min(max(float(position[1]), -r), r))


def grid_cell(position, cfg: CellConfig) -> tuple[int, int]:
    """``(row, col)`` of the grid square containing ``position``.

    Rows follow ``y`` and columns follow ``x``; the cell edge ``+radius`` folds
    into the last row/column.
    """
    rows, cols = grid_cells(np.asarray([position], dtype=float), cfg)
    return int(rows[0]), int(cols[0])


def grid_cells(positions: np.ndarray, cfg: CellConfig) -> tuple[np.ndarray, np.ndarray]:
    positions = np.asarray(positions, dtype=float)
    idx = np.floor((positions + cfg.cell_radius_m) / cfg.cell_side_m).astype(np.int64)
    idx = np.clip(idx, 0, cfg.grid_k - 1)
    return idx[:, 1], idx[:, 0]


def cell_center(cell: tuple[int, int], cfg: CellConfig) -> tuple[float, float]:
    row, col = cell
    side = cfg.cell_side_m
    return (-cfg.cell_radius_m + (col + 0.5) * side, -cfg.cell_radius_m + (row + 0.5) * side)


def step_position(position, target, speed: float, ts_len: float, cfg: CellConfig) -> tuple[float, float]:
    """Move ``speed * ts_len`` meters toward ``target``; arrive exactly if closer."""
    if speed < 0:
        raise ValueError("speed must be non-negative")
    x, y = float(position[0]), float(position[1])
    dx, dy = float(target[0]) - x, float(target[1]) - y
    dist = math.hypot(dx, dy)
    step = speed * ts_len
    if dist <= step:
        return clamp_to_cell(target, cfg)
    f = step / dist
    return clamp_to_cell((x + f * dx, y + f * dy), cfg)


# --- channel sampling -----------------------------------------------------

@dataclass
class ChannelState:
    """Link state of one user on every RB for one time slot."""

    path_loss_db: float
    shadowing_db: float
    fading_gain: np.ndarray
    snr: np.ndarray
    rate: np.ndarray


class ChannelSampler:
    """Per-user channel process.

    Shadowing is redrawn only when the user enters a new grid square; fading is
    drawn fresh per RB per slot. Two independent generators back the two
    processes, so a whole trace can be sampled in one batched call with exactly
    the values the per-slot path would produce.
    """

    def __init__(self, cfg: CellConfig, seed: int, user: int = 0, stage: int = _rng.PRODUCTION):
        self.cfg = cfg
        self._fading = _rng.stream(seed, stage, user, _rng.FADING)
        self._shadow = _rng.stream(seed, stage, user, _rng.SHADOWING)
        self._cell = None
        self._shadow_db = 0.0
        self._noise_mw = float(db_to_linear(noise_power_dbm(cfg.rb_bandwidth_hz, cfg.noise_figure_db,
                                                            cfg.noise_density_dbm_hz)))

    def _shadowing_for(self, cell) -> float:
        if cell != self._cell:
            self._cell = cell
            self._shadow_db = float(self._shadow.normal(0.0, self.cfg.shadowing_std_db))
        return self._shadow_db

    def sample(self, position) -> ChannelState:
        cfg = self.cfg
        cell = grid_cell(position, cfg)
        shadow = self._shadowing_for(cell)
        pl = path_loss_db(math.hypot(position[0], position[1]), cfg.min_distance_m)
        fading = self._fading.exponential(1.0, size=cfg.num_rbs)
        rx_mw = float(db_to_linear(cfg.per_rb_tx_power_dbm - pl - shadow))
        snr = rx_mw * fading / self._noise_mw
        return ChannelState(pl, shadow, fading, snr, rb_rate(snr, cfg))

    def sample_trace(self, positions: np.ndarray) -> np.ndarray:
        """Rates (Mb/s) with shape ``(len(positions), num_rbs)`` for a whole trace."""
        cfg = self.cfg
        positions = np.asarray(positions, dtype=float)
        n = len(positions)
        rows, cols = grid_cells(positions, cfg)
        shadow = np.empty(n)
        # shadowing: one draw per run of identical grid cells
        for i in range(n):
            shadow[i] = self._shadowing_for((int(rows[i]), int(cols[i])))
        pl = path_loss_db(np.hypot(positions[:, 0], positions[:, 1]), cfg.min_distance_m)
        fading = self._fading.exponential(1.0, size=(n, cfg.num_rbs))
        rx_mw = db_to_linear(cfg.per_rb_tx_power_dbm - pl - shadow)
        snr = rx_mw[:, None] * fading / self._noise_mw
        return rb_rate(snr, cfg)
