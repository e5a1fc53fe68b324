"""Snapshot norms, energy budget, decay-rate fits and trajectory comparison."""

from __future__ import annotations

import csv
import dataclasses
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .fourier_field import SpectralField, VECTOR, SYM_TENSOR, gradient, inner_coeffs
from .integrator import SimState, dissipation_rate, energy
from .littlewood_paley import BesovParams, besov_norm
from .oldroyd_rhs import ModelParams, gamma_quantity


@dataclass(frozen=True)
class DiagnosticsConfig:
    """``hs`` is the Sobolev index for ``hs_tau``; ``besov_s`` defaults to ``dim/besov_p``."""

    hs: float = 2.0
    besov_s: Optional[float] = None
    besov_p: float = 2.0

    def besov_params(self, dim: int) -> BesovParams:
        s = dim / self.besov_p if self.besov_s is None else self.besov_s
        return BesovParams(s=s, p=self.besov_p, r=1.0)


@dataclass(frozen=True)
class TimeSeriesRecord:
    t: float
    l2_u: float
    h1_u: float
    hm1_u: float
    l2_tau: float
    h1_tau: float
    hs_tau: float
    l2_gamma: float
    besov_u: float
    energy: float
    budget_residual: float
    dissipation_rate: float
    dissipated: float


COLUMNS = tuple(f.name for f in dataclasses.fields(TimeSeriesRecord))


def _sq(coeffs, grid, rank, weight=None):
    c = coeffs if weight is None else coeffs * np.sqrt(weight)
    return max(inner_coeffs(c, c, grid, rank), 0.0)


def snapshot(state: SimState, params: ModelParams, cfg: DiagnosticsConfig = DiagnosticsConfig(),
             budget_residual: float = 0.0) -> TimeSeriesRecord:
    """All norms by Parseval; Besov blocks with p != 2 use collocation quadrature."""
    g = state.grid
    u, tau = state.u_hat.coeffs, state.tau_hat.coeffs
    gamma = gamma_quantity(state, params)
    grad_u = gradient(state.u_hat)
    return TimeSeriesRecord(
        t=float(state.t),
        l2_u=math.sqrt(_sq(u, g, VECTOR)),
        h1_u=math.sqrt(_sq(u, g, VECTOR, g.k2)),
        hm1_u=math.sqrt(_sq(u, g, VECTOR, g.inv_k2)),
        l2_tau=math.sqrt(_sq(tau, g, SYM_TENSOR)),
        h1_tau=math.sqrt(_sq(tau, g, SYM_TENSOR, g.k2)),
        hs_tau=math.sqrt(_sq(tau, g, SYM_TENSOR, (1.0 + g.k2) ** cfg.hs)),
        l2_gamma=math.sqrt(_sq(gamma.coeffs, g, gamma.rank)),
        besov_u=besov_norm(grad_u, cfg.besov_params(g.dim)),
        energy=energy(state, params),
        budget_residual=float(budget_residual),
        dissipation_rate=dissipation_rate(state, params),
        dissipated=float(state.dissipated),
    )


def budget_residual(prev: TimeSeriesRecord, nxt: TimeSeriesRecord,
                    dissipation_integral: Optional[float] = None) -> float:
    """Signed ``Delta E + integral of the dissipation rate`` over [prev.t, nxt.t].

    Without an explicit integral the trapezoid rule on the two recorded rates
    is used; the integrator's own accumulator (``dissipated``) is the
    high-order alternative.
    """
    if dissipation_integral is None:
        dissipation_integral = 0.5 * (nxt.t - prev.t) * (prev.dissipation_rate + nxt.dissipation_rate)
    return (nxt.energy - prev.energy) + dissipation_integral


class Recorder:
    """Snapshot sink: builds records and optionally keeps the states.

    ``budget_residual`` in each record is cumulative from the first snapshot,
    using the integrator's dissipation accumulator.
    """

    def __init__(self, params: ModelParams, cfg: DiagnosticsConfig = DiagnosticsConfig(),
                 keep_states: bool = False, extra=None):
        self.params = params
        self.cfg = cfg
        self.keep_states = keep_states
        self.records: list = []
        self.states: list = []
        self.extra = extra
        self._ref = None

    def __call__(self, state: SimState):
        e = energy(state, self.params)
        if self._ref is None:
            self._ref = e + state.dissipated
        rec = snapshot(state, self.params, self.cfg, e + state.dissipated - self._ref)
        if self.records and rec.t <= self.records[-1].t:
            return
        self.records.append(rec)
        if self.keep_states:
            self.states.append(state)
        if self.extra is not None:
            self.extra(state, rec)

    def series(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])

    @property
    def times(self) -> np.ndarray:
        return self.series("t")

    def trajectory(self) -> "Trajectory":
        return Trajectory(self.states)


# -- rate fitting ----------------------------------------------------------------

@dataclass(frozen=True)
class FitResult:
    kind: str
    value: float
    r_squared: float
    window: tuple
    samples: int

    def to_dict(self) -> dict:
        key = "rate" if self.kind == "exponential" else "exponent"
        return {"kind": self.kind, key: self.value, "r_squared": self.r_squared,
                "window": list(self.window), "samples": self.samples}


MIN_SAMPLES = 8


def default_window(t: np.ndarray, fraction: float = 0.6) -> tuple:
    """Last ``fraction`` of the run."""
    t0, t1 = float(t[0]), float(t[-1])
    return (t1 - fraction * (t1 - t0), t1)


def _window_data(t, y, t_window):
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if t_window is None:
        t_window = default_window(t)
    eps = 1e-12 * max(1.0, abs(t_window[1]))
    sel = (t >= t_window[0] - eps) & (t <= t_window[1] + eps)
    if sel.sum() < MIN_SAMPLES:
        raise ValueError(f"window {t_window} holds {int(sel.sum())} samples, need {MIN_SAMPLES}")
    if np.any(y[sel] <= 0) or not np.all(np.isfinite(y[sel])):
        raise ValueError("window rejected: series has non-positive or non-finite values")
    return t[sel], y[sel], (float(t_window[0]), float(t_window[1]))


def fit_exponential_rate(t, y, t_window=None) -> FitResult:
    """Least squares of ``log y`` against ``t``; rate is minus the slope."""
    tw, yw, win = _window_data(t, y, t_window)
    res = stats.linregress(tw, np.log(yw))
    return FitResult("exponential", float(-res.slope), _r2(res), win, tw.size)


def fit_polynomial_rate(t, y, t_window=None) -> FitResult:
    """Least squares of ``log y`` against ``log(1 + t)``; exponent is minus the slope."""
    tw, yw, win = _window_data(t, y, t_window)
    res = stats.linregress(np.log1p(tw), np.log(yw))
    return FitResult("polynomial", float(-res.slope), _r2(res), win, tw.size)


def _r2(res) -> float:
    r = res.rvalue
    return 1.0 if not np.isfinite(r) else float(r * r)


def is_monotone_decreasing(t, y, t_window=None, rtol: float = 0.0) -> bool:
    _, yw, _ = _window_data(t, y, t_window)
    return bool(np.all(np.diff(yw) <= rtol * yw[:-1]))


# -- trajectories ------------------------------------------------------------------

class Trajectory:
    """Stored snapshot states of one run, linearly interpolated in time."""

    def __init__(self, states: Sequence[SimState]):
        if not states:
            raise ValueError("empty trajectory")
        self.states = list(states)
        self.times = np.array([s.t for s in self.states])
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("trajectory times must be strictly increasing")

    def at(self, t: float):
        """``(u_hat, tau_hat)`` coefficient arrays at time t."""
        times = self.times
        tol = 1e-9 * max(1.0, abs(t))
        if t < times[0] - tol or t > times[-1] + tol:
            raise ValueError(f"no stored states bracket t={t} (have [{times[0]}, {times[-1]}])")
        i = int(np.searchsorted(times, t))
        if i < len(times) and abs(times[i] - t) <= tol:
            s = self.states[i]
            return s.u_hat.coeffs, s.tau_hat.coeffs
        if i > 0 and abs(times[i - 1] - t) <= tol:
            s = self.states[i - 1]
            return s.u_hat.coeffs, s.tau_hat.coeffs
        a, b = self.states[i - 1], self.states[i]
        w = (t - a.t) / (b.t - a.t)
        return ((1 - w) * a.u_hat.coeffs + w * b.u_hat.coeffs,
                (1 - w) * a.tau_hat.coeffs + w * b.tau_hat.coeffs)

    @property
    def grid(self):
        return self.states[0].grid


def l2_gap(series_a: Trajectory, series_b: Trajectory, t: float, include_tau: bool = False) -> float:
    """``||u_a(t) - u_b(t)||_L2`` from stored states (plus the tau gap if asked)."""
    if series_a.grid != series_b.grid:
        raise ValueError("trajectories live on different grids")
    g = series_a.grid
    ua, ta = series_a.at(t)
    ub, tb = series_b.at(t)
    du = ua - ub
    gap = math.sqrt(max(inner_coeffs(du, du, g, VECTOR), 0.0))
    if include_tau:
        dt = ta - tb
        gap += math.sqrt(max(inner_coeffs(dt, dt, g, SYM_TENSOR), 0.0))
    return gap


def state_gap(a: SimState, b: SimState) -> tuple:
    """``(||u_a - u_b||, ||tau_a - tau_b||)`` for two states on one grid."""
    g = a.grid
    du = a.u_hat.coeffs - b.u_hat.coeffs
    dt = a.tau_hat.coeffs - b.tau_hat.coeffs
    return (math.sqrt(max(inner_coeffs(du, du, g, VECTOR), 0.0)),
            math.sqrt(max(inner_coeffs(dt, dt, g, SYM_TENSOR), 0.0)))


def top_shell_fraction(u_hat: SpectralField) -> float:
    """Share of kinetic energy in the outermost third of the retained band."""
    g = u_hat.grid
    r = np.sqrt(g.k2)
    kmax = g.kmax_dealiased
    w = np.sum(np.abs(u_hat.coeffs) ** 2, axis=0) * g.dealias_mask
    total = w.sum()
    if total == 0:
        return 0.0
    return float(w[r > (2.0 / 3.0) * g.cutoff].sum() / total) if kmax > 0 else 0.0


# -- output ------------------------------------------------------------------------

def _fmt(v) -> str:
    return "%.17g" % v


def emit_series(records: Sequence[TimeSeriesRecord], path) -> None:
    """CSV with the record field names as header, round-trip float precision."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(COLUMNS)
        for r in records:
            w.writerow([_fmt(getattr(r, c)) for c in COLUMNS])


def read_series(path) -> list:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != COLUMNS:
        raise ValueError(f"{path}: header does not match {COLUMNS}")
    return [TimeSeriesRecord(*(float(x) for x in row)) for row in rows[1:]]


def write_fit_summary(path, fits: dict, extra: Optional[dict] = None) -> None:
    payload = {name: fit.to_dict() if isinstance(fit, FitResult) else fit
               for name, fit in fits.items()}
    if extra:
        payload.update(extra)
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True))
