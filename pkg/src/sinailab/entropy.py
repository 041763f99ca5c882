"""Metric entropy estimators.

Three independent routes to the entropy of an approximate Sinai/SRB
measure: the Pesin formula (sum of positive Lyapunov exponents), the
Ledrappier-Strelcyn exterior-power characterization (infimum over n of
averaged log aggregate wedge norms), and the expected log Jacobian along
the expanding subbundle. A cross-validation report compares all three.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import SamplingFailureError
from .matrixcore import WedgeAccumulatorBatch, log_wedge_total_from_rows
from .measures import measure_cloud
from .oseledets import (
    LyapunovSpectrum,
    _orthonormalize_batch,
    _random_frames,
    benettin_spectrum,
    jacobian_along_frames,
)
from .systems import DynamicalSystem

PESIN = "pesin"
LEDRAPPIER_STRELCYN = "ledrappier_strelcyn"
JACOBIAN_F = "jacobian_F"

#: orbit-failure fraction above which cloud estimators refuse to answer
MAX_FAILURE_FRACTION = 0.01


@dataclass
class EntropyEstimate:
    """Entropy value (nats/iteration) with a method tag and diagnostics."""

    value: float
    method: str
    std_error: float = 0.0
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ValueError("entropy estimate must be finite")
        if self.value < 0.0:
            raise ValueError("entropy estimate must be non-negative")

    def to_json_dict(self) -> dict:
        return {
            "method": self.method,
            "value": self.value,
            "std_error": self.std_error,
            "diagnostics": self.diagnostics,
        }


@dataclass
class LSSequence:
    """Averaged log aggregate wedge norms a_n and their running minimum."""

    a_n: np.ndarray            # index k holds a_{k+1}
    argmin_index: int          # minimizing n (1-based)
    value: float
    skipped_points: int = 0
    point_values_at_min: Optional[np.ndarray] = None
    alive_mask: Optional[np.ndarray] = None

    def __post_init__(self):
        self.a_n = np.asarray(self.a_n, dtype=float)
        if self.a_n.shape[0] == 0:
            raise ValueError("empty sequence")
        if abs(self.value - float(self.a_n.min())) > 1e-12:
            raise ValueError("reported value must equal the table minimum")


def pesin_entropy(spectrum: LyapunovSpectrum) -> EntropyEstimate:
    """Sum of the positive Lyapunov exponents, errors in quadrature."""
    pos = spectrum.exponents > 0.0
    value = float(spectrum.exponents[pos].sum())
    se = float(np.sqrt((spectrum.std_error[pos] ** 2).sum())) if np.any(pos) else 0.0
    return EntropyEstimate(
        value=value,
        method=PESIN,
        std_error=se,
        diagnostics={"n_positive": int(pos.sum()), "n_steps": spectrum.n_steps},
    )


def _advance_wedge_table(system: DynamicalSystem, pts: np.ndarray,
                         weights: np.ndarray, n_max: int, orders,
                         early_stop: bool, stop_window: int,
                         stop_delta: float, seed: int = 0):
    """Shared driver: per-n weighted averages of log wedge norms.

    Returns (table, per-point rows at each n, alive mask, skipped count).
    table[k] is a dict {j: weighted avg of log wedge_j at n = k+1} plus the
    aggregate total when all orders are tracked. Cloud advancement uses the
    dithered stepper so binary-shift bases do not degenerate mid-table.
    """
    m, d = pts.shape
    dither = np.random.default_rng([seed, 0xD17A]) if system.dither_scale else None
    acc = WedgeAccumulatorBatch(d, m, orders=orders)
    alive = np.ones(m, dtype=bool)
    cur = pts.copy()
    rows_total = []      # averaged log_wedge_total / n when full orders
    rows_orders = []     # averaged log_wedge_j / n per tracked order
    best_row = None      # per-point totals at the running argmin
    full = tuple(orders) == tuple(range(1, d + 1))
    for n in range(1, n_max + 1):
        bad = system.hits_singular_set(cur) | ~np.all(np.isfinite(cur), axis=1)
        alive &= ~bad
        if (~alive).sum() > MAX_FAILURE_FRACTION * m:
            raise SamplingFailureError(
                f"{system.name}: {int((~alive).sum())}/{m} orbit failures in the wedge table"
            )
        dfs = system.differential_batch(np.where(alive[:, None], cur, pts))
        # frozen points feed identity so dead rows stay harmless
        if not np.all(alive):
            dfs[~alive] = np.eye(d)
        acc.step(dfs)
        w = weights * alive
        w = w / w.sum()
        lw = acc.log_wedge_all()  # (m, len(orders))
        per_order = {j: float(w @ lw[:, idx]) / n for idx, j in enumerate(acc.orders)}
        rows_orders.append(per_order)
        if full:
            totals = log_wedge_total_from_rows(lw)
            rows_total.append(float(w @ totals) / n)
            if len(rows_total) == 1 or rows_total[-1] <= min(rows_total[:-1]):
                best_row = totals / n
        cur[alive] = system.step_batch(cur[alive], dither)
        if early_stop and full and len(rows_total) > stop_window:
            if rows_total[-1 - stop_window] - rows_total[-1] < stop_delta:
                break
        if early_stop and not full and len(rows_orders) > stop_window:
            j0 = acc.orders[0]
            if rows_orders[-1 - stop_window][j0] - rows_orders[-1][j0] < stop_delta:
                break
    skipped = int((~alive).sum())
    return rows_total, rows_orders, best_row, alive, skipped


def ls_sequence(system: DynamicalSystem, measure, n_max: int = 40,
                early_stop: bool = True, stop_window: int = 5,
                stop_delta: float = 1e-4, seed: int = 0) -> LSSequence:
    """Table a_n = (1/n) <log ||Df^n(x)^wedge||>_mu and its minimum.

    The minimum over the table is an upper bound for the limit value, so
    the reported number is one-sided. Points whose orbit fails are skipped
    and the weights renormalized (more than 1% failures aborts). Early
    stopping cuts the table when five consecutive n gain less than
    stop_delta; pass early_stop=False for the full table.
    """
    if not 1 <= n_max <= 60:
        raise ValueError("n_max must be in [1, 60]")
    pts, weights = measure_cloud(measure)
    d = system.space.dim
    rows_total, _, best_row, alive, skipped = _advance_wedge_table(
        system, pts, weights, n_max, tuple(range(1, d + 1)),
        early_stop, stop_window, stop_delta, seed,
    )
    a = np.asarray(rows_total)
    k = int(np.argmin(a))
    return LSSequence(
        a_n=a,
        argmin_index=k + 1,
        value=float(a[k]),
        skipped_points=skipped,
        point_values_at_min=best_row,
        alive_mask=alive,
    )


def ls_entropy(system: DynamicalSystem, measure, n_max: int = 40,
               **kwargs) -> EntropyEstimate:
    """EntropyEstimate wrapper around ls_sequence."""
    seq = ls_sequence(system, measure, n_max, **kwargs)
    _, weights = measure_cloud(measure)
    vals = seq.point_values_at_min
    w = weights * seq.alive_mask
    w = w / w.sum()
    var = float(w @ (vals - float(w @ vals)) ** 2)
    se = math.sqrt(max(var, 0.0) / max(int(seq.alive_mask.sum()), 1))
    return EntropyEstimate(
        value=max(seq.value, 0.0),
        method=LEDRAPPIER_STRELCYN,
        std_error=se,
        diagnostics={
            "a_n": seq.a_n.tolist(),
            "argmin_n": seq.argmin_index,
            "skipped_points": seq.skipped_points,
        },
    )


def exponent_function(system: DynamicalSystem, measure, i: int,
                      n_max: int = 40, seed: int = 0) -> float:
    """min over n <= n_max of (1/n) <log ||Df^n(x)^(wedge i)||>_mu.

    Approximates the sum of the top-i Lyapunov exponents from above.
    """
    d = system.space.dim
    if not 1 <= i <= d:
        raise ValueError(f"i must be in [1, {d}]")
    pts, weights = measure_cloud(measure)
    _, rows_orders, _, _, _ = _advance_wedge_table(
        system, pts, weights, n_max, (i,), False, 5, 1e-4, seed,
    )
    return float(min(r[i] for r in rows_orders))


def jacobian_formula_entropy(system: DynamicalSystem, measure, dim_f: int,
                             n_transient: int = 60, seed: int = 0) -> EntropyEstimate:
    """Expected log volume expansion along the estimated F bundle.

    The cloud is advanced n_transient steps while random frames are pushed
    forward and re-orthonormalized; by invariance of the sampled measure
    the advanced cloud integrates the same observable, so no backward
    orbits are needed. dim_f = dim shortcuts to <log |det Df|>.
    """
    pts, weights = measure_cloud(measure)
    m, d = pts.shape
    if not 1 <= dim_f <= d:
        raise ValueError(f"dim_f must be in [1, {d}]")
    alive = np.ones(m, dtype=bool)
    cur = pts.copy()
    if dim_f == d:
        frames = np.broadcast_to(np.eye(d), (m, d, d)).copy()
    else:
        rng = np.random.default_rng([seed, 0xF0])
        dither = np.random.default_rng([seed, 0xF1]) if system.dither_scale else None
        frames = _random_frames(rng, m, d, dim_f)
        for _ in range(n_transient):
            bad = system.hits_singular_set(cur) | ~np.all(np.isfinite(cur), axis=1)
            alive &= ~bad
            dfs = system.differential_batch(cur)
            if not np.all(alive):
                dfs[~alive] = np.eye(d)
            frames = _orthonormalize_batch(np.matmul(dfs, frames))
            cur = system.step_batch(np.where(alive[:, None], cur, pts), dither)
    bad = system.hits_singular_set(cur) | ~np.all(np.isfinite(cur), axis=1)
    alive &= ~bad
    if (~alive).sum() > MAX_FAILURE_FRACTION * m:
        raise SamplingFailureError(
            f"{system.name}: {int((~alive).sum())}/{m} bundle estimation failures"
        )
    jac = jacobian_along_frames(system, cur, frames)
    good = alive & (jac > 0.0) & np.isfinite(jac)
    w = weights * good
    total = w.sum()
    if total <= 0.0:
        raise SamplingFailureError("no usable points for the Jacobian integral")
    w = w / total
    logs = np.where(good, np.log(np.maximum(jac, 1e-300)), 0.0)
    mean = float(w @ logs)
    var = float(w @ (logs - mean) ** 2)
    se = math.sqrt(max(var, 0.0) / max(int(good.sum()), 1))
    return EntropyEstimate(
        value=max(mean, 0.0),
        method=JACOBIAN_F,
        std_error=se,
        diagnostics={
            "dim_f": dim_f,
            "n_transient": n_transient,
            "skipped_points": int(m - int(good.sum())),
            "raw_mean": mean,
        },
    )


# ---------------------------------------------------------------------------
# Cross-validation of the three estimators
# ---------------------------------------------------------------------------


@dataclass
class CrossValidationReport:
    estimates: dict            # method -> EntropyEstimate
    gaps: dict                 # "a|b" -> |value_a - value_b|
    tolerance: float
    sinai_consistent: bool
    ruelle_violated: bool

    def to_json_dict(self) -> dict:
        return {
            "estimates": {k: v.to_json_dict() for k, v in self.estimates.items()},
            "gaps": self.gaps,
            "tolerance": self.tolerance,
            "sinai_consistent": self.sinai_consistent,
            "ruelle_violated": self.ruelle_violated,
        }


def combine_estimates(pesin: EntropyEstimate, ls: EntropyEstimate,
                      jac: EntropyEstimate, tolerance: float) -> CrossValidationReport:
    """Flag agreement (all pairwise gaps <= tolerance) and the numerical
    Ruelle signal (LS value above the Pesin value beyond tolerance plus
    twice the combined standard errors)."""
    ests = {PESIN: pesin, LEDRAPPIER_STRELCYN: ls, JACOBIAN_F: jac}
    keys = list(ests)
    gaps = {}
    for a in range(len(keys)):
        for b in range(a + 1, len(keys)):
            gaps[f"{keys[a]}|{keys[b]}"] = abs(ests[keys[a]].value - ests[keys[b]].value)
    consistent = max(gaps.values()) <= tolerance
    margin = tolerance + 2.0 * (ls.std_error + pesin.std_error)
    ruelle = (ls.value - pesin.value) > margin
    return CrossValidationReport(
        estimates=ests,
        gaps=gaps,
        tolerance=tolerance,
        sinai_consistent=consistent,
        ruelle_violated=ruelle,
    )


def cross_validate(system: DynamicalSystem, measure, dim_f: Optional[int] = None,
                   n_max: int = 40, tolerance: float = 0.02,
                   spectrum: Optional[LyapunovSpectrum] = None,
                   seed: Optional[int] = None,
                   spectrum_steps: Optional[int] = None,
                   burn_in: Optional[int] = None) -> CrossValidationReport:
    """Run all three estimators on one system/measure pair and compare.

    The Benettin spectrum reuses the measure's Birkhoff provenance (seed,
    burn-in, length) unless overridden, so all estimators see statistically
    matched data. When dim_f is not given it defaults to the number of
    positive exponents in the computed spectrum (the expanding dimension).
    """
    prov = getattr(measure, "provenance", {}) or {}
    seed = seed if seed is not None else int(prov.get("seed", 0))
    burn = burn_in if burn_in is not None else int(prov.get("burn_in", 10_000))
    steps = spectrum_steps if spectrum_steps is not None else int(
        prov.get("length", 100_000))
    if spectrum is None:
        spectrum = benettin_spectrum(system, seed=seed, burn_in=burn,
                                     n_steps=steps)
    if dim_f is None:
        dim_f = max(1, int((spectrum.exponents > 0.0).sum()))
    p = pesin_entropy(spectrum)
    ls = ls_entropy(system, measure, n_max, seed=seed)
    jac = jacobian_formula_entropy(system, measure, dim_f, seed=seed)
    return combine_estimates(p, ls, jac, tolerance)
