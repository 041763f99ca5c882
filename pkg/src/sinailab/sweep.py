"""Parameter sweeps over system families with semicontinuity checks.

Each grid point builds its system, approximates the invariant measure, and
runs the configured entropy estimators with a point-specific seed derived
from the config seed and the grid index (so neighboring points share no
randomness). Discrete upper-semicontinuity and continuity-modulus checks
operate on the resulting entropy curves with explicit slack and error bars.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .entropy import (
    JACOBIAN_F,
    LEDRAPPIER_STRELCYN,
    PESIN,
    EntropyEstimate,
    jacobian_formula_entropy,
    ls_entropy,
    pesin_entropy,
)
from .errors import SinaiLabError, SweepAbortError
from .measures import (
    birkhoff_sample,
    dictionary_moments,
    log_det_batch,
    measure_cloud,
    ulam_matrix,
    ulam_stationary,
)
from .oseledets import benettin_spectrum
from .systems import FamilyHandle, get_family

ESTIMATOR_NAMES = (PESIN, LEDRAPPIER_STRELCYN, JACOBIAN_F)

#: intermittent Manneville-Pomeau points mix polynomially; quadruple orbits
MP_SLOW_ALPHA = 0.7
MP_SLOW_FACTOR = 4


@dataclass(frozen=True)
class SweepConfig:
    family: str
    grid: tuple
    estimators: tuple = (PESIN,)
    seed: int = 0
    burn_in: int = 10_000
    length: int = 100_000
    ulam_resolution: Optional[int] = None
    n_max: int = 40
    dim_f: Optional[int] = None
    tolerance: float = 0.02
    workers: int = 1
    weak_star_cutoff: int = 4

    def __post_init__(self):
        grid = tuple(float(t) for t in self.grid)
        object.__setattr__(self, "grid", grid)
        if len(grid) == 0:
            raise ValueError("empty parameter grid")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("grid must be strictly increasing")
        if self.tolerance <= 0.0:
            raise ValueError("tolerance must be positive")
        ests = tuple(self.estimators)
        for e in ests:
            if e not in ESTIMATOR_NAMES:
                raise ValueError(f"unknown estimator {e!r}; valid: {ESTIMATOR_NAMES}")
        object.__setattr__(self, "estimators", ests)

    def point_seed(self, index: int) -> int:
        ss = np.random.SeedSequence([int(self.seed), int(index)])
        return int(ss.generate_state(1)[0])

    def to_json_dict(self) -> dict:
        return {
            "family": self.family,
            "grid": list(self.grid),
            "estimators": list(self.estimators),
            "seed": self.seed,
            "burn_in": self.burn_in,
            "length": self.length,
            "ulam_resolution": self.ulam_resolution,
            "n_max": self.n_max,
            "dim_f": self.dim_f,
            "tolerance": self.tolerance,
            "workers": self.workers,
            "weak_star_cutoff": self.weak_star_cutoff,
        }


@dataclass
class SweepRow:
    index: int
    t: float
    estimates: dict = field(default_factory=dict)   # method -> EntropyEstimate
    spectrum_exponents: Optional[list] = None
    spectrum_std_error: Optional[list] = None
    moments: Optional[np.ndarray] = None
    weak_star_prev: Optional[float] = None
    length_used: int = 0
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None

    def to_json_dict(self) -> dict:
        return {
            "index": self.index,
            "t": self.t,
            "estimates": {k: v.to_json_dict() for k, v in self.estimates.items()},
            "spectrum_exponents": self.spectrum_exponents,
            "spectrum_std_error": self.spectrum_std_error,
            "weak_star_prev": self.weak_star_prev,
            "length_used": self.length_used,
            "error": self.error,
        }


@dataclass
class SweepResult:
    config: SweepConfig
    rows: list

    def curve(self, method: str):
        """(t, value, std_error) arrays over rows where the method ran."""
        ts, vs, es = [], [], []
        for row in self.rows:
            if row.ok and method in row.estimates:
                ts.append(row.t)
                vs.append(row.estimates[method].value)
                es.append(row.estimates[method].std_error)
        return np.asarray(ts), np.asarray(vs), np.asarray(es)

    def to_json_dict(self) -> dict:
        return {
            "config": self.config.to_json_dict(),
            "rows": [r.to_json_dict() for r in self.rows],
        }


def _orbit_length(config: SweepConfig, t: float) -> int:
    length = config.length
    if config.family == "mp" and t >= MP_SLOW_ALPHA:
        length *= MP_SLOW_FACTOR
    return length


def _sweep_point(config: SweepConfig, index: int) -> SweepRow:
    t = config.grid[index]
    row = SweepRow(index=index, t=t)
    try:
        family = get_family(config.family)
        system = family.build(t)
        seed = config.point_seed(index)
        length = _orbit_length(config, t)
        row.length_used = length
        if config.ulam_resolution:
            transfer = ulam_matrix(system, config.ulam_resolution,
                                   samples_per_cell=256, seed=seed)
            measure = ulam_stationary(transfer, tol=1e-10)
        else:
            measure = birkhoff_sample(system, seed=seed,
                                      burn_in=config.burn_in, length=length)
        row.moments = dictionary_moments(measure, config.weak_star_cutoff)
        spectrum = None
        if PESIN in config.estimators:
            spectrum = benettin_spectrum(system, seed=seed,
                                         burn_in=config.burn_in,
                                         n_steps=length)
            row.spectrum_exponents = spectrum.exponents.tolist()
            row.spectrum_std_error = spectrum.std_error.tolist()
            row.estimates[PESIN] = pesin_entropy(spectrum)
        if LEDRAPPIER_STRELCYN in config.estimators:
            row.estimates[LEDRAPPIER_STRELCYN] = ls_entropy(
                system, measure, config.n_max)
        if JACOBIAN_F in config.estimators:
            dim_f = config.dim_f
            if dim_f is None:
                if spectrum is not None:
                    dim_f = max(1, int((spectrum.exponents > 0.0).sum()))
                else:
                    dim_f = system.space.dim
            row.estimates[JACOBIAN_F] = jacobian_formula_entropy(
                system, measure, dim_f, seed=seed)
    except (SinaiLabError, ValueError, KeyError) as exc:
        row.error = f"{type(exc).__name__}: {exc}"
        row.estimates = {}
        row.moments = None
    return row


def run_sweep(config: SweepConfig) -> SweepResult:
    """Evaluate the configured estimators at every grid point.

    Deterministic given the config (including worker count: rows are
    assembled in grid order and every point derives its own seed). Raises
    SweepAbortError when more than 20% of the points fail; individual
    failures are recorded in their rows and the sweep continues.
    """
    n = len(config.grid)
    if config.workers > 1 and n > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            rows = list(pool.map(_sweep_point, [config] * n, range(n)))
    else:
        rows = [_sweep_point(config, i) for i in range(n)]
    rows.sort(key=lambda r: r.index)
    failed = sum(1 for r in rows if not r.ok)
    if failed > 0.2 * n:
        raise SweepAbortError(failed=failed, total=n)
    for prev, cur in zip(rows, rows[1:]):
        if prev.ok and cur.ok and prev.moments is not None and cur.moments is not None:
            cur.weak_star_prev = float(np.max(np.abs(cur.moments - prev.moments)))
    return SweepResult(config=config, rows=rows)


# ---------------------------------------------------------------------------
# Curve checks
# ---------------------------------------------------------------------------


@dataclass
class USCReport:
    window: int
    slack: float
    witnesses: list          # dicts: {method, t, value, neighbor_t, neighbor_value}
    passed: bool

    def to_json_dict(self) -> dict:
        return {"window": self.window, "slack": self.slack,
                "witnesses": self.witnesses, "passed": self.passed}


def usc_check(result: SweepResult, window: int = 1, slack: float = 0.05) -> USCReport:
    """Flag grid points sitting below their neighborhood maximum.

    A witness at t means h(t) < max over the window of neighboring values
    minus slack and combined error bars: an upward jump into t's
    neighborhood, the discrete failure mode of upper semicontinuity.
    """
    ok_rows = [r for r in result.rows if r.ok]
    if len(ok_rows) < 3:
        raise ValueError("usc_check needs at least 3 successful grid points")
    witnesses = []
    methods = set()
    for row in ok_rows:
        methods.update(row.estimates)
    for method in sorted(methods):
        rows = [r for r in ok_rows if method in r.estimates]
        for k, row in enumerate(rows):
            lo = max(0, k - window)
            hi = min(len(rows), k + window + 1)
            neighbors = [rows[j] for j in range(lo, hi) if j != k]
            if not neighbors:
                continue
            best = max(neighbors, key=lambda r: r.estimates[method].value)
            h_k = row.estimates[method].value
            h_n = best.estimates[method].value
            err = row.estimates[method].std_error + best.estimates[method].std_error
            if h_k < h_n - slack - err:
                witnesses.append({
                    "method": method,
                    "t": row.t,
                    "value": h_k,
                    "neighbor_t": best.t,
                    "neighbor_value": h_n,
                })
    return USCReport(window=window, slack=slack, witnesses=witnesses,
                     passed=not witnesses)


@dataclass
class ContinuityModulus:
    per_method: dict         # method -> {max_gap, at, gaps}

    def max_gap(self, method: str) -> float:
        return self.per_method[method]["max_gap"]

    def to_json_dict(self) -> dict:
        return {"per_method": self.per_method}


def continuity_modulus(result: SweepResult) -> ContinuityModulus:
    """Largest adjacent entropy gap per method, with its location, plus the
    companion weak* distances where available."""
    ok_rows = [r for r in result.rows if r.ok]
    if len(ok_rows) < 2:
        raise ValueError("continuity_modulus needs at least 2 successful points")
    methods = set()
    for row in ok_rows:
        methods.update(row.estimates)
    per_method = {}
    for method in sorted(methods):
        rows = [r for r in ok_rows if method in r.estimates]
        gaps = []
        for a, b in zip(rows, rows[1:]):
            gaps.append({
                "from_t": a.t,
                "to_t": b.t,
                "gap": abs(b.estimates[method].value - a.estimates[method].value),
                "weak_star": b.weak_star_prev,
            })
        if not gaps:
            continue
        worst = max(gaps, key=lambda g: g["gap"])
        per_method[method] = {
            "max_gap": worst["gap"],
            "at": [worst["from_t"], worst["to_t"]],
            "gaps": gaps,
        }
    return ContinuityModulus(per_method=per_method)


# ---------------------------------------------------------------------------
# Singular-neighborhood entropy splitting
# ---------------------------------------------------------------------------


def split_log_det_integral(system, measure, delta: float) -> dict:
    """Split <log |det Df|>_mu at the delta-neighborhood of the singular set.

    Points exactly on the singular set are skipped (reweighted) as in the
    other cloud integrals; delta = 0 gives an empty inside part.
    """
    if delta < 0.0:
        raise ValueError("delta must be >= 0")
    pts, w = measure_cloud(measure)
    dist = system.singular_distance(pts)
    usable = dist >= 1e-15
    logdet = log_det_batch(system, pts[usable])
    finite = np.isfinite(logdet)
    weights = w[usable][finite]
    total = weights.sum()
    weights = weights / total
    dist_ok = dist[usable][finite]
    inside_mask = dist_ok < delta
    inside = float(weights[inside_mask] @ logdet[finite][inside_mask]) if inside_mask.any() else 0.0
    outside = float(weights[~inside_mask] @ logdet[finite][~inside_mask]) if (~inside_mask).any() else 0.0
    return {
        "delta": float(delta),
        "inside": inside,
        "outside": outside,
        "inside_mass": float(weights[inside_mask].sum()),
        "skipped": int(pts.shape[0] - int(finite.sum())),
    }


def neighborhood_split_entropy(family, t: float, delta: float,
                               seed: int = 0, burn_in: int = 10_000,
                               length: int = 100_000) -> dict:
    """Build the family member at t, sample its measure, and split the
    log-Jacobian entropy integral around the singular set."""
    handle = family if isinstance(family, FamilyHandle) else get_family(family)
    system = handle.build(t)
    if not system.singular_set:
        raise ValueError(f"{system.name} declares no singular set")
    measure = birkhoff_sample(system, seed=seed, burn_in=burn_in, length=length)
    out = split_log_det_integral(system, measure, delta)
    out["t"] = float(t)
    out["family"] = handle.family_id
    return out
