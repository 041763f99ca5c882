"""Invariant-measure approximation and regularity diagnostics.

Two routes to an approximate Sinai/SRB measure: Birkhoff point clouds from
Lebesgue-random starts, and the Ulam transfer-operator discretization.
Diagnostics cover singular-set mass scaling, log-norm integrability,
parameter Hölder regularity of log |det Df|, and Jacobian boundedness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
import numpy as np
import scipy.sparse as sp

from .errors import SamplingFailureError, UlamConvergenceError
from .systems import DynamicalSystem, FamilyHandle, PhaseSpace

MAX_ULAM_CELLS = 10_000_000


# ---------------------------------------------------------------------------
# Measure containers
# ---------------------------------------------------------------------------


@dataclass
class EmpiricalMeasure:
    """Weighted point cloud approximating an invariant measure."""

    space: PhaseSpace
    points: np.ndarray      # (n, d)
    weights: np.ndarray     # (n,), non-negative, sums to 1
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        self.weights = np.asarray(self.weights, dtype=float)
        if self.weights.shape[0] != self.points.shape[0]:
            raise ValueError("weights and points must have equal length")
        if np.any(self.weights < 0.0):
            raise ValueError("weights must be non-negative")
        total = float(self.weights.sum())
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"weights must sum to 1 (got {total})")
        if not self.space.contains(self.points).all():
            raise ValueError("measure has points outside the phase space")

    def to_json_dict(self) -> dict:
        return {
            "kind": "empirical",
            "points": self.points.tolist(),
            "weights": self.weights.tolist(),
            "provenance": self.provenance,
        }


@dataclass
class GridMeasure:
    """Probability vector over a uniform partition of the phase-space box."""

    space: PhaseSpace
    resolution: tuple       # cells per dimension
    density: np.ndarray     # (prod(resolution),), C-order
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.resolution = tuple(int(r) for r in np.atleast_1d(self.resolution))
        self.density = np.asarray(self.density, dtype=float)
        if np.any(self.density < 0.0):
            raise ValueError("density entries must be non-negative")
        total = float(self.density.sum())
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"density must sum to 1 (got {total})")

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.resolution))

    def cell_centers(self) -> np.ndarray:
        axes = [
            np.asarray(self.space.lo)[i]
            + (np.arange(r) + 0.5) * (self.space.widths()[i] / r)
            for i, r in enumerate(self.resolution)
        ]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.column_stack([m.ravel() for m in mesh])

    def to_json_dict(self) -> dict:
        return {
            "kind": "grid",
            "resolution": list(self.resolution),
            "density": self.density.tolist(),
            "provenance": self.provenance,
        }


def measure_cloud(measure):
    """(points, weights) view of either measure kind."""
    if isinstance(measure, EmpiricalMeasure):
        return measure.points, measure.weights
    if isinstance(measure, GridMeasure):
        return measure.cell_centers(), measure.density
    raise TypeError(f"not a measure: {type(measure)!r}")


@dataclass
class TransferMatrix:
    """Sparse row-stochastic Ulam matrix over grid cells."""

    space: PhaseSpace
    resolution: tuple
    matrix: sp.csr_matrix
    samples_per_cell: int

    def __post_init__(self):
        rows = np.asarray(self.matrix.sum(axis=1)).ravel()
        if np.any(np.abs(rows - 1.0) > 1e-12):
            raise ValueError("transfer matrix rows must sum to 1")
        if self.matrix.nnz and self.matrix.data.min() < 0.0:
            raise ValueError("transfer matrix entries must be non-negative")


# ---------------------------------------------------------------------------
# Birkhoff sampling
# ---------------------------------------------------------------------------

MAX_RESTARTS = 100


def birkhoff_sample(system: DynamicalSystem, seed: int, burn_in: int,
                    length: int) -> EmpiricalMeasure:
    """Equal-weight orbit cloud from a Lebesgue-uniform random start.

    Orbits that hit the singular set exactly are restarted with an
    incremented sub-seed (at most MAX_RESTARTS times). Deterministic given
    (system, seed, burn_in, length).
    """
    if length < 1:
        raise ValueError("length must be >= 1")
    if burn_in < 0:
        raise ValueError("burn_in must be >= 0")
    for restart in range(MAX_RESTARTS):
        rng = np.random.default_rng([seed, restart])
        x0 = system.space.uniform(rng, 1)[0]
        dither = np.random.default_rng([seed, restart, 0xD17])
        orbit = system.orbit(x0, burn_in + length - 1, dither)
        points = orbit[burn_in:]
        if not np.all(np.isfinite(points)):
            continue
        if np.any(system.hits_singular_set(points)):
            continue
        weights = np.full(length, 1.0 / length)
        return EmpiricalMeasure(
            space=system.space,
            points=points,
            weights=weights,
            provenance={
                "kind": "birkhoff",
                "seed": int(seed),
                "burn_in": int(burn_in),
                "length": int(length),
                "restarts": restart,
            },
        )
    raise SamplingFailureError(
        f"{system.name}: orbit hit the singular set on {MAX_RESTARTS} restarts"
    )


# ---------------------------------------------------------------------------
# Ulam discretization
# ---------------------------------------------------------------------------


def _lattice_offsets(n: int, d: int, rng: np.random.Generator) -> np.ndarray:
    """n points stratified inside the unit cell.

    A regular midpoint sub-lattice (as close to n points as a d-dim lattice
    allows) plus seeded uniform fill for the remainder. Midpoint strata make
    piecewise-affine dyadic maps split cell images exactly, which random
    strata only achieve to O(1/sqrt(n)).
    """
    k = max(1, int(round(n ** (1.0 / d))))
    while k ** d > n:
        k -= 1
    counts = [k] * d
    # grow axes greedily while the lattice still fits
    for i in range(d):
        trial = counts.copy()
        trial[i] += 1
        if int(np.prod(trial)) <= n:
            counts = trial
    axes = [(np.arange(c) + 0.5) / c for c in counts]
    mesh = np.meshgrid(*axes, indexing="ij")
    lattice = np.column_stack([m.ravel() for m in mesh])
    rem = n - lattice.shape[0]
    if rem > 0:
        lattice = np.vstack([lattice, rng.random((rem, d))])
    return lattice


def ulam_matrix(system: DynamicalSystem, resolution, samples_per_cell: int,
                seed: int) -> TransferMatrix:
    """Row-stochastic Ulam matrix: row i is the empirical image-cell
    distribution of stratified sample points in cell i."""
    d = system.space.dim
    res = np.atleast_1d(np.asarray(resolution, dtype=int))
    if res.shape[0] == 1 and d > 1:
        res = np.full(d, res[0])
    if res.shape[0] != d:
        raise ValueError(f"resolution must have {d} entries")
    if np.any(res < 2):
        raise ValueError("resolution must be >= 2 per dimension")
    n_cells = int(np.prod(res))
    if n_cells > MAX_ULAM_CELLS:
        raise MemoryError(f"{n_cells} cells exceed the {MAX_ULAM_CELLS} guard")
    widths = system.space.widths()
    if np.any(widths <= 0.0):
        raise ValueError("phase-space cell volume is zero")
    lo = np.asarray(system.space.lo)
    cell_w = widths / res

    rng = np.random.default_rng([seed, 0x0E11])
    offsets = _lattice_offsets(samples_per_cell, d, rng)

    idx = np.arange(n_cells)
    coords = np.column_stack(np.unravel_index(idx, tuple(res)))
    corners = lo + coords * cell_w
    # (n_cells * samples, d) sample points, cell-major
    pts = (corners[:, None, :] + offsets[None, :, :] * cell_w).reshape(-1, d)
    images = system.eval_batch(pts)
    img_coords = np.floor((images - lo) / cell_w).astype(np.int64)
    img_coords = np.clip(img_coords, 0, res - 1)
    cols = np.ravel_multi_index(tuple(img_coords.T), tuple(res))
    rows = np.repeat(idx, samples_per_cell)
    data = np.full(rows.shape[0], 1.0 / samples_per_cell)
    mat = sp.coo_matrix((data, (rows, cols)), shape=(n_cells, n_cells)).tocsr()
    mat.sum_duplicates()
    # kill accumulated float drift so rows sum to 1 exactly
    row_sums = np.asarray(mat.sum(axis=1)).ravel()
    mat = sp.diags(1.0 / row_sums) @ mat
    return TransferMatrix(
        space=system.space,
        resolution=tuple(int(r) for r in res),
        matrix=mat.tocsr(),
        samples_per_cell=int(samples_per_cell),
    )


def ulam_stationary(transfer: TransferMatrix, tol: float = 1e-12,
                    max_iters: int = 20_000) -> GridMeasure:
    """Stationary density of the Ulam matrix by left power iteration from
    the uniform vector; raises UlamConvergenceError on non-convergence."""
    p_t = transfer.matrix.T.tocsr()
    n = p_t.shape[0]
    v = np.full(n, 1.0 / n)
    residual = math.inf
    for it in range(max_iters):
        v_next = p_t.dot(v)
        residual = float(np.abs(v_next - v).sum())
        v = v_next
        if residual < tol:
            v = np.maximum(v, 0.0)
            v /= v.sum()
            return GridMeasure(
                space=transfer.space,
                resolution=transfer.resolution,
                density=v,
                provenance={"kind": "ulam", "iterations": it + 1,
                            "residual": residual, "tol": tol},
            )
    raise UlamConvergenceError(residual=residual, iterations=max_iters)


# ---------------------------------------------------------------------------
# Weak* distance via a finite test dictionary
# ---------------------------------------------------------------------------


def _chebyshev_values(u: np.ndarray, degree: int) -> np.ndarray:
    """(len(u), degree) matrix of T_1..T_degree at u in [-1, 1]."""
    out = np.empty((u.shape[0], degree))
    if degree >= 1:
        out[:, 0] = u
    if degree >= 2:
        out[:, 1] = 2.0 * u * u - 1.0
    for m in range(3, degree + 1):
        out[:, m - 1] = 2.0 * u * out[:, m - 2] - out[:, m - 3]
    return out


def _torus_wavevectors(d: int, cutoff: int):
    """Lexicographically positive half of the integer box, zero excluded."""
    grids = np.meshgrid(*[np.arange(-cutoff, cutoff + 1)] * d, indexing="ij")
    ks = np.column_stack([g.ravel() for g in grids])
    keep = []
    for k in ks:
        nz = np.nonzero(k)[0]
        if nz.size == 0:
            continue
        if k[nz[0]] > 0:
            keep.append(k)
    return np.array(keep)


def dictionary_moments(measure, cutoff: int) -> np.ndarray:
    """Integrals of the test dictionary against the measure.

    Torus: cos/sin(2 pi k.x) over |k|_inf <= cutoff. Interval: Chebyshev
    polynomials to degree cutoff (affinely rescaled). Cylinder: products of
    the two. The constant function is omitted (both measures integrate it
    to 1).
    """
    pts, w = measure_cloud(measure)
    space = measure.space
    if space.kind == "torus":
        ks = _torus_wavevectors(space.dim, cutoff)
        phases = 2.0 * math.pi * (pts @ ks.T)
        return np.concatenate([w @ np.cos(phases), w @ np.sin(phases)])
    if space.kind == "interval":
        u = 2.0 * (pts[:, 0] - space.lo[0]) / space.widths()[0] - 1.0
        return w @ _chebyshev_values(u, cutoff)
    if space.kind == "cylinder":
        phases = 2.0 * math.pi * pts[:, 0]
        u = 2.0 * (pts[:, 1] - space.lo[1]) / space.widths()[1] - 1.0
        cheb = np.column_stack([np.ones_like(u), _chebyshev_values(u, cutoff)])
        mom = [w @ cheb[:, 1:]]  # pure Chebyshev modes
        for k in range(1, cutoff + 1):
            ck = np.cos(k * phases)
            sk = np.sin(k * phases)
            mom.append(w @ (ck[:, None] * cheb))
            mom.append(w @ (sk[:, None] * cheb))
        return np.concatenate(mom)
    raise ValueError(f"no dictionary for space kind {space.kind!r}")


def weak_star_distance(mu, nu, mode_cutoff: int = 4) -> float:
    """Max dictionary-moment gap; a computable weak* proxy metric."""
    if mu.space != nu.space:
        raise ValueError("measures live on different phase spaces")
    m1 = dictionary_moments(mu, mode_cutoff)
    m2 = dictionary_moments(nu, mode_cutoff)
    return float(np.max(np.abs(m1 - m2)))


# ---------------------------------------------------------------------------
# Singular-set and Jacobian diagnostics
# ---------------------------------------------------------------------------


def ls1_fit(system: DynamicalSystem, measure, eps_grid) -> dict:
    """Power-law fit of the singular-set neighborhood mass.

    Measures mu(B_eps(S)) on eps_grid and fits log mass against log eps by
    least squares. Returns C (exp intercept), beta (slope), and the RMS fit
    residual; if every eps has zero mass the condition holds vacuously and
    beta is reported as +inf.
    """
    if not system.singular_set:
        raise ValueError("system has an empty singular set")
    eps_grid = np.sort(np.asarray(eps_grid, dtype=float))
    if np.any(eps_grid <= 0.0):
        raise ValueError("eps values must be positive")
    pts, w = measure_cloud(measure)
    dist = system.singular_distance(pts)
    masses = np.array([float(w[dist < e].sum()) for e in eps_grid])
    positive = masses > 0.0
    if not np.any(positive):
        return {"C": 0.0, "beta": math.inf, "residual": 0.0,
                "eps": eps_grid.tolist(), "mass": masses.tolist()}
    x = np.log(eps_grid[positive])
    y = np.log(masses[positive])
    if x.shape[0] == 1:
        beta, intercept = 0.0, y[0]
        residual = 0.0
    else:
        beta, intercept = np.polyfit(x, y, 1)
        residual = float(np.sqrt(np.mean((np.polyval([beta, intercept], x) - y) ** 2)))
    return {"C": float(np.exp(intercept)), "beta": float(beta),
            "residual": residual, "eps": eps_grid.tolist(),
            "mass": masses.tolist()}


def _top_singular_batch(dfs: np.ndarray) -> np.ndarray:
    if dfs.shape[1] == 1:
        return np.abs(dfs[:, 0, 0])
    gram = np.matmul(np.transpose(dfs, (0, 2, 1)), dfs)
    return np.sqrt(np.maximum(np.linalg.eigvalsh(gram)[:, -1], 0.0))


def _bottom_singular_batch(dfs: np.ndarray) -> np.ndarray:
    if dfs.shape[1] == 1:
        return np.abs(dfs[:, 0, 0])
    gram = np.matmul(np.transpose(dfs, (0, 2, 1)), dfs)
    return np.sqrt(np.maximum(np.linalg.eigvalsh(gram)[:, 0], 0.0))


def ls2_integral(system: DynamicalSystem, measure) -> dict:
    """Weighted log+ norms of Df (and of Df^-1 when invertible).

    Points where the differential is undefined (singular set) are skipped
    and the remaining weights renormalized; the skip count is reported.
    """
    pts, w = measure_cloud(measure)
    dist = system.singular_distance(pts)
    ok = dist >= 1e-15
    dfs = system.differential_batch(pts[ok])
    finite = np.all(np.isfinite(dfs), axis=(1, 2))
    ok_idx = np.where(ok)[0][finite]
    skipped = pts.shape[0] - ok_idx.shape[0]
    weights = w[ok_idx]
    total = weights.sum()
    if total <= 0.0:
        raise SamplingFailureError("no usable points for the log-norm integral")
    weights = weights / total
    dfs = dfs[finite]
    forward = float(weights @ np.maximum(np.log(_top_singular_batch(dfs)), 0.0))
    out = {"forward": forward, "backward": None, "skipped": int(skipped)}
    if system.invertible:
        smin = _bottom_singular_batch(dfs)
        inv_norm = np.where(smin > 0.0, 1.0 / np.maximum(smin, 1e-300), np.inf)
        out["backward"] = float(weights @ np.maximum(np.log(inv_norm), 0.0))
    return out


def holder_parameter_check(family: FamilyHandle, t_grid, sample_points,
                           margin: float = 0.0) -> dict:
    """Hölder regularity of t -> log |det Df_t(x)| over sample points.

    The exponent beta is the least-squares slope of the log max-difference
    against log |t - s| over parameter pairs; the constant c is then the
    smallest envelope making the bound hold on the whole sample, and
    max_violation reports the largest exceedance of that fitted bound
    (zero up to round-off by construction). A family whose Jacobian does
    not depend on t returns c = 0, beta = +inf.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.shape[0] < 2:
        raise ValueError("need at least two parameter values")
    systems = [family.build(t) for t in t_grid]
    pts = np.atleast_2d(np.asarray(sample_points, dtype=float))
    for sys_t in systems:
        if np.any(sys_t.singular_distance(pts) <= margin):
            raise ValueError("sample point on the singular set")
    logs = []
    for sys_t in systems:
        dfs = sys_t.differential_batch(pts)
        if dfs.shape[1] == 1:
            logs.append(np.log(np.abs(dfs[:, 0, 0])))
        else:
            sign, logdet = np.linalg.slogdet(dfs)
            logs.append(logdet)
    logs = np.array(logs)
    n_t = t_grid.shape[0]
    gaps, diffs = [], []
    for a in range(n_t - 1):
        for b in range(a + 1, n_t):
            gaps.append(abs(t_grid[b] - t_grid[a]))
            diffs.append(float(np.max(np.abs(logs[a] - logs[b]))))
    gaps = np.array(gaps)
    diffs = np.array(diffs)
    positive = diffs > 0.0
    if not np.any(positive):
        return {"c": 0.0, "beta": math.inf, "max_violation": 0.0}
    x = np.log(gaps[positive])
    y = np.log(diffs[positive])
    beta = float(np.polyfit(x, y, 1)[0]) if x.shape[0] > 1 else 1.0
    bound = gaps ** beta
    c = float(np.max(diffs / np.maximum(bound, 1e-300)))
    max_violation = float(np.max(diffs - c * bound))
    return {"c": c, "beta": beta, "max_violation": max(max_violation, 0.0)}


def log_det_batch(system: DynamicalSystem, pts: np.ndarray) -> np.ndarray:
    dfs = system.differential_batch(pts)
    if dfs.shape[1] == 1:
        with np.errstate(divide="ignore"):
            return np.log(np.abs(dfs[:, 0, 0]))
    sign, logdet = np.linalg.slogdet(dfs)
    return np.where(sign == 0.0, -np.inf, logdet)


def bounded_jacobian_check(system: DynamicalSystem, measure, bound: float) -> dict:
    """|integral of log |det Df|| compared against an a-priori bound."""
    pts, w = measure_cloud(measure)
    dist = system.singular_distance(pts)
    ok = dist >= 1e-15
    logdet = log_det_batch(system, pts[ok])
    finite = np.isfinite(logdet)
    weights = w[ok][finite]
    total = weights.sum()
    if total <= 0.0:
        raise SamplingFailureError("no usable points for the Jacobian integral")
    value = float(abs((weights / total) @ logdet[finite]))
    return {"value": value, "bound": float(bound), "passed": value <= bound,
            "skipped": int(pts.shape[0] - int(finite.sum()))}
