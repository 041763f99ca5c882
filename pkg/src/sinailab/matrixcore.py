"""Small dense linear algebra for derivative cocycles.

Everything here works on real square matrices of dimension 1..8: singular
values, exterior-power (wedge) norms carried in log scale, and QR-rescaled
accumulators for long cocycle products that would otherwise overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import OrbitFailureError

MAX_DIM = 8

#: log-scale stand-in for log(0); kept finite so sums and comparisons work.
LOG_ZERO = -1.0e308

_JACOBI_TOL = 1e-15
_JACOBI_MAX_SWEEPS = 60


def as_square_matrix(a) -> np.ndarray:
    """Validate and return a float64 square matrix of dimension 1..8."""
    m = np.asarray(a, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    if not 1 <= m.shape[0] <= MAX_DIM:
        raise ValueError(f"dimension {m.shape[0]} outside [1, {MAX_DIM}]")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix entries must be finite")
    return m


def _jacobi_column_singular_values(m: np.ndarray) -> np.ndarray:
    """Singular values of an (n, k) matrix, k <= n, by one-sided Jacobi.

    Cyclic sweeps rotate column pairs until all pairs are numerically
    orthogonal; the singular values are the final column norms. For the
    tiny dimensions used here this is robust and gives good relative
    accuracy on graded spectra.
    """
    a = np.array(m, dtype=float)
    k = a.shape[1]
    if k == 1:
        return np.array([math.sqrt(float(a[:, 0] @ a[:, 0]))])
    for _ in range(_JACOBI_MAX_SWEEPS):
        off = 0.0
        for p in range(k - 1):
            for q in range(p + 1, k):
                cp = a[:, p]
                cq = a[:, q]
                app = float(cp @ cp)
                aqq = float(cq @ cq)
                apq = float(cp @ cq)
                if app == 0.0 or aqq == 0.0 or apq == 0.0:
                    continue
                scale = math.sqrt(app * aqq)
                if abs(apq) <= _JACOBI_TOL * scale:
                    continue
                off = max(off, abs(apq) / scale)
                tau = (aqq - app) / (2.0 * apq)
                t = math.copysign(1.0, tau) / (abs(tau) + math.sqrt(1.0 + tau * tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = c * t
                a[:, p], a[:, q] = c * cp - s * cq, s * cp + c * cq
        if off == 0.0:
            break
    sv = np.sqrt(np.sum(a * a, axis=0))
    sv.sort()
    return sv[::-1].copy()


def singular_values(a) -> np.ndarray:
    """Sorted (descending) singular values of a square matrix.

    The squared values are the eigenvalues of A^T A; degenerate input
    simply yields zeros.
    """
    return _jacobi_column_singular_values(as_square_matrix(a))


def log_sum_exp(values) -> float:
    """log(sum(exp(v))) computed without overflow; ignores LOG_ZERO terms."""
    vals = [v for v in values if v > LOG_ZERO]
    if not vals:
        return LOG_ZERO
    m = max(vals)
    return m + math.log(sum(math.exp(v - m) for v in vals))


def _saturating_cumsum(values) -> list:
    """Cumulative sums clamped at LOG_ZERO (so -inf never appears)."""
    out = []
    s = 0.0
    for v in values:
        s = s + v
        if not s > LOG_ZERO:  # catches -inf from summed sentinels
            s = LOG_ZERO
        out.append(s)
    return out


@dataclass(frozen=True)
class WedgeProfile:
    """Log-scale summary of all exterior-power norms of one matrix.

    log_wedge_j[j-1] = log of the operator norm of the j-th exterior power,
    which equals the sum of the top-j log singular values. log_wedge_total
    is log(1 + sum_j ||A^(wedge j)||), the aggregate used by the
    Ledrappier-Strelcyn entropy characterization. A zero singular value is
    carried as the LOG_ZERO sentinel, never NaN, so totals stay finite.
    """

    dim: int
    log_singular_values: tuple
    log_wedge_j: tuple
    log_wedge_total: float

    @property
    def log_wedge_dim(self) -> float:
        """log |det A| (the top wedge)."""
        return self.log_wedge_j[-1]

    @staticmethod
    def from_log_singular_values(log_sv) -> "WedgeProfile":
        lsv = sorted((float(v) for v in log_sv), reverse=True)
        lw = _saturating_cumsum(lsv)
        total = log_sum_exp([0.0] + lw)
        return WedgeProfile(
            dim=len(lsv),
            log_singular_values=tuple(lsv),
            log_wedge_j=tuple(lw),
            log_wedge_total=total,
        )


def wedge_profile(a) -> WedgeProfile:
    """WedgeProfile of a square matrix from its singular values."""
    sv = singular_values(a)
    log_sv = [math.log(s) if s > 0.0 else LOG_ZERO for s in sv]
    return WedgeProfile.from_log_singular_values(log_sv)


@dataclass(frozen=True)
class CocycleAccumulator:
    """QR-rescaled running product of derivative matrices.

    Tracks an orthonormal frame pushed through the cocycle and the running
    per-column log-stretch sums (the classic discrete QR scheme). Values
    are immutable; cocycle_step returns a new accumulator.
    """

    dim: int
    orthonormal_frame: np.ndarray
    log_diag: np.ndarray
    steps: int

    @staticmethod
    def identity(dim: int) -> "CocycleAccumulator":
        if not 1 <= dim <= MAX_DIM:
            raise ValueError(f"dimension {dim} outside [1, {MAX_DIM}]")
        return CocycleAccumulator(
            dim=dim,
            orthonormal_frame=np.eye(dim),
            log_diag=np.zeros(dim),
            steps=0,
        )


def _qr_positive(m: np.ndarray):
    """QR with the sign convention diag(R) >= 0."""
    q, r = np.linalg.qr(m)
    sign = np.sign(np.diag(r))
    sign[sign == 0.0] = 1.0
    return q * sign, r * sign[:, None]


def cocycle_step(acc: CocycleAccumulator, df) -> CocycleAccumulator:
    """Advance the accumulator by one derivative matrix."""
    m = as_square_matrix(df)
    if m.shape[0] != acc.dim:
        raise ValueError(f"dimension mismatch: {m.shape[0]} vs {acc.dim}")
    q, r = _qr_positive(m @ acc.orthonormal_frame)
    diag = np.abs(np.diag(r))
    with np.errstate(divide="ignore"):
        logs = np.where(diag > 0.0, np.log(np.maximum(diag, 1e-320)), LOG_ZERO)
    new_logs = acc.log_diag + logs
    new_logs[new_logs < LOG_ZERO] = LOG_ZERO
    return CocycleAccumulator(
        dim=acc.dim,
        orthonormal_frame=q,
        log_diag=new_logs,
        steps=acc.steps + 1,
    )


# ---------------------------------------------------------------------------
# Exterior-power (compound matrix) machinery.
#
# The j-th compound of the one-step derivative is multiplied up along the
# orbit, with a per-step max-abs rescaling whose log is tracked separately.
# Multiplying compounds of the well-conditioned one-step matrices keeps
# every wedge norm accurate; forming sigma_j from the accumulated full
# product instead loses all singular values below eps * sigma_1 to
# round-off once the product is strongly graded.
# ---------------------------------------------------------------------------


def _index_subsets(dim: int, j: int):
    return list(combinations(range(dim), j))


def compound_batch(dfs: np.ndarray, j: int) -> np.ndarray:
    """j-th exterior power of a stack of (m, d, d) matrices.

    Entry (I, J) of the compound is the minor det(A[I, J]) over the
    lexicographically ordered j-subsets.
    """
    m, d, _ = dfs.shape
    if j == 1:
        return dfs
    if j == d:
        return np.linalg.det(dfs).reshape(m, 1, 1)
    subs = _index_subsets(d, j)
    c = len(subs)
    out = np.empty((m, c, c))
    for a, rows in enumerate(subs):
        block = dfs[:, rows, :]
        for b, cols in enumerate(subs):
            sub = block[:, :, cols]
            if j == 2:
                out[:, a, b] = sub[:, 0, 0] * sub[:, 1, 1] - sub[:, 0, 1] * sub[:, 1, 0]
            else:
                out[:, a, b] = np.linalg.det(sub)
    return out


class WedgeAccumulatorBatch:
    """Running exterior-power products for a batch of base points.

    For each order j, keeps the rescaled compound product and the log of
    the accumulated scale, so log ||Df^n(x)^(wedge j)|| is available at any
    step without overflow and with full round-off accuracy.
    """

    def __init__(self, dim: int, n_points: int, orders=None):
        self.dim = dim
        self.n_points = n_points
        self.orders = tuple(orders) if orders is not None else tuple(range(1, dim + 1))
        self._mats = {}
        self._logs = {}
        for j in self.orders:
            c = math.comb(dim, j)
            eye = np.broadcast_to(np.eye(c), (n_points, c, c)).copy()
            self._mats[j] = eye
            self._logs[j] = np.zeros(n_points)
        self.steps = 0

    def step(self, dfs: np.ndarray) -> None:
        """Multiply the compounds of a (m, d, d) stack onto the products."""
        for j in self.orders:
            cj = compound_batch(dfs, j)
            prod = np.matmul(cj, self._mats[j])
            scale = np.max(np.abs(prod), axis=(1, 2))
            dead = scale == 0.0
            safe = np.where(dead, 1.0, scale)
            prod /= safe[:, None, None]
            with np.errstate(divide="ignore"):
                self._logs[j] += np.where(dead, LOG_ZERO, np.log(safe))
            self._logs[j][self._logs[j] < LOG_ZERO] = LOG_ZERO
            self._mats[j] = prod
        self.steps += 1

    def log_wedge(self, j: int) -> np.ndarray:
        """log ||P^(wedge j)|| per point for the current product P."""
        mats = self._mats[j]
        if mats.shape[1] == 1:
            top = np.abs(mats[:, 0, 0])
        else:
            gram = np.matmul(np.transpose(mats, (0, 2, 1)), mats)
            top = np.sqrt(np.maximum(np.linalg.eigvalsh(gram)[:, -1], 0.0))
        with np.errstate(divide="ignore"):
            lw = np.where(top > 0.0, np.log(np.maximum(top, 1e-320)), LOG_ZERO)
        lw = lw + self._logs[j]
        lw[lw < LOG_ZERO] = LOG_ZERO
        return lw

    def log_wedge_all(self) -> np.ndarray:
        """(m, dim) array of log wedge norms for every order."""
        return np.column_stack([self.log_wedge(j) for j in self.orders])


def log_wedge_total_from_rows(log_wedges: np.ndarray) -> np.ndarray:
    """Vectorized log(1 + sum_j exp(lw_j)) over rows of wedge logs."""
    rows = np.concatenate(
        [np.zeros((log_wedges.shape[0], 1)), log_wedges], axis=1
    )
    m = np.max(rows, axis=1, keepdims=True)
    return (m + np.log(np.sum(np.exp(rows - m), axis=1, keepdims=True)))[:, 0]


def exact_cocycle_wedge(system, x, n: int) -> WedgeProfile:
    """WedgeProfile of Df^n(x) along the orbit of x.

    Maintains one rescaled compound product per exterior order, so all
    singular values of the n-step derivative are recovered in log scale
    exactly up to round-off. Raises OrbitFailureError (with the step index)
    if the orbit hits the singular set.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    pt = np.atleast_1d(np.asarray(x, dtype=float))
    d = system.space.dim
    acc = WedgeAccumulatorBatch(d, 1)
    cur = pt[None, :]
    for step in range(n):
        if system.hits_singular_set(cur)[0]:
            raise OrbitFailureError(step, point=cur[0].copy())
        dfs = system.differential_batch(cur)
        if not np.all(np.isfinite(dfs)):
            raise OrbitFailureError(step, point=cur[0].copy())
        acc.step(dfs)
        cur = system.eval_batch(cur)
    lw = acc.log_wedge_all()[0]
    log_sv = []
    prev = 0.0
    for j in range(d):
        if lw[j] <= LOG_ZERO:
            log_sv.append(LOG_ZERO)
            prev = LOG_ZERO
        else:
            log_sv.append(lw[j] - prev if prev > LOG_ZERO else LOG_ZERO)
            prev = lw[j]
    # Guard: tiny round-off can break monotonicity of the diffs.
    log_sv.sort(reverse=True)
    return WedgeProfile.from_log_singular_values(log_sv)
