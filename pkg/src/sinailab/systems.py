"""Executable dynamical systems with exact analytic differentials.

Families provided: linear torus automorphisms (Anosov), the
Manneville-Pomeau intermittent interval family, a derived-from-Anosov
isotopy of the cat map, a standard-map skew product over T^4, and the
quadratic-fiber skew products of Viana type.

Every system bundles a phase space, a vectorized map, its exact Jacobian,
a singular-set description, and (when available) an inverse. Long-orbit
generation goes through fast scalar loops per family.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import EscapeError, UnsupportedSystemError

TWO_PI = 2.0 * math.pi

#: low-bit dither scale for maps whose float iteration is an exact binary
#: shift (doubling-type branches); without it double-precision orbits
#: collapse onto the fixed point at 0 within ~53 steps.
DITHER_SCALE = 2.0 ** -50


# ---------------------------------------------------------------------------
# Phase spaces
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PhaseSpace:
    """Box-shaped phase space with per-coordinate periodicity.

    kind is one of "torus" (all coordinates periodic on [0,1)), "interval"
    ([0,1]), or "cylinder" (first coordinate periodic on [0,1), second a
    bounded interval; used by the quadratic skew products).
    """

    kind: str
    lo: tuple
    hi: tuple
    periodic: tuple

    @property
    def dim(self) -> int:
        return len(self.lo)

    @staticmethod
    def torus(d: int) -> "PhaseSpace":
        return PhaseSpace("torus", (0.0,) * d, (1.0,) * d, (True,) * d)

    @staticmethod
    def unit_interval() -> "PhaseSpace":
        return PhaseSpace("interval", (0.0,), (1.0,), (False,))

    @staticmethod
    def cylinder(xlo: float, xhi: float) -> "PhaseSpace":
        return PhaseSpace("cylinder", (0.0, xlo), (1.0, xhi), (True, False))

    def widths(self) -> np.ndarray:
        return np.asarray(self.hi) - np.asarray(self.lo)

    def contains(self, pts: np.ndarray, tol: float = 1e-9) -> np.ndarray:
        pts = np.atleast_2d(pts)
        lo = np.asarray(self.lo) - tol
        hi = np.asarray(self.hi) + tol
        return np.all((pts >= lo) & (pts <= hi), axis=1)

    def uniform(self, rng: np.random.Generator, n: int) -> np.ndarray:
        lo = np.asarray(self.lo)
        return lo + rng.random((n, self.dim)) * self.widths()

    def wrap(self, pts: np.ndarray) -> np.ndarray:
        """Reduce periodic coordinates into [lo, hi); clip the rest."""
        pts = np.array(np.atleast_2d(pts), dtype=float)
        lo = np.asarray(self.lo)
        w = self.widths()
        for i, per in enumerate(self.periodic):
            if per:
                pts[:, i] = lo[i] + np.mod(pts[:, i] - lo[i], w[i])
            else:
                pts[:, i] = np.clip(pts[:, i], lo[i], self.hi[i])
        return pts

    def displacement(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Shortest vector from a to b, wrapping periodic coordinates."""
        a = np.atleast_2d(a)
        b = np.atleast_2d(b)
        d = b - a
        w = self.widths()
        for i, per in enumerate(self.periodic):
            if per:
                d[:, i] = (d[:, i] + 0.5 * w[i]) % w[i] - 0.5 * w[i]
        return d

    def coord_distance(self, values: np.ndarray, c: float, axis: int) -> np.ndarray:
        """Distance |x_axis - c| along one coordinate, wrapped if periodic."""
        d = np.abs(values - c)
        if self.periodic[axis]:
            w = self.widths()[axis]
            d = np.minimum(d, w - d)
        return d


# ---------------------------------------------------------------------------
# Singular-set descriptors (points and coordinate hyperplanes)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SingularPoint:
    location: tuple
    label: str = ""


@dataclass(frozen=True)
class SingularHyperplane:
    axis: int
    value: float
    label: str = ""


def distance_to_singular_set(space: PhaseSpace, descriptors, pts: np.ndarray) -> np.ndarray:
    """Max-metric distance from each point to the singular set.

    Empty singular set yields +inf everywhere.
    """
    pts = np.atleast_2d(pts)
    if not descriptors:
        return np.full(pts.shape[0], np.inf)
    dists = []
    for desc in descriptors:
        if isinstance(desc, SingularHyperplane):
            dists.append(space.coord_distance(pts[:, desc.axis], desc.value, desc.axis))
        elif isinstance(desc, SingularPoint):
            loc = np.asarray(desc.location, dtype=float)
            per_axis = np.stack(
                [space.coord_distance(pts[:, i], loc[i], i) for i in range(space.dim)],
                axis=1,
            )
            dists.append(np.max(per_axis, axis=1))
        else:
            raise TypeError(f"unknown singular descriptor {type(desc)!r}")
    return np.min(np.stack(dists, axis=1), axis=1)


# ---------------------------------------------------------------------------
# The system contract
# ---------------------------------------------------------------------------


@dataclass
class DynamicalSystem:
    """A map with its exact differential on a concrete phase space.

    eval_batch / differential_batch are vectorized over (n, d) point
    arrays. Systems are immutable after construction and all evaluation is
    pure, so instances are safe to share across threads and processes.
    """

    name: str
    space: PhaseSpace
    params: dict
    eval_batch: Callable[[np.ndarray], np.ndarray]
    differential_batch: Callable[[np.ndarray], np.ndarray]
    singular_set: list = field(default_factory=list)
    invertible: bool = False
    inverse_eval_batch: Optional[Callable[[np.ndarray], np.ndarray]] = None
    orbit_fn: Optional[Callable] = None
    dither_scale: float = 0.0

    # -- pointwise conveniences -------------------------------------------
    def eval(self, x) -> np.ndarray:
        return self.eval_batch(np.atleast_1d(np.asarray(x, float))[None, :])[0]

    def differential(self, x) -> np.ndarray:
        return self.differential_batch(np.atleast_1d(np.asarray(x, float))[None, :])[0]

    def inverse_eval(self, x) -> np.ndarray:
        if not self.invertible or self.inverse_eval_batch is None:
            raise UnsupportedSystemError(f"{self.name} has no inverse")
        return self.inverse_eval_batch(np.atleast_1d(np.asarray(x, float))[None, :])[0]

    def inverse_differential_batch(self, pts: np.ndarray) -> np.ndarray:
        """D(f^-1) at pts, computed as (Df at the preimages)^-1."""
        if not self.invertible or self.inverse_eval_batch is None:
            raise UnsupportedSystemError(f"{self.name} has no inverse")
        pre = self.inverse_eval_batch(np.atleast_2d(pts))
        return np.linalg.inv(self.differential_batch(pre))

    def inverse_differential(self, x) -> np.ndarray:
        return self.inverse_differential_batch(np.atleast_1d(np.asarray(x, float))[None, :])[0]

    # -- singular set ------------------------------------------------------
    def singular_distance(self, pts: np.ndarray) -> np.ndarray:
        return distance_to_singular_set(self.space, self.singular_set, pts)

    def hits_singular_set(self, pts: np.ndarray) -> np.ndarray:
        return self.singular_distance(pts) < 1e-15

    # -- orbits -------------------------------------------------------------
    def orbit(self, x0, n: int, dither_rng: Optional[np.random.Generator] = None) -> np.ndarray:
        """(n+1, d) array [x0, f(x0), ..., f^n(x0)].

        Uses the family's fast scalar loop when available. Systems with a
        nonzero dither_scale perturb each iterate by ~1 ulp (seeded via
        dither_rng) to keep binary-shift maps off their spurious float
        fixed points; pointwise eval stays exact.
        """
        x0 = np.atleast_1d(np.asarray(x0, dtype=float))
        if self.orbit_fn is not None:
            return self.orbit_fn(x0, n, dither_rng)
        out = np.empty((n + 1, self.space.dim))
        out[0] = x0
        cur = x0[None, :]
        noise = None
        if self.dither_scale and dither_rng is not None:
            noise = dither_rng.random((n, self.space.dim)) * self.dither_scale
        for k in range(n):
            cur = self.eval_batch(cur)
            if noise is not None:
                cur = self.space.wrap(cur + noise[k])
            out[k + 1] = cur[0]
        return out

    def step_batch(self, pts: np.ndarray, dither_rng: Optional[np.random.Generator] = None) -> np.ndarray:
        """One map application for a batch, with optional dither."""
        out = self.eval_batch(pts)
        if self.dither_scale and dither_rng is not None:
            out = self.space.wrap(out + dither_rng.random(out.shape) * self.dither_scale)
        return out


# ---------------------------------------------------------------------------
# Torus automorphisms
# ---------------------------------------------------------------------------

CAT_MATRIX = ((2, 1), (1, 1))


def _integer_inverse(a: np.ndarray) -> np.ndarray:
    inv = np.linalg.inv(a)
    inv_round = np.rint(inv)
    if not np.allclose(a @ inv_round, np.eye(a.shape[0]), atol=1e-9):
        raise ValueError("matrix has no integer inverse")
    return inv_round


def make_torus_automorphism(matrix) -> DynamicalSystem:
    """Linear automorphism x -> A x (mod 1) of the d-torus, |det A| = 1."""
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("matrix must be square")
    if not np.allclose(a, np.rint(a)):
        raise ValueError("matrix must be integer")
    a = np.rint(a)
    det = round(float(np.linalg.det(a)))
    if abs(det) != 1:
        raise ValueError(f"|det| must be 1, got {det}")
    d = a.shape[0]
    space = PhaseSpace.torus(d)
    a_inv = _integer_inverse(a)
    rows = [tuple(float(v) for v in a[i]) for i in range(d)]

    def ev(pts):
        return np.mod(np.atleast_2d(pts) @ a.T, 1.0)

    def dfb(pts):
        pts = np.atleast_2d(pts)
        return np.broadcast_to(a, (pts.shape[0], d, d)).copy()

    def inv_ev(pts):
        return np.mod(np.atleast_2d(pts) @ a_inv.T, 1.0)

    if d == 2:
        a00, a01 = rows[0]
        a10, a11 = rows[1]

        def orbit_fn(x0, n, _rng):
            out = np.empty((n + 1, 2))
            x, y = float(x0[0]), float(x0[1])
            out[0] = (x, y)
            for k in range(n):
                x, y = (a00 * x + a01 * y) % 1.0, (a10 * x + a11 * y) % 1.0
                out[k + 1] = (x, y)
            return out
    else:
        def orbit_fn(x0, n, _rng):
            out = np.empty((n + 1, d))
            cur = [float(v) for v in x0]
            out[0] = cur
            rng_d = range(d)
            for k in range(n):
                cur = [sum(r[i] * cur[i] for i in rng_d) % 1.0 for r in rows]
                out[k + 1] = cur
            return out

    return DynamicalSystem(
        name="torus_automorphism",
        space=space,
        params={"matrix": [[int(v) for v in row] for row in a]},
        eval_batch=ev,
        differential_batch=dfb,
        singular_set=[],
        invertible=True,
        inverse_eval_batch=inv_ev,
        orbit_fn=orbit_fn,
    )


def make_cat_map() -> DynamicalSystem:
    """Arnold's cat map on T^2."""
    sys = make_torus_automorphism(CAT_MATRIX)
    sys.name = "cat"
    return sys


def make_cat_block(copies: int = 2) -> DynamicalSystem:
    """Block-diagonal direct sum of cat maps on T^(2*copies)."""
    a = np.kron(np.eye(copies), np.asarray(CAT_MATRIX))
    sys = make_torus_automorphism(a)
    sys.name = f"cat_block{copies}"
    return sys


# ---------------------------------------------------------------------------
# Manneville-Pomeau intermittent maps
# ---------------------------------------------------------------------------


def make_manneville_pomeau(alpha: float) -> DynamicalSystem:
    """Intermittent interval map x(1 + 2^a x^a) on [0,1/2], 2x-1 above.

    alpha = 0 is the doubling map; alpha > 0 has a neutral fixed point at
    0 with derivative exactly 1.
    """
    if not 0.0 <= alpha < 1.0:
        raise ValueError(f"alpha must be in [0, 1), got {alpha}")
    space = PhaseSpace.unit_interval()
    pow2a = 2.0 ** alpha

    def ev(pts):
        x = np.atleast_2d(pts)[:, 0]
        left = x * (1.0 + pow2a * np.power(x, alpha))
        right = 2.0 * x - 1.0
        return np.clip(np.where(x <= 0.5, left, right), 0.0, 1.0)[:, None]

    def dfb(pts):
        x = np.atleast_2d(pts)[:, 0]
        left = 1.0 + pow2a * (1.0 + alpha) * np.power(x, alpha)
        out = np.where(x <= 0.5, left, 2.0)
        return out[:, None, None]

    singular = [SingularPoint((0.5,), "branch")]
    if alpha > 0.0:
        singular.append(SingularPoint((0.0,), "neutral"))

    def orbit_fn(x0, n, rng):
        out = np.empty((n + 1, 1))
        x = float(x0[0])
        out[0, 0] = x
        if rng is not None and alpha == 0.0:
            noise = rng.random(n) * DITHER_SCALE
        else:
            noise = None
        for k in range(n):
            if x <= 0.5:
                x = x * (1.0 + pow2a * x ** alpha)
                if x > 1.0:
                    x = 1.0
            else:
                x = 2.0 * x - 1.0
            if noise is not None:
                x = x + noise[k]
                if x > 1.0:
                    x -= 1.0
            out[k + 1, 0] = x
        return out

    return DynamicalSystem(
        name="manneville_pomeau",
        space=space,
        params={"alpha": alpha},
        eval_batch=ev,
        differential_batch=dfb,
        singular_set=singular,
        invertible=False,
        orbit_fn=orbit_fn,
        dither_scale=DITHER_SCALE if alpha == 0.0 else 0.0,
    )


# ---------------------------------------------------------------------------
# Derived-from-Anosov isotopy of the cat map
# ---------------------------------------------------------------------------

#: weak expansion target for the deformed stable rate (log scale)
DA_LOG_WEAK_RATE = 0.1
DA_BUMP_RADIUS = 0.1


def make_derived_from_anosov(deformation: float) -> DynamicalSystem:
    """Isotopy of the cat map weakening the stable contraction near 0.

    Inside a radius-r bump around the fixed point (measured in the
    orthonormal eigenbasis), the log of the stable multiplier is linearly
    interpolated from -log(lambda) toward the weakly expanding target
    DA_LOG_WEAK_RATE, scaled by the deformation parameter. deformation = 0
    reproduces the cat map exactly (bit for bit). The bump profile
    (1 - q/r^2)^3 in q = u^2 + s^2 is C^2 at the edge and smooth inside.
    """
    if not 0.0 <= deformation < 1.0:
        raise ValueError(f"deformation must be in [0, 1), got {deformation}")
    a = np.asarray(CAT_MATRIX, dtype=float)
    lam = (3.0 + math.sqrt(5.0)) / 2.0
    lam_inv = 1.0 / lam
    vu = np.array([1.0, lam - 2.0])
    vu /= math.sqrt(float(vu @ vu))
    vs = np.array([-(lam - 2.0), 1.0])
    vs /= math.sqrt(float(vs @ vs))
    r2 = DA_BUMP_RADIUS ** 2
    kappa = math.log(lam) + DA_LOG_WEAK_RATE  # total log-rate swing at full bump
    t = deformation
    space = PhaseSpace.torus(2)

    def _bump_terms(pts):
        y = np.mod(pts + 0.5, 1.0) - 0.5  # wrap to the cell centered at 0
        u = y @ vu
        s = y @ vs
        q = u * u + s * s
        inside = q < r2
        z = np.where(inside, 1.0 - q / r2, 0.0)
        h = z ** 3
        hp = np.where(inside, -3.0 * z * z / r2, 0.0)
        g = np.expm1(t * kappa * h)
        return u, s, h, hp, g

    def ev(pts):
        pts = np.atleast_2d(pts)
        _, s, _, _, g = _bump_terms(pts)
        delta = s * lam_inv * g
        return np.mod(pts @ a.T + delta[:, None] * vs, 1.0)

    def dfb(pts):
        pts = np.atleast_2d(pts)
        u, s, _, hp, g = _bump_terms(pts)
        gp = (g + 1.0) * t * kappa * hp  # d/dq of expm1 term
        grad_s = lam_inv * (g + 2.0 * s * s * gp)
        grad_u = lam_inv * (2.0 * u * s * gp)
        grad = grad_s[:, None] * vs + grad_u[:, None] * vu
        return a + vs[None, :, None] * grad[:, None, :]

    a_inv = _integer_inverse(a)

    def inv_ev(pts):
        """Newton solve of f(x) = y on the torus, seeded at A^-1 y."""
        y = np.atleast_2d(pts)
        x = np.mod(y @ a_inv.T, 1.0)
        for _ in range(60):
            res = space.displacement(ev(x), y)
            if np.max(np.abs(res)) < 1e-14:
                break
            step = np.linalg.solve(dfb(x), res[:, :, None])[:, :, 0]
            x = np.mod(x + step, 1.0)
        return x

    def orbit_fn(x0, n, _rng):
        out = np.empty((n + 1, 2))
        x, y = float(x0[0]), float(x0[1])
        out[0] = (x, y)
        vux, vuy = float(vu[0]), float(vu[1])
        vsx, vsy = float(vs[0]), float(vs[1])
        tk = t * kappa
        for k in range(n):
            wx = (x + 0.5) % 1.0 - 0.5
            wy = (y + 0.5) % 1.0 - 0.5
            u = wx * vux + wy * vuy
            s = wx * vsx + wy * vsy
            q = u * u + s * s
            if q < r2 and tk != 0.0:
                z = 1.0 - q / r2
                delta = s * lam_inv * math.expm1(tk * z * z * z)
            else:
                delta = 0.0
            x, y = (2.0 * x + y + delta * vsx) % 1.0, (x + y + delta * vsy) % 1.0
            out[k + 1] = (x, y)
        return out

    return DynamicalSystem(
        name="derived_from_anosov",
        space=space,
        params={"deformation": deformation, "radius": DA_BUMP_RADIUS,
                "log_weak_rate": DA_LOG_WEAK_RATE},
        eval_batch=ev,
        differential_batch=dfb,
        singular_set=[],
        invertible=True,
        inverse_eval_batch=inv_ev,
        orbit_fn=orbit_fn,
    )


# ---------------------------------------------------------------------------
# Standard-map skew product on T^4
# ---------------------------------------------------------------------------


def _int_matrix_power(a: np.ndarray, n: int) -> np.ndarray:
    out = np.eye(a.shape[0])
    for _ in range(n):
        out = out @ a
    return np.rint(out)


def make_standard_skew(K: float, N: int) -> DynamicalSystem:
    """Skew product (z, w) -> (s(z) + pi_1(A^N w) e_1, A^(2N) w) on T^4.

    s is the area-preserving Chirikov standard map with coupling K, in the
    convention s(x, y) = (x + y + (K/2pi) sin(2pi x), y + (K/2pi) sin(2pi x))
    mod 1; A is the cat matrix. The Jacobian is block upper-triangular with
    unit determinant, so the map preserves volume.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    a = np.asarray(CAT_MATRIX, dtype=float)
    an = _int_matrix_power(a, N)
    a2n = _int_matrix_power(a, 2 * N)
    c = K / TWO_PI
    space = PhaseSpace.torus(4)

    def ev(pts):
        p = np.atleast_2d(pts)
        z0, z1, w0, w1 = p[:, 0], p[:, 1], p[:, 2], p[:, 3]
        kick = c * np.sin(TWO_PI * z0)
        drive = an[0, 0] * w0 + an[0, 1] * w1
        out = np.empty_like(p)
        out[:, 0] = z0 + z1 + kick + drive
        out[:, 1] = z1 + kick
        out[:, 2] = a2n[0, 0] * w0 + a2n[0, 1] * w1
        out[:, 3] = a2n[1, 0] * w0 + a2n[1, 1] * w1
        return np.mod(out, 1.0)

    def dfb(pts):
        p = np.atleast_2d(pts)
        m = p.shape[0]
        cosk = K * np.cos(TWO_PI * p[:, 0])
        out = np.zeros((m, 4, 4))
        out[:, 0, 0] = 1.0 + cosk
        out[:, 0, 1] = 1.0
        out[:, 0, 2] = an[0, 0]
        out[:, 0, 3] = an[0, 1]
        out[:, 1, 0] = cosk
        out[:, 1, 1] = 1.0
        out[:, 2:, 2:] = a2n
        return out

    a2n_inv = _integer_inverse(a2n)

    def inv_ev(pts):
        p = np.atleast_2d(pts)
        w = np.mod(p[:, 2:] @ a2n_inv.T, 1.0)
        drive = an[0, 0] * w[:, 0] + an[0, 1] * w[:, 1]
        z0p = p[:, 0] - drive
        z0 = np.mod(z0p - p[:, 1], 1.0)
        kick = c * np.sin(TWO_PI * z0)
        z1 = np.mod(p[:, 1] - kick, 1.0)
        out = np.empty_like(p)
        out[:, 0] = z0
        out[:, 1] = z1
        out[:, 2:] = w
        return out

    an00, an01 = float(an[0, 0]), float(an[0, 1])
    b00, b01, b10, b11 = (float(a2n[0, 0]), float(a2n[0, 1]),
                          float(a2n[1, 0]), float(a2n[1, 1]))

    def orbit_fn(x0, n, _rng):
        out = np.empty((n + 1, 4))
        z0, z1, w0, w1 = (float(x0[0]), float(x0[1]), float(x0[2]), float(x0[3]))
        out[0] = (z0, z1, w0, w1)
        for k in range(n):
            kick = c * math.sin(TWO_PI * z0)
            drive = an00 * w0 + an01 * w1
            z0, z1 = (z0 + z1 + kick + drive) % 1.0, (z1 + kick) % 1.0
            w0, w1 = (b00 * w0 + b01 * w1) % 1.0, (b10 * w0 + b11 * w1) % 1.0
            out[k + 1] = (z0, z1, w0, w1)
        return out

    return DynamicalSystem(
        name="standard_skew",
        space=space,
        params={"K": K, "N": N},
        eval_batch=ev,
        differential_batch=dfb,
        singular_set=[],
        invertible=True,
        inverse_eval_batch=inv_ev,
        orbit_fn=orbit_fn,
    )


# ---------------------------------------------------------------------------
# Viana-type quadratic skew products
# ---------------------------------------------------------------------------

VIANA_A0 = 1.7808  # Misiurewicz-type parameter for the fiber quadratic map


def make_viana(a0: float = VIANA_A0, eps: float = 0.02, d: int = 16) -> DynamicalSystem:
    """(theta, x) -> (d theta mod 1, a0 + eps sin(2 pi theta) - x^2).

    The x-fiber lives on the invariant interval [a_min - a_max^2, a_max];
    construction is rejected with a witness point if the parameters let
    orbits escape it. The critical set {x = 0} is the singular set. The
    base expansion d is a power of two for the classical choice d = 16, so
    long orbits are dithered (see DynamicalSystem.orbit).
    """
    if d < 16:
        raise ValueError("d must be >= 16")
    if eps < 0.0:
        raise ValueError("eps must be >= 0")
    amax = a0 + eps
    amin = a0 - eps
    if not (1.0 < amin and amax < 2.0):
        raise EscapeError(
            witness=(0.25, 0.0),
            message=f"fiber parameter range [{amin}, {amax}] outside (1, 2)",
        )
    if amax * amax > amax + amin:
        # x = -a_max at the theta minimizing the drive escapes below.
        witness = (0.75, -amax)
        raise EscapeError(
            witness=witness,
            message=(
                "invariant interval escapes: a_max^2 > a_max + a_min "
                f"({amax * amax:.6f} > {amax + amin:.6f}); witness {witness}"
            ),
        )
    b_hi = amax
    b_lo = amin - amax * amax
    space = PhaseSpace.cylinder(b_lo, b_hi)
    dd = float(d)

    def ev(pts):
        p = np.atleast_2d(pts)
        theta = np.mod(dd * p[:, 0], 1.0)
        x = a0 + eps * np.sin(TWO_PI * p[:, 0]) - p[:, 1] ** 2
        return np.column_stack([theta, np.clip(x, b_lo, b_hi)])

    def dfb(pts):
        p = np.atleast_2d(pts)
        m = p.shape[0]
        out = np.zeros((m, 2, 2))
        out[:, 0, 0] = dd
        out[:, 1, 0] = TWO_PI * eps * np.cos(TWO_PI * p[:, 0])
        out[:, 1, 1] = -2.0 * p[:, 1]
        return out

    def orbit_fn(x0, n, rng):
        out = np.empty((n + 1, 2))
        theta, x = float(x0[0]), float(x0[1])
        out[0] = (theta, x)
        noise = rng.random(n) * DITHER_SCALE if rng is not None else None
        for k in range(n):
            new_theta = (dd * theta) % 1.0
            if noise is not None:
                new_theta = (new_theta + noise[k]) % 1.0
            x = a0 + eps * math.sin(TWO_PI * theta) - x * x
            if x < b_lo:
                x = b_lo
            elif x > b_hi:
                x = b_hi
            theta = new_theta
            out[k + 1] = (theta, x)
        return out

    return DynamicalSystem(
        name="viana",
        space=space,
        params={"a0": a0, "eps": eps, "d": d},
        eval_batch=ev,
        differential_batch=dfb,
        singular_set=[SingularHyperplane(1, 0.0, "critical")],
        invertible=False,
        orbit_fn=orbit_fn,
        dither_scale=DITHER_SCALE,
    )


# ---------------------------------------------------------------------------
# Parameterized families
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FamilyHandle:
    """A one-parameter arc of systems with a declared parameter interval."""

    family_id: str
    parameter_name: str
    lo: float
    hi: float
    builder: Callable[[float], DynamicalSystem]

    def build(self, t: float) -> DynamicalSystem:
        if not self.lo <= t <= self.hi:
            raise ValueError(
                f"{self.family_id}: parameter {t} outside [{self.lo}, {self.hi}]"
            )
        return self.builder(t)


FAMILIES = {
    "mp": FamilyHandle("mp", "alpha", 0.0, 1.0 - 1e-9, make_manneville_pomeau),
    "da": FamilyHandle("da", "deformation", 0.0, 1.0 - 1e-9, make_derived_from_anosov),
    "viana": FamilyHandle("viana", "eps", 0.0, 0.05,
                          lambda e: make_viana(VIANA_A0, e, 16)),
    "skew": FamilyHandle("skew", "K", 0.0, 2.0,
                         lambda k: make_standard_skew(k, 2)),
}


def get_family(family_id: str) -> FamilyHandle:
    try:
        return FAMILIES[family_id]
    except KeyError:
        raise KeyError(
            f"unknown family {family_id!r}; available: {sorted(FAMILIES)}"
        ) from None


# ---------------------------------------------------------------------------
# Named single systems (CLI surface)
# ---------------------------------------------------------------------------


def build_system(name: str, params: Optional[dict] = None) -> DynamicalSystem:
    """Construct a system from a name and a parameter mapping."""
    p = dict(params or {})
    if name == "cat":
        return make_cat_map()
    if name == "cat4":
        return make_cat_block(2)
    if name == "mp":
        return make_manneville_pomeau(float(p.get("alpha", 0.0)))
    if name == "da":
        return make_derived_from_anosov(float(p.get("deformation", 0.2)))
    if name == "skew":
        return make_standard_skew(float(p.get("K", 0.5)), int(p.get("N", 2)))
    if name == "viana":
        return make_viana(float(p.get("a0", VIANA_A0)),
                          float(p.get("eps", 0.02)), int(p.get("d", 16)))
    raise ValueError(
        f"unknown system {name!r}; available: cat, cat4, mp, da, skew, viana"
    )


def finite_difference_jacobian(system: DynamicalSystem, x, h: float = 1e-5) -> np.ndarray:
    """Central-difference Jacobian with wrap-aware displacements.

    Independent check of the analytic differential; only meaningful at
    points whose h-neighborhood avoids the singular set and branch lines.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    d = system.space.dim
    jac = np.empty((d, d))
    for j in range(d):
        e = np.zeros(d)
        e[j] = h
        fp = system.eval_batch((x + e)[None, :])
        fm = system.eval_batch((x - e)[None, :])
        jac[:, j] = system.space.displacement(fm, fp)[0] / (2.0 * h)
    return jac
