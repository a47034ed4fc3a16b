"""The dimensionless expansion factor for K-tuple construction spheres.

To build K-tuples of sublattice points with bounded pairwise spread, a
sphere around the anchor point must be expanded beyond its volume lower
bound by a factor psi in [1, 2).  For K=3 and odd dimension L there is a
closed form driven by an alternating triple sum evaluated here in exact
rational arithmetic; for other K the factor is estimated by exhaustively
counting tuples of lattice points inside nested sphere intersections.
"""

from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy import fft as _fft

from .errors import MdlvqError
from .lattices import LatticeBasis, make_lattice

# Pairwise bound between non-anchor tuple members, as a multiple of the
# squared sphere radius.  Equals 1 for K=3; the K=4 value reproduces the
# published reference counts for Z^2 at r in {10, 20, 50, 70}.
def _free_pair_bound_sq(K: int, r: float) -> float:
    return (K + 1) / 4.0 * r * r


def unit_sphere_volume(L: int) -> float:
    """Volume of the L-dimensional unit sphere."""
    if L < 0:
        raise MdlvqError("dimension must be nonnegative")
    return math.pi ** (L / 2.0) / math.gamma(L / 2.0 + 1.0)


def sphere_second_moment(L: int) -> float:
    """Dimensionless normalized second moment of an L-dimensional sphere."""
    if L < 1:
        raise MdlvqError("dimension must be positive")
    return unit_sphere_volume(L) ** (-2.0 / L) / (L + 2.0)


def simplex_volume(L: int, side: float) -> float:
    """Volume of the regular L-simplex with the given side length."""
    if L < 1 or side <= 0:
        raise MdlvqError("need L >= 1 and side > 0")
    return side ** L / math.factorial(L) * math.sqrt((L + 1) / 2.0 ** L)


def _pochhammer(a: Fraction, k: int) -> Fraction:
    out = Fraction(1)
    for i in range(k):
        out *= a + i
    return out


@lru_cache(maxsize=None)
def beta_coefficient(L: int) -> Fraction:
    """Exact rational value of the alternating triple sum driving the closed form.

    The outer sum alternates with binomial weights up to 2^((L+1)/2), so the
    evaluation is done entirely in rational arithmetic; floats would suffer
    catastrophic cancellation beyond L of roughly 30.
    """
    if L % 2 != 1 or L < 1 or L > 201:
        raise MdlvqError("closed form requires odd L between 1 and 201")
    half = (L + 1) // 2
    total = Fraction(0)
    for n in range(half + 1):
        outer = Fraction(math.comb(half, n)) * Fraction(2) ** (half - n) * (-1) ** n
        ksum = Fraction(0)
        for k in range((L - 1) // 2 + 1):
            coeff = (
                _pochhammer(Fraction(L + 1, 2), k)
                * _pochhammer(Fraction(1 - L, 2), k)
                / (_pochhammer(Fraction(L + 3, 2), k) * math.factorial(k))
            )
            jsum = Fraction(0)
            for j in range(k + 1):
                jsum += (
                    Fraction(math.comb(k, j))
                    * Fraction(1, 2) ** (k - j)
                    * (-1) ** j
                    * Fraction(1, 4) ** j
                    * Fraction(1, L + n + j)
                )
            ksum += coeff * jsum
        total += outer * ksum
    return total


def psi_closed_form(L: int) -> float:
    """Expansion factor for K=3 and odd L, accurate to at least 7 significant digits."""
    beta = beta_coefficient(L)
    if beta <= 0:
        raise MdlvqError(f"nonpositive coefficient at L={L}")
    log_beta = math.log(beta.numerator) - math.log(beta.denominator)
    log_psi = (
        math.log(unit_sphere_volume(L) / unit_sphere_volume(L - 1))
        + math.log((L + 1) / (2.0 * L))
        - log_beta
    ) / (2.0 * L)
    return math.exp(log_psi)


def psi_limit() -> float:
    """Expansion factor for K=3 in the limit of infinite dimension: (4/3)^(1/4)."""
    return (4.0 / 3.0) ** 0.25


def _indicator_box(gen: np.ndarray, half: np.ndarray, center_sq: float) -> np.ndarray:
    """Indicator of |u @ gen|^2 <= center_sq on the integer box [-half, half]^L."""
    axes = [np.arange(-h, h + 1) for h in half]
    grids = np.meshgrid(*axes, indexing="ij")
    u = np.stack([g.ravel() for g in grids], axis=-1).astype(float)
    d2 = ((u @ gen) ** 2).sum(axis=-1)
    shape = tuple(2 * h + 1 for h in half)
    return (d2 <= center_sq * (1.0 + 4e-12)).astype(np.float64).reshape(shape)


class _TupleCounter:
    """Exact counting of lattice tuples inside nested sphere intersections.

    All arrays are indexed by integer lattice coordinates on a box; sphere
    membership reduces to a quadratic form on the coordinates, so the
    innermost count is a linear convolution evaluated by FFT and rounded
    back to the exact integer.
    """

    def __init__(self, gen: np.ndarray, r: float, K: int):
        self.gen = gen
        self.r = r
        self.K = K
        L = gen.shape[0]
        smin = float(np.linalg.svd(gen, compute_uv=False)[-1])
        self.half = np.full(L, int(math.ceil(r / smin)) + 1)
        self.ball = _indicator_box(gen, self.half, r * r)
        pair_sq = _free_pair_bound_sq(K, r)
        pair_half = np.full(L, int(math.ceil(math.sqrt(pair_sq) / smin)) + 1)
        self.kernel = _indicator_box(gen, pair_half, pair_sq)
        self.pair_sq = pair_sq
        self.fshape = tuple(
            _fft.next_fast_len(b + k) for b, k in zip(self.ball.shape, self.kernel.shape)
        )
        self.kernel_f = _fft.rfftn(self.kernel, self.fshape)
        axes = [np.arange(-h, h + 1) for h in self.half]
        grids = np.meshgrid(*axes, indexing="ij")
        self.coords = np.stack([g.ravel() for g in grids], axis=-1).astype(float)
        self.box_shape = self.ball.shape

    def _pair_masks(self, shifts: np.ndarray) -> np.ndarray:
        """Stack of indicators |(u - s) @ gen|^2 <= pair bound, u over the box."""
        pts = self.coords @ self.gen
        centers = shifts @ self.gen
        d2 = ((pts[None, :, :] - centers[:, None, :]) ** 2).sum(axis=-1)
        masks = (d2 <= self.pair_sq * (1.0 + 4e-12)).astype(np.float64)
        return masks.reshape((len(shifts),) + self.box_shape)

    def _last_level_sum(self, masks: np.ndarray) -> float:
        """sum over points p of mask[p] * |{q in mask : pairwise bound}| via FFT."""
        fw = _fft.rfftn(masks, self.fshape, axes=tuple(range(1, masks.ndim)))
        conv = _fft.irfftn(fw * self.kernel_f[None], self.fshape, axes=tuple(range(1, masks.ndim)))
        sl = (slice(None),) + tuple(
            slice(k // 2, k // 2 + b) for k, b in zip(self.kernel.shape, self.box_shape)
        )
        inner = np.round(conv[sl])
        return float((masks * inner).sum())

    def count(self) -> float:
        K = self.K
        if K == 3:
            return self._last_level_sum(self.ball[None])
        support = self.coords[self.ball.ravel() > 0.5].astype(np.int64)
        total = 0.0
        batch = max(1, int(2**22 / max(1, self.ball.size)))
        if K == 4:
            for s in range(0, len(support), batch):
                masks = self.ball[None] * self._pair_masks(support[s : s + batch])
                total += self._last_level_sum(masks)
            return total
        if K == 5:
            for i1 in range(len(support)):
                m1 = self.ball * self._pair_masks(support[i1 : i1 + 1])[0]
                sup2 = self.coords[m1.ravel() > 0.5].astype(np.int64)
                for s in range(0, len(sup2), batch):
                    masks = m1[None] * self._pair_masks(sup2[s : s + batch])
                    total += self._last_level_sum(masks)
            return total
        raise MdlvqError("tuple counting is implemented for K up to 5")


def psi_numeric(K: int, lattice: LatticeBasis, r: float) -> float:
    """Expansion factor estimated by exact tuple counting on the given lattice.

    The lattice is rescaled to unit cell volume.  Anchored at the origin,
    level i draws points within radius r of the origin and within the
    pairwise bound of every previously drawn point; the tuple count T then
    yields psi = (omega_L r^L / T^(1/(K-1)))^(1/L).  Deterministic.
    """
    if K < 3:
        raise MdlvqError("numeric estimation applies to K >= 3 (K=2 has psi = 1)")
    if r <= 0:
        raise MdlvqError("radius must be positive")
    L = lattice.dimension
    gen = lattice.generators / lattice.cell_volume ** (1.0 / L)
    counter = _TupleCounter(gen, float(r), K)
    if counter.ball.sum() < 2:
        raise MdlvqError(f"sphere of radius {r} holds no nontrivial tuples; increase r")
    T = counter.count()
    return (unit_sphere_volume(L) * r ** L / T ** (1.0 / (K - 1))) ** (1.0 / L)


_DESIGN_RADII = {1: {3: 400.0, 4: 300.0, 5: 120.0}, 2: {3: 60.0, 4: 40.0, 5: 18.0}}


@lru_cache(maxsize=None)
def _psi_numeric_cached(K: int, L: int, r: float) -> float:
    return psi_numeric(K, make_lattice(f"Z{L}"), r)


def psi_for_design(K: int, L: int) -> float:
    """Expansion factor used by the design formulas.

    K=1 and K=2 need no expansion; K=3 with odd L uses the closed form;
    everything else falls back to the numeric estimator on the cubic
    lattice at a per-(K, L) default radius.
    """
    if K in (1, 2):
        return 1.0
    if K == 3 and L % 2 == 1:
        return psi_closed_form(L)
    try:
        r = _DESIGN_RADII[L][K]
    except KeyError:
        raise MdlvqError(f"no default counting radius for K={K}, L={L}") from None
    return _psi_numeric_cached(K, L, r)


def sphere_radius_for_volume(L: int, volume: float) -> float:
    """Radius of the L-sphere with the given volume."""
    return (volume / unit_sphere_volume(L)) ** (1.0 / L)
