"""Lattices as vector quantizers.

A lattice is the set of integer combinations of the rows of a generator
matrix.  This module provides nearest-point quantization, Monte-Carlo
estimation of the normalized second moment of the Voronoi cell, and the
construction of geometrically similar *clean* sublattices (no lattice point
of the parent sits on a Voronoi boundary of the sublattice) together with
the product lattice used as the unit of shift invariance.

Norm convention: all distortion-like quantities use the per-dimension
normalized squared norm  ||x||^2 = (1/L) sum_i x_i^2.  Nearest-point
searches use plain Euclidean distance, which has the same minimizers.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np

from .errors import AdmissibilityError, MdlvqError

# Relative tolerance for structural ties; similarity transforms are built
# from integer pairs, so genuine ties are exact and this only absorbs
# floating-point noise.
TIE_RTOL = 1e-9


def norm_sq(v: np.ndarray) -> np.ndarray:
    """Per-dimension normalized squared norm along the last axis."""
    v = np.asarray(v, dtype=float)
    return (v * v).mean(axis=-1)


@dataclass(frozen=True)
class LatticeBasis:
    """An L-dimensional lattice given by an L x L generator matrix (rows are basis vectors)."""

    name: str
    generators: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.generators, dtype=float)
        if g.ndim != 2 or g.shape[0] != g.shape[1]:
            raise MdlvqError(f"generator matrix must be square, got {g.shape}")
        if abs(np.linalg.det(g)) < 1e-300:
            raise MdlvqError("generator matrix is singular")
        g.setflags(write=False)
        object.__setattr__(self, "generators", g)

    @property
    def dimension(self) -> int:
        return self.generators.shape[0]

    @cached_property
    def cell_volume(self) -> float:
        return abs(float(np.linalg.det(self.generators)))

    @cached_property
    def inverse(self) -> np.ndarray:
        return np.linalg.inv(self.generators)

    @cached_property
    def min_singular_value(self) -> float:
        return float(np.linalg.svd(self.generators, compute_uv=False)[-1])

    @cached_property
    def covering_radius_bound(self) -> float:
        """Upper bound on the covering radius.

        Half the diagonal of the Gram-Schmidt box: every point sits within
        the box spanned by the orthogonalized basis around some lattice
        point.  Exact for cubic lattices and scale-aware for all.
        """
        r = np.linalg.qr(self.generators.T, mode="r")
        return 0.5 * float(np.sqrt((np.diag(r) ** 2).sum()))

    @cached_property
    def _search_offsets(self) -> np.ndarray:
        """Integer offsets guaranteeing the nearest point is among the candidates."""
        h = int(math.floor(self.covering_radius_bound / self.min_singular_value + 0.5))
        h = max(h, 1)
        rng = np.arange(-h, h + 1)
        grids = np.meshgrid(*([rng] * self.dimension), indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=-1)

    def scaled(self, factor: float) -> "LatticeBasis":
        return LatticeBasis(self.name, self.generators * factor)

    def to_real(self, coords: np.ndarray) -> np.ndarray:
        """Map integer coordinates to points in R^L."""
        return np.asarray(coords, dtype=float) @ self.generators

    def to_coords(self, points: np.ndarray) -> np.ndarray:
        """Round real points (assumed on the lattice) to integer coordinates."""
        u = np.asarray(points, dtype=float) @ self.inverse
        r = np.rint(u)
        if np.max(np.abs(u - r), initial=0.0) > 1e-6:
            raise MdlvqError("point is not on the lattice")
        return r.astype(np.int64)

    def to_json_dict(self) -> dict:
        return {
            "name": self.name,
            "L": self.dimension,
            "generators": [float(x) for x in self.generators.ravel()],
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "LatticeBasis":
        L = int(doc["L"])
        g = np.asarray(doc["generators"], dtype=float).reshape(L, L)
        return cls(doc["name"], g)


def make_lattice(name: str) -> LatticeBasis:
    """Built-in lattices: Z1, Z2, ... (cubic) and A2 (hexagonal, unit spacing)."""
    m = re.fullmatch(r"Z(\d+)", name)
    if m:
        L = int(m.group(1))
        if L < 1:
            raise MdlvqError("dimension must be positive")
        return LatticeBasis(name, np.eye(L))
    if name == "A2":
        return LatticeBasis("A2", np.array([[1.0, 0.0], [0.5, math.sqrt(3.0) / 2.0]]))
    raise MdlvqError(f"unknown lattice name {name!r} (expected Z<k> or A2)")


def nearest_point(basis: LatticeBasis, x: np.ndarray) -> np.ndarray:
    """Closest lattice point to x (single vector)."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise MdlvqError("nearest_point requires finite input")
    return basis.to_real(quantize_coords(basis, x[None, :])[0])


def quantize_coords(basis: LatticeBasis, X: np.ndarray) -> np.ndarray:
    """Integer coordinates of the nearest lattice point for each row of X.

    Cubic lattices round coordinate-wise with .5 rounded down, which agrees
    with the lexicographic boundary rule; other bases search an offset box
    around the rounded basis coordinates.
    """
    X = np.asarray(X, dtype=float)
    if re.fullmatch(r"Z\d+", basis.name) and np.array_equal(basis.generators, np.eye(basis.dimension)):
        return np.ceil(X - 0.5).astype(np.int64)
    u = X @ basis.inverse
    base = np.rint(u).astype(np.int64)
    cand = base[:, None, :] + basis._search_offsets[None, :, :]
    pts = cand @ basis.generators
    d2 = ((pts - X[:, None, :]) ** 2).sum(axis=-1)
    best = np.argmin(d2, axis=1)
    return cand[np.arange(len(X)), best]


def _quantize_tie_break(basis: LatticeBasis, x: np.ndarray) -> tuple[np.ndarray, bool]:
    """Nearest lattice point with the canonical boundary rule.

    Returns (integer coords of owner, tie_flag).  Among coarse points tying
    within TIE_RTOL, the one with lexicographically smallest real
    coordinates owns the point.
    """
    x = np.asarray(x, dtype=float)
    u = x @ basis.inverse
    base = np.rint(u).astype(np.int64)
    cand = base[None, :] + basis._search_offsets
    pts = cand @ basis.generators
    d2 = ((pts - x[None, :]) ** 2).sum(axis=-1)
    d0 = d2.min()
    scale = max(d0, float(np.dot(x, x)), basis.min_singular_value ** 2)
    tied = d2 <= d0 + TIE_RTOL * scale
    if tied.sum() == 1:
        return cand[int(np.argmin(d2))], False
    tied_pts = pts[tied]
    tied_cand = cand[tied]
    grid = TIE_RTOL * max(1.0, float(np.abs(tied_pts).max()))
    keys = np.round(tied_pts / grid).astype(np.int64)
    order = np.lexsort(keys.T[::-1])
    return tied_cand[order[0]], True


def points_in_ball(basis: LatticeBasis, center: np.ndarray, radius: float) -> np.ndarray:
    """Integer coordinates of all lattice points within Euclidean `radius` of `center`.

    Boundary points (ties within TIE_RTOL) are included.
    """
    center = np.asarray(center, dtype=float)
    h = int(math.ceil(radius / basis.min_singular_value)) + 1
    uc = np.rint(center @ basis.inverse).astype(np.int64)
    rng = np.arange(-h, h + 1)
    grids = np.meshgrid(*([rng] * basis.dimension), indexing="ij")
    cand = np.stack([g.ravel() for g in grids], axis=-1) + uc
    pts = cand @ basis.generators
    d2 = ((pts - center) ** 2).sum(axis=-1)
    keep = d2 <= radius * radius * (1.0 + 4.0 * TIE_RTOL)
    return cand[keep]


def second_moment(basis: LatticeBasis, n_samples: int, seed: int) -> float:
    """Monte-Carlo estimate of the dimensionless normalized second moment G."""
    return second_moment_estimate(basis, n_samples, seed)[0]


def second_moment_estimate(basis: LatticeBasis, n_samples: int, seed: int) -> tuple[float, float]:
    """(estimate, standard error) of G from uniform samples over the Voronoi cell.

    Points are drawn uniformly in a cube covering the cell and rejected
    unless they quantize to the origin.
    """
    if n_samples < 10_000:
        raise MdlvqError("second_moment needs at least 1e4 samples")
    L = basis.dimension
    half = basis.covering_radius_bound * (1.0 + 1e-12)
    rng = np.random.default_rng(seed)
    total = 0.0
    total_sq = 0.0
    accepted = 0
    remaining = n_samples
    while remaining > 0:
        m = min(remaining, 262_144)
        remaining -= m
        x = rng.uniform(-half, half, size=(m, L))
        inside = np.all(quantize_coords(basis, x) == 0, axis=1)
        v = norm_sq(x[inside])
        total += float(v.sum())
        total_sq += float((v * v).sum())
        accepted += int(inside.sum())
    if accepted < 100:
        raise MdlvqError("degenerate basis: almost no samples land in the cell")
    mean = total / accepted
    var = max(total_sq / accepted - mean * mean, 0.0)
    scale = basis.cell_volume ** (2.0 / L)
    return mean / scale, math.sqrt(var / accepted) / scale


@dataclass(frozen=True)
class SublatticeSpec:
    """A geometrically similar clean sublattice of index N, with its product lattice."""

    parent: LatticeBasis
    index: int
    similarity: np.ndarray          # L x L, right-multiplies row vectors
    ab: tuple[int, int]             # integer pair generating the similarity

    def __post_init__(self):
        s = np.asarray(self.similarity, dtype=float)
        s.setflags(write=False)
        object.__setattr__(self, "similarity", s)

    @cached_property
    def sublattice(self) -> LatticeBasis:
        return LatticeBasis(
            f"{self.parent.name}/N={self.index}",
            self.parent.generators @ self.similarity,
        )

    @cached_property
    def product_lattice(self) -> LatticeBasis:
        return LatticeBasis(
            f"{self.parent.name}/N={self.index}/pi",
            self.parent.generators @ self.similarity @ self.similarity,
        )

    @property
    def sub_volume(self) -> float:
        return self.sublattice.cell_volume

    @cached_property
    def sub_coords_in_parent(self) -> np.ndarray:
        """Integer matrix M with (sub coords) @ M = parent coords."""
        m = self.parent.generators @ self.similarity @ self.parent.inverse
        r = np.rint(m)
        if np.max(np.abs(m - r)) > 1e-6:
            raise MdlvqError("sublattice is not contained in the parent lattice")
        return r.astype(np.int64)

    def to_json_dict(self) -> dict:
        doc = self.parent.to_json_dict()
        doc["N"] = self.index
        doc["similarity"] = [float(x) for x in self.similarity.ravel()]
        return doc

    @classmethod
    def from_json_dict(cls, doc: dict) -> "SublatticeSpec":
        parent = LatticeBasis.from_json_dict(doc)
        L = parent.dimension
        sim = np.asarray(doc["similarity"], dtype=float).reshape(L, L)
        # recover the integer pair from the transform for the record
        ab = _similarity_pair(parent.name, sim)
        return cls(parent, int(doc["N"]), sim, ab)


def _rotation_matrix(x: float, y: float) -> np.ndarray:
    """Right-multiplication matrix of complex multiplication by x + iy."""
    return np.array([[x, y], [-y, x]])


def _similarity_from_pair(name: str, a: int, b: int) -> np.ndarray:
    if name == "Z1":
        return np.array([[float(a)]])
    if name == "Z2":
        return _rotation_matrix(float(a), float(b))
    if name == "A2":
        return _rotation_matrix(a + b / 2.0, b * math.sqrt(3.0) / 2.0)
    raise AdmissibilityError(f"no sublattice construction for lattice {name!r}")


def _similarity_pair(name: str, sim: np.ndarray) -> tuple[int, int]:
    if name == "Z1":
        return int(round(sim[0, 0])), 0
    x, y = sim[0, 0], sim[0, 1]
    if name == "Z2":
        return int(round(x)), int(round(y))
    b = int(round(y / (math.sqrt(3.0) / 2.0)))
    return int(round(x - b / 2.0)), b


def _index_representations(name: str, N: int) -> list[tuple[int, int]]:
    """Nonnegative integer pairs (a, b) with norm N under the lattice's quadratic form."""
    reps = []
    if name == "Z1":
        return [(N, 0)]
    if name == "Z2":
        for a in range(int(math.isqrt(N)) + 1):
            rem = N - a * a
            b = int(math.isqrt(rem))
            if b * b == rem:
                reps.append((a, b))
        return sorted(reps)
    if name == "A2":
        for a in range(int(math.isqrt(N)) + 1):
            disc = 4 * N - 3 * a * a
            if disc < 0:
                break
            s = int(math.isqrt(disc))
            if s * s != disc:
                continue
            if (s - a) % 2 == 0 and (b := (s - a) // 2) >= 0:
                reps.append((a, b))
        return sorted(reps)
    raise AdmissibilityError(f"no sublattice construction for lattice {name!r}")


def _is_clean(spec: SublatticeSpec) -> bool:
    """True when no parent lattice point ties between two sublattice points.

    Tests every parent point within the covering radius of the sublattice
    cell at the origin, which covers one full cell up to translation.
    """
    parent = spec.parent
    sub = spec.sublattice
    rho = sub.covering_radius_bound * (1.0 + 1e-9)
    pts = points_in_ball(parent, np.zeros(parent.dimension), rho) @ parent.generators
    if len(pts) == 0:
        return True
    u = pts @ sub.inverse
    base = np.rint(u).astype(np.int64)
    cand = base[:, None, :] + sub._search_offsets[None, :, :]
    cpts = cand @ sub.generators
    d2 = ((cpts - pts[:, None, :]) ** 2).sum(axis=-1)
    d2.sort(axis=1)
    scale = np.maximum(d2[:, 0], sub.min_singular_value ** 2)
    return bool(np.all(d2[:, 1] - d2[:, 0] > TIE_RTOL * scale))


def _try_build(basis: LatticeBasis, N: int) -> SublatticeSpec | None:
    """The certified spec for index N, or None when N is not admissible."""
    if N < 1:
        return None
    try:
        reps = _index_representations(basis.name, N)
    except AdmissibilityError:
        raise
    for ab in reps:
        cand = SublatticeSpec(basis, N, _similarity_from_pair(basis.name, *ab), ab)
        det = abs(float(np.linalg.det(cand.similarity)))
        if abs(det - N) > 1e-6 * N:
            continue
        cand.sub_coords_in_parent  # raises if not integrally embedded
        if _is_clean(cand):
            return cand
    return None


def build_sublattice(basis: LatticeBasis, N: int) -> SublatticeSpec:
    """Construct the similar clean sublattice of index N, or raise AdmissibilityError.

    When several integer pairs represent N, the lexicographically smallest
    nonnegative pair is used.  The spec is certified before being returned:
    integer embedding, volume ratio N, and cleanliness.
    """
    if N < 1:
        raise AdmissibilityError("index must be a positive integer")
    spec = _try_build(basis, N)
    if spec is None:
        below = next((m for m in range(N - 1, 0, -1) if _try_build(basis, m)), None)
        above = next((m for m in range(N + 1, 4 * N + 16) if _try_build(basis, m)), None)
        raise AdmissibilityError(
            f"N={N} is not an admissible index for {basis.name}; "
            f"nearest admissible values: {below} below, {above} above"
        )
    return spec


@lru_cache(maxsize=None)
def _admissible_cached(name: str, max_index: int) -> tuple[int, ...]:
    basis = make_lattice(name)
    return tuple(N for N in range(1, max_index + 1) if _try_build(basis, N) is not None)


def enumerate_admissible_indices(basis: LatticeBasis, max_index: int) -> list[int]:
    """All N <= max_index admitting a similar clean sublattice, each certified by construction."""
    if basis.name not in ("Z1", "Z2", "A2"):
        raise AdmissibilityError(
            f"admissible-index enumeration supports Z1, Z2, A2; got {basis.name!r}"
        )
    return list(_admissible_cached(basis.name, max_index))


@dataclass(frozen=True)
class PointSet:
    """A finite set of lattice points together with the region that produced them."""

    points: np.ndarray
    region: str
    coords: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        p = np.asarray(self.points, dtype=float)
        p.setflags(write=False)
        object.__setattr__(self, "points", p)

    def __len__(self) -> int:
        return len(self.points)


def points_in_cell(spec: SublatticeSpec, which: str) -> PointSet:
    """Lattice points of one product-lattice Voronoi cell around the origin.

    which='central-in-product' returns the N^2 central lattice points,
    which='sub-in-product' the N sublattice points.  Points on a cell facet
    belong to the lexicographically smallest tied product-lattice point.
    """
    if which == "central-in-product":
        fine = spec.parent
        expected = spec.index ** 2
    elif which == "sub-in-product":
        fine = spec.sublattice
        expected = spec.index
    else:
        raise MdlvqError(f"unknown selection {which!r}")
    prod = spec.product_lattice
    rho = prod.covering_radius_bound * (1.0 + 1e-9)
    coords = points_in_ball(fine, np.zeros(fine.dimension), rho)
    pts = coords @ fine.generators
    own_zero = []
    for i, p in enumerate(pts):
        owner, _ = _quantize_tie_break(prod, p)
        if np.all(owner == 0):
            own_zero.append(i)
    sel = np.array(own_zero, dtype=int)
    got = pts[sel]
    if len(got) != expected:
        raise MdlvqError(
            f"cell enumeration found {len(got)} points, expected {expected}"
        )
    order = np.lexsort(np.round(got / (TIE_RTOL * max(1.0, float(np.abs(got).max(initial=1.0))))).T[::-1])
    return PointSet(got[order], f"Voronoi cell of {prod.name} at 0", coords[sel][order])


def minimal_vectors(basis: LatticeBasis) -> np.ndarray:
    """The nonzero lattice vectors of minimal norm (kissing vectors)."""
    bound = float(np.linalg.norm(basis.generators, axis=1).min())
    cand = points_in_ball(basis, np.zeros(basis.dimension), bound) @ basis.generators
    nz = cand[np.any(np.abs(cand) > 1e-12, axis=1)]
    n2 = (nz * nz).sum(axis=1)
    dmin = n2.min()
    return nz[n2 <= dmin * (1.0 + TIE_RTOL)]
