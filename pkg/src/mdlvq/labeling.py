"""Shift-invariant index assignment from central lattice points to K-tuples.

Tuples of sublattice points are generated inside spheres around each anchor
point of one product-lattice cell, kept if all pairwise distances stay
within the sphere radius, deduplicated modulo the product lattice, and
assigned to the central points of the cell by a minimum-cost linear
assignment on the distance between a central point and the tuple centroid.
The finished table extends to the whole lattice by translation.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from .errors import InfeasibleLabelingError, MdlvqError
from .expansion import sphere_radius_for_volume
from .lattices import (
    LatticeBasis,
    PointSet,
    SublatticeSpec,
    TIE_RTOL,
    minimal_vectors,
    norm_sq,
    points_in_cell,
    quantize_coords,
)

RADIUS_GROWTH = 1.05  # growth factor when a sphere yields too few tuples


@dataclass(frozen=True)
class KTuple:
    """An ordered K-tuple of sublattice points forming one label."""

    elements: np.ndarray            # K x L, real coordinates
    coords: np.ndarray              # K x L, integer coordinates in the parent basis

    def __post_init__(self):
        e = np.asarray(self.elements, dtype=float)
        c = np.asarray(self.coords, dtype=np.int64)
        e.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "elements", e)
        object.__setattr__(self, "coords", c)

    @cached_property
    def centroid(self) -> np.ndarray:
        return self.elements.mean(axis=0)

    @cached_property
    def spsd(self) -> float:
        """Sum of pairwise squared distances, per-dimension normalized."""
        K = len(self.elements)
        total = 0.0
        for i in range(K):
            for j in range(i + 1, K):
                total += float(norm_sq(self.elements[i] - self.elements[j]))
        return total

    @property
    def key(self) -> tuple:
        return tuple(map(int, self.coords.ravel()))

    def shifted(self, offset_real: np.ndarray, offset_coords: np.ndarray) -> "KTuple":
        return KTuple(self.elements + offset_real, self.coords + offset_coords)


def candidate_tuples(spec: SublatticeSpec, K: int, lambda0: np.ndarray, radius: float) -> list[KTuple]:
    """All K-tuples anchored at lambda0 with every pairwise distance within `radius`.

    Elements are drawn from the sublattice; the anchor must lie in the
    product cell around the origin so returned tuples are canonical coset
    representatives.  Sorted by ascending pairwise spread, ties broken
    lexicographically on integer coordinates.
    """
    if K < 1:
        raise MdlvqError("K must be at least 1")
    if radius <= 0:
        raise MdlvqError("radius must be positive")
    lambda0 = np.asarray(lambda0, dtype=float)
    sub = spec.sublattice
    anchor_coords = sub.to_coords(lambda0[None, :])[0]
    prod_owner = quantize_coords(spec.product_lattice, lambda0[None, :])[0]
    if np.any(prod_owner != 0):
        raise MdlvqError("anchor must lie in the product cell around the origin")
    anchor_parent = anchor_coords @ spec.sub_coords_in_parent
    if K == 1:
        return [KTuple(lambda0[None, :], anchor_parent[None, :])]

    from .lattices import points_in_ball

    ball = points_in_ball(sub, lambda0, radius)
    pts = ball @ sub.generators
    parent_coords = ball @ spec.sub_coords_in_parent
    r2 = radius * radius * (1.0 + 4.0 * TIE_RTOL)
    found: list[KTuple] = []

    def extend(chosen: list[int], mask: np.ndarray):
        if len(chosen) == K - 2:
            for idx in np.nonzero(mask)[0]:
                sel = chosen + [int(idx)]
                elems = np.vstack([lambda0[None, :], pts[sel]])
                cc = np.vstack([anchor_parent[None, :], parent_coords[sel]])
                found.append(KTuple(elems, cc))
            return
        for idx in np.nonzero(mask)[0]:
            d2 = ((pts - pts[idx]) ** 2).sum(axis=1)
            extend(chosen + [int(idx)], mask & (d2 <= r2))

    extend([], np.ones(len(pts), dtype=bool))
    found.sort(key=lambda t: (int(round(t.spsd / TIE_RTOL)), t.key))
    return found


@dataclass(frozen=True)
class LabelingFunction:
    """Bijection between the central points of one product cell and K-tuples."""

    spec: SublatticeSpec
    K: int
    psi_used: float
    central_points: np.ndarray       # M x L real, M = N^2
    central_coords: np.ndarray       # M x L int (parent basis)
    label_points: np.ndarray         # M x K x L real
    label_coords: np.ndarray         # M x K x L int (parent basis)
    assignment_cost: float

    def __post_init__(self):
        for name in ("central_points", "central_coords", "label_points", "label_coords"):
            a = getattr(self, name)
            a.setflags(write=False)

    @property
    def table_size(self) -> int:
        return len(self.central_points)

    @cached_property
    def _row_by_central(self) -> dict:
        return {tuple(map(int, c)): i for i, c in enumerate(self.central_coords)}

    @cached_property
    def _packed_keys(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, int]:
        """Sorted packed central coords for vectorized residue lookup."""
        c = self.central_coords
        lo = c.min(axis=0)
        span = c.max(axis=0) - lo + 1
        packed = np.zeros(len(c), dtype=np.int64)
        for d in range(c.shape[1]):
            packed = packed * int(span[d]) + (c[:, d] - lo[d])
        order = np.argsort(packed, kind="stable")
        return packed[order], order, lo, span

    def residue_rows(self, coords: np.ndarray) -> np.ndarray:
        """Table rows for residue integer coordinates (vectorized)."""
        keys, order, lo, span = self._packed_keys
        packed = np.zeros(len(coords), dtype=np.int64)
        for d in range(coords.shape[1]):
            off = coords[:, d] - lo[d]
            if np.any(off < 0) or np.any(off >= span[d]):
                raise MdlvqError("residue outside the labeled cell")
            packed = packed * int(span[d]) + off
        pos = np.searchsorted(keys, packed)
        if np.any(pos >= len(keys)) or np.any(keys[np.minimum(pos, len(keys) - 1)] != packed):
            raise MdlvqError("residue outside the labeled cell")
        return order[pos]

    @cached_property
    def _inverse_by_canonical(self) -> dict:
        """Canonical tuple key -> (row, product-lattice coords of the stored anchor)."""
        prod = self.spec.product_lattice
        inv = {}
        for row in range(self.table_size):
            t = self.label_points[row]
            qc = quantize_coords(prod, t[:1])[0]
            shift_parent = self._prod_coords_to_parent(qc)
            key = tuple(map(int, (self.label_coords[row] - shift_parent).ravel()))
            if key in inv:
                raise MdlvqError("labeling table is not injective modulo the product lattice")
            inv[key] = (row, qc)
        return inv

    def _prod_coords_to_parent(self, qc: np.ndarray) -> np.ndarray:
        m = self.spec.sub_coords_in_parent
        return qc @ m @ m

    def tuple_for_row(self, row: int) -> KTuple:
        return KTuple(self.label_points[row], self.label_coords[row])

    def to_json_dict(self) -> dict:
        return {
            "spec": self.spec.to_json_dict(),
            "K": self.K,
            "psi_used": float(self.psi_used),
            "assignment_cost": float(self.assignment_cost),
            "entries": [
                {
                    "central_point": [float(x) for x in self.central_points[i]],
                    "tuple": [[float(x) for x in pt] for pt in self.label_points[i]],
                }
                for i in range(self.table_size)
            ],
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "LabelingFunction":
        spec = SublatticeSpec.from_json_dict(doc["spec"])
        parent = spec.parent
        K = int(doc["K"])
        centrals = np.array([e["central_point"] for e in doc["entries"]], dtype=float)
        labels = np.array([e["tuple"] for e in doc["entries"]], dtype=float)
        ccoords = parent.to_coords(centrals)
        lcoords = parent.to_coords(labels.reshape(-1, parent.dimension)).reshape(labels.shape)
        cost = float(
            doc.get(
                "assignment_cost",
                norm_sq(centrals - labels.mean(axis=1)).sum(),
            )
        )
        return cls(spec, K, float(doc["psi_used"]), centrals, ccoords, labels, lcoords, cost)


def _pool_translates(prod: LatticeBasis) -> tuple[np.ndarray, np.ndarray]:
    """Origin plus the kissing-number neighbors of the product cell (real, coords)."""
    mv = minimal_vectors(prod)
    order = np.lexsort(np.round(mv / TIE_RTOL).T[::-1])
    reals = np.vstack([np.zeros((1, prod.dimension)), mv[order]])
    coords = np.rint(reals @ prod.inverse).astype(np.int64)
    return reals, coords


def build_labeling(spec: SublatticeSpec, K: int, psi: float) -> LabelingFunction:
    """Construct the optimal shift-invariant labeling for the given spec and K.

    For each anchor in the product cell the N lowest-spread tuples within
    radius psi * r_lower are pooled together with their coset translates by
    the kissing vectors of the product lattice; the pooled tuples are then
    matched to the N^2 central points by a linear assignment minimizing the
    summed squared central-point-to-centroid distance.  If the pool is too
    small the radius grows by 5% per retry, up to twice the lower bound.
    """
    if K < 1:
        raise MdlvqError("K must be at least 1")
    if psi < 1.0:
        raise MdlvqError("psi must be at least 1")
    N = spec.index
    L = spec.parent.dimension
    cell = points_in_cell(spec, "central-in-product")
    centrals = cell.points
    ccoords = cell.coords

    if K == 1:
        sub = spec.sublattice
        sc = quantize_coords(sub, centrals)
        labels = (sc @ sub.generators)[:, None, :]
        lcoords = (sc @ spec.sub_coords_in_parent)[:, None, :]
        cost = float(norm_sq(centrals - labels[:, 0, :]).sum())
        return LabelingFunction(spec, 1, psi, centrals, ccoords, labels, lcoords, cost)

    anchors = points_in_cell(spec, "sub-in-product").points
    nu_s = spec.sub_volume
    r_lower = sphere_radius_for_volume(L, nu_s * N ** (1.0 / (K - 1)))
    radius = psi * r_lower
    r_max = 2.0 * r_lower * (1.0 + 4.0 * TIE_RTOL)

    while True:
        per_anchor = [candidate_tuples(spec, K, a, radius) for a in anchors]
        deficit = sum(max(0, N - len(c)) for c in per_anchor)
        if deficit == 0:
            break
        if radius >= r_max:
            raise InfeasibleLabelingError(
                f"cannot build {N} tuples per anchor within twice the lower-bound "
                f"radius ({r_lower:.6g}); short by {deficit} tuples"
            )
        radius = min(radius * RADIUS_GROWTH, r_max)

    pool = [t for cands in per_anchor for t in cands[:N]]
    centroids = np.array([t.centroid for t in pool])
    trans_real, trans_coords = _pool_translates(spec.product_lattice)

    cost = None
    pick = None
    for ti in range(len(trans_real)):
        cur = cdist(centrals, centroids + trans_real[ti], "sqeuclidean")
        if cost is None:
            cost = cur
            pick = np.zeros(cur.shape, dtype=np.int8)
        else:
            better = cur < cost
            cost[better] = cur[better]
            pick[better] = ti
    rows, cols = linear_sum_assignment(cost)

    order = np.empty(len(centrals), dtype=int)
    order[rows] = cols
    tuples_real = np.empty((len(centrals), K, L))
    tuples_coords = np.empty((len(centrals), K, L), dtype=np.int64)
    for i in range(len(centrals)):
        j = int(order[i])
        ti = int(pick[i, j])
        shifted = pool[j].shifted(
            trans_real[ti], trans_coords[ti] @ spec.sub_coords_in_parent @ spec.sub_coords_in_parent
        )
        tuples_real[i] = shifted.elements
        tuples_coords[i] = shifted.coords
    _balance_descriptions(spec, centrals, tuples_real, tuples_coords)
    total = float(norm_sq(centrals - tuples_real.mean(axis=1)).sum())
    lf = LabelingFunction(spec, K, psi, centrals, ccoords, tuples_real, tuples_coords, total)
    lf._inverse_by_canonical  # verifies injectivity modulo the product lattice
    return lf


def _balance_descriptions(
    spec: SublatticeSpec,
    centrals: np.ndarray,
    tuples_real: np.ndarray,
    tuples_coords: np.ndarray,
) -> None:
    """Equalize per-description distortion by reordering tuple elements in place.

    The assignment fixes each central point's tuple only as a multiset:
    permuting elements changes neither centroid, spread, nor cost, but it
    redistributes the label distances over the K description slots.  A
    greedy pass keeps the running per-slot sums level while preserving
    distinctness of the ordered tuples modulo the product lattice.
    """
    M, K, L = tuples_real.shape
    if K == 1:
        return
    prod = spec.product_lattice
    m2 = spec.sub_coords_in_parent @ spec.sub_coords_in_parent

    def canonical_key(coords: np.ndarray, reals: np.ndarray) -> tuple:
        qc = quantize_coords(prod, reals[:1])[0]
        return tuple(map(int, (coords - qc @ m2).ravel()))

    running = np.zeros(K)
    used: set[tuple] = set()
    perms = list(itertools.permutations(range(K)))
    for i in range(M):
        d = norm_sq(centrals[i][None, :] - tuples_real[i])  # K label distances
        options = []
        for perm in perms:
            trial = running + d[list(perm)]
            spread = float(trial.max() - trial.min())
            options.append((spread, perm))
        options.sort(key=lambda t: (t[0], t[1]))
        for _, perm in options:
            sel = list(perm)
            key = canonical_key(tuples_coords[i][sel], tuples_real[i][sel])
            if key not in used:
                used.add(key)
                tuples_real[i] = tuples_real[i][sel]
                tuples_coords[i] = tuples_coords[i][sel]
                running += d[sel]
                break
        else:  # all arrangements taken; cannot happen with distinct source tuples
            raise MdlvqError("description balancing exhausted all permutations")


def alpha(lf: LabelingFunction, lambda_c: np.ndarray) -> KTuple:
    """The K-tuple labeling an arbitrary central lattice point."""
    lambda_c = np.asarray(lambda_c, dtype=float)
    ccoord = lf.spec.parent.to_coords(lambda_c[None, :])[0]
    prod = lf.spec.product_lattice
    qc = quantize_coords(prod, lambda_c[None, :])[0]
    shift_real = qc @ prod.generators
    shift_parent = lf._prod_coords_to_parent(qc)
    rho = ccoord - shift_parent
    row = int(lf.residue_rows(rho[None, :])[0])
    return lf.tuple_for_row(row).shifted(shift_real, shift_parent)


def alpha_component_inverse(lf: LabelingFunction, i: int, lambda_i: np.ndarray) -> PointSet:
    """Central points of the labeled cell whose i-th description equals lambda_i."""
    if not 0 <= i < lf.K:
        raise MdlvqError("description index out of range")
    target = lf.spec.parent.to_coords(np.asarray(lambda_i, dtype=float)[None, :])[0]
    hit = np.all(lf.label_coords[:, i, :] == target, axis=1)
    return PointSet(
        lf.central_points[hit],
        f"alpha_{i} inverse within one product cell",
        lf.central_coords[hit],
    )


def invert_full_tuple(lf: LabelingFunction, received: np.ndarray) -> np.ndarray:
    """The central point whose label equals the received K points (exact inverse)."""
    received = np.asarray(received, dtype=float)
    if received.shape != (lf.K, lf.spec.parent.dimension):
        raise MdlvqError("need all K description points")
    prod = lf.spec.product_lattice
    qc = quantize_coords(prod, received[:1])[0]
    shift_parent = lf._prod_coords_to_parent(qc)
    rcoords = lf.spec.parent.to_coords(received.reshape(-1, received.shape[-1]))
    key = tuple(map(int, (rcoords - shift_parent[None, :]).ravel()))
    entry = lf._inverse_by_canonical.get(key)
    if entry is None:
        raise MdlvqError("received points do not form a valid label")
    row, stored_qc = entry
    shift = (qc - stored_qc) @ prod.generators
    return lf.central_points[row] + shift


def tuple_cost_decomposition(lambda_c: np.ndarray, t: KTuple, kappa: int) -> tuple[float, float]:
    """Subset-average cost identity: enumerated left side and closed-form right side.

    lhs sums ||lambda_c - mean of kappa received points||^2 over all
    (K choose kappa) subsets; rhs is the identity through the centroid
    distance and the pairwise spread.  Both use the normalized norm.
    """
    K = len(t.elements)
    if not 1 <= kappa <= K:
        raise MdlvqError("kappa out of range")
    lambda_c = np.asarray(lambda_c, dtype=float)
    lhs = 0.0
    for subset in itertools.combinations(range(K), kappa):
        lhs += float(norm_sq(lambda_c - t.elements[list(subset)].mean(axis=0)))
    head = float(norm_sq(lambda_c - t.centroid))
    if K == 1:
        spread = 0.0
    else:
        spread = (K - kappa) / (K * K * kappa * (K - 1)) * t.spsd
    rhs = math.comb(K, kappa) * (head + spread)
    return lhs, rhs


def centroid_cost_sum(lf: LabelingFunction) -> float:
    """Sum over the table of ||central - tuple centroid||^2 (normalized norm)."""
    return float(norm_sq(lf.central_points - lf.label_points.mean(axis=1)).sum())


def pairwise_label_sum(lf: LabelingFunction, i: int, j: int) -> float:
    """Sum over the table of ||alpha_i - alpha_j||^2 (normalized norm)."""
    return float(norm_sq(lf.label_points[:, i, :] - lf.label_points[:, j, :]).sum())


def spsd_sum(lf: LabelingFunction) -> float:
    """Sum over the table of the tuples' pairwise squared-distance totals."""
    total = 0.0
    for i in range(lf.K):
        for j in range(i + 1, lf.K):
            total += pairwise_label_sum(lf, i, j)
    return total
