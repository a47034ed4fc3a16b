import math

import numpy as np
import pytest
from scipy import integrate

from mdlvq.errors import AdmissibilityError, MdlvqError
from mdlvq.jsonio import dumps
from mdlvq.lattices import (
    LatticeBasis,
    SublatticeSpec,
    build_sublattice,
    enumerate_admissible_indices,
    make_lattice,
    minimal_vectors,
    nearest_point,
    norm_sq,
    points_in_ball,
    points_in_cell,
    quantize_coords,
    second_moment_estimate,
)

G_A2_EXACT = 5.0 / (36.0 * math.sqrt(3.0))


def hexagon_second_moment_oracle():
    """Normalized second moment of the hexagonal cell by direct quadrature.

    The Voronoi cell of the unit-spacing hexagonal lattice is a regular
    hexagon with inradius 1/2; integrate r^2 over one of the twelve
    congruent right triangles.
    """
    apothem = 0.5

    def integrand(y, x):
        return x * x + y * y

    # triangle with legs along x in [0, apothem] and y in [0, x * tan(30deg)]
    val, _ = integrate.dblquad(
        integrand, 0.0, apothem, lambda x: 0.0, lambda x: x * math.tan(math.pi / 6.0)
    )
    polar = 12.0 * val
    area = 12.0 * 0.5 * apothem * (apothem * math.tan(math.pi / 6.0))
    # normalized norm carries 1/L = 1/2; G has volume^(1 + 2/L) below
    return (polar / 2.0) / area ** 2


def test_hexagon_oracle_matches_exact_constant():
    assert hexagon_second_moment_oracle() == pytest.approx(G_A2_EXACT, abs=1e-9)


def test_nearest_point_z2_rounds_coordinatewise(z2):
    assert np.array_equal(nearest_point(z2, np.array([0.4, -1.6])), [0.0, -2.0])


def test_nearest_point_identity_on_lattice_points(a2, z2, rng):
    for basis in (a2, z2):
        coords = rng.integers(-20, 20, size=(50, 2))
        pts = coords @ basis.generators
        back = quantize_coords(basis, pts)
        assert np.array_equal(back, coords)


def test_nearest_point_a2_vs_exhaustive(a2, rng):
    xs = rng.uniform(-2.0, 2.0, size=(100, 2))
    xs = np.vstack([xs, [[0.9, 0.1]]])
    for x in xs:
        got = nearest_point(a2, x)
        cand = points_in_ball(a2, x, 2.0) @ a2.generators
        d2 = ((cand - x) ** 2).sum(axis=1)
        assert ((got - x) ** 2).sum() <= d2.min() + 1e-12
    assert np.allclose(nearest_point(a2, np.array([0.9, 0.1])), [1.0, 0.0])


def test_nearest_point_rejects_non_finite(z2):
    with pytest.raises(MdlvqError):
        nearest_point(z2, np.array([np.nan, 0.0]))


def test_quantizer_idempotence_and_closure(a2, rng):
    xs = rng.uniform(-5, 5, size=(200, 2))
    q1 = quantize_coords(a2, xs) @ a2.generators
    q2 = quantize_coords(a2, q1) @ a2.generators
    assert np.allclose(q1, q2)
    la = rng.integers(-10, 10, size=(100, 2)) @ a2.generators
    lb = rng.integers(-10, 10, size=(100, 2)) @ a2.generators
    assert np.allclose(quantize_coords(a2, la + lb) @ a2.generators, la + lb)


def test_scalar_tie_break_is_lexicographic_smallest(z1):
    assert nearest_point(z1, np.array([0.5]))[0] == 0.0
    assert nearest_point(z1, np.array([-0.5]))[0] == -1.0
    assert nearest_point(z1, np.array([1.5]))[0] == 1.0


@pytest.mark.parametrize("L", [1, 2, 4])
def test_second_moment_cubic(L):
    est, se = second_moment_estimate(make_lattice(f"Z{L}"), 200_000, seed=11)
    assert abs(est - 1.0 / 12.0) < 3.0 * se


def test_second_moment_a2(a2):
    est, se = second_moment_estimate(a2, 200_000, seed=12)
    assert abs(est - G_A2_EXACT) < 3.0 * se


def test_second_moment_scale_invariant(a2):
    e1, s1 = second_moment_estimate(a2, 100_000, seed=13)
    e2, s2 = second_moment_estimate(a2.scaled(2.0), 100_000, seed=14)
    assert abs(e1 - e2) < 3.0 * math.hypot(s1, s2)


def test_second_moment_rejects_small_samples(z2):
    with pytest.raises(MdlvqError):
        second_moment_estimate(z2, 5000, seed=0)


def test_admissible_z1_by_brute_force(z1):
    # even indices put the half-way central point on a cell boundary
    assert enumerate_admissible_indices(z1, 10) == [1, 3, 5, 7, 9]
    spec = build_sublattice(z1, 3)
    assert np.allclose(spec.sublattice.generators, [[3.0]])
    assert np.allclose(spec.product_lattice.generators, [[9.0]])


def test_admissible_a2_published_sets(a2):
    found = set(enumerate_admissible_indices(a2, 70))
    assert {31, 37, 43, 49, 61, 67} <= found
    assert set(enumerate_admissible_indices(a2, 14)) >= {1, 7, 13}
    assert 3 not in found and 4 not in found


def test_admissible_unsupported_family():
    custom = LatticeBasis("hex-ish", np.array([[2.0, 0.1], [0.0, 1.0]]))
    with pytest.raises(AdmissibilityError):
        enumerate_admissible_indices(custom, 10)


def test_z2_index_two_not_clean(z2):
    with pytest.raises(AdmissibilityError) as err:
        build_sublattice(z2, 2)
    assert "1 below" in str(err.value) and "5 above" in str(err.value)


def test_build_sublattice_a2_seven(a2):
    spec = build_sublattice(a2, 7)
    assert spec.ab == (1, 2)
    assert spec.sub_volume == pytest.approx(7 * a2.cell_volume, rel=1e-12)
    cell = points_in_cell(spec, "central-in-product")
    assert len(cell) == 49
    assert len(points_in_cell(spec, "sub-in-product")) == 7


@pytest.mark.parametrize(
    "name,max_index",
    [("Z1", 9), ("Z2", 17), ("A2", 19)],
)
def test_counting_invariants_all_admissible(name, max_index):
    basis = make_lattice(name)
    for N in enumerate_admissible_indices(basis, max_index):
        spec = build_sublattice(basis, N)
        assert len(points_in_cell(spec, "central-in-product")) == N * N
        assert len(points_in_cell(spec, "sub-in-product")) == N


def test_sublattice_points_are_parent_points(a2):
    spec = build_sublattice(a2, 13)
    m = spec.sub_coords_in_parent
    assert m.dtype == np.int64
    sub_pts = np.array([[1, 0], [0, 1], [2, -3]]) @ spec.sublattice.generators
    assert np.allclose(quantize_coords(a2, sub_pts) @ a2.generators, sub_pts)


def test_minimal_vectors_counts(a2, z2):
    assert len(minimal_vectors(a2)) == 6
    assert len(minimal_vectors(z2)) == 4
    spec = build_sublattice(a2, 7)
    assert len(minimal_vectors(spec.product_lattice)) == 6


def test_points_in_ball_boundary_inclusive(z2):
    pts = points_in_ball(z2, np.zeros(2), 5.0)
    d2 = ((pts @ z2.generators) ** 2).sum(axis=1)
    assert (d2 == 25).sum() == 12  # (0,5)-type and (3,4)-type points included


def test_spec_json_roundtrip(a2):
    spec = build_sublattice(a2, 7)
    doc = spec.to_json_dict()
    text = dumps(doc)
    assert '"N"' in text and '"similarity"' in text
    import json

    back = SublatticeSpec.from_json_dict(json.loads(text))
    assert back.index == 7
    assert np.allclose(back.similarity, spec.similarity)
    assert back.ab == spec.ab


def test_norm_is_per_dimension(a2):
    assert norm_sq(np.array([3.0, 4.0])) == pytest.approx(12.5)
