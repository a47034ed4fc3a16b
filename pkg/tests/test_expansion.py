import math
from fractions import Fraction

import numpy as np
import pytest
from scipy import integrate

from mdlvq.errors import MdlvqError
from mdlvq.expansion import (
    beta_coefficient,
    psi_closed_form,
    psi_for_design,
    psi_limit,
    psi_numeric,
    simplex_volume,
    sphere_second_moment,
    unit_sphere_volume,
)
from mdlvq.lattices import make_lattice

# reference expansion factors for three descriptions, odd dimensions
PSI_REFERENCE = {
    1: 1.1547005,
    3: 1.1346009,
    5: 1.1240543,
    7: 1.1172933,
    9: 1.1124896,
    11: 1.1088540,
    13: 1.1059819,
    15: 1.1036412,
    17: 1.1016878,
    19: 1.1000271,
    21: 1.0985938,
    51: 1.0883640,
    71: 1.0855988,
    101: 1.0831849,
}
PSI_2_REFERENCE = 1.1480804


def test_unit_sphere_volumes():
    assert unit_sphere_volume(1) == pytest.approx(2.0)
    assert unit_sphere_volume(2) == pytest.approx(math.pi)
    assert unit_sphere_volume(3) == pytest.approx(4.0 * math.pi / 3.0)


def test_sphere_second_moment_line_segment():
    # direct integration over [-1, 1]: int x^2 dx / (2)^(1+2) = 1/12
    val, _ = integrate.quad(lambda x: x * x, -1.0, 1.0)
    assert val / 2.0 ** 3 == pytest.approx(1.0 / 12.0)
    assert sphere_second_moment(1) == pytest.approx(1.0 / 12.0)


def test_sphere_second_moment_disk_polar_oracle():
    # unit disk: (1/2) int r^2 r dr dtheta (normalized norm) over pi^(1+1)
    val, _ = integrate.quad(lambda r: 0.5 * r ** 3 * 2.0 * math.pi, 0.0, 1.0)
    assert val / math.pi ** 2 == pytest.approx(sphere_second_moment(2), rel=1e-10)
    assert sphere_second_moment(2) == pytest.approx(1.0 / (4.0 * math.pi))


def test_sphere_second_moment_large_dimension_limit():
    gs = [sphere_second_moment(L) for L in (1, 2, 4, 10, 50, 100)]
    assert all(a > b for a, b in zip(gs, gs[1:]))
    assert gs[-1] == pytest.approx(1.0 / (2.0 * math.pi * math.e), rel=0.05)


def test_beta_coefficient_hand_value():
    assert beta_coefficient(1) == Fraction(3, 2)


def test_beta_coefficient_rejects_even():
    with pytest.raises(MdlvqError):
        beta_coefficient(2)


def _beta_float(L: int) -> float:
    """Float transcription of the alternating triple sum (for the cancellation guard)."""
    half = (L + 1) // 2
    total = 0.0
    for n in range(half + 1):
        outer = math.comb(half, n) * 2.0 ** (half - n) * (-1.0) ** n
        ksum = 0.0
        for k in range((L - 1) // 2 + 1):
            num = 1.0
            den = 1.0
            for i in range(k):
                num *= ((L + 1) / 2 + i) * ((1 - L) / 2 + i)
                den *= (L + 3) / 2 + i
            den *= math.factorial(k)
            jsum = 0.0
            for j in range(k + 1):
                jsum += (
                    math.comb(k, j) * 0.5 ** (k - j) * (-1.0) ** j * 0.25 ** j / (L + n + j)
                )
            ksum += num / den * jsum
        total += outer * ksum
    return total


def test_beta_floats_lose_to_cancellation():
    exact = beta_coefficient(51)
    exact_f = exact.numerator / exact.denominator
    naive = _beta_float(51)
    assert abs(naive - exact_f) / abs(exact_f) > 1e-7
    # the exact value is the one driving the closed form
    assert psi_closed_form(51) == pytest.approx(PSI_REFERENCE[51], abs=1e-6)


@pytest.mark.parametrize("L", sorted(PSI_REFERENCE))
def test_psi_closed_form_reference(L):
    assert psi_closed_form(L) == pytest.approx(PSI_REFERENCE[L], abs=1e-6)


def test_psi_closed_form_rejects_even():
    with pytest.raises(MdlvqError):
        psi_closed_form(2)


def test_psi_limit():
    assert psi_limit() == pytest.approx((4.0 / 3.0) ** 0.25, rel=1e-15)
    assert psi_limit() == pytest.approx(1.0745699, abs=1e-7)
    assert psi_limit() == pytest.approx(math.sqrt(psi_closed_form(1)), abs=1e-9)


def test_psi_closed_form_decreases_to_limit():
    vals = [psi_closed_form(L) for L in (51, 101, 201)]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    assert all(v > psi_limit() for v in vals)


def test_psi_numeric_k3_converges_to_reference(z2):
    est = [psi_numeric(3, z2, r) for r in (20.0, 40.0, 60.0)]
    assert est[0] <= est[1] + 5e-4 and est[1] <= est[2] + 5e-4
    assert abs(est[-1] - PSI_2_REFERENCE) / PSI_2_REFERENCE < 0.01


def test_psi_numeric_k4_smoke(z2):
    assert psi_numeric(4, z2, 10.0) == pytest.approx(1.1672, abs=5e-4)


def test_psi_numeric_rejects_small_k(z2):
    with pytest.raises(MdlvqError):
        psi_numeric(2, z2, 10.0)


def test_psi_numeric_needs_tuples():
    with pytest.raises(MdlvqError):
        psi_numeric(3, make_lattice("Z1"), 0.25)


def test_psi_values_in_stated_range(z2):
    vals = [psi_closed_form(L) for L in (1, 3, 21, 101)]
    vals += [psi_limit(), psi_numeric(3, z2, 30.0), psi_for_design(2, 2)]
    assert all(1.0 <= v < 2.0 for v in vals)


def test_psi_for_design_dispatch():
    assert psi_for_design(1, 2) == 1.0
    assert psi_for_design(2, 2) == 1.0
    assert psi_for_design(3, 1) == pytest.approx(psi_closed_form(1), rel=1e-12)
    assert psi_for_design(3, 2) == pytest.approx(PSI_2_REFERENCE, abs=1e-2)


def _cayley_menger_volume(points: np.ndarray) -> float:
    n = len(points) - 1
    m = np.ones((n + 2, n + 2))
    m[0, 0] = 0.0
    for i in range(n + 1):
        for j in range(n + 1):
            m[i + 1, j + 1] = ((points[i] - points[j]) ** 2).sum()
    det = np.linalg.det(m)
    return math.sqrt(abs(det) * (-1.0) ** (n + 1) / (2.0 ** n * math.factorial(n) ** 2))


def test_simplex_volume_small_cases():
    assert simplex_volume(2, 1.0) == pytest.approx(math.sqrt(3.0) / 4.0, rel=1e-12)
    assert simplex_volume(1, 2.0) == pytest.approx(2.0)
    # regular tetrahedron with unit side, via the Cayley-Menger determinant
    pts = np.array(
        [
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.5, math.sqrt(3.0) / 2.0, 0.0],
            [0.5, math.sqrt(3.0) / 6.0, math.sqrt(2.0 / 3.0)],
        ]
    )
    assert simplex_volume(3, 1.0) == pytest.approx(_cayley_menger_volume(pts), rel=1e-9)
    assert simplex_volume(3, 1.0) == pytest.approx(1.0 / (6.0 * math.sqrt(2.0)), rel=1e-12)


def test_simplex_fits_in_sphere_bound():
    for L in range(1, 11):
        c_l = simplex_volume(L, 1.0)
        assert c_l / unit_sphere_volume(L) <= 1.0
