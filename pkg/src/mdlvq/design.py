"""High-resolution design of the quantizer stack under packet loss.

Given a source, a total entropy budget split evenly over K descriptions,
and an i.i.d. loss probability p, these formulas predict the expected
distortion of the lattice construction and yield the optimal cell volume,
sublattice index, and number of descriptions, with the index snapped to
the discrete set of admissible values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import MdlvqError
from .expansion import psi_for_design, sphere_second_moment
from .lattices import LatticeBasis, enumerate_admissible_indices

DEFAULT_MAX_INDEX = 1000  # admissible-index cap used when p = 0 pushes N to infinity


def to_db(x: float) -> float:
    """Distortion in dB: 10 log10(x)."""
    if x <= 0:
        raise MdlvqError("distortion must be positive to convert to dB")
    return 10.0 * math.log10(x)


def lattice_second_moment_exact(name: str) -> float:
    """Exact normalized second moment for the built-in lattices (no MC noise)."""
    if name == "A2":
        return 5.0 / (36.0 * math.sqrt(3.0))
    if name.startswith("Z"):
        return 1.0 / 12.0
    raise MdlvqError(f"no exact second moment for lattice {name!r}")


@dataclass(frozen=True)
class SourceModel:
    """An i.i.d. source described by its per-dimension differential entropy and power."""

    h_bits: float            # differential entropy, bits per dimension
    second_moment: float     # E ||X||^2, per-dimension normalized
    descriptor: str = "custom"

    @classmethod
    def gaussian(cls, variance: float = 1.0) -> "SourceModel":
        if variance <= 0:
            raise MdlvqError("variance must be positive")
        h = 0.5 * math.log2(2.0 * math.pi * math.e * variance)
        return cls(h, variance, f"gaussian({variance:g})")

    @classmethod
    def custom(cls, h_bits: float, second_moment: float) -> "SourceModel":
        return cls(h_bits, second_moment, "custom")


@dataclass(frozen=True)
class DesignPoint:
    """One operating point of the K-description system."""

    K: int
    p: float
    R_t: float               # total target entropy, bits per dimension
    L: int
    nu: float                # central cell volume
    N: int                   # sublattice index
    psi: float
    G_c: float               # central lattice normalized second moment
    d_a: float               # expected distortion

    @property
    def side_rate(self) -> float:
        return self.R_t / self.K


def k_hat_coefficients(K: int, p: float) -> tuple[float, float]:
    """Loss-probability weights of the central and side distortion terms."""
    if K < 1:
        raise MdlvqError("K must be at least 1")
    if not 0.0 <= p <= 1.0:
        raise MdlvqError("p must be a probability")
    k1 = 1.0 - p ** K
    k2 = 0.0
    for kappa in range(1, K + 1):
        k2 += (
            math.comb(K, kappa)
            * p ** (K - kappa)
            * (1.0 - p) ** kappa
            * (K - kappa)
            / (2.0 * kappa * K)
        )
    return k1, k2


def rates(L: int, nu: float, N: int, source: SourceModel) -> tuple[float, float]:
    """(central rate, side rate) in bits per dimension at high resolution."""
    if nu <= 0 or N < 1:
        raise MdlvqError("need nu > 0 and N >= 1")
    r_c = source.h_bits - math.log2(nu) / L
    r_s = source.h_bits - math.log2(N * nu) / L
    return r_c, r_s


def entropy_matched_volume(L: int, R_t: float, K: int, source: SourceModel) -> float:
    """Product N * nu that pins each side description at R_t / K bits per dimension."""
    return 2.0 ** (L * (source.h_bits - R_t / K))


def _side_factor(K: int, L: int, N: float, psi: float) -> float:
    return sphere_second_moment(L) * psi * psi * N ** (2.0 * K / (L * (K - 1.0)))


def expected_distortion(dp: DesignPoint, source: SourceModel) -> float:
    """Loss-averaged distortion: central term, side term, and total-loss floor."""
    k1, k2 = k_hat_coefficients(dp.K, dp.p)
    nu_pow = dp.nu ** (2.0 / dp.L)
    d = k1 * dp.G_c * nu_pow + dp.p ** dp.K * source.second_moment
    if dp.K >= 2:
        d += k2 * _side_factor(dp.K, dp.L, dp.N, dp.psi) * nu_pow
    return d


def theoretical_subset_distortion(
    dp: DesignPoint, kappa: int, unit_weight: bool = False, source_power: float = 1.0
) -> float:
    """Distortion from receiving exactly kappa of K descriptions.

    With unit_weight the probability prefactor is dropped, matching how the
    per-subset reference distortions are tabulated.  kappa = 0 reconstructs
    to the mean and costs the source power.
    """
    if not 0 <= kappa <= dp.K:
        raise MdlvqError("kappa out of range")
    if kappa == 0:
        return source_power if unit_weight else dp.p ** dp.K * source_power
    nu_pow = dp.nu ** (2.0 / dp.L)
    body = dp.G_c * nu_pow
    if kappa < dp.K:
        body += (
            (dp.K - kappa)
            / (2.0 * dp.K * kappa)
            * _side_factor(dp.K, dp.L, dp.N, dp.psi)
            * nu_pow
        )
    if unit_weight:
        return body
    weight = (
        math.comb(dp.K, kappa)
        * (1.0 - dp.p) ** kappa
        * dp.p ** (dp.K - kappa)
    )
    return weight * body


def optimal_nu(K: int, p: float, L: int, G_c: float, psi: float, tau: float) -> float:
    """Stationary cell volume for fixed K with N eliminated through N * nu = tau."""
    if K < 1:
        raise MdlvqError("K must be at least 1")
    if K == 1:
        return tau
    k1, k2 = k_hat_coefficients(K, p)
    if k2 == 0.0:
        return 0.0  # p = 0 limit: all redundancy removed, N unbounded
    ratio = (k2 / k1) * (sphere_second_moment(L) / G_c) * psi * psi / (K - 1.0)
    return tau * ratio ** (L * (K - 1.0) / (2.0 * K))


def optimal_index(K: int, p: float, L: int, G_c: float, psi: float) -> float:
    """Unconstrained optimal sublattice index; independent of the rate target.

    Returns math.inf when p = 0 (no loss means no redundancy is wanted).
    """
    if K < 2:
        raise MdlvqError("the index trade-off needs K >= 2")
    k1, k2 = k_hat_coefficients(K, p)
    if k2 == 0.0:
        return math.inf
    ratio = (K - 1.0) * (k1 / k2) * (G_c / sphere_second_moment(L)) / (psi * psi)
    return ratio ** (L * (K - 1.0) / (2.0 * K))


def snap_to_admissible(n_star: float, admissible: list[int]) -> list[int]:
    """The admissible indices adjacent to the unconstrained optimum."""
    if not admissible:
        raise MdlvqError("empty admissible set")
    if math.isinf(n_star):
        return [admissible[-1]]
    below = [n for n in admissible if n <= n_star]
    above = [n for n in admissible if n >= n_star]
    out = []
    if below:
        out.append(below[-1])
    if above and (not out or above[0] != out[0]):
        out.append(above[0])
    return out


def _rate_consistent_cap(L: int, R_t: float, K: int) -> float:
    """Largest index keeping the central rate within the total budget.

    The central codebook is recovered from the K side descriptions, so its
    rate R_s + log2(N)/L cannot exceed K * R_s; beyond that the
    high-resolution entropy bookkeeping is vacuous.
    """
    return 2.0 ** (L * R_t * (K - 1.0) / K)


def optimize_design(
    K_max: int,
    p: float,
    R_t: float,
    lattice: LatticeBasis,
    source: SourceModel,
    psi_table: dict[int, float] | None = None,
    max_index: int = DEFAULT_MAX_INDEX,
) -> DesignPoint:
    """Best (K, N, nu) over K = 1..K_max with N restricted to admissible values.

    For each K the unconstrained index is snapped to its two admissible
    neighbors and the expected distortion evaluated at each; ties prefer
    the smaller K.
    """
    if K_max < 1:
        raise MdlvqError("K_max must be at least 1")
    L = lattice.dimension
    G_c = lattice_second_moment_exact(lattice.name)
    admissible = enumerate_admissible_indices(lattice, max_index)
    if not admissible:
        raise MdlvqError(f"no admissible indices for {lattice.name} up to {max_index}")
    best: DesignPoint | None = None
    for K in range(1, K_max + 1):
        psi = psi_table.get(K) if psi_table else None
        if psi is None:
            psi = psi_for_design(K, L)
        tau = entropy_matched_volume(L, R_t, K, source)
        if K == 1:
            candidates = [1]
        else:
            cap = _rate_consistent_cap(L, R_t, K)
            usable = [n for n in admissible if n <= cap] or admissible[:1]
            candidates = snap_to_admissible(optimal_index(K, p, L, G_c, psi), usable)
        for N in candidates:
            dp = DesignPoint(K, p, R_t, L, tau / N, N, psi, G_c, 0.0)
            d = expected_distortion(dp, source)
            dp = DesignPoint(K, p, R_t, L, tau / N, N, psi, G_c, d)
            if best is None or d < best.d_a:
                best = dp
    return best


def design_sweep_rows(
    lattice: LatticeBasis,
    source: SourceModel,
    R_t: float,
    p_grid: list[float],
    K_list: list[int],
    psi_table: dict[int, float] | None = None,
    max_index: int = DEFAULT_MAX_INDEX,
) -> list[dict]:
    """Theoretical design table, one row per (p, K): the data behind the
    optimal-index and distortion-versus-loss figures."""
    L = lattice.dimension
    G_c = lattice_second_moment_exact(lattice.name)
    admissible = enumerate_admissible_indices(lattice, max_index)
    rows = []
    for p in p_grid:
        for K in K_list:
            psi = psi_table.get(K) if psi_table else None
            if psi is None:
                psi = psi_for_design(K, L)
            tau = entropy_matched_volume(L, R_t, K, source)
            if K == 1:
                n_star = 1.0
                candidates = [1]
            else:
                n_star = optimal_index(K, p, L, G_c, psi)
                cap = _rate_consistent_cap(L, R_t, K)
                usable = [n for n in admissible if n <= cap] or admissible[:1]
                candidates = snap_to_admissible(n_star, usable)
            best = None
            for N in candidates:
                dp = DesignPoint(K, p, R_t, L, tau / N, N, psi, G_c, 0.0)
                d = expected_distortion(dp, source)
                if best is None or d < best[0]:
                    best = (d, N)
            d, N = best
            _, r_s = rates(L, tau / N, N, source)
            rows.append(
                {
                    "p": p,
                    "K": K,
                    "N_unrestricted": n_star,
                    "N_admissible": N,
                    "nu": tau / N,
                    "R_s": r_s,
                    "d_a_dB": to_db(d),
                }
            )
    return rows
