"""End-to-end Monte-Carlo pipeline for the multiple-description quantizer.

A Gaussian stream is quantized to the central lattice, labeled into K
descriptions, and reconstructed from every description subset; distortions
are averaged per subset together with empirical side-description entropies.
The vector stream is processed in fixed-size chunks whose partial sums are
merged in index order, so results do not depend on the worker count.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .design import (
    DesignPoint,
    SourceModel,
    entropy_matched_volume,
    lattice_second_moment_exact,
    theoretical_subset_distortion,
    to_db,
)
from .errors import MdlvqError
from .expansion import psi_for_design
from .labeling import KTuple, LabelingFunction, alpha, build_labeling, invert_full_tuple
from .lattices import LatticeBasis, build_sublattice, norm_sq, quantize_coords

CHUNK = 65536


def gaussian_source(n_vectors: int, L: int, sigma: float, seed: int) -> np.ndarray:
    """i.i.d. zero-mean Gaussian vectors, deterministic for a given seed."""
    if n_vectors < 1:
        raise MdlvqError("need at least one vector")
    rng = np.random.default_rng(seed)
    return sigma * rng.standard_normal((n_vectors, L))


@dataclass(frozen=True)
class EncodedBlock:
    """Central codeword and its K description points for one source vector."""

    central_point: np.ndarray
    descriptions: KTuple


def encode(lf: LabelingFunction, x: np.ndarray) -> EncodedBlock:
    """Quantize one vector to the central lattice and label it."""
    x = np.asarray(x, dtype=float)
    cc = quantize_coords(lf.spec.parent, x[None, :])[0]
    central = cc @ lf.spec.parent.generators
    return EncodedBlock(central, alpha(lf, central))


def reconstruct(received: dict[int, np.ndarray], lf: LabelingFunction, mean=None) -> np.ndarray:
    """Reconstruction from a subset of descriptions.

    Nothing received: the source mean.  All K received: the exact inverse
    of the labeling.  Otherwise the arithmetic mean of the received points.
    """
    L = lf.spec.parent.dimension
    if not received:
        return np.zeros(L) if mean is None else np.asarray(mean, dtype=float)
    if len(received) == lf.K:
        pts = np.array([received[i] for i in range(lf.K)], dtype=float)
        return invert_full_tuple(lf, pts)
    pts = np.array(list(received.values()), dtype=float)
    return pts.mean(axis=0)


def empirical_entropy(symbols, L: int) -> float:
    """Plug-in entropy of a symbol stream, in bits per dimension."""
    _, counts = np.unique(np.asarray(symbols), return_counts=True, axis=0)
    return entropy_of_counts(counts) / L


def entropy_of_counts(counts: np.ndarray) -> float:
    counts = np.asarray(counts, dtype=float)
    counts = counts[counts > 0]
    if counts.size == 0:
        raise MdlvqError("empty symbol stream")
    pk = counts / counts.sum()
    return float(-(pk * np.log2(pk)).sum())


@dataclass(frozen=True)
class DistortionReport:
    """Per-subset distortions and side-description entropies of one run."""

    lattice: str
    N: int
    K: int
    psi_used: float
    scale: float
    sigma: float
    n_vectors: int
    seed: int
    per_subset_db: dict[str, float]
    avg_db_by_count: dict[int, float]
    entropies: list[float]            # side entropies, bits/dim (residue + translate part)
    residue_entropies: list[float]
    sample_second_moment: float
    per_subset_mse: dict[str, float] = field(repr=False, default=None)

    def to_json_dict(self) -> dict:
        return {
            "config": {
                "lattice": self.lattice,
                "N": self.N,
                "K": self.K,
                "psi_used": self.psi_used,
                "scale": self.scale,
                "sigma": self.sigma,
            },
            "n": self.n_vectors,
            "seed": self.seed,
            "per_subset_dB": dict(self.per_subset_db),
            "avg_dB_by_count": {str(k): v for k, v in self.avg_db_by_count.items()},
            "entropies": list(self.entropies),
            "residue_entropies": list(self.residue_entropies),
            "sample_second_moment": self.sample_second_moment,
        }


def subset_key(subset: tuple[int, ...]) -> str:
    return ",".join(map(str, subset)) if subset else "none"


def _encode_chunk(lf: LabelingFunction, X: np.ndarray, scale: float):
    """Vectorized encode of a chunk: central points, description points, table rows."""
    parent = lf.spec.parent
    prod = lf.spec.product_lattice
    Xs = X / scale
    cc = quantize_coords(parent, Xs)
    central = cc @ parent.generators
    qc = quantize_coords(prod, central)
    m = lf.spec.sub_coords_in_parent
    shift_parent = qc @ m @ m
    rows = lf.residue_rows(cc - shift_parent)
    shift_real = qc @ prod.generators
    desc = lf.label_points[rows] + shift_real[:, None, :]
    return central * scale, desc * scale, rows


def simulate(
    lf: LabelingFunction,
    sigma: float,
    n_vectors: int,
    seed: int,
    scale: float = 1.0,
    threads: int = 1,
) -> DistortionReport:
    """Measure per-subset distortion and side entropies over a Gaussian stream.

    Every description subset is evaluated for every vector (no random
    dropping), which removes one layer of Monte-Carlo variance.  `scale`
    multiplies the base lattice so the side rate can be set via the cell
    volume.
    """
    if n_vectors < 10_000:
        raise MdlvqError("simulation needs at least 1e4 vectors")
    K = lf.K
    L = lf.spec.parent.dimension
    subsets = [s for r in range(K + 1) for s in itertools.combinations(range(K), r)]
    X = gaussian_source(n_vectors, L, sigma, seed)
    chunks = [X[i : i + CHUNK] for i in range(0, n_vectors, CHUNK)]

    def work(chunk):
        central, desc, rows = _encode_chunk(lf, chunk, scale)
        sums = {}
        for subset in subsets:
            if not subset:
                err = norm_sq(chunk)
            elif len(subset) == K:
                err = norm_sq(chunk - central)
            else:
                recon = desc[:, list(subset), :].mean(axis=1)
                err = norm_sq(chunk - recon)
            sums[subset] = float(err.sum())
        return sums, np.bincount(rows, minlength=lf.table_size)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(work, chunks))
    else:
        results = [work(c) for c in chunks]

    sq_sums = {s: 0.0 for s in subsets}
    row_counts = np.zeros(lf.table_size, dtype=np.int64)
    for sums, counts in results:
        for s in subsets:
            sq_sums[s] += sums[s]
        row_counts += counts

    mse = {s: sq_sums[s] / n_vectors for s in subsets}
    per_subset_db = {subset_key(s): to_db(m) for s, m in mse.items()}
    avg_by_count = {}
    for kappa in range(1, K + 1):
        vals = [per_subset_db[subset_key(s)] for s in subsets if len(s) == kappa]
        avg_by_count[kappa] = float(np.mean(vals))

    nu_eff = lf.spec.parent.cell_volume * scale ** L
    h_bits = SourceModel.gaussian(sigma * sigma).h_bits
    translate_rate = h_bits - math.log2(lf.spec.index ** 2 * nu_eff) / L
    prod = lf.spec.product_lattice
    m = lf.spec.sub_coords_in_parent
    entropies = []
    residue_entropies = []
    for i in range(K):
        # a description symbol is its residue class modulo the product
        # lattice; the translate component is modeled at high resolution
        qc = quantize_coords(prod, lf.label_points[:, i, :])
        classes = lf.label_coords[:, i, :] - qc @ m @ m
        _, inverse = np.unique(classes, axis=0, return_inverse=True)
        counts = np.bincount(inverse, weights=row_counts)
        h_res = entropy_of_counts(counts) / L
        residue_entropies.append(h_res)
        entropies.append(h_res + translate_rate)

    return DistortionReport(
        lattice=lf.spec.parent.name,
        N=lf.spec.index,
        K=K,
        psi_used=lf.psi_used,
        scale=scale,
        sigma=sigma,
        n_vectors=n_vectors,
        seed=seed,
        per_subset_db=per_subset_db,
        avg_db_by_count=avg_by_count,
        entropies=entropies,
        residue_entropies=residue_entropies,
        sample_second_moment=mse[()],
        per_subset_mse={subset_key(s): m for s, m in mse.items()},
    )


def _loss_weighted(mse_by_subset: dict[str, float], K: int, p: float) -> float:
    """Expected distortion at loss probability p from per-subset measurements."""
    total = 0.0
    for r in range(K + 1):
        for subset in itertools.combinations(range(K), r):
            w = (1.0 - p) ** r * p ** (K - r)
            total += w * mse_by_subset[subset_key(subset)]
    return total


def sweep_packet_loss(
    lattice: LatticeBasis,
    designs: list[tuple[int, list[int]]],
    p_grid: list[float],
    R_t: float,
    sigma: float,
    n_vectors: int,
    seed: int,
    psi_table: dict[int, float] | None = None,
    threads: int = 1,
    progress=None,
) -> list[dict]:
    """Numerical and theoretical operational lower hulls over a loss-probability grid.

    For each (K, admissible-index list) every index is simulated once at the
    side rate R_t / K; each grid row then reports the index minimizing the
    loss-weighted measured distortion next to the theoretical hull value.
    """
    L = lattice.dimension
    source = SourceModel.gaussian(sigma * sigma)
    G_c = lattice_second_moment_exact(lattice.name)
    nu_base = lattice.cell_volume
    measured = {}
    psi_of = {}
    for K, n_list in designs:
        psi = psi_table.get(K) if psi_table else None
        if psi is None:
            psi = psi_for_design(K, L)
        psi_of[K] = psi
        tau = entropy_matched_volume(L, R_t, K, source)
        for N in n_list:
            lf = build_labeling(build_sublattice(lattice, N), K, psi)
            scale = (tau / N / nu_base) ** (1.0 / L)
            child_seed = int(np.random.SeedSequence((seed, K, N)).generate_state(1)[0])
            rep = simulate(lf, sigma, n_vectors, child_seed, scale=scale, threads=threads)
            measured[(K, N)] = rep.per_subset_mse
            if progress:
                progress(f"simulated K={K} N={N}")

    rows = []
    for p in p_grid:
        for K, n_list in designs:
            tau = entropy_matched_volume(L, R_t, K, source)
            best_num = None
            best_theory = None
            for N in n_list:
                d_num = _loss_weighted(measured[(K, N)], K, p)
                dp = DesignPoint(K, p, R_t, L, tau / N, N, psi_of[K], G_c, 0.0)
                d_theo = sum(
                    theoretical_subset_distortion(dp, kappa, source_power=source.second_moment)
                    for kappa in range(K + 1)
                )
                if best_num is None or d_num < best_num[0]:
                    best_num = (d_num, N)
                if best_theory is None or d_theo < best_theory:
                    best_theory = d_theo
            rows.append(
                {
                    "p": p,
                    "K": K,
                    "N_best": best_num[1],
                    "d_numeric_dB": to_db(best_num[0]),
                    "d_theory_dB": to_db(best_theory),
                }
            )
    return rows
