import math

import numpy as np
import pytest

from mdlvq.design import SourceModel, entropy_matched_volume
from mdlvq.errors import MdlvqError
from mdlvq.labeling import alpha, build_labeling
from mdlvq.lattices import build_sublattice, norm_sq
from mdlvq.simulate import (
    _encode_chunk,
    _loss_weighted,
    empirical_entropy,
    encode,
    gaussian_source,
    reconstruct,
    simulate,
    subset_key,
    sweep_packet_loss,
)


def test_gaussian_source_deterministic():
    a = gaussian_source(1000, 2, 1.0, seed=5)
    b = gaussian_source(1000, 2, 1.0, seed=5)
    assert np.array_equal(a, b)
    c = gaussian_source(1000, 2, 1.0, seed=6)
    assert not np.array_equal(a, c)


def test_gaussian_source_moments():
    x = gaussian_source(1_000_000, 2, 1.0, seed=7)
    assert abs(x.mean()) < 3.0 / math.sqrt(x.size)
    assert norm_sq(x).mean() == pytest.approx(1.0, abs=0.005)


def test_encode_central_point_fixed(labeling_cache):
    lf = labeling_cache("A2", 7, 2, 1.0)
    x = lf.central_points[5]
    block = encode(lf, x)
    assert np.allclose(block.central_point, x)
    assert np.allclose(block.descriptions.elements, alpha(lf, x).elements)


def test_encode_z1_matches_table(z1):
    lf = build_labeling(build_sublattice(z1, 3), 2, 1.0)
    block = encode(lf, np.array([1.2]))
    assert block.central_point[0] == 1.0
    assert np.allclose(block.descriptions.elements, alpha(lf, np.array([1.0])).elements)


def test_reconstruct_rules(labeling_cache):
    lf = labeling_cache("A2", 7, 3, 1.14808)
    partial = {0: np.array([0.0, 0.0]), 1: np.array([1.0, 1.0])}
    assert np.allclose(reconstruct(partial, lf), [0.5, 0.5])
    assert np.allclose(reconstruct({}, lf), [0.0, 0.0])
    for i in range(0, lf.table_size, 7):
        received = {j: lf.label_points[i, j] for j in range(lf.K)}
        assert np.allclose(reconstruct(received, lf), lf.central_points[i])


def test_reconstruct_rejects_corrupt_full_set(labeling_cache):
    lf = labeling_cache("A2", 7, 2, 1.0)
    bad = {0: lf.label_points[0, 0] + 100.0, 1: lf.label_points[3, 1]}
    with pytest.raises(MdlvqError):
        reconstruct(bad, lf)


def test_full_reception_rules_k3(labeling_cache):
    lf = labeling_cache("A2", 7, 3, 1.14808)
    for i in range(0, lf.table_size, 11):
        received = {j: lf.label_points[i, j] for j in range(3)}
        assert np.allclose(reconstruct(received, lf), lf.central_points[i])


def test_empirical_entropy_examples():
    assert empirical_entropy([0, 1, 2, 3] * 25, L=2) == pytest.approx(1.0)
    assert empirical_entropy([7] * 50, L=2) == pytest.approx(0.0)


def test_simulate_invariants(labeling_cache):
    lf = labeling_cache("A2", 7, 2, 1.0)
    rep = simulate(lf, 1.0, 20_000, seed=3, scale=0.05)
    mse = rep.per_subset_mse
    # refinement: more descriptions, less distortion
    assert mse["0,1"] < min(mse["0"], mse["1"])
    assert max(mse["0"], mse["1"]) < mse["none"]
    assert mse["none"] == pytest.approx(1.0, abs=0.03)
    # full reception equals the central quantizer
    assert rep.per_subset_db["0,1"] == pytest.approx(rep.avg_db_by_count[2], abs=1e-12)


def test_simulate_monotone_refinement_k3(labeling_cache):
    lf = labeling_cache("A2", 7, 3, 1.14808)
    rep = simulate(lf, 1.0, 20_000, seed=6, scale=0.05)
    by_count = [rep.avg_db_by_count[k] for k in (1, 2, 3)]
    assert by_count[0] > by_count[1] > by_count[2]
    for s, v in rep.per_subset_mse.items():
        if s not in ("none", "0,1,2"):
            assert v < rep.per_subset_mse["none"]
            assert v > rep.per_subset_mse["0,1,2"]


def test_simulate_orthogonality(labeling_cache):
    lf = labeling_cache("A2", 7, 2, 1.0)
    scale = 0.05
    rep = simulate(lf, 1.0, 100_000, seed=9, scale=scale)
    x = gaussian_source(100_000, 2, 1.0, seed=9)
    central, desc, _ = _encode_chunk(lf, x, scale)
    d_c = float(norm_sq(x - central).mean())
    for i in range(2):
        label_term = float(norm_sq(central - desc[:, i, :]).mean())
        assert rep.per_subset_mse[str(i)] == pytest.approx(d_c + label_term, rel=0.01)


def test_simulate_threads_and_chunks_agree(labeling_cache):
    lf = labeling_cache("A2", 7, 2, 1.0)
    a = simulate(lf, 1.0, 70_001, seed=4, scale=0.1, threads=1)
    b = simulate(lf, 1.0, 70_001, seed=4, scale=0.1, threads=3)
    assert a.per_subset_db == b.per_subset_db
    assert a.entropies == b.entropies


def test_simulate_requires_enough_vectors(labeling_cache):
    lf = labeling_cache("A2", 7, 2, 1.0)
    with pytest.raises(MdlvqError):
        simulate(lf, 1.0, 5000, seed=1)


def test_loss_weighting_edges():
    mse = {subset_key(s): v for s, v in {(): 1.0, (0,): 0.3, (1,): 0.4, (0, 1): 0.1}.items()}
    assert _loss_weighted(mse, 2, 0.0) == pytest.approx(0.1)
    assert _loss_weighted(mse, 2, 1.0) == pytest.approx(1.0)
    mid = _loss_weighted(mse, 2, 0.5)
    assert mid == pytest.approx(0.25 * (1.0 + 0.3 + 0.4 + 0.1))


def test_sweep_rows_edge_probabilities(z1):
    # K=2 index list stays within the rate-consistency cap 2^(L R_t / 2),
    # otherwise the coarse-rate side entropies overrun the budget
    rows = sweep_packet_loss(
        z1,
        designs=[(1, [1]), (2, [3])],
        p_grid=[0.0, 1.0],
        R_t=4.0,
        sigma=1.0,
        n_vectors=20_000,
        seed=2,
    )
    by = {(r["p"], r["K"]): r for r in rows}
    assert len(rows) == 4
    # at p=0 the single description system carries all rate and wins
    assert by[(0.0, 1)]["d_numeric_dB"] < by[(0.0, 2)]["d_numeric_dB"]
    # at p=1 every configuration collapses to the source power (0 dB)
    assert by[(1.0, 1)]["d_numeric_dB"] == pytest.approx(0.0, abs=0.1)
    assert by[(1.0, 2)]["d_numeric_dB"] == pytest.approx(0.0, abs=0.1)


def test_report_roundtrip_and_determinism(labeling_cache):
    from mdlvq import jsonio

    lf = labeling_cache("A2", 7, 2, 1.0)
    r1 = simulate(lf, 1.0, 20_000, seed=8, scale=0.1)
    r2 = simulate(lf, 1.0, 20_000, seed=8, scale=0.1)
    assert jsonio.dumps(r1.to_json_dict()) == jsonio.dumps(r2.to_json_dict())


def test_side_entropy_tracks_design_rate(labeling_cache):
    lf = labeling_cache("A2", 7, 2, 1.0)
    src = SourceModel.gaussian(1.0)
    # pick the scale that sets the side rate to 4 bits/dim
    nu = entropy_matched_volume(2, 8.0, 2, src) / 7
    scale = (nu / lf.spec.parent.cell_volume) ** 0.5
    rep = simulate(lf, 1.0, 100_000, seed=21, scale=scale)
    for h in rep.entropies:
        assert h == pytest.approx(4.0, abs=0.05)
