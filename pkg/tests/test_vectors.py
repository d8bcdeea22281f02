import itertools
import math
from math import comb

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kikuchi_hsbm.kikuchi import KikuchiOperator, dense_set_kikuchi, dense_tuple_kikuchi, thresholds
from kikuchi_hsbm.model import ModelParams, sample, whitened_indicator
from kikuchi_hsbm.vectors import (
    ProductVector,
    batch_mask,
    certificate_base,
    certificate_mass_bound,
    collision_free_count,
    collision_free_norm2,
    collision_free_sum,
    directional_check,
    eigenspace_overlap,
    enumerate_collision_free,
    guiding_base,
    materialize,
    overlap,
    overlap_count_histogram,
    rayleigh,
    spectrum,
    split,
)
from kikuchi_hsbm.vectors import _sum_sampled


def _brute_sum(w, n, p, lam):
    sets = list(itertools.combinations(range(n), p))
    total = 0.0
    for combo in itertools.product(range(len(sets)), repeat=lam):
        verts = [v for c in combo for v in sets[c]]
        if len(set(verts)) == lam * p:
            total += math.prod(w[_colex(sets[c], n)] for c in combo)
    return total


def _colex(s, n):
    return sum(comb(v, i + 1) for i, v in enumerate(s))


def test_collision_free_count_matches_enumeration():
    for n, p, lam in [(6, 2, 2), (7, 2, 3), (8, 4, 2), (9, 3, 3)]:
        assert len(enumerate_collision_free(n, p, lam)) == collision_free_count(n, p, lam)


@pytest.mark.parametrize("n,p,lam", [(6, 2, 2), (7, 3, 2), (6, 2, 3)])
def test_collision_free_sum_against_brute_force(n, p, lam):
    w = np.random.default_rng(n * lam).standard_normal(comb(n, p))
    val, se = collision_free_sum(w, n, p, lam)
    assert se == 0.0
    assert val == pytest.approx(_brute_sum(w, n, p, lam), rel=1e-12, abs=1e-12)


def test_inclusion_exclusion_matches_enumeration_larger():
    from kikuchi_hsbm.vectors import _sum_enumerated

    w = np.random.default_rng(3).standard_normal(comb(10, 4))
    assert collision_free_sum(w, 10, 4, 2)[0] == pytest.approx(_sum_enumerated(w, 10, 4, 2), rel=1e-11)


def test_sampled_sum_is_unbiased():
    w = np.random.default_rng(4).random(comb(9, 2)) + 0.5
    exact = collision_free_sum(w, 9, 2, 3)[0]
    val, se = _sum_sampled(w, 9, 2, 3, 200_000, 1)
    assert abs(val - exact) < 5 * se


def test_uniform_norm():
    pv = ProductVector(2, np.ones(45), 10, 2)
    assert collision_free_norm2(pv) == 1260


def test_materialized_norm_matches_collision_free_norm():
    rng = np.random.default_rng(0)
    for n, p, lam in [(8, 2, 2), (8, 4, 1), (9, 2, 3)]:
        pv = ProductVector(lam, rng.standard_normal(comb(n, p)), n, p)
        v = materialize(pv)
        assert v @ v == pytest.approx(collision_free_norm2(pv), rel=1e-10)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=15, deadline=None)
def test_overlap_is_symmetric_and_bilinear(seed):
    rng = np.random.default_rng(seed)
    a, b = rng.standard_normal((2, comb(8, 2)))
    u, v = ProductVector(2, a, 8, 2), ProductVector(2, b, 8, 2)
    assert overlap(u, v) == pytest.approx(overlap(v, u), rel=1e-10, abs=1e-10)
    assert overlap(u, v) == pytest.approx(materialize(u) @ materialize(v), rel=1e-9, abs=1e-9)
    assert abs(overlap(u, v, normalized=True)) <= 1 + 1e-12


@pytest.mark.parametrize("n,p,lam", [(8, 2, 2), (9, 3, 2), (8, 2, 3)])
def test_overlap_count_histogram(n, p, lam):
    counts = overlap_count_histogram(n, p, lam)
    assert counts.sum() == collision_free_count(n, p, lam) ** 2
    # unions of lam p vertices inside [n] overlap in at least 2 lam p - n vertices
    assert counts[: max(0, 2 * lam * p - n)].sum() == 0


def test_rayleigh_matches_dense(f24):
    h = sample(ModelParams(8, 2, 4, 0.3, 0.2), f24, True, 2)
    pv = ProductVector(1, certificate_base(h, f24), 8, 4)
    v = materialize(pv)
    K = dense_tuple_kikuchi(h, 4)
    assert rayleigh(KikuchiOperator(h, 4), pv) == pytest.approx(v @ K @ v / (v @ v), rel=1e-12)


def test_guide_and_certificate_bases(f24, small_planted, small_null):
    assert np.array_equal(guiding_base(small_planted), small_planted.A)
    with pytest.raises(ValueError):
        certificate_base(small_null, f24)
    mask = batch_mask(8, 4, 1)
    g = guiding_base(small_planted, mask, 0)
    assert np.all(g[~mask.batch(0)] == 0)
    with pytest.raises(ValueError):
        guiding_base(small_planted, batch=0)


def test_batch_mask_partition():
    m = batch_mask(12, 4, 7)
    assert m.L == math.ceil(math.log(12)) and m.zeta == pytest.approx(1 / 3)
    assert np.array_equal(m.batch(0), ~m.complement(0))
    assert set(np.unique(m.assignment)) <= set(range(m.L))
    assert np.array_equal(batch_mask(12, 4, 7).assignment, m.assignment)


def test_split_uses_disjoint_edges(f24):
    h = sample(ModelParams(10, 2, 4, 0.3, 0.2), f24, True, 1)
    mask, op, guide = split(h, 5)
    assert np.array_equal(op.mask, mask.complement(0))
    assert np.all(guide.base[mask.complement(0)] == 0)


def test_set_spectrum_is_symmetric_sector(f24):
    h = sample(ModelParams(9, 2, 4, 0.3, 0.2), f24, True, 4)
    op = KikuchiOperator(h, 4)
    sp = spectrum(op)
    assert sp.basis == "set" and sp.complete
    assert np.allclose(sp.evals, np.linalg.eigvalsh(2 * dense_set_kikuchi(h, 4)))
    # each set-basis eigenpair lifts to a tuple-basis eigenpair
    K = dense_tuple_kikuchi(h, 4)
    pv = ProductVector(1, sp.evecs[:, -1], 9, 4)
    v = materialize(pv)
    assert np.allclose(K @ v, sp.evals[-1] * v, atol=1e-9)


def test_mass_in_unit_interval(f24, small_planted):
    op = KikuchiOperator(small_planted, 4)
    pv = ProductVector(1, certificate_base(small_planted, f24), 8, 4)
    sp = spectrum(op)
    assert sp.weights(pv).sum() == pytest.approx(1.0)
    assert eigenspace_overlap(op, pv, -np.inf) == pytest.approx(1.0)
    assert eigenspace_overlap(op, pv, np.inf) == 0.0


def test_directional_check_fields(f24):
    P = ModelParams(12, 2, 4, 0.45, 0.44)
    h = sample(P, f24, True, 3)
    mask, op, guide = split(h, 9)
    sp = spectrum(op)
    cert = ProductVector(1, certificate_base(h, f24), 12, 4)
    tau = sp.evals[-5]
    d = directional_check(sp, cert, guide, tau, mask.zeta, P.beta)
    assert d["s_v"] > 0 and d["fail_bound"] == pytest.approx(4 / ((mask.zeta * P.beta) ** 2 * d["s_v"] ** 2))
    assert d["holds"] == (d["s_u"] >= d["rhs"])


def test_certificate_mass_bound_values():
    assert certificate_mass_bound(0.1, 1.5) == pytest.approx(0.6 / 5)
    assert certificate_mass_bound(1 / 3, 1 / 16) < 0
