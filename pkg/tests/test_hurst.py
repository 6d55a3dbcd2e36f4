import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bmtv.errors import InconsistentRefinement, NonPositiveVariation, RegimeViolation
from bmtv.hurst import (
    block_sums,
    consistency_experiment,
    estimate_hurst,
    hurst_from_ratio,
    hurst_replicates,
    manufactured_pair,
    nested_pair,
    power_variation,
    read_increments_csv,
)


def test_power_variation():
    assert power_variation([1.0, -2.0], 2) == 5.0
    np.testing.assert_array_equal(power_variation(np.array([[1.0, 1.0], [2.0, 0.0]]), 3), [2.0, 8.0])
    with pytest.raises(ValueError):
        power_variation([1.0], 0.5)


def test_ratio_inversion_formula():
    # T = lam^{1 - pH}  <=>  H
    for H, p, lam in [(0.3, 2, 2), (0.7, 3, 3), (0.5, 2.5, 4)]:
        assert hurst_from_ratio(lam ** (1 - p * H), p, lam) == pytest.approx(H, abs=1e-14)


@pytest.mark.parametrize("H", [0.3, 0.55, 0.7, 0.9])
@pytest.mark.parametrize("p", [2.0, 2.5, 3.0])
@pytest.mark.parametrize("lam", [2, 3])
def test_manufactured_inversion_exact(H, p, lam):
    coarse, fine = manufactured_pair(H, p, lam, 256, seed=1)
    assert abs(estimate_hurst(coarse, fine, p, lam).h_hat - H) < 1e-12


def test_brownian_scaling_pair():
    # Brownian increments: halving the step halves the quadratic variation ratio exactly in mean
    coarse, fine = nested_pair(0.5, 2048, 2, 1, seed=3)
    r = estimate_hurst(coarse[0], fine[0], 2.0, 2)
    assert abs(r.h_hat - 0.5) < 0.05 and r.n == 2048 and r.lam == 2


def test_refinement_checks():
    coarse, fine = manufactured_pair(0.6, 2.0, 2, 8)
    with pytest.raises(InconsistentRefinement):
        estimate_hurst(coarse, fine[:-1], 2.0, 2)
    bad = coarse.copy()
    bad[0] += 1e-6
    with pytest.raises(InconsistentRefinement):
        estimate_hurst(bad, fine, 2.0, 2)
    assert math.isfinite(estimate_hurst(bad, fine, 2.0, 2, check=False).h_hat)
    with pytest.raises(NonPositiveVariation):
        estimate_hurst(np.zeros(4), np.zeros(8), 2.0, 2)
    with pytest.raises(ValueError):
        estimate_hurst(coarse, fine, 2.0, 1)
    with pytest.raises(InconsistentRefinement):
        block_sums(np.ones(5), 2)


def test_nested_pair_consistent():
    coarse, fine = nested_pair(0.7, 64, 3, 4, seed=5)
    assert coarse.shape == (4, 64) and fine.shape == (4, 192)
    np.testing.assert_allclose(block_sums(fine, 3), coarse, rtol=0, atol=0)
    # unit-interval scaling: Var(sum of coarse increments) = 1
    c2, _ = nested_pair(0.7, 64, 2, 2000, seed=6)
    v = c2.sum(axis=1).var()
    assert abs(v - 1.0) < 4 * math.sqrt(2 / 2000)


@pytest.mark.parametrize("H", [0.3, 0.55, 0.7])
def test_bias_small(H):
    h = hurst_replicates(H, 2.0, 2, 4096, 200, seed=7)
    assert abs(h.mean() - H) <= 0.02


def test_replicates_thread_invariant():
    a = hurst_replicates(0.6, 2.0, 2, 256, 50, seed=8, threads=1, chunk=16)
    b = hurst_replicates(0.6, 2.0, 2, 256, 50, seed=8, threads=3, chunk=16)
    assert a.tobytes() == b.tobytes()


def test_consistency_table_flags():
    with pytest.warns(RegimeViolation):
        t = consistency_experiment(0.8, 2.0, 2, [64, 128], 20, seed=9)
    assert not t.in_theorem and "H >= 3/4" in t.notes
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        t = consistency_experiment(0.6, 2.5, 2, [64, 128], 20, seed=9)
    assert not t.in_theorem and len(t.rows) == 2
    t = consistency_experiment(0.6, 3.0, 2, [64, 128, 256], 400, seed=10)
    assert t.in_theorem
    assert [r.n for r in t.rows] == [64, 128, 256]
    assert t.sd_decreasing


@settings(max_examples=20, deadline=None)
@given(st.floats(0.05, 0.95), st.sampled_from([2.0, 2.5, 3.0, 4.0]), st.integers(2, 5), st.integers(0, 2**32))
def test_manufactured_property(H, p, lam, seed):
    coarse, fine = manufactured_pair(H, p, lam, 32, seed)
    assert abs(estimate_hurst(coarse, fine, p, lam).h_hat - H) < 1e-11


def test_read_increments_csv(tmp_path):
    f = tmp_path / "x.csv"
    f.write_text("increment\n0.5\n-1.25\n")
    np.testing.assert_array_equal(read_increments_csv(f), [0.5, -1.25])
    g = tmp_path / "y.csv"
    g.write_text("value\n1\n")
    with pytest.raises(ValueError):
        read_increments_csv(g)
