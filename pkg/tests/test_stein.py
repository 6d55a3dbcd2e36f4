import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bmtv.errors import CapExceeded, LengthMismatch
from bmtv.hermite import FunctionSpec, HermiteExpansion, expand
from bmtv.paths import CovarianceModel, generate
from bmtv.statistics import compute_yn, sigma_n_squared
from bmtv.stein import (
    bound_report,
    d_u2_yn,
    d_u2_yn_reference,
    d_u_yn,
    fourth_cumulant,
    third_moment,
    toeplitz_matvec,
    tv_upper_prop31,
    tv_upper_prop32_partial,
    tv_upper_prop33,
)

H1 = expand(FunctionSpec.hermite_single(1), 4)
H2 = expand(FunctionSpec.hermite_single(2), 4)
FGN06 = CovarianceModel.fgn(0.6)


def toeplitz(model, n):
    k = np.arange(n)
    return model.rho(np.abs(k[:, None] - k[None, :]))


def test_toeplitz_matvec_matches_dense():
    rng = np.random.default_rng(0)
    for n in (1, 2, 17, 200):
        v = rng.standard_normal((3, n))
        np.testing.assert_allclose(toeplitz_matvec(FGN06, v), v @ toeplitz(FGN06, n), atol=1e-12)


def test_d_u_first_chaos_is_sigma_n():
    x = generate(FGN06, 40, 5, 1).paths
    np.testing.assert_allclose(d_u_yn(x, H1, FGN06), sigma_n_squared(FGN06, H1, 40), rtol=1e-13)


def test_d_u_h2_trace_form():
    x = generate(FGN06, 50, 4, 2).paths
    R = toeplitz(FGN06, 50)
    want = 2.0 / 50 * np.einsum("ij,jk,ik->i", x, R, x)
    np.testing.assert_allclose(d_u_yn(x, H2, FGN06), want, rtol=1e-12)


def test_zero_path_examples():
    z = np.zeros(30)
    assert d_u_yn(z, H2, FGN06) == 0.0
    assert d_u2_yn(z, H2, FGN06) == 0.0


def test_d_u2_first_chaos_vanishes():
    x = generate(FGN06, 30, 3, 3).paths
    assert np.all(d_u2_yn(x, H1, FGN06) == 0.0)


def test_d_u2_h2_trace_form():
    x = generate(FGN06, 50, 4, 4).paths
    R = toeplitz(FGN06, 50)
    want = 4.0 * 50**-1.5 * np.einsum("ij,jk,ik->i", x, R @ R, x)
    np.testing.assert_allclose(d_u2_yn(x, H2, FGN06), want, rtol=1e-12)


@pytest.mark.parametrize("g", [FunctionSpec.hermite_single(2), FunctionSpec.explicit_hermite([0, 1, 0.3, 0.5]),
                               FunctionSpec.abs_power(3.0)])
def test_d_u2_factorized_vs_reference(g):
    e = expand(g, 20)
    x = generate(FGN06, 64, 5, 5).paths
    for row in x:
        fast = d_u2_yn(row, e, FGN06)
        ref = d_u2_yn_reference(row, e, FGN06)
        assert fast == pytest.approx(ref, rel=1e-9, abs=1e-12)


def test_caps():
    with pytest.raises(CapExceeded):
        d_u2_yn_reference(np.zeros(65), H2, FGN06)
    with pytest.raises(CapExceeded):
        d_u2_yn(np.zeros(20), H2, FGN06, n_cap=10)


def test_prop31_examples():
    assert tv_upper_prop31(np.full(10, 2.5), math.sqrt(2.5)).value == 0.0
    est = tv_upper_prop31(np.full(10, 3.0), math.sqrt(2.0))
    assert est.value == pytest.approx(2 / 2.0)
    # first chaos: D_u Y_n is deterministic and both bounds are exactly zero
    x = generate(FGN06, 64, 50, 6).paths
    s = math.sqrt(sigma_n_squared(FGN06, H1, 64))
    du = d_u_yn(x, H1, FGN06)
    assert tv_upper_prop31(du, s).value == 0.0
    assert tv_upper_prop33(du, d_u2_yn(x, H1, FGN06), s).value == 0.0


def test_prop31_white_h2_population():
    n, m = 256, 4000
    x = generate(CovarianceModel.white(), n, m, 7).paths
    est = tv_upper_prop31(d_u_yn(x, H2, CovarianceModel.white()), math.sqrt(2.0))
    assert abs(est.value - math.sqrt(8 / n)) <= 4 * est.se


def test_prop31_fgn_h2_wick_population():
    n, m = 32, 4000
    R = toeplitz(FGN06, n)
    var = 8 * np.trace(np.linalg.matrix_power(R, 4)) / n**2
    s2 = sigma_n_squared(FGN06, H2, n)
    want = 2 / s2 * math.sqrt(var)
    x = generate(FGN06, n, m, 8).paths
    est = tv_upper_prop31(d_u_yn(x, H2, FGN06), math.sqrt(s2))
    assert abs(est.value - want) <= 4 * est.se


def test_prop33_examples():
    s = 1.7
    est = tv_upper_prop33(np.full(5, s**2), np.full(5, s**3), s)
    assert est.value == pytest.approx(math.sqrt(8 * math.pi))
    with pytest.raises(LengthMismatch):
        tv_upper_prop33(np.ones(3), np.ones(4), 1.0)


def test_prop33_dominates_first_term():
    n = 128
    x = generate(FGN06, n, 500, 9).paths
    s = math.sqrt(sigma_n_squared(FGN06, H2, n))
    du, d2 = d_u_yn(x, H2, FGN06), d_u2_yn(x, H2, FGN06)
    p33 = tv_upper_prop33(du, d2, s).value
    first = 8 / s**4 * np.mean((s**2 - du) ** 2)
    assert p33 >= first


def test_third_moment_examples():
    assert third_moment(np.full(10, 2.0), 2.0).value == 1.0
    x = generate(CovarianceModel.white(), 64, 4000, 10)
    y = compute_yn(x, H1).values
    est = third_moment(y, 1.0)
    assert est.value <= 4 * est.se
    y = compute_yn(x, H2).values
    est = third_moment(y, math.sqrt(2.0))
    assert abs(est.value - 2 * math.sqrt(2) / 8) <= 4 * est.se


def test_fourth_cumulant_examples():
    rng = np.random.default_rng(11)
    k = fourth_cumulant(rng.standard_normal(20000), 1.0)
    assert abs(k.value) <= 4 * k.se
    assert fourth_cumulant(np.full(4, 3.0), 3.0).value == pytest.approx(-2.0)
    n = 256
    y = compute_yn(generate(CovarianceModel.white(), n, 8000, 12), H2).values
    k = fourth_cumulant(y, math.sqrt(2.0), H2)
    assert abs(k.value - 12 / n) <= 4 * k.se
    assert k.single_chaos and k.bound is not None


def test_fourth_cumulant_warns_for_mixed_chaos():
    e = HermiteExpansion([0.0, 1.0, 0.5])
    with pytest.warns(RuntimeWarning):
        k = fourth_cumulant(np.linspace(-1, 1, 10), 1.0, e)
    assert k.bound is None and not k.single_chaos


def test_duality_mean():
    for model, e, n in [(CovarianceModel.white(), H2, 64), (FGN06, H2, 128),
                        (FGN06, expand(FunctionSpec.abs_power(3.0), 40), 64)]:
        x = generate(model, n, 4000, 13).paths
        du = d_u_yn(x, e, model)
        s2 = sigma_n_squared(model, e, n)
        assert abs(du.mean() - s2) <= 4 * du.std(ddof=1) / math.sqrt(du.size)


def test_bound_report_fields():
    n = 64
    x = generate(FGN06, n, 300, 14).paths
    s = math.sqrt(sigma_n_squared(FGN06, H2, n))
    y = compute_yn(x, H2).values
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        rep = bound_report(n, y, d_u_yn(x, H2, FGN06), d_u2_yn(x, H2, FGN06), s, H2)
    assert rep.num_paths == 300 and rep.a4_omitted
    assert rep.tv_upper_prop31_alt == pytest.approx(rep.tv_upper_prop31.value / 2)
    assert rep.tv_upper_prop32_partial == pytest.approx(
        tv_upper_prop32_partial(rep.var_du.value, rep.a2.value, rep.a3.value, s))
    assert rep.tv_upper_chaos is not None
    d = rep.to_dict()
    assert d["tv_upper_prop33"]["value"] == rep.tv_upper_prop33.value
    assert rep.clamped(3.0) == 1.0 and rep.clamped(-1.0) == 0.0


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(0.01, 10), min_size=2, max_size=40), st.floats(0.2, 3))
def test_bounds_nonnegative(du, s):
    du = np.array(du)
    assert tv_upper_prop31(du, s).value >= 0
    assert tv_upper_prop33(du, du[::-1], s).value >= 0
