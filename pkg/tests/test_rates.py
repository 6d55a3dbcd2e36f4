import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bmtv.errors import ConditionViolated, LatticeTooLarge, OutOfRegime, RankMismatch
from bmtv.hermite import FunctionSpec, expand
from bmtv.paths import CovarianceModel
from bmtv.rates import (
    SMOOTHNESS_TAGS,
    BoundCheckSpec,
    abs_rho_sum,
    bound_value,
    brascamp_lieb_check,
    check_sum_inequality,
    inequality_sides,
    lattice_sum,
    predicted_rate,
    smoothness_tag,
)

H2 = expand(FunctionSpec.hermite_single(2), 6)
H3 = expand(FunctionSpec.hermite_single(3), 6)
WHITE = CovarianceModel.white()


def S_direct(model, a, n):
    return sum(abs(model.rho(k)) ** a for k in range(-n, n + 1))


def test_predicted_rate_examples():
    r = predicted_rate(1, "D2_4", 1.5)
    assert (r.exponent, r.log_power) == (-0.5, 0.0)
    r = predicted_rate(2, "D6_8", 0.55)
    assert r.exponent == pytest.approx(-0.15) and r.log_power == 0.0 and not r.endpoint
    # n^{-alpha} branch needs alpha in (1/(d-1), 1/2): for alpha = 0.4 that is d = 4
    assert predicted_rate(4, "hermite", 0.4).exponent == pytest.approx(-0.4)
    # for d = 3 the interval is empty and alpha = 0.4 falls in (1/d, 1/(d-1)): n^{1-3 alpha}
    assert predicted_rate(3, "hermite", 0.4).exponent == pytest.approx(-0.2)


def test_predicted_rate_out_of_regime():
    with pytest.raises(OutOfRegime):
        predicted_rate(2, "D6_8", 0.5)
    with pytest.raises(OutOfRegime):
        predicted_rate(1, "D2_4", 1.0)
    with pytest.raises(OutOfRegime):
        predicted_rate(3, "D2_4", 0.9)
    with pytest.raises(OutOfRegime):
        predicted_rate(2, "bogus", 0.9)


BOUNDARIES = [1.0, 2 / 3, 3 / 5, 1 / 2]


@pytest.mark.parametrize("d", [1, 2, 3, 4, 5])
@pytest.mark.parametrize("tag", SMOOTHNESS_TAGS)
def test_table_totality(d, tag):
    """Defined exactly on alpha d > 1 within the table, including the printed endpoints."""
    pts = set(BOUNDARIES)
    if d >= 3:
        pts |= {1 / (d - 1), 1 / (2 * d - 3), 1 / d}
    probes = sorted({p + s for p in pts for s in (-1e-6, 0.0, 1e-6)} | {0.05, 0.3, 0.45, 0.9, 1.5, 3.0})
    for a in probes:
        if a * d <= 1.0:
            with pytest.raises(OutOfRegime):
                predicted_rate(d, tag, a)
            continue
        if d >= 3 and tag in ("D2_4", "D3_4", "D4_4", "D5_6", "D6_8"):
            with pytest.raises(OutOfRegime):
                predicted_rate(d, tag, a)
            continue
        lower = {"D2_4": 2 / 3, "D3_4": 0.5, "D4_4": 0.5, "D5_6": 0.5}.get(tag, 0.0)
        if d == 2 and a <= lower + 1e-13:
            with pytest.raises(OutOfRegime):
                predicted_rate(d, tag, a)
            continue
        r = predicted_rate(d, tag, a)
        assert r.log_power >= 0
        # the printed D^{3d-2,4} rows have positive exponents for d >= 4 and alpha < 1/3
        assert r.vacuous == (tag == "D3d2_4" and d >= 4 and a < 1 / 3 - 1e-12)
        assert r.vacuous or r.exponent <= 1e-12


def test_endpoint_flags():
    assert predicted_rate(2, "D6_8", 2 / 3).endpoint
    assert predicted_rate(2, "D2_4", 1.0).log_power == 1.5
    assert predicted_rate(3, "hermite", 0.5).endpoint
    assert not predicted_rate(2, "D6_8", 0.6).endpoint


@pytest.mark.parametrize("H", [0.55, 0.6, 0.65])
def test_p_variation_examples(H):
    a = 2 - 2 * H
    p25 = predicted_rate(2, smoothness_tag(FunctionSpec.abs_power(2.5)), a)
    assert p25.exponent == pytest.approx(3 * H - 2)
    p3 = predicted_rate(2, smoothness_tag(FunctionSpec.abs_power(3.0)), a)
    assert p3.exponent == pytest.approx(2 * H - 1.5)
    p4 = predicted_rate(2, smoothness_tag(FunctionSpec.abs_power(4.0)), a)
    assert p4.exponent == pytest.approx(H - 1)


def test_p4_example_upper_branch():
    H = 0.7
    assert predicted_rate(2, "D4_4", 2 - 2 * H).exponent == pytest.approx(4 * H - 3)


def test_smoothness_tags():
    assert smoothness_tag(FunctionSpec.hermite_single(2)) == "hermite"
    assert smoothness_tag(FunctionSpec.abs_power(2.5)) == "D2_4"
    assert smoothness_tag(FunctionSpec.polynomial([0, 1, 0, 1]), 1) == "D6_8"
    assert smoothness_tag(FunctionSpec.explicit_hermite([0, 0, 0, 1]), 3) == "D3d2_4"
    with pytest.raises(ValueError):
        smoothness_tag(FunctionSpec.polynomial([0, 1]))


def test_bound_value_examples():
    for n in (4, 100):
        assert bound_value("D2_4", WHITE, H2, n) == pytest.approx(n**-0.5)
    m = CovarianceModel.fgn(0.6)
    n = 1024
    assert bound_value("D6_8", m, H2, n) == pytest.approx(n**-0.5 * S_direct(m, 1.5, n) ** 2, rel=1e-12)
    m = CovarianceModel.power_law(0.8)
    n = 512
    e = expand(FunctionSpec.explicit_hermite([0, 0, 0, 1, 0.2]), 6)
    want = n**-0.5 * (S_direct(m, 2, n) * S_direct(m, 2, n) ** 0.5 + S_direct(m, 2, n) ** 0.5 * S_direct(m, 1, n) ** 0.5)
    assert bound_value("D3d2_4", m, e, n) == pytest.approx(want, rel=1e-12)
    assert bound_value("hermite", m, H3, n) == pytest.approx(n**-0.5 * S_direct(m, 2, n) ** 1.5, rel=1e-12)


def test_bound_value_rank_mismatch():
    with pytest.raises(RankMismatch):
        bound_value("D2_4", WHITE, H3, 10)
    with pytest.raises(RankMismatch):
        bound_value("D3d2_4", WHITE, H2, 10)
    with pytest.raises(RankMismatch):
        bound_value("hermite", WHITE, expand(FunctionSpec.explicit_hermite([0, 0, 1, 1]), 4), 10)


@pytest.mark.parametrize("H,e,tag", [(0.6, H2, "D6_8"), (0.6, H2, "D2_4"), (0.4, H3, "hermite"), (0.7, H2, "D6_8")])
def test_bound_value_eventually_nonincreasing(H, e, tag):
    m = CovarianceModel.fgn(H)
    vals = [bound_value(tag, m, e, n) for n in (64, 128, 256, 512, 1024, 2048)]
    assert all(b <= a * (1 + 1e-12) for a, b in zip(vals, vals[1:]))


@settings(max_examples=15, deadline=None)
@given(st.floats(0.3, 2.0), st.integers(1, 6), st.integers(2, 3),
       st.lists(st.integers(-1, 1), min_size=3, max_size=3))
def test_lattice_sum_matches_loops(alpha, n, M, v):
    model = CovarianceModel.power_law(alpha)
    v = v[:M]
    if not any(v):
        v[0] = 1
    factors = [([1] + [0] * (M - 1), 1.0), (v, 0.5)]
    want = 0.0
    for k in itertools.product(range(-n, n + 1), repeat=M):
        want += abs(model.rho(k[0])) * abs(model.rho(int(np.dot(v, k)))) ** 0.5
    assert lattice_sum(model, n, M, factors) == pytest.approx(want, rel=1e-12)


def test_lattice_too_large():
    with pytest.raises(LatticeTooLarge):
        lattice_sum(WHITE, 200, 4, [([1, 0, 0, 0], 1.0)])


def test_inequality_examples():
    for n in (5, 50):
        lhs, rhs = inequality_sides("equ6", WHITE, n, 2)
        assert lhs == 1.0 and rhs == 1.0
    m = CovarianceModel.fgn(0.8)
    lhs, rhs = inequality_sides("ho2", m, 100)
    assert lhs <= rhs
    t = check_sum_inequality("equ6", CovarianceModel.power_law(0.8), 2, (10, 20, 50, 100, 200))
    assert t.slope <= 0.02 and t.max_ratio == t.ratios.max()


@settings(max_examples=25, deadline=None)
@given(st.floats(0.2, 3.0), st.integers(1, 300))
def test_holder_forms_hold(alpha, n):
    m = CovarianceModel.power_law(alpha)
    for tag in ("ho2", "ho3"):
        lhs, rhs = inequality_sides(tag, m, n)
        assert lhs <= rhs * (1 + 1e-12)
    for M in (2, 3, 4):
        lhs, rhs = inequality_sides("ho1", m, n, M)
        assert lhs <= rhs * (1 + 1e-12)


def test_ho2_literal_diagnostic():
    t = check_sum_inequality("ho2", CovarianceModel.power_law(0.8), None, (10, 20))
    assert t.literal_rows and t.literal_rows[0][3] > 1.0
    assert t.max_ratio <= 1.0


def test_ratio_table_csv(tmp_path):
    t = check_sum_inequality("equ7", CovarianceModel.power_law(1.2), 2, (10, 20, 50))
    t.to_csv(tmp_path / "r.csv")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == "inequality,n,lhs,rhs,ratio" and len(lines) == 4


def test_inequality_argument_errors():
    with pytest.raises(ValueError):
        inequality_sides("nope", WHITE, 5)
    with pytest.raises(ValueError):
        inequality_sides("equ6", WHITE, 5, 2, v=[1, 0])
    with pytest.raises(ValueError):
        inequality_sides("equ23", WHITE, 5, 3, v=[1, 1, 0], w=[1, 1, 0])


def test_brascamp_lieb_examples():
    spec = BoundCheckSpec(2, ((1, 0), (0, 1)), (1.0, 1.0), (1.0, 1.0))
    lhs, rhs, ratio = brascamp_lieb_check(spec, WHITE, 10)
    assert (lhs, rhs, ratio) == (1.0, 1.0, 1.0)
    spec = BoundCheckSpec(2, ((1, 0), (0, 1), (1, -1)), (1.0, 1.0, 1.0), (2 / 3, 2 / 3, 2 / 3))
    assert spec.violations() == []
    m = CovarianceModel.power_law(0.8)
    ratios = [brascamp_lieb_check(spec, m, n)[2] for n in (10, 20, 50, 100, 200)]
    pts = np.log([10, 20, 50, 100, 200])
    assert np.polyfit(pts, np.log(ratios), 1)[0] <= 0.02
    bad = BoundCheckSpec(2, ((1, 0), (0, 1)), (1.0, 1.0), (2.0, 0.5))
    with pytest.raises(ConditionViolated):
        brascamp_lieb_check(bad, m, 5)


def test_abs_rho_sum():
    m = CovarianceModel.fgn(0.7)
    assert abs_rho_sum(m, 1.5, 30) == pytest.approx(S_direct(m, 1.5, 30), rel=1e-13)
    assert math.isclose(abs_rho_sum(WHITE, 2, 10), 1.0)
