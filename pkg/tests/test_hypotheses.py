from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from helpers import space
from psiplap import nonlinearity as nlc
from psiplap.errors import ConfigError, NumericError
from psiplap.hypotheses import (
    SLACK,
    HypothesisConfig,
    audit_theorem,
    check_bracket_lower,
    check_bracket_upper,
    check_theta_negative,
    check_theta_positive,
    reevaluate_defect,
)

P = 2.0
SP = space(P, 0.8)
LAM_L, LAM_NEXT = 10.0, 40.0
EPS = 1.0


def cfg(**kw):
    return HypothesisConfig(epsilon=kw.pop("epsilon", EPS), **kw)


def pure(lam):
    return nlc.power(lam * P, P)  # F = lam |t|^p


def test_config_validation():
    for kw in (dict(epsilon=0.0), dict(growth_constant=0.0), dict(t_lo=10.0, t_max=5.0), dict(t_samples=2),
               dict(l=0), dict(xi=())):
        eps = kw.pop("epsilon", EPS)
        with pytest.raises(ConfigError):
            HypothesisConfig(epsilon=eps, **kw)
    with pytest.raises(ConfigError):
        check_bracket_lower(pure(20.0), SP, LAM_L, LAM_NEXT, cfg(V=lambda x: -np.ones_like(x)))


def test_bracket_lower_midpoint_holds():
    rep = check_bracket_lower(pure(25.0), SP, LAM_L, LAM_NEXT, cfg())
    assert rep.condition_id == "1.8" and rep.holds_on_samples and rep.worst_violation <= 0
    # with V > 0 the t = 0 row is strictly inside the bracket
    rep = check_bracket_lower(pure(25.0), SP, LAM_L, LAM_NEXT, cfg(V=lambda x: 1.0 + x))
    assert rep.holds_on_samples and rep.worst_violation < 0


def test_bracket_lower_overshoot_fails_at_t_max():
    c = cfg()
    rep = check_bracket_lower(pure(2 * LAM_NEXT), SP, LAM_L, LAM_NEXT, c)
    assert not rep.holds_on_samples and rep.side == "upper"
    assert abs(rep.witness[1]) == c.t_max


def test_bracket_upper_examples():
    eq = check_bracket_upper(pure(LAM_L), SP, LAM_L, LAM_NEXT, cfg())
    assert eq.condition_id == "1.10" and eq.holds_on_samples and eq.worst_violation == 0.0
    top = check_bracket_upper(pure(LAM_NEXT), SP, LAM_L, LAM_NEXT, cfg())
    assert not top.holds_on_samples and top.side == "upper"
    mid = check_bracket_upper(pure((LAM_L + LAM_NEXT) / 2), SP, LAM_L, LAM_NEXT, cfg(epsilon=5.0))
    assert mid.holds_on_samples


def test_theta_negative_examples():
    assert check_theta_negative(nlc.linear(1.0), cfg()).holds_on_samples
    pos = check_theta_negative(nlc.theta_positive(), cfg())
    assert not pos.holds_on_samples and pos.asymptotic_estimate == pytest.approx(1.0, abs=1e-3)
    z = check_theta_negative(nlc.zero(), cfg())
    assert not z.holds_on_samples and z.asymptotic_estimate == 0.0


def test_theta_positive_examples():
    pos = check_theta_positive(nlc.theta_positive(), cfg())
    assert pos.condition_id == "1.11" and pos.holds_on_samples and pos.asymptotic_estimate > 0
    lin = check_theta_positive(nlc.linear(1.0), cfg())
    assert not lin.holds_on_samples and lin.side == "growth"
    assert abs(lin.witness[1]) == cfg().t_max
    assert not check_theta_positive(nlc.zero(), cfg()).holds_on_samples


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_non_finite_theta():
    bad = nlc.Nonlinearity(f=lambda xi, t: np.exp(t), F=lambda xi, t: np.exp(t) - 1)
    with pytest.raises(NumericError):
        check_theta_negative(bad, cfg())


def test_audit_examples():
    lams = (LAM_L, LAM_NEXT)
    zero = audit_theorem(nlc.zero(), SP, "1.2", lams, cfg())
    assert not zero.hypotheses_pass and zero.expectation == "none"
    good = audit_theorem(nlc.bracket(25.0, P, 0.0), SP, "1.2", lams, cfg())
    assert good.hypotheses_pass and "solve" in good.recommendation
    with pytest.raises(ConfigError):
        audit_theorem(nlc.zero(), SP, "1.2", (LAM_L, LAM_L + 0.5), cfg())
    with pytest.raises(ConfigError):
        audit_theorem(nlc.zero(), SP, "2.1", lams, cfg())


catalog = st.sampled_from([
    pure(5.0), pure(25.0), pure(80.0), nlc.linear(3.0), nlc.zero(), nlc.theta_positive(),
    nlc.bracket(25.0, P, 3.0), nlc.resonant_sine(25.0, P, 2.0), nlc.affine(2.0),
])
checks = st.sampled_from(["1.8", "1.9", "1.10", "1.11"])


def run(cid, nl, c):
    if cid == "1.8":
        return check_bracket_lower(nl, SP, LAM_L, LAM_NEXT, c)
    if cid == "1.10":
        return check_bracket_upper(nl, SP, LAM_L, LAM_NEXT, c)
    return (check_theta_negative if cid == "1.9" else check_theta_positive)(nl, c)


@settings(max_examples=40)
@given(catalog, checks)
def test_witness_reproduces_defect(nl, cid):
    c = cfg(V=lambda x: 0.5 * np.ones_like(x))
    rep = run(cid, nl, c)
    again = reevaluate_defect(rep, nl, SP, (LAM_L, LAM_NEXT), c)
    assert again == pytest.approx(rep.worst_violation, rel=1e-12, abs=1e-12)


@settings(max_examples=40)
@given(catalog, checks)
def test_holds_iff_no_violation(nl, cid):
    rep = run(cid, nl, cfg())
    if rep.holds_on_samples:
        xi, t = rep.witness
        # the slack is relative to the magnitudes compared at the witness
        scale = 1.0 + abs(float(nl.primitive(xi, t))) + abs(float(nl.theta(xi, t))) + LAM_NEXT * abs(t) ** P + abs(t)
        assert rep.worst_violation <= SLACK * scale
    else:
        assert rep.worst_violation > 0


@settings(max_examples=30)
@given(catalog, checks, st.integers(3, 200), st.integers(0, 4))
def test_more_samples_never_turn_fail_into_pass(nl, cid, n0, extra):
    small = run(cid, nl, cfg(t_samples=n0))
    large = run(cid, nl, cfg(t_samples=n0 * 2**extra + 1))
    if not small.holds_on_samples:
        assert not large.holds_on_samples
        assert large.worst_violation >= small.worst_violation - 1e-12 * max(1.0, abs(small.worst_violation))


@settings(max_examples=30)
@given(st.sampled_from([nlc.bracket(25.0, P, 0.0), nlc.theta_positive(), nlc.linear(2.0), pure(3.0)]),
       st.floats(1.0, 1e3), st.floats(1.0, 100.0))
def test_limsup_non_increasing_in_t_lo(nl, t_lo, factor):
    a = check_theta_negative(nl, cfg(t_lo=t_lo)).asymptotic_estimate
    b = check_theta_negative(nl, cfg(t_lo=t_lo * factor)).asymptotic_estimate
    assert b <= a + 1e-12 * max(1.0, abs(a))


def test_lattice_is_nested():
    a = cfg(t_samples=100).t_lattice()
    b = cfg(t_samples=300).t_lattice()
    assert np.all(np.isin(a, b))
    assert 0.0 in a and np.all(np.isin(-a, a))
