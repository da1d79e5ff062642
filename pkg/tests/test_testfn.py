import math

import pytest

from mtlab.testfn import (AnnulusCapacitySpec, BlowupProfile,
                          annulus_capacity, appendix_integrals,
                          appendix_sweep, build_test_function,
                          check_lower_bound, verify_profile)


def test_profile_validation():
    with pytest.raises(ValueError):
        BlowupProfile(r_max=10.0)
    with pytest.raises(ValueError):
        BlowupProfile(n=100)


def test_profile_report():
    rep = verify_profile()
    assert rep["mass_err"] < 1e-8
    assert rep["phi0"] == 0.0
    assert rep["monotone"]
    assert 1.8 <= rep["order_slope"] <= 2.2
    assert rep["rhs_at_1_err"] < 1e-14


def test_capacity_validation():
    with pytest.raises(ValueError):
        AnnulusCapacitySpec(delta=0.1, Rr_eps=0.2, s_eps=1.0, i_eps=0.0)


def test_capacity_closed_form():
    spec = AnnulusCapacitySpec(delta=0.3, Rr_eps=1e-4, s_eps=1.3, i_eps=0.4)
    out = annulus_capacity(spec)
    L = math.log(spec.delta / spec.Rr_eps)
    want = 2.0 * math.pi * (spec.s_eps - spec.i_eps) ** 2 / L
    assert out["closed"] == pytest.approx(want, rel=1e-15)
    assert out["rel_err"] < 1e-10
    assert out["boundary_err"] < 1e-12


def test_capacity_degenerate():
    spec = AnnulusCapacitySpec(delta=0.2, Rr_eps=1e-5, s_eps=0.7, i_eps=0.7)
    out = annulus_capacity(spec)
    assert out["closed"] == 0.0
    assert abs(out["quadrature"]) < 1e-14


def test_build_test_function(green64):
    tf = build_test_function(1e-4, green64)
    assert abs(tf.norm_sq - 1.0) < 1e-10
    assert tf.continuity_jump < 1e-12
    # radial model is continuous at the glue radius R eps
    r_glue = tf.R * tf.eps
    lo = tf.radial(r_glue * (1 - 1e-12))
    hi = tf.radial(r_glue * (1 + 1e-12))
    assert abs(lo - hi) < 1e-8 * max(1.0, abs(hi))
    # numeric normalization constant stays close to the closed-form one
    assert abs(tf.c2 - tf.c2_paper) / tf.c2_paper < 0.05


def test_margin_positive(green64):
    chk = check_lower_bound(build_test_function(1e-3, green64))
    assert chk["margin"] > 0.0
    assert chk["integral"] == pytest.approx(chk["inner"] + chk["outer"])


def test_appendix_closed_forms(green64):
    row = appendix_integrals(1e-4, green64)
    assert row["grad_rel_err"] < 1e-10
    assert row["w_rel_err"] < 1e-10
    assert row["w2_rel_err"] < 1e-10


def test_appendix_constants_bounded(green64):
    out = appendix_sweep([1e-3, 1e-4, 1e-5], green64)
    assert out["K_B_ratio"] < 2.0
    assert out["K_C_ratio"] < 2.0
