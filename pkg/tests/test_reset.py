import math
import warnings

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st
from pytest import approx

from afz.converter import ConverterParams, OperatingPoint
from afz.errors import DutyOutOfRange, MissingLossParams, NumericalError
from afz.fits import TABLE_IX, relative_errors, table_ix_operating_point
from afz.reset import (MODELS, energy_residuals, estimate_conduction_losses, interval_times,
                       ripple, solve_reset, stresses, synthesize_waveforms)

PROTO = ConverterParams.prototype()


@st.composite
def ccm_points(draw, p=PROTO, D_hi=0.60):
    V_i = draw(st.floats(15.0, 29.3))
    D = draw(st.floats(0.2, D_hi))
    P = draw(st.floats(80.0, 225.0))
    op = OperatingPoint.create(V_i, D, P, p.n)
    # output range of the design envelope
    assume(12.0 <= op.V_o <= 40.4)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        assume(not ripple(p, op).dcm)
    return op


def _solve(p, op, model):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return solve_reset(p, op, model)


@given(ccm_points(), st.sampled_from(MODELS))
def test_energy_balance_residual(op, model):
    try:
        sol = _solve(PROTO, op, model)
    except NumericalError:
        # the literal balance has no admissible root at some points
        assume(False)
    assert np.max(np.abs(sol.residuals)) < 1e-9
    assert np.max(np.abs(energy_residuals(PROTO, op, sol))) < 1e-9


@given(ccm_points())
def test_interval_ordering(op):
    sol = _solve(PROTO, op, "circuit")
    t = interval_times(PROTO, op, sol).as_tuple()
    assert all(b >= a for a, b in zip(t, t[1:]))
    assert t[0] == 0.0 and t[-1] == approx(PROTO.T_sw)
    assert sol.V_Cd_t3 >= sol.V_Cd_t2
    # at low V_i and high current the leakage energy biases i_Lm negative all period
    assert sol.I_Lm_min < 0 and sol.I_Lm_min < sol.I_Lm_max


@pytest.mark.parametrize("model", MODELS)
def test_lossless_symmetric_reset(model):
    # without leakage or switch capacitance the reset is a clean half resonance
    p = ConverterParams.ideal(L_kpri=0.0, L_ksec=0.0, C_oss=0.0)
    op = OperatingPoint.create(29.3, 0.5, 150.0, p.n)
    sol = _solve(p, op, model)
    dI_Lm = op.V_i * op.D / (p.L_m * p.f_sw)
    assert sol.dI_Lm == approx(dI_Lm, rel=1e-9)
    assert sol.I_Lm_max == approx(dI_Lm / 2, rel=1e-9)
    assert sol.I_Lm_min == approx(-dI_Lm / 2, rel=1e-9)
    assert sol.V_Cd_t3 == approx(sol.I_Lm_max * math.sqrt(p.L_m / p.C_d), rel=1e-9)
    assert abs(sol.V_Cd_t2) < 1e-3 and abs(sol.V_Cd_min) < 1e-9
    d = interval_times(p, op, sol).durations()
    assert d["t_OFF1"] == approx(d["t_OFF2"], rel=1e-5)
    assert d["t_OFF-T"] == 0.0 and d["t_ON-T"] == 0.0


def test_duty_beyond_limit():
    op = OperatingPoint.create(29.3, 0.689, 225.0, 1.0)
    with pytest.raises(DutyOutOfRange):
        solve_reset(PROTO, op)


def test_bad_model_name():
    op = OperatingPoint.create(29.3, 0.5, 225.0, 1.0)
    with pytest.raises(ValueError):
        solve_reset(PROTO, op, "spice")


def test_fitted_reset_network():
    sol = _solve(TABLE_IX.params(), table_ix_operating_point(), "paper")
    errs = relative_errors(sol)
    assert max(abs(v) for v in errs.values()) < 0.05
    assert np.max(np.abs(sol.residuals)) < 1e-9


@given(ccm_points())
def test_waveform_balances(op):
    # synthesized waveforms keep the periodic balances of the reactive parts
    p = ConverterParams.ideal(C_oss=0.0)
    sol = _solve(p, op, "circuit")
    wf = synthesize_waveforms(p, op, sol)
    T = wf.period
    assert abs(wf.mean("v_L")) * T < 1e-3 * op.V_i * T
    if not sol.notes:
        # the clamped turn-on is only approximated by the closed forms
        assert abs(wf.mean("v_Lm")) < 0.02 * op.V_i
    assert np.all(np.isfinite(wf["i_Cd"]))
    assert wf["i_L"].min() > 0


@given(ccm_points())
def test_stress_bounds(op):
    sol = _solve(PROTO, op, "circuit")
    st_ = stresses(PROTO, op, sol)
    assert st_.V_DS_max == approx(op.V_i + sol.V_Cd_t3)
    assert st_.V_D2_on == approx((1 + PROTO.n) * op.V_i)
    assert st_.I_D1 + st_.I_D2 >= op.I_L * 0.999


@given(ccm_points())
def test_conduction_efficiency_bounded(op):
    sol = _solve(PROTO, op, "circuit")
    wf = synthesize_waveforms(PROTO, op, sol)
    rep = estimate_conduction_losses(PROTO, op, sol, wf)
    assert 0 < rep.eta_cond <= 1
    assert all(v >= 0 for v in rep.breakdown.values())
    ideal = ConverterParams.ideal()
    assert estimate_conduction_losses(ideal, op, sol, wf).eta_cond == approx(1.0)


def test_missing_loss_params():
    op = OperatingPoint.create(29.3, 0.5, 225.0, 1.0)
    sol = _solve(PROTO, op, "circuit")
    wf = synthesize_waveforms(PROTO, op, sol)
    with pytest.raises(MissingLossParams):
        estimate_conduction_losses(ConverterParams.prototype(R_dson=None), op, sol, wf)
