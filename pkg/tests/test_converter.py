import math

import pytest
from hypothesis import given
from hypothesis import strategies as st
from pytest import approx

from afz.converter import (ConverterParams, OperatingPoint, cd_upper_bound, duty_for_target,
                           max_duty, power_split, resonant_profile, validate_params,
                           voltage_transfer)
from afz.errors import (ApproximationWarning, DomainError, DutyOutOfRange, NonPositiveValue,
                        ResetImpossible)

ratios = st.floats(0.05, 5.0)
duties = st.floats(0.01, 0.95)
volts = st.floats(1.0, 100.0)


def test_power_split_table():
    # (n, P_mag %, P_noMag %)
    rows = [(0.1, 9.10, 90.9), (0.5, 33.3, 66.7), (1, 50.0, 50.0), (1.5, 60.0, 40.0),
            (2, 66.7, 33.3)]
    for n, mag, nomag in rows:
        s = power_split(100.0, n)
        # one unit in the third digit: the printed 9.10 is 100 - 90.9, the ratio gives 9.09
        for got, want in ((s.P_mag, mag), (s.P_noMag, nomag)):
            unit = 10 ** (math.floor(math.log10(want)) - 2)
            assert abs(got - want) <= unit + 1e-12


@given(st.floats(0.0, 1e4), ratios)
def test_power_split_conserves(P, n):
    s = power_split(P, n)
    assert s.P_mag + s.P_noMag == approx(P, rel=1e-12, abs=1e-12)
    assert s.mag_ratio + s.noMag_ratio == approx(1.0)


@given(ratios, ratios)
def test_power_split_monotone_in_n(a, b):
    lo, hi = sorted((a, b))
    assert power_split(1.0, lo).mag_ratio <= power_split(1.0, hi).mag_ratio


@given(volts, ratios, duties)
def test_duty_inverts_transfer(V_i, n, D):
    V_o = voltage_transfer(V_i, n, D)
    assert duty_for_target(V_i, V_o, n) == approx(D, rel=1e-12)


@given(volts, ratios, duties, duties)
def test_transfer_monotone_in_duty(V_i, n, a, b):
    lo, hi = sorted((a, b))
    assert voltage_transfer(V_i, n, lo) <= voltage_transfer(V_i, n, hi)


def test_transfer_domain():
    with pytest.raises(DomainError):
        voltage_transfer(-1.0, 1.0, 0.5)
    with pytest.raises(DomainError):
        voltage_transfer(10.0, 1.0, 1.0)
    with pytest.raises(DutyOutOfRange):
        duty_for_target(29.3, 50.0, 1.0, D_max=0.75)


@given(st.floats(0.05, 0.95), st.floats(1e3, 1e6), st.floats(1e-6, 1e-2))
def test_cd_bound_is_the_reset_limit(D_max, f_sw, L_m):
    # the largest C_d that still resets at D_max puts the limit exactly there
    C_d = cd_upper_bound(D_max, f_sw, L_m)
    f_res = 1 / (2 * math.pi * math.sqrt(L_m * C_d))
    assert max_duty(f_res, f_sw) == approx(D_max, rel=1e-9)


def test_reset_impossible():
    with pytest.raises(ResetImpossible):
        max_duty(20e3, 50e3)


def test_prototype_limit():
    prof = resonant_profile(validate_params(ConverterParams.prototype()))
    assert max_duty(prof.f_res, 50e3) == approx(0.637, abs=1e-3)
    assert cd_upper_bound(0.75, 50e3, 485e-6) == approx(5.2227e-9, rel=1e-4)


def test_validation():
    with pytest.raises(NonPositiveValue) as err:
        validate_params(ConverterParams.prototype(L_m=-1.0))
    assert err.value.field == "L_m"
    with pytest.raises(NonPositiveValue):
        validate_params(ConverterParams.prototype(C_oss=-1e-12))
    with pytest.warns(ApproximationWarning):
        validate_params(ConverterParams.prototype(C_oss=5e-9))


@given(st.floats(0.0, 5e-6), ratios)
def test_leakage_split(L_k, n):
    p = ConverterParams.prototype(n=n).with_leakage(L_k)
    assert p.L_k == approx(L_k, abs=1e-18)
    assert p.L_kpri == approx(p.L_ksec / (1 + n) ** 2, abs=1e-18)


@given(volts, duties, st.floats(1.0, 500.0), ratios)
def test_operating_point_consistency(V_i, D, P, n):
    op = OperatingPoint.create(V_i, D, P, n)
    assert op.V_o * op.I_L == approx(P)
    assert op.V_o ** 2 / op.R_load == approx(P)
    back = OperatingPoint.from_current(V_i, D, op.I_L, n)
    assert back.P_o == approx(P)
