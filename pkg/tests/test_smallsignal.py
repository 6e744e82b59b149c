import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from pytest import approx

from afz.converter import ConverterParams, OperatingPoint
from afz.errors import FrequencyMismatch
from afz.smallsignal import (TARGETS, RationalTF, bode, build_model, compare_with_simulation,
                             unwrap_deg)
from afz.verify import no_rhp_check


@st.composite
def models(draw):
    p = ConverterParams.prototype(n=draw(st.floats(0.1, 3.0)), L=draw(st.floats(5e-6, 1e-3)),
                                  C_o=draw(st.floats(1e-6, 1e-3)))
    op = OperatingPoint.create(draw(st.floats(5.0, 60.0)), draw(st.floats(0.05, 0.9)),
                               draw(st.floats(5.0, 500.0)), p.n)
    return build_model(p, op), p, op


@given(models(), st.floats(0.0, 7.0), st.sampled_from(TARGETS))
def test_blocks_match_closed_form(model, log_f, target):
    (blocks, tfs), _, _ = model
    s = 2j * math.pi * 10 ** log_f
    assert complex(tfs[target](s)) == approx(complex(blocks.closed_loop(target, s)), rel=1e-9)


@given(models())
def test_output_impedance_at_resonance(model):
    # at w_o the filter branch cancels and only the load remains
    (_, tfs), _, op = model
    zo = tfs["Zo"]
    assert abs(complex(zo(1j * zo.omega_o))) == approx(op.R_load, rel=1e-9)


@given(models())
def test_dc_gains(model):
    (_, tfs), p, op = model
    assert complex(tfs["Gvd"](0.0)).real == approx((1 + p.n) * op.V_i)
    assert complex(tfs["Gvv"](0.0)).real == approx((1 + p.n) * op.D)
    assert abs(complex(tfs["Zo"](0.0))) == 0.0


def test_no_rhp_zero_random_draws():
    rng = np.random.default_rng(7)
    for _ in range(100):
        p = ConverterParams.prototype(n=rng.uniform(0.1, 3), L=10 ** rng.uniform(-5.3, -3),
                                      C_o=10 ** rng.uniform(-6, -3))
        op = OperatingPoint.create(rng.uniform(5, 60), rng.uniform(0.05, 0.9),
                                   rng.uniform(5, 500), p.n)
        _, tfs = build_model(p, op)
        for k in ("Gvd", "Gvv"):
            assert len(tfs[k].numerator) == 1
            assert len(tfs[k].zeros()) == 0
            assert no_rhp_check(tfs[k])
            assert np.all(tfs[k].poles().real < 0)


def test_bode_phase_unwrapped():
    tf = RationalTF("Gvd", 58.6, 2 * math.pi * 1800, 1 / (7.255 * 112e-6))
    freqs = np.geomspace(1, 1e6, 400)
    rows = bode(tf, freqs)
    ph = np.array([r.phase_deg for r in rows])
    assert ph[0] == approx(0.0, abs=0.1)
    assert ph[-1] == approx(-180.0, abs=0.5)
    assert np.all(np.diff(ph) <= 1e-9)
    # input order is preserved even when unsorted
    shuffled = bode(tf, freqs[::-1])
    assert [r.freq for r in shuffled] == list(freqs[::-1])
    assert shuffled[0].phase_deg == approx(rows[-1].phase_deg)


def test_unwrap_deg():
    assert np.allclose(unwrap_deg([170, -175, -160]), [170, 185, 200])


def test_compare_exclusions():
    tf = RationalTF("Gvv", 1.4, 2 * math.pi * 1800, 1200.0)
    f_sw = 50e3
    freqs = [100.0, 20e3, 25e3, 30e3]
    pts = [(f, complex(tf.response([f])[0])) for f in freqs]
    with pytest.warns(UserWarning):
        rep = compare_with_simulation(tf, pts, f_sw)
    assert list(rep.excluded) == [25e3, 30e3]
    assert list(rep.informational) == [False, True]
    assert rep.max_mag_db == approx(0.0, abs=1e-9)
    assert rep.max_phase_deg == approx(0.0, abs=1e-9)


def test_compare_phase_wraps():
    tf = RationalTF("Gvd", 1.0, 1.0, 1.0)
    f = 10.0
    h = complex(tf.response([f])[0]) * np.exp(1j * np.radians(359.0))
    rep = compare_with_simulation(tf, [(f, h)], 1e3)
    assert rep.max_phase_deg == approx(1.0, abs=1e-6)


def test_compare_rejects_bad_input():
    tf = RationalTF("Gvd", 1.0, 1.0, 1.0)
    with pytest.raises(FrequencyMismatch):
        compare_with_simulation(tf, [], 1e3)
    with pytest.raises(FrequencyMismatch):
        compare_with_simulation(tf, [(-1.0, 1 + 0j)], 1e3)
    with pytest.raises(FrequencyMismatch):
        compare_with_simulation(tf, [(1.0, complex(np.nan, 0))], 1e3)
