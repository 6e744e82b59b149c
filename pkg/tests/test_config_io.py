import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from pytest import approx

from afz.config import SCHEMA, bundled_text, parse_config, serialize
from afz.converter import ConverterParams, OperatingPoint
from afz.errors import (ConfigError, ConfigSyntaxError, MissingSection, NonPositiveValue,
                        UnitViolation, UnknownKey)
from afz.io import (ResultBundle, Table, bode_table, emit_csv, fmt, read_csv, waveform_table)
from afz.reset import solve_reset, synthesize_waveforms
from afz.smallsignal import bode, build_model
from afz.waveforms import CHANNELS

MINIMAL = "[converter]\n{body}\n[operating-point]\nv_i = 29.3\nd = 0.5\np_o = 225\n"
CONVERTER = ("n = 1\nf_sw = 50e3\nl = 68e-6\nl_m = 485e-6\nl_kpri = 410e-9\nl_ksec = 1.64e-6\n"
             "c_d = 11e-9\nc_o = 112e-6")


def test_prototype_round_trip(proto_cfg):
    text = bundled_text()
    assert serialize(parse_config(text)) == text
    assert proto_cfg.converter_params() == ConverterParams.prototype(L_k=820e-9)
    op = proto_cfg.operating_point()
    assert (op.V_i, op.D, op.R_load) == (29.3, 0.689, approx(7.255))


def test_units_and_prefixes():
    body = CONVERTER.replace("l = 68e-6", "l = 68 uH").replace("c_d = 11e-9", "c_d = 11nF")
    cfg = parse_config(MINIMAL.format(body=body))
    p = cfg.converter_params()
    assert p.L == approx(68e-6) and p.C_d == approx(11e-9)


@pytest.mark.parametrize("edit, error, line", [
    (("l_m = 485e-6", "l_m = -485e-6"), NonPositiveValue, 5),
    (("c_d = 11e-9", "c_d = 11 mH"), UnitViolation, 8),
    (("n = 1", "turns = 1"), UnknownKey, 2),
    (("f_sw = 50e3", "f_sw 50e3"), ConfigSyntaxError, 3),
    (("l = 68e-6", "l = fast"), ConfigSyntaxError, 4),
])
def test_errors_carry_line(edit, error, line):
    text = MINIMAL.format(body=CONVERTER.replace(*edit))
    with pytest.raises(error) as exc:
        parse_config(text)
    assert exc.value.line == line
    assert f"line {line}" in str(exc.value)


def test_syntax_error_column():
    text = MINIMAL.format(body=CONVERTER.replace("l = 68e-6", "l = x68"))
    with pytest.raises(ConfigSyntaxError) as exc:
        parse_config(text)
    assert exc.value.col == 5


def test_missing_sections():
    with pytest.raises(MissingSection) as exc:
        parse_config("")
    assert "converter" in exc.value.sections and "operating-point" in exc.value.sections
    with pytest.raises(MissingSection):
        parse_config("[converter]\n" + CONVERTER + "\n")


def test_unknown_section():
    with pytest.raises(UnknownKey):
        parse_config("[converterr]\n")


def test_operating_point_needs_one_load():
    text = MINIMAL.format(body=CONVERTER) + "r_load = 7\n"
    with pytest.raises(ConfigError):
        parse_config(text).operating_point()


def test_override_keeps_layout(proto_cfg):
    cfg = proto_cfg.override("operating-point", "d", 0.5)
    assert cfg.operating_point().D == 0.5
    assert serialize(cfg).count("\n") == serialize(proto_cfg).count("\n")
    assert cfg.digest() != proto_cfg.digest()
    with pytest.raises(UnknownKey):
        proto_cfg.override("converter", "q", 1)


converter_values = st.fixed_dictionaries({
    k: st.floats(1e-12, 1e6) for k, spec in SCHEMA["converter"].items() if spec.positive})


@given(converter_values, st.booleans())
def test_round_trip_property(values, comments):
    body = "\n".join(f"{k} = {v!r}" + ("  # note" if comments else "") for k, v in values.items())
    text = MINIMAL.format(body=body)
    cfg = parse_config(text)
    again = parse_config(serialize(cfg))
    assert again.values == cfg.values
    assert serialize(again) == serialize(cfg)


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_fmt_round_trips_nine_digits(x):
    assert float(fmt(x)) == approx(x, rel=1e-8, abs=0.0)


def test_waveform_csv_shape(tmp_path):
    p = ConverterParams.prototype()
    op = OperatingPoint.create(29.3, 0.5, 225.0, 1.0)
    wf = synthesize_waveforms(p, op, solve_reset(p, op)).resample(2048)
    bundle = ResultBundle.start("abc", "2026-01-01T00:00:00+00:00")
    bundle.add("waveforms", waveform_table(wf))
    (path,) = emit_csv(bundle, tmp_path, include_metadata=False)
    data = open(path, "rb").read()
    assert b"\r" not in data
    lines = data.decode().splitlines()
    assert len(lines) == 2049
    assert len(lines[0].split(",")) == 1 + len(CHANNELS) == 15
    assert all(not ln.endswith(",") for ln in lines)
    table = read_csv(data.decode())
    assert np.allclose([r[0] for r in table.rows], wf.time, rtol=1e-8)


def test_bode_csv_columns():
    p = ConverterParams.prototype()
    op = OperatingPoint.create(29.3, 0.5, 225.0, 1.0)
    _, tfs = build_model(p, op)
    rows = bode(tfs["Gvd"], [10.0, 100.0, 1000.0])
    assert bode_table(rows).columns == ("freq_hz", "mag_db", "phase_deg")
    five = bode_table(rows, rows)
    assert len(five.columns) == 5
    assert five.to_csv().count("\n") == 4


def test_emit_is_deterministic(tmp_path):
    def run(d):
        b = ResultBundle.start("h", "2026-01-01T00:00:00+00:00")
        b.add("t", Table(("a", "b"), ((1, 0.1), (2, 1 / 3))))
        b.warn("w")
        return open(emit_csv(b, d)[0], "rb").read()
    first, second = run(tmp_path / "a"), run(tmp_path / "b")
    assert first == second
    assert first.startswith(b"# config_hash: h\n")
    assert b"# warning: w\n" in first


def test_table_rejects_ragged_rows():
    with pytest.raises(ValueError):
        Table(("a", "b"), ((1,),))
