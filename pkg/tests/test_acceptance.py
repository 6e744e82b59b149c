"""Acceptance criteria 1 to 12, one test each, with a PASS/FAIL verdict line per criterion."""
import re
import time
import warnings
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner

from afz.cli import main
from afz.config import bundled_path
from afz.converter import ConverterParams, OperatingPoint, duty_for_target, power_split
from afz.fits import TABLE_IX, relative_errors, table_ix_operating_point
from afz.reset import (energy_residuals, estimate_conduction_losses, interval_times,
                       solve_reset, synthesize_waveforms)
from afz.smallsignal import build_model, compare_with_simulation
from afz.sim.transient import ac_sweep
from afz.verify import (SMALL_SIGNAL_SETTINGS, check_conservation, check_reset,
                        check_sequences, check_small_signal, check_transfer_ratio,
                        envelope_points, log_freqs, loss_free, no_rhp_check, reset_limit,
                        small_signal_setup, transfer_ratio_points, turn_on_diagnostic)

from conftest import ACCEPTANCE_LINES

CFG = str(bundled_path())

TABLE_VI = [
    (25, 18, 450, 33.33, 4.03), (18, 25, 450, 24.00, 5.30), (30, 15, 450, 40.00, 10.70),
    (45, 10, 450, 60.00, 30.70), (50, 9, 450, 66.67, 37.37), (41, 11, 451, 54.55, 25.25),
    (35, 13, 455, 46.15, 16.85), (24, 19, 456, 31.58, 2.28), (19, 24, 456, 25.00, 4.30),
    (38, 12, 456, 50.00, 20.70),
]

# (converter, parameter) -> printed (Scenario 0, Scenario 1); None where not printed
TABLE_VII = {
    ("non-shaded", "P_MIC (W)"): ("225", "225"),
    ("non-shaded", "V_in (V)"): ("29.3", "29.3"),
    ("non-shaded", "V_out (V)"): ("33.33", "40.404"),
    ("non-shaded", "I_string (A)"): ("6.75", "5.569"),
    ("shaded", "V_out (V)"): (None, "12.121"),
}

TABLE_III = [(0.1, "9.10", "90.9"), (0.5, "33.3", "66.7"), (1.0, "50.0", "50.0"),
             (1.5, "60.0", "40.0"), (2.0, "66.7", "33.3")]

# second half of the small-signal range, reported but not gated
INFO_FREQS = (13.5e3, 17e3, 21e3, 24e3)


def verdict(number, passed, text):
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {text}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def run_cli(*args):
    t0 = time.perf_counter()
    res = CliRunner().invoke(main, [str(a) for a in args])
    return res, time.perf_counter() - t0


def decimals(text):
    return len(text.split(".")[1]) if "." in text else 0


# -------------------------------------------------------------------- planner


def test_criterion_01_table_vi():
    run_cli("plan", CFG)  # warm the import path; the timing is for the command itself
    res, secs = run_cli("plan", CFG)
    assert res.exit_code == 0, res.output
    rows = [ln.split() for ln in res.output.splitlines() if re.match(r"^\d", ln)]
    worst = 0.0
    same_order = len(rows) == len(TABLE_VI)
    for got, (s, per, tot, v, dv) in zip(rows, TABLE_VI):
        same_order &= [int(x) for x in got[:3]] == [s, per, tot]
        worst = max(worst, abs(float(got[3]) - v), abs(float(got[4]) - dv))
    ok = same_order and worst <= 0.01 + 1e-12 and secs < 1.0
    verdict(1, ok, f"{len(rows)} rows in printed order={same_order}, worst |dV| {worst:.3g} V, "
                   f"{secs:.3f} s")
    assert ok


def test_criterion_02_table_vii():
    res, secs = run_cli("scenario", CFG)
    assert res.exit_code == 0, res.output
    table = {}
    for ln in res.output.splitlines():
        m = re.match(r"^(non-shaded|shaded)\s+(.+?\))\s+(\S+)\s+(\S+)$", ln)
        if m:
            table[(m[1], m[2])] = (m[3], m[4])
    worst = 0.0
    for key, printed in TABLE_VII.items():
        for want, got in zip(printed, table[key]):
            if want is None:
                continue
            # compared at the printed precision (33.3333 prints as 33.33)
            got_r = round(float(got), decimals(want))
            worst = max(worst, abs(got_r - float(want)))
    ok = worst <= 0.001 + 1e-12 and secs < 1.0
    verdict(2, ok, f"worst deviation at printed precision {worst:.3g}, {secs:.3f} s")
    assert ok


# ------------------------------------------------------------------ converter


def test_criterion_03_table_iii():
    worst = 0.0
    for n, mag, nomag in TABLE_III:
        s = power_split(100.0, n)
        for want, got in ((mag, s.mag_ratio * 100), (nomag, s.noMag_ratio * 100)):
            unit = 10.0 ** -decimals(want)
            worst = max(worst, abs(round(got, decimals(want)) - float(want)) / unit)
    # n = 0.1 is printed as 9.10 against an exact 9.0909; one unit is tolerated
    ok = worst <= 1.0 + 1e-9
    verdict(3, ok, f"worst deviation {worst:.2g} units of the third significant digit")
    assert ok


# ------------------------------------------------------------------ simulator


@pytest.fixture(scope="module")
def transfer():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        t0 = time.perf_counter()
        check, seqs = check_transfer_ratio(transfer_ratio_points())
    return check, seqs, time.perf_counter() - t0


def test_criterion_04_transfer_ratio(transfer):
    check, _, secs = transfer
    ok = check.passed and secs < 120
    verdict(4, ok, f"worst error {check.value * 100:.3g} % over {check.detail}, {secs:.1f} s")
    assert ok


def test_criterion_05_reset_solver(proto):
    pts = envelope_points(proto, count=10)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        check = check_reset(proto, pts)
    ok = check.passed and check.seconds < 300
    verdict(5, ok, f"worst error {check.value * 100:.3g} % over {check.detail}, "
                   f"{check.seconds:.1f} s")
    assert ok


def test_criterion_06_table_ix_fit():
    op = table_ix_operating_point()
    p = TABLE_IX.params()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        sol = solve_reset(p, op, "paper")
    err = max(abs(v) for v in relative_errors(sol).values())
    res = float(np.max(np.abs(energy_residuals(p, op, sol))))
    report = Path(__file__).with_name("table_ix_fit_report.md")
    ok = err <= 0.05 and res < 1e-9 and report.exists()
    verdict(6, ok, f"fitted C_d={TABLE_IX.C_d * 1e9:.4g} nF, C_oss={TABLE_IX.C_oss * 1e12:.4g} pF, "
                   f"L_k={TABLE_IX.L_k * 1e9:.4g} nH: worst error {err * 100:.3g} %, "
                   f"residual {res:.1e}")
    assert ok


def table_v_point():
    V_o, R = (1 + 1.0) * 0.689 * 29.3, 7.255
    return OperatingPoint.create(29.3, 0.689, V_o ** 2 / R, 1.0)


def test_criterion_07_small_signal(proto):
    p = proto
    op = table_v_point()
    freqs = log_freqs(10.0, p.f_sw / 4, 10)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        checks, _ = check_small_signal(p, op, freqs)
        # informational: the upper half of the range up to f_sw/2
        q = small_signal_setup(p, op)
        _, tfs = build_model(q, op)
        info = []
        for tg in ("Gvd", "Gvv", "Zo"):
            pts = ac_sweep(q, op, tg, INFO_FREQS, settings=SMALL_SIGNAL_SETTINGS)
            rep = compare_with_simulation(tfs[tg], pts, q.f_sw)
            info.append(f"{tg} {np.max(np.abs(rep.d_mag_db)):.2g} dB/"
                        f"{np.max(np.abs(rep.d_phase_deg)):.2g} deg")
    ok = all(c.passed for c in checks)
    parts = [f"{c.name.split()[0]} {c.value:.2g} dB/{c.detail.split()[2]} deg" for c in checks]
    verdict(7, ok, "; ".join(parts) + f" (limits 3 dB/10 deg); above f_sw/4, not gated: "
            + "; ".join(info))
    assert ok


def test_criterion_08_no_rhp_zero():
    rng = np.random.default_rng(8)
    bad = 0
    for _ in range(100):
        p = ConverterParams.prototype(
            n=rng.uniform(0.25, 3.0), L=rng.uniform(10e-6, 500e-6),
            C_o=rng.uniform(10e-6, 1e-3), L_m=rng.uniform(100e-6, 2e-3))
        V_i, D = rng.uniform(10.0, 40.0), rng.uniform(0.1, 0.7)
        op = OperatingPoint.create(V_i, D, rng.uniform(10.0, 300.0), p.n)
        _, tfs = build_model(p, op)
        bad += not (no_rhp_check(tfs["Gvd"]) and no_rhp_check(tfs["Gvv"]))
    verdict(8, bad == 0, f"{bad} of 100 random draws with a zero or phase outside (-180, 0]")
    assert bad == 0


def test_criterion_09_interval_sequence(transfer):
    _, seqs, _ = transfer
    check = check_sequences(seqs)
    verdict(9, check.passed, f"{check.value:.0f} off-sequence settled periods, {check.detail}")
    assert check.passed


def test_criterion_10_conservation(proto):
    pts = envelope_points(proto, count=4, seed=10)
    pts.append(OperatingPoint.create(29.3, 0.5, 150.0, 1.0))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        check = check_conservation(proto, pts)
    verdict(10, check.passed, f"worst imbalance {check.value * 100:.3g} % ({check.detail})")
    assert check.passed


def test_criterion_11_efficiency_bound(proto):
    D = duty_for_target(29.3, 600 / 18, proto.n)
    op = OperatingPoint.create(29.3, D, 225.0, proto.n)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        sol = solve_reset(proto, op)
        times = interval_times(proto, op, sol)
        wf = synthesize_waveforms(proto, op, sol, times)
        eta = estimate_conduction_losses(proto, op, sol, wf).eta_cond
    ok = 0.939 <= eta <= 1.0
    verdict(11, ok, f"eta_cond {eta:.4f} at D={D:.4f}, 225 W (bounds [0.939, 1])")
    assert ok


def test_criterion_12_duty_limit(proto, tmp_path):
    D_max = reset_limit(proto)
    D = D_max + 0.05
    cfg = tmp_path / "over.cfg"
    cfg.write_text(Path(CFG).read_text().replace("d = 0.689", f"d = {D:.4f}"))
    res, _ = run_cli("analyze", cfg)
    warned = res.exit_code == 0 and "exceeds the resonant-reset limit" in res.output
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        diag = turn_on_diagnostic(proto, OperatingPoint.create(29.3, D, 225.0, proto.n))
        # context, not gated: the same reading below the limit, and without leakage
        below = turn_on_diagnostic(proto, OperatingPoint.create(29.3, D_max - 0.05, 225.0,
                                                                proto.n))
        ideal = replace(loss_free(proto), L_kpri=0.0, L_ksec=0.0)
        ideal_on = {d: turn_on_diagnostic(ideal, OperatingPoint.create(29.3, d, 225.0, proto.n))
                    for d in (D_max - 0.05, D)}
    ok = warned and diag["i_Lm_ratio"] > 0.01
    lo, hi = ideal_on[D_max - 0.05], ideal_on[D]
    verdict(12, ok, f"analyze warns={warned}; at D={D:.3f} i_Lm at turn-on {diag['i_Lm_on']:.3g} A "
                    f"= {diag['i_Lm_ratio'] * 100:.3g} % of dI_Lm (at D_max-0.05: "
                    f"{below['i_Lm_ratio'] * 100:.3g} %, the 820 nH leakage dominates); "
                    f"no leakage: v_Cd at turn-on {lo['v_Cd_on']:.3g} V -> {hi['v_Cd_on']:.3g} V, "
                    f"idle interval {lo['idle_interval']} -> {hi['idle_interval']}")
    assert ok
