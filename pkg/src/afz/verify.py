"""Cross-validation of the analytical layers against the simulator."""
from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .converter import (ConverterParams, OperatingPoint, cd_upper_bound, max_duty,
                        resonant_profile, validate_params, voltage_transfer)
from .errors import ApproximationWarning, DCMWarning
from .reset import solve_reset
from .sim.transient import SimSettings, ac_sweep, periodic_steady_state
from .smallsignal import build_model, compare_with_simulation

INTERVALS = ["t_ON", "t_OFF-T", "t_OFF1", "t_OFF2", "t_OFF3", "t_ON-T"]
RESET_KEYS = ("I_Lm_min", "V_Cd_min", "V_Cd_t3")


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    value: float
    limit: float
    detail: str = ""
    seconds: float = 0.0

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return f"{verdict}  {self.name}: {self.value:.4g} (limit {self.limit:.4g}) {self.detail}".rstrip()


def loss_free(p: ConverterParams) -> ConverterParams:
    return replace(p, R_dson=0.0, V_f1=0.0, V_f2=0.0, V_fd=0.0, R_pri=0.0, R_sec=0.0,
                   R_L_dc=0.0)


def reset_limit(p: ConverterParams) -> float:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ApproximationWarning)
        return max_duty(resonant_profile(validate_params(p)).f_res, p.f_sw)


def _settle(p, op, settings=SimSettings(), **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DCMWarning)
        return periodic_steady_state(p, op, settings=settings, **kw)


# ------------------------------------------------------------------ static gain


def transfer_ratio_points(n_values=(0.5, 1.0, 2.0), V_i_values=(15.0, 29.3),
                          D_values=(0.2, 0.33, 0.47, 0.6), I_string=5.569):
    return [(n, V_i, D, I_string) for n in n_values for V_i in V_i_values for D in D_values]


def check_transfer_ratio(points, tol=0.02, make_params=None) -> tuple:
    """Settled mean output voltage against ``(1 + n) D V_i`` with ideal parasitics.

    ``make_params(n)`` builds the parameter set; by default the loss-free
    prototype with no leakage (the simulator floors it) and no ``C_oss``.
    Returns the check and the per-point conduction sequences.
    """
    make_params = make_params or (lambda n: ConverterParams.ideal(n=n, L_kpri=0.0, L_ksec=0.0))
    t0 = time.perf_counter()
    worst, sequences, bad = 0.0, [], []
    for n, V_i, D, I in points:
        p = make_params(n)
        op = OperatingPoint.from_current(V_i, D, I, n)
        ss = _settle(p, op)
        err = abs(ss.waveforms.mean("v_o") / voltage_transfer(V_i, n, D) - 1)
        worst = max(worst, err)
        seq = ss.events.period_sequence()
        sequences.append(((n, V_i, D), seq))
        if err > tol:
            bad.append((n, V_i, D))
    detail = f"{len(points)} points" + (f", failing {bad}" if bad else "")
    return (Check("mean output voltage vs (1+n) D V_i", not bad, worst, tol, detail,
                  time.perf_counter() - t0), sequences)


def check_sequences(sequences) -> Check:
    bad = [pt for pt, seq in sequences if seq != INTERVALS]
    return Check("six-interval conduction sequence", not bad, float(len(bad)), 0.0,
                 f"{len(sequences)} points" + (f", off-sequence at {bad}" if bad else ""))


# ------------------------------------------------------------------ reset solver


def envelope_points(p: ConverterParams, count=10, seed=2024, margin=0.02,
                    V_i_range=(15.0, 29.3), V_o_range=(12.0, 40.4), P_range=(60.0, 225.0),
                    ccm_margin=0.05):
    """Random CCM operating points inside the design envelope with complete reset."""
    rng = np.random.default_rng(seed)
    D_lim = reset_limit(p) - margin
    out = []
    while len(out) < count:
        V_i = rng.uniform(*V_i_range)
        D = rng.uniform(0.2, min(D_lim, 0.75))
        P = rng.uniform(*P_range)
        V_o = voltage_transfer(V_i, p.n, D)
        if not V_o_range[0] <= V_o <= V_o_range[1]:
            continue
        op = OperatingPoint.create(V_i, D, P, p.n)
        dI_L = V_i * (1 + p.n) * (1 - D) * D / (p.L * p.f_sw)
        if op.I_L - dI_L / 2 <= ccm_margin * op.I_L:
            continue
        out.append(op)
    return out


def check_reset(p: ConverterParams, points, tol=0.02) -> Check:
    """Circuit-model reset quantities against the settled simulator."""
    t0 = time.perf_counter()
    p = loss_free(p)
    worst, bad = 0.0, []
    for op in points:
        sol = solve_reset(p, op)
        got = _settle(p, op).extract()
        for k in RESET_KEYS:
            ref = got[k]
            err = abs(getattr(sol, k) - ref) / abs(ref)
            worst = max(worst, err)
            if err > tol:
                bad.append((round(op.V_i, 3), round(op.D, 4), k))
    return Check("reset solver vs simulator", not bad, worst, tol,
                 f"{len(points)} points" + (f", failing {bad}" if bad else ""),
                 time.perf_counter() - t0)


# ------------------------------------------------------------------ conservation


def conservation(p: ConverterParams, op: OperatingPoint) -> dict:
    """Relative imbalances over one settled period of the loss-free circuit."""
    ss = _settle(loss_free(p), op)
    w = ss.waveforms
    t = w.time

    def integral(y):
        return float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(t)))

    def balance(y):
        return abs(integral(y)) / max(integral(np.abs(y)), 1e-300)

    P_in = op.V_i * (integral(w["i_in"]) + integral(w["i_Coss"])) / w.period
    P_out = integral(w["v_o"] ** 2) / op.R_load / w.period
    return {"volt-second L": balance(w["v_L"]), "charge C_d": balance(w["i_Cd"]),
            "charge C_o": balance(w["i_Co"]), "energy": abs(P_in - P_out) / P_out}


def check_conservation(p, points, tol=0.005) -> Check:
    t0 = time.perf_counter()
    worst, which = 0.0, ""
    for op in points:
        for k, v in conservation(p, op).items():
            if v > worst:
                worst, which = v, k
    return Check("per-period balances and energy audit", worst <= tol, worst, tol,
                 f"{len(points)} points, worst: {which}", time.perf_counter() - t0)


# ------------------------------------------------------------------ small signal


def small_signal_setup(p: ConverterParams, op: OperatingPoint, D_max_design=0.75):
    """Parameters for the small-signal comparison.

    The averaged model carries no leakage or reset network, so the simulator
    runs loss-free with no leakage. When the operating duty is beyond the
    reset limit of the given reset capacitor, the capacitor is replaced by
    the largest value that still resets at ``D_max_design``.
    """
    q = replace(loss_free(p), L_kpri=0.0, L_ksec=0.0, C_oss=0.0)
    if op.D >= reset_limit(q) - 0.01:
        q = replace(q, C_d=cd_upper_bound(D_max_design, q.f_sw, q.L_m))
    return q


def small_signal_settings(base: SimSettings = SimSettings()) -> SimSettings:
    """Settings for AC sweeps compared with the averaged model.

    The leakage floor adds a commutation resistance that ``Zo`` shows at low
    frequency, so sweeps use a lower floor; the coarser step bound buys back
    the time and moves the responses by hundredths of a dB.
    """
    return replace(base, leakage_floor=1e-5, stiffness=0.4)


SMALL_SIGNAL_SETTINGS = small_signal_settings()


def check_small_signal(p: ConverterParams, op: OperatingPoint, freqs, targets=("Gvd", "Gvv", "Zo"),
                       mag_tol=3.0, phase_tol=10.0, settings=SMALL_SIGNAL_SETTINGS,
                       min_window=500):
    """Analytical transfer functions against the AC sweep; one check per target."""
    q = small_signal_setup(p, op)
    _, tfs = build_model(q, op)
    steady = _settle(q, op, settings)
    checks, reports = [], {}
    for tg in targets:
        t0 = time.perf_counter()
        pts = ac_sweep(q, op, tg, freqs, steady=steady, settings=settings, min_window=min_window)
        rep = compare_with_simulation(tfs[tg], pts, q.f_sw)
        reports[tg] = (pts, rep)
        ok = rep.max_mag_db <= mag_tol and rep.max_phase_deg <= phase_tol
        checks.append(Check(f"{tg} vs AC sweep", ok, rep.max_mag_db, mag_tol,
                            f"dB; phase {rep.max_phase_deg:.3g} deg (limit {phase_tol:g})",
                            time.perf_counter() - t0))
    return checks, reports


def log_freqs(f_min, f_max, points):
    return np.geomspace(f_min, f_max, points)


def no_rhp_check(tf, f_max_factor=10.0, f_min=1.0, points=400) -> bool:
    """Constant numerator and phase inside (-180, 0] up to ``f_max_factor * f_o``."""
    if len(tf.numerator) != 1:
        return False
    f = np.geomspace(f_min, f_max_factor * tf.f_o, points)
    ph = np.degrees(np.unwrap(np.angle(tf.response(f))))
    return bool(np.all(ph <= 1e-9) and np.all(ph > -180.0))


def run_suite(cfg, quick=False, log=print) -> list:
    """The cross-validation suite for one configuration."""
    p = cfg.converter_params()
    checks = []
    n = p.n
    # static gain and conduction sequence at the configured turns ratio
    pts = transfer_ratio_points(n_values=(n,), D_values=(0.2, 0.4, 0.6) if quick
                                else (0.2, 0.33, 0.47, 0.6))
    c, seqs = check_transfer_ratio(pts, make_params=lambda k: replace(
        loss_free(p), n=k, L_kpri=0.0, L_ksec=0.0, C_oss=0.0))
    for ch in (c, check_sequences(seqs)):
        log(ch.line())
        checks.append(ch)
    env = envelope_points(p, count=3 if quick else 10)
    for ch in (check_reset(p, env), check_conservation(p, env[:3])):
        log(ch.line())
        checks.append(ch)
    if cfg.has("operating-point"):
        op = cfg.operating_point()
        sw = cfg.get("sweep", "f_min"), cfg.get("sweep", "f_max"), cfg.get("sweep", "points")
        freqs = log_freqs(sw[0], sw[1], 4 if quick else sw[2])
        ss_checks, _ = check_small_signal(p, op, freqs,
                                          min_window=cfg.get("sweep", "min_window"))
        for ch in ss_checks:
            log(ch.line())
            checks.append(ch)
        _, tfs = build_model(p, op)
        ok = all(no_rhp_check(tfs[k]) for k in ("Gvd", "Gvv"))
        ch = Check("Gvd/Gvv minimum phase", ok, 0.0 if ok else 1.0, 0.0)
        log(ch.line())
        checks.append(ch)
    return checks


# ------------------------------------------------------------------ duty limit


def turn_on_diagnostic(p: ConverterParams, op: OperatingPoint) -> dict:
    """State of the reset network at gate turn-on on the settled orbit.

    An interrupted reset shows up as a missing idle interval and a reset
    capacitor still charged when the switch closes.
    """
    ss = _settle(p, op)
    dI_Lm = op.V_i * op.D / (p.L_m * p.f_sw)
    seq = ss.events.period_sequence()
    return {"i_Lm_on": ss.state.i_Lm, "i_Lm_ratio": abs(ss.state.i_Lm) / dI_Lm,
            "v_Cd_on": ss.state.v_Cd, "idle_interval": "t_OFF3" in seq, "sequence": seq}
