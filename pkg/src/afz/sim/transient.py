"""Event-driven piecewise-linear simulation of the AFZ circuit."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from ..converter import ConverterParams, OperatingPoint, ValidatedParams
from ..errors import (AliasWarning, DCMWarning, EventStorm, NonFinite, NoSettle,
                      UnreachableMode)
from ..waveforms import WaveformSet
from . import engine
from .network import (LABELS, N_STATE, NAMED_MODES, build_tables, mode_flags,
                      mode_name, z_index)

_STATE_FIELDS = ("i_Lm", "i_Lk", "i_L", "v_Cd", "v_Coss", "v_Co")


@dataclass(frozen=True)
class CircuitState:
    """Energy-storage state. ``i_Lk`` is the secondary (D1) leakage current."""
    i_Lm: float
    i_Lk: float
    i_L: float
    v_Cd: float
    v_Coss: float
    v_Co: float
    t: float = 0.0

    @classmethod
    def from_vector(cls, x, t=0.0) -> "CircuitState":
        return cls(*(float(v) for v in x[:N_STATE]), t=float(t))

    def vector(self) -> np.ndarray:
        return np.array([getattr(self, f) for f in _STATE_FIELDS])


@dataclass(frozen=True)
class ConductionMode:
    switch: bool
    D1: bool
    D2: bool
    Dd1: bool
    Dd2: bool

    @classmethod
    def from_index(cls, index) -> "ConductionMode":
        return cls(*(bool(f) for f in mode_flags(index)))

    @property
    def index(self) -> int:
        return (self.switch << 4) | (self.D1 << 3) | (self.D2 << 2) | (self.Dd1 << 1) | self.Dd2

    def __str__(self):
        return mode_name(self.index)


@dataclass(frozen=True)
class Event:
    time: float
    label: str
    mode: str
    cause: str


@dataclass(frozen=True)
class EventLog:
    events: tuple

    def labels(self) -> list:
        return [e.label for e in self.events]

    def period_sequence(self) -> list:
        """Distinct consecutive interval labels, rotated to start at ``t_ON``."""
        seq = []
        for lab in self.labels():
            if not seq or seq[-1] != lab:
                seq.append(lab)
        if len(seq) > 1 and seq[0] == seq[-1]:
            seq.pop()
        if "t_ON" in seq:
            k = seq.index("t_ON")
            seq = seq[k:] + seq[:k]
        return seq


_CAUSES = {engine.CAUSE_GATE_ON: "gate on", engine.CAUSE_GATE_OFF: "gate off",
           0: "D1", 1: "D2", 2: "Dd1", 3: "Dd2"}


def interval_label(mode, previous):
    """Map a conduction mode to its operating interval.

    ``previous`` disambiguates the two off-state modes with D1 conducting:
    directly after turn-off they are the leakage transfer, after the reset
    they belong to the idle interval (including its leakage ring).
    """
    S, D1, D2, Dd1, Dd2 = mode_flags(mode)
    if S:
        return "t_ON-T" if (Dd2 or D2) and previous != "t_ON" else "t_ON"
    if not D1:
        if Dd1:
            return "t_OFF1"
        if Dd2:
            return "t_OFF2"
        return "t_OFF3" if previous in ("t_OFF2", "t_OFF3") else "t_OFF1"
    if previous in ("t_ON", "t_ON-T", "t_OFF-T", None):
        return "t_OFF-T"
    return "t_OFF3"


@dataclass(frozen=True)
class SimSettings:
    steps_per_period: int = 2000
    max_events: int = 10_000
    diode_drops: bool = False
    # modulation stability bound: dt * omega_max <= this
    stiffness: float = 0.2
    # smallest total leakage as a fraction of L_m (see ``leakage_floor``)
    leakage_floor: float = 3e-5


@dataclass
class RawRun:
    status: int
    t: np.ndarray
    x: np.ndarray
    modes: np.ndarray
    ev_t: np.ndarray
    ev_m: np.ndarray
    ev_c: np.ndarray
    starts: np.ndarray
    final_mode: int
    worst_events: int
    dft: np.ndarray


LEAKAGE_FLOOR = SimSettings.leakage_floor


def leakage_floor(p: ConverterParams, ratio: float = LEAKAGE_FLOOR) -> ConverterParams:
    """Raise the total leakage to ``ratio * L_m`` when it is smaller.

    With zero leakage the commutating modes have no inductance and the mode
    equations become singular. About 15 nH on the 485 uH prototype leaves the
    averaged behaviour within half a percent; much larger values start to
    merge the turn-off intervals at low input voltage, much smaller ones
    only slow the integration (the leakage ring sets the step). The floor
    also adds a commutation resistance of order ``(1 + n)^2 f_sw L_k`` to
    the output impedance, which shows at low frequency where ``Zo`` itself
    is milliohms; small-signal checks use a lower floor.
    """
    floor = ratio * p.L_m
    if p.L_k >= floor:
        return p
    return p.with_leakage(floor)


class Simulator:
    """Compiled simulator bound to one parameter set and load."""

    def __init__(self, p, op: OperatingPoint, settings: SimSettings = SimSettings(),
                 dt_max: float | None = None):
        params = p.params if isinstance(p, ValidatedParams) else p
        self.p = params = leakage_floor(params, settings.leakage_floor)
        self.op = op
        self.settings = settings
        drops = (params.V_f1, params.V_f2, params.V_fd) if settings.diode_drops else (0.0, 0.0, 0.0)
        self.tables = build_tables(params, op.R_load, drops)
        T = params.T_sw
        steps = settings.steps_per_period
        if dt_max is not None:
            steps = max(steps, int(math.ceil(T / dt_max - 1e-9)))
        steps = max(steps, int(math.ceil(T * self.tables.omega_max / settings.stiffness)))
        self.steps_per_period = steps
        self.dt = T / steps
        self._scales()

    def _scales(self):
        p, op, tb = self.p, self.op, self.tables
        I_sc = max(op.I_L * (1 + p.n), op.V_i * op.D * p.T_sw / p.L_m, 1e-3)
        V_sc = max((1 + p.n) * op.V_i, op.V_o, 1e-3)
        self.x_scale = np.array([I_sc, I_sc, I_sc, V_sc, V_sc, V_sc])
        u_scale = np.array([op.V_i, I_sc, 1.0])
        n_modes, max_c = tb.Cx.shape[0], tb.Cx.shape[1]
        self.cons_scale = np.ones((n_modes, max_c))
        self.Q = np.zeros((n_modes, N_STATE, max_c))
        self.mon_tol = np.zeros((n_modes, 4))
        self.rate_tol = np.zeros((n_modes, 4))
        for k in range(n_modes):
            nc = tb.n_cons[k]
            if nc:
                C = tb.Cx[k, :nc]
                self.cons_scale[k, :nc] = np.abs(C) @ self.x_scale + np.abs(tb.Cu[k, :nc]) @ u_scale
                # minimum weighted-norm correction onto the constraint set
                Cs = C * self.x_scale[None, :]
                self.Q[k, :, :nc] = self.x_scale[:, None] * np.linalg.pinv(Cs, rcond=1e-10)
            flags = mode_flags(k)[1:]
            for j, on in enumerate(flags):
                scale = I_sc if on else V_sc
                self.mon_tol[k, j] = 1e-7 * scale
                self.rate_tol[k, j] = 1e-6 * scale * p.f_sw

    def initial_state(self) -> np.ndarray:
        """Averaged-model guess: filters at their DC values, reset capacitor empty."""
        op, p = self.op, self.p
        # start in the idle interval: D1 carries the load current
        return np.array([0.0, op.I_L, op.I_L, 0.0, 0.0, op.V_o])

    def run(self, x0, n_periods, n_record=0, t0=0.0, mod_kind=engine.MOD_NONE,
            mod_amp=0.0, mod_omega=0.0, mod_phase=0.0, n_dft=0) -> RawRun:
        tb = self.tables
        cap = n_record * (self.steps_per_period + 400) + 16
        ev_cap = n_record * 400 + 16
        rec_t = np.empty(cap)
        rec_x = np.empty((cap, N_STATE))
        rec_m = np.empty(cap, dtype=np.int64)
        ev_t = np.empty(ev_cap)
        ev_m = np.empty(ev_cap, dtype=np.int64)
        ev_c = np.empty(ev_cap, dtype=np.int64)
        starts = np.empty((n_periods + 1, N_STATE))
        dft = np.zeros(4)
        while True:
            status, n_rec, n_ev, mode, worst = engine.run_periods(
                np.asarray(x0, dtype=float), float(t0), int(n_periods), int(n_record),
                self.p.T_sw, self.op.D, self.steps_per_period, self.op.V_i,
                tb.A, tb.B, tb.Bd, tb.Mx, tb.Mu, tb.Md, tb.Cx, tb.Cu, self.Q, tb.n_cons, tb.valid,
                tb.order_on, tb.order_off, self.mon_tol, self.cons_scale, self.rate_tol,
                int(mod_kind), float(mod_amp), float(mod_omega), float(mod_phase),
                self.settings.max_events, rec_t, rec_x, rec_m, ev_t, ev_m, ev_c, starts,
                int(n_dft), dft)
            if status != engine.ERR_OVERFLOW:
                break
            # a chattering period needs more room than budgeted
            ev_cap *= 4
            cap += ev_cap * 2
            rec_t = np.empty(cap)
            rec_x = np.empty((cap, N_STATE))
            rec_m = np.empty(cap, dtype=np.int64)
            ev_t = np.empty(ev_cap)
            ev_m = np.empty(ev_cap, dtype=np.int64)
            ev_c = np.empty(ev_cap, dtype=np.int64)
            dft[:] = 0.0
        if status == engine.ERR_STORM:
            raise EventStorm(f"more than {self.settings.max_events} events in one period "
                             f"(mode {mode_name(mode)}, t={dft[3]:.9g} s, "
                             f"x={np.array2string(starts[-1], precision=6)})")
        if status == engine.ERR_NONFINITE:
            raise NonFinite("state became non-finite")
        if status == engine.ERR_NO_MODE:
            raise UnreachableMode(
                f"no conduction mode is consistent with the state at t={dft[3]:.9g} s "
                f"after mode {mode_name(mode)}: x={np.array2string(starts[-1], precision=6)}")
        return RawRun(status, rec_t[:n_rec].copy(), rec_x[:n_rec].copy(), rec_m[:n_rec].copy(),
                      ev_t[:n_ev].copy(), ev_m[:n_ev].copy(), ev_c[:n_ev].copy(),
                      starts, mode, worst, dft)

    # ------------------------------------------------------------------ outputs
    def inputs(self, t):
        return np.array([self.op.V_i, 0.0, 1.0])

    def derivatives(self, x, mode) -> np.ndarray:
        tb = self.tables
        if not tb.valid[mode]:
            raise UnreachableMode(f"mode {mode_name(mode)} is not a consistent network state")
        u = self.inputs(0.0)
        return tb.A[mode] @ x + tb.B[mode] @ u

    def waveforms(self, raw: RawRun) -> WaveformSet:
        p, tb = self.p, self.tables
        u = self.inputs(0.0)
        n = p.n
        idx = {k: z_index(k) for k in ("v_X", "v_W", "v_Y", "v_Z", "i_S", "i_D2",
                                       "i_Dd1", "i_Dd2", "i_WX")}
        N = raw.t.shape[0]
        z = np.empty((N, tb.models[0].Kx.shape[0]))
        for mode in np.unique(raw.modes):
            sel = raw.modes == mode
            m = tb.models[mode]
            z[sel] = raw.x[sel] @ m.Kx.T + u @ m.Ku.T
        x = raw.x
        v_X = z[:, idx["v_X"]]
        v_P = v_X - p.L_kpri * (z[:, 0] + (1 + n) * z[:, 1])
        ch = {
            "i_L": x[:, 2],
            "v_L": z[:, idx["v_Z"]] - x[:, 5],
            "i_Lm": x[:, 0],
            "v_Lm": v_P,
            "i_Cd": p.C_d * z[:, 3],
            "v_Cd": x[:, 3],
            "i_S": z[:, idx["i_S"]],
            "v_DS": self.op.V_i - v_X,
            "i_D1": x[:, 1],
            "v_D1": z[:, idx["v_Z"]] - z[:, idx["v_Y"]],
            "i_D2": z[:, idx["i_D2"]],
            "v_D2": z[:, idx["v_Z"]],
            "i_Dd1": z[:, idx["i_Dd1"]],
            "i_Dd2": z[:, idx["i_Dd2"]],
            # extra channels used by the audits
            "v_o": x[:, 5],
            "i_Co": x[:, 2] - x[:, 5] / self.op.R_load,
            "i_in": z[:, idx["i_S"]],
            "i_Coss": p.C_oss * z[:, 4],
        }
        return WaveformSet.build(raw.t, ch)

    def event_log(self, raw: RawRun) -> EventLog:
        events = []
        previous = None
        for t, m, c in zip(raw.ev_t, raw.ev_m, raw.ev_c):
            label = interval_label(int(m), previous)
            events.append(Event(time=float(t), label=label, mode=mode_name(int(m)),
                                cause=_CAUSES.get(int(c), str(c))))
            previous = label
        return EventLog(tuple(events))

    def weighted_delta(self, a, b) -> float:
        return float(np.max(np.abs(np.asarray(a) - np.asarray(b)) / self.x_scale))


# ---------------------------------------------------------------------- API


def derivatives(state: CircuitState, mode: ConductionMode, p, op: OperatingPoint) -> np.ndarray:
    """State rate for a frozen conduction mode, ordered like ``CircuitState``."""
    sim = Simulator(p, op)
    return sim.derivatives(state.vector(), mode.index)


@dataclass(frozen=True)
class TransientResult:
    waveforms: WaveformSet
    events: EventLog
    final_state: CircuitState
    period_starts: np.ndarray


def run_transient(p, op: OperatingPoint, n_periods: int = 200, dt_max: float | None = None,
                  x0=None, n_record: int = 1, settings: SimSettings = SimSettings()):
    """Integrate ``n_periods`` switching periods; the last ``n_record`` are returned.

    Returns ``(WaveformSet, EventLog, CircuitState)``.
    """
    sim = Simulator(p, op, settings, dt_max=dt_max)
    x0 = sim.initial_state() if x0 is None else np.asarray(x0, dtype=float)
    raw = sim.run(x0, n_periods, n_record=min(n_record, n_periods))
    final = CircuitState.from_vector(raw.starts[-1], t=n_periods * sim.p.T_sw)
    return sim.waveforms(raw), sim.event_log(raw), final


@dataclass(frozen=True)
class SteadyState:
    state: CircuitState
    waveforms: WaveformSet
    events: EventLog
    periods: int
    delta: float
    dcm: bool

    def extract(self) -> dict:
        """Reset quantities observed over the settled period."""
        w = self.waveforms
        t2 = None
        for a, b in zip(self.events.events, self.events.events[1:]):
            if a.label == "t_OFF-T" and b.label == "t_OFF1":
                t2 = b.time
                break
        V_t2 = float(np.interp(t2, w.time, w["v_Cd"])) if t2 is not None else math.nan
        return {
            "I_Lm_min": float(np.min(w["i_Lm"])),
            "I_Lm_max": float(np.max(w["i_Lm"])),
            "V_Cd_min": float(np.min(w["v_Cd"])),
            "V_Cd_t2": V_t2,
            "V_Cd_t3": float(np.max(w["v_Cd"])),
            "I_Lm_turn_on": float(self.state.i_Lm),
        }


def _shoot(sim: Simulator, x, tol=1e-9, iterations=8):
    """Newton on the one-period map ``x -> Phi(x)`` with a finite-difference Jacobian.

    A full step can land on a state with no consistent conduction mode or a
    worse mismatch; the step is then halved. The best state seen is returned.
    """
    scale = sim.x_scale
    fx = sim.run(x, 1).starts[-1]
    err = np.max(np.abs(fx - x) / scale)
    for _ in range(iterations):
        if err < tol:
            break
        F = fx - x
        J = np.empty((N_STATE, N_STATE))
        for j in range(N_STATE):
            h = 1e-6 * scale[j]
            xp = x.copy()
            xp[j] += h
            J[:, j] = (sim.run(xp, 1).starts[-1] - fx) / h
        step, *_ = np.linalg.lstsq((J - np.eye(N_STATE)) / scale[:, None], F / scale, rcond=1e-9)
        lam = 1.0
        for _ in range(6):
            x_new = x - lam * step
            try:
                f_new = sim.run(x_new, 1).starts[-1] if np.all(np.isfinite(x_new)) else None
            except (UnreachableMode, EventStorm, NonFinite):
                f_new = None
            if f_new is not None:
                e_new = np.max(np.abs(f_new - x_new) / scale)
                if e_new < err:
                    break
            lam *= 0.5
        else:
            break
        stalled = e_new > 0.5 * err
        x, fx, err = x_new, f_new, e_new
        if stalled:
            break
    return x, err


def periodic_steady_state(p, op: OperatingPoint, tol: float = 1e-6, max_periods: int = 5000,
                          settings: SimSettings = SimSettings(), dt_max: float | None = None,
                          x0=None, shooting: bool = True, sim: Simulator | None = None) -> SteadyState:
    """Settle to the periodic orbit.

    Shooting provides the starting point; convergence is then confirmed by
    plain period-by-period iteration until the weighted change of the
    period-start state drops below ``tol``.
    """
    sim = sim or Simulator(p, op, settings, dt_max=dt_max)
    x = sim.initial_state() if x0 is None else np.asarray(x0, dtype=float)
    if shooting:
        # a few plain periods put the state on a realistic conduction sequence first
        x = sim.run(x, 20).starts[-1]
        # far from the orbit the conduction sequence still changes from period
        # to period and Newton stalls; plain periods in between bring it closer
        for _ in range(4):
            try:
                x, err = _shoot(sim, x, 0.1 * tol)
            except (UnreachableMode, EventStorm, NonFinite):
                # a Jacobian probe left the admissible set; iterate from where we are
                err = math.inf
            if err < 0.1 * tol:
                break
            x = sim.run(x, 100).starts[-1]
    done = 0
    delta = math.inf
    batch = 50
    while done < max_periods:
        k = min(batch, max_periods - done)
        raw = sim.run(x, k)
        deltas = [sim.weighted_delta(raw.starts[i + 1], raw.starts[i]) for i in range(k)]
        done += k
        hit = [i for i, d in enumerate(deltas) if d < tol]
        x = raw.starts[-1]
        delta = deltas[-1]
        if hit and deltas[-1] < tol:
            break
    else:
        raise NoSettle(done, delta)
    raw = sim.run(x, 1, n_record=1)
    wf = sim.waveforms(raw)
    log = sim.event_log(raw)
    state = CircuitState.from_vector(x)
    dcm = bool(np.min(wf["i_L"]) <= 1e-9 * max(op.I_L, 1e-3))
    if dcm:
        warnings.warn("output inductor current reaches zero: discontinuous conduction",
                      DCMWarning, stacklevel=2)
    return SteadyState(state=state, waveforms=wf, events=log, periods=done, delta=delta, dcm=dcm)


# ---------------------------------------------------------------- AC sweep

_TARGETS = {"Gvd": engine.MOD_DUTY, "Gvv": engine.MOD_VI, "Zo": engine.MOD_IO}


@dataclass(frozen=True)
class BodePoint:
    freq: float
    response: complex

    @property
    def mag_db(self) -> float:
        return 20 * math.log10(abs(self.response))

    @property
    def phase_deg(self) -> float:
        return math.degrees(math.atan2(self.response.imag, self.response.real))


def default_amplitude(target, op: OperatingPoint) -> float:
    return {"Gvd": 0.005, "Gvv": 0.005 * op.V_i, "Zo": 0.005 * op.I_L}[target]


def ac_sweep(p, op: OperatingPoint, target: str, freqs, amplitude: float | None = None,
             n_cycles: int | None = None, settle_cycles: float = 0.0,
             settings: SimSettings = SimSettings(), steady: SteadyState | None = None,
             min_window: int = 500) -> list:
    """Small-signal response of ``v_o`` to a sinusoid on duty, input voltage or output current.

    Each frequency starts from the settled orbit, lets the output-filter
    transient decay (plus ``settle_cycles`` perturbation periods), then
    projects ``v_o`` on the injection frequency over whole perturbation
    periods. ``n_cycles=None`` picks the fewest cycles spanning at least
    ``min_window`` switching periods.
    """
    if target not in _TARGETS:
        raise ValueError(f"target must be one of {sorted(_TARGETS)}")
    sim = Simulator(p, op, settings)
    amp = default_amplitude(target, op) if amplitude is None else amplitude
    T = sim.p.T_sw
    if steady is None:
        steady = periodic_steady_state(p, op, sim=sim)
    x0 = steady.state.vector()
    out = []
    for f in freqs:
        if f >= sim.p.f_sw / 2:
            raise ValueError(f"frequency {f} Hz at or above f_sw/2")
        if f > sim.p.f_sw / 4:
            warnings.warn(f"{f:.6g} Hz exceeds f_sw/4; sampling effects grow", AliasWarning,
                          stacklevel=2)
        # whole switching periods covering whole perturbation periods
        per_cycle = 1.0 / f / T
        cycles = n_cycles if n_cycles is not None else max(1, math.ceil(min_window / per_cycle))
        n_meas = int(round(cycles * per_cycle))
        f_eff = cycles / (n_meas * T)
        n_settle = int(math.ceil(settle_cycles * per_cycle)) + _settle_periods(sim)
        w = 2 * math.pi * f_eff
        raw = sim.run(x0, n_settle + n_meas, mod_kind=_TARGETS[target], mod_amp=amp,
                      mod_omega=w, mod_phase=0.0, n_dft=n_meas)
        c, s, span = raw.dft[0], raw.dft[1], raw.dft[2]
        # v_hat = (2/T_w) * integral(v e^{-jwt}); injection amp*sin(wt) = amp * Im(e^{jwt})
        v_hat = 2.0 / span * complex(c, -s)
        out.append(BodePoint(freq=f_eff, response=v_hat / complex(0.0, -amp)))
    return out


def _settle_periods(sim: Simulator) -> int:
    """Switching periods for the output filter transient to decay by ~e^-8."""
    p, op = sim.p, sim.op
    alpha = 1.0 / (2 * op.R_load * p.C_o)
    return int(math.ceil(8.0 / alpha * p.f_sw))
