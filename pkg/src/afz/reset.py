"""Resonant-reset steady state: energy balance, interval timing, stresses, waveforms.

Two formulations of the three-equation energy balance are provided.

``model="paper"``
    The balance as originally stated: leakage energy released at turn-off
    (primary leakage with the reflected load current, secondary leakage with
    the magnetizing current) charges the reset capacitor from its minimum to
    ``V_Cd_t2``; magnetizing energy then lifts it to ``V_Cd_t3``; the stored
    capacitor energy is returned as the negative magnetizing current. The
    minimum capacitor voltage comes from a quarter-period leakage resonance.

``model="circuit"`` (default)
    The same three balances written for the switched network itself, so
    they agree with the time-domain simulator. Differences from ``paper``:

    * the secondary leakage releases the output-inductor current, not the
      magnetizing current, and the leakage energy is released into the
      capacitor after it crosses zero (before that, the output diode is
      blocked and the capacitor energy goes to the output filter);
    * magnetizing-current changes are tracked by flux balance, including
      the primary-leakage drop while the switch conducts;
    * the idle-interval leakage ring (undamped in a lossless circuit) sets
      the capacitor voltage and secondary current at turn-on;
    * the turn-on transition is the resonance of the secondary-referred
      leakage with ``C_d``, driven by ``n V_i`` and clamped at ``-V_i``;
    * the leakage/filter-inductor divider and the commutation volt-seconds
      shift the realized output voltage, so the load current follows the
      load resistance of the operating point.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .converter import (ConverterParams, OperatingPoint, ValidatedParams, max_duty,
                        resonant_profile, validate_params)
from .errors import (DCMWarning, DutyOutOfRange, IntervalOverlap, MissingLossParams,
                     NoConvergence, NonPhysicalRoot)
from .waveforms import WaveformSet

MODELS = ("circuit", "paper")

_LOSS_FIELDS = ("R_dson", "V_f1", "V_f2", "V_fd", "R_pri", "R_sec", "R_L_dc")


def _params(p) -> ConverterParams:
    return p.params if isinstance(p, ValidatedParams) else p


# --------------------------------------------------------------------- ripple


@dataclass(frozen=True)
class Ripple:
    dI_L: float
    I_L: float
    I_L_min: float
    dI_Lm: float
    dcm: bool

    def __iter__(self):
        # unpacks as (dI_L, I_L, I_L_min, dI_Lm)
        return iter((self.dI_L, self.I_L, self.I_L_min, self.dI_Lm))


def ripple(p, op: OperatingPoint) -> Ripple:
    p = _params(p)
    dI_L = op.V_i * (1 + p.n) * (1 - op.D) * op.D / (p.L * p.f_sw)
    dI_Lm = op.V_i * op.D / (p.L_m * p.f_sw)
    I_L_min = op.I_L - dI_L / 2
    dcm = I_L_min <= 0
    if dcm:
        warnings.warn(f"I_L_min={I_L_min:.4g} A: the output inductor runs discontinuous",
                      DCMWarning, stacklevel=2)
    return Ripple(dI_L=dI_L, I_L=op.I_L, I_L_min=I_L_min, dI_Lm=dI_Lm, dcm=dcm)


# ------------------------------------------------------------------- solution


@dataclass(frozen=True)
class ResetSolution:
    I_Lm_min: float
    I_Lm_max: float
    dI_Lm: float
    V_Cd_min: float
    V_Cd_t2: float
    V_Cd_t3: float
    residuals: tuple
    model: str = "circuit"
    # capacitor voltage held through t_ON (equals V_Cd_min unless the idle ring dips lower)
    V_Cd_t1: float = math.nan
    iterations: int = 0
    # operating quantities the balance was evaluated with
    I_L: float = 0.0
    I_L_min: float = 0.0
    I_L_max: float = 0.0
    V_o: float = 0.0
    # timing of the fast transitions and the reset resonance
    t_OFFT: float = 0.0
    t_ONT: float = 0.0
    phase0: float = 0.0
    omega_0: float = 0.0
    # state at the end of the turn-off transition
    I_Lm_t2: float = 0.0
    notes: tuple = field(default=())

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("I_Lm_min", "I_Lm_max", "dI_Lm", "V_Cd_min",
                                              "V_Cd_t2", "V_Cd_t3")}


def _rel(lhs, rhs, ref):
    return (lhs - rhs) / max(abs(lhs), abs(rhs), ref)


# ---------------------------------------------------------------- paper model


def _paper_vcd_min(p, I_L_min, I_Lm_min):
    # the leakage resonance completes its quarter period, so the sine term is one
    Z_k = math.sqrt(p.L_k / p.C_d)
    return -(I_L_min - I_Lm_min / (1 + p.n)) * Z_k


def paper_residuals(p, op, I_Lm_min, V_t2, V_t3, V_min, I_L_max, dI_Lm):
    """Relative residuals of the three energy balances in their original form."""
    n, Vi = p.n, op.V_i
    I_Lm_max = I_Lm_min + dI_Lm
    ref = p.L_m * dI_Lm ** 2 + 1e-30
    lhs1 = (p.L_kpri * ((I_L_max * (1 + n) + I_Lm_max) ** 2 - I_Lm_max ** 2)
            + p.L_ksec * I_Lm_max ** 2)
    rhs1 = p.C_oss * ((V_t2 + Vi) ** 2 - Vi ** 2) + p.C_d * (V_t2 ** 2 - V_min ** 2)
    lhs2 = p.L_m * I_Lm_max ** 2
    rhs2 = p.C_oss * ((V_t3 + Vi) ** 2 - (V_t2 + Vi) ** 2) + p.C_d * (V_t3 ** 2 - V_t2 ** 2)
    lhs3 = p.L_m * I_Lm_min ** 2
    rhs3 = p.C_oss * ((V_t3 + Vi) ** 2 - Vi ** 2) + p.C_d * V_t3 ** 2
    return np.array([_rel(lhs1, rhs1, ref), _rel(lhs2, rhs2, ref), _rel(lhs3, rhs3, ref)])


def _newton(fun, x0, scale, tol=1e-12, max_iter=100):
    """Damped Newton with a forward-difference Jacobian on a scaled vector."""
    x = np.array(x0, dtype=float)
    f = fun(x)
    for k in range(max_iter):
        if np.max(np.abs(f)) < tol:
            return x, f, k
        J = np.empty((len(f), len(x)))
        for j in range(len(x)):
            h = 1e-7 * max(abs(x[j]), scale[j])
            xp = x.copy()
            xp[j] += h
            J[:, j] = (fun(xp) - f) / h
        try:
            step = np.linalg.solve(J, -f)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(J, -f, rcond=None)[0]
        norm0 = np.max(np.abs(f))
        lam = 1.0
        while lam > 1e-4:
            xn = x + lam * step
            fn = fun(xn)
            if np.all(np.isfinite(fn)) and np.max(np.abs(fn)) < (1 - 0.25 * lam) * norm0:
                break
            lam *= 0.5
        x, f = xn, fn
    if np.max(np.abs(f)) < tol:
        return x, f, max_iter
    raise NoConvergence(max_iter, tuple(float(v) for v in f))


def _newton_restarts(fun, x0, scale, I_ref, V_ref):
    """``_newton`` from ``x0``, then from a fixed fan of starts around the lossless reset.

    When the leakage energy is large the peak is reached inside the turn-off
    transfer (``V_t2`` close to ``V_t3``), far from the default start.
    """
    try:
        return _newton(fun, x0, scale)
    except NoConvergence as first:
        error = first
    for fI in (1.0, 1.5, 0.5, 2.0):
        for f3 in (1.0, 1.5, 2.5):
            for f2 in (0.9, 0.5, 0.05):
                start = np.array([-fI * I_ref, f2 * f3 * V_ref, f3 * V_ref])
                try:
                    return _newton(fun, start, scale)
                except NoConvergence:
                    continue
    raise error


def _solve_paper(p, op, max_outer=100, relax=0.5):
    r = ripple(p, op)
    dI_Lm = r.dI_Lm
    I_L_max = op.I_L + r.dI_L / 2
    # lossless symmetric reset as the starting point
    I0 = -dI_Lm / 2
    V3 = abs(I0) * math.sqrt(p.L_m / p.C_d)
    x = np.array([I0, 0.1 * V3, V3])
    scale = np.array([dI_Lm, V3, V3])
    V_min = 0.0
    total = 0
    for outer in range(max_outer):
        def fun(v, V_min=V_min):
            return paper_residuals(p, op, v[0], v[1], v[2], V_min, I_L_max, dI_Lm)
        # solve with V_t2 as a signed unknown so the root stays smooth
        x, f, k = _newton_restarts(fun, x, scale, abs(I0), V3)
        total += k
        x[1:] = np.abs(x[1:])   # both peak voltages enter squared
        target = _paper_vcd_min(p, r.I_L_min, x[0])
        new = V_min + relax * (target - V_min)
        if abs(new - V_min) < 1e-3 and abs(target - V_min) < 2e-3:
            V_min = target
            x, f, k = _newton(lambda v: paper_residuals(p, op, v[0], v[1], v[2], V_min,
                                                        I_L_max, dI_Lm), x, scale)
            x[1:] = np.abs(x[1:])
            break
        V_min = new
    else:
        raise NoConvergence(max_outer, tuple(float(v) for v in f))
    I_Lm_min, V_t2, V_t3 = x
    prof = resonant_profile(validate_params(p)) if p.L_k > 0 else None
    w0 = 1 / math.sqrt((p.L_m + p.L_kpri) * p.C_eq)
    t_q = math.pi / (2 * prof.omega_0k) if prof else 0.0
    phase0 = math.asin(min(1.0, max(-1.0, V_t2 / V_t3))) if V_t3 > 0 else 0.0
    return ResetSolution(
        I_Lm_min=I_Lm_min, I_Lm_max=I_Lm_min + dI_Lm, dI_Lm=dI_Lm, V_Cd_min=V_min,
        V_Cd_t2=V_t2, V_Cd_t3=V_t3, residuals=tuple(float(v) for v in f), model="paper",
        V_Cd_t1=V_min,
        iterations=total, I_L=op.I_L, I_L_min=r.I_L_min, I_L_max=I_L_max, V_o=op.V_o,
        t_OFFT=t_q, t_ONT=t_q, phase0=phase0, omega_0=w0, I_Lm_t2=I_Lm_min + dI_Lm)


# -------------------------------------------------------------- circuit model


@dataclass(frozen=True)
class _Network:
    """Leakage/magnetizing coupling constants of the autotransformer."""
    Lp: float        # L_m + L_kpri, the reset-resonance inductance
    L_B: float       # leakage seen by C_d with both output diodes on
    g: float         # d i_Lm / d flux under that condition
    a: float         # d i_sec / d flux from the primary drive while S is on
    b: float         # d i_sec / d flux from the secondary drive while S is on
    L_e: float       # secondary-referred leakage in series with L during t_ON
    k_eff: float     # effective primary drive ratio during t_ON

    @classmethod
    def of(cls, p):
        n = p.n
        M11 = p.L_m + p.L_kpri
        M12 = (1 + n) * p.L_kpri
        M22 = (1 + n) ** 2 * p.L_kpri + p.L_ksec
        det = M11 * M22 - M12 ** 2
        if p.L_k <= 0 or det <= 0:
            return cls(Lp=M11, L_B=0.0, g=0.0, a=0.0, b=math.inf, L_e=0.0, k_eff=1 + n)
        Minv = np.array([[M22, -M12], [-M12, M11]]) / det
        e = np.array([1.0, 1 + n])
        return cls(Lp=M11, L_B=1.0 / float(e @ Minv @ e), g=float(Minv[0] @ e),
                   a=float(Minv[1, 0]), b=float(Minv[1, 1]), L_e=M22 - M12 ** 2 / M11,
                   k_eff=1 + n - M12 / M11)


@dataclass
class _Outer:
    V_min: float
    v0: float          # capacitor voltage at turn-on
    cos_t: float       # ring phase at turn-on, cosine
    V_o: float
    t_ONT: float
    ont_vs: float      # integral of v_Z over the turn-on transition
    clamped: bool = False
    ring_min: float = 0.0


def _circuit_chain(p, op, net: _Network, o: _Outer, I_Lm4):
    """Turn-on state and currents at turn-off implied by ``I_Lm4`` and the outer state."""
    n, T, Vi = p.n, p.T_sw, op.V_i
    I_L = o.V_o / op.R_load
    i_kpri5 = I_Lm4 * o.cos_t
    i_Lm5 = I_Lm4 + net.g * net.L_B * (i_kpri5 - I_Lm4)
    # inductor current at turn-on (i5), after the turn-on transition (i6) and at
    # turn-off (i1); the three segments must average to the load current
    gain_A = (1 + n) * p.C_eq * o.V_min ** 2 / (2 * (1 + n) * I_L) if o.V_min < 0 else 0.0
    fall = (o.V_o * (1 - op.D) * T - gain_A) / p.L
    d_ont = (o.ont_vs - o.V_o * o.t_ONT) / p.L
    t_on = op.D * T - o.t_ONT
    shape = (d_ont * o.t_ONT / 2 + (d_ont + fall) / 2 * t_on + fall / 2 * (1 - op.D) * T) / T
    i5 = I_L - shape
    I_Lmax = i5 + fall
    I_Lmin = min(i5, i5 + d_ont)
    # flux on the primary over the gate-on time: V_i D T minus the primary leakage drop
    I_Lm_max = (i_Lm5 + (Vi * op.D * T - p.L_kpri * ((1 + n) * I_Lmax - i_kpri5)) / p.L_m) \
        / (1 + p.L_kpri / p.L_m)
    K0 = I_Lm_max + (1 + n) * I_Lmax
    dA = 0.0
    if o.V_min < 0 and K0 > 0:
        # capacitor ramps linearly to zero while D2 is blocked; L_m sees -v_Cd
        dA = p.C_eq * o.V_min ** 2 / (2 * K0 * p.L_m)
    I_LmA = I_Lm_max + dA
    K0 = K0 + dA
    gl = net.g * net.L_B
    I_Lm2 = (I_LmA - gl * K0) / (1 - gl)
    return dict(I_L=I_L, dI_L=I_Lmax - I_Lmin, I_Lmax=I_Lmax, I_Lmin=I_Lmin, i_L5=i5,
                I_Lm_max=I_Lm_max,
                K0=K0, I_Lm2=I_Lm2, i_kpri5=i_kpri5, i_Lm5=i_Lm5,
                i_sec5=(i_kpri5 - i_Lm5) / (1 + n))


def circuit_residuals(p, op, net, o: _Outer, I_Lm4, V_t2, V_t3):
    c = _circuit_chain(p, op, net, o, I_Lm4)
    ref = p.L_m * (op.V_i * op.D * p.T_sw / p.L_m) ** 2 + 1e-30
    C = p.C_eq
    lhs1 = net.L_B * (c["K0"] ** 2 - c["I_Lm2"] ** 2)
    rhs1 = C * V_t2 * abs(V_t2)
    E = net.Lp * c["I_Lm2"] ** 2 + C * V_t2 ** 2
    if c["I_Lm2"] >= 0:
        r2 = _rel(C * V_t3 ** 2, E, ref)
    else:
        # capacitor current reverses inside the turn-off transition, so the peak
        # is reached there, where the primary leakage current crosses zero
        r2 = _rel(C * V_t3 ** 2, C * V_t2 ** 2 + net.L_B * c["I_Lm2"] ** 2, ref)
    r3 = _rel(net.Lp * I_Lm4 * abs(I_Lm4), -E, ref)
    return np.array([_rel(lhs1, rhs1, ref), r2, r3]), c


def _turn_on(p, op, net, v0, u0, V_o):
    """Resonant turn-on transition from capacitor voltage ``v0`` with ``u0`` left to commutate.

    ``u0`` is the filter current not yet carried by the secondary. The filter
    inductor slope is included, which stiffens the resonance by ``1/L``.
    Returns ``(V_min, duration, integral of v_Z, clamped)``.
    """
    n, Vi = p.n, op.V_i
    if u0 <= 0 or not math.isfinite(net.b):
        return min(v0, 0.0) if u0 > 0 else v0, 0.0, 0.0, False
    C = p.C_d
    b = net.b + 1 / p.L
    # du/dt = b (v - v_star) with the secondary and filter slopes combined
    v_star = (net.b * n * Vi + net.a * Vi + (V_o - Vi) / p.L) / b
    w_t = math.sqrt(b / C)
    s0 = u0 / math.sqrt(b * C)
    w0 = v0 - v_star
    rho = math.hypot(w0, s0)
    psi0 = math.atan2(s0, w0)
    V_raw = v_star - rho
    if V_raw >= -Vi:
        tau = (math.pi - psi0) / w_t
        vs = (Vi + v_star) * tau - u0 / b
        return V_raw, tau, vs, False
    w_c = -Vi - v_star
    psi_c = math.acos(max(-1.0, min(1.0, w_c / rho)))
    tau1 = max(psi_c - psi0, 0.0) / w_t
    u_c = rho * math.sin(psi_c) * math.sqrt(b * C)
    vs = (Vi + v_star) * tau1 + (u_c - u0) / b
    # output node clamped at ground: the rest commutates against (1+n) V_i
    rate = net.a * Vi + net.b * (1 + n) * Vi + V_o / p.L
    return -Vi, tau1 + u_c / rate, vs, True


def _timing(p, net, c, V_t2, V_t3, V_min):
    """Turn-off transition length, reset phase and end of the reset."""
    C = p.C_eq
    K0 = c["K0"]
    t_A = C * abs(V_min) / K0 if (V_min < 0 and K0 > 0) else 0.0
    if net.L_B > 0:
        w_B = 1 / math.sqrt(net.L_B * C)
        t_B = math.acos(max(-1.0, min(1.0, c["I_Lm2"] / K0))) / w_B
    else:
        t_B = 0.0
    E = net.Lp * c["I_Lm2"] ** 2 + C * V_t2 ** 2
    R = math.sqrt(E / C)
    ratio = max(-1.0, min(1.0, V_t2 / R)) if R > 0 else 0.0
    phase0 = math.asin(ratio) if c["I_Lm2"] >= 0 else math.pi - math.asin(ratio)
    w0 = 1 / math.sqrt(net.Lp * C)
    return t_A + t_B, phase0, w0, t_A


def _solve_circuit(p, op, max_outer=100, relax=0.5, tol=1e-3):
    n, T, Vi = p.n, p.T_sw, op.V_i
    net = _Network.of(p)
    dI_Lm = Vi * op.D * T / p.L_m
    I0 = -dI_Lm / 2
    V3 = abs(I0) * math.sqrt(net.Lp / p.C_eq)
    x = np.array([I0, 0.1 * V3 + 1.0, V3])
    scale = np.array([dI_Lm, V3, V3])
    o = _Outer(V_min=0.0, v0=0.0, cos_t=0.0, V_o=op.V_o, t_ONT=0.0, ont_vs=0.0)
    total = 0
    w_r = 1 / math.sqrt(net.L_B * p.C_eq) if net.L_B > 0 else math.inf
    history = []
    for outer in range(max_outer):
        x, f, k = _newton_restarts(lambda v: circuit_residuals(p, op, net, o, *v)[0], x,
                                   scale, abs(I0), V3)
        total += k
        x[2] = abs(x[2])    # V_t3 enters squared
        I_Lm4, V_t2, V_t3 = x
        f, c = circuit_residuals(p, op, net, o, *x)
        t_offt, phase0, w0, t_A = _timing(p, net, c, V_t2, V_t3, o.V_min)
        t4 = op.D * T + t_offt + (math.pi - phase0) / w0
        if t4 > T:
            raise IntervalOverlap(op.D, t4, T)
        # idle-interval ring from v_Cd = 0 with the full magnetizing current in L_kpri
        if math.isfinite(w_r):
            theta = w_r * (T - t4)
            amp = I_Lm4 * math.sqrt(net.L_B / p.C_eq)
            v0 = amp * math.sin(theta)
            cos_t = math.cos(theta)
            ring_min = amp * (1.0 if theta >= math.pi / 2 else math.sin(theta))
        else:
            v0, cos_t, ring_min = 0.0, 1.0, 0.0
        i_kpri5 = I_Lm4 * cos_t
        i_Lm5 = I_Lm4 + net.g * net.L_B * (i_kpri5 - I_Lm4)
        i_sec5 = (i_kpri5 - i_Lm5) / (1 + n)
        u0 = c["i_L5"] - i_sec5
        V_min, t_ont, ont_vs, clamped = _turn_on(p, op, net, v0, u0, o.V_o)
        # realized output voltage from the switch-node volt-seconds
        span = op.D * T - t_ont
        gain_A = (1 + n) * p.C_eq * V_min ** 2 / (2 * c["K0"]) if V_min < 0 else 0.0
        den = T - net.L_e * span / (p.L + net.L_e)
        V_o = (net.k_eff * Vi * p.L * span / (p.L + net.L_e) + ont_vs + gain_A) / den
        target = _Outer(V_min=V_min, v0=v0, cos_t=cos_t, V_o=V_o, t_ONT=t_ont,
                        ont_vs=ont_vs, clamped=clamped, ring_min=ring_min)
        delta = abs(target.V_min - o.V_min)
        history.append(delta)
        dv = max(abs(target.V_o - o.V_o), abs(target.v0 - o.v0))
        if delta < tol and dv < tol and abs(target.cos_t - o.cos_t) < 1e-4:
            o = target
            x, f, k = _newton(lambda v: circuit_residuals(p, op, net, o, *v)[0], x, scale)
            total += k
            x[2] = abs(x[2])
            break
        o = _Outer(**{k_: (getattr(o, k_) + relax * (getattr(target, k_) - getattr(o, k_))
                          if isinstance(getattr(o, k_), float) else getattr(target, k_))
                      for k_ in o.__dataclass_fields__})
    else:
        raise NoConvergence(max_outer, tuple(history[-3:]))
    I_Lm4, V_t2, V_t3 = x
    f, c = circuit_residuals(p, op, net, o, *x)
    t_offt, phase0, w0, _ = _timing(p, net, c, V_t2, V_t3, o.V_min)
    notes = ("turn-on transition clamped at -V_i",) if o.clamped else ()
    if o.ring_min < o.V_min:
        notes += ("minimum set by the idle-interval ring",)
    return ResetSolution(
        I_Lm_min=I_Lm4, I_Lm_max=c["I_Lm_max"], dI_Lm=c["I_Lm_max"] - I_Lm4,
        V_Cd_min=min(o.V_min, o.ring_min), V_Cd_t1=o.V_min, V_Cd_t2=V_t2, V_Cd_t3=V_t3,
        residuals=tuple(float(v) for v in f),
        model="circuit", iterations=total, I_L=c["I_L"], I_L_min=c["I_Lmin"],
        I_L_max=c["I_Lmax"], V_o=o.V_o, t_OFFT=t_offt, t_ONT=o.t_ONT, phase0=phase0,
        omega_0=w0, I_Lm_t2=c["I_Lm2"], notes=notes)


def solve_reset(p, op: OperatingPoint, model: str = "circuit") -> ResetSolution:
    """Solve the three-equation reset energy balance for one operating point."""
    if model not in MODELS:
        raise ValueError(f"model must be one of {MODELS}")
    vp = p if isinstance(p, ValidatedParams) else validate_params(p)
    p = vp.params
    D_max = max_duty(resonant_profile(vp).f_res, p.f_sw)
    if op.D >= D_max:
        raise DutyOutOfRange(op.D, D_max)
    sol = _solve_paper(p, op) if model == "paper" else _solve_circuit(p, op)
    if not (sol.V_Cd_t3 >= 0 and sol.V_Cd_t3 >= sol.V_Cd_t2 - 1e-9 * abs(sol.V_Cd_t3)):
        raise NonPhysicalRoot(f"V_Cd_t3={sol.V_Cd_t3:.6g} V, V_Cd_t2={sol.V_Cd_t2:.6g} V")
    if not all(math.isfinite(v) for v in sol.as_dict().values()):
        raise NonPhysicalRoot("non-finite reset solution")
    if sol.I_L_min <= 0:
        warnings.warn("operating point leaves continuous conduction", DCMWarning, stacklevel=2)
    return sol


def energy_residuals(p, op, sol: ResetSolution) -> np.ndarray:
    """Re-evaluate the balance the solution was computed with."""
    p = _params(p)
    if sol.model == "paper":
        return paper_residuals(p, op, sol.I_Lm_min, sol.V_Cd_t2, sol.V_Cd_t3, sol.V_Cd_t1,
                               sol.I_L_max, sol.dI_Lm)
    net = _Network.of(p)
    # the outer state is not stored; rebuild the quantities the residuals depend on
    c = dict(K0=sol.I_Lm_max + (1 + p.n) * sol.I_L_max, I_Lm2=sol.I_Lm_t2)
    ref = p.L_m * (op.V_i * op.D * p.T_sw / p.L_m) ** 2
    C = p.C_eq
    dA = p.C_eq * sol.V_Cd_t1 ** 2 / (2 * c["K0"] * p.L_m) if sol.V_Cd_t1 < 0 else 0.0
    K0 = c["K0"] + dA
    lhs1 = net.L_B * (K0 ** 2 - c["I_Lm2"] ** 2)
    E = net.Lp * c["I_Lm2"] ** 2 + C * sol.V_Cd_t2 ** 2
    r2 = _rel(C * sol.V_Cd_t3 ** 2, E if c["I_Lm2"] >= 0 else
              C * sol.V_Cd_t2 ** 2 + net.L_B * c["I_Lm2"] ** 2, ref)
    r3 = _rel(net.Lp * sol.I_Lm_min ** 2, E, ref)
    return np.array([_rel(lhs1, C * sol.V_Cd_t2 ** 2, ref), r2, r3])


# -------------------------------------------------------------- interval times


@dataclass(frozen=True)
class IntervalTimes:
    t0: float
    t1: float
    t2: float
    t3: float
    t4: float
    t5: float
    t6: float

    def as_tuple(self):
        return (self.t0, self.t1, self.t2, self.t3, self.t4, self.t5, self.t6)

    def durations(self) -> dict:
        names = ("t_ON", "t_OFF-T", "t_OFF1", "t_OFF2", "t_OFF3", "t_ON-T")
        t = self.as_tuple()
        return {k: t[i + 1] - t[i] for i, k in enumerate(names)}


def interval_times(p, op: OperatingPoint, sol: ResetSolution) -> IntervalTimes:
    """Interval boundaries over one period, ``t0 = 0`` and ``t6 = T_sw``.

    The turn-on transition is placed at the end of the period, so ``t5`` is
    the next gate turn-on and ``t6`` coincides with the next ``t0``.
    """
    p = _params(p)
    T = p.T_sw
    t1 = op.D * T
    t2 = t1 + sol.t_OFFT
    w0 = sol.omega_0
    t3 = t2 + max(math.pi / 2 - sol.phase0, 0.0) / w0
    t4 = t2 + (math.pi - sol.phase0) / w0
    t5 = T - sol.t_ONT
    if t4 > t5:
        raise IntervalOverlap(op.D, t4 + sol.t_ONT, T)
    return IntervalTimes(0.0, t1, t2, t3, t4, t5, T)


# -------------------------------------------------------------------- stresses


@dataclass(frozen=True)
class StressReport:
    V_DS_max: float
    V_D1_max: float
    V_D2_on: float
    I_S: float
    I_D1: float
    I_D2: float
    dI_L: float
    dI_Lm: float
    I_L_min: float


def stresses(p, op: OperatingPoint, sol: ResetSolution,
             times: IntervalTimes | None = None) -> StressReport:
    p = _params(p)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DCMWarning)
        r = ripple(p, op)
    n, D = p.n, op.D
    I_Lm_mean = sol.I_Lm_min + sol.dI_Lm / 2
    I_D1_off3 = -sol.I_Lm_min / (1 + n)
    if times is None:
        try:
            times = interval_times(p, op, sol)
        except IntervalOverlap:
            times = None
    idle = (times.t5 - times.t4) / p.T_sw if times else 0.0
    return StressReport(
        V_DS_max=op.V_i + sol.V_Cd_t3, V_D1_max=(1 + n) * sol.V_Cd_t3,
        V_D2_on=(1 + n) * op.V_i, I_S=op.I_L * (1 + n) * D + I_Lm_mean,
        I_D1=op.I_L * D + I_D1_off3 * idle, I_D2=op.I_L * (1 - D),
        dI_L=r.dI_L, dI_Lm=r.dI_Lm, I_L_min=r.I_L_min)


# ------------------------------------------------------------------ waveforms


def synthesize_waveforms(p, op: OperatingPoint, sol: ResetSolution,
                         times: IntervalTimes | None = None,
                         samples_per_period: int = 2048) -> WaveformSet:
    """Closed-form per-interval waveforms over one period.

    Interval boundaries are always sample points; each boundary appears
    twice (value before and after) where a channel switches.
    """
    p = _params(p)
    if samples_per_period < 256:
        raise ValueError("samples_per_period must be at least 256")
    times = times or interval_times(p, op, sol)
    t0, t1, t2, t3, t4, t5, t6 = times.as_tuple()
    n, Vi, D, T = p.n, op.V_i, op.D, p.T_sw
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DCMWarning)
        r = ripple(p, op)
    dI_L, I_L = r.dI_L, op.I_L
    I_Lmin, I_Lmax = I_L - dI_L / 2, I_L + dI_L / 2
    V_min, V2, V3 = sol.V_Cd_min, sol.V_Cd_t2, sol.V_Cd_t3
    I_off3 = -sol.I_Lm_min / (1 + n)
    w0, ph = sol.omega_0, sol.phase0
    R_res = math.sqrt(V2 ** 2 + (p.L_m + p.L_kpri) / p.C_eq * sol.I_Lm_t2 ** 2)

    bounds = [t0, t1, t2, t3, t4, t5, t6]
    grid = np.linspace(t0, t6, samples_per_period)
    segments = []
    for k in range(6):
        a, b = bounds[k], bounds[k + 1]
        inner = grid[(grid > a) & (grid < b)]
        segments.append((k, np.concatenate(([a], inner, [b]))))

    names = ("i_L", "v_L", "i_Lm", "v_Lm", "i_Cd", "v_Cd", "i_S", "v_DS",
             "i_D1", "v_D1", "i_D2", "v_D2", "i_Dd1", "i_Dd2")
    out = {k: [] for k in names}
    tt = []
    for k, t in segments:
        # output filter: plain triangle set by the gate (D T on, rest off)
        i_L = np.where(t <= t1, I_Lmin + dI_L * (t - t0) / (t1 - t0),
                       I_Lmax - dI_L * (t - t1) / (t6 - t1))
        v_L = np.full_like(t, Vi * (1 + n) * (1 - D) if k == 0 else -Vi * (1 + n) * D)
        z = np.zeros_like(t)
        if k == 0:      # t_ON
            i_Lm = sol.I_Lm_min + Vi * (t - t0) / p.L_m
            v_Cd = np.full_like(t, V_min)
            ch = dict(i_L=i_L, v_L=v_L, i_Lm=i_Lm, v_Lm=np.full_like(t, Vi), i_Cd=z,
                      v_Cd=v_Cd, i_S=(1 + n) * i_L + i_Lm, v_DS=z, i_D1=i_L, v_D1=z,
                      i_D2=z, v_D2=np.full_like(t, (1 + n) * Vi), i_Dd1=z, i_Dd2=z)
        elif k == 1:    # t_OFF-T: quarter sine from V_min to V_t2
            span = t2 - t1
            x = (math.pi / 2) * (t - t1) / span if span > 0 else np.ones_like(t) * math.pi / 2
            v_Cd = V_min + (V2 - V_min) * np.sin(x)
            # a zero-length transfer (no leakage) moves no charge through a finite current
            i_Cd = p.C_d * (V2 - V_min) * (math.pi / 2) / span * np.cos(x) if span > 0 else z
            i_D1 = I_Lmax * np.cos(x)
            ch = dict(i_L=i_L, v_L=v_L, i_Lm=np.full_like(t, sol.I_Lm_max), v_Lm=-v_Cd,
                      i_Cd=i_Cd, v_Cd=v_Cd, i_S=z, v_DS=Vi + v_Cd, i_D1=i_D1,
                      v_D1=(1 + n) * v_Cd, i_D2=i_L - i_D1, v_D2=z, i_Dd1=i_Cd, i_Dd2=z)
        elif k in (2, 3):   # reset resonance
            x = w0 * (t - t2) + ph
            v_Cd = R_res * np.sin(x)
            i_Cd = p.C_eq * R_res * w0 * np.cos(x)
            i_Lm = i_Cd
            if k == 2:
                extra = dict(i_D2=i_L, i_Dd1=i_Cd * p.C_d / p.C_eq, i_Dd2=z)
            else:
                i_Dd2 = -i_Cd * p.C_d / p.C_eq
                extra = dict(i_D2=i_L - i_Dd2, i_Dd1=z, i_Dd2=i_Dd2)
            ch = dict(i_L=i_L, v_L=v_L, i_Lm=i_Lm, v_Lm=-v_Cd, i_Cd=i_Cd * p.C_d / p.C_eq,
                      v_Cd=v_Cd, i_S=z, v_DS=Vi + v_Cd, i_D1=z, v_D1=(1 + n) * v_Cd,
                      v_D2=z, **extra)
        elif k == 4:    # t_OFF3: magnetizing current circulates through D1
            ch = dict(i_L=i_L, v_L=v_L, i_Lm=np.full_like(t, sol.I_Lm_min), v_Lm=z, i_Cd=z,
                      v_Cd=z, i_S=z, v_DS=np.full_like(t, Vi), i_D1=np.full_like(t, I_off3),
                      v_D1=z, i_D2=i_L - I_off3, v_D2=z, i_Dd1=z, i_Dd2=z)
        else:           # t_ON-T: C_d discharges through Dd2 into the filter
            span = t6 - t5
            x = (math.pi / 2) * (t - t5) / span if span > 0 else np.ones_like(t) * math.pi / 2
            v_Cd = V_min * np.sin(x)
            i_Cd = p.C_d * V_min * (math.pi / 2) / span * np.cos(x) if span > 0 else z
            i_Dd2 = -i_Cd
            i_Lm = np.full_like(t, sol.I_Lm_min)
            i_D1 = i_L - i_Dd2
            ch = dict(i_L=i_L, v_L=v_L, i_Lm=i_Lm, v_Lm=np.full_like(t, Vi), i_Cd=i_Cd,
                      v_Cd=v_Cd, i_S=(1 + n) * i_D1 + i_Lm - i_Cd, v_DS=z, i_D1=i_D1,
                      v_D1=z, i_D2=z, v_D2=Vi + v_Cd, i_Dd1=z, i_Dd2=i_Dd2)
        tt.append(t)
        for name in names:
            out[name].append(np.asarray(ch[name], dtype=float))
    time = np.concatenate(tt)
    return WaveformSet.build(time, {k: np.concatenate(v) for k, v in out.items()})


# ---------------------------------------------------------------- conduction loss


@dataclass(frozen=True)
class LossReport:
    P_loss: float
    eta_cond: float
    breakdown: dict

    def __iter__(self):
        return iter((self.P_loss, self.eta_cond))


def estimate_conduction_losses(p, op: OperatingPoint, sol: ResetSolution,
                               waveforms: WaveformSet) -> LossReport:
    """Conduction-only loss; the efficiency is an upper bound (switching and core loss excluded)."""
    p = _params(p)
    missing = [f for f in _LOSS_FIELDS if getattr(p, f) is None]
    if missing:
        raise MissingLossParams(missing)
    w = waveforms
    i_kpri = w["i_S"] + w["i_Cd"]
    i_pri = i_kpri - w["i_D1"]

    def rms2(y):
        t = w.time
        return float(np.sum(0.5 * (y[1:] ** 2 + y[:-1] ** 2) * np.diff(t)) / w.period)

    def mean(y):
        t = w.time
        return float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(t)) / w.period)

    parts = {
        "R_dson": rms2(w["i_S"]) * p.R_dson,
        "R_pri": rms2(i_pri) * p.R_pri,
        "R_sec": rms2(w["i_D1"]) * p.R_sec,
        "R_L_dc": rms2(w["i_L"]) * p.R_L_dc,
        "V_f1": mean(np.abs(w["i_D1"])) * p.V_f1,
        "V_f2": mean(np.abs(w["i_D2"])) * p.V_f2,
        "V_fd": (mean(np.abs(w["i_Dd1"])) + mean(np.abs(w["i_Dd2"]))) * p.V_fd,
    }
    P_loss = float(sum(parts.values()))
    return LossReport(P_loss=P_loss, eta_cond=op.P_o / (op.P_o + P_loss), breakdown=parts)
