"""Linear network equations of the AFZ circuit for every conduction mode.

Circuit (ground-referenced node names):

    Vi --S||Coss-- X --Lkpri-- P          primary winding + Lm: P -> ground
    secondary winding P -> Q with v_Q = (1+n) v_P, Lksec: Q -> Y, D1: Y -> Z
    Cd: X -> W (v_Cd = v_W - v_X), Dd1: ground -> W, Dd2: W -> Z
    D2: ground -> Z, L: Z -> O, Co || R_load: O -> ground

State ``x = [i_Lm, i_sec, i_L, v_Cd, v_Coss, v_o]``. The switch-side leakage
current is algebraic, ``i_kpri = i_Lm + (1+n) i_sec``, so the three winding
inductances form a coupled 2x2 inductance matrix over ``(i_Lm, i_sec)``.
Inputs ``u = [V_i, i_inj, 1]``; ``i_inj`` is a current injected into the
output node and the constant column carries diode forward drops.

A mode is the switch state plus the four diode states. For each mode the
network is written as ``E z = F x + G u`` over the unknowns ``z`` (state
derivatives, node voltages, branch currents). Inductor cut-sets and capacitor
loops make ``E`` singular; the offending rows are state constraints, and
their time derivatives replace them until ``E`` has full rank.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

STATE_NAMES = ("i_Lm", "i_sec", "i_L", "v_Cd", "v_Coss", "v_o")
N_STATE = 6
N_INPUT = 3

# algebraic unknowns after the six state derivatives
ALG_NAMES = ("v_X", "v_W", "v_Y", "v_Z", "i_S", "i_oss", "i_WX", "i_Dd1", "i_Dd2", "i_D2")
Z_NAMES = tuple("d_" + s for s in STATE_NAMES) + ALG_NAMES
_Z = {name: k for k, name in enumerate(Z_NAMES)}

DIODES = ("D1", "D2", "Dd1", "Dd2")
N_MODES = 32

LABELS = ("t_ON", "t_OFF-T", "t_OFF1", "t_OFF2", "t_OFF3", "t_ON-T")


def mode_index(S, D1, D2, Dd1, Dd2):
    return (S << 4) | (D1 << 3) | (D2 << 2) | (Dd1 << 1) | Dd2


def mode_flags(index):
    return tuple((index >> k) & 1 for k in (4, 3, 2, 1, 0))


def mode_name(index):
    S, *d = mode_flags(index)
    on = [name for name, flag in zip(DIODES, d) if flag]
    return ("S" if S else "s") + "[" + ",".join(on) + "]"


# the conduction modes of the six Table-I intervals
NAMED_MODES = {
    "t_ON": mode_index(1, 1, 0, 0, 0),
    "t_OFF-T": mode_index(0, 1, 1, 1, 0),
    "t_OFF1": mode_index(0, 0, 1, 1, 0),
    "t_OFF2": mode_index(0, 0, 1, 0, 1),
    "t_OFF3": mode_index(0, 1, 1, 0, 0),
    "t_ON-T": mode_index(1, 1, 0, 0, 1),
}

# candidate order used when resolving the conduction mode after an event
_PREFERRED = [
    (1, 1, 0, 0, 0), (1, 1, 0, 0, 1), (1, 1, 1, 0, 0), (1, 1, 1, 0, 1),
    (0, 1, 1, 1, 0), (0, 1, 0, 1, 0), (0, 0, 1, 1, 0), (0, 0, 1, 0, 1),
    (0, 1, 1, 0, 0), (0, 1, 1, 0, 1), (0, 1, 0, 0, 1),
]


def candidate_order(S):
    first = [mode_index(*m) for m in _PREFERRED if m[0] == S]
    rest = [mode_index(S, *d) for d in product((0, 1), repeat=4)
            if mode_index(S, *d) not in first and not (d[2] and d[3])]
    return np.array(first + rest, dtype=np.int64)


@dataclass(frozen=True)
class ModeModel:
    """Linear dynamics and outputs of one conduction mode."""
    index: int
    valid: bool
    A: np.ndarray          # dx/dt = A x + B u
    B: np.ndarray
    Kx: np.ndarray         # z = Kx x + Ku u (all unknowns incl. derivatives)
    Ku: np.ndarray
    Cx: np.ndarray         # state constraints Cx x + Cu u = 0
    Cu: np.ndarray
    Kd: np.ndarray = None  # z contribution of the input rate du/dt
    reason: str = ""


def _equilibrate(E):
    r = np.max(np.abs(E), axis=1)
    r[r == 0] = 1.0
    Er = E / r[:, None]
    c = np.max(np.abs(Er), axis=0)
    c[c == 0] = 1.0
    return r, c


def build_mode(index, p, R_load, diode_drops=(0.0, 0.0, 0.0)):
    """Assemble and reduce the network equations for one mode.

    ``p`` is any object exposing the converter component values.
    ``diode_drops`` is ``(V_f1, V_f2, V_fd)``.
    """
    S, D1, D2, Dd1, Dd2 = mode_flags(index)
    n = p.n
    V_f1, V_f2, V_fd = diode_drops
    coss = p.C_oss > 0 and not S
    nz = len(Z_NAMES)
    rows, fx, gu = [], [], []

    def eq(coeffs, x=None, u=None):
        row = np.zeros(nz)
        for name, value in coeffs.items():
            row[_Z[name]] += value
        rows.append(row)
        fx.append(np.zeros(N_STATE) if x is None else np.asarray(x, float))
        gu.append(np.zeros(N_INPUT) if u is None else np.asarray(u, float))

    M11 = p.L_m + p.L_kpri
    M12 = (1 + n) * p.L_kpri
    M22 = (1 + n) ** 2 * p.L_kpri + p.L_ksec
    eq({"d_i_Lm": M11, "d_i_sec": M12, "v_X": -1})
    eq({"d_i_Lm": M12, "d_i_sec": M22, "v_X": -(1 + n), "v_Y": 1})
    eq({"d_i_L": p.L, "v_Z": -1}, x=[0, 0, 0, 0, 0, -1])
    eq({"d_v_Cd": p.C_d, "i_WX": -1})
    if coss:
        eq({"d_v_Coss": p.C_oss, "i_oss": -1})
    else:
        eq({"d_v_Coss": 1})
    eq({"d_v_o": p.C_o}, x=[0, 0, 1, 0, 0, -1 / R_load], u=[0, 1, 0])
    eq({"i_Dd1": 1, "i_WX": -1, "i_Dd2": -1})
    eq({"i_D2": 1, "i_Dd2": 1}, x=[0, -1, 1, 0, 0, 0])
    eq({"i_S": 1, "i_oss": 1, "i_WX": 1}, x=[1, 1 + n, 0, 0, 0, 0])
    if S:
        eq({"v_X": 1}, u=[1, 0, 0])
    else:
        eq({"i_S": 1})
    if Dd1:
        eq({"v_W": 1}, u=[0, 0, -V_fd])
    else:
        eq({"i_Dd1": 1})
    if Dd2:
        eq({"v_W": 1, "v_Z": -1}, u=[0, 0, V_fd])
    else:
        eq({"i_Dd2": 1})
    if D2:
        eq({"v_Z": 1}, u=[0, 0, -V_f2])
    else:
        eq({"i_D2": 1})
    if D1:
        eq({"v_Y": 1, "v_Z": -1}, u=[0, 0, V_f1])
    else:
        eq({"d_i_sec": 1})
    eq({"v_W": 1, "v_X": -1}, x=[0, 0, 0, 1, 0, 0])
    if coss:
        eq({"v_X": 1}, x=[0, 0, 0, 0, -1, 0], u=[1, 0, 0])
    else:
        eq({"i_oss": 1})

    E = np.array(rows)
    Rx = np.array(fx)
    Ru = np.array(gu)
    # differentiated constraints that involve inputs bring in du/dt
    Rd = np.zeros_like(Ru)
    cons_x, cons_u = [], []
    if not D1:
        cons_x.append(np.eye(N_STATE)[1])
        cons_u.append(np.zeros(N_INPUT))
    if not coss:
        # C_oss is either absent or shorted by the switch
        pass

    for _ in range(6):
        r, c = _equilibrate(E)
        Es = E / r[:, None] / c[None, :]
        U, sv, Vt = np.linalg.svd(Es)
        tol = 1e-10 * sv[0]
        rank = int(np.sum(sv > tol))
        if rank == E.shape[1] and E.shape[0] == E.shape[1]:
            break
        Ur = U[:, :rank]
        Un = U[:, rank:]
        # left null rows, expressed on the unscaled system
        N = (Un.T / r[None, :])
        Nx = N @ Rx
        Nu = N @ Ru
        keep = np.linalg.norm(Nx, axis=1) + np.linalg.norm(Nu, axis=1) > 1e-12
        for nx_, nu_ in zip(Nx[keep], Nu[keep]):
            cons_x.append(nx_)
            cons_u.append(nu_)
        top = (Ur.T / r[None, :]) @ E
        topx = (Ur.T / r[None, :]) @ Rx
        topu = (Ur.T / r[None, :]) @ Ru
        topd = (Ur.T / r[None, :]) @ Rd
        diff = np.zeros((int(keep.sum()), nz))
        diff[:, :N_STATE] = Nx[keep]
        if diff.shape[0] == 0:
            break
        E = np.vstack([top, diff])
        Rx = np.vstack([topx, np.zeros((diff.shape[0], N_STATE))])
        Ru = np.vstack([topu, np.zeros((diff.shape[0], N_INPUT))])
        # Nx x + Nu u = 0 differentiated: Nx dx/dt = -Nu du/dt
        Rd = np.vstack([topd, -Nu[keep]])

    r, c = _equilibrate(E)
    Es = E / r[:, None] / c[None, :]
    U, sv, Vt = np.linalg.svd(Es)
    rank = int(np.sum(sv > 1e-10 * sv[0]))
    pinv = Vt[:rank].T @ np.diag(1 / sv[:rank]) @ U[:, :rank].T
    Kx = (pinv @ (Rx / r[:, None])) / c[:, None]
    Ku = (pinv @ (Ru / r[:, None])) / c[:, None]
    Kd = (pinv @ (Rd / r[:, None])) / c[:, None]
    valid = True
    reason = ""
    if rank < nz:
        null = Vt[rank:] / c[None, :]
        # derivatives and diode quantities must be unique
        watched = list(range(N_STATE)) + [_Z[k] for k in ("v_X", "v_W", "v_Y", "v_Z",
                                                          "i_Dd1", "i_Dd2", "i_D2")]
        scale = np.max(np.abs(null)) if null.size else 1.0
        if np.any(np.abs(null[:, watched]) > 1e-8 * scale):
            valid = False
            reason = "underdetermined"
    # residual of the reduced system must vanish for consistent states
    resid = E @ np.hstack([Kx, Ku]) - np.hstack([Rx, Ru])
    if np.max(np.abs(resid)) > 1e-6 * max(1.0, np.max(np.abs(np.hstack([Rx, Ru])))):
        extra_x = resid[:, :N_STATE]
        extra_u = resid[:, N_STATE:]
        for ex, eu in zip(extra_x, extra_u):
            if np.linalg.norm(ex) + np.linalg.norm(eu) > 1e-9:
                cons_x.append(-ex)
                cons_u.append(-eu)
    if Dd1 and Dd2:
        valid = False
        reason = "Dd1 and Dd2 conducting together"
    A = Kx[:N_STATE].copy()
    B = Ku[:N_STATE].copy()
    Cx = np.array(cons_x).reshape(-1, N_STATE)
    Cu = np.array(cons_u).reshape(-1, N_INPUT)
    return ModeModel(index=index, valid=valid, A=A, B=B, Kx=Kx, Ku=Ku, Cx=Cx, Cu=Cu, Kd=Kd,
                     reason=reason)


def z_index(name):
    return _Z[name]


def monitor_matrices(model: ModeModel, diode_drops=(0.0, 0.0, 0.0)):
    """Rows whose sign must stay non-negative while the mode holds.

    Conducting diodes report their forward current; blocking diodes report
    minus their forward-bias excess voltage. One row per diode, D1, D2, Dd1, Dd2.
    Returns the state, input and input-rate blocks.
    """
    S, D1, D2, Dd1, Dd2 = mode_flags(model.index)
    V_f1, V_f2, V_fd = diode_drops
    K = np.hstack([model.Kx, model.Ku, model.Kd])
    e = np.zeros((4, N_STATE + 2 * N_INPUT))
    if D1:
        e[0, 1] = 1.0
    else:
        # v_Y - v_Z - V_f1 <= 0
        e[0] = -(K[_Z["v_Y"]] - K[_Z["v_Z"]])
        e[0, N_STATE + 2] += V_f1
    if D2:
        e[1] = K[_Z["i_D2"]]
    else:
        e[1] = K[_Z["v_Z"]]
        e[1, N_STATE + 2] += V_f2
    if Dd1:
        e[2] = K[_Z["i_Dd1"]]
    else:
        e[2] = K[_Z["v_W"]]
        e[2, N_STATE + 2] += V_fd
    if Dd2:
        e[3] = K[_Z["i_Dd2"]]
    else:
        e[3] = -(K[_Z["v_W"]] - K[_Z["v_Z"]])
        e[3, N_STATE + 2] += V_fd
    return e[:, :N_STATE], e[:, N_STATE:N_STATE + N_INPUT], e[:, N_STATE + N_INPUT:]


@dataclass(frozen=True)
class NetworkTables:
    """All modes stacked into arrays for the compiled integrator."""
    models: tuple
    A: np.ndarray
    B: np.ndarray
    Bd: np.ndarray
    Mx: np.ndarray
    Mu: np.ndarray
    Md: np.ndarray
    Cx: np.ndarray
    Cu: np.ndarray
    n_cons: np.ndarray
    valid: np.ndarray
    order_on: np.ndarray
    order_off: np.ndarray
    omega_max: float


def build_tables(p, R_load, diode_drops=(0.0, 0.0, 0.0)) -> NetworkTables:
    models = tuple(build_mode(k, p, R_load, diode_drops) for k in range(N_MODES))
    max_c = max(1, max(m.Cx.shape[0] for m in models))
    A = np.zeros((N_MODES, N_STATE, N_STATE))
    B = np.zeros((N_MODES, N_STATE, N_INPUT))
    Bd = np.zeros((N_MODES, N_STATE, N_INPUT))
    Mx = np.zeros((N_MODES, 4, N_STATE))
    Mu = np.zeros((N_MODES, 4, N_INPUT))
    Md = np.zeros((N_MODES, 4, N_INPUT))
    Cx = np.zeros((N_MODES, max_c, N_STATE))
    Cu = np.zeros((N_MODES, max_c, N_INPUT))
    n_cons = np.zeros(N_MODES, dtype=np.int64)
    valid = np.zeros(N_MODES, dtype=np.bool_)
    omega = 0.0
    for m in models:
        k = m.index
        A[k], B[k], Bd[k] = m.A, m.B, m.Kd[:N_STATE]
        Mx[k], Mu[k], Md[k] = monitor_matrices(m, diode_drops)
        nc = m.Cx.shape[0]
        Cx[k, :nc], Cu[k, :nc] = m.Cx, m.Cu
        n_cons[k] = nc
        valid[k] = m.valid
        if m.valid:
            omega = max(omega, float(np.max(np.abs(np.linalg.eigvals(m.A)))))
    return NetworkTables(models=models, A=A, B=B, Bd=Bd, Mx=Mx, Mu=Mu, Md=Md, Cx=Cx, Cu=Cu,
                         n_cons=n_cons, valid=valid, order_on=candidate_order(1),
                         order_off=candidate_order(0), omega_max=omega)
