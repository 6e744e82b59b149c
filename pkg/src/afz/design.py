"""Component selection: turns ratio, reset capacitor bound and worst-case stresses."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

from .converter import ConverterParams, OperatingPoint, cd_upper_bound, duty_for_target
from .errors import ApproximationWarning, DCMWarning
from .planner import derive_design_spec, select_turns_ratio
from .reset import solve_reset, stresses, synthesize_waveforms


@dataclass(frozen=True)
class Requirement:
    component: str
    quantity: str
    value: float
    unit: str


@dataclass(frozen=True)
class DesignResult:
    n: float
    C_d_max: float
    params: ConverterParams
    spec: object
    requirements: tuple
    points: tuple


def design_converter(p: ConverterParams, scenarios, D_max: float = 0.75,
                     tolerance: float = 0.02, n_step: float = 0.25) -> DesignResult:
    """Size the converter for every converter class of ``scenarios``.

    The turns ratio is the smallest on an ``n_step`` grid that reaches each
    class's upper output voltage at ``D_max``; the reset capacitor takes the
    largest value that still resets at ``D_max`` (larger capacitance lowers
    the reset voltage peak). Stresses are the worst case over all classes.
    """
    n = select_turns_ratio(scenarios, D_max, tolerance, n_step)
    C_d = cd_upper_bound(D_max, p.f_sw, p.L_m)
    q = replace(p, n=n, C_d=C_d).with_leakage(p.L_k)
    spec = derive_design_spec(scenarios, n=n, D_max=D_max, tolerance=tolerance)
    worst = {}

    def keep(key, value, unit, component, quantity):
        if key not in worst or abs(value) > abs(worst[key].value):
            worst[key] = Requirement(component, quantity, value, unit)

    points = []
    for sc in scenarios:
        for c in sc.classes:
            D = duty_for_target(c.V_in, c.V_out, n, D_max)
            op = OperatingPoint.create(c.V_in, D, c.P_MIC, n)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", (DCMWarning, ApproximationWarning))
                sol = solve_reset(q, op)
                st = stresses(q, op, sol)
                wf = synthesize_waveforms(q, op, sol)
            points.append((sc.name, c.label, op))
            keep("vds", st.V_DS_max, "V", "S", "peak drain-source voltage")
            keep("is_pk", wf.summary["i_S"].max, "A", "S", "peak current")
            keep("is_rms", wf.rms("i_S"), "A", "S", "RMS current")
            keep("vd1", st.V_D1_max, "V", "D1", "peak reverse voltage")
            keep("id1", wf.mean("i_D1"), "A", "D1", "mean current")
            keep("vd2", st.V_D2_on, "V", "D2", "peak reverse voltage")
            keep("id2", wf.mean("i_D2"), "A", "D2", "mean current")
            keep("vcd", sol.V_Cd_t3, "V", "C_d", "peak voltage")
            keep("vcdn", sol.V_Cd_min, "V", "C_d", "most negative voltage")
            keep("idd", max(wf.summary["i_Dd1"].max, wf.summary["i_Dd2"].max), "A",
                 "Dd1/Dd2", "peak current")
            keep("il", wf.summary["i_L"].max, "A", "L", "peak current")
            keep("dil", st.dI_L, "A", "L", "peak-to-peak ripple")
    reqs = [Requirement("Autotransformer", "turns ratio n", n, ""),
            Requirement("Autotransformer", "magnetizing inductance L_m", p.L_m, "H"),
            Requirement("C_d", "capacitance upper bound", C_d, "F")]
    reqs += list(worst.values())
    return DesignResult(n=n, C_d_max=C_d, params=q, spec=spec, requirements=tuple(reqs),
                        points=tuple(points))
