"""Fitted parameter sets.

``TABLE_IX`` holds the published reset-solution values for the non-shaded
Scenario 1 converter (D = 0.689, V_i = 29.3 V, I_string = 5.569 A) and the
component values found by ``scripts/fit_table_ix.py`` that make the literal
energy balance (``model="paper"``) reproduce them. With the nominal 11 nF,
820 nH, C_oss = 0 values the literal balance misses them by tens of percent;
a reset capacitance / C_oss sweep alone at 820 nH gets no closer than about
68 %, so the leakage is part of the fit.
"""
from __future__ import annotations

from dataclasses import dataclass

from .converter import ConverterParams, OperatingPoint


@dataclass(frozen=True)
class ParameterFit:
    C_d: float
    C_oss: float
    L_k: float
    targets: dict
    max_rel_error: float

    def params(self, **overrides) -> ConverterParams:
        """Prototype values with the fitted reset network; leakage split evenly."""
        base = dict(C_d=self.C_d, C_oss=self.C_oss, L_k=self.L_k)
        base.update(overrides)
        return ConverterParams.prototype(**base)


TABLE_IX_TARGETS = {"I_Lm_min": -0.44, "V_Cd_min": -27.27, "V_Cd_t2": 66.18, "V_Cd_t3": 156.33}

TABLE_IX = ParameterFit(C_d=2.917e-9, C_oss=672.6e-12, L_k=139.8e-9,
                        targets=TABLE_IX_TARGETS, max_rel_error=0.0023)


def table_ix_operating_point(n: float = 1.0) -> OperatingPoint:
    return OperatingPoint.from_current(29.3, 0.689, 5.569, n)


def relative_errors(solution, targets=TABLE_IX_TARGETS) -> dict:
    return {k: (getattr(solution, k) - v) / abs(v) for k, v in targets.items()}
