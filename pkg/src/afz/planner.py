"""PV plant sizing: string layouts, mismatch scenarios and the converter envelope."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .converter import duty_for_target


@dataclass(frozen=True)
class PlantSpec:
    """Plant power, inverter-held string voltage and the panel MPP."""
    P_plant: float
    V_string: float
    P_mpp: float
    V_mpp: float
    panels_required: int | None = None   # overrides ceil(P_plant / P_mpp)

    def __post_init__(self):
        for name in ("P_plant", "V_string", "P_mpp", "V_mpp"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive, got {value!r}")
        if self.panels_required is not None and self.panels_required < 1:
            raise ValueError(f"panels_required must be positive, got {self.panels_required}")

    @property
    def min_panels(self) -> int:
        if self.panels_required is not None:
            return int(self.panels_required)
        # guard against 100e3/225 landing a hair above an integer
        return math.ceil(self.P_plant / self.P_mpp - 1e-9)


@dataclass(frozen=True)
class StringConfig:
    strings: int
    panels_per_string: int
    total: int
    V_out: float
    dV: float


def enumerate_configs(spec: PlantSpec, limit: int | None = None, *, extra_panels: int = 6,
                      panels_range: tuple = (5, 60)) -> list:
    """Every string layout within ``extra_panels`` of the minimum panel count.

    Ranked by total panel count, then by ``|V_out - V_mpp|``.
    """
    lo_total = spec.min_panels
    lo, hi = panels_range
    rows = []
    for per in range(max(1, lo), hi + 1):
        strings = math.ceil(lo_total / per)
        # every string count whose total stays inside the tolerance window
        while strings * per <= lo_total + extra_panels:
            total = strings * per
            if total >= lo_total:
                V_out = spec.V_string / per
                rows.append(StringConfig(strings, per, total, V_out, abs(V_out - spec.V_mpp)))
            strings += 1
    rows.sort(key=lambda c: (c.total, c.dV, c.strings))
    return rows if limit is None else rows[:limit]


@dataclass(frozen=True)
class Shading:
    fraction: float = 0.0
    V_mpp: float = 0.0
    P_mpp: float = 0.0
    integer_panels: bool = False

    def __post_init__(self):
        if not 0 <= self.fraction <= 1:
            raise ValueError(f"shaded fraction must lie in [0, 1], got {self.fraction}")


@dataclass(frozen=True)
class ClassPoint:
    """Operating point shared by every converter of one class in a string."""
    label: str
    count: float
    P_MIC: float
    V_in: float
    V_out: float
    I_string: float


@dataclass(frozen=True)
class ScenarioPoints:
    name: str
    P_string: float
    V_string: float
    I_string: float
    classes: tuple = field(default_factory=tuple)

    def by_label(self, label) -> ClassPoint:
        for c in self.classes:
            if c.label == label:
                return c
        raise KeyError(label)


def scenario_points(config: StringConfig, spec: PlantSpec, shading: Shading | None = None,
                    name: str = "") -> ScenarioPoints:
    """Per-class converter operating points of one string.

    Each converter passes its panel power to the common string current, so
    ``V_out = P_panel / I_string`` with ``I_string = P_string / V_string``.
    Fractional shaded-panel counts are kept unless ``integer_panels`` is set.
    """
    shading = shading or Shading()
    per = config.panels_per_string
    n_sh = per * shading.fraction
    if shading.integer_panels:
        n_sh = float(round(n_sh))
    n_ok = per - n_sh
    P_string = n_ok * spec.P_mpp + n_sh * shading.P_mpp
    I = P_string / spec.V_string
    classes = [ClassPoint("non-shaded", n_ok, spec.P_mpp, spec.V_mpp, spec.P_mpp / I, I)]
    if n_sh > 0:
        if not (shading.P_mpp > 0 and shading.V_mpp > 0):
            raise ValueError("shaded panels need positive V_mpp and P_mpp")
        classes.append(ClassPoint("shaded", n_sh, shading.P_mpp, shading.V_mpp,
                                  shading.P_mpp / I, I))
    return ScenarioPoints(name=name, P_string=P_string, V_string=spec.V_string,
                          I_string=I, classes=tuple(c for c in classes if c.count > 0))


@dataclass(frozen=True)
class DesignSpec:
    V_i: tuple
    V_o: tuple
    D: tuple
    P: tuple
    n: float
    D_max: float
    tolerance: float = 0.02

    @property
    def V_o_band(self) -> tuple:
        return (self.V_o[0] * (1 - self.tolerance), self.V_o[1] * (1 + self.tolerance))


def derive_design_spec(scenarios, n: float = 1.0, D_max: float = 0.75,
                       tolerance: float = 0.02) -> DesignSpec:
    """Envelope of every converter class across the scenarios."""
    points = [c for s in scenarios for c in s.classes]
    if not points:
        raise ValueError("at least one scenario with one converter class is required")
    duties = [duty_for_target(c.V_in, c.V_out, n, D_max) for c in points]

    def span(values):
        return (min(values), max(values))

    return DesignSpec(V_i=span([c.V_in for c in points]), V_o=span([c.V_out for c in points]),
                      D=span(duties), P=span([c.P_MIC for c in points]),
                      n=n, D_max=D_max, tolerance=tolerance)


def select_turns_ratio(scenarios, D_max: float, tolerance: float = 0.02,
                       step: float = 0.25) -> float:
    """Smallest ratio on a ``step`` grid that reaches every class's upper V_out at ``D_max``."""
    points = [c for s in scenarios for c in s.classes]
    need = max(c.V_out * (1 + tolerance) / (D_max * c.V_in) for c in points) - 1
    n = max(step, math.ceil(need / step - 1e-9) * step)
    return n
