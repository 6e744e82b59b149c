"""Component values, operating points and the static relations of the AFZ converter.

All quantities are SI. Leakage inductances are stored per winding; ``L_k`` is
the total referred to the primary, ``L_kpri + L_ksec / (1 + n)**2``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, fields, replace

from .errors import (ApproximationWarning, DomainError, DutyOutOfRange,
                     NonPositiveValue, ResetImpossible)

# fields that must be strictly positive
_POSITIVE = ("n", "f_sw", "L", "L_m", "C_d", "C_o")
# fields that may be zero but never negative
_NON_NEGATIVE = ("L_kpri", "L_ksec", "C_oss", "R_dson", "V_f1", "V_f2", "V_fd",
                 "R_pri", "R_sec", "R_L_dc")


@dataclass(frozen=True)
class ConverterParams:
    n: float
    f_sw: float
    L: float
    L_m: float
    L_kpri: float
    L_ksec: float
    C_d: float
    C_o: float
    C_oss: float = 0.0
    R_dson: float = 0.0
    V_f1: float = 0.0
    V_f2: float = 0.0
    V_fd: float = 0.0
    R_pri: float = 0.0
    R_sec: float = 0.0
    R_L_dc: float = 0.0

    @classmethod
    def prototype(cls, **overrides) -> "ConverterParams":
        """The 225 W prototype.

        The single measured leakage (820 nH, primary-referred) is split evenly
        between the two windings.
        """
        n = overrides.get("n", 1.0)
        L_k = overrides.pop("L_k", 820e-9)
        base = dict(
            n=n, f_sw=50e3, L=68e-6, L_m=485e-6,
            L_kpri=L_k / 2, L_ksec=L_k / 2 * (1 + n) ** 2,
            C_d=11e-9, C_o=112e-6, C_oss=0.0,
            R_dson=9.6e-3, V_f1=1.1, V_f2=0.3, V_fd=1.0,
            R_pri=15.5e-3, R_sec=18.3e-3, R_L_dc=30.6e-3,
        )
        base.update(overrides)
        return cls(**base)

    @classmethod
    def ideal(cls, **overrides) -> "ConverterParams":
        """Prototype values with every loss term zeroed."""
        loss_free = dict(R_dson=0.0, V_f1=0.0, V_f2=0.0, V_fd=0.0,
                         R_pri=0.0, R_sec=0.0, R_L_dc=0.0)
        loss_free.update(overrides)
        return cls.prototype(**loss_free)

    @property
    def T_sw(self) -> float:
        return 1.0 / self.f_sw

    @property
    def L_k(self) -> float:
        return self.L_kpri + self.L_ksec / (1 + self.n) ** 2

    @property
    def C_eq(self) -> float:
        return self.C_d + self.C_oss

    def with_leakage(self, L_k: float) -> "ConverterParams":
        """Copy with a new total leakage, split evenly between windings."""
        return replace(self, L_kpri=L_k / 2, L_ksec=L_k / 2 * (1 + self.n) ** 2)

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class ValidatedParams:
    params: ConverterParams
    C_eq: float
    L_k: float
    warnings: tuple = ()

    def __getattr__(self, name):
        # forward component values so validated params read like raw ones
        return getattr(self.params, name)


def validate_params(p: ConverterParams) -> ValidatedParams:
    for name in _POSITIVE:
        value = getattr(p, name)
        if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
            raise NonPositiveValue(name, value)
    for name in _NON_NEGATIVE:
        value = getattr(p, name)
        if not (math.isfinite(value) and value >= 0):
            raise NonPositiveValue(name, value)
    notes = []
    if p.L_k > p.L_m / 10:
        notes.append(f"L_k={p.L_k:.3g} H exceeds L_m/10; small-leakage approximations degrade")
    if p.C_oss > p.C_d / 10:
        notes.append(f"C_oss={p.C_oss:.3g} F exceeds C_d/10; small-C_oss approximations degrade")
    for note in notes:
        warnings.warn(note, ApproximationWarning, stacklevel=2)
    return ValidatedParams(params=p, C_eq=p.C_eq, L_k=p.L_k, warnings=tuple(notes))


@dataclass(frozen=True)
class OperatingPoint:
    V_i: float
    D: float
    P_o: float
    V_o: float
    I_L: float
    R_load: float

    @classmethod
    def create(cls, V_i: float, D: float, P_o: float, n: float) -> "OperatingPoint":
        if not V_i > 0:
            raise NonPositiveValue("V_i", V_i)
        if not 0 < D < 1:
            raise DutyOutOfRange(D, 1.0)
        if not P_o > 0:
            raise NonPositiveValue("P_o", P_o)
        V_o = voltage_transfer(V_i, n, D)
        I_L = P_o / V_o
        return cls(V_i=V_i, D=D, P_o=P_o, V_o=V_o, I_L=I_L, R_load=V_o ** 2 / P_o)

    @classmethod
    def from_current(cls, V_i: float, D: float, I_string: float, n: float) -> "OperatingPoint":
        """Operating point fixed by the string current instead of the power."""
        V_o = voltage_transfer(V_i, n, D)
        return cls.create(V_i, D, V_o * I_string, n)


@dataclass(frozen=True)
class ResonantProfile:
    C_eq: float
    L_k: float
    f_res: float
    f_res_simple: float
    f_resk: float
    omega_0: float
    omega_0k: float
    T_res: float


@dataclass(frozen=True)
class PowerSplit:
    P_i: float
    P_mag: float
    P_noMag: float
    mag_ratio: float = field(default=0.0)
    noMag_ratio: float = field(default=0.0)


def voltage_transfer(V_i: float, n: float, D: float) -> float:
    if not V_i > 0:
        raise DomainError(f"V_i must be positive, got {V_i}")
    if not 0 <= D < 1:
        raise DomainError(f"D must lie in [0, 1), got {D}")
    if not n > 0:
        raise DomainError(f"n must be positive, got {n}")
    return (1 + n) * D * V_i


def duty_for_target(V_i: float, V_o: float, n: float, D_max: float = 1.0) -> float:
    """Duty cycle that produces ``V_o`` from ``V_i``; raises past ``D_max``."""
    if not (V_i > 0 and V_o > 0):
        raise DomainError("V_i and V_o must be positive")
    D = V_o / ((1 + n) * V_i)
    if not 0 < D < D_max:
        raise DutyOutOfRange(D, D_max)
    return D


def resonant_profile(p: ValidatedParams) -> ResonantProfile:
    L_k = p.L_k
    f_res = 1 / (2 * math.pi * math.sqrt((p.L_m + p.L_kpri) * (p.C_d + p.C_oss)))
    f_res_simple = 1 / (2 * math.pi * math.sqrt(p.L_m * p.C_d))
    f_resk = 1 / (2 * math.pi * math.sqrt(L_k * p.C_eq)) if L_k > 0 else math.inf
    return ResonantProfile(
        C_eq=p.C_eq, L_k=L_k, f_res=f_res, f_res_simple=f_res_simple, f_resk=f_resk,
        omega_0=2 * math.pi * f_res, omega_0k=2 * math.pi * f_resk, T_res=1 / f_res)


def max_duty(f_res: float, f_sw: float) -> float:
    if f_res <= f_sw / 2:
        raise ResetImpossible(f_res, f_sw)
    if math.isinf(f_res):
        return 1.0
    return (2 * f_res - f_sw) / (2 * f_res)


def cd_upper_bound(D_max: float, f_sw: float, L_m: float) -> float:
    """Largest reset capacitance that still completes the reset at ``D_max``."""
    if not 0 < D_max <= 1:
        raise DomainError(f"D_max must lie in (0, 1], got {D_max}")
    return (1 - D_max) ** 2 / ((math.pi * f_sw) ** 2 * L_m)


def power_split(P_i: float, n: float) -> PowerSplit:
    if P_i < 0:
        raise DomainError(f"P_i must be non-negative, got {P_i}")
    if not n > 0:
        raise DomainError(f"n must be positive, got {n}")
    mag = n / (1 + n)
    return PowerSplit(P_i=P_i, P_mag=P_i * mag, P_noMag=P_i / (1 + n),
                      mag_ratio=mag, noMag_ratio=1 / (1 + n))
