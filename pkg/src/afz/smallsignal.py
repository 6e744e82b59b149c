"""Averaged small-signal model: injected-current blocks and Gvd, Gvv, Zo.

The output filter sees ``(1+n) V_i d`` through ``Z_L = sL`` and drives the
parallel ``C_o || R_load`` impedance ``Z_p``. Closing the loop gives three
second-order responses sharing the denominator
``s^2 + s/(R C_o) + w_o^2`` with ``w_o = 1/sqrt(L C_o)``; that natural
frequency is the only one consistent with the block expressions, since
``1 + B Z_p`` expands to ``(s^2 L C_o R + s L + R) / (s L (1 + s C_o R))``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .converter import ConverterParams, OperatingPoint, ValidatedParams
from .errors import FrequencyMismatch

TARGETS = ("Gvd", "Gvv", "Zo")


@dataclass(frozen=True)
class SmallSignalBlocks:
    """Frequency-domain blocks of the injected-current diagram."""
    n: float
    V_i: float
    D: float
    L: float
    C_o: float
    R_load: float

    def Z_L(self, s):
        return s * self.L

    def Z_p(self, s):
        return self.R_load / (1 + s * self.C_o * self.R_load)

    def A(self, s):
        return (1 + self.n) * self.V_i / self.Z_L(s)

    def B(self, s):
        return 1 / self.Z_L(s)

    def C(self, s):
        return (1 + self.n) * self.D / self.Z_L(s)

    def closed_loop(self, target, s):
        """Block-diagram evaluation, independent of the rational closed forms."""
        zp = self.Z_p(s)
        num = {"Gvd": self.A(s) * zp, "Gvv": self.C(s) * zp, "Zo": zp}[target]
        return num / (1 + self.B(s) * zp)


@dataclass(frozen=True)
class RationalTF:
    """``num(s) / (s^2 + s*damping + w_o^2)`` with a constant or ``s/C_o`` numerator."""
    name: str
    gain: float          # DC gain for Gvd/Gvv, 1/C_o for Zo
    omega_o: float       # rad/s
    damping: float       # 1/(R_load C_o), rad/s
    differentiator: bool = False

    @property
    def f_o(self) -> float:
        return self.omega_o / (2 * math.pi)

    @property
    def numerator(self) -> np.ndarray:
        """Polynomial coefficients, highest power first."""
        if self.differentiator:
            return np.array([self.gain, 0.0])
        return np.array([self.gain * self.omega_o ** 2])

    @property
    def denominator(self) -> np.ndarray:
        return np.array([1.0, self.damping, self.omega_o ** 2])

    def poles(self) -> np.ndarray:
        return np.roots(self.denominator)

    def zeros(self) -> np.ndarray:
        return np.roots(self.numerator) if len(self.numerator) > 1 else np.array([])

    def __call__(self, s):
        s = np.asarray(s, dtype=complex)
        den = s * s + s * self.damping + self.omega_o ** 2
        if self.differentiator:
            return self.gain * s / den
        return self.gain * self.omega_o ** 2 / den

    def response(self, freqs) -> np.ndarray:
        return self(2j * math.pi * np.asarray(freqs, dtype=float))


def build_model(p, op: OperatingPoint):
    """Blocks plus the three transfer functions at one operating point."""
    p = p.params if isinstance(p, ValidatedParams) else p
    blocks = SmallSignalBlocks(n=p.n, V_i=op.V_i, D=op.D, L=p.L, C_o=p.C_o,
                               R_load=op.R_load)
    w_o = 1 / math.sqrt(p.L * p.C_o)
    damp = 1 / (op.R_load * p.C_o)
    tfs = {
        "Gvd": RationalTF("Gvd", (1 + p.n) * op.V_i, w_o, damp),
        "Gvv": RationalTF("Gvv", (1 + p.n) * op.D, w_o, damp),
        "Zo": RationalTF("Zo", 1 / p.C_o, w_o, damp, differentiator=True),
    }
    return blocks, tfs


@dataclass(frozen=True)
class BodeRow:
    freq: float
    mag_db: float
    phase_deg: float


def unwrap_deg(phase_deg) -> np.ndarray:
    return np.degrees(np.unwrap(np.radians(np.asarray(phase_deg, dtype=float))))


def bode(tf, freqs) -> list:
    """Magnitude in dB and continuously unwrapped phase in degrees."""
    freqs = np.asarray(freqs, dtype=float)
    if np.any(freqs <= 0):
        raise ValueError("frequencies must be positive")
    order = np.argsort(freqs)
    h = tf.response(freqs[order])
    phase = unwrap_deg(np.degrees(np.angle(h)))
    # anchor the branch: lowest frequency within (-180, 180]
    phase -= 360.0 * np.round((phase[0] - np.degrees(np.angle(h[0]))) / 360.0)
    out = [None] * len(freqs)
    for k, i in enumerate(order):
        out[i] = BodeRow(float(freqs[i]), float(20 * np.log10(abs(h[k]))), float(phase[k]))
    return out


@dataclass(frozen=True)
class DeviationReport:
    freqs: np.ndarray
    d_mag_db: np.ndarray
    d_phase_deg: np.ndarray
    headline_limit: float
    excluded: np.ndarray        # frequencies at or above f_sw/2, not compared
    informational: np.ndarray   # mask: compared but above the headline limit

    @property
    def max_mag_db(self) -> float:
        m = ~self.informational
        return float(np.max(np.abs(self.d_mag_db[m]))) if m.any() else 0.0

    @property
    def max_phase_deg(self) -> float:
        m = ~self.informational
        return float(np.max(np.abs(self.d_phase_deg[m]))) if m.any() else 0.0


def _wrap180(x):
    return (np.asarray(x) + 180.0) % 360.0 - 180.0


def compare_with_simulation(analytical: RationalTF, measured, f_sw: float) -> DeviationReport:
    """Per-frequency deviation of measured points from the analytical response.

    ``measured`` is a sequence of objects with ``freq`` and complex
    ``response`` (as returned by the AC sweep), or ``(freq, complex)`` pairs.
    Points at or above ``f_sw/2`` are excluded; those above ``f_sw/4`` are
    reported but left out of the headline maxima.
    """
    pts = [(m.freq, m.response) if hasattr(m, "response") else (m[0], m[1]) for m in measured]
    if not pts:
        raise FrequencyMismatch("no measured points")
    f = np.array([q[0] for q in pts], dtype=float)
    h_m = np.array([q[1] for q in pts], dtype=complex)
    if np.any(f <= 0) or np.any(~np.isfinite(h_m)):
        raise FrequencyMismatch("measured points need positive frequencies and finite responses")
    keep = f < f_sw / 2
    excluded = f[~keep]
    if excluded.size:
        warnings.warn(f"{excluded.size} point(s) at or above f_sw/2 excluded from comparison",
                      stacklevel=2)
    f, h_m = f[keep], h_m[keep]
    h_a = analytical.response(f)
    d_mag = 20 * np.log10(np.abs(h_m) / np.abs(h_a))
    d_ph = _wrap180(np.degrees(np.angle(h_m / h_a)))
    return DeviationReport(freqs=f, d_mag_db=d_mag, d_phase_deg=d_ph,
                           headline_limit=f_sw / 4, excluded=excluded,
                           informational=f > f_sw / 4)
