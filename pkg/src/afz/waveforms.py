"""Sampled per-component waveforms shared by the analytical and simulated layers."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

CHANNELS = ("i_L", "v_L", "i_Lm", "v_Lm", "i_Cd", "v_Cd", "i_S", "v_DS",
            "i_D1", "v_D1", "i_D2", "v_D2", "i_Dd1", "i_Dd2")


@dataclass(frozen=True)
class ChannelSummary:
    mean: float
    rms: float
    min: float
    max: float


def _trapz(y, t):
    return float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(t)))


@dataclass(frozen=True)
class WaveformSet:
    """Channels sampled on a common (possibly non-uniform) time grid.

    Repeated time stamps are allowed and mark switching discontinuities:
    the first sample holds the value just before the edge, the second the
    value just after it.
    """
    time: np.ndarray
    channels: dict
    summary: dict = field(default_factory=dict)

    @classmethod
    def build(cls, time, channels) -> "WaveformSet":
        time = np.asarray(time, dtype=float)
        chans = {name: np.asarray(channels[name], dtype=float) for name in channels}
        span = time[-1] - time[0]
        summary = {}
        for name, y in chans.items():
            mean = _trapz(y, time) / span if span > 0 else float(y[0])
            ms = _trapz(y * y, time) / span if span > 0 else float(y[0] ** 2)
            summary[name] = ChannelSummary(mean=mean, rms=float(np.sqrt(max(ms, 0.0))),
                                           min=float(np.min(y)), max=float(np.max(y)))
        return cls(time=time, channels=chans, summary=summary)

    def __getitem__(self, name) -> np.ndarray:
        return self.channels[name]

    @property
    def period(self) -> float:
        return float(self.time[-1] - self.time[0])

    def mean(self, name) -> float:
        return self.summary[name].mean

    def rms(self, name) -> float:
        return self.summary[name].rms

    def window(self, t_start, t_stop) -> "WaveformSet":
        """Sub-set of samples with ``t_start <= t <= t_stop``."""
        keep = (self.time >= t_start) & (self.time <= t_stop)
        return WaveformSet.build(self.time[keep], {k: v[keep] for k, v in self.channels.items()})

    def resample(self, n_samples) -> "WaveformSet":
        """Uniform grid of ``n_samples`` points spanning the same interval.

        At a repeated time stamp the post-edge value is used.
        """
        t = self.time
        # drop the pre-edge member of each duplicated stamp so np.interp is well posed
        keep = np.append(np.diff(t) > 0, True)
        grid = np.linspace(t[0], t[-1], n_samples)
        return WaveformSet.build(grid, {k: np.interp(grid, t[keep], v[keep])
                                        for k, v in self.channels.items()})
