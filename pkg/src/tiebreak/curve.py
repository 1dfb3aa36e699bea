"""Efficiency / gain tradeoff curves."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class TradeoffCurve:
    """Efficiency and gain along an increasing grid of window sizes.

    ``log_efficiency`` is the natural log of the determinant criterion;
    ``status`` holds ``"ok"`` or a per-point error description.
    """

    delta: np.ndarray
    log_efficiency: np.ndarray
    gain: np.ndarray
    gain_bound: float = float("nan")
    status: tuple[str, ...] = ()
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        delta = np.asarray(self.delta, dtype=np.float64)
        if delta.ndim != 1 or delta.size == 0:
            raise ValueError("delta grid must be a nonempty vector")
        if np.any(np.diff(delta) <= 0):
            raise ValueError("delta grid must be strictly increasing")
        object.__setattr__(self, "delta", delta)
        object.__setattr__(self, "log_efficiency", np.asarray(self.log_efficiency, dtype=np.float64))
        object.__setattr__(self, "gain", np.asarray(self.gain, dtype=np.float64))
        if not self.status:
            object.__setattr__(self, "status", ("ok",) * delta.size)

    @property
    def efficiency(self) -> np.ndarray:
        return np.exp(self.log_efficiency)

    @property
    def gain_normalized(self) -> np.ndarray:
        return self.gain / self.gain_bound

    @property
    def log_gain(self) -> np.ndarray:
        """Natural log of the gain where positive, NaN elsewhere."""
        out = np.full(self.gain.shape, np.nan)
        pos = self.gain > 0
        out[pos] = np.log(self.gain[pos])
        return out

    def __len__(self) -> int:
        return self.delta.size
