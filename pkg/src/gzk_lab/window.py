"""Smooth cut-off psi and its dyadic pieces psi_N used by P_N and Q_L."""

from typing import List, Literal, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator

ArrayLike = Union[float, np.ndarray]


class WindowFn(BaseModel):
    """
    Even C-infinity cut-off: psi = 1 on [-plateau, plateau], 0 outside [-support, support].

    The transition on plateau <= |t| <= support is the smooth step
    S(x) = f(x) / (f(x) + f(1 - x)) with f(x) = exp(-1/x), x > 0.
    """

    model_config = ConfigDict(frozen=True)

    kind: Literal["smooth_bump"] = "smooth_bump"
    support: float = 2.0
    plateau: float = 1.0

    @field_validator("plateau")
    @classmethod
    def _plateau_positive(cls, v: float) -> float:
        if v <= 0:
            raise ValueError("plateau must be positive")
        return v

    @property
    def width(self) -> float:
        """Length of the transition region (mollification width)."""
        return self.support - self.plateau

    def __call__(self, t: ArrayLike) -> np.ndarray:
        return window_psi(t, self)


DEFAULT_WINDOW = WindowFn()


def _edge(x: np.ndarray) -> np.ndarray:
    """exp(-1/x) for x > 0, 0 otherwise."""
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = np.exp(-1.0 / x[pos])
    return out


def smooth_step(x: ArrayLike) -> np.ndarray:
    """C-infinity step: 0 for x <= 0, 1 for x >= 1."""
    x = np.asarray(x, dtype=float)
    a = _edge(x)
    b = _edge(1.0 - x)
    return a / (a + b)


def window_psi(t: ArrayLike, window: WindowFn = DEFAULT_WINDOW) -> np.ndarray:
    """
    Evaluate the cut-off psi.

    Args:
        t: Scalar or array of arguments
        window: Window shape (support 2, plateau 1 by default)

    Returns:
        Array of psi(t) values in [0, 1]
    """
    t = np.abs(np.asarray(t, dtype=float))
    return smooth_step((window.support - t) / window.width)


def dyadic_bump(t: ArrayLike, level: int, window: WindowFn = DEFAULT_WINDOW) -> np.ndarray:
    """
    psi_1 = psi and psi_N(t) = psi(t/N) - psi(2t/N) for N >= 2.

    The pieces over N = 1, 2, 4, ... telescope, so their partial sum up to N is psi(t/N).
    """
    t = np.asarray(t, dtype=float)
    if level == 1:
        return window_psi(t, window)
    return window_psi(t / level, window) - window_psi(2.0 * t / level, window)


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def dyadic_levels(max_value: float) -> List[int]:
    """Dyadic levels 1, 2, 4, ..., N_max with N_max the first power of two >= max_value."""
    levels = [1]
    while levels[-1] < max_value:
        levels.append(levels[-1] * 2)
    return levels
