"""Sampling checks of the scalar exponential inequalities and the min-kernel bound."""

import itertools
import logging
import math
from typing import Literal, Optional

import numpy as np

from ..dynamics import min_kernel_bound_check
from ..errors import DomainError
from .report import ProbeParams, ProbeReport, summarize, trial_rng

logger = logging.getLogger(__name__)

RELATIVE_SLACK = 1e-12

X_RANGE = (1e-8, 1e2)

# Magnitudes of the 2D points in the min-exponential check
POINT_RANGE = (1e-6, 1e3)

SHARP_KERNEL_CONSTANT = 2.0 * math.sqrt(2.0)


def _log_uniform(rng: np.random.Generator, low: float, high: float, size: object) -> np.ndarray:
    return np.exp(rng.uniform(math.log(low), math.log(high), size=size))


def exp_minus_one_check(alpha: float, samples: int = 1_000_000, seed: int = 0) -> ProbeReport:
    """
    e^x - 1 <= x^alpha e^x for x >= 0, sampled log-uniformly on [1e-8, 1e2] plus x = 0.

    Raises:
        DomainError: If alpha is outside [0, 1]
    """
    if not 0.0 <= alpha <= 1.0:
        raise DomainError(f"alpha must lie in [0, 1], got {alpha}")
    x = np.concatenate([[0.0], _log_uniform(trial_rng(seed, 0), *X_RANGE, size=samples)])
    lhs = np.expm1(x)
    # 0^0 = 1
    rhs = np.where(x == 0.0, 1.0 if alpha == 0 else 0.0, x**alpha) * np.exp(x)
    violations = int(np.count_nonzero(lhs > rhs * (1.0 + RELATIVE_SLACK)))
    positive = rhs > 0
    report = summarize(
        "exp_minus_one",
        lhs[positive] / rhs[positive],
        params={"alpha": alpha, "samples": samples, "seed": seed},
        violations=violations,
        skipped=int(np.count_nonzero(~positive)),
        exact=True,
    )
    logger.info(f"exp_minus_one alpha={alpha}: {violations} violations in {x.size} samples")
    return report


def _defect(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """|x|_1 + |y|_1 - |x + y|_1 computed without cancellation."""
    opposite = np.sign(x) * np.sign(y) < 0
    return np.sum(np.where(opposite, 2.0 * np.minimum(np.abs(x), np.abs(y)), 0.0), axis=1)


def min_exp_inequality_check(
    theta: float, sigma: float, samples: int = 1_000_000, seed: int = 0
) -> ProbeReport:
    """
    e^{sigma|x|} e^{sigma|y|} - e^{sigma|x+y|}
        <= [2 sigma min(|x|, |y|)]^theta e^{sigma|x|} e^{sigma|y|}
    for x, y in R^2 with the l1 norm.

    Both sides are divided by e^{sigma(|x|+|y|)}, leaving 1 - e^{-sigma D} against
    (2 sigma min)^theta with D = |x| + |y| - |x + y|. Samples are spread over the 16
    sign patterns of (x1, x2, y1, y2); the aligned case x = y, the antipodal case
    x = -y and a zero point are added explicitly.

    Raises:
        DomainError: If theta is outside [0, 1] or sigma <= 0
    """
    if not 0.0 <= theta <= 1.0:
        raise DomainError(f"theta must lie in [0, 1], got {theta}")
    if sigma <= 0:
        raise DomainError(f"sigma must be positive, got {sigma}")
    rng = trial_rng(seed, 0)
    patterns = np.array(list(itertools.product((1.0, -1.0), repeat=4)))
    per_pattern = max(1, samples // len(patterns))
    mags = _log_uniform(rng, *POINT_RANGE, size=(len(patterns), per_pattern, 4))
    points = (mags * patterns[:, None, :]).reshape(-1, 4)
    special = _log_uniform(rng, *POINT_RANGE, size=(3, 2))
    extra = np.array(
        [
            np.concatenate([special[0], special[0]]),
            np.concatenate([special[1], -special[1]]),
            np.concatenate([special[2], [0.0, 0.0]]),
        ]
    )
    points = np.vstack([points, extra])
    x, y = points[:, :2], points[:, 2:]

    lhs = -np.expm1(-sigma * _defect(x, y))
    base = 2.0 * sigma * np.minimum(np.abs(x).sum(axis=1), np.abs(y).sum(axis=1))
    rhs = np.where(base == 0.0, 1.0 if theta == 0 else 0.0, base**theta)
    violations = int(np.count_nonzero(lhs > rhs * (1.0 + RELATIVE_SLACK)))
    positive = rhs > 0
    logger.info(
        f"min_exp theta={theta} sigma={sigma}: {violations} violations in {len(points)} pairs"
    )
    return summarize(
        "min_exp",
        lhs[positive] / rhs[positive],
        params={"theta": theta, "sigma": sigma, "samples": len(points), "seed": seed},
        violations=violations,
        skipped=int(np.count_nonzero(~positive)),
        exact=True,
    )


def kernel_bound_probe(
    p: ProbeParams,
    C: Optional[float] = None,
    norm: Literal["l1", "l2"] = "l1",
) -> ProbeReport:
    """
    min(|gamma - gamma1|, |gamma1|) <= C <gamma - gamma1><gamma1>/<gamma> by sampling.

    C defaults to the sharp l1 constant 2*sqrt(2); the Euclidean minimum holds with 2.
    """
    if C is None:
        C = SHARP_KERNEL_CONSTANT if norm == "l1" else 2.0
    violations, max_ratio = min_kernel_bound_check(trial_rng(p.seed, 0), p.samples, C, norm)
    report = summarize(
        "kernel",
        [max_ratio],
        params={"C": C, "norm": norm, "samples": p.samples, "seed": p.seed},
        violations=violations,
        exact=True,
    )
    return report
