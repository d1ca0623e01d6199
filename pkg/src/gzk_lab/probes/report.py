"""Probe parameters, reports and the shared reduction over trial ratios."""

import math
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from ..analyticity import MZK_ALPHA, ZK_THETA

QUANTILES = (0.5, 0.9, 0.99)

# Allowed max_ratio drift when the band doubles before a probe is flagged unstable
STABILITY_LIMIT = 4.0

# Ratios kept for the histogram CSV; larger samples are thinned by a fixed stride
MAX_STORED_RATIOS = 10_000


class ProbeParams(BaseModel):
    """Sampling and exponent settings shared by every probe."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    trials: int = Field(default=20, ge=1)
    seed: int = 0
    band: int = Field(default=16, ge=1)
    sigma_list: List[float] = [1e-3, 3e-3, 1e-2, 3e-2, 1e-1]
    theta: float = ZK_THETA
    alpha: float = MZK_ALPHA
    s: float = 0.0
    sigma: float = Field(default=0.0, ge=0)
    eps: Optional[float] = None
    box: float = Field(default=8.0 * math.pi, gt=0)
    t_window: float = Field(default=4.0, gt=0)
    n_t: int = Field(default=32, ge=4)
    taper: float = 2.0
    samples: int = Field(default=1_000_000, ge=1)

    @field_validator("sigma_list", mode="before")
    @classmethod
    def _split_list(cls, v: Any) -> Any:
        if isinstance(v, str):
            return [float(item) for item in v.split(",") if item.strip()]
        return v

    @field_validator("sigma_list")
    @classmethod
    def _positive_sigmas(cls, v: List[float]) -> List[float]:
        if not v or any(sigma <= 0 for sigma in v):
            raise ValueError("sigma_list must be a nonempty list of positive values")
        return sorted(v)

    @model_validator(mode="after")
    def _exponent_ranges(self) -> "ProbeParams":
        if not 0.0 <= self.theta < 0.25:
            raise ValueError(f"theta must lie in [0, 1/4), got {self.theta}")
        if not 0.0 <= self.alpha <= 0.75:
            raise ValueError(f"alpha must lie in [0, 3/4], got {self.alpha}")
        return self


class ProbeReport(BaseModel):
    name: str
    params: Dict[str, Any] = {}
    max_ratio: float = 0.0
    ratio_quantiles: Dict[str, float] = {}
    violation_count: int = 0
    skipped: int = 0
    slope: Optional[float] = None
    stability_factor: Optional[float] = None
    stable: Optional[bool] = None
    passed: bool = True
    notes: List[str] = []
    ratios: List[float] = []

    def to_json_dict(self) -> Dict[str, Any]:
        """Report without the per-trial ratios (those go to the histogram CSV)."""
        return self.model_dump(exclude={"ratios"})


def trial_rng(seed: int, trial: int, *stream: int) -> np.random.Generator:
    """Independent stream per trial, so results do not depend on execution order."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(trial, *stream)))


def stability_factor(a: float, b: float) -> Optional[float]:
    if a <= 0 or b <= 0 or not (math.isfinite(a) and math.isfinite(b)):
        return None
    return max(a / b, b / a)


def summarize(
    name: str,
    ratios: Sequence[float],
    params: Optional[Dict[str, Any]] = None,
    violations: int = 0,
    skipped: int = 0,
    exact: bool = False,
) -> ProbeReport:
    """
    Reduce per-trial ratios to a report.

    Args:
        name: Probe name
        ratios: Finite LHS/RHS ratios of the non-skipped trials
        params: Inputs echoed into the report
        violations: Count of samples breaking an exact inequality
        skipped: Trials with a zero denominator
        exact: Whether the inequality is exact mathematics (violations fail the probe)
    """
    values = np.asarray(ratios, dtype=float)
    values = values[np.isfinite(values)]
    quantiles = (
        {f"q{int(q * 100)}": float(np.quantile(values, q)) for q in QUANTILES}
        if values.size
        else {}
    )
    return ProbeReport(
        name=name,
        params=params or {},
        max_ratio=float(values.max()) if values.size else 0.0,
        ratio_quantiles=quantiles,
        violation_count=violations,
        skipped=skipped,
        passed=not (exact and violations > 0),
        ratios=values[:: max(1, math.ceil(values.size / MAX_STORED_RATIOS))].tolist(),
    )
