"""
Radius of analyticity: epsilon(s), spectral-decay fits, the continuation ledger and
the lower-bound curves sigma(T).
"""

import logging
import math
from fractions import Fraction
from typing import List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator
from scipy import stats

from .errors import DomainError
from .spectral import EXP_GUARD, SpectralField2D

logger = logging.getLogger(__name__)

ZK_THETA = 0.25 - 1e-3
MZK_ALPHA = 0.75

Number = Union[int, float, Fraction]


def epsilon_of_s(s: Number) -> Fraction:
    """
    epsilon(s) = min(1/24, s/6 + 1/24) in exact rational arithmetic.

    Floats are converted exactly (Fraction(0.1) is the binary value of 0.1).

    Raises:
        DomainError: If s <= -1/4
    """
    s = Fraction(s)
    if s <= Fraction(-1, 4):
        raise DomainError(f"epsilon(s) needs s > -1/4, got {s}")
    return min(Fraction(1, 24), s / 6 + Fraction(1, 24))


# ---------------------------------------------------------------------------
# Radius estimation
# ---------------------------------------------------------------------------


class RadiusFitConfig(BaseModel):
    """Shell-envelope fit of log|u^| against |gamma|_1."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    floor: float = Field(default=1e-13, gt=0, lt=1)
    drop_low: float = Field(default=0.2, ge=0, lt=1)
    drop_high: float = Field(default=0.1, ge=0, lt=1)
    min_shells: int = Field(default=5, ge=3)
    model: Literal["algebraic_exponential", "exponential"] = "algebraic_exponential"


class RadiusEstimate(BaseModel):
    sigma_hat: float
    window: Tuple[int, int]
    residual: float
    floor_hit: bool
    fit_slope: Optional[float] = None
    shells_used: int = 0


def shell_envelope(F: SpectralField2D) -> Tuple[np.ndarray, float]:
    """
    Max |coefficient| per |gamma|_1 shell of one lattice spacing.

    Returns:
        Tuple of (envelope indexed by shell, shell width)
    """
    w = F.grid.wave_vector()
    width = min(F.grid.d_xi, F.grid.d_eta)
    index = np.floor(w.l1 / width + 1e-9).astype(int)
    envelope = np.zeros(int(index.max()) + 1)
    np.maximum.at(envelope, index.ravel(), np.abs(F.coeffs).ravel())
    return envelope, width


def _fit(
    shells: np.ndarray, envelope: np.ndarray, width: float, model: str
) -> Tuple[float, float]:
    """Least-squares decay rate and RMS residual of log envelope."""
    x = shells * width
    y = np.log(envelope[shells])
    if model == "algebraic_exponential" and len(shells) >= 3 and np.all(x > 0):
        design = np.stack([np.ones_like(x), -x, -np.log(x)], axis=1)
    else:
        design = np.stack([np.ones_like(x), -x], axis=1)
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    residual = float(np.sqrt(np.mean((design @ coef - y) ** 2)))
    return float(coef[1]), residual


def estimate_radius(F: SpectralField2D, cfg: Optional[RadiusFitConfig] = None) -> RadiusEstimate:
    """
    Fit sigma_hat from the exponential decay of the shell envelope.

    Shells below floor*max are discarded; the fit uses the surviving shells after
    dropping the lowest drop_low and highest drop_high fractions. Shells at |gamma|_1 = 0
    are excluded from the algebraic-exponential model.

    Raises:
        DomainError: If the field is identically zero
    """
    cfg = cfg or RadiusFitConfig()
    envelope, width = shell_envelope(F)
    peak = float(envelope.max())
    if peak == 0.0:
        raise DomainError("cannot estimate the radius of a zero field")
    surviving = np.nonzero(envelope > cfg.floor * peak)[0]
    if cfg.model == "algebraic_exponential":
        surviving = surviving[surviving > 0]
    cap = EXP_GUARD / F.grid.max_l1

    if len(surviving) < cfg.min_shells:
        slope: Optional[float] = None
        residual = 0.0
        if len(surviving) >= 2:
            slope, residual = _fit(surviving, envelope, width, "exponential")
        logger.warning(
            f"only {len(surviving)} shells above the noise floor; reporting sigma_hat at the "
            f"guard cap {cap:.4g}"
        )
        window = (int(surviving[0]), int(surviving[-1])) if len(surviving) else (0, 0)
        return RadiusEstimate(
            sigma_hat=cap,
            window=window,
            residual=residual,
            floor_hit=True,
            fit_slope=slope,
            shells_used=len(surviving),
        )

    n = len(surviving)
    lo = int(math.floor(cfg.drop_low * n))
    hi = n - int(math.floor(cfg.drop_high * n))
    shells = surviving[lo:hi]
    if len(shells) < cfg.min_shells:
        shells = surviving
    rate, residual = _fit(shells, envelope, width, cfg.model)
    return RadiusEstimate(
        sigma_hat=max(rate, 0.0),
        window=(int(shells[0]), int(shells[-1])),
        residual=residual,
        floor_hit=False,
        fit_slope=rate,
        shells_used=len(shells),
    )


# ---------------------------------------------------------------------------
# Lifespan and continuation ledger
# ---------------------------------------------------------------------------


def lifespan_T0(norm_sq: float, c0: float = 1.0, d: float = 24.0) -> float:
    """
    T0 = c0 / (1 + ||u0||^2)^d.

    Raises:
        DomainError: If norm_sq < 0, c0 <= 0 or d <= 1
    """
    if norm_sq < 0 or c0 <= 0 or d <= 1:
        raise DomainError(f"lifespan needs norm_sq >= 0, c0 > 0, d > 1; got {norm_sq}, {c0}, {d}")
    return c0 * math.exp(-d * math.log1p(norm_sq))


def continuation_delta(
    norm0: float, c0: float = 1.0, d: float = 24.0, kind: Literal["zk", "mzk"] = "zk"
) -> float:
    """
    Continuation step c0 / (1 + 2 M0)^d (ZK) or c0 / (1 + 4 E0)^d (mZK).

    Raises:
        DomainError: If norm0 < 0 or the kind is unknown
    """
    if norm0 < 0:
        raise DomainError(f"initial norm must be >= 0, got {norm0}")
    factor = {"zk": 2.0, "mzk": 4.0}.get(kind)
    if factor is None:
        raise DomainError(f"kind must be 'zk' or 'mzk', got {kind!r}")
    return c0 * math.exp(-d * math.log1p(factor * norm0))


def _check_positive(**values: float) -> None:
    for name, value in values.items():
        if not value > 0:
            raise DomainError(f"{name} must be positive, got {value}")


def condition2_lhs(
    T: float, delta: float, M0: float, theta: float, C: float, sigma: float
) -> float:
    """(2T/delta) C sigma^theta 2^{3/2} M0^{1/2}."""
    return 2.0 * T / delta * C * sigma**theta * 2.0**1.5 * math.sqrt(M0)


def condition2_sigma(T: float, delta: float, M0: float, theta: float, C: float = 1.0) -> float:
    """
    sigma* solving (2T/delta) C sigma^theta 2^{3/2} M0^{1/2} = 1.

    Raises:
        DomainError: If an input is not positive or theta is outside (0, 1/4)
    """
    _check_positive(T=T, delta=delta, M0=M0, C=C)
    if not 0.0 < theta < 0.25:
        raise DomainError(f"theta must lie in (0, 1/4), got {theta}")
    return (delta / (2.0 * T * C * 2.0**1.5 * math.sqrt(M0))) ** (1.0 / theta)


def condition2_lhs_mzk(
    T: float, delta: float, E0: float, alpha: float, C: float, sigma: float
) -> float:
    """2^4 (T/delta) C sigma^alpha E0 (1 + E0)."""
    return 16.0 * T / delta * C * sigma**alpha * E0 * (1.0 + E0)


def condition2_sigma_mzk(
    T: float, delta: float, E0: float, alpha: float = MZK_ALPHA, C: float = 1.0
) -> float:
    """
    sigma* solving 2^4 (T/delta) C sigma^alpha E0 (1 + E0) = 1.

    Raises:
        DomainError: If an input is not positive or alpha is outside (0, 3/4]
    """
    _check_positive(T=T, delta=delta, E0=E0, C=C)
    if not 0.0 < alpha <= 0.75:
        raise DomainError(f"alpha must lie in (0, 3/4], got {alpha}")
    return (delta / (16.0 * T * C * E0 * (1.0 + E0))) ** (1.0 / alpha)


class LedgerConstants(BaseModel):
    """Unspecified constants of the continuation argument, exposed as inputs."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    C: float = Field(default=1.0, gt=0)
    c0: float = Field(default=1.0, gt=0)
    d: Optional[float] = None
    theta: float = ZK_THETA
    alpha: float = MZK_ALPHA
    s: float = 0.0

    @field_validator("d")
    @classmethod
    def _d_above_one(cls, v: Optional[float]) -> Optional[float]:
        if v is not None and v <= 1:
            raise ValueError(f"d must be > 1, got {v}")
        return v

    @field_validator("theta")
    @classmethod
    def _theta_range(cls, v: float) -> float:
        if not 0.0 < v < 0.25:
            raise ValueError(f"theta must lie in (0, 1/4), got {v}")
        return v

    @field_validator("alpha")
    @classmethod
    def _alpha_range(cls, v: float) -> float:
        if not 0.0 < v <= 0.75:
            raise ValueError(f"alpha must lie in (0, 3/4], got {v}")
        return v

    def exponent_d(self) -> float:
        """d, defaulting to 1/epsilon(s)."""
        return self.d if self.d is not None else float(1 / epsilon_of_s(self.s))


class LedgerRow(BaseModel):
    T: float
    n_steps: int
    sigma_star: float
    sigma: float
    condition2_lhs: float
    induction_target: float
    induction_limit: float

    @property
    def induction_holds(self) -> bool:
        return self.induction_target <= self.induction_limit * (1 + 1e-12)


class ContinuationLedger(BaseModel):
    kind: Literal["zk", "mzk"]
    c0: float
    d: float
    theta: Optional[float] = None
    alpha: Optional[float] = None
    C: float
    norm0: float
    sigma0: float
    T0: float
    delta: float
    n_steps: int
    sigma_schedule: List[Tuple[float, float]]
    condition2_margin: float
    rows: List[LedgerRow]
    surrogate: bool = False


def _steps(T: float, delta: float) -> int:
    """n with n*delta <= T < (n+1)*delta."""
    n = int(math.floor(T / delta))
    if (n + 1) * delta <= T:
        n += 1
    elif n * delta > T:
        n -= 1
    return n


def _build_ledger(
    kind: Literal["zk", "mzk"],
    norm0: float,
    sigma0: float,
    T_list: Sequence[float],
    constants: LedgerConstants,
) -> ContinuationLedger:
    if norm0 <= 0:
        raise DomainError(f"initial norm must be positive, got {norm0}")
    if sigma0 <= 0:
        raise DomainError(f"sigma0 must be positive, got {sigma0}")
    d = constants.exponent_d()
    C = constants.C
    T0 = lifespan_T0(norm0, constants.c0, d)
    delta = continuation_delta(norm0, constants.c0, d, kind)
    exponent = constants.theta if kind == "zk" else constants.alpha

    rows: List[LedgerRow] = []
    for T in sorted(T_list):
        if T <= 0:
            raise DomainError(f"ledger times must be positive, got {T}")
        n = _steps(T, delta)
        if kind == "zk":
            star = condition2_sigma(T, delta, norm0, exponent, C)
            sigma = min(sigma0, star)
            lhs = condition2_lhs(T, delta, norm0, exponent, C, sigma)
            growth = 2.0**1.5 * C * sigma**exponent * norm0**1.5
        else:
            star = condition2_sigma_mzk(T, delta, norm0, exponent, C)
            sigma = min(sigma0, star)
            lhs = condition2_lhs_mzk(T, delta, norm0, exponent, C, sigma)
            growth = 8.0 * C * sigma**exponent * norm0**2 * (1.0 + norm0)
        rows.append(
            LedgerRow(
                T=T,
                n_steps=n,
                sigma_star=star,
                sigma=sigma,
                condition2_lhs=lhs,
                induction_target=norm0 + growth * (n + 1),
                induction_limit=2.0 * norm0,
            )
        )

    # Schedule must be nonincreasing in T
    schedule: List[Tuple[float, float]] = []
    running = sigma0
    for row in rows:
        running = min(running, row.sigma)
        schedule.append((row.T, running))

    margin = 1.0 - max((row.condition2_lhs for row in rows), default=0.0)
    surrogate = not (
        (kind == "zk" and constants.s == 0.0) or (kind == "mzk" and constants.s == 1.0)
    )
    if surrogate:
        logger.warning(
            f"{kind} ledger at s={constants.s} uses the s=0/s=1 formulas through the Gevrey "
            f"embedding; constants are surrogates"
        )
    return ContinuationLedger(
        kind=kind,
        c0=constants.c0,
        d=d,
        theta=constants.theta if kind == "zk" else None,
        alpha=constants.alpha if kind == "mzk" else None,
        C=C,
        norm0=norm0,
        sigma0=sigma0,
        T0=T0,
        delta=delta,
        n_steps=rows[-1].n_steps if rows else 0,
        sigma_schedule=schedule,
        condition2_margin=margin,
        rows=rows,
        surrogate=surrogate,
    )


def build_zk_ledger(
    M0: float, sigma0: float, T_list: Sequence[float], constants: Optional[LedgerConstants] = None
) -> ContinuationLedger:
    """
    Continuation bookkeeping for ZK driven by M0 = M_{sigma0}(0).

    Each row holds the smallness solution sigma*(T), the clamped sigma(T) = min(sigma0, sigma*),
    and the induction bound M(0) + 2^{3/2} C sigma^theta (n+1) M0^{3/2} against 2 M0.
    """
    return _build_ledger("zk", M0, sigma0, T_list, constants or LedgerConstants())


def build_mzk_ledger(
    E0: float, sigma0: float, T_list: Sequence[float], constants: Optional[LedgerConstants] = None
) -> ContinuationLedger:
    """Same bookkeeping for defocusing mZK driven by E0 = E_{sigma0}(0)."""
    return _build_ledger("mzk", E0, sigma0, T_list, constants or LedgerConstants(s=1.0))


# ---------------------------------------------------------------------------
# Lower-bound curves and decay fits
# ---------------------------------------------------------------------------


class BoundCurve(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["ZK_minus4_eps", "mZK_minus4_3"]
    c: float = Field(default=1.0, gt=0)
    eps: float = 1e-2
    sigma0: float = Field(default=1.0, ge=0)
    T0: float = 0.0

    @field_validator("eps")
    @classmethod
    def _eps_positive(cls, v: float) -> float:
        if v <= 0:
            raise ValueError(f"eps must be positive, got {v}")
        return v

    @property
    def exponent(self) -> float:
        if self.kind == "ZK_minus4_eps":
            return -4.0 + self.eps
        return -4.0 / 3.0


def bound_curve_eval(curve: BoundCurve, T: float) -> float:
    """min(sigma0, c T^exponent); sigma0 before the lifespan T0."""
    if T < curve.T0 or T <= 0:
        return curve.sigma0
    return min(curve.sigma0, curve.c * T**curve.exponent)


class DecayFit(BaseModel):
    exponent: float
    prefactor: float
    r_squared: float


def fit_decay_exponent(series: Sequence[Tuple[float, float]]) -> DecayFit:
    """
    Least squares of log sigma against log T.

    Raises:
        DomainError: With fewer than 4 points or any nonpositive entry
    """
    if len(series) < 4:
        raise DomainError(f"need at least 4 points, got {len(series)}")
    data = np.asarray(series, dtype=float)
    if np.any(data <= 0):
        raise DomainError("fit_decay_exponent needs positive T and sigma")
    log_T, log_sigma = np.log(data[:, 0]), np.log(data[:, 1])
    if np.ptp(log_sigma) == 0.0:
        return DecayFit(exponent=0.0, prefactor=float(data[0, 1]), r_squared=1.0)
    fit = stats.linregress(log_T, log_sigma)
    return DecayFit(
        exponent=float(fit.slope),
        prefactor=float(math.exp(fit.intercept)),
        r_squared=float(fit.rvalue**2),
    )
