# tools/flory_huggins.py
"""
Flory-Huggins (logarithmic) double-well potential and its global regularization.

Responsibilities
- Evaluate W(u) = (theta/2)((1-u)ln(1-u) + (1+u)ln(1+u)) + (1-u^2)/2 and its first two
  derivatives, vectorized over numpy arrays.
- Split W = W1 - W2 into a convex logarithmic part W1 and the quadratic W2 = (u^2-1)/2.
- Locate the positive well bottom u_theta (root of W'(u) = 0 in (0, 1)) by safeguarded Newton.
- Build the modified potential: W is kept on [-u_hat, u_hat] and continued beyond it by
  integrating a truncated Taylor series of W1', which makes it finite on the whole real line.

Conventions
- 0 * ln 0 is taken as 0, so W(+-1) = theta * ln 2.
- Derivatives are singular at |u| = 1. The guard mode decides what happens within
  GUARD_WIDTH of the singularity: "strict" raises PotentialDomainError, "clamped"
  evaluates at sign(u) * (1 - GUARD_WIDTH).
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, replace
from functools import lru_cache
from typing import Any, Dict, NamedTuple, Tuple, Union

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.special import xlogy

from tools.errors import ConstructionError, ConvergenceError, PotentialDomainError, ValidationError

logger = logging.getLogger(__name__)
logger.addHandler(logging.NullHandler())

ArrayLike = Union[float, np.ndarray]

GUARD_WIDTH = 1e-12
GUARD_MODES = ("strict", "clamped")

DEFAULT_C = 2.0
DEFAULT_SLACK = 2.0
MAX_TRUNCATION_ORDER = 10_000


@dataclass(frozen=True)
class PotentialParams:
    """Rescaled temperature of the mixture; wells exist only for 0 < theta < 1."""

    theta: float

    def __post_init__(self):
        if not (0.0 < self.theta < 1.0) or not math.isfinite(self.theta):
            raise ValidationError(f"theta must lie in (0, 1), got {self.theta!r}")


class PotentialValues(NamedTuple):
    w: ArrayLike
    dw: ArrayLike
    d2w: ArrayLike


class RootReport(NamedTuple):
    root: float
    iterations: int
    residual: float
    bracket: Tuple[float, float]


# -------------------------
# Guards
# -------------------------
def _as_array(u: ArrayLike) -> np.ndarray:
    return np.asarray(u, dtype=np.float64)


def _unwrap(x: np.ndarray, like: ArrayLike) -> ArrayLike:
    return float(x) if np.ndim(like) == 0 else x


def _guard_open(u: np.ndarray, guard: str) -> np.ndarray:
    """Return u restricted to |u| < 1 for derivative evaluation."""
    if guard not in GUARD_MODES:
        raise ValidationError(f"unknown guard mode {guard!r}; expected one of {GUARD_MODES}")
    limit = 1.0 - GUARD_WIDTH
    if guard == "clamped":
        return np.clip(u, -limit, limit)
    bad = ~(np.abs(u) < limit)
    if np.any(bad):
        worst = float(np.max(np.abs(u[bad]))) if u.ndim else float(abs(u))
        raise PotentialDomainError(
            f"derivative of W requested at |u| = {worst!r} >= 1 - {GUARD_WIDTH:g} (strict guard)"
        )
    return u


def _guard_closed(u: np.ndarray, guard: str) -> np.ndarray:
    if guard not in GUARD_MODES:
        raise ValidationError(f"unknown guard mode {guard!r}; expected one of {GUARD_MODES}")
    if guard == "clamped":
        return np.clip(u, -1.0, 1.0)
    bad = ~(np.abs(u) <= 1.0)
    if np.any(bad):
        worst = float(np.max(np.abs(u[bad]))) if u.ndim else float(abs(u))
        raise PotentialDomainError(f"W is undefined at |u| = {worst!r} > 1")
    return u


# -------------------------
# W = W1 - W2
# -------------------------
def w1_values(u: ArrayLike, theta: float, guard: str = "strict") -> PotentialValues:
    """Convex logarithmic part W1 and its derivatives."""
    x = _as_array(u)
    xc = _guard_closed(x, guard)
    w1 = 0.5 * theta * (xlogy(1.0 - xc, 1.0 - xc) + xlogy(1.0 + xc, 1.0 + xc))
    xo = _guard_open(x, guard)
    dw1 = theta * np.arctanh(xo)
    d2w1 = theta / (1.0 - xo * xo)
    return PotentialValues(_unwrap(w1, u), _unwrap(dw1, u), _unwrap(d2w1, u))


def w2_values(u: ArrayLike) -> PotentialValues:
    """Smooth concave-complement part W2 = (u^2 - 1)/2."""
    x = _as_array(u)
    return PotentialValues(
        _unwrap(0.5 * (x * x - 1.0), u), _unwrap(x.copy(), u), _unwrap(np.ones_like(x), u)
    )


def w_value(u: ArrayLike, p: PotentialParams, guard: str = "strict") -> ArrayLike:
    """W(u) on the closed interval [-1, 1]."""
    x = _guard_closed(_as_array(u), guard)
    w = 0.5 * p.theta * (xlogy(1.0 - x, 1.0 - x) + xlogy(1.0 + x, 1.0 + x)) + 0.5 * (1.0 - x * x)
    return _unwrap(w, u)


def w_prime(u: ArrayLike, p: PotentialParams, guard: str = "strict") -> ArrayLike:
    """W'(u) = (theta/2) ln((1+u)/(1-u)) - u."""
    x = _guard_open(_as_array(u), guard)
    return _unwrap(p.theta * np.arctanh(x) - x, u)


def w_second(u: ArrayLike, p: PotentialParams, guard: str = "strict") -> ArrayLike:
    """W''(u) = theta/(1-u^2) - 1."""
    x = _guard_open(_as_array(u), guard)
    return _unwrap(p.theta / (1.0 - x * x) - 1.0, u)


def potential_values(u: ArrayLike, p: PotentialParams, guard: str = "strict") -> PotentialValues:
    """
    Evaluate (W, W', W'') at u.

    All three need |u| < 1 - GUARD_WIDTH in strict mode; use w_value alone for the
    endpoints u = +-1.
    """
    return PotentialValues(w_value(u, p, guard), w_prime(u, p, guard), w_second(u, p, guard))


def spinodal_edge(p: PotentialParams) -> float:
    """Positive edge of the interval where W'' < 0."""
    return math.sqrt(1.0 - p.theta)


# -------------------------
# u_theta
# -------------------------
def find_u_theta_report(p: PotentialParams, tol: float = 1e-14, max_iter: int = 200) -> RootReport:
    """
    Safeguarded Newton for the positive root of W'(u) = 0.

    W' < 0 on (0, u_theta) and W' -> +inf as u -> 1, so the bracket starts as
    [sqrt(1 - theta), 1). The iteration starts at the spinodal edge, where W'' = 0,
    so the first step is always a bisection. Newton steps that leave the bracket or
    do not halve the residual fast enough fall back to bisection.
    """
    if not tol > 0:
        raise ValidationError(f"tol must be positive, got {tol!r}")

    theta = p.theta
    lo = spinodal_edge(p)
    hi = 1.0

    def f_and_df(x: float) -> Tuple[float, float]:
        return theta * math.atanh(x) - x, theta / (1.0 - x * x) - 1.0

    x = lo
    f, df = f_and_df(x)
    dxold = hi - lo
    dx = dxold

    for it in range(1, max_iter + 1):
        newton_ok = df != 0.0 and lo < x - f / df < hi and abs(2.0 * f) <= abs(dxold * df)
        if newton_ok:
            dxold = dx
            dx = f / df
            x = x - dx
        else:
            dxold = dx
            dx = 0.5 * (hi - lo)
            x = lo + dx

        if abs(dx) < tol:
            f, _ = f_and_df(x)
            logger.debug("find_u_theta: theta=%s root=%r after %d iterations", theta, x, it)
            return RootReport(x, it, abs(f), (lo, hi))

        f, df = f_and_df(x)
        if f == 0.0:
            return RootReport(x, it, 0.0, (lo, hi))
        if f < 0.0:
            lo = x
        else:
            hi = x

    raise ConvergenceError(
        f"Newton for u_theta did not converge in {max_iter} iterations (theta={theta}, bracket=[{lo!r}, {hi!r}])",
        bracket=(lo, hi),
        iterations=max_iter,
    )


def find_u_theta(p: PotentialParams, tol: float = 1e-14) -> float:
    return find_u_theta_report(p, tol=tol).root


# -------------------------
# Modified potential
# -------------------------
@lru_cache(maxsize=32)
def _series_coefficients(k: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Coefficients in v = u^2 of the truncated series, j = 0..k:
      W1'  ~ u * sum v^j / (2j+1)
      W1'' ~     sum v^j
      int  ~     sum v^(j+1) / ((2j+1)(2j+2))
    """
    j = np.arange(k + 1, dtype=np.float64)
    first = 1.0 / (2.0 * j + 1.0)
    second = np.ones(k + 1)
    integral = np.concatenate(([0.0], 1.0 / ((2.0 * j + 1.0) * (2.0 * j + 2.0))))
    for arr in (first, second, integral):
        arr.setflags(write=False)
    return first, second, integral


@dataclass(frozen=True)
class ModifiedPotential:
    theta: float
    u_theta: float
    u_hat: float
    k: int
    C: float
    w1_at_uhat: float
    derivative_jump: float
    slack: float = DEFAULT_SLACK

    def truncated_first(self, u: ArrayLike) -> ArrayLike:
        """theta * (u + u^3/3 + ... + u^(2k+1)/(2k+1))."""
        first, _, _ = _series_coefficients(self.k)
        x = _as_array(u)
        with np.errstate(over="ignore", invalid="ignore"):
            return _unwrap(self.theta * x * P.polyval(x * x, first), u)

    def truncated_second(self, u: ArrayLike) -> ArrayLike:
        """theta * (1 + u^2 + ... + u^(2k))."""
        _, second, _ = _series_coefficients(self.k)
        x = _as_array(u)
        with np.errstate(over="ignore", invalid="ignore"):
            return _unwrap(self.theta * P.polyval(x * x, second), u)

    def truncated_integral(self, u: ArrayLike) -> ArrayLike:
        """Antiderivative of truncated_first vanishing at 0."""
        _, _, integral = _series_coefficients(self.k)
        x = _as_array(u)
        with np.errstate(over="ignore", invalid="ignore"):
            return _unwrap(self.theta * P.polyval(x * x, integral), u)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def build_modified_potential(
    p: PotentialParams,
    C: float = DEFAULT_C,
    slack: float = DEFAULT_SLACK,
    max_k: int = MAX_TRUNCATION_ORDER,
) -> ModifiedPotential:
    """
    Construct the globally defined potential for temperature p.theta.

    u_hat is the smallest u >= sqrt(1 - theta/C) (where W1'' = C) with W1'(u) >= slack * C,
    i.e. max(sqrt(1 - theta/C), tanh(slack * C / theta)). With slack > 1 the full series
    of W1' at u_hat exceeds C, so a finite truncation order k does too; k is the smallest
    order for which both truncated series are strictly above C.
    """
    if not (C > 1.0) or not math.isfinite(C):
        raise ValidationError(f"C must be a finite number > 1, got {C!r}")
    if not slack > 1.0:
        raise ValidationError(f"slack must be > 1, got {slack!r}")

    theta = p.theta
    u_theta = find_u_theta(p)
    u_hat = max(math.sqrt(1.0 - theta / C), math.tanh(slack * C / theta))
    if not u_hat < 1.0:
        raise ConstructionError(
            f"u_hat for C={C}, theta={theta} rounds to 1.0 in double precision; "
            f"W1'(u) >= {slack * C:g} needs 1 - u < 2*exp(-{2 * slack * C / theta:.1f})"
        )
    if not u_hat > u_theta:
        raise ConstructionError(f"u_hat={u_hat!r} does not exceed u_theta={u_theta!r}")

    u2 = u_hat * u_hat
    power = u_hat  # u_hat^(2j+1)
    first_sum = 0.0
    second_sum = 0.0
    k = -1
    for j in range(max_k + 1):
        first_sum += power / (2 * j + 1)
        second_sum += power / u_hat
        power *= u2
        if theta * first_sum > C and theta * second_sum > C:
            k = j
            break
    if k < 0:
        raise ConstructionError(
            f"no truncation order k <= {max_k} satisfies both series conditions for "
            f"C={C}, theta={theta} at u_hat={u_hat!r} (series reached {theta * first_sum:.4f})"
        )

    w1_hat = w1_values(u_hat, theta).w
    dw1_hat = theta * math.atanh(u_hat)
    m = ModifiedPotential(
        theta=theta,
        u_theta=u_theta,
        u_hat=u_hat,
        k=k,
        C=float(C),
        w1_at_uhat=float(w1_hat),
        derivative_jump=0.0,
        slack=float(slack),
    )
    jump = dw1_hat - float(m.truncated_first(u_hat))
    m = replace(m, derivative_jump=jump)
    logger.info(
        "Modified potential: theta=%s C=%s u_hat=%.15f k=%d derivative jump=%.6g",
        theta, C, u_hat, k, jump,
    )
    return m


def modified_values(u: ArrayLike, m: ModifiedPotential) -> Tuple[ArrayLike, ArrayLike]:
    """
    (W~, W~') on the whole real line.

    Exact W and W' on |u| <= u_hat; for |u| > u_hat the polynomial continuation
    W1(u_hat) + int_{u_hat}^{|u|} series - W2(u), extended as an even function.
    """
    x = np.atleast_1d(_as_array(u))
    a = np.abs(x)
    inside = a <= m.u_hat
    outside = ~inside
    p = PotentialParams(m.theta)

    w = np.empty_like(a)
    dw = np.empty_like(a)
    if np.any(inside):
        w[inside] = w_value(x[inside], p)
        dw[inside] = w_prime(x[inside], p, guard="clamped")
    if np.any(outside):
        ao = a[outside]
        tail = m.truncated_integral(ao) - m.truncated_integral(m.u_hat)
        w[outside] = m.w1_at_uhat + tail - 0.5 * (ao * ao - 1.0)
        dw[outside] = np.sign(x[outside]) * (m.truncated_first(ao) - ao)
    shape = np.shape(u)
    return _unwrap(w.reshape(shape), u), _unwrap(dw.reshape(shape), u)


def modified_second_derivative(u: ArrayLike, m: ModifiedPotential) -> ArrayLike:
    """W~''; exact W'' inside the window, truncated series minus 1 outside."""
    x = np.atleast_1d(_as_array(u))
    a = np.abs(x)
    inside = a <= m.u_hat
    outside = ~inside
    out = np.empty_like(a)
    if np.any(inside):
        out[inside] = w_second(x[inside], PotentialParams(m.theta), guard="clamped")
    if np.any(outside):
        out[outside] = m.truncated_second(a[outside]) - 1.0
    return _unwrap(out.reshape(np.shape(u)), u)
