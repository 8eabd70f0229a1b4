"""Declarative model pieces: coefficients, innovations, marginals, MDA cases.

Marginal distributions expose the quartet F, f, Q, fQ together with their
maximum-domain-of-attraction tag and the slowly varying parts of the tail
(L1, L2 in the heavy-tailed case, L3 in the light-tailed case).  All types
are immutable after construction and safe to share between processes.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erfcx, ndtr, ndtri

from .errors import ClampWarning, DomainError, FitError, StateError

_SQRT2PI = math.sqrt(2.0 * math.pi)

# probabilities are clamped to [CLAMP_EPS, 1 - CLAMP_EPS] before applying
# quantile functions, so float saturation of F never produces infinities
CLAMP_EPS = 1e-15

_clamp_events = 0


def clamp_events() -> int:
    """Number of probability clamps recorded in this process so far."""
    return _clamp_events


def reset_clamp_events() -> None:
    global _clamp_events
    _clamp_events = 0


def _record_clamps(count: int) -> None:
    global _clamp_events
    if count:
        _clamp_events += int(count)
        warnings.warn(
            f"clamped {count} probability value(s) at the quantile-domain boundary",
            ClampWarning,
            stacklevel=3,
        )


# ---------------------------------------------------------------------------
# slowly varying functions
# ---------------------------------------------------------------------------


class SlowlyVaryingFn:
    """A slowly varying function L on (1, inf): L(t*u)/L(u) -> 1 for fixed t."""

    def _eval(self, u):
        raise NotImplementedError

    def __call__(self, u):
        return sv_eval(self, u)


@dataclass(frozen=True)
class SvConstant(SlowlyVaryingFn):
    c: float = 1.0

    def __post_init__(self):
        if not self.c > 0:
            raise DomainError(f"constant slowly varying part must be positive, got {self.c}")

    def _eval(self, u):
        return np.broadcast_to(np.float64(self.c), np.shape(u)).copy() if np.ndim(u) else self.c


@dataclass(frozen=True)
class SvLogPower(SlowlyVaryingFn):
    """c * (log u)^b for u > e; held constant at c on (1, e] to stay positive."""

    c: float = 1.0
    b: float = 0.0

    def __post_init__(self):
        if not self.c > 0:
            raise DomainError(f"log-power scale must be positive, got {self.c}")

    def _eval(self, u):
        lg = np.maximum(np.log(u), 1.0)
        return self.c * lg**self.b


@dataclass(frozen=True)
class SvRatio(SlowlyVaryingFn):
    num: SlowlyVaryingFn
    den: SlowlyVaryingFn

    def _eval(self, u):
        return self.num._eval(u) / self.den._eval(u)


@dataclass(frozen=True)
class SvScaled(SlowlyVaryingFn):
    c: float
    inner: SlowlyVaryingFn

    def __post_init__(self):
        if not self.c > 0:
            raise DomainError(f"scale must be positive, got {self.c}")

    def _eval(self, u):
        return self.c * self.inner._eval(u)


@dataclass(frozen=True)
class SvNumeric(SlowlyVaryingFn):
    """Slowly varying part given as a plain numeric function of u.

    Used for marginals whose L has no closed form (the Gaussian light tail,
    fitted empirical tails).  ``fn`` must be picklable, i.e. a module-level
    function or a bound method of a picklable object.
    """

    fn: object
    label: str = ""

    def _eval(self, u):
        return self.fn(u)


def sv_eval(L: SlowlyVaryingFn, u) -> float | np.ndarray:
    """Evaluate a slowly varying function at u > 1."""
    arr = np.asarray(u, dtype=float)
    if np.any(arr <= 1.0):
        raise DomainError("slowly varying functions are evaluated on (1, inf)")
    out = L._eval(arr if arr.ndim else float(arr))
    return out if arr.ndim else float(out)


def slow_variation_ratio(L: SlowlyVaryingFn, lam: float = 2.0, u: float = 1e6) -> float:
    """Return L(lam*u)/L(u); close to 1 for genuinely slowly varying L."""
    return sv_eval(L, lam * u) / sv_eval(L, u)


# ---------------------------------------------------------------------------
# innovations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InnovationDist:
    """Centered i.i.d. innovation law with finite fourth moment.

    ``student_t`` is rescaled by sqrt((nu-2)/nu) so sigma_eps stays the
    standard deviation in both variants; nu > 4 keeps the fourth moment
    finite.
    """

    kind: str
    sigma_eps: float = 1.0
    nu: float | None = None

    def __post_init__(self):
        if self.kind not in ("gaussian", "student_t"):
            raise DomainError(f"unknown innovation kind {self.kind!r}")
        if not self.sigma_eps > 0:
            raise DomainError("sigma_eps must be positive")
        if self.kind == "student_t":
            if self.nu is None or not self.nu > 4:
                raise DomainError("student_t innovations require nu > 4 for a finite fourth moment")

    @classmethod
    def gaussian(cls, sigma_eps: float = 1.0) -> "InnovationDist":
        return cls("gaussian", sigma_eps)

    @classmethod
    def student_t(cls, nu: float, sigma_eps: float = 1.0) -> "InnovationDist":
        return cls("student_t", sigma_eps, nu)

    @property
    def variance(self) -> float:
        return self.sigma_eps**2

    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        if self.kind == "gaussian":
            return self.sigma_eps * rng.standard_normal(count)
        scale = math.sqrt((self.nu - 2.0) / self.nu)
        return self.sigma_eps * scale * rng.standard_t(self.nu, size=count)


# ---------------------------------------------------------------------------
# MDA tags and case classification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MdaTag:
    """Maximum domain of attraction: 'frechet' with tail index, or 'gumbel'."""

    kind: str
    alpha: float | None = None

    def __post_init__(self):
        if self.kind not in ("frechet", "gumbel"):
            raise DomainError(f"unknown MDA kind {self.kind!r}")
        if self.kind == "frechet" and (self.alpha is None or not self.alpha > 0):
            raise DomainError("frechet tag requires a positive tail index")


class MdaCase(enum.Enum):
    """The four combinations of MDA membership for (X, Y)."""

    CASE1 = 1  # X frechet, Y frechet
    CASE2 = 2  # X frechet, Y gumbel
    CASE3 = 3  # X gumbel,  Y frechet
    CASE4 = 4  # X gumbel,  Y gumbel

    @classmethod
    def classify(cls, x_tag: MdaTag, y_tag: MdaTag) -> "MdaCase":
        table = {
            ("frechet", "frechet"): cls.CASE1,
            ("frechet", "gumbel"): cls.CASE2,
            ("gumbel", "frechet"): cls.CASE3,
            ("gumbel", "gumbel"): cls.CASE4,
        }
        return table[(x_tag.kind, y_tag.kind)]


# ---------------------------------------------------------------------------
# marginal distribution of X
# ---------------------------------------------------------------------------


class MarginalX:
    """Interface: cdf F, density f, quantile Q, density-quantile fQ."""

    mda: MdaTag
    L1: SlowlyVaryingFn | None
    L2: SlowlyVaryingFn | None
    L3: SlowlyVaryingFn | None

    def F(self, x):
        raise NotImplementedError

    def f(self, x):
        raise NotImplementedError

    def Q(self, y):
        raise NotImplementedError

    def fQ(self, y):
        return self.f(self.Q(y))

    def F_deriv(self, r: int, x):
        """r-th derivative of F; only analytic variants support r >= 2."""
        raise StateError(f"{type(self).__name__} does not provide analytic derivatives")


def _check_prob_open(y) -> np.ndarray:
    arr = np.asarray(y, dtype=float)
    if np.any(arr <= 0.0) or np.any(arr >= 1.0):
        raise DomainError("quantile-side argument must lie in the open interval (0, 1)")
    return arr


@dataclass(frozen=True)
class GaussianMarginal(MarginalX):
    """Centered Gaussian marginal with total standard deviation s.

    Belongs to the Gumbel domain of attraction.  The slowly varying tail
    part L3 is defined through the von Mises integral
    ``L3(1/y) = (y^-1 * int_{1-y}^1 (1-v)/fQ(v) dv)^-1``, which for the
    Gaussian has the closed form s*(phi(z) - z*(1-Phi(z))), z = Phi^-1(1-y).
    """

    s: float = 1.0

    def __post_init__(self):
        if not self.s > 0:
            raise DomainError("standard deviation must be positive")

    @property
    def mda(self) -> MdaTag:
        return MdaTag("gumbel")

    @property
    def L1(self):
        return None

    @property
    def L2(self):
        return None

    @property
    def L3(self) -> SlowlyVaryingFn:
        return SvNumeric(self._L3, label="gaussian-L3")

    def F(self, x):
        return ndtr(np.asarray(x, dtype=float) / self.s)

    def f(self, x):
        z = np.asarray(x, dtype=float) / self.s
        return np.exp(-0.5 * z * z) / (_SQRT2PI * self.s)

    def Q(self, y):
        return self.s * ndtri(_check_prob_open(y))

    def fQ(self, y):
        z = ndtri(_check_prob_open(y))
        return np.exp(-0.5 * z * z) / (_SQRT2PI * self.s)

    def von_mises_integral(self, y):
        """V(y) = int_{1-y}^1 (1-v)/fQ(v) dv, exact via the Mills ratio."""
        y = _check_prob_open(y)
        z = ndtri(1.0 - y)
        phi = np.exp(-0.5 * z * z) / _SQRT2PI
        # 1 - z*sqrt(pi/2)*erfcx(z/sqrt(2)) equals 1 - z*(1-Phi(z))/phi(z)
        bracket = 1.0 - z * math.sqrt(math.pi / 2.0) * erfcx(z / math.sqrt(2.0))
        return self.s * phi * bracket

    def _L3(self, u):
        u = np.asarray(u, dtype=float)
        return 1.0 / (u * self.von_mises_integral(1.0 / u))

    def F_deriv(self, r: int, x):
        if r < 0:
            raise DomainError("derivative order must be >= 0")
        if r == 0:
            return self.F(x)
        z = np.asarray(x, dtype=float) / self.s
        phi = np.exp(-0.5 * z * z) / _SQRT2PI
        # phi^(m)(z) = (-1)^m He_m(z) phi(z) with probabilists' Hermite He_m
        m = r - 1
        coeffs = np.zeros(m + 1)
        coeffs[m] = 1.0
        he = np.polynomial.hermite_e.hermeval(z, coeffs)
        return (-1.0) ** m * he * phi / self.s**r


@dataclass(frozen=True)
class ParetoMarginal(MarginalX):
    """Exact Pareto marginal, F(x) = 1 - (x/x_m)^-alpha on [x_m, inf).

    Frechet domain of attraction with L1 = x_m and L2 = alpha/x_m constant,
    so the tail relations hold exactly rather than asymptotically.  Used for
    the deterministic scaling checks of the heavy-tailed cases.
    """

    alpha: float
    x_m: float = 1.0

    def __post_init__(self):
        if not self.alpha > 0:
            raise DomainError("tail index must be positive")
        if not self.x_m > 0:
            raise DomainError("scale must be positive")

    @property
    def mda(self) -> MdaTag:
        return MdaTag("frechet", self.alpha)

    @property
    def L1(self) -> SlowlyVaryingFn:
        return SvConstant(self.x_m)

    @property
    def L2(self) -> SlowlyVaryingFn:
        return SvConstant(self.alpha / self.x_m)

    @property
    def L3(self):
        return None

    def F(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= self.x_m, 1.0 - (np.maximum(x, self.x_m) / self.x_m) ** -self.alpha, 0.0)

    def f(self, x):
        x = np.asarray(x, dtype=float)
        inside = x >= self.x_m
        return np.where(
            inside, (self.alpha / self.x_m) * (np.maximum(x, self.x_m) / self.x_m) ** (-self.alpha - 1.0), 0.0
        )

    def Q(self, y):
        y = _check_prob_open(y)
        return self.x_m * (1.0 - y) ** (-1.0 / self.alpha)

    def fQ(self, y):
        y = _check_prob_open(y)
        return (self.alpha / self.x_m) * (1.0 - y) ** (1.0 + 1.0 / self.alpha)

    def F_deriv(self, r: int, x):
        if r < 0:
            raise DomainError("derivative order must be >= 0")
        if r == 0:
            return self.F(x)
        x = np.asarray(x, dtype=float)
        rising = math.prod(self.alpha + i for i in range(r))
        out = (-1.0) ** (r - 1) * rising / self.x_m**r * (np.maximum(x, self.x_m) / self.x_m) ** (
            -self.alpha - r
        )
        return np.where(x >= self.x_m, out, 0.0)


class EmpiricalMarginal(MarginalX):
    """Sample-based marginal: interpolated CDF body with a parametric tail.

    The body is the piecewise-linear interpolant of the empirical CDF on the
    unique sample values up to the threshold x_T (the empirical
    1 - tail_fraction quantile).  Above x_T the tail is

    * ``frechet``: a pure Pareto splice 1 - F(x) = p_T * (x/x_T)^-alpha_hat
      with alpha_hat the Hill estimate, i.e. a constant-L1 fit; or
    * ``gumbel``: a moment-fitted Gaussian tail, rescaled to be continuous
      at x_T.
    """

    def __init__(self, xs, Fs, x_T, tail_fraction, tail_kind, alpha_hat=None, mu=None, sigma=None):
        order = np.argsort(xs)
        self._xs = np.asarray(xs, dtype=float)[order]
        self._Fs = np.asarray(Fs, dtype=float)[order]
        self._x_T = float(x_T)
        self._p_T = float(tail_fraction)
        self._tail_kind = tail_kind
        self._alpha_hat = alpha_hat
        self._mu = mu
        self._sigma = sigma
        if tail_kind == "gumbel":
            self._S_T = float(ndtr(-(self._x_T - mu) / sigma))
        # piecewise-constant body density from the interpolation slopes
        self._slopes = np.diff(self._Fs) / np.diff(self._xs)

    @property
    def mda(self) -> MdaTag:
        if self._tail_kind == "frechet":
            return MdaTag("frechet", self._alpha_hat)
        return MdaTag("gumbel")

    @property
    def alpha_hat(self) -> float | None:
        return self._alpha_hat

    @property
    def threshold(self) -> float:
        return self._x_T

    @property
    def tail_fraction(self) -> float:
        return self._p_T

    @property
    def L1(self):
        if self._tail_kind != "frechet":
            return None
        # Q(1-y) = y^(-1/alpha) * [x_T * p_T^(1/alpha)] exactly in the splice
        return SvConstant(self._x_T * self._p_T ** (1.0 / self._alpha_hat))

    @property
    def L2(self):
        if self._tail_kind != "frechet":
            return None
        return SvConstant(self._alpha_hat / (self._x_T * self._p_T ** (1.0 / self._alpha_hat)))

    @property
    def L3(self):
        if self._tail_kind != "gumbel":
            return None
        return SvNumeric(self._L3, label="empirical-gumbel-L3")

    def F(self, x):
        x = np.asarray(x, dtype=float)
        body = np.interp(x, self._xs, self._Fs)
        if self._tail_kind == "frechet":
            tail = 1.0 - self._p_T * (np.maximum(x, self._x_T) / self._x_T) ** -self._alpha_hat
        else:
            w = (np.maximum(x, self._x_T) - self._mu) / self._sigma
            tail = 1.0 - self._p_T * ndtr(-w) / self._S_T
        return np.where(x <= self._x_T, body, tail)

    def f(self, x):
        x = np.asarray(x, dtype=float)
        idx = np.clip(np.searchsorted(self._xs, x, side="right") - 1, 0, len(self._slopes) - 1)
        body = np.where((x >= self._xs[0]) & (x <= self._xs[-1]), self._slopes[idx], 0.0)
        if self._tail_kind == "frechet":
            tail = (
                self._p_T
                * self._alpha_hat
                / self._x_T
                * (np.maximum(x, self._x_T) / self._x_T) ** (-self._alpha_hat - 1.0)
            )
        else:
            w = (np.maximum(x, self._x_T) - self._mu) / self._sigma
            tail = self._p_T / self._S_T * np.exp(-0.5 * w * w) / (_SQRT2PI * self._sigma)
        return np.where(x <= self._x_T, body, tail)

    def Q(self, y):
        y = _check_prob_open(y)
        body = np.interp(y, self._Fs, self._xs)
        t = 1.0 - y  # tail probability
        if self._tail_kind == "frechet":
            tail = self._x_T * (np.minimum(t, self._p_T) / self._p_T) ** (-1.0 / self._alpha_hat)
        else:
            arg = np.minimum(t, self._p_T) * self._S_T / self._p_T
            tail = self._mu - self._sigma * ndtri(arg)
        return np.where(y <= 1.0 - self._p_T, body, tail)

    def _L3(self, u):
        # integral definition, split at the body/tail boundary
        u = np.asarray(u, dtype=float)
        return 1.0 / (u * self._von_mises_integral(1.0 / u))

    def _von_mises_integral(self, y):
        """int_{1-y}^1 (1-v)/fQ(v) dv for the gumbel-tail variant."""
        y = np.atleast_1d(np.asarray(y, dtype=float))
        # tail contribution: scaled-normal closed form up to w(y)
        w_y = -ndtri(np.minimum(y, self._p_T) * self._S_T / self._p_T)
        phi = np.exp(-0.5 * w_y * w_y) / _SQRT2PI
        bracket = 1.0 - w_y * math.sqrt(math.pi / 2.0) * erfcx(w_y / math.sqrt(2.0))
        out = self._p_T * self._sigma / self._S_T * phi * bracket
        # body contribution: segments are linear in F, so (1-v)/f is explicit
        over = y > self._p_T
        if np.any(over):
            Fs, xs = self._Fs, self._xs
            for i in np.nonzero(over)[0]:
                lo = 1.0 - y[i]
                j0 = np.searchsorted(Fs, lo, side="right") - 1
                contrib = 0.0
                for j in range(j0, len(self._slopes)):
                    a = max(Fs[j], lo)
                    b = Fs[j + 1]
                    if b <= a:
                        continue
                    # int_a^b (1-v)/slope dv
                    contrib += ((1.0 - a) ** 2 - (1.0 - b) ** 2) / (2.0 * self._slopes[j])
                out[i] += contrib
        return out if out.shape != (1,) else float(out[0])


def fit_empirical_marginal(sample, tail_fraction: float, mda: str = "frechet") -> EmpiricalMarginal:
    """Fit an empirical marginal with a parametric upper-tail splice.

    Parameters
    ----------
    sample : array-like
        At least 1e4 observations.
    tail_fraction : float in (0, 1)
        Fraction of the sample used for the tail fit; tail_fraction * size
        must be at least 100.
    mda : {'frechet', 'gumbel'}
        Tail model: Hill/Pareto splice, or moment-fitted Gaussian tail.
    """
    x = np.sort(np.asarray(sample, dtype=float))
    n = x.size
    if n < 10**4:
        raise DomainError(f"need at least 1e4 observations to fit, got {n}")
    if not 0.0 < tail_fraction < 1.0:
        raise DomainError("tail_fraction must lie in (0, 1)")
    k = int(math.floor(tail_fraction * n))
    if k < 100:
        raise DomainError("tail_fraction * size must be at least 100")
    if mda not in ("frechet", "gumbel"):
        raise DomainError(f"unknown MDA tail model {mda!r}")

    x_T = x[n - k - 1]  # order statistic at empirical (1 - k/n) level
    tail = x[n - k :]
    if not np.all(tail > x_T):
        raise FitError("degenerate sample: ties at the tail threshold leave no usable tail")

    # body nodes: unique values up to x_T with exact empirical CDF heights,
    # anchored one average spacing below the minimum so F is continuous at 0
    body = x[: n - k]
    uniq, counts = np.unique(body, return_counts=True)
    Fs = np.cumsum(counts) / n
    spacing = (uniq[-1] - uniq[0]) / max(len(uniq) - 1, 1)
    if spacing <= 0:
        raise FitError("degenerate sample: body has a single support point")
    xs = np.concatenate([[uniq[0] - spacing], uniq])
    Fs = np.concatenate([[0.0], Fs])
    p_T = k / n  # so F(x_T) = 1 - p_T exactly

    if mda == "frechet":
        if x_T <= 0 or np.any(tail <= 0):
            raise FitError("Frechet tail fit requires positive tail values")
        alpha_hat = k / float(np.sum(np.log(tail / x_T)))
        return EmpiricalMarginal(xs, Fs, x_T, p_T, "frechet", alpha_hat=alpha_hat)

    mu = float(np.mean(x))
    sigma = float(np.std(x, ddof=1))
    if sigma <= 0:
        raise FitError("degenerate sample: zero variance")
    return EmpiricalMarginal(xs, Fs, x_T, p_T, "gumbel", mu=mu, sigma=sigma)


# ---------------------------------------------------------------------------
# target marginal of Y
# ---------------------------------------------------------------------------


class TargetMarginalY:
    """Quantile-analytic description of the subordination target F_Y."""

    mda: MdaTag
    L1s: SlowlyVaryingFn | None
    L2s: SlowlyVaryingFn | None
    L3s: SlowlyVaryingFn | None

    def Q(self, u):
        raise NotImplementedError

    def fQ(self, u):
        """Density-quantile function f_Y(Q_Y(u))."""
        raise NotImplementedError

    def integral_Q(self, lo: float, hi: float) -> float:
        """int_lo^hi Q_Y(u) du with 0 <= lo <= hi <= 1; finite when E|Y| is."""
        from scipy.integrate import quad

        val, err = quad(lambda u: self.Q(u), lo, hi, epsabs=1e-12, epsrel=1e-10, limit=400)
        return float(val)

    def cum_Q(self, u):
        """Vectorized antiderivative P(u) = int_0^u Q_Y(v) dv.

        Exact closed form in the concrete targets; the generic fallback
        integrates segment by segment.
        """
        arr = np.atleast_1d(np.asarray(u, dtype=float))
        out = np.array([self.integral_Q(0.0, float(v)) for v in arr])
        return out if np.ndim(u) else float(out[0])

    @property
    def mean(self) -> float:
        return self.integral_Q(0.0, 1.0)


@dataclass(frozen=True)
class ParetoTarget(TargetMarginalY):
    """Pareto target with Q_Y(1-y) = y^(-1/alpha0); needs alpha0 > 1 for E Y < inf."""

    alpha0: float

    def __post_init__(self):
        if not self.alpha0 > 1:
            raise DomainError("Pareto target requires alpha0 > 1 so that E Y is finite")

    @property
    def mda(self) -> MdaTag:
        return MdaTag("frechet", self.alpha0)

    @property
    def L1s(self) -> SlowlyVaryingFn:
        return SvConstant(1.0)

    @property
    def L2s(self) -> SlowlyVaryingFn:
        return SvConstant(self.alpha0)

    @property
    def L3s(self):
        return None

    def Q(self, u):
        return (1.0 - np.asarray(u, dtype=float)) ** (-1.0 / self.alpha0)

    def fQ(self, u):
        # f_Y Q_Y (1-y) = alpha0 * y^(1 + 1/alpha0) exactly
        return self.alpha0 * (1.0 - np.asarray(u, dtype=float)) ** (1.0 + 1.0 / self.alpha0)

    def cum_Q(self, u):
        g = 1.0 - 1.0 / self.alpha0
        return (1.0 - (1.0 - np.asarray(u, dtype=float)) ** g) / g

    def integral_Q(self, lo: float, hi: float) -> float:
        return float(self.cum_Q(hi) - self.cum_Q(lo))


@dataclass(frozen=True)
class ExponentialTarget(TargetMarginalY):
    """Unit exponential target: Q_Y(1-y) = -log y, f_YQ_Y(1-y) = y exactly."""

    @property
    def mda(self) -> MdaTag:
        return MdaTag("gumbel")

    @property
    def L1s(self):
        return None

    @property
    def L2s(self):
        return None

    @property
    def L3s(self) -> SlowlyVaryingFn:
        return SvConstant(1.0)

    def Q(self, u):
        return -np.log1p(-np.asarray(u, dtype=float))

    def fQ(self, u):
        return 1.0 - np.asarray(u, dtype=float)

    def cum_Q(self, u):
        # P(u) = 1 - (1-u)(1 - log(1-u)), with limit 1 at u = 1
        t = 1.0 - np.asarray(u, dtype=float)
        safe = np.where(t > 0.0, t, 1.0)
        return np.where(t > 0.0, 1.0 - safe * (1.0 - np.log(safe)), 1.0)

    def integral_Q(self, lo: float, hi: float) -> float:
        return float(self.cum_Q(hi) - self.cum_Q(lo))


@dataclass(frozen=True)
class LogParetoTarget(TargetMarginalY):
    """Target of the logarithmic transform of a heavy-tailed X.

    Above u0 the quantile is Q_Y(u) = alpha * log Q_X(u); below u0 the body
    is spliced linearly with matched value and slope, which only fixes the
    irrelevant lower tail.  Requires a Frechet-tagged base with Q_X(u0) > 0.
    """

    base: MarginalX
    u0: float = 0.5

    def __post_init__(self):
        if self.base.mda.kind != "frechet":
            raise DomainError("log transform target requires a Frechet-tagged base marginal")
        if not 0.0 < self.u0 < 1.0:
            raise DomainError("u0 must lie in (0, 1)")
        if not self.base.Q(self.u0) > 0:
            raise DomainError("base quantile must be positive at the splice point u0")

    @property
    def mda(self) -> MdaTag:
        return MdaTag("gumbel")

    @property
    def L1s(self):
        return None

    @property
    def L2s(self):
        return None

    @property
    def L3s(self) -> SlowlyVaryingFn:
        return SvNumeric(self._L3s, label="log-pareto-L3")

    def _L3s(self, u):
        u = np.asarray(u, dtype=float)
        a = self.base.mda.alpha
        return sv_eval(self.base.L1, u) * sv_eval(self.base.L2, u) / a

    def _slope0(self) -> float:
        a = self.base.mda.alpha
        return a / (self.base.fQ(self.u0) * self.base.Q(self.u0))

    def Q(self, u):
        u = np.asarray(u, dtype=float)
        a = self.base.mda.alpha
        above = u > self.u0
        q0 = a * math.log(self.base.Q(self.u0))
        upper = a * np.log(self.base.Q(np.where(above, u, self.u0)))
        lower = q0 - self._slope0() * (self.u0 - u)
        out = np.where(above, upper, lower)
        return out if out.ndim else float(out)

    def fQ(self, u):
        u = np.asarray(u, dtype=float)
        a = self.base.mda.alpha
        above = u > self.u0
        uu = np.where(above, u, self.u0)
        upper = self.base.fQ(uu) * self.base.Q(uu) / a
        out = np.where(above, upper, 1.0 / self._slope0())
        return out if out.ndim else float(out)

    def cum_Q(self, u):
        if not isinstance(self.base, ParetoMarginal):
            return super().cum_Q(u)
        # exact Pareto base: Q_Y(v) = alpha*log(x_m) - log(1-v) above u0
        arr = np.asarray(u, dtype=float)
        a = self.base.mda.alpha
        q0 = a * math.log(self.base.Q(self.u0))
        s0 = self._slope0()
        cshift = a * math.log(self.base.x_m)

        def p_exp(v):
            t = 1.0 - v
            safe = np.where(t > 0.0, t, 1.0)
            return np.where(t > 0.0, 1.0 - safe * (1.0 - np.log(safe)), 1.0)

        below = q0 * arr - s0 * (self.u0 * arr - 0.5 * arr**2)
        p_u0 = q0 * self.u0 - 0.5 * s0 * self.u0**2
        vv = np.maximum(arr, self.u0)
        above = p_u0 + cshift * (vv - self.u0) + p_exp(vv) - p_exp(self.u0)
        out = np.where(arr > self.u0, above, below)
        return out if out.ndim else float(out)

    def integral_Q(self, lo: float, hi: float) -> float:
        if not isinstance(self.base, ParetoMarginal):
            return super().integral_Q(lo, hi)
        return float(self.cum_Q(hi) - self.cum_Q(lo))


@dataclass(frozen=True)
class CustomTarget(TargetMarginalY):
    """Target given by explicit Q_Y and f_YQ_Y callables (both picklable)."""

    q_fn: object
    fq_fn: object
    mda_tag: MdaTag
    L1s_fn: SlowlyVaryingFn | None = None
    L2s_fn: SlowlyVaryingFn | None = None
    L3s_fn: SlowlyVaryingFn | None = None

    @property
    def mda(self) -> MdaTag:
        return self.mda_tag

    @property
    def L1s(self):
        return self.L1s_fn

    @property
    def L2s(self):
        return self.L2s_fn

    @property
    def L3s(self):
        return self.L3s_fn

    def Q(self, u):
        return self.q_fn(u)

    def fQ(self, u):
        return self.fq_fn(u)


@dataclass(frozen=True)
class IdentityTarget(TargetMarginalY):
    """F_Y = F_X, so the subordinator G = Q_Y(F(x)) is the identity."""

    mx: MarginalX

    @property
    def mda(self) -> MdaTag:
        return self.mx.mda

    @property
    def L1s(self):
        return self.mx.L1

    @property
    def L2s(self):
        return self.mx.L2

    @property
    def L3s(self):
        return self.mx.L3

    def Q(self, u):
        return self.mx.Q(u)

    def fQ(self, u):
        return self.mx.fQ(u)

    def cum_Q(self, u):
        # closed antiderivatives for the analytic bases
        arr = np.asarray(u, dtype=float)
        if isinstance(self.mx, GaussianMarginal):
            z = ndtri(np.clip(arr, CLAMP_EPS, 1.0 - CLAMP_EPS))
            out = -self.mx.s * np.exp(-0.5 * z * z) / _SQRT2PI
            return out if out.ndim else float(out)
        if isinstance(self.mx, ParetoMarginal):
            a = self.mx.alpha
            if a <= 1:
                raise DomainError("identity target over a Pareto base needs alpha > 1 for E Y < inf")
            g = 1.0 - 1.0 / a
            out = self.mx.x_m * (1.0 - (1.0 - arr) ** g) / g
            return out if out.ndim else float(out)
        return super().cum_Q(u)

    def integral_Q(self, lo: float, hi: float) -> float:
        if isinstance(self.mx, (GaussianMarginal, ParetoMarginal)):
            return float(self.cum_Q(hi) - self.cum_Q(lo))
        return super().integral_Q(lo, hi)


# ---------------------------------------------------------------------------
# coefficient model
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CoefficientModel:
    """Truncated regularly varying coefficients c_k = k^-beta L0(k), c_0 = 1."""

    beta: float
    L0: SlowlyVaryingFn
    M: int
    c: np.ndarray = field(repr=False)

    def __post_init__(self):
        if not 0.5 < self.beta < 1.0:
            raise DomainError("beta must lie in (1/2, 1)")
        if self.M < 0:
            raise DomainError("truncation length must be >= 0")
        if len(self.c) != self.M + 1:
            raise DomainError("coefficient vector must have length M + 1")

    @classmethod
    def build(cls, beta: float, L0: SlowlyVaryingFn | None = None, M: int | None = None) -> "CoefficientModel":
        if L0 is None:
            L0 = SvConstant(1.0)
        if M is None:
            raise DomainError("M is required; use simulate.build_coefficient_model to derive it from a tolerance")
        k = np.arange(1, M + 1, dtype=float)
        # L0 applied on [1, inf); the log-power variant is constant below e
        c = np.concatenate([[1.0], k**-beta * L0._eval(k)])
        return cls(beta, L0, M, c)

    @property
    def total_square_sum(self) -> float:
        return float(np.sum(self.c * self.c))


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------


def marginal_eval(m: MarginalX, which: str, arg):
    """Evaluate one of the named marginal functions F, f, Q, fQ."""
    if which not in ("F", "f", "Q", "fQ"):
        raise DomainError(f"unknown marginal function {which!r}")
    return getattr(m, which)(arg)


def subordinate(mx: MarginalX, ty: TargetMarginalY, x):
    """G(x) = Q_Y(F(x)), with F(x) clamped away from {0, 1} before Q_Y."""
    scalar = np.ndim(x) == 0
    y = np.atleast_1d(np.asarray(mx.F(x), dtype=float))
    n_clamped = int(np.sum((y < CLAMP_EPS) | (y > 1.0 - CLAMP_EPS)))
    if n_clamped:
        np.clip(y, CLAMP_EPS, 1.0 - CLAMP_EPS, out=y)
        _record_clamps(n_clamped)
    out = np.asarray(ty.Q(y), dtype=float)
    return float(out[0]) if scalar else out
