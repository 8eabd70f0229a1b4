"""Deterministic scaling constants of the extreme-sum limit theorem.

Everything here is a pure function of the declared model: the reduction
order p, the variance scale sigma_{n,p}, the uniform rate d_{n,p}, the
feasibility threshold for the extreme-count exponent xi, the normalizing
constant A_n with its slowly varying corrections, the Karamata integral
K_n (their product tends to 1), the centering mu_n, and the i.i.d.
baseline scale used for the LRD-vs-iid contrast diagnostic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from .errors import ConfigError, DomainError, InfeasibleConfigError, NumericError
from .model import (
    MarginalX,
    MdaCase,
    SlowlyVaryingFn,
    SvRatio,
    SvScaled,
    TargetMarginalY,
    sv_eval,
)

# quadrature defaults: absolute/relative tolerances and the endpoint split
QUAD_EPSABS = 1e-8
QUAD_EPSREL = 1e-6
ENDPOINT_SPLIT = 1e-12

# conventional star labels of the four feasibility conditions on xi
CASE_LABELS = {
    MdaCase.CASE1: "(*)",
    MdaCase.CASE2: "(**)",
    MdaCase.CASE3: "(***)",
    MdaCase.CASE4: "(****)",
}


def select_p(beta: float) -> int:
    """Smallest positive integer p with (p+1)(2*beta - 1) > 1."""
    if not 0.5 < beta < 1.0:
        raise DomainError("beta must lie in (1/2, 1)")
    p = 1
    while (p + 1) * (2.0 * beta - 1.0) <= 1.0:
        p += 1
    return p


def sigma_np_asymptotic(n: int, p: int, beta: float, L0: SlowlyVaryingFn) -> float:
    """Asymptotic scale (n^(2 - p(2*beta-1)) L0(n)^(2p))^(1/2); needs p < 1/(2*beta-1)."""
    if not 0.5 < beta < 1.0:
        raise DomainError("beta must lie in (1/2, 1)")
    if not p * (2.0 * beta - 1.0) < 1.0:
        raise DomainError(f"p = {p} violates p < (2*beta - 1)^-1 = {1.0 / (2 * beta - 1):.4g}")
    return math.sqrt(n ** (2.0 - p * (2.0 * beta - 1.0)) * sv_eval(L0, float(n)) ** (2 * p))


def sigma_ratio_asymptotic(n: int, p: int, beta: float, L0: SlowlyVaryingFn) -> float:
    """Asymptotic ratio sigma_{n,p}/sigma_{n,1} = n^(-(beta-1/2)(p-1)) L0(n)^(p-1).

    This is the relation the reduction argument uses to renormalize between
    orders; unlike ``sigma_np_asymptotic`` it is stated for every p >= 1.
    """
    if not 0.5 < beta < 1.0:
        raise DomainError("beta must lie in (1/2, 1)")
    if p < 1:
        raise DomainError("p must be >= 1")
    return n ** (-(beta - 0.5) * (p - 1)) * sv_eval(L0, float(n)) ** (p - 1)


def d_np(n: int, p: int, beta: float, L0: SlowlyVaryingFn) -> float:
    """Uniform reduction-principle rate d_{n,p}.

    Branch on (p+1)(2*beta-1) >= 1: the n^-(1-beta) rate with (log n)^(5/2),
    else the n^(-p(beta-1/2)) rate with (log n)^(1/2); both carry the
    (log log n)^(3/4) factor.
    """
    if n < 16:
        raise DomainError("n must be >= 16 so that log log n is positive")
    if p < 1:
        raise DomainError("p must be >= 1")
    ln = math.log(n)
    lln = math.log(ln)
    L0n = sv_eval(L0, float(n))
    if (p + 1) * (2.0 * beta - 1.0) >= 1.0:
        return n ** -(1.0 - beta) / L0n * ln**2.5 * lln**0.75
    return n ** (-p * (beta - 0.5)) * L0n**p * ln**0.5 * lln**0.75


def xi_threshold(case: MdaCase, beta: float, alpha: float | None = None, alpha0: float | None = None) -> float:
    """Lower bound on the extreme-count exponent xi for the given case.

    Feasibility (threshold < 1) requires alpha0 > (1-beta)^-1 in Cases 1
    and 3; Cases 1 and 2 additionally require alpha >= 4 because the
    innovations have a finite fourth moment.
    """
    if not 0.5 < beta < 1.0:
        raise DomainError("beta must lie in (1/2, 1)")
    if case in (MdaCase.CASE1, MdaCase.CASE2):
        if alpha is None:
            raise DomainError(f"{case.name} requires the tail index alpha of X")
        if alpha < 4:
            raise InfeasibleConfigError(
                f"alpha = {alpha} < 4: finite fourth innovation moment forces alpha >= 4 in {case.name}"
            )
    if case in (MdaCase.CASE1, MdaCase.CASE3):
        if alpha0 is None:
            raise DomainError(f"{case.name} requires the tail index alpha0 of Y")

    if case is MdaCase.CASE1:
        thr = (beta + 1.0 / alpha) / (1.0 + 1.0 / alpha - 1.0 / alpha0)
    elif case is MdaCase.CASE2:
        thr = (beta + 1.0 / alpha) / (1.0 + 1.0 / alpha)
    elif case is MdaCase.CASE3:
        thr = beta / (1.0 - 1.0 / alpha0)
    else:
        thr = beta
    if thr >= 1.0:
        raise InfeasibleConfigError(
            f"{case.name} infeasible: xi threshold {thr:.4g} >= 1 "
            f"(needs alpha0 > (1 - beta)^-1 = {1.0 / (1.0 - beta):.4g})"
        )
    return thr


@dataclass(frozen=True)
class LFamily:
    """Slowly varying corrections derived from the two marginals.

    L11..L14 are the marginal ratios, L21..L24 include the Karamata
    constants of the four cases.  Members whose ingredients are absent for
    the given case pair are None.
    """

    alpha: float | None
    alpha0: float | None
    L11: SlowlyVaryingFn | None = None
    L12: SlowlyVaryingFn | None = None
    L13: SlowlyVaryingFn | None = None
    L14: SlowlyVaryingFn | None = None
    L21: SlowlyVaryingFn | None = None
    L22: SlowlyVaryingFn | None = None
    L23: SlowlyVaryingFn | None = None
    L24: SlowlyVaryingFn | None = None

    @classmethod
    def from_marginals(cls, mx: MarginalX, ty: TargetMarginalY) -> "LFamily":
        alpha = mx.mda.alpha
        alpha0 = ty.mda.alpha if ty.mda.kind == "frechet" else None
        kw = {}
        if mx.L2 is not None and ty.L2s is not None:
            kw["L11"] = SvRatio(ty.L2s, mx.L2)
            kw["L21"] = SvScaled(1.0 / alpha - 1.0 / alpha0 + 1.0, kw["L11"])
        if mx.L2 is not None and ty.L3s is not None:
            kw["L12"] = SvRatio(ty.L3s, mx.L2)
            kw["L22"] = SvScaled(1.0 / alpha + 1.0, kw["L12"])
        if mx.L3 is not None and ty.L2s is not None:
            kw["L13"] = SvRatio(ty.L2s, mx.L3)
            # constant uses the target index alpha0, matching the exponent
            # 1 - 1/alpha0 in the normalizer's table
            kw["L23"] = SvScaled(1.0 - 1.0 / alpha0, kw["L13"])
        if mx.L3 is not None and ty.L3s is not None:
            kw["L14"] = SvRatio(ty.L3s, mx.L3)
            kw["L24"] = kw["L14"]
        return cls(alpha=alpha, alpha0=alpha0, **kw)


_CASE_EXPONENT = {
    MdaCase.CASE1: lambda a, a0: 1.0 + 1.0 / a - 1.0 / a0,
    MdaCase.CASE2: lambda a, a0: 1.0 + 1.0 / a,
    MdaCase.CASE3: lambda a, a0: 1.0 - 1.0 / a0,
    MdaCase.CASE4: lambda a, a0: 1.0,
}

_CASE_L2J = {
    MdaCase.CASE1: "L21",
    MdaCase.CASE2: "L22",
    MdaCase.CASE3: "L23",
    MdaCase.CASE4: "L24",
}


def big_A(case: MdaCase, n: int, k_n: int, lfam: LFamily) -> float:
    """Normalizing constant A_n = (n/k_n)^expo * L2j(n/k_n) for the case."""
    if not 1 <= k_n < n:
        raise DomainError("need 1 <= k_n < n")
    L2j = getattr(lfam, _CASE_L2J[case])
    if L2j is None:
        raise ConfigError(f"missing slowly varying components for {case.name}")
    u = n / k_n
    return u ** _CASE_EXPONENT[case](lfam.alpha, lfam.alpha0) * sv_eval(L2j, u)


def karamata_K(mx: MarginalX, ty: TargetMarginalY, n: int, k_n: int, epsrel: float = QUAD_EPSREL) -> float:
    """K_n = int_{1-k_n/n}^{1-1/n} fQ(y)/f_YQ_Y(y) dy by adaptive quadrature.

    Evaluated after the substitution u = 1 - y; endpoint singularities are
    integrable for every supported marginal pair.
    """
    if not 1 <= k_n < n:
        raise DomainError("need 1 <= k_n < n")

    def integrand(u):
        return mx.fQ(1.0 - u) / ty.fQ(1.0 - u)

    lo, hi = 1.0 / n, k_n / n
    points = None
    if lo < ENDPOINT_SPLIT < hi:
        points = [ENDPOINT_SPLIT]
    val, err = quad(integrand, lo, hi, epsabs=0.0, epsrel=epsrel, limit=500, points=points)
    if not math.isfinite(val) or (val != 0 and err / abs(val) > 100 * epsrel):
        raise NumericError(f"Karamata integral did not converge (value {val}, error {err})")
    return float(val)


def karamata_product(mx: MarginalX, ty: TargetMarginalY, n: int, k_n: int) -> float:
    """A_n * K_n; tends to 1 as k_n and n/k_n grow."""
    lfam = LFamily.from_marginals(mx, ty)
    case = MdaCase.classify(mx.mda, ty.mda)
    return big_A(case, n, k_n, lfam) * karamata_K(mx, ty, n, k_n)


def centering(ty: TargetMarginalY, n: int, k_n: int) -> float:
    """mu_n = n * int_{1-k_n/n}^1 Q_Y(y) dy (closed form where available)."""
    if not 1 <= k_n <= n:
        raise DomainError("need 1 <= k_n <= n")
    return n * ty.integral_Q(1.0 - k_n / n, 1.0)


def iid_scale(n: int, k_n: int, alpha: float) -> float:
    """i.i.d. extreme-sum scale a_n = (n/k_n)^(1/2 - 1/alpha) * n^(-1/2)."""
    if not alpha > 2:
        raise DomainError("alpha must exceed 2")
    if not 1 <= k_n <= n:
        raise DomainError("need 1 <= k_n <= n")
    return (n / k_n) ** (0.5 - 1.0 / alpha) / math.sqrt(n)


def iid_contrast(n: int, k_n: int, alpha: float) -> float:
    """Relative LRD-vs-iid scaling contrast (n/k_n)^(1/2 + 1/alpha).

    Both extreme-sum scales are first normalized by their whole-sum scale
    (sigma_{n,1}^-1 in the LRD case, n^-1/2 in the i.i.d. case); the ratio
    of the normalized scales is (n/k_n) / (n/k_n)^(1/2 - 1/alpha).  Its
    divergence expresses that extremes contribute relatively less under
    long-range dependence.
    """
    if not alpha > 2:
        raise DomainError("alpha must exceed 2")
    return (n / k_n) ** (0.5 + 1.0 / alpha)


def _quad_pieces(fn, edges, epsrel: float) -> float:
    """Adaptive quadrature piecewise over [edges[0], edges[-1]].

    Plain QUADPACK segments only; Gauss-Kronrod nodes stay interior, so
    integrable endpoint singularities are never evaluated directly.
    """
    import warnings

    total = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for a, b in zip(edges[:-1], edges[1:]):
            val, err = quad(fn, a, b, epsabs=QUAD_EPSABS * 1e-4, epsrel=epsrel, limit=1000)
            if not math.isfinite(val):
                raise NumericError(f"integral diverges on ({a}, {b})")
            total += val
    return total


def power_rank_integral(mx: MarginalX, ty: TargetMarginalY, epsrel: float = 1e-8) -> float:
    """int_0^1 fQ(y)/f_YQ_Y(y) dy; nonzero value certifies power rank 1."""

    def integrand(u):
        return mx.fQ(1.0 - u) / ty.fQ(1.0 - u)

    val = _quad_pieces(integrand, [0.0, 1e-6, 0.5, 1.0 - 1e-6, 1.0], epsrel)
    if not math.isfinite(val):
        raise NumericError("power-rank integrand is not integrable for this configuration")
    return float(val)


def check_condition_Dr(mx: MarginalX, ty: TargetMarginalY, r: int, epsrel: float = 1e-8) -> float:
    """D_r = int_{1/2}^1 F^(r)(Q(y))/f_YQ_Y(y) dy for r = 1, ..., p.

    Finite values verify the derivative-weighted integrability hypothesis;
    divergence raises NumericError.  Requires analytic derivatives of F.
    """
    if r < 1:
        raise DomainError("r must be >= 1")

    def integrand(u):
        y = 1.0 - u
        return mx.F_deriv(r, mx.Q(y)) / ty.fQ(y)

    val = _quad_pieces(integrand, [0.0, 1e-6, 0.5], epsrel)
    if not math.isfinite(val) or abs(val) > 1e12:
        raise NumericError(f"condition integral D_{r} appears divergent (value {val})")
    return float(val)


@dataclass(frozen=True)
class ScalingBundle:
    """All deterministic constants needed to normalize one experiment size."""

    case: MdaCase
    n: int
    k_n: int
    xi: float
    p: int
    sigma_n1: float
    A_n: float
    d_np: float
    mu_n: float
    lfam: LFamily = field(repr=False)
    spec_hash: str = ""

    def __post_init__(self):
        if not 1 <= self.k_n < self.n:
            raise ConfigError(f"k_n = {self.k_n} must lie in [1, n)")
        if not self.A_n > 0 or not self.sigma_n1 > 0:
            raise ConfigError("A_n and sigma_n1 must be positive")


def make_bundle(
    mx: MarginalX,
    ty: TargetMarginalY,
    c: np.ndarray,
    sigma_eps2: float,
    beta: float,
    L0: SlowlyVaryingFn,
    n: int,
    xi: float,
    p: int | None = None,
    spec_hash: str = "",
    check_feasible: bool = True,
) -> ScalingBundle:
    """Assemble the ScalingBundle for one experiment size.

    With ``check_feasible`` the xi threshold of the case is enforced;
    disable it for purely diagnostic bundles outside the theorem's domain.
    """
    from .simulate import sigma_n1_exact

    if not 0.0 < xi < 1.0:
        raise ConfigError(f"xi = {xi} must lie in (0, 1)")
    case = MdaCase.classify(mx.mda, ty.mda)
    if check_feasible:
        thr = xi_threshold(case, beta, mx.mda.alpha, ty.mda.alpha if ty.mda.kind == "frechet" else None)
        if xi <= thr:
            raise InfeasibleConfigError(
                f"xi = {xi} at or below the {case.name} threshold {thr:.6g}", [f"xi <= {thr:.6g}"]
            )
    k_n = int(math.ceil(n**xi))
    if k_n >= n:
        raise ConfigError(f"k_n = ceil(n^xi) = {k_n} must be < n = {n}")
    lfam = LFamily.from_marginals(mx, ty)
    pp = p if p is not None else select_p(beta)
    return ScalingBundle(
        case=case,
        n=n,
        k_n=k_n,
        xi=xi,
        p=pp,
        sigma_n1=sigma_n1_exact(c, sigma_eps2, n),
        A_n=big_A(case, n, k_n, lfam),
        d_np=d_np(n, pp, beta, L0),
        mu_n=centering(ty, n, k_n),
        lfam=lfam,
        spec_hash=spec_hash,
    )
