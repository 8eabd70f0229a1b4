"""Path generation for LRD moving averages and exact second-moment bookkeeping.

The linear process is realized with a truncated filter of length M + 1 and
exactly M pre-sample innovations, so the path is stationary under the
truncated model with no burn-in discard.  Filtering uses FFT convolution,
O((n + M) log(n + M)).
"""

from __future__ import annotations

import hashlib
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.signal import fftconvolve
from scipy.special import zeta

from .errors import ConfigError, DomainError, TruncationWarning
from .model import (
    CoefficientModel,
    GaussianMarginal,
    InnovationDist,
    MarginalX,
    SlowlyVaryingFn,
    SvConstant,
    TargetMarginalY,
    subordinate,
)

# hard cap on the truncation length; binding the cap is reported
M_CAP = 2**22

DEFAULT_TRUNC_TOL = 1e-3


@dataclass(frozen=True, eq=False)
class PathPair:
    """One simulated path of the linear process and its subordinated values."""

    x: np.ndarray = field(repr=False)
    y: np.ndarray = field(repr=False)
    seed: int
    spec_hash: str

    @property
    def n(self) -> int:
        return len(self.x)


def truncation_length(beta: float, L0: SlowlyVaryingFn | None = None, tol: float = DEFAULT_TRUNC_TOL) -> int:
    """Smallest M with neglected variance sum_{k>M} c_k^2 <= tol * total.

    Uses the integral bound sum_{k>M} k^-2beta <= M^(1-2beta)/(2beta-1)
    scaled by L0(M)^2, against the running partial sum of the total (which
    only makes the choice of M conservative).  Capped at 2^22.
    """
    if not 0.5 < beta < 1.0:
        raise DomainError("beta must lie in (1/2, 1)")
    if not 0.0 < tol < 1.0:
        raise DomainError("tol must be a variance fraction in (0, 1)")
    if L0 is None:
        L0 = SvConstant(1.0)

    if isinstance(L0, SvConstant):
        total = 1.0 + L0.c**2 * float(zeta(2.0 * beta))

        def tail_bound(M):
            return L0.c**2 * M ** (1.0 - 2.0 * beta) / (2.0 * beta - 1.0)

        M = int(math.ceil((tol * total * (2.0 * beta - 1.0) / L0.c**2) ** (1.0 / (1.0 - 2.0 * beta))))
        M = max(M, 1)
        if M > M_CAP:
            warnings.warn(
                f"truncation length {M} exceeds the cap 2^22; capped (neglected "
                f"variance fraction {tail_bound(M_CAP) / total:.2e})",
                TruncationWarning,
                stacklevel=2,
            )
            return M_CAP
        return M

    # general L0: grow the partial sum in blocks until the bound clears
    partial = 1.0
    M = 1
    block = 4096
    while True:
        k = np.arange(M, min(M + block, M_CAP) + 1, dtype=float)
        ck2 = k ** (-2.0 * beta) * L0._eval(k) ** 2
        csum = partial + np.cumsum(ck2)
        bounds = L0._eval(k) ** 2 * k ** (1.0 - 2.0 * beta) / (2.0 * beta - 1.0)
        ok = bounds <= tol * csum
        if np.any(ok):
            return int(k[np.argmax(ok)])
        partial = float(csum[-1])
        M = int(k[-1]) + 1
        if M > M_CAP:
            warnings.warn(
                "truncation length exceeds the cap 2^22; capped",
                TruncationWarning,
                stacklevel=2,
            )
            return M_CAP
        block = min(2 * block, 2**20)


def build_coefficient_model(
    beta: float, L0: SlowlyVaryingFn | None = None, tol: float = DEFAULT_TRUNC_TOL, M: int | None = None
) -> CoefficientModel:
    """Coefficient model with M derived from the variance tolerance unless given."""
    if L0 is None:
        L0 = SvConstant(1.0)
    if M is None:
        M = truncation_length(beta, L0, tol)
    return CoefficientModel.build(beta, L0, M)


def derive_seed(master_seed: int, r: int) -> int:
    """Replicate seed h(master_seed, r) via the SeedSequence spawn tree.

    Equivalent to SeedSequence(master_seed, spawn_key=(r,)); deterministic
    and independent of execution order or parallelism.
    """
    ss = np.random.SeedSequence(master_seed, spawn_key=(r,))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def gen_innovations(dist: InnovationDist, count: int, seed: int) -> np.ndarray:
    """Deterministic i.i.d. innovation vector for the given seed."""
    if count < 1:
        raise DomainError("count must be >= 1")
    rng = np.random.default_rng(seed)
    return dist.sample(count, rng)


def moving_average(c: np.ndarray, eps: np.ndarray) -> np.ndarray:
    """X_i = sum_{k=0}^M c_k eps_{i-k} for i = 1..n via FFT convolution.

    ``eps`` carries the M pre-sample innovations first, so its length is
    n + M for a filter of length M + 1.
    """
    c = np.asarray(c, dtype=float)
    eps = np.asarray(eps, dtype=float)
    M = len(c) - 1
    n = len(eps) - M
    if n < 1:
        raise DomainError(f"innovation vector too short: need more than {M} entries")
    return fftconvolve(c, eps)[M : M + n]


def config_hash(coeffs: CoefficientModel, dist: InnovationDist, mx: MarginalX, ty: TargetMarginalY, n: int) -> str:
    """Opaque identifier of a generating configuration."""
    parts = repr((coeffs.beta, coeffs.L0, coeffs.M, dist, type(mx).__name__, repr(mx), type(ty).__name__, repr(ty), n))
    return hashlib.sha256(parts.encode()).hexdigest()[:16]


def simulate_path(
    coeffs: CoefficientModel,
    dist: InnovationDist,
    mx: MarginalX,
    ty: TargetMarginalY,
    n: int,
    seed: int,
) -> PathPair:
    """Generate one stationary PathPair, deterministic in the seed.

    For Gaussian innovations the declared marginal must be Gaussian with
    s^2 = sigma_eps^2 * sum c_k^2 (relative deviation <= 1e-6).
    """
    if n < 1:
        raise DomainError("n must be >= 1")
    if dist.kind == "gaussian":
        if not isinstance(mx, GaussianMarginal):
            raise ConfigError("Gaussian innovations require a Gaussian X marginal")
        s_expected = dist.sigma_eps * math.sqrt(coeffs.total_square_sum)
        if abs(mx.s - s_expected) > 1e-6 * s_expected:
            raise ConfigError(
                f"marginal std {mx.s!r} inconsistent with model value {s_expected!r} "
                "(sigma_eps^2 * sum c_k^2)"
            )
    eps = gen_innovations(dist, n + coeffs.M, seed)
    x = moving_average(coeffs.c, eps)
    y = subordinate(mx, ty, x)
    return PathPair(x=x, y=np.atleast_1d(y), seed=seed, spec_hash=config_hash(coeffs, dist, mx, ty, n))


def autocovariance(c: np.ndarray, sigma_eps2: float, k: int) -> float:
    """Exact lag-k autocovariance of the truncated model, sigma_eps^2 * sum_j c_j c_{j+k}.

    Lags beyond the truncation length return 0.0 with a TruncationWarning.
    """
    c = np.asarray(c, dtype=float)
    M = len(c) - 1
    if k < 0:
        raise DomainError("lag must be >= 0")
    if k > M:
        warnings.warn(f"lag {k} exceeds truncation length {M}; returning 0", TruncationWarning, stacklevel=2)
        return 0.0
    return float(sigma_eps2 * np.dot(c[: M - k + 1], c[k:]))


def autocovariances(c: np.ndarray, sigma_eps2: float, kmax: int) -> np.ndarray:
    """Lags 0..kmax of the exact truncated-model autocovariance, via FFT."""
    c = np.asarray(c, dtype=float)
    M = len(c) - 1
    acorr = fftconvolve(c, c[::-1])[M:]  # index k = sum_j c_j c_{j+k}
    out = np.zeros(kmax + 1)
    upto = min(kmax, M)
    out[: upto + 1] = acorr[: upto + 1]
    return sigma_eps2 * out


def autocovariance_model(beta: float, L0: SlowlyVaryingFn | None, M: int, k: int, sigma_eps2: float = 1.0) -> float:
    """Theoretical lag-k autocovariance of the untruncated model.

    Sums c_j c_{j+k} exactly for j <= M - k and adds the analytic tail
    integral over j > M - k (closed incomplete-beta form for constant L0,
    quadrature otherwise).  This is the model quantity rho_k whose scaled
    limit is the beta-function constant; the truncated-path value is
    ``autocovariance``.
    """
    if L0 is None:
        L0 = SvConstant(1.0)
    if k < 1 or k > M:
        raise DomainError("need 1 <= k <= M")
    j = np.arange(1, M - k + 1, dtype=float)
    partial = float(k**-beta * L0._eval(np.array([float(k)]))[0]) + float(
        np.sum(j**-beta * L0._eval(j) * (j + k) ** -beta * L0._eval(j + k))
    )
    a = M - k + 0.5  # midpoint continuation of the discrete sum
    if isinstance(L0, SvConstant):
        from scipy.special import beta as beta_fn, betainc

        x = k / (k + a)
        tail = L0.c**2 * k ** (1.0 - 2.0 * beta) * beta_fn(2.0 * beta - 1.0, 1.0 - beta) * betainc(
            2.0 * beta - 1.0, 1.0 - beta, x
        )
    else:
        # map (a, inf) to (0, 1] by x = a/t
        def integrand(t):
            x = a / t
            return a / t**2 * x**-beta * L0._eval(x) * (x + k) ** -beta * L0._eval(x + k)

        tail, _ = quad(integrand, 0.0, 1.0, epsabs=0.0, epsrel=1e-10, limit=400)
    return sigma_eps2 * (partial + float(tail))


def sigma_n1_exact(c: np.ndarray, sigma_eps2: float, n: int) -> float:
    """Exact sigma_{n,1} = sqrt(Var(sum_{i<=n} X_i)) for the truncated model.

    Evaluates n*rho_0 + 2*sum_{k=1}^{n-1} (n-k) rho_k with rho computed by
    FFT autocorrelation of the filter, O((n + M) log M).
    """
    if n < 1:
        raise DomainError("n must be >= 1")
    c = np.asarray(c, dtype=float)
    M = len(c) - 1
    kmax = min(n - 1, M)
    rho = autocovariances(c, sigma_eps2, kmax)
    weights = n - np.arange(kmax + 1, dtype=float)
    var = n * rho[0] + 2.0 * float(np.dot(weights[1:], rho[1:]))
    return math.sqrt(var)


def dump_path_csv(pp: PathPair, path) -> None:
    """Write the path as CSV with header ``i,x,y`` (shortest round-trip floats)."""
    with open(path, "w", newline="") as fh:
        fh.write("i,x,y\n")
        for i in range(pp.n):
            fh.write(f"{i + 1},{float(pp.x[i])!r},{float(pp.y[i])!r}\n")


def dump_path_binary(pp: PathPair, path) -> None:
    """Write the path in the documented binary layout.

    Layout: uint64 little-endian n, then n float64 little-endian x values,
    then n float64 little-endian y values.
    """
    with open(path, "wb") as fh:
        fh.write(np.array(pp.n, dtype="<u8").tobytes())
        fh.write(pp.x.astype("<f8").tobytes())
        fh.write(pp.y.astype("<f8").tobytes())


def load_path_binary(path, seed: int = -1, spec_hash: str = "") -> PathPair:
    """Read a path written by ``dump_path_binary``."""
    with open(path, "rb") as fh:
        n = int(np.frombuffer(fh.read(8), dtype="<u8")[0])
        x = np.frombuffer(fh.read(8 * n), dtype="<f8").copy()
        y = np.frombuffer(fh.read(8 * n), dtype="<f8").copy()
    return PathPair(x=x, y=y, seed=seed, spec_hash=spec_hash)
