"""Monte Carlo harness: parallel replicates, goodness of fit, convergence.

Replicate r always draws from the stream derived as h(master_seed, r), so
results are byte-identical across execution orders and worker counts; the
reduction is by replicate index, never by completion order.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import kolmogorov, ndtr

from .config import ExperimentConfig, build_problem
from .errors import DomainError, InfeasibleConfigError
from .estats import ProcessFrame, decompose_I, reduction_sup, u_ratio
from .model import EmpiricalMarginal
from .scaling import (
    check_condition_Dr,
    iid_contrast,
    iid_scale,
    make_bundle,
    power_rank_integral,
    xi_threshold,
)
from .simulate import config_hash, derive_seed, gen_innovations, moving_average

QQ_PROBS = (0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95)

# nominal heavy-tail index for the cross-model i.i.d. contrast column
CONTRAST_ALPHA = 4.0


@dataclass(frozen=True)
class ReplicateResult:
    replicate: int
    seed: int
    z: float
    i1: float
    i2: float
    i3: float
    u_ratio: float
    reduction_sup: float


@dataclass(frozen=True)
class McRunResult:
    """Replicate-level outputs plus a summary recomputable from z_samples."""

    z_samples: np.ndarray = field(repr=False)
    replicates: list = field(repr=False)
    summary: dict
    config_echo: dict
    master_seed: int


def ks_test(sample) -> tuple[float, float]:
    """Exact KS distance to the standard normal and its asymptotic p-value.

    D = sup_x |F_m(x) - Phi(x)|; p follows the Kolmogorov distribution of
    sqrt(m) * D.
    """
    arr = np.sort(np.asarray(sample, dtype=float))
    m = arr.size
    if m < 8:
        raise DomainError(f"need at least 8 observations for the KS test, got {m}")
    cdf = ndtr(arr)
    grid = np.arange(m, dtype=float)
    d_plus = np.max((grid + 1.0) / m - cdf)
    d_minus = np.max(cdf - grid / m)
    d = float(max(d_plus, d_minus))
    return d, float(kolmogorov(math.sqrt(m) * d))


def summarize(z_samples: np.ndarray) -> dict:
    """Deterministic summary of a z sample; recomputable bit-exactly."""
    z = np.asarray(z_samples, dtype=float)
    if z.size >= 8:
        d, p = ks_test(z)
    else:
        d, p = float("nan"), float("nan")
    qq = [
        {"prob": q, "theoretical": float(_norm_quantile(q)), "empirical": float(np.quantile(z, q))}
        for q in QQ_PROBS
    ]
    return {
        "mean": float(np.mean(z)),
        "variance": float(np.var(z, ddof=1)) if z.size >= 2 else float("nan"),
        "ks_d": d,
        "ks_p": p,
        "qq": qq,
    }


def _norm_quantile(q: float) -> float:
    from scipy.special import ndtri

    return ndtri(q)


def _feasibility_record(config: ExperimentConfig, problem) -> dict:
    """Run the one-time hypothesis checks; raise before any simulation."""
    coeffs, dist, mx, ty = problem
    case = None
    record = {}
    from .model import MdaCase

    case = MdaCase.classify(mx.mda, ty.mda)
    thr = xi_threshold(case, config.beta, mx.mda.alpha, ty.mda.alpha if ty.mda.kind == "frechet" else None)
    record["case"] = case.name
    record["xi_threshold"] = thr
    if config.xi <= thr:
        raise InfeasibleConfigError(
            f"xi = {config.xi} does not exceed the {case.name} threshold {thr:.6g}",
            [f"xi <= {thr:.6g} ({case.name} condition)"],
        )
    pr = power_rank_integral(mx, ty)
    record["power_rank_integral"] = pr
    if pr == 0.0:
        raise InfeasibleConfigError("power-rank integral vanishes; normalization by sigma_n1 is invalid")
    p = config.p_override if config.p_override is not None else _select_p(config.beta)
    record["p"] = p
    if isinstance(mx, EmpiricalMarginal):
        record["condition_Dr"] = "skipped (no analytic derivatives for the fitted marginal)"
    else:
        record["condition_Dr"] = [check_condition_Dr(mx, ty, r) for r in range(1, p + 1)]
    return record


def _select_p(beta: float) -> int:
    from .scaling import select_p

    return select_p(beta)


def _run_one(task) -> ReplicateResult:
    r, seed, coeffs, dist, mx, ty, bundle, with_reduction = task
    eps = gen_innovations(dist, bundle.n + coeffs.M, seed)
    x = moving_average(coeffs.c, eps)
    frame = ProcessFrame.from_path(x, mx, ty, bundle.sigma_n1)
    if frame.analytic:
        # the uniform transform is exact, so the decomposition and the
        # order-statistic diagnostics are meaningful
        dec = decompose_I(frame, bundle)
        z, i1, i2, i3 = dec.z, dec.i1, dec.i2, dec.i3
        ur = u_ratio(frame, bundle.k_n)
    else:
        nan = float("nan")
        z = bundle.A_n / bundle.sigma_n1 * (float(np.sum(frame.y_sorted[bundle.n - bundle.k_n :])) - bundle.mu_n)
        i1, i2, i3, ur = nan, nan, nan, nan
    if with_reduction and frame.analytic and bundle.p <= 2:
        red = reduction_sup(x, eps, coeffs.c, bundle.p, mx, bundle.sigma_n1).value
    else:
        red = float("nan")
    return ReplicateResult(replicate=r, seed=seed, z=z, i1=i1, i2=i2, i3=i3, u_ratio=ur, reduction_sup=red)


def run_replicates(
    config: ExperimentConfig,
    R: int | None = None,
    master_seed: int | None = None,
    threads: int = 1,
    with_reduction: bool = True,
    n: int | None = None,
) -> McRunResult:
    """Run R independent replicates of the extreme-sum experiment.

    Parameters
    ----------
    config : ExperimentConfig
        Validated configuration; feasibility (xi threshold, power rank,
        derivative-integrability) is checked once before any simulation.
    R, master_seed, n : optional overrides of the config values.
    threads : int
        Worker processes; 0 means the detected CPU count, 1 runs inline.
        The output never depends on this value.
    """
    R = R if R is not None else config.replicates
    master_seed = master_seed if master_seed is not None else config.master_seed
    n = n if n is not None else config.n
    if R < 1:
        raise DomainError("R must be >= 1")
    if n is None:
        raise DomainError("an experiment size n is required")

    problem = build_problem(config)
    coeffs, dist, mx, ty = problem
    feas = _feasibility_record(config, problem)
    bundle = make_bundle(
        mx,
        ty,
        coeffs.c,
        dist.variance,
        config.beta,
        coeffs.L0,
        n,
        config.xi,
        p=config.p_override,
        spec_hash=config_hash(coeffs, dist, mx, ty, n),
    )

    tasks = [
        (r, derive_seed(master_seed, r), coeffs, dist, mx, ty, bundle, with_reduction) for r in range(R)
    ]
    workers = os.cpu_count() if threads == 0 else threads
    if workers is None or workers <= 1 or R == 1:
        reps = [_run_one(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, R)) as pool:
            chunk = max(1, R // (4 * min(workers, R)))
            reps = list(pool.map(_run_one, tasks, chunksize=chunk))
    reps.sort(key=lambda rep: rep.replicate)  # reduction by index, not completion order

    z = np.array([rep.z for rep in reps])
    summary = summarize(z)
    summary["feasibility"] = feas
    echo = config.as_dict()
    echo["n"] = n
    echo["R"] = R
    return McRunResult(z_samples=z, replicates=reps, summary=summary, config_echo=echo, master_seed=master_seed)


def trend_nonincreasing(values, allowed_inversions: int = 1, rtol: float = 0.0) -> bool:
    """True when the sequence decreases with at most the allowed inversions."""
    vals = list(values)
    inversions = sum(1 for a, b in zip(vals, vals[1:]) if b > a * (1.0 + rtol))
    return inversions <= allowed_inversions


def convergence_study(
    config: ExperimentConfig,
    n_grid=None,
    R: int | None = None,
    master_seed: int | None = None,
    threads: int = 1,
) -> list[dict]:
    """Replicate study over increasing n; one row of diagnostics per size.

    Uses the same master seed family at every size (common random numbers),
    so the across-n trends are compared on coupled samples.
    """
    n_grid = list(n_grid if n_grid is not None else (config.n_grid or []))
    if not n_grid:
        raise DomainError("an increasing n_grid is required")
    if any(b <= a for a, b in zip(n_grid, n_grid[1:])):
        raise DomainError("n_grid must be strictly increasing")
    rows = []
    for nn in n_grid:
        res = run_replicates(config, R=R, master_seed=master_seed, threads=threads, n=nn)
        k_n = int(math.ceil(nn**config.xi))
        sigma_n1 = None
        # bundle values are recomputable from the result echo; recompute the
        # deterministic contrast columns here
        coeffs, dist, mx, ty = build_problem(config)
        from .simulate import sigma_n1_exact

        sigma_n1 = sigma_n1_exact(coeffs.c, dist.variance, nn)
        i2 = np.median(np.abs([r.i2 for r in res.replicates]))
        i3 = np.median(np.abs([r.i3 for r in res.replicates]))
        urdev = np.median(np.abs([r.u_ratio - 1.0 for r in res.replicates]))
        reds = np.array([r.reduction_sup for r in res.replicates])
        red = float(np.median(reds)) if np.all(np.isfinite(reds)) else float("nan")
        rows.append(
            {
                "n": nn,
                "k_n": k_n,
                "ks_d": res.summary["ks_d"],
                "ks_p": res.summary["ks_p"],
                "z_mean": res.summary["mean"],
                "z_var": res.summary["variance"],
                "med_abs_i2": float(i2),
                "med_abs_i3": float(i3),
                "med_u_ratio_dev": float(urdev),
                "med_reduction_sup": red,
                "iid_contrast": iid_contrast(nn, k_n, CONTRAST_ALPHA),
                "lrd_scale": (nn / k_n) / sigma_n1,
                "iid_scale": iid_scale(nn, k_n, CONTRAST_ALPHA),
            }
        )
    return rows


# ---------------------------------------------------------------------------
# CSV emission (schema-stable, shortest round-trip floats)
# ---------------------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(float(v))
    if isinstance(v, (np.floating,)):
        return repr(float(v))
    return str(v)


def write_z_samples_csv(result: McRunResult, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("replicate,seed,z,i1,i2,i3,u_ratio,reduction_sup\n")
        for rep in result.replicates:
            fields = [rep.replicate, rep.seed, rep.z, rep.i1, rep.i2, rep.i3, rep.u_ratio, rep.reduction_sup]
            fh.write(",".join(_fmt(v) for v in fields) + "\n")


def write_summary_csv(result: McRunResult, path) -> None:
    rows = [
        ("mean", result.summary["mean"]),
        ("variance", result.summary["variance"]),
        ("ks_d", result.summary["ks_d"]),
        ("ks_p", result.summary["ks_p"]),
        ("replicates", len(result.z_samples)),
        ("master_seed", result.master_seed),
    ]
    for item in result.summary["qq"]:
        rows.append((f"qq_p{int(round(item['prob'] * 100)):02d}_theoretical", item["theoretical"]))
        rows.append((f"qq_p{int(round(item['prob'] * 100)):02d}_empirical", item["empirical"]))
    for key, val in sorted(result.config_echo.items()):
        rows.append((f"config_{key}", val))
    with open(path, "w", newline="") as fh:
        fh.write("metric,value\n")
        for key, val in rows:
            fh.write(f"{key},{_fmt(val)}\n")


CONVERGENCE_COLUMNS = (
    "n",
    "k_n",
    "ks_d",
    "ks_p",
    "z_mean",
    "z_var",
    "med_abs_i2",
    "med_abs_i3",
    "med_u_ratio_dev",
    "med_reduction_sup",
    "iid_contrast",
    "lrd_scale",
    "iid_scale",
)


def write_convergence_csv(rows: list[dict], path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(CONVERGENCE_COLUMNS) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(row[c]) for c in CONVERGENCE_COLUMNS) + "\n")


def write_errors_csv(errors: list[tuple[int, str]], path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("code,message\n")
        for code, message in errors:
            sanitized = message.replace("\n", " ").replace(",", ";")
            fh.write(f"{code},{sanitized}\n")
