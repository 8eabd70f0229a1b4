"""Tests for the Monte Carlo harness: KS test, replicates, convergence."""

import math

import numpy as np
import pytest
from scipy.special import ndtri

from lrdextremes.config import ExperimentConfig, build_problem
from lrdextremes.errors import DomainError, InfeasibleConfigError
from lrdextremes.estats import z_statistic
from lrdextremes.mc import (
    convergence_study,
    ks_test,
    run_replicates,
    summarize,
    trend_nonincreasing,
    write_convergence_csv,
    write_summary_csv,
    write_z_samples_csv,
)
from lrdextremes.scaling import make_bundle
from lrdextremes.simulate import config_hash, derive_seed, simulate_path


def small_config(**overrides) -> ExperimentConfig:
    base = dict(
        beta=0.8,
        y_marginal="exponential",
        xi=0.9,
        master_seed=2026004,
        n=2**10,
        replicates=12,
        trunc_tol=1e-2,
    )
    base.update(overrides)
    return ExperimentConfig(**base)


class TestKsTest:
    def test_plugin_grid_distance(self):
        m = 100
        sample = ndtri((np.arange(1, m + 1) - 0.5) / m)
        d, p = ks_test(sample)
        assert d <= 0.005 + 1e-12
        assert p > 0.99

    def test_degenerate_zeros(self):
        d, p = ks_test(np.zeros(100))
        assert d == pytest.approx(0.5, abs=1e-12)

    def test_tiny_distance_gives_p_one(self):
        m = 10**5
        sample = ndtri((np.arange(1, m + 1) - 0.5) / m)
        d, p = ks_test(sample)
        assert p == pytest.approx(1.0, abs=1e-6)

    def test_small_sample_rejected(self):
        with pytest.raises(DomainError):
            ks_test(np.zeros(7))

    def test_null_sanity_of_the_tester(self):
        # feeding true standard normal draws: p > 0.01 in >= 95 of 100 batches
        rng = np.random.default_rng(31415)
        hits = 0
        for _ in range(100):
            _, p = ks_test(rng.standard_normal(400))
            hits += p > 0.01
        assert hits >= 95


class TestRunReplicates:
    def test_thread_invariance(self):
        cfg = small_config()
        r1 = run_replicates(cfg, threads=1)
        r2 = run_replicates(cfg, threads=3)
        np.testing.assert_array_equal(r1.z_samples, r2.z_samples)
        assert r1.replicates == r2.replicates
        assert r1.summary == r2.summary

    def test_single_replicate_matches_direct_composition(self):
        cfg = small_config(replicates=1)
        res = run_replicates(cfg)
        coeffs, dist, mx, ty = build_problem(cfg)
        seed = derive_seed(cfg.master_seed, 0)
        pp = simulate_path(coeffs, dist, mx, ty, cfg.n, seed)
        bundle = make_bundle(
            mx,
            ty,
            coeffs.c,
            dist.variance,
            cfg.beta,
            coeffs.L0,
            cfg.n,
            cfg.xi,
            spec_hash=config_hash(coeffs, dist, mx, ty, cfg.n),
        )
        assert res.z_samples[0] == pytest.approx(z_statistic(pp, bundle), rel=1e-12)
        assert res.replicates[0].seed == seed

    def test_infeasible_config_rejected_before_simulation(self):
        cfg = small_config(xi=0.75)  # below the Case 4 threshold beta = 0.8
        with pytest.raises(InfeasibleConfigError):
            run_replicates(cfg)

    def test_identity_holds_per_replicate(self):
        res = run_replicates(small_config())
        for rep in res.replicates:
            assert rep.i1 + rep.i2 + rep.i3 == pytest.approx(rep.z, rel=1e-10, abs=1e-12)

    def test_summary_recomputable_bit_exactly(self):
        res = run_replicates(small_config())
        again = summarize(res.z_samples)
        for key, val in again.items():
            assert res.summary[key] == val

    def test_feasibility_record_present(self):
        res = run_replicates(small_config())
        feas = res.summary["feasibility"]
        assert feas["case"] == "CASE4"
        assert feas["xi_threshold"] == pytest.approx(0.8)
        assert feas["power_rank_integral"] > 0
        assert feas["p"] == 1

    def test_empirical_marginal_mc_smoke(self):
        # heavy-tailed innovations with a fitted X marginal (diagnostic
        # mode): z is computable, U-dependent diagnostics are NaN
        cfg = small_config(
            innovation="student_t:6,1",
            x_marginal="empirical:0.05",
            y_marginal="pareto:8",
            xi=0.95,
            replicates=4,
            n=2**10,
        )
        res = run_replicates(cfg)
        assert np.all(np.isfinite(res.z_samples))
        assert math.isnan(res.replicates[0].i1)
        assert math.isnan(res.replicates[0].u_ratio)
        feas = res.summary["feasibility"]
        assert feas["case"] == "CASE1"
        assert "skipped" in feas["condition_Dr"]


class TestConvergenceStudy:
    def test_single_row_smoke(self):
        cfg = small_config(replicates=8, n=None, n_grid=(2**10,))
        rows = convergence_study(cfg)
        assert len(rows) == 1
        row = rows[0]
        assert row["n"] == 2**10
        for key in ("ks_d", "z_var", "med_abs_i2", "med_abs_i3", "med_u_ratio_dev", "iid_contrast"):
            assert math.isfinite(row[key])

    def test_iid_contrast_strictly_increasing(self):
        cfg = small_config(replicates=8, n=None, n_grid=(2**10, 2**11, 2**12))
        rows = convergence_study(cfg)
        contrast = [r["iid_contrast"] for r in rows]
        assert contrast[0] < contrast[1] < contrast[2]

    def test_rejects_unordered_grid(self):
        cfg = small_config(n=None, n_grid=None)
        with pytest.raises(DomainError):
            convergence_study(cfg, n_grid=[2**11, 2**10])


class TestTrendHelper:
    def test_allows_one_inversion(self):
        assert trend_nonincreasing([5.0, 3.0, 3.5, 2.0], allowed_inversions=1)
        assert not trend_nonincreasing([5.0, 3.0, 3.5, 4.0], allowed_inversions=1)
        assert trend_nonincreasing([5.0, 4.0, 3.0], allowed_inversions=0)


class TestCsvWriters:
    def test_z_samples_schema_and_determinism(self, tmp_path):
        cfg = small_config()
        res = run_replicates(cfg)
        p1 = tmp_path / "a.csv"
        p2 = tmp_path / "b.csv"
        write_z_samples_csv(res, p1)
        write_z_samples_csv(run_replicates(cfg, threads=2), p2)
        assert p1.read_text().splitlines()[0] == "replicate,seed,z,i1,i2,i3,u_ratio,reduction_sup"
        assert p1.read_bytes() == p2.read_bytes()

    def test_summary_schema(self, tmp_path):
        res = run_replicates(small_config())
        path = tmp_path / "summary.csv"
        write_summary_csv(res, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "metric,value"
        metrics = {ln.split(",")[0] for ln in lines[1:]}
        assert {"mean", "variance", "ks_d", "ks_p", "replicates", "master_seed"} <= metrics

    def test_convergence_schema(self, tmp_path):
        cfg = small_config(replicates=8, n=None, n_grid=(2**10,))
        rows = convergence_study(cfg)
        path = tmp_path / "conv.csv"
        write_convergence_csv(rows, path)
        header = path.read_text().splitlines()[0]
        assert header.startswith("n,k_n,ks_d,ks_p,z_mean,z_var,med_abs_i2,med_abs_i3")

    def test_floats_round_trip(self, tmp_path):
        res = run_replicates(small_config())
        path = tmp_path / "z.csv"
        write_z_samples_csv(res, path)
        for line, rep in zip(path.read_text().splitlines()[1:], res.replicates):
            fields = line.split(",")
            assert float(fields[2]) == rep.z  # shortest round-trip repr
