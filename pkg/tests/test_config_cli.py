"""Tests for config parsing, serialization, and the command-line interface."""

import pytest

from lrdextremes.cli import main
from lrdextremes.config import ExperimentConfig, parse_config, serialize_config
from lrdextremes.errors import ConfigError
from lrdextremes.scaling import select_p

MINIMAL_CASE4 = """
# Case 4 reference: Gaussian X, exponential Y
beta = 0.8
y_marginal = exponential
xi = 0.9
n = 32768
R = 400
master_seed = 2026004
"""

CASE2_ANALYTIC = """
beta = 0.8
x_marginal = pareto:4
y_marginal = exponential
xi = 0.5
n = 10000
R = 4
master_seed = 99
"""


class TestParseConfig:
    def test_minimal_case4(self):
        cfg = parse_config(MINIMAL_CASE4)
        assert cfg.beta == 0.8
        assert cfg.xi == 0.9
        assert cfg.replicates == 400
        assert cfg.p_override is None
        assert select_p(cfg.beta) == 1  # p auto-selected downstream

    def test_xi_below_threshold_cites_condition(self):
        text = MINIMAL_CASE4.replace("xi = 0.9", "xi = 0.7")
        with pytest.raises(ConfigError) as err:
            parse_config(text)
        msg = str(err.value)
        assert "(****)" in msg
        assert "0.8" in msg

    def test_unknown_key_named(self):
        with pytest.raises(ConfigError) as err:
            parse_config(MINIMAL_CASE4 + "gamma = 1\n")
        assert "gamma" in str(err.value)

    def test_missing_master_seed(self):
        text = MINIMAL_CASE4.replace("master_seed = 2026004", "")
        with pytest.raises(ConfigError) as err:
            parse_config(text)
        assert "master_seed" in str(err.value)

    def test_all_violations_collected(self):
        text = "beta = 2.0\nxi = 1.5\ngamma = 1\nn = 100\ny_marginal = exponential\n"
        with pytest.raises(ConfigError) as err:
            parse_config(text)
        v = err.value.violations
        assert len(v) >= 4  # beta, xi, gamma, missing master_seed
        joined = "\n".join(v)
        assert "beta" in joined and "xi" in joined and "gamma" in joined and "master_seed" in joined

    def test_feasibility_can_be_relaxed(self):
        cfg = parse_config(CASE2_ANALYTIC, require_feasible=False)
        assert cfg.x_marginal == "pareto:4"
        with pytest.raises(ConfigError):
            parse_config(CASE2_ANALYTIC)  # strict mode rejects xi = 0.5

    def test_k_n_bounds(self):
        # ceil(5^0.99) = 5 = n breaks k_n <= n - 1
        text = MINIMAL_CASE4.replace("n = 32768", "n = 5").replace("xi = 0.9", "xi = 0.99")
        with pytest.raises(ConfigError) as err:
            parse_config(text)
        assert "k_n" in str(err.value)

    def test_empirical_marginal_spec(self):
        text = MINIMAL_CASE4.replace("beta = 0.8", "beta = 0.8\nx_marginal = empirical:0.05\ninnovation = student_t:6,1")
        cfg = parse_config(text)
        assert cfg.x_marginal == "empirical:0.05"

    def test_logpareto_requires_frechet_base(self):
        text = MINIMAL_CASE4.replace("y_marginal = exponential", "y_marginal = logpareto:0.5")
        with pytest.raises(ConfigError) as err:
            parse_config(text)
        assert "Frechet" in str(err.value)


class TestRoundtrip:
    @pytest.mark.parametrize(
        "cfg",
        [
            ExperimentConfig(beta=0.8, y_marginal="exponential", xi=0.9, master_seed=7, n=1024),
            ExperimentConfig(
                beta=0.75,
                y_marginal="pareto:6",
                xi=0.97,
                master_seed=12,
                n=2048,
                n_grid=(1024, 2048),
                replicates=50,
                p_override=2,
                out_dir="out",
                x_marginal="pareto:4,1.0",
                innovation="student_t:6,1",
                l0="logpower:1,0.5",
                trunc_tol=0.01,
            ),
        ],
    )
    def test_parse_serialize_identity(self, cfg):
        assert parse_config(serialize_config(cfg), require_feasible=False) == cfg


def write_config(tmp_path, text):
    path = tmp_path / "exp.cfg"
    path.write_text(text)
    return str(path)


class TestCli:
    def test_simulate_writes_path(self, tmp_path, capsys):
        cfg = write_config(tmp_path, MINIMAL_CASE4.replace("n = 32768", "n = 256").replace("R = 400", "R = 2"))
        code = main(["simulate", "--config", cfg, "--out", str(tmp_path)])
        assert code == 0
        lines = (tmp_path / "path.csv").read_text().splitlines()
        assert lines[0] == "i,x,y"
        assert len(lines) == 257

    def test_scaling_prints_karamata_product_even_when_infeasible(self, tmp_path, capsys):
        cfg = write_config(tmp_path, CASE2_ANALYTIC)
        code = main(["scaling", "--config", cfg, "--out", str(tmp_path)])
        out = capsys.readouterr().out
        assert code == 0
        assert "k_n = 100" in out
        assert "feasible = no" in out
        line = next(ln for ln in out.splitlines() if ln.startswith("A_n_K_n"))
        assert float(line.split("=")[1]) == pytest.approx(0.9969, abs=5e-4)

    def test_mc_reproducible_files(self, tmp_path):
        text = MINIMAL_CASE4.replace("n = 32768", "n = 512").replace("R = 400", "R = 10")
        cfg = write_config(tmp_path, text)
        out1 = tmp_path / "run1"
        out2 = tmp_path / "run2"
        assert main(["mc", "--config", cfg, "--out", str(out1)]) == 0
        assert main(["mc", "--config", cfg, "--out", str(out2), "--threads", "2"]) == 0
        for name in ("z_samples.csv", "summary.csv"):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()

    def test_mc_rejects_infeasible_with_exit_2_and_errors_csv(self, tmp_path, capsys):
        cfg = write_config(tmp_path, CASE2_ANALYTIC)
        code = main(["mc", "--config", cfg, "--out", str(tmp_path)])
        assert code == 2
        errors = (tmp_path / "errors.csv").read_text().splitlines()
        assert errors[0] == "code,message"
        assert any("(**)" in ln for ln in errors[1:])

    def test_diag_identity_power_rank(self, tmp_path, capsys):
        text = MINIMAL_CASE4.replace("y_marginal = exponential", "y_marginal = identity").replace(
            "n = 32768", "n = 256"
        ).replace("R = 400", "R = 3")
        cfg = write_config(tmp_path, text)
        code = main(["diag", "--config", cfg, "--out", str(tmp_path)])
        out = capsys.readouterr().out
        assert code == 0
        line = next(ln for ln in out.splitlines() if ln.startswith("power_rank_integral"))
        assert float(line.split("=")[1]) == pytest.approx(1.0, rel=1e-6)

    def test_convergence_writes_csv(self, tmp_path):
        text = MINIMAL_CASE4.replace("n = 32768", "n_grid = 256,512").replace("R = 400", "R = 8")
        cfg = write_config(tmp_path, text)
        assert main(["convergence", "--config", cfg, "--out", str(tmp_path)]) == 0
        lines = (tmp_path / "convergence.csv").read_text().splitlines()
        assert len(lines) == 3
        assert lines[0].startswith("n,k_n,ks_d")

    def test_bad_config_exit_code(self, tmp_path, capsys):
        cfg = write_config(tmp_path, "beta = 5\n")
        code = main(["mc", "--config", cfg, "--out", str(tmp_path)])
        assert code == 2
        assert (tmp_path / "errors.csv").exists()

    def test_missing_config_file(self, capsys):
        assert main(["mc", "--config", "/nonexistent/x.cfg"]) == 2
