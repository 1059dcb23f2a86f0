import math
import warnings

import numpy as np
import pytest

from exitlaw import NonIntegrableWarning
from exitlaw._parallel import BLOCK_SIZE, block_sizes, fan_out, worker_count
from exitlaw.cli import main
from exitlaw.experiments import (
    PRESETS,
    ConfigError,
    ScenarioConfig,
    emit_outputs,
    load_config,
    preset,
    run_exact,
    run_scenario,
)
from exitlaw.experiments.output import TABLE_HEADER

TWO_STATE_TOML = """
name = "from_file"
model = "ctmc"
q = [[-1.0, 1.0], [1.0, -1.0]]
labels = [1, 2]
kappa = [1.0, 1.0]
mu = [[1, 1.0]]
n_kills = 20000
n_regen_cycles = 5000
seed = 3
"""


class TestConfig:
    def test_toml_round_trip(self, tmp_path):
        path = tmp_path / "s.toml"
        path.write_text(TWO_STATE_TOML)
        cfg = load_config(path)
        assert cfg.name == "from_file" and cfg.seed == 3
        assert cfg.generator_matrix().n == 2
        np.testing.assert_array_equal(cfg.rate(cfg.generator_matrix()).values, [1.0, 1.0])

    def test_ray_toml(self, tmp_path):
        path = tmp_path / "r.toml"
        path.write_text('name = "r"\nmodel = "ray"\nkappa_pieces = [[0.0, [0.0, 1.0]]]\n')
        assert load_config(path).ray_rate()(2.0) == 2.0

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="unknown"):
            ScenarioConfig.from_dict({"name": "x", "kapa": 1.0})

    def test_state_outside_truncation(self):
        with pytest.raises(ConfigError, match="outside"):
            preset("ssrw_uniform", mu=[[500, 1.0]])

    def test_counts_positive(self):
        with pytest.raises(ConfigError):
            preset("two_state", n_kills=0)

    def test_invalid_generator(self):
        with pytest.raises(ConfigError, match="invalid generator"):
            preset("two_state", q=[[-1.0, 1.0], [1.0, 0.0]])

    def test_wrong_kappa_length(self):
        with pytest.raises(ConfigError):
            preset("two_state", kappa=[1.0, 1.0, 1.0])

    def test_ray_needs_pieces(self):
        with pytest.raises(ConfigError):
            ScenarioConfig.from_dict({"name": "r", "model": "ray"})

    def test_unknown_preset(self):
        with pytest.raises(ConfigError):
            preset("nope")

    @pytest.mark.parametrize("name", sorted(PRESETS))
    def test_presets_validate(self, name):
        assert preset(name).name == name


class TestParallel:
    def test_blocks(self):
        assert block_sizes(120_001, 50_000) == [50_000, 50_000, 20_001]
        assert block_sizes(10, 50_000) == [10]

    def test_independent_of_workers(self):
        def task(n, rng):
            return rng.random(n)

        one = np.concatenate(fan_out(task, 25, 7, 0, block_size=4, workers=1))
        many = np.concatenate(fan_out(task, 25, 7, 0, block_size=4, workers=3))
        np.testing.assert_array_equal(one, many)
        other_stage = np.concatenate(fan_out(task, 25, 7, 1, block_size=4, workers=1))
        assert not np.array_equal(one, other_stage)

    def test_worker_env(self, monkeypatch):
        monkeypatch.setenv("EXITLAW_THREADS", "3")
        assert worker_count() == 3
        monkeypatch.setenv("EXITLAW_THREADS", "0")
        with pytest.raises(ValueError):
            worker_count()

    def test_default_block_size(self):
        assert BLOCK_SIZE == 50_000


class TestScenarios:
    def test_two_state(self):
        rep = run_scenario(preset("two_state", seed=5))
        np.testing.assert_allclose(rep.exact.mass, [2 / 3, 1 / 3], atol=1e-15)
        assert rep.passed
        assert rep.get("TV(empirical exit, exact exit)").value < 0.01
        assert rep.get("TV(reweighted resurrected, empirical exit)").value < 0.02

    def test_walk_exact(self):
        rep = run_exact(preset("ssrw_uniform"))
        assert rep.passed and not rep.warnings
        pi = rep.resurrected.mass
        i0 = int(np.flatnonzero(rep.resurrected.labels == 0)[0])
        assert pi[i0 + 10] / pi[i0 + 9] == pytest.approx((3 - math.sqrt(5)) / 2, abs=1e-9)
        # constant killing: exit law equals the resurrected invariant law
        np.testing.assert_allclose(rep.exact.mass, pi, atol=1e-12)

    def test_finite_kill_set_warns(self):
        cfg = preset("finite_kill_set", n_kills=20_000, n_regen_cycles=3000, tv_exit_tol=0.03)
        with pytest.warns(NonIntegrableWarning):
            rep = run_scenario(cfg)
        assert rep.passed
        assert rep.warnings
        np.testing.assert_allclose(rep.exact.mass[rep.exact.mass > 0], [4 / 9, 1 / 3, 2 / 9],
                                   atol=1e-12)

    def test_finite_kill_set_exact_warns(self):
        assert run_exact(preset("finite_kill_set")).warnings

    def test_qsd_constant(self):
        rep = run_scenario(preset("qsd_constant", seed=2))
        assert rep.values["theta"] == pytest.approx(1.5, abs=1e-12)
        np.testing.assert_allclose(rep.exact.mass, [0.5, 0.5], atol=1e-12)
        assert rep.passed

    def test_qsd_one_sided(self):
        rep = run_scenario(preset("qsd_two_state", seed=2))
        assert rep.values["theta"] == pytest.approx(2 - math.sqrt(2), abs=1e-12)
        np.testing.assert_allclose(rep.exact.mass, [1.0, 0.0], atol=1e-12)
        assert any("degenerate" in n for n in rep.notes)
        assert rep.passed

    def test_mixture(self):
        rep = run_scenario(preset("mixture_path3"))
        assert rep.get("max |epsilon-split mixture - exit law|").value < 1e-9

    def test_ray_linear(self):
        rep = run_scenario(preset("ray_linear", seed=8, n_kills=30_000, n_regen_cycles=5000,
                                  tv_reweight_tol=0.04))
        assert rep.passed
        assert rep.get("KS p (inversion exit vs closed form)").value > 1e-3
        assert rep.get("TV(resurrected occupation, closed form)").value < 0.02

    def test_ray_constant_never_rejects(self):
        rep = run_scenario(preset("ray_constant", n_kills=2000, n_regen_cycles=500,
                                  tv_reweight_tol=0.2))
        assert rep.values["thinning_rejections_per_kill"] == 0.0

    def test_deterministic(self):
        cfg = preset("qsd_random5", seed=11)
        a, b = run_scenario(cfg), run_scenario(cfg.replace())
        assert a.values == b.values
        np.testing.assert_array_equal(a.empirical_exit.mass, b.empirical_exit.mass)
        np.testing.assert_array_equal(a.reweighted.mass, b.reweighted.mass)

    def test_seed_changes_samples(self):
        a = run_scenario(preset("two_state", seed=1))
        b = run_scenario(preset("two_state", seed=2))
        assert not np.array_equal(a.empirical_exit.mass, b.empirical_exit.mass)


class TestOutputs:
    def test_three_files(self, tmp_path):
        paths = emit_outputs(run_scenario(preset("two_state")), tmp_path)
        assert sorted(p.name for p in tmp_path.iterdir()) == sorted(p.name for p in paths)
        assert len(paths) == 3
        lines = paths[0].read_text().splitlines()
        assert lines[0] == ",".join(TABLE_HEADER)
        assert lines[1].startswith("1,,0.6666666666666666,")
        assert "PASS" in paths[1].read_text()
        assert paths[2].read_text().lstrip().startswith("<?xml")

    def test_binned_table(self, tmp_path):
        rep = run_scenario(preset("ray_constant", n_kills=2000, n_regen_cycles=500,
                                  tv_reweight_tol=0.2))
        table = emit_outputs(rep, tmp_path)[0].read_text().splitlines()
        assert table[1].startswith("0.0,0.05,")
        assert table[-1].split(",")[1] == "inf"

    def test_empty_support_refused(self, tmp_path):
        rep = run_scenario(preset("two_state"))
        object.__setattr__(rep.empirical_exit, "mass", np.array([]))
        with pytest.raises(ValueError):
            emit_outputs(rep, tmp_path / "out")
        assert not (tmp_path / "out").exists()

    def test_rerun_byte_identical(self, tmp_path):
        for d in ("a", "b"):
            emit_outputs(run_scenario(preset("qsd_random5", seed=4)), tmp_path / d)
        for kind in ("table.csv", "figure.svg"):
            name = f"qsd_random5_{kind}"
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


class TestCli:
    def test_simulate_preset(self, tmp_path, capsys):
        assert main(["simulate", "--preset", "two_state", "--seed", "9", "--out", str(tmp_path)]) == 0
        assert "OVERALL: PASS" in capsys.readouterr().out
        assert len(list(tmp_path.iterdir())) == 3

    def test_exact_config(self, tmp_path, capsys):
        path = tmp_path / "s.toml"
        path.write_text(TWO_STATE_TOML)
        assert main(["exact", "--config", str(path)]) == 0
        assert "max |R kappa - 1|" in capsys.readouterr().out

    def test_qsd_and_ray(self, capsys):
        assert main(["qsd", "--preset", "qsd_two_state"]) == 0
        assert main(["ray", "--preset", "qsd_two_state"]) == 2
        assert "needs a ray scenario" in capsys.readouterr().err

    def test_failing_check_exit_code(self, tmp_path):
        path = tmp_path / "tight.toml"
        path.write_text(TWO_STATE_TOML + "tv_exit_tol = 1e-9\n")
        assert main(["simulate", "--config", str(path)]) == 1

    def test_bad_config(self, tmp_path, capsys):
        path = tmp_path / "bad.toml"
        path.write_text('name = "b"\nmodel = "sphere"\n')
        assert main(["simulate", "--config", str(path)]) == 2
        assert "model must be" in capsys.readouterr().err

    def test_missing_file(self, capsys):
        assert main(["exact", "--config", "/nonexistent/x.toml"]) == 2

    def test_seed_range(self):
        with pytest.raises(SystemExit):
            main(["simulate", "--preset", "two_state", "--seed", "-1"])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            assert main(["exact", "--preset", "two_state", "--seed", str(2**64 - 1)]) == 0
