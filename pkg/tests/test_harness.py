import json
from pathlib import Path

import numpy as np
import pytest

from mhmr_ita.allocators import build_allocator
from mhmr_ita.checkpoint import load_arrays, save_arrays
from mhmr_ita.errors import ConfigurationError, ContractError
from mhmr_ita.harness import (
    EvalReport,
    TrainConfig,
    compare,
    evaluate,
    format_report,
    load_allocator,
    parse_report,
    train,
)
from mhmr_ita.policy import ModelConfig, PpoHyper

SMALL_NET = dict(d=8, heads=2, gru_width=8)
FAST_HYPER = PpoHyper(episodes_per_update=8, minibatch=4, epochs=2)


def small_config(**overrides) -> TrainConfig:
    base = dict(variant="aehrl2", k=2, i=2, j=2, budget=0, seed=0, hyper=FAST_HYPER, **SMALL_NET)
    base.update(overrides)
    return TrainConfig(**base)


class TestCheckpointFile:
    def test_round_trip_with_header(self, tmp_path):
        path = tmp_path / "x.ndt"
        arrays = {"a.w": np.arange(6.0).reshape(2, 3), "b": np.array(2.5)}
        save_arrays(path, arrays, b'{"v": 1}')
        header, loaded = load_arrays(path)
        assert json.loads(header) == {"v": 1}
        assert set(loaded) == {"a.w", "b"}
        np.testing.assert_array_equal(loaded["a.w"], arrays["a.w"])
        np.testing.assert_array_equal(loaded["b"], arrays["b"])

    def test_rejects_garbage(self, tmp_path):
        path = tmp_path / "junk"
        path.write_bytes(b"not a checkpoint")
        with pytest.raises(ContractError):
            load_arrays(path)


class TestTrain:
    def test_zero_budget_writes_initial_checkpoint(self, tmp_path):
        config = small_config(out_dir=str(tmp_path / "run"))
        result = train(config)
        assert result.checkpoint.exists()
        assert result.episodes == 0
        allocator = load_allocator(result.checkpoint)
        fresh = build_allocator("aehrl2", 2, 2, 2, config=ModelConfig(kind="aehrl2", k=2, i=2, j=2, init_seed=0, **{**SMALL_NET, "value_hidden": 8}))
        for name, t in fresh.model.params.items():
            np.testing.assert_array_equal(allocator.model.params[name].data, t.data)

    def test_identical_config_gives_identical_metrics(self, tmp_path):
        c1 = small_config(budget=16, out_dir=str(tmp_path / "a"))
        c2 = small_config(budget=16, out_dir=str(tmp_path / "b"))
        r1 = train(c1)
        r2 = train(c2)
        assert r1.metrics.read_text() == r2.metrics.read_text()
        assert r1.updates == 2

    def test_resume_continues_episode_count(self, tmp_path):
        out = str(tmp_path / "run")
        train(small_config(budget=8, out_dir=out))
        result = train(small_config(budget=16, out_dir=out))
        assert result.episodes == 16
        header, _ = load_arrays(result.checkpoint)
        assert json.loads(header)["episodes_done"] == 16

    def test_metrics_rows_have_schema(self, tmp_path):
        result = train(small_config(budget=8, out_dir=str(tmp_path / "run")))
        lines = result.metrics.read_text().strip().split("\n")
        assert lines[0].split("\t") == [
            "update", "episodes", "mean_reward", "policy_loss", "value_loss",
            "entropy", "clip_fraction", "approx_kl",
        ]
        assert len(lines) == 2

    def test_ra_training_is_a_checkpoint_write(self, tmp_path):
        result = train(TrainConfig(variant="ra", k=2, i=2, j=2, budget=0, out_dir=str(tmp_path / "ra")))
        allocator = load_allocator(result.checkpoint)
        assert allocator.kind == "ra"
        assert not allocator.trainable


class TestBandit:
    def test_bandit_reaches_analytic_optimum(self, tmp_path):
        config = TrainConfig(
            variant="bandit", budget=64 * 30, seed=1, out_dir=str(tmp_path / "bandit"),
            hyper=PpoHyper(episodes_per_update=64, minibatch=32, lr=3e-3),
        )
        result = train(config)
        rows = result.metrics.read_text().strip().split("\n")[1:]
        final_mean = float(rows[-1].split("\t")[2])
        assert final_mean >= 0.9  # optimum is +1


class TestEvaluate:
    def test_report_schema_and_recompute(self):
        allocator = build_allocator("ra", 2, 2, 4)
        report = evaluate(allocator, (2, 2, 4), 100, seed=5, mode="expected")
        assert report.n_scenarios == 100
        assert len(report.total_scores) == 100
        text = format_report(report)
        parsed = parse_report(text)
        assert parsed == report
        # summary statistics recompute exactly from the rows
        mt, st = parsed.aps_total
        assert mt == np.asarray(parsed.total_scores).mean()
        assert st == np.asarray(parsed.total_scores).std()

    def test_empty_evaluation_rejected(self):
        allocator = build_allocator("ra", 2, 2, 4)
        with pytest.raises(ConfigurationError, match="empty evaluation"):
            evaluate(allocator, (2, 2, 4), 0)

    def test_identical_inputs_identical_reports(self):
        allocator = build_allocator("ra", 2, 2, 4)
        a = evaluate(allocator, (2, 2, 4), 20, seed=3)
        b = evaluate(allocator, (2, 2, 4), 20, seed=3)
        assert a == b

    def test_scenario_streams_identical_across_allocators(self):
        # both allocators must see the same contexts for paired comparison;
        # verified indirectly: equal seeds give equal per-scenario best-possible
        # structure, here via the deterministic context sample itself
        from mhmr_ita.context import ScenarioSpec, sample_context
        from mhmr_ita.rng import derive

        seed = 11
        specs = [
            ScenarioSpec(k=2, i=2, j=4, uav_count=1, seed=derive(derive(seed, 1), s))
            for s in range(5)
        ]
        ctxs_a = [sample_context(s) for s in specs]
        ctxs_b = [sample_context(s) for s in specs]
        assert ctxs_a == ctxs_b

    def test_stochastic_mode_supported(self):
        allocator = build_allocator("ra", 2, 2, 3)
        report = evaluate(allocator, (2, 2, 3), 10, seed=2, mode="stochastic")
        assert all(abs(s) <= 35 * 3 for s in report.total_scores)


class TestCompare:
    def _report(self, kind, scores):
        arr = tuple(float(s) for s in scores)
        return EvalReport(kind=kind, k=2, i=2, j=4, n_scenarios=len(arr), seed=0,
                          mode="expected", total_scores=arr, poi_scores=tuple(s / 4 for s in arr))

    def test_identical_reports_p_one(self):
        a = self._report("ra", [1, 2, 3, 4])
        result = compare(a, self._report("atrl", [1, 2, 3, 4]), "total")
        assert result.welch.p == pytest.approx(1.0, abs=1e-12)
        assert result.stars == ""

    def test_star_thresholds(self):
        from mhmr_ita.stats import significance_stars

        assert significance_stars(0.03) == "**"
        assert significance_stars(0.0005) == "****"

    def test_mismatched_settings_rejected(self):
        a = self._report("ra", [1, 2, 3])
        b = EvalReport(kind="atrl", k=3, i=2, j=4, n_scenarios=3, seed=0, mode="expected",
                       total_scores=(1.0, 2.0, 3.0), poi_scores=(0.1, 0.2, 0.3))
        with pytest.raises(ContractError):
            compare(a, b)

    def test_metric_selects_columns(self):
        a = self._report("ra", [1, 2, 3, 4])
        b = self._report("atrl", [2, 3, 4, 5])
        t_total = compare(a, b, "total").welch.t
        t_poi = compare(a, b, "poi").welch.t
        assert t_total == pytest.approx(t_poi, rel=1e-12)  # scale-invariant
