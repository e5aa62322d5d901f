"""Training, scenario evaluation, report files, and comparisons.

Scenario streams are derived from a root seed and the scenario index, so
two allocators evaluated with the same (setting, seed) see bit-identical
contexts and their per-scenario scores pair up. Reports are plain text:
one tab-separated row per scenario plus a recomputable summary block.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .allocators import build_allocator, PolicyAllocator, RandomAllocator
from .context import MultiAttributeContext, ScenarioSpec, sample_context
from .errors import ConfigurationError, ContractError
from .numeric import AdamState
from .policy import (
    AllocationModel,
    EpisodeRecord,
    ModelConfig,
    PpoHyper,
    PpoMetrics,
    ppo_update,
)
from .rng import derive
from .simulator import mission_reward, simulate_mission
from .stats import WelchResult, significance_stars, welch_t_test

# stream tags for seed derivation
_SCENARIO = 1
_DECODE = 2
_MISSION = 3
_UPDATE = 4

CHECKPOINT_NAME = "checkpoint.ndt"
METRICS_NAME = "metrics.tsv"

_METRICS_HEADER = (
    "update\tepisodes\tmean_reward\tpolicy_loss\tvalue_loss\tentropy\tclip_fraction\tapprox_kl"
)


@dataclass(frozen=True)
class TrainConfig:
    """Everything a training run needs; serialized into the checkpoint header."""

    variant: str
    k: int = 2
    i: int = 2
    j: int = 4
    budget: int = 0  # episodes
    seed: int = 0
    out_dir: str = "out"
    mode: str = "expected"
    uav_count: Optional[int] = None
    hazard_ratio: float = 0.5
    d: int = 64
    heads: int = 4
    gru_width: int = 64
    hyper: PpoHyper = field(default_factory=PpoHyper)

    def scenario(self, index: int) -> ScenarioSpec:
        uav = self.uav_count if self.uav_count is not None else (self.i + 1) // 2
        return ScenarioSpec(
            k=self.k,
            i=self.i,
            j=self.j,
            uav_count=uav,
            hazard_ratio=self.hazard_ratio,
            seed=derive(derive(self.seed, _SCENARIO), index),
        )

    def model_config(self) -> ModelConfig:
        return ModelConfig(
            kind=self.variant,
            k=self.k,
            i=self.i,
            j=self.j,
            d=self.d,
            heads=self.heads,
            gru_width=self.gru_width,
            value_hidden=self.gru_width,
            init_seed=self.seed,
        )


@dataclass
class TrainResult:
    checkpoint: Path
    metrics: Path
    episodes: int
    updates: int


def _metrics_row(update: int, episodes: int, m: PpoMetrics) -> str:
    return (
        f"{update}\t{episodes}\t{m.mean_reward!r}\t{m.policy_loss!r}\t{m.value_loss!r}\t"
        f"{m.entropy!r}\t{m.clip_fraction!r}\t{m.approx_kl!r}"
    )


def train(config: TrainConfig) -> TrainResult:
    """Train (or resume) an allocator and leave a checkpoint plus metrics log.

    A zero budget writes a checkpoint of the freshly initialized parameters.
    Episodes left over after the last full update batch are discarded.
    """
    out = Path(config.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigurationError(f"cannot create output directory {out}: {exc}") from exc
    checkpoint_path = out / CHECKPOINT_NAME
    metrics_path = out / METRICS_NAME

    if config.variant == "bandit":
        return _train_bandit(config, checkpoint_path, metrics_path)
    if config.variant == "ra":
        _write_ra_checkpoint(config, checkpoint_path)
        if not metrics_path.exists():
            metrics_path.write_text(_METRICS_HEADER + "\n")
        return TrainResult(checkpoint_path, metrics_path, 0, 0)

    episodes_done = 0
    updates_done = 0
    if checkpoint_path.exists():
        model, header, opt_state = AllocationModel.load(checkpoint_path)
        if header.get("train_config", {}).get("variant") != config.variant:
            raise ConfigurationError(f"checkpoint in {out} trains {header.get('train_config')}")
        episodes_done = int(header.get("episodes_done", 0))
        updates_done = int(header.get("updates_done", 0))
        if opt_state is None:
            opt_state = AdamState.for_params(model.params)
    else:
        model = AllocationModel(config.model_config())
        opt_state = AdamState.for_params(model.params)
        metrics_path.write_text(_METRICS_HEADER + "\n")

    hyper = config.hyper
    batch: list[EpisodeRecord] = []
    try:
        metrics_fh = open(metrics_path, "a")
    except OSError as exc:
        raise ConfigurationError(f"cannot open metrics log {metrics_path}: {exc}") from exc
    with metrics_fh:
        while episodes_done < config.budget:
            e = episodes_done
            ctx = sample_context(config.scenario(e))
            decision, record = model.allocate(ctx, "sample", seed=derive(derive(config.seed, _DECODE), e))
            outcome = simulate_mission(
                ctx, decision, seed=derive(config.seed, _MISSION), mode=config.mode, mission_id=e
            )
            record.reward = mission_reward(outcome)
            batch.append(record)
            episodes_done += 1
            if len(batch) == hyper.episodes_per_update:
                metrics = ppo_update(
                    batch, model, hyper, opt_state, seed=derive(derive(config.seed, _UPDATE), updates_done)
                )
                updates_done += 1
                batch = []
                metrics_fh.write(_metrics_row(updates_done, episodes_done, metrics) + "\n")
                metrics_fh.flush()
                if updates_done % 20 == 0:
                    _save_model(model, config, checkpoint_path, episodes_done, updates_done, opt_state)
    _save_model(model, config, checkpoint_path, episodes_done, updates_done, opt_state)
    return TrainResult(checkpoint_path, metrics_path, episodes_done, updates_done)


def _save_model(model, config, path, episodes, updates, opt_state) -> None:
    model.save(
        path,
        extra_header={
            "train_config": _config_header(config),
            "episodes_done": episodes,
            "updates_done": updates,
        },
        opt_state=opt_state,
    )


def _config_header(config: TrainConfig) -> dict:
    doc = asdict(config)
    doc["hyper"] = asdict(config.hyper)
    return doc


def _write_ra_checkpoint(config: TrainConfig, path: Path) -> None:
    from . import checkpoint as ckpt

    header = {
        "config": {"kind": "ra", "k": config.k, "i": config.i, "j": config.j},
        "train_config": _config_header(config),
        "episodes_done": 0,
        "updates_done": 0,
    }
    ckpt.save_arrays(path, {}, json.dumps(header, sort_keys=True).encode("utf-8"))


def load_allocator(path: str | Path):
    """Rebuild the allocator an eval/attn command needs from a checkpoint."""
    from . import checkpoint as ckpt

    header_bytes, _ = ckpt.load_arrays(path)
    header = json.loads(header_bytes.decode("utf-8"))
    kind = header["config"]["kind"]
    if kind == "ra":
        cfg = header["config"]
        return RandomAllocator(cfg["k"], cfg["i"], cfg["j"])
    model, _, _ = AllocationModel.load(path)
    return PolicyAllocator(model)


# -- the contextual bandit used for trainer sanity checks ----------------------


def _train_bandit(config: TrainConfig, checkpoint_path: Path, metrics_path: Path) -> TrainResult:
    """2-armed bandit on a fixed context: +1 for action 0, -1 for action 1."""
    from .bandit import BanditModel

    model = BanditModel(init_seed=config.seed)
    opt_state = AdamState.for_params(model.params)
    hyper = config.hyper
    episodes_done = 0
    updates_done = 0
    metrics_path.write_text(_METRICS_HEADER + "\n")
    batch: list[EpisodeRecord] = []
    with open(metrics_path, "a") as metrics_fh:
        while episodes_done < config.budget:
            record = model.sample_episode(seed=derive(derive(config.seed, _DECODE), episodes_done))
            record.reward = 1.0 if record.actions[0][0] == 0 else -1.0
            batch.append(record)
            episodes_done += 1
            if len(batch) == hyper.episodes_per_update:
                metrics = ppo_update(
                    batch, model, hyper, opt_state, seed=derive(derive(config.seed, _UPDATE), updates_done)
                )
                updates_done += 1
                batch = []
                metrics_fh.write(_metrics_row(updates_done, episodes_done, metrics) + "\n")
    model.save(checkpoint_path, extra_header={"train_config": _config_header(config)})
    return TrainResult(checkpoint_path, metrics_path, episodes_done, updates_done)


# -- evaluation -----------------------------------------------------------------


@dataclass(frozen=True)
class EvalReport:
    """Per-scenario scores of one allocator plus their summary statistics."""

    kind: str
    k: int
    i: int
    j: int
    n_scenarios: int
    seed: int
    mode: str
    total_scores: tuple[float, ...]
    poi_scores: tuple[float, ...]

    @property
    def aps_total(self) -> tuple[float, float]:
        arr = np.asarray(self.total_scores)
        return float(arr.mean()), float(arr.std())

    @property
    def aps_poi(self) -> tuple[float, float]:
        arr = np.asarray(self.poi_scores)
        return float(arr.mean()), float(arr.std())


def evaluate(
    allocator,
    setting: tuple[int, int, int],
    n_scenarios: int,
    seed: int = 0,
    mode: str = "expected",
    uav_count: Optional[int] = None,
    hazard_ratio: float = 0.5,
) -> EvalReport:
    """Score an allocator over a derived scenario stream.

    Trained policies decode greedily; the random baseline redraws per
    scenario. Missions run in the requested scoring mode.
    """
    if n_scenarios <= 0:
        raise ConfigurationError("empty evaluation")
    k, i, j = setting
    uav = uav_count if uav_count is not None else (i + 1) // 2
    totals = []
    means = []
    for s in range(n_scenarios):
        spec = ScenarioSpec(
            k=k, i=i, j=j, uav_count=uav, hazard_ratio=hazard_ratio,
            seed=derive(derive(seed, _SCENARIO), s),
        )
        ctx = sample_context(spec)
        mode_for_allocator = "sample" if not allocator.trainable else "greedy"
        decision, _ = allocator.allocate(ctx, mode_for_allocator, seed=derive(derive(seed, _DECODE), s))
        outcome = simulate_mission(
            ctx, decision, seed=derive(seed, _MISSION), mode=mode, mission_id=s
        )
        totals.append(outcome.total_score)
        means.append(outcome.mean_poi_score)
    return EvalReport(
        kind=allocator.kind,
        k=k,
        i=i,
        j=j,
        n_scenarios=n_scenarios,
        seed=seed,
        mode=mode,
        total_scores=tuple(totals),
        poi_scores=tuple(means),
    )


def format_report(report: EvalReport) -> str:
    lines = [
        f"# allocator: {report.kind}",
        f"# setting: {report.k},{report.i},{report.j}",
        f"# n_scenarios: {report.n_scenarios}",
        f"# seed: {report.seed}",
        f"# mode: {report.mode}",
        "scenario_id\ttotal_score\tmean_poi_score",
    ]
    for s, (total, mean) in enumerate(zip(report.total_scores, report.poi_scores)):
        lines.append(f"{s}\t{total!r}\t{mean!r}")
    mt, st = report.aps_total
    mp, sp = report.aps_poi
    lines.append(f"# APS_total: {mt!r} {st!r}")
    lines.append(f"# APS_poi: {mp!r} {sp!r}")
    return "\n".join(lines) + "\n"


def parse_report(text: str) -> EvalReport:
    meta: dict[str, str] = {}
    totals = []
    means = []
    for line in text.splitlines():
        if line.startswith("#"):
            key, _, value = line[1:].partition(":")
            meta[key.strip()] = value.strip()
        elif line and not line.startswith("scenario_id"):
            _, total, mean = line.split("\t")
            totals.append(float(total))
            means.append(float(mean))
    k, i, j = (int(x) for x in meta["setting"].split(","))
    report = EvalReport(
        kind=meta["allocator"],
        k=k,
        i=i,
        j=j,
        n_scenarios=int(meta["n_scenarios"]),
        seed=int(meta["seed"]),
        mode=meta["mode"],
        total_scores=tuple(totals),
        poi_scores=tuple(means),
    )
    if report.n_scenarios != len(totals):
        raise ContractError("report row count disagrees with its summary")
    return report


@dataclass(frozen=True)
class ComparisonResult:
    kind_a: str
    kind_b: str
    metric: str
    welch: WelchResult

    @property
    def stars(self) -> str:
        return significance_stars(self.welch.p)


def compare(report_a: EvalReport, report_b: EvalReport, metric: str = "total") -> ComparisonResult:
    """Welch test between two reports on the chosen per-scenario metric."""
    if metric not in ("total", "poi"):
        raise ConfigurationError(f"unknown metric {metric!r}")
    same_setting = (report_a.k, report_a.i, report_a.j) == (report_b.k, report_b.i, report_b.j)
    if not same_setting or report_a.n_scenarios != report_b.n_scenarios:
        raise ContractError("reports cover different settings or scenario counts")
    a = report_a.total_scores if metric == "total" else report_a.poi_scores
    b = report_b.total_scores if metric == "total" else report_b.poi_scores
    return ComparisonResult(report_a.kind, report_b.kind, metric, welch_t_test(a, b))
