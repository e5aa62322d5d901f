"""Option hierarchy, intra-option GRU policies, and PPO training.

Options execute in a fixed order; each option's GRU scans its decision
units (one per POI, or one per POI per merged duty group), emitting one
categorical sub-action per unit. The sampled action sequence of an option
feeds the next option's attention encoder as a prior-action embedding.
Merged options encode their duty tuple as a row-major mixed-radix index.

Training is clipped-surrogate PPO with a shared one-step reward: every
option of an episode sees the same mission score, batch-normalized before
the advantage is formed against a shared critic on the option context.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import checkpoint as ckpt
from .context import (
    HUMAN_FEATURES,
    ROBOT_FEATURES,
    TASK_FEATURES,
    MultiAttributeContext,
    encode_context,
)
from .errors import ConfigurationError, ContractError, TrainingError
from .numeric import (
    AdamState,
    GruParams,
    ParamSet,
    Tensor,
    adam_update,
    add,
    backward,
    clip,
    concat,
    constant,
    dense,
    exp,
    glorot_uniform,
    gru_step,
    leaky_relu,
    log_softmax,
    minimum,
    mul,
    narrow,
    neg,
    reshape,
    sub,
    take_rows,
)
from .representation import (
    AttentionExport,
    EmbedParams,
    HcaParams,
    build_embed_params,
    build_hca_params,
    embed_prior_actions,
    head_average,
    option_context,
    recurrent_embed,
)
from .rng import DECODE_STREAM, INIT_STREAM, stream
from .simulator import AllocationDecision

_RATIO_LOG_CAP = 60.0  # keeps exp(logp - old_logp) finite for runaway ratios


class Duty(Enum):
    ASSIGN = "assign"
    NAV = "nav"
    CAPTURE = "capture"
    CLASSIFY = "classify"


def duty_arity(duty: Duty, k: int, i: int) -> int:
    return i if duty is Duty.ASSIGN else k + 1


@dataclass(frozen=True)
class UnitSpec:
    """One internal decision step: which POI it settles and what it chooses."""

    poi: int
    duties: tuple[Duty, ...]
    arity: int


@dataclass(frozen=True)
class OptionSpec:
    index: int
    label: str
    units: tuple[UnitSpec, ...]

    @property
    def arities(self) -> tuple[int, ...]:
        return tuple(u.arity for u in self.units)

    @property
    def max_arity(self) -> int:
        return max((u.arity for u in self.units), default=1)


@dataclass(frozen=True)
class OptionHierarchy:
    variant: str
    k: int
    i: int
    j: int
    options: tuple[OptionSpec, ...]

    def __len__(self) -> int:
        return len(self.options)


def _option(index: int, label: str, duty_groups: Sequence[tuple[Duty, ...]], k: int, i: int, j: int) -> OptionSpec:
    units = []
    for duties in duty_groups:
        arity = math.prod(duty_arity(d, k, i) for d in duties)
        units.extend(UnitSpec(p, duties, arity) for p in range(j))
    return OptionSpec(index, label, tuple(units))


def build_hierarchy(variant: str, k: int, i: int, j: int) -> OptionHierarchy:
    """The fixed option ordering for a hierarchy variant.

    ``aehrl4`` splits assignment, navigation autonomy, capture autonomy, and
    classification into four options of one unit per POI; ``aehrl3`` merges
    the two autonomy options; ``aehrl2`` further merges assignment into the
    autonomy option; ``atrl`` is the flat single-option counterpart covering
    the aehrl2 action spaces back to back.
    """
    if k < 1 or i < 1 or j < 0:
        raise ConfigurationError("hierarchy needs k >= 1, i >= 1, j >= 0")
    groups: list[list[tuple[Duty, ...]]]
    if variant == "aehrl4":
        groups = [[(Duty.ASSIGN,)], [(Duty.NAV,)], [(Duty.CAPTURE,)], [(Duty.CLASSIFY,)]]
    elif variant == "aehrl3":
        groups = [[(Duty.ASSIGN,)], [(Duty.NAV, Duty.CAPTURE)], [(Duty.CLASSIFY,)]]
    elif variant == "aehrl2":
        groups = [[(Duty.ASSIGN, Duty.NAV, Duty.CAPTURE)], [(Duty.CLASSIFY,)]]
    elif variant == "atrl":
        groups = [[(Duty.ASSIGN, Duty.NAV, Duty.CAPTURE), (Duty.CLASSIFY,)]]
    else:
        raise ConfigurationError(f"unknown hierarchy variant {variant!r}")
    options = tuple(
        _option(n, "+".join(d.value for duties in duty_groups for d in duties), duty_groups, k, i, j)
        for n, duty_groups in enumerate(groups)
    )
    return OptionHierarchy(variant, k, i, j, options)


def assemble_decision(hierarchy: OptionHierarchy, actions: Sequence[Sequence[int]]) -> AllocationDecision:
    """Decode per-unit actions into the joint allocation (row-major radixes)."""
    k, i, j = hierarchy.k, hierarchy.i, hierarchy.j
    slots: dict[Duty, list[Optional[int]]] = {d: [None] * j for d in Duty}
    filled: dict[Duty, list[bool]] = {d: [False] * j for d in Duty}
    for option, option_actions in zip(hierarchy.options, actions):
        if len(option_actions) != len(option.units):
            raise ContractError(f"option {option.index} expects {len(option.units)} actions")
        for unit, action in zip(option.units, option_actions):
            if not 0 <= action < unit.arity:
                raise ContractError(f"action {action} outside unit arity {unit.arity}")
            remainder = action
            for duty in reversed(unit.duties):
                arity = duty_arity(duty, k, i)
                remainder, value = divmod(remainder, arity)
                if filled[duty][unit.poi]:
                    raise ContractError(f"duty {duty} decided twice for POI {unit.poi}")
                filled[duty][unit.poi] = True
                slots[duty][unit.poi] = value
    for duty in Duty:
        if not all(filled[duty]):
            raise ContractError(f"duty {duty} left undecided for some POI")

    def control(value: int) -> Optional[int]:
        return None if value == 0 else value - 1

    return AllocationDecision(
        poi_to_robot=tuple(slots[Duty.ASSIGN][p] for p in range(j)),  # type: ignore[arg-type]
        nav_control=tuple(control(slots[Duty.NAV][p]) for p in range(j)),
        capture_control=tuple(control(slots[Duty.CAPTURE][p]) for p in range(j)),
        classify=tuple(control(slots[Duty.CLASSIFY][p]) for p in range(j)),
    )


# -- model --------------------------------------------------------------------


@dataclass(frozen=True)
class ModelConfig:
    """Structural hyperparameters of an allocation policy network."""

    kind: str
    k: int
    i: int
    j: int
    d: int = 64
    heads: int = 4
    gru_width: int = 64
    value_hidden: int = 64
    unit_embed: int = 16
    action_embed: int = 16
    ff_mult: int = 4
    hrl_hidden: int = 0  # 0: match the feature width d
    init_seed: int = 0

    def to_json(self) -> str:
        return json.dumps(self.__dict__, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ModelConfig":
        return cls(**json.loads(text))


_KIND_FLAGS = {
    # kind -> (hierarchy variant, uses attention representation, uses prior actions)
    "atrl": ("atrl", True, False),
    "hrl2": ("aehrl2", False, False),
    "hrl3": ("aehrl3", False, False),
    "hrl4": ("aehrl4", False, False),
    "athrl2": ("aehrl2", True, False),
    "athrl3": ("aehrl3", True, False),
    "athrl4": ("aehrl4", True, False),
    "aehrl2": ("aehrl2", True, True),
    "aehrl3": ("aehrl3", True, True),
    "aehrl4": ("aehrl4", True, True),
}

TRAINABLE_KINDS = tuple(_KIND_FLAGS)


@dataclass
class OptionPolicyParams:
    gru: GruParams
    unit_table: Tensor
    act_table: Tensor
    heads: dict[int, tuple[Tensor, Tensor]]  # arity -> (weights, bias)


@dataclass
class OptionEval:
    """Differentiable per-option quantities produced by one forward pass."""

    actions: list[int]
    logp: Tensor  # scalar: sum of per-unit log-probabilities
    entropy: Tensor  # scalar: sum of per-unit entropies
    value: Tensor  # scalar critic estimate
    n_units: int
    c_omega: np.ndarray


@dataclass
class ForwardResult:
    decision: AllocationDecision
    options: list[OptionEval]
    attention: Optional[list[dict[str, list[np.ndarray]]]] = None
    refined_hf: Optional[list[np.ndarray]] = None


@dataclass
class EpisodeRecord:
    """One sampled roll of the hierarchy plus its shared one-step reward.

    Every option of an episode carries the same reward; ``reward`` is set by
    the caller once the mission outcome is known.
    """

    ctx: MultiAttributeContext
    actions: list[list[int]]
    old_logp: list[float]
    old_value: list[float]
    c_omegas: list[np.ndarray]
    reward: float = 0.0


class AllocationModel:
    """A trainable hierarchical allocator: representation, policies, critic."""

    def __init__(self, config: ModelConfig):
        if config.kind not in _KIND_FLAGS:
            raise ConfigurationError(f"unknown trainable kind {config.kind!r}")
        variant, use_attention, use_prior = _KIND_FLAGS[config.kind]
        self.config = config
        self.hierarchy = build_hierarchy(variant, config.k, config.i, config.j)
        self.use_attention = use_attention
        self.use_prior = use_prior
        self.params = ParamSet()
        self._build()

    # construction

    def _build(self) -> None:
        cfg = self.config
        rng = stream(cfg.init_seed, INIT_STREAM)
        ps = self.params
        feature_widths = {"hf": HUMAN_FEATURES, "rc": ROBOT_FEATURES, "ts": TASK_FEATURES}
        if self.use_attention:
            self.embed: Optional[EmbedParams] = build_embed_params(ps, rng, feature_widths, cfg.d)
            self.encoders: list[dict[str, HcaParams]] = []
            for option in self.hierarchy.options:
                self.encoders.append(
                    {
                        name: build_hca_params(
                            ps, rng, f"hca.opt{option.index}.{name}", cfg.d, cfg.heads,
                            self.use_prior, cfg.ff_mult,
                        )
                        for name in ("hf", "rc", "ts")
                    }
                )
            self.prior_tables: list[Optional[Tensor]] = [None]
            for option in self.hierarchy.options[1:]:
                if self.use_prior:
                    prev = self.hierarchy.options[option.index - 1]
                    table = ps.add(
                        f"prior.opt{option.index}.table",
                        glorot_uniform(rng, (prev.max_arity, cfg.d), prev.max_arity, cfg.d),
                    )
                    self.prior_tables.append(table)
                else:
                    self.prior_tables.append(None)
        else:
            flat_width = (
                cfg.k * HUMAN_FEATURES + cfg.i * ROBOT_FEATURES + cfg.j * TASK_FEATURES
            )
            hidden = cfg.hrl_hidden if cfg.hrl_hidden > 0 else cfg.d
            self.embed = None
            self.flat_encoders = []
            for option in self.hierarchy.options:
                prefix = f"enc.opt{option.index}"
                self.flat_encoders.append(
                    (
                        ps.add(f"{prefix}.w1", glorot_uniform(rng, (flat_width, hidden), flat_width, hidden)),
                        ps.add(f"{prefix}.b1", np.zeros(hidden)),
                        ps.add(f"{prefix}.w2", glorot_uniform(rng, (hidden, 3 * cfg.d), hidden, 3 * cfg.d)),
                        ps.add(f"{prefix}.b2", np.zeros(3 * cfg.d)),
                    )
                )

        self.policies: list[OptionPolicyParams] = []
        in_width = 3 * cfg.d + cfg.unit_embed + cfg.action_embed
        for option in self.hierarchy.options:
            prefix = f"pol.opt{option.index}"
            gru = GruParams(
                w_x=ps.add(f"{prefix}.gru.w_x", glorot_uniform(rng, (in_width, 3 * cfg.gru_width), in_width, 3 * cfg.gru_width)),
                w_h=ps.add(f"{prefix}.gru.w_h", glorot_uniform(rng, (cfg.gru_width, 3 * cfg.gru_width), cfg.gru_width, 3 * cfg.gru_width)),
                b=ps.add(f"{prefix}.gru.b", np.zeros(3 * cfg.gru_width)),
            )
            n_units = max(len(option.units), 1)
            unit_table = ps.add(
                f"{prefix}.unit_table", glorot_uniform(rng, (n_units, cfg.unit_embed), n_units, cfg.unit_embed)
            )
            act_table = ps.add(
                f"{prefix}.act_table",
                glorot_uniform(rng, (option.max_arity, cfg.action_embed), option.max_arity, cfg.action_embed),
            )
            heads = {}
            for arity in sorted(set(option.arities)):
                heads[arity] = (
                    ps.add(f"{prefix}.head_a{arity}.w", glorot_uniform(rng, (cfg.gru_width, arity), cfg.gru_width, arity)),
                    ps.add(f"{prefix}.head_a{arity}.b", np.zeros(arity)),
                )
            self.policies.append(OptionPolicyParams(gru, unit_table, act_table, heads))

        self.value_params = (
            ps.add("value.w1", glorot_uniform(rng, (3 * cfg.d, cfg.value_hidden), 3 * cfg.d, cfg.value_hidden)),
            ps.add("value.b1", np.zeros(cfg.value_hidden)),
            ps.add("value.w2", glorot_uniform(rng, (cfg.value_hidden, 1), cfg.value_hidden, 1)),
            ps.add("value.b2", np.zeros(1)),
        )

    # forward passes

    def _option_vector(self, ctx_consts, reps, option_index: int, prev_actions) -> tuple[Tensor, Optional[dict]]:
        cfg = self.config
        if self.use_attention:
            f = reps.fused().data.shape[0]
            if self.use_prior:
                if option_index == 0:
                    a_pre = embed_prior_actions(None, constant(np.zeros((1, cfg.d))), f).a_pre
                else:
                    a_pre = embed_prior_actions(
                        prev_actions, self.prior_tables[option_index], f
                    ).a_pre
            else:
                a_pre = None
            oc = option_context(reps, a_pre, self.encoders[option_index])
            return oc.c_omega, {
                "attention": {name: oc.attention[name] for name in oc.attention},
                "c_hf": oc.c_hf,
            }
        w1, b1, w2, b2 = self.flat_encoders[option_index]
        return dense(leaky_relu(dense(ctx_consts, w1, b1)), w2, b2), None

    def value_estimate(self, c_omega: Tensor) -> Tensor:
        w1, b1, w2, b2 = self.value_params
        return narrow(dense(leaky_relu(dense(c_omega, w1, b1)), w2, b2), 0, 0, 1).sum()

    def forward(
        self,
        ctx: MultiAttributeContext,
        mode: str = "greedy",
        seed: int = 0,
        forced_actions: Optional[Sequence[Sequence[int]]] = None,
        record_attention: bool = False,
    ) -> ForwardResult:
        matrices = encode_context(ctx)
        if self.use_attention:
            reps = recurrent_embed(matrices, self.embed)
            flat = None
        else:
            reps = None
            flat = constant(
                np.concatenate(
                    [matrices.c_hf.reshape(-1), matrices.c_rc.reshape(-1), matrices.c_ts.reshape(-1)]
                )
            )
        evals: list[OptionEval] = []
        attention_out: list[dict] = []
        refined_out: list[np.ndarray] = []
        prev_actions: Optional[list[int]] = None
        for option in self.hierarchy.options:
            c_omega, extras = self._option_vector(flat, reps, option.index, prev_actions)
            forced = forced_actions[option.index] if forced_actions is not None else None
            actions, logp, entropy = decode_option(
                option, c_omega, self.policies[option.index], mode, seed, forced
            )
            evals.append(
                OptionEval(actions, logp, entropy, self.value_estimate(c_omega), len(option.units), c_omega.data.copy())
            )
            if record_attention and extras is not None:
                attention_out.append(
                    {name: [w.data.copy() for w in ws] for name, ws in extras["attention"].items()}
                )
                refined_out.append(extras["c_hf"].data.copy())
            prev_actions = actions
        decision = assemble_decision(self.hierarchy, [e.actions for e in evals])
        return ForwardResult(
            decision,
            evals,
            attention=attention_out if record_attention else None,
            refined_hf=refined_out if record_attention else None,
        )

    def allocate(self, ctx: MultiAttributeContext, mode: str, seed: int = 0) -> tuple[AllocationDecision, EpisodeRecord]:
        result = self.forward(ctx, mode=mode, seed=seed)
        record = EpisodeRecord(
            ctx=ctx,
            actions=[e.actions for e in result.options],
            old_logp=[float(e.logp.data) for e in result.options],
            old_value=[float(e.value.data) for e in result.options],
            c_omegas=[e.c_omega for e in result.options],
        )
        return result.decision, record

    def replay(self, episode: EpisodeRecord) -> list[OptionEval]:
        """Re-run the forward pass teacher-forcing the stored actions."""
        return self.forward(episode.ctx, mode="replay", forced_actions=episode.actions).options

    def export_attention(self, ctx: MultiAttributeContext, option_index: int) -> AttentionExport:
        """Greedy-pass human-factor matrix and head-averaged weights of one option."""
        if not self.use_attention:
            raise ContractError(f"{self.config.kind} has no attention representation")
        if not 0 <= option_index < len(self.hierarchy.options):
            raise ContractError(f"option index {option_index} out of range")
        result = self.forward(ctx, mode="greedy", record_attention=True)
        weights = result.attention[option_index]["hf"]
        return AttentionExport(
            option_index=option_index,
            target="hf",
            matrix=result.refined_hf[option_index],
            weights=np.mean(weights, axis=0),
        )

    # persistence

    def save(self, path: str | Path, extra_header: Optional[dict] = None, opt_state: Optional[AdamState] = None) -> None:
        header = {"config": self.config.__dict__}
        if extra_header:
            header.update(extra_header)
        arrays = self.params.state_arrays()
        if opt_state is not None:
            header["adam_step"] = opt_state.step
            for name, arr in opt_state.m.items():
                arrays[f"opt.m.{name}"] = arr
            for name, arr in opt_state.v.items():
                arrays[f"opt.v.{name}"] = arr
        ckpt.save_arrays(path, arrays, json.dumps(header, sort_keys=True).encode("utf-8"))

    @classmethod
    def load(cls, path: str | Path) -> tuple["AllocationModel", dict, Optional[AdamState]]:
        header_bytes, arrays = ckpt.load_arrays(path)
        header = json.loads(header_bytes.decode("utf-8"))
        model = cls(ModelConfig(**header["config"]))
        param_arrays = {k: v for k, v in arrays.items() if not k.startswith("opt.")}
        model.params.load_arrays(param_arrays)
        opt_state = None
        if "adam_step" in header:
            opt_state = AdamState(
                m={k[len("opt.m."):]: v for k, v in arrays.items() if k.startswith("opt.m.")},
                v={k[len("opt.v."):]: v for k, v in arrays.items() if k.startswith("opt.v.")},
                step=int(header["adam_step"]),
            )
        return model, header, opt_state


def decode_option(
    option: OptionSpec,
    c_omega: Tensor,
    params: OptionPolicyParams,
    mode: str,
    seed: int = 0,
    forced_actions: Optional[Sequence[int]] = None,
) -> tuple[list[int], Tensor, Tensor]:
    """Scan the option's decision units with its GRU policy.

    At each unit the input concatenates the option context, a learned
    unit-index embedding, and the embedding of the previous unit's action;
    the head for the unit's arity turns the hidden state into logits.
    Returns the action sequence and scalar sums of log-probabilities and
    entropies (identical code path for sampling, greedy, and replay, so
    replayed log-probabilities are bit-identical under unchanged parameters).
    """
    if mode not in ("sample", "greedy", "replay"):
        raise ContractError(f"unknown decode mode {mode!r}")
    if mode == "replay":
        if forced_actions is None or len(forced_actions) != len(option.units):
            raise ContractError("replay requires one forced action per unit")
    rng = stream(seed, DECODE_STREAM + option.index) if mode == "sample" else None

    gru_width = params.gru.w_h.data.shape[0]
    embed_width = params.act_table.data.shape[1]
    h = constant(np.zeros(gru_width))
    prev_embed = constant(np.zeros(embed_width))
    logp_total = constant(np.zeros(()))
    entropy_total = constant(np.zeros(()))
    actions: list[int] = []
    for tau, unit in enumerate(option.units):
        unit_embed = reshape(take_rows(params.unit_table, [tau]), (params.unit_table.data.shape[1],))
        x = concat([c_omega, unit_embed, prev_embed], axis=0)
        h = gru_step(params.gru, h, x)
        w, b = params.heads[unit.arity]
        logits = dense(h, w, b)
        logp_row = log_softmax(logits)
        probs = exp(logp_row)
        if mode == "sample":
            cdf = np.cumsum(probs.data)
            action = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
            action = min(action, unit.arity - 1)
        elif mode == "greedy":
            action = int(np.argmax(logits.data))
        else:
            action = int(forced_actions[tau])
            if not 0 <= action < unit.arity:
                raise ContractError(f"forced action {action} outside arity {unit.arity}")
        actions.append(action)
        logp_total = add(logp_total, narrow(logp_row, 0, action, 1).sum())
        entropy_total = add(entropy_total, neg(mul(probs, logp_row)).sum())
        prev_embed = reshape(take_rows(params.act_table, [action]), (embed_width,))
    return actions, logp_total, entropy_total


def execute_joint_allocation(
    hierarchy: OptionHierarchy,
    ctx: MultiAttributeContext,
    model: AllocationModel,
    mode: str,
    seed: int = 0,
) -> tuple[AllocationDecision, EpisodeRecord]:
    """Run the options in hierarchy order and assemble the joint allocation."""
    if model.hierarchy is not hierarchy and model.hierarchy != hierarchy:
        raise ContractError("model was built for a different hierarchy")
    return model.allocate(ctx, mode, seed)


# -- PPO ------------------------------------------------------------------------


@dataclass(frozen=True)
class PpoHyper:
    clip: float = 0.2
    w_v: float = 0.5
    w_e: float = 0.01
    lr: float = 3e-4
    epochs: int = 4
    minibatch: int = 32
    episodes_per_update: int = 64


@dataclass
class PpoMetrics:
    mean_reward: float
    policy_loss: float
    value_loss: float
    entropy: float
    clip_fraction: float
    approx_kl: float


def normalized_rewards(batch: Sequence[EpisodeRecord]) -> np.ndarray:
    rewards = np.array([e.reward for e in batch], dtype=np.float64)
    return (rewards - rewards.mean()) / (rewards.std() + 1e-8)


def surrogate_losses(
    model: AllocationModel,
    episodes: Sequence[EpisodeRecord],
    advantages: Sequence[Sequence[float]],
    value_targets: Sequence[float],
    hyper: PpoHyper,
) -> tuple[Tensor, Tensor, Tensor, dict]:
    """Clipped policy surrogate, value loss, and entropy over a minibatch.

    The policy term is averaged over (episode, option) pairs; entropy is the
    mean per-unit entropy. Ratios of one (first update after sampling) make
    the clipped and unclipped surrogates exactly equal.
    """
    policy_terms = []
    value_terms = []
    entropy_terms = []
    ratios = []
    kls = []
    for episode, advantage, target in zip(episodes, advantages, value_targets):
        for option_eval, adv, old_logp in zip(model.replay(episode), advantage, episode.old_logp):
            delta = sub(option_eval.logp, constant(old_logp))
            ratio = exp(clip(delta, -_RATIO_LOG_CAP, _RATIO_LOG_CAP))
            unclipped = mul(ratio, constant(adv))
            if math.isinf(hyper.clip):
                policy_terms.append(unclipped)
            else:
                clipped = mul(clip(ratio, 1.0 - hyper.clip, 1.0 + hyper.clip), constant(adv))
                policy_terms.append(minimum(unclipped, clipped))
            err = sub(option_eval.value, constant(target))
            value_terms.append(mul(err, err))
            entropy_terms.append(mul(option_eval.entropy, 1.0 / max(option_eval.n_units, 1)))
            r = float(ratio.data)
            ratios.append(r)
            kls.append(r - 1.0 - math.log(max(r, 1e-300)))
    count = 1.0 / len(policy_terms)
    policy_loss = neg(mul(_sum_tensors(policy_terms), count))
    value_loss = mul(_sum_tensors(value_terms), count)
    entropy = mul(_sum_tensors(entropy_terms), count)
    stats = {
        "clip_fraction": float(np.mean([abs(r - 1.0) > hyper.clip for r in ratios]))
        if not math.isinf(hyper.clip)
        else 0.0,
        "approx_kl": float(np.mean(kls)),
    }
    return policy_loss, value_loss, entropy, stats


def _sum_tensors(terms: list[Tensor]) -> Tensor:
    total = terms[0]
    for term in terms[1:]:
        total = add(total, term)
    return total


def ppo_update(
    batch: Sequence[EpisodeRecord],
    model: AllocationModel,
    hyper: PpoHyper,
    opt_state: AdamState,
    seed: int = 0,
) -> PpoMetrics:
    """One PPO update over a batch of completed episodes.

    Rewards are batch-normalized; each option's advantage is the normalized
    reward minus the critic value stored at sampling time, so the same
    one-step reward drives every option of an episode.
    """
    if not batch:
        raise ContractError("ppo_update needs at least one completed episode")
    r_tilde = normalized_rewards(batch)
    advantages = [
        [float(r_tilde[e]) - v for v in episode.old_value] for e, episode in enumerate(batch)
    ]
    order_rng = stream(seed, 0x70706F)  # "ppo"
    last = {"policy": 0.0, "value": 0.0, "entropy": 0.0, "clip": 0.0, "kl": 0.0}
    for _ in range(hyper.epochs):
        perm = order_rng.permutation(len(batch))
        for start in range(0, len(batch), hyper.minibatch):
            idx = perm[start : start + hyper.minibatch]
            episodes = [batch[t] for t in idx]
            advs = [advantages[t] for t in idx]
            targets = [float(r_tilde[t]) for t in idx]
            model.params.zero_grad()
            policy_loss, value_loss, entropy, stats = surrogate_losses(
                model, episodes, advs, targets, hyper
            )
            loss = add(sub(policy_loss, mul(entropy, hyper.w_e)), mul(value_loss, hyper.w_v))
            if not np.isfinite(loss.data):
                raise TrainingError(
                    f"non-finite PPO loss (policy={policy_loss.data!r}, "
                    f"value={value_loss.data!r}, entropy={entropy.data!r})"
                )
            backward(loss)
            adam_update(model.params, opt_state, lr=hyper.lr)
            last = {
                "policy": float(policy_loss.data),
                "value": float(value_loss.data),
                "entropy": float(entropy.data),
                "clip": stats["clip_fraction"],
                "kl": stats["approx_kl"],
            }
    rewards = [e.reward for e in batch]
    return PpoMetrics(
        mean_reward=float(np.mean(rewards)),
        policy_loss=last["policy"],
        value_loss=last["value"],
        entropy=last["entropy"],
        clip_fraction=last["clip"],
        approx_kl=last["kl"],
    )
