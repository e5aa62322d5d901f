"""A 2-armed bandit on a fixed context, for exercising the PPO trainer.

The model exposes the same replay surface as the hierarchical allocator
(one option, one decision unit of arity 2), so ``ppo_update`` drives it
unchanged. The analytic optimum is an expected reward of +1 (always pull
arm 0).
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Optional

import numpy as np

from . import checkpoint as ckpt
from .numeric import GruParams, ParamSet, Tensor, constant, dense, glorot_uniform, leaky_relu, narrow
from .policy import Duty, EpisodeRecord, OptionEval, OptionPolicyParams, OptionSpec, UnitSpec, decode_option
from .rng import INIT_STREAM, stream

CONTEXT_WIDTH = 8
_FIXED_CONTEXT = np.linspace(0.1, 0.8, CONTEXT_WIDTH)


class BanditModel:
    """Single option, single unit, two arms, constant context."""

    def __init__(self, init_seed: int = 0, gru_width: int = 16, embed: int = 4):
        rng = stream(init_seed, INIT_STREAM)
        self.params = ParamSet()
        ps = self.params
        in_width = CONTEXT_WIDTH + 2 * embed
        self.option = OptionSpec(0, "pull", (UnitSpec(0, (Duty.CLASSIFY,), 2),))
        self.policy = OptionPolicyParams(
            gru=GruParams(
                w_x=ps.add("pol.opt0.gru.w_x", glorot_uniform(rng, (in_width, 3 * gru_width), in_width, 3 * gru_width)),
                w_h=ps.add("pol.opt0.gru.w_h", glorot_uniform(rng, (gru_width, 3 * gru_width), gru_width, 3 * gru_width)),
                b=ps.add("pol.opt0.gru.b", np.zeros(3 * gru_width)),
            ),
            unit_table=ps.add("pol.opt0.unit_table", glorot_uniform(rng, (1, embed), 1, embed)),
            act_table=ps.add("pol.opt0.act_table", glorot_uniform(rng, (2, embed), 2, embed)),
            heads={2: (
                ps.add("pol.opt0.head_a2.w", glorot_uniform(rng, (gru_width, 2), gru_width, 2)),
                ps.add("pol.opt0.head_a2.b", np.zeros(2)),
            )},
        )
        self.value_params = (
            ps.add("value.w1", glorot_uniform(rng, (CONTEXT_WIDTH, gru_width), CONTEXT_WIDTH, gru_width)),
            ps.add("value.b1", np.zeros(gru_width)),
            ps.add("value.w2", glorot_uniform(rng, (gru_width, 1), gru_width, 1)),
            ps.add("value.b2", np.zeros(1)),
        )

    def _roll(self, mode: str, seed: int = 0, forced: Optional[list[int]] = None) -> OptionEval:
        c = constant(_FIXED_CONTEXT)
        actions, logp, entropy = decode_option(self.option, c, self.policy, mode, seed, forced)
        w1, b1, w2, b2 = self.value_params
        value = narrow(dense(leaky_relu(dense(c, w1, b1)), w2, b2), 0, 0, 1).sum()
        return OptionEval(actions, logp, entropy, value, 1, _FIXED_CONTEXT.copy())

    def sample_episode(self, seed: int = 0) -> EpisodeRecord:
        roll = self._roll("sample", seed)
        return EpisodeRecord(
            ctx=None,
            actions=[roll.actions],
            old_logp=[float(roll.logp.data)],
            old_value=[float(roll.value.data)],
            c_omegas=[roll.c_omega],
        )

    def replay(self, episode: EpisodeRecord) -> list[OptionEval]:
        return [self._roll("replay", forced=episode.actions[0])]

    def greedy_action_prob(self) -> tuple[int, float]:
        """The argmax arm and its probability under the current policy."""
        roll = self._roll("greedy")
        import math

        prob = math.exp(float(roll.logp.data))
        return roll.actions[0], prob

    def save(self, path: str | Path, extra_header: Optional[dict] = None) -> None:
        header = {"config": {"kind": "bandit"}}
        if extra_header:
            header.update(extra_header)
        ckpt.save_arrays(path, self.params.state_arrays(), json.dumps(header, sort_keys=True).encode("utf-8"))
