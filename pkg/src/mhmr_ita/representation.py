"""Option-specific context representations.

Each attribute matrix (humans, robots, tasks) is lifted to a shared feature
width by a dense layer and an LSTM scan over the entity axis, keeping one
hidden-state row per entity. A cross-attribute attention encoder then
refines each attribute against the fused set of all three, optionally
steered by an embedding of the previous option's action sequence injected
into the attention Value. Mean-pooling the three refined matrices and
concatenating the means yields the option's context vector.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .context import ContextMatrices
from .errors import ContractError
from .numeric import (
    LstmParams,
    ParamSet,
    Tensor,
    add,
    concat,
    constant,
    dense,
    glorot_uniform,
    layer_norm,
    leaky_relu,
    matmul,
    mean_axis,
    mul,
    narrow,
    repeat_rows,
    reshape,
    softmax,
    take_rows,
    transpose,
)

TARGETS = ("hf", "rc", "ts")


@dataclass
class UniAttributeReps:
    """Per-attribute entity representations sharing one feature width."""

    x_hf: Tensor  # (k, d)
    x_rc: Tensor  # (i, d)
    x_ts: Tensor  # (j, d)

    @property
    def width(self) -> int:
        return self.x_hf.data.shape[1]

    def fused(self) -> Tensor:
        return concat([self.x_hf, self.x_rc, self.x_ts], axis=0)

    def target(self, name: str) -> Tensor:
        return {"hf": self.x_hf, "rc": self.x_rc, "ts": self.x_ts}[name]


@dataclass
class PriorActionEmbedding:
    """Pooled embedding of the upper option's actions, broadcast over rows."""

    a_pre: Tensor  # (f, d)
    is_null: bool


@dataclass
class AttributeEmbedParams:
    w: Tensor
    b: Tensor
    lstm: LstmParams


@dataclass
class EmbedParams:
    hf: AttributeEmbedParams
    rc: AttributeEmbedParams
    ts: AttributeEmbedParams
    width: int


def build_embed_params(
    ps: ParamSet, rng: np.random.Generator, feature_widths: dict[str, int], d: int
) -> EmbedParams:
    attrs = {}
    for name in TARGETS:
        feat = feature_widths[name]
        w = ps.add(f"embed.{name}.dense.w", glorot_uniform(rng, (feat, d), feat, d))
        b = ps.add(f"embed.{name}.dense.b", np.zeros(d))
        w_x = ps.add(f"embed.{name}.lstm.w_x", glorot_uniform(rng, (d, 4 * d), d, 4 * d))
        w_h = ps.add(f"embed.{name}.lstm.w_h", glorot_uniform(rng, (d, 4 * d), d, 4 * d))
        bias = np.zeros(4 * d)
        bias[d : 2 * d] = 1.0  # forget-gate bias opens the memory path at init
        lstm_b = ps.add(f"embed.{name}.lstm.b", bias)
        attrs[name] = AttributeEmbedParams(w, b, LstmParams(w_x, w_h, lstm_b))
    return EmbedParams(attrs["hf"], attrs["rc"], attrs["ts"], d)


def _embed_one(matrix: np.ndarray, p: AttributeEmbedParams, d: int) -> Tensor:
    from .numeric import lstm_step

    n = matrix.shape[0]
    if n == 0:
        return constant(np.zeros((0, d)))
    h = constant(np.zeros(d))
    c = constant(np.zeros(d))
    rows = []
    for t in range(n):
        x = leaky_relu(dense(constant(matrix[t]), p.w, p.b))
        h, c = lstm_step(p.lstm, h, c, x)
        rows.append(reshape(h, (1, d)))
    return concat(rows, axis=0)


def recurrent_embed(matrices: ContextMatrices, params: EmbedParams) -> UniAttributeReps:
    """Dense + LSTM scan per attribute; one hidden-state row per entity."""
    d = params.width
    return UniAttributeReps(
        x_hf=_embed_one(matrices.c_hf, params.hf, d),
        x_rc=_embed_one(matrices.c_rc, params.rc, d),
        x_ts=_embed_one(matrices.c_ts, params.ts, d),
    )


def embed_prior_actions(actions: Sequence[int], table: Tensor, f: int) -> PriorActionEmbedding:
    """Mean-pool learned vectors of the previous option's action ids.

    The pooled vector is broadcast to all ``f`` fused rows; with no prior
    option the embedding is the null (zero) matrix.
    """
    d = table.data.shape[1]
    if actions is None or len(actions) == 0:
        return PriorActionEmbedding(constant(np.zeros((f, d))), is_null=True)
    rows = take_rows(table, list(actions))
    pooled = reshape(mean_axis(rows, 0), (1, d))
    return PriorActionEmbedding(repeat_rows(pooled, f), is_null=False)


@dataclass
class HcaHeadParams:
    w_q: Tensor
    w_k: Tensor
    w_vf: Tensor
    w_ve: Optional[Tensor]


@dataclass
class HcaParams:
    heads: list[HcaHeadParams]
    ff_w1: Tensor
    ff_b1: Tensor
    ff_w2: Tensor
    ff_b2: Tensor
    ln_gain: Tensor
    ln_shift: Tensor
    width: int
    use_prior: bool


def build_hca_params(
    ps: ParamSet,
    rng: np.random.Generator,
    prefix: str,
    d: int,
    heads: int,
    use_prior: bool,
    ff_mult: int = 4,
) -> HcaParams:
    if d % heads != 0:
        raise ContractError(f"feature width {d} not divisible by head count {heads}")
    per = d // heads  # query/key width equals value width equals d / heads
    head_params = []
    for a in range(heads):
        base = f"{prefix}.h{a}"
        head_params.append(
            HcaHeadParams(
                w_q=ps.add(f"{base}.w_q", glorot_uniform(rng, (d, per), d, per)),
                w_k=ps.add(f"{base}.w_k", glorot_uniform(rng, (d, per), d, per)),
                w_vf=ps.add(f"{base}.w_vf", glorot_uniform(rng, (d, per), d, per)),
                w_ve=(
                    ps.add(f"{base}.w_ve", glorot_uniform(rng, (d, per), d, per))
                    if use_prior
                    else None
                ),
            )
        )
    cat_width = heads * per * (2 if use_prior else 1)
    hidden = ff_mult * d
    return HcaParams(
        heads=head_params,
        ff_w1=ps.add(f"{prefix}.ff.w1", glorot_uniform(rng, (cat_width, hidden), cat_width, hidden)),
        ff_b1=ps.add(f"{prefix}.ff.b1", np.zeros(hidden)),
        ff_w2=ps.add(f"{prefix}.ff.w2", glorot_uniform(rng, (hidden, d), hidden, d)),
        ff_b2=ps.add(f"{prefix}.ff.b2", np.zeros(d)),
        ln_gain=ps.add(f"{prefix}.ln.gain", np.ones(d)),
        ln_shift=ps.add(f"{prefix}.ln.shift", np.zeros(d)),
        width=d,
        use_prior=use_prior,
    )


def hca_encode(
    target: Tensor,
    fused: Tensor,
    a_pre: Optional[Tensor],
    params: HcaParams,
) -> tuple[Tensor, list[Tensor]]:
    """Refine ``target`` rows against the fused attribute set.

    Per head: Query from the target, Key from the fused rows, and a Value
    that concatenates a fused-row projection with a prior-action projection
    (when the encoder carries prior-action weights). Heads are concatenated,
    fed forward back to the feature width, residually added to the target,
    and layer normalized. Returns the refined matrix and per-head attention
    weights.
    """
    if params.use_prior:
        if a_pre is None:
            raise ContractError("this encoder expects a prior-action embedding (may be null/zero)")
        if a_pre.data.shape != fused.data.shape:
            raise ContractError(
                f"a_pre shape {a_pre.data.shape} must match fused shape {fused.data.shape}"
            )
    import math

    head_outs = []
    weights = []
    for head in params.heads:
        q = matmul(target, head.w_q)
        key = matmul(fused, head.w_k)
        v = matmul(fused, head.w_vf)
        if params.use_prior:
            v = concat([v, matmul(a_pre, head.w_ve)], axis=1)
        scale = 1.0 / math.sqrt(q.data.shape[1])
        attn = softmax(mul(matmul(q, transpose(key)), scale))
        head_outs.append(matmul(attn, v))
        weights.append(attn)
    cat = concat(head_outs, axis=1)
    ff = dense(leaky_relu(dense(cat, params.ff_w1, params.ff_b1)), params.ff_w2, params.ff_b2)
    refined = layer_norm(add(ff, target), params.ln_gain, params.ln_shift)
    return refined, weights


@dataclass
class OptionContext:
    """Pooled option-specific context plus the refined matrices behind it."""

    c_omega: Tensor  # (3d,)
    c_hf: Tensor
    c_rc: Tensor
    c_ts: Tensor
    attention: dict[str, list[Tensor]]


def option_context(
    reps: UniAttributeReps,
    a_pre: Optional[Tensor],
    encoders: dict[str, HcaParams],
) -> OptionContext:
    """Run all three target encoders and pool each over its entity axis.

    With no tasks the task mean is the zero vector (there is nothing to
    pool); the context width stays fixed at three times the feature width.
    """
    d = reps.width
    fused = reps.fused()
    refined = {}
    attention = {}
    pooled = []
    for name in TARGETS:
        out, weights = hca_encode(reps.target(name), fused, a_pre, encoders[name])
        refined[name] = out
        attention[name] = weights
        if out.data.shape[0] == 0:
            pooled.append(constant(np.zeros(d)))
        else:
            pooled.append(mean_axis(out, 0))
    return OptionContext(
        c_omega=concat(pooled, axis=0),
        c_hf=refined["hf"],
        c_rc=refined["rc"],
        c_ts=refined["ts"],
        attention=attention,
    )


@dataclass(frozen=True)
class AttentionExport:
    """Per-option human-factor matrix and head-averaged attention weights."""

    option_index: int
    target: str
    matrix: np.ndarray  # (k, d)
    weights: np.ndarray  # (k, f), averaged over heads


def head_average(weights: list[Tensor]) -> np.ndarray:
    return np.mean([w.data for w in weights], axis=0)
