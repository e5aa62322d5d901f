"""Allocator construction: the learned hierarchies, ablations, and baselines.

Kinds, selected by their lowercase names on the CLI:

* ``ra`` draws every choice uniformly (model-free reference),
* ``atrl`` is a flat single-option policy over the merged action spaces,
  fed by cross-attribute attention with the prior-action path absent,
* ``hrl2/3/4`` keep the hierarchy but swap the representation for a dense
  encoder on the flattened context matrices (no attention),
* ``athrl2/3/4`` keep attention but drop the prior-action value weights
  and embedding tables,
* ``aehrl2/3/4`` are the full attention-plus-prior-action hierarchies.

All trainable kinds share the PPO trainer, optimizer settings, and seeds.
"""

from __future__ import annotations

from dataclasses import replace
from typing import Optional

from .context import MultiAttributeContext
from .errors import ConfigurationError, ContractError
from .policy import TRAINABLE_KINDS, AllocationModel, EpisodeRecord, ModelConfig
from .rng import stream
from .simulator import AllocationDecision

ALLOCATOR_KINDS = ("ra",) + TRAINABLE_KINDS


def random_allocation(ctx: MultiAttributeContext, seed: int = 0) -> AllocationDecision:
    """Uniform independent choices for every POI slot; pure in the seed.

    Draw order per POI: robot, navigation control, capture control,
    classification assignee.
    """
    rng = stream(seed, 0x7261)  # "ra"
    k, i = ctx.k, ctx.i
    robots = []
    nav = []
    capture = []
    classify = []
    for _ in range(ctx.j):
        robots.append(int(rng.integers(0, i)))
        nav.append(_control(int(rng.integers(0, k + 1))))
        capture.append(_control(int(rng.integers(0, k + 1))))
        classify.append(_control(int(rng.integers(0, k + 1))))
    return AllocationDecision(tuple(robots), tuple(nav), tuple(capture), tuple(classify))


def _control(value: int) -> Optional[int]:
    return None if value == 0 else value - 1


class RandomAllocator:
    """The RA baseline behind the same allocate() surface as trained models."""

    kind = "ra"
    trainable = False

    def __init__(self, k: int, i: int, j: int):
        self.k, self.i, self.j = k, i, j

    def allocate(self, ctx: MultiAttributeContext, mode: str = "sample", seed: int = 0):
        decision = random_allocation(ctx, seed)
        return decision, None


class PolicyAllocator:
    """A trainable allocator wrapping an :class:`AllocationModel`."""

    trainable = True

    def __init__(self, model: AllocationModel):
        self.model = model
        self.kind = model.config.kind

    def allocate(
        self, ctx: MultiAttributeContext, mode: str = "greedy", seed: int = 0
    ) -> tuple[AllocationDecision, EpisodeRecord]:
        return self.model.allocate(ctx, mode, seed)


def build_allocator(
    kind: str,
    k: int,
    i: int,
    j: int,
    config: Optional[ModelConfig] = None,
    verify_ordering: bool = False,
):
    """Construct an allocator of the given kind for a (k, i, j) setting.

    ``config`` overrides network dimensions; its kind/setting fields are
    replaced to match. ``verify_ordering`` additionally builds the sibling
    ablations and asserts the parameter-count ordering hrl < athrl < aehrl.
    """
    kind = kind.lower()
    if kind == "ra":
        return RandomAllocator(k, i, j)
    if kind not in TRAINABLE_KINDS:
        raise ConfigurationError(f"unknown allocator kind {kind!r}")
    base = config if config is not None else ModelConfig(kind=kind, k=k, i=i, j=j)
    model = AllocationModel(replace(base, kind=kind, k=k, i=i, j=j))
    if verify_ordering and kind[-1].isdigit():
        n = kind[-1]
        counts = {}
        for prefix in ("hrl", "athrl", "aehrl"):
            sibling = f"{prefix}{n}"
            if sibling == kind:
                counts[prefix] = model.params.total_count()
            else:
                counts[prefix] = AllocationModel(
                    replace(base, kind=sibling, k=k, i=i, j=j)
                ).params.total_count()
        if not counts["hrl"] < counts["athrl"] < counts["aehrl"]:
            raise ContractError(f"parameter-count ordering violated: {counts}")
    return PolicyAllocator(model)
