"""Multi-attribute context: team and task attributes, sampling, and encoding.

A context bundles the heterogeneity of a surveillance team (human cognitive
and skill angles, robot platforms) with the mission's task list (POI
positions, hazard difficulty, ground truth). Contexts are sampled from a
:class:`ScenarioSpec` and numerically encoded into three per-attribute
matrices for the learned allocators.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum, IntEnum

import numpy as np

from .errors import ConfigurationError, DomainError
from .rng import CONTEXT_STREAM, stream

AREA_SIDE = 2000.0  # meters; the surveillance square is AREA_SIDE x AREA_SIDE
MAX_ANGLE = math.pi / 4

# Feature widths of the encoded attribute matrices.
HUMAN_FEATURES = 2
ROBOT_FEATURES = 4
TASK_FEATURES = 4

_MAX_SPEED = 22.0  # fastest Table-I cell, used to normalize robot speed
_MAX_T_BAR = 245.0  # slowest Table-II cell, used to normalize expected effort


class Tier(IntEnum):
    LOW = 0
    MEDIUM = 1
    HIGH = 2


class RobotKind(Enum):
    UAV = "uav"
    UGV = "ugv"


class ImageQuality(IntEnum):
    LOW = 0
    MEDIUM = 1
    UPPER_MEDIUM = 2
    HIGH = 3


class Difficulty(IntEnum):
    EASY = 0
    MEDIUM = 1
    HARD = 2


def tier_of(angle: float) -> Tier:
    """Tier of a capability angle: low (0, pi/12), medium [pi/12, pi/6], high (pi/6, pi/4).

    Both boundary angles belong to the medium tier (closed interval).
    """
    if not 0.0 < angle < MAX_ANGLE:
        raise DomainError(f"capability angle {angle!r} outside (0, pi/4)")
    if angle < math.pi / 12:
        return Tier.LOW
    if angle <= math.pi / 6:
        return Tier.MEDIUM
    return Tier.HIGH


@dataclass(frozen=True)
class HumanProfile:
    """One operator: cognitive and operational-skill angles plus their tiers."""

    cognitive_angle: float
    skill_angle: float
    tier_c: Tier
    tier_s: Tier

    @classmethod
    def from_angles(cls, cognitive_angle: float, skill_angle: float) -> "HumanProfile":
        return cls(
            cognitive_angle=cognitive_angle,
            skill_angle=skill_angle,
            tier_c=tier_of(cognitive_angle),
            tier_s=tier_of(skill_angle),
        )

    def validate(self) -> None:
        if tier_of(self.cognitive_angle) is not self.tier_c:
            raise ConfigurationError("tier_c inconsistent with cognitive_angle")
        if tier_of(self.skill_angle) is not self.tier_s:
            raise ConfigurationError("tier_s inconsistent with skill_angle")


@dataclass(frozen=True)
class RobotProfile:
    """One robot platform with its autonomous-mode speed and camera quality."""

    kind: RobotKind
    base_speed: float
    base_quality: ImageQuality

    @classmethod
    def standard(cls, kind: RobotKind) -> "RobotProfile":
        if kind is RobotKind.UAV:
            return cls(kind, base_speed=15.0, base_quality=ImageQuality.MEDIUM)
        return cls(kind, base_speed=6.0, base_quality=ImageQuality.UPPER_MEDIUM)


@dataclass(frozen=True)
class TaskSpec:
    """One point of interest: location, hazard difficulty, and ground truth."""

    position: tuple[float, float]
    difficulty: Difficulty
    is_hazard: bool

    def validate(self) -> None:
        x, y = self.position
        if not (0.0 <= x <= AREA_SIDE and 0.0 <= y <= AREA_SIDE):
            raise ConfigurationError(f"POI position {self.position} outside the surveillance square")


@dataclass(frozen=True)
class MultiAttributeContext:
    """A sampled team/mission instance: k humans, i robots, j tasks."""

    humans: tuple[HumanProfile, ...]
    robots: tuple[RobotProfile, ...]
    tasks: tuple[TaskSpec, ...]

    @property
    def k(self) -> int:
        return len(self.humans)

    @property
    def i(self) -> int:
        return len(self.robots)

    @property
    def j(self) -> int:
        return len(self.tasks)

    def validate(self) -> None:
        if self.k < 1 or self.i < 1:
            raise ConfigurationError("a context needs at least one human and one robot")
        for h in self.humans:
            h.validate()
        for t in self.tasks:
            t.validate()


@dataclass(frozen=True)
class ContextMatrices:
    """Normalized per-attribute feature matrices; every entry lies in [0, 1]."""

    c_hf: np.ndarray  # (k, 2)
    c_rc: np.ndarray  # (i, 4)
    c_ts: np.ndarray  # (j, 4)


@dataclass(frozen=True)
class ScenarioSpec:
    """Parameters of the scenario distribution an opponent samples contexts from."""

    k: int
    i: int
    j: int
    uav_count: int
    area_side: float = AREA_SIDE
    difficulty_weights: tuple[float, float, float] = (1 / 3, 1 / 3, 1 / 3)
    hazard_ratio: float = 0.5
    seed: int = 0

    def validate(self) -> None:
        if self.k < 1 or self.i < 1 or self.j < 0:
            raise ConfigurationError("counts must satisfy k >= 1, i >= 1, j >= 0")
        if not 0 <= self.uav_count <= self.i:
            raise ConfigurationError("uav_count must lie in [0, i]")
        if not 0.0 < self.area_side <= AREA_SIDE:
            raise ConfigurationError(f"area_side must lie in (0, {AREA_SIDE}]")
        w = self.difficulty_weights
        if len(w) != 3 or any(x < 0 for x in w) or abs(sum(w) - 1.0) > 1e-9:
            raise ConfigurationError("difficulty_weights must be 3 probabilities summing to 1")
        if not 0.0 <= self.hazard_ratio <= 1.0:
            raise ConfigurationError("hazard_ratio must be a probability")


# Tier angle intervals, indexed by Tier. Endpoints of the medium tier are
# closed; uniform sampling hits endpoints with probability zero either way.
_TIER_BOUNDS = {
    Tier.LOW: (0.0, math.pi / 12),
    Tier.MEDIUM: (math.pi / 12, math.pi / 6),
    Tier.HIGH: (math.pi / 6, math.pi / 4),
}


def _sample_angle(rng: np.random.Generator) -> float:
    tier = Tier(int(rng.integers(0, 3)))
    lo, hi = _TIER_BOUNDS[tier]
    return float(rng.uniform(lo, hi))


def sample_context(spec: ScenarioSpec) -> MultiAttributeContext:
    """Sample a context from the scenario distribution; pure in ``spec``.

    Draw order is fixed (per human: cognitive then skill angle; per task:
    x, y, difficulty, hazard) so equal specs give bit-identical contexts.
    """
    spec.validate()
    rng = stream(spec.seed, CONTEXT_STREAM)

    humans = tuple(
        HumanProfile.from_angles(_sample_angle(rng), _sample_angle(rng)) for _ in range(spec.k)
    )
    robots = tuple(
        RobotProfile.standard(RobotKind.UAV if r < spec.uav_count else RobotKind.UGV)
        for r in range(spec.i)
    )
    tasks = []
    for _ in range(spec.j):
        x = float(rng.uniform(0.0, spec.area_side))
        y = float(rng.uniform(0.0, spec.area_side))
        difficulty = Difficulty(int(rng.choice(3, p=np.asarray(spec.difficulty_weights))))
        is_hazard = bool(rng.random() < spec.hazard_ratio)
        tasks.append(TaskSpec((x, y), difficulty, is_hazard))
    return MultiAttributeContext(humans, robots, tuple(tasks))


def encode_context(ctx: MultiAttributeContext) -> ContextMatrices:
    """Encode a context into the three normalized uni-attribute matrices.

    Rows are ``[h_c, h_s] / (pi/4)`` for humans, ``[is_uav, is_ugv,
    speed/22, quality/3]`` for robots, and ``[x, y] / 2000`` plus
    ``difficulty/2`` and the medium-quality expected effort ``t_bar/245``
    for tasks.
    """
    from .simulator import lookup_t_bar  # local import: simulator owns the effort table

    c_hf = np.array(
        [[h.cognitive_angle / MAX_ANGLE, h.skill_angle / MAX_ANGLE] for h in ctx.humans],
        dtype=np.float64,
    ).reshape(ctx.k, HUMAN_FEATURES)
    c_rc = np.array(
        [
            [
                1.0 if r.kind is RobotKind.UAV else 0.0,
                1.0 if r.kind is RobotKind.UGV else 0.0,
                r.base_speed / _MAX_SPEED,
                int(r.base_quality) / 3.0,
            ]
            for r in ctx.robots
        ],
        dtype=np.float64,
    ).reshape(ctx.i, ROBOT_FEATURES)
    c_ts = np.array(
        [
            [
                t.position[0] / AREA_SIDE,
                t.position[1] / AREA_SIDE,
                int(t.difficulty) / 2.0,
                lookup_t_bar(ImageQuality.MEDIUM, t.difficulty) / _MAX_T_BAR,
            ]
            for t in ctx.tasks
        ],
        dtype=np.float64,
    ).reshape(ctx.j, TASK_FEATURES)
    return ContextMatrices(c_hf, c_rc, c_ts)


# -- persistence ------------------------------------------------------------

_SPEC_KEYS = ("k", "i", "j", "uav_count", "area_side", "difficulty_weights", "hazard_ratio", "seed")


def format_scenario_spec(spec: ScenarioSpec) -> str:
    """Flat key-value text form of a ScenarioSpec."""
    weights = ",".join(repr(float(w)) for w in spec.difficulty_weights)
    lines = [
        f"k = {spec.k}",
        f"i = {spec.i}",
        f"j = {spec.j}",
        f"uav_count = {spec.uav_count}",
        f"area_side = {spec.area_side!r}",
        f"difficulty_weights = {weights}",
        f"hazard_ratio = {spec.hazard_ratio!r}",
        f"seed = {spec.seed}",
    ]
    return "\n".join(lines) + "\n"


def parse_scenario_spec(text: str) -> ScenarioSpec:
    values: dict[str, str] = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigurationError(f"malformed scenario line: {line!r}")
        key, _, raw = line.partition("=")
        values[key.strip()] = raw.strip()
    missing = [key for key in _SPEC_KEYS if key not in values]
    if missing:
        raise ConfigurationError(f"scenario spec missing keys: {missing}")
    unknown = sorted(set(values) - set(_SPEC_KEYS))
    if unknown:
        raise ConfigurationError(f"scenario spec has unknown keys: {unknown}")
    try:
        weights = tuple(float(part) for part in values["difficulty_weights"].split(","))
        spec = ScenarioSpec(
            k=int(values["k"]),
            i=int(values["i"]),
            j=int(values["j"]),
            uav_count=int(values["uav_count"]),
            area_side=float(values["area_side"]),
            difficulty_weights=weights,  # type: ignore[arg-type]
            hazard_ratio=float(values["hazard_ratio"]),
            seed=int(values["seed"]),
        )
    except ValueError as exc:
        raise ConfigurationError(f"malformed scenario value: {exc}") from exc
    spec.validate()
    return spec


def context_to_text(ctx: MultiAttributeContext) -> str:
    """JSON form of a context; float fields round-trip exactly."""
    doc = {
        "humans": [
            {
                "cognitive_angle": h.cognitive_angle,
                "skill_angle": h.skill_angle,
                "tier_c": h.tier_c.name.lower(),
                "tier_s": h.tier_s.name.lower(),
            }
            for h in ctx.humans
        ],
        "robots": [
            {
                "kind": r.kind.value,
                "base_speed": r.base_speed,
                "base_quality": int(r.base_quality),
            }
            for r in ctx.robots
        ],
        "tasks": [
            {
                "x": t.position[0],
                "y": t.position[1],
                "difficulty": int(t.difficulty),
                "is_hazard": t.is_hazard,
            }
            for t in ctx.tasks
        ],
    }
    return json.dumps(doc, indent=1)


def context_from_text(text: str) -> MultiAttributeContext:
    doc = json.loads(text)
    humans = tuple(
        HumanProfile(
            cognitive_angle=h["cognitive_angle"],
            skill_angle=h["skill_angle"],
            tier_c=Tier[h["tier_c"].upper()],
            tier_s=Tier[h["tier_s"].upper()],
        )
        for h in doc["humans"]
    )
    robots = tuple(
        RobotProfile(
            kind=RobotKind(r["kind"]),
            base_speed=r["base_speed"],
            base_quality=ImageQuality(r["base_quality"]),
        )
        for r in doc["robots"]
    )
    tasks = tuple(
        TaskSpec((t["x"], t["y"]), Difficulty(t["difficulty"]), bool(t["is_hazard"]))
        for t in doc["tasks"]
    )
    ctx = MultiAttributeContext(humans, robots, tasks)
    ctx.validate()
    return ctx
