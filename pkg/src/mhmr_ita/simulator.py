"""Mission simulator: robot kinematics, human event handlers, and scoring.

A mission executes an allocation decision over a sampled context. Robots
leave the origin, visit their assigned POIs in order, dwell 10 s to capture
an image, and either classify onboard or stream the image to an operator.
Operators are single-server FIFO queues; co-controlled navigation/capture
phases occupy the operator for the phase duration, and remote classification
occupies them for the effort time of the task. Correct classifications earn
15/25/35 points by difficulty; incorrect ones deduct the same.

Two scoring modes exist: ``stochastic`` draws per-POI Bernoulli outcomes
(draw for POI ``p`` is the ``p``-th double of the Philox stream keyed by
``(seed, mission_id)``), ``expected`` scores each POI at ``(2P - 1) * points``
so a decision has a deterministic value.
"""

from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

from .context import (
    Difficulty,
    HumanProfile,
    ImageQuality,
    MultiAttributeContext,
    RobotKind,
    RobotProfile,
    Tier,
)
from .errors import ContractError, DomainError
from .rng import stream

CAPTURE_DWELL = 10.0  # seconds a robot holds position while imaging
UTILIZATION_WINDOW = 300.0  # trailing window for operator utilization, seconds

POINTS = {Difficulty.EASY: 15.0, Difficulty.MEDIUM: 25.0, Difficulty.HARD: 35.0}

# Robot speed (m/s) per control column: operator skill LOW / autonomous and
# skill MEDIUM / skill HIGH.
_SPEED = {
    RobotKind.UAV: {Tier.LOW: 10.0, Tier.MEDIUM: 15.0, Tier.HIGH: 22.0},
    RobotKind.UGV: {Tier.LOW: 4.0, Tier.MEDIUM: 6.0, Tier.HIGH: 9.0},
}
# Captured-image quality per the same columns.
_QUALITY = {
    RobotKind.UAV: {
        Tier.LOW: ImageQuality.LOW,
        Tier.MEDIUM: ImageQuality.MEDIUM,
        Tier.HIGH: ImageQuality.UPPER_MEDIUM,
    },
    RobotKind.UGV: {
        Tier.LOW: ImageQuality.MEDIUM,
        Tier.MEDIUM: ImageQuality.UPPER_MEDIUM,
        Tier.HIGH: ImageQuality.HIGH,
    },
}

# (minimum effort seconds, onboard success probability) per image quality and
# hazard difficulty.
_EFFORT_AND_ONBOARD = {
    (ImageQuality.LOW, Difficulty.EASY): (45.0, 0.5),
    (ImageQuality.LOW, Difficulty.MEDIUM): (125.0, 0.3),
    (ImageQuality.LOW, Difficulty.HARD): (245.0, 0.1),
    (ImageQuality.MEDIUM, Difficulty.EASY): (35.0, 0.6),
    (ImageQuality.MEDIUM, Difficulty.MEDIUM): (95.0, 0.4),
    (ImageQuality.MEDIUM, Difficulty.HARD): (195.0, 0.2),
    (ImageQuality.UPPER_MEDIUM, Difficulty.EASY): (25.0, 0.7),
    (ImageQuality.UPPER_MEDIUM, Difficulty.MEDIUM): (65.0, 0.5),
    (ImageQuality.UPPER_MEDIUM, Difficulty.HARD): (145.0, 0.3),
    (ImageQuality.HIGH, Difficulty.EASY): (15.0, 0.8),
    (ImageQuality.HIGH, Difficulty.MEDIUM): (35.0, 0.6),
    (ImageQuality.HIGH, Difficulty.HARD): (95.0, 0.4),
}


def lookup_t_bar(quality: ImageQuality, difficulty: Difficulty) -> float:
    """Minimum effort (seconds) to classify a hazard from an image."""
    return _EFFORT_AND_ONBOARD[(quality, difficulty)][0]


def robot_classification_prob(quality: ImageQuality, difficulty: Difficulty) -> float:
    """Onboard detector success probability for a quality/difficulty cell."""
    return _EFFORT_AND_ONBOARD[(quality, difficulty)][1]


# -- human performance model -------------------------------------------------


def fatigue_factor(t_hat: float) -> float:
    """Fatigue influence after ``t_hat`` hours on duty.

    1 below one hour, then a linear decline to 0.1 at four hours; held at
    0.1 beyond four hours (missions may outlast the modeled domain).
    """
    if t_hat < 0:
        raise DomainError(f"working duration {t_hat!r} h is negative")
    if t_hat < 1.0:
        return 1.0
    if t_hat <= 4.0:
        return -0.3 * t_hat + 1.3
    return 0.1


def workload_factor(u: float) -> float:
    """Workload (utilization) influence; inverted-U in the busy fraction ``u``.

    The two parabolic branches meet the flat middle branch only
    approximately; the polynomial slightly exceeds 1 just above u = 0.65.
    Values are reproduced exactly as modeled, without clamping.
    """
    if not 0.0 <= u <= 1.0:
        raise DomainError(f"utilization {u!r} outside [0, 1]")
    if u < 0.45:
        return -2.47 * u * u + 2.22 * u + 0.5
    if u < 0.65:
        return 1.0
    return -4.08 * u * u + 5.31 * u - 0.724


def difficulty_factor(t_bar: float) -> float:
    """Task-complexity influence: a falling sigmoid in the effort time."""
    if t_bar <= 0:
        raise DomainError(f"effort time {t_bar!r} s must be positive")
    return 1.0 / (1.0 + math.exp(0.04 * (t_bar - 180.0)))


def human_classification_prob(
    human: HumanProfile, t_hat: float, u: float, t_bar: float
) -> float:
    """Probability an operator classifies a hazard correctly.

    ``0.5 + sin(h_c) * E_f * E_w * sin(h_s) * E_d``: a random-guessing floor
    plus a capability term moderated by fatigue, workload, and task
    complexity.
    """
    return 0.5 + (
        math.sin(human.cognitive_angle)
        * fatigue_factor(t_hat)
        * workload_factor(u)
        * math.sin(human.skill_angle)
        * difficulty_factor(t_bar)
    )


def effective_speed_and_quality(
    robot: RobotProfile,
    control: Optional[int],
    operator_skill: Optional[Tier] = None,
) -> tuple[float, ImageQuality]:
    """Speed and image quality for a control mode.

    ``control`` is ``None`` for full autonomy or an operator index for
    co-control; co-control shifts both columns by the operator's skill tier.
    """
    column = Tier.MEDIUM if control is None else operator_skill
    if column is None:
        raise ContractError("co-control requires the operator's skill tier")
    return _SPEED[robot.kind][column], _QUALITY[robot.kind][column]


# -- allocation decisions -----------------------------------------------------


@dataclass(frozen=True)
class AllocationDecision:
    """The joint initial assignment: per-POI robot, control modes, classifier.

    Control and classifier entries use ``None`` for full autonomy / onboard
    classification and an operator index otherwise.
    """

    poi_to_robot: tuple[int, ...]
    nav_control: tuple[Optional[int], ...]
    capture_control: tuple[Optional[int], ...]
    classify: tuple[Optional[int], ...]

    def validate(self, ctx: MultiAttributeContext) -> None:
        j, i, k = ctx.j, ctx.i, ctx.k
        for name, entries in (
            ("poi_to_robot", self.poi_to_robot),
            ("nav_control", self.nav_control),
            ("capture_control", self.capture_control),
            ("classify", self.classify),
        ):
            if len(entries) != j:
                raise ContractError(f"{name} must have exactly one entry per POI ({j})")
        if any(not 0 <= r < i for r in self.poi_to_robot):
            raise ContractError("poi_to_robot contains an invalid robot index")
        for entries in (self.nav_control, self.capture_control, self.classify):
            if any(h is not None and not 0 <= h < k for h in entries):
                raise ContractError("an operator index is out of range")


@dataclass(frozen=True)
class PoiRecord:
    poi: int
    difficulty: Difficulty
    classifier: str  # "onboard" or "human:<index>"
    quality: ImageQuality
    p_success: float
    correct: Optional[bool]  # None in expected mode
    points: float
    t_complete: float


@dataclass(frozen=True)
class MissionOutcome:
    records: tuple[PoiRecord, ...]
    total_score: float
    mean_poi_score: float
    mission_duration: float


def mission_reward(outcome: MissionOutcome) -> float:
    """The one-step reward: the mission's total classification score."""
    return outcome.total_score


# -- event-driven execution ---------------------------------------------------


@dataclass
class _Job:
    kind: str  # "nav" | "capture" | "classify"
    robot: int = -1
    poi: int = -1
    quality: ImageQuality = ImageQuality.LOW


@dataclass
class _Human:
    profile: HumanProfile
    queue: deque = field(default_factory=deque)
    serving: Optional[_Job] = None
    work_start: Optional[float] = None
    busy_intervals: list = field(default_factory=list)

    def utilization(self, now: float) -> float:
        lo = now - UTILIZATION_WINDOW
        busy = 0.0
        for start, end in self.busy_intervals:
            busy += max(0.0, min(end, now) - max(start, lo))
        return busy / UTILIZATION_WINDOW


@dataclass
class _Robot:
    profile: RobotProfile
    itinerary: list
    position: tuple[float, float] = (0.0, 0.0)
    leg: int = 0


def _dist(a: tuple[float, float], b: tuple[float, float]) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


class _Mission:
    """Single-threaded deterministic event loop for one mission."""

    def __init__(self, ctx, decision, mode, u_draws):
        self.ctx = ctx
        self.decision = decision
        self.mode = mode
        self.u_draws = u_draws
        self.humans = [_Human(h) for h in ctx.humans]
        self.robots = [
            _Robot(ctx.robots[r], [p for p in range(ctx.j) if decision.poi_to_robot[p] == r])
            for r in range(ctx.i)
        ]
        self.records: dict[int, PoiRecord] = {}
        self.events: list = []
        self._seq = 0
        self.end_time = 0.0

    def _push(self, time, handler, *args) -> None:
        self._seq += 1
        heapq.heappush(self.events, (time, self._seq, handler, args))

    def run(self) -> MissionOutcome:
        for r in range(len(self.robots)):
            self._push(0.0, self._robot_next, r)
        while self.events:
            now, _, handler, args = heapq.heappop(self.events)
            handler(now, *args)
        ctx = self.ctx
        total = sum(rec.points for rec in self.records.values())
        mean = total / ctx.j if ctx.j else 0.0
        records = tuple(self.records[p] for p in range(ctx.j))
        return MissionOutcome(records, total, mean, self.end_time)

    # robot lifecycle

    def _robot_next(self, now: float, r: int) -> None:
        robot = self.robots[r]
        if robot.leg >= len(robot.itinerary):
            travel = _dist(robot.position, (0.0, 0.0)) / robot.profile.base_speed
            self.end_time = max(self.end_time, now + travel)
            return
        p = robot.itinerary[robot.leg]
        nav = self.decision.nav_control[p]
        if nav is None:
            speed, _ = effective_speed_and_quality(robot.profile, None)
            arrival = now + _dist(robot.position, self.ctx.tasks[p].position) / speed
            self._push(arrival, self._robot_arrive, r, p)
        else:
            self._enqueue(now, nav, _Job("nav", robot=r, poi=p))

    def _robot_arrive(self, now: float, r: int, p: int) -> None:
        self.robots[r].position = self.ctx.tasks[p].position
        capture = self.decision.capture_control[p]
        if capture is None:
            _, quality = effective_speed_and_quality(self.robots[r].profile, None)
            self._push(now + CAPTURE_DWELL, self._capture_done, r, p, quality)
        else:
            self._enqueue(now, capture, _Job("capture", robot=r, poi=p))

    def _capture_done(self, now: float, r: int, p: int, quality: ImageQuality) -> None:
        assignee = self.decision.classify[p]
        if assignee is None:
            prob = robot_classification_prob(quality, self.ctx.tasks[p].difficulty)
            self._record(p, "onboard", quality, prob, now)
        else:
            self._enqueue(now, assignee, _Job("classify", poi=p, quality=quality))
        self.robots[r].leg += 1
        self._robot_next(now, r)

    # operator lifecycle

    def _enqueue(self, now: float, h: int, job: _Job) -> None:
        self.humans[h].queue.append(job)
        self._try_start(now, h)

    def _try_start(self, now: float, h: int) -> None:
        human = self.humans[h]
        if human.serving is not None or not human.queue:
            return
        job = human.queue.popleft()
        human.serving = job
        if human.work_start is None:
            human.work_start = now
        if job.kind == "nav":
            robot = self.robots[job.robot]
            speed, _ = effective_speed_and_quality(robot.profile, h, human.profile.tier_s)
            done = now + _dist(robot.position, self.ctx.tasks[job.poi].position) / speed
            self._push(done, self._robot_arrive, job.robot, job.poi)
        elif job.kind == "capture":
            robot = self.robots[job.robot]
            _, quality = effective_speed_and_quality(robot.profile, h, human.profile.tier_s)
            done = now + CAPTURE_DWELL
            self._push(done, self._capture_done, job.robot, job.poi, quality)
        else:
            t_hat = (now - human.work_start) / 3600.0
            u = human.utilization(now)
            task = self.ctx.tasks[job.poi]
            t_bar = lookup_t_bar(job.quality, task.difficulty)
            prob = human_classification_prob(human.profile, t_hat, u, t_bar)
            done = now + t_bar
            self._push(done, self._classify_done, h, job.poi, job.quality, prob)
        human.busy_intervals.append((now, done))
        self._push(done, self._human_free, h)

    def _classify_done(self, now, h, p, quality, prob) -> None:
        self._record(p, f"human:{h}", quality, prob, now)

    def _human_free(self, now: float, h: int) -> None:
        self.humans[h].serving = None
        self._try_start(now, h)

    # scoring

    def _record(self, p, classifier, quality, prob, now) -> None:
        task = self.ctx.tasks[p]
        pts = POINTS[task.difficulty]
        if self.mode == "expected":
            correct: Optional[bool] = None
            points = (2.0 * prob - 1.0) * pts
        else:
            # Bernoulli parameter clamped to [0, 1]; the modeled probability
            # can marginally overshoot 1 where the workload polynomial does.
            correct = bool(self.u_draws[p] < min(prob, 1.0))
            points = pts if correct else -pts
        self.records[p] = PoiRecord(p, task.difficulty, classifier, quality, prob, correct, points, now)
        self.end_time = max(self.end_time, now)


def simulate_mission(
    ctx: MultiAttributeContext,
    decision: AllocationDecision,
    seed: int = 0,
    mode: str = "expected",
    mission_id: int = 0,
) -> MissionOutcome:
    """Execute a mission under ``decision`` and return its outcome.

    ``mode`` is ``"expected"`` (deterministic, scores each POI at its
    expected points) or ``"stochastic"`` (per-POI Bernoulli outcome draws
    from the Philox stream keyed by ``(seed, mission_id)``).
    """
    if mode not in ("expected", "stochastic"):
        raise ContractError(f"unknown simulation mode {mode!r}")
    decision.validate(ctx)
    u_draws = stream(seed, mission_id).random(ctx.j) if mode == "stochastic" else None
    return _Mission(ctx, decision, mode, u_draws).run()


def outcome_to_rows(outcome: MissionOutcome) -> str:
    """Tab-separated per-POI rows of a mission outcome."""
    header = "poi_id\tdifficulty\tclassifier\tquality\tp_success\tcorrect\tpoints\tt_complete"
    lines = [header]
    for rec in outcome.records:
        correct = "" if rec.correct is None else str(int(rec.correct))
        lines.append(
            f"{rec.poi}\t{rec.difficulty.name.lower()}\t{rec.classifier}\t"
            f"{rec.quality.name.lower()}\t{rec.p_success!r}\t{correct}\t"
            f"{rec.points!r}\t{rec.t_complete!r}"
        )
    return "\n".join(lines) + "\n"
