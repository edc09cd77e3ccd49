"""Combined hybrid system: sample-and-hold flows, timer-driven jumps, trajectories.

State is ``(z1, z2, tau)``: ``z1`` stacks the agents' blocks, ``z2`` is the
memory written at the last communication event and ``tau`` counts down to the
next one.  With the gradient held at ``z2`` the flow is affine in time, so it is
evaluated in closed form and jumps are scheduled exactly when ``tau`` hits 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Protocol, Union

import numpy as np

from .certificate import ConvergenceCertificate, dwell_time_bound
from .errors import (
    BoundViolationError,
    ConfigError,
    DimensionError,
    FlowPastJumpError,
    NotInJumpSetError,
    NumericalFailure,
)
from .objective import BlockPartition, Objective, Vector

REACHED_MAX_TIME = "reached_max_time"
REACHED_MAX_JUMPS = "reached_max_jumps"
REACHED_TOLERANCE = "reached_tolerance"


@dataclass(frozen=True, eq=False)
class HybridState:
    z1: Vector
    z2: Vector
    tau: float

    def __post_init__(self) -> None:
        z1 = np.array(self.z1, dtype=np.float64)
        z2 = np.array(self.z2, dtype=np.float64)
        if z1.ndim != 1 or z1.shape != z2.shape:
            raise DimensionError(f"z1 {z1.shape} and z2 {z2.shape} must be equal-length vectors")
        z1.flags.writeable = False
        z2.flags.writeable = False
        object.__setattr__(self, "z1", z1)
        object.__setattr__(self, "z2", z2)
        object.__setattr__(self, "tau", float(self.tau))

    @property
    def n(self) -> int:
        return self.z1.shape[0]

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.z1)) and np.all(np.isfinite(self.z2)) and math.isfinite(self.tau))

    def same_as(self, other: "HybridState") -> bool:
        """Bitwise equality of all three components."""
        return (
            np.array_equal(self.z1, other.z1)
            and np.array_equal(self.z2, other.z2)
            and self.tau == other.tau
        )


@dataclass(frozen=True, order=True)
class HybridTime:
    t: float
    j: int


# Reset policies for the timer: tau+ in [tau_min, tau_max].


@dataclass(frozen=True)
class FixedReset:
    value: float | None = None  # None means tau_max


@dataclass(frozen=True)
class UniformReset:
    seed: int | None = None  # None means the run seed


@dataclass(frozen=True)
class SequenceReset:
    """Explicit reset values, cycled when exhausted."""

    values: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))


ResetPolicy = Union[FixedReset, UniformReset, SequenceReset]


@dataclass(frozen=True)
class TimerConfig:
    tau_min: float
    tau_max: float
    reset: ResetPolicy = field(default_factory=FixedReset)

    def __post_init__(self) -> None:
        lo, hi = float(self.tau_min), float(self.tau_max)
        object.__setattr__(self, "tau_min", lo)
        object.__setattr__(self, "tau_max", hi)
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise ConfigError("tau_min and tau_max must be finite")
        if lo <= 0.0:
            raise ConfigError(f"tau_min must be positive, got {lo}")
        if lo > hi:
            raise ConfigError(f"tau_min={lo} exceeds tau_max={hi}")
        r = self.reset
        if isinstance(r, FixedReset) and r.value is not None and not lo <= r.value <= hi:
            raise ConfigError(f"fixed reset {r.value} outside [{lo}, {hi}]")
        if isinstance(r, SequenceReset):
            if not r.values:
                raise ConfigError("sequence reset policy needs at least one value")
            bad = [v for v in r.values if not lo <= v <= hi]
            if bad:
                raise ConfigError(f"sequence reset values outside [{lo}, {hi}]: {bad}")

    def resets(self, seed: int = 0) -> Iterator[float]:
        """Infinite stream of reset values under this policy."""
        r = self.reset
        if isinstance(r, FixedReset):
            value = self.tau_max if r.value is None else float(r.value)
            while True:
                yield value
        elif isinstance(r, UniformReset):
            rng = np.random.default_rng(seed if r.seed is None else r.seed)
            while True:
                yield float(rng.uniform(self.tau_min, self.tau_max))
        elif isinstance(r, SequenceReset):
            while True:
                yield from r.values
        else:
            raise ConfigError(f"unknown reset policy {r!r}")


@dataclass(frozen=True)
class StopRule:
    """Any combination of limits; the run stops at the first one reached."""

    max_time: float | None = None
    max_jumps: int | None = None
    tolerance: float | None = None

    def __post_init__(self) -> None:
        if self.max_time is None and self.max_jumps is None and self.tolerance is None:
            raise ConfigError("stop rule needs max_time, max_jumps or tolerance")
        if self.max_time is not None and not self.max_time >= 0:
            raise ConfigError(f"max_time must be nonnegative, got {self.max_time}")
        if self.max_jumps is not None and self.max_jumps < 0:
            raise ConfigError(f"max_jumps must be nonnegative, got {self.max_jumps}")
        if self.tolerance is not None and not self.tolerance >= 0:
            raise ConfigError(f"tolerance must be nonnegative, got {self.tolerance}")


@dataclass(frozen=True, eq=False)
class JumpRecord:
    t: float
    j: int  # jump counter before the jump
    pre: HybridState
    post: HybridState
    reset: float


@dataclass(eq=False)
class Trajectory:
    """A sampled hybrid arc.

    Samples are stored column-wise: ``t[k], j[k], tau[k], z1[k], z2[k]`` is the
    k-th sample.  Each jump contributes two samples sharing ``t`` (pre with j,
    post with j + 1).
    """

    t: np.ndarray
    j: np.ndarray
    tau: np.ndarray
    z1: np.ndarray
    z2: np.ndarray
    jumps: list[JumpRecord]
    status: str

    def __len__(self) -> int:
        return self.t.shape[0]

    @property
    def n(self) -> int:
        return self.z1.shape[1]

    def state(self, k: int) -> HybridState:
        return HybridState(self.z1[k], self.z2[k], self.tau[k])

    def time(self, k: int) -> HybridTime:
        return HybridTime(float(self.t[k]), int(self.j[k]))

    @property
    def samples(self) -> list[tuple[HybridTime, HybridState]]:
        return [(self.time(k), self.state(k)) for k in range(len(self))]

    @property
    def initial(self) -> HybridState:
        return self.state(0)

    @property
    def final(self) -> HybridState:
        return self.state(len(self) - 1)

    def interval_starts(self) -> np.ndarray:
        """t_j for every jump count j present in the trajectory."""
        return np.array([0.0] + [rec.t for rec in self.jumps], dtype=np.float64)

    def elapsed_in_interval(self) -> np.ndarray:
        """t - t_j for every sample."""
        return self.t - self.interval_starts()[self.j]

    def max_deviation(self, other: "Trajectory") -> float:
        """Largest componentwise difference over all sampled quantities."""
        if len(self) != len(other) or self.n != other.n:
            return math.inf
        if not np.array_equal(self.j, other.j):
            return math.inf
        devs = [
            np.max(np.abs(a - b), initial=0.0)
            for a, b in (
                (self.t, other.t),
                (self.tau, other.tau),
                (self.z1, other.z1),
                (self.z2, other.z2),
            )
        ]
        return float(max(devs))


def validate_config(obj: Objective, timer: TimerConfig) -> ConvergenceCertificate:
    """Check the dwell-time bound and derive the certified constants."""
    if not 0.0 < obj.beta <= obj.K:
        raise ConfigError(f"need 0 < beta <= K, got beta={obj.beta}, K={obj.K}")
    if not 0.0 < timer.tau_min <= timer.tau_max:
        raise ConfigError(f"need 0 < tau_min <= tau_max, got {timer.tau_min}, {timer.tau_max}")
    bound = dwell_time_bound(obj.beta, obj.K)
    if not timer.tau_max < bound:
        raise BoundViolationError(
            f"tau_max={timer.tau_max!r} violates tau_max < beta^2/(3 K^3) = {bound!r} "
            f"(beta={obj.beta!r}, K={obj.K!r})"
        )
    cert = ConvergenceCertificate.from_constants(obj.beta, obj.K, timer.tau_max, timer.tau_min)
    # implied by the bound; asserted so a bad certificate can never be emitted
    assert 0.0 < cert.B < 1.0, cert
    assert cert.A_const > 0.0, cert
    assert cert.rate > 0.0, cert
    return cert


def flow(state: HybridState, duration: float, obj: Objective) -> HybridState:
    """Closed-form flow: z1 moves along the held gradient, tau counts down."""
    duration = float(duration)
    if duration < 0.0:
        raise ValueError(f"negative flow duration {duration}")
    if duration > state.tau:
        raise FlowPastJumpError(f"cannot flow {duration} with only tau={state.tau} left")
    if duration == 0.0:
        return state
    g = obj.gradient(state.z2)
    return HybridState(state.z1 - duration * g, state.z2, state.tau - duration)


def jump(state: HybridState, timer: TimerConfig, resets: Iterator[float]) -> HybridState:
    """Communication event: memory takes the current blocks, timer is reset."""
    if state.tau != 0.0:
        raise NotInJumpSetError(f"jump requires tau == 0, got {state.tau}")
    r = float(next(resets))
    if not timer.tau_min <= r <= timer.tau_max:
        raise ConfigError(f"reset value {r} outside [{timer.tau_min}, {timer.tau_max}]")
    return HybridState(state.z1, state.z1, r)


class FlowEngine(Protocol):
    """What the scheduler needs from a realization of the hybrid dynamics."""

    tau: float

    def current(self) -> HybridState: ...

    def flow_samples(self, offsets: np.ndarray) -> np.ndarray: ...

    def advance(self, duration: float) -> None: ...

    def communicate(self, resets: Iterator[float]) -> float: ...


class CentralizedEngine:
    def __init__(self, obj: Objective, timer: TimerConfig, init: HybridState):
        self.obj = obj
        self.timer = timer
        self.state = init

    @property
    def tau(self) -> float:
        return self.state.tau

    def current(self) -> HybridState:
        return self.state

    def flow_samples(self, offsets: np.ndarray) -> np.ndarray:
        g = self.obj.gradient(self.state.z2)
        return self.state.z1[None, :] - offsets[:, None] * g[None, :]

    def advance(self, duration: float) -> None:
        self.state = flow(self.state, duration, self.obj)

    def communicate(self, resets: Iterator[float]) -> float:
        self.state = jump(self.state, self.timer, resets)
        return self.state.tau


def _schedule_end(t: float, duration: float, tau_min: float, tau_max: float) -> float:
    """t + duration, nudged by ulps so the stored gap stays inside [tau_min, tau_max].

    When the window is narrower than the float spacing near ``t`` (possible
    only for tau_min == tau_max) no end time is exact; the nearest is returned.
    """
    t_end = t + duration
    lo = hi = t_end
    for _ in range(64):
        for cand in (lo, hi):
            if tau_min <= cand - t <= tau_max:
                return cand
        lo = float(np.nextafter(lo, -np.inf))
        hi = float(np.nextafter(hi, np.inf))
    return t_end


class _Recorder:
    def __init__(self) -> None:
        self.t: list[np.ndarray] = []
        self.j: list[np.ndarray] = []
        self.tau: list[np.ndarray] = []
        self.z1: list[np.ndarray] = []
        self.z2: list[np.ndarray] = []

    def add(self, t, j: int, tau, z1: np.ndarray, z2: np.ndarray) -> None:
        t = np.atleast_1d(np.asarray(t, dtype=np.float64))
        m = t.shape[0]
        self.t.append(t)
        self.j.append(np.full(m, j, dtype=np.int64))
        self.tau.append(np.atleast_1d(np.asarray(tau, dtype=np.float64)))
        self.z1.append(np.atleast_2d(z1))
        self.z2.append(np.broadcast_to(z2, (m, z2.shape[0])))

    def build(self, jumps: list[JumpRecord], status: str) -> Trajectory:
        return Trajectory(
            t=np.concatenate(self.t),
            j=np.concatenate(self.j),
            tau=np.concatenate(self.tau),
            z1=np.vstack(self.z1),
            z2=np.vstack(self.z2),
            jumps=jumps,
            status=status,
        )


def _distances(z1: np.ndarray, z2: np.ndarray, x_star: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum((z1 - x_star) ** 2, axis=-1) + np.sum((z2 - x_star) ** 2, axis=-1))


def run_schedule(
    engine: FlowEngine,
    obj: Objective,
    timer: TimerConfig,
    stop: StopRule,
    sample_interval: float | None = None,
    seed: int = 0,
) -> Trajectory:
    """Alternate exact flows and jumps on ``engine`` until ``stop`` fires.

    Samples are taken at ``t_j + k * sample_interval`` inside every flow
    interval, plus the pre- and post-jump states.  Shared by the centralized
    and the agent-based realizations so both see the same jump schedule.
    """
    validate_config(obj, timer)
    h = timer.tau_min / 10.0 if sample_interval is None else float(sample_interval)
    if not h > 0.0:
        raise ConfigError(f"sample_interval must be positive, got {sample_interval}")
    init = engine.current()
    if init.n != obj.n:
        raise DimensionError(f"initial state has dimension {init.n}, objective {obj.n}")
    if not 0.0 <= init.tau <= timer.tau_max:
        raise ConfigError(f"initial tau={init.tau} outside [0, {timer.tau_max}]")
    if not init.is_finite():
        raise NumericalFailure("non-finite initial state", 0.0, 0)

    x_star = obj.x_star
    tol = stop.tolerance
    resets = timer.resets(seed)
    rec = _Recorder()
    jumps: list[JumpRecord] = []
    t, j = 0.0, 0
    from_reset = False

    rec.add(t, j, init.tau, init.z1[None, :], init.z2)
    if tol is not None and _distances(init.z1, init.z2, x_star) <= tol:
        return rec.build(jumps, REACHED_TOLERANCE)

    while True:
        if stop.max_time is not None and t >= stop.max_time:
            status = REACHED_MAX_TIME
            break
        if engine.tau == 0.0:
            if stop.max_jumps is not None and len(jumps) >= stop.max_jumps:
                status = REACHED_MAX_JUMPS
                break
            pre = engine.current()
            r = engine.communicate(resets)
            post = engine.current()
            if not post.is_finite():
                raise NumericalFailure("non-finite state after jump", t, j + 1)
            jumps.append(JumpRecord(t, j, pre, post, r))
            j += 1
            from_reset = True
            rec.add(t, j, post.tau, post.z1[None, :], post.z2)
            if tol is not None and _distances(post.z1, post.z2, x_star) <= tol:
                status = REACHED_TOLERANCE
                break
            continue

        tau0 = engine.tau
        duration = tau0
        t_end = _schedule_end(t, duration, timer.tau_min, timer.tau_max) if from_reset else t + duration
        truncated = stop.max_time is not None and t_end > stop.max_time
        if truncated:
            duration = stop.max_time - t
            t_end = stop.max_time

        k = np.arange(1, max(1, math.ceil(duration / h)) + 1, dtype=np.float64)
        offsets = k * h
        offsets = np.append(offsets[offsets < duration], duration)
        z1s = engine.flow_samples(offsets)
        finite = np.all(np.isfinite(z1s), axis=1)
        if not finite.all():
            bad = int(np.argmin(finite))
            raise NumericalFailure("non-finite state during flow", t + float(offsets[bad]), j)
        times = np.minimum(t + offsets, t_end)
        times[-1] = t_end
        taus = tau0 - offsets
        z2 = engine.current().z2

        hit = None
        if tol is not None:
            d = _distances(z1s, z2[None, :], x_star)
            below = np.nonzero(d <= tol)[0]
            if below.size:
                hit = int(below[0])
        if hit is not None:
            rec.add(times[: hit + 1], j, taus[: hit + 1], z1s[: hit + 1], z2)
            engine.advance(float(offsets[hit]))
            status = REACHED_TOLERANCE
            break
        rec.add(times, j, taus, z1s, z2)
        engine.advance(duration)
        t = t_end

    return rec.build(jumps, status)


def simulate(
    obj: Objective,
    partition: BlockPartition | None,
    init: HybridState,
    timer: TimerConfig,
    stop: StopRule,
    sample_interval: float | None = None,
    seed: int = 0,
) -> Trajectory:
    """Centralized simulation of the combined hybrid system.

    ``partition`` does not influence the combined dynamics; it is accepted so
    the signature matches :func:`hybrid_gd.agents.run_distributed`.
    """
    if partition is not None and partition.n != obj.n:
        raise DimensionError(f"partition covers {partition.n} entries, objective has {obj.n}")
    engine = CentralizedEngine(obj, timer, init)
    return run_schedule(engine, obj, timer, stop, sample_interval, seed)
