"""Agent-level realization of the distributed algorithm.

Each agent owns one block ``x_i`` of the decision variable, a private copy of
the shared memory ``eta`` and the block gradient sampled at the last
communication event.  Between events agents only touch their own block; at an
event every agent broadcasts its block, every copy of ``eta`` is replaced by the
gathered vector and the single shared timer is reset.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

from .errors import ConfigError, DimensionError, HybridGDError
from .hybrid import HybridState, StopRule, TimerConfig, Trajectory, run_schedule
from .objective import BlockPartition, Objective, Vector, block_gradient

WriteTrace = list[tuple[int, np.ndarray]]


@dataclass
class Agent:
    id: int
    block: slice
    x: Vector
    eta: Vector
    g: Vector

    def sample(self, offsets: np.ndarray) -> np.ndarray:
        return self.x[None, :] - offsets[:, None] * self.g[None, :]

    def flow(self, duration: float) -> None:
        if duration != 0.0:
            self.x = self.x - duration * self.g

    def receive(self, eta: Vector, obj: Objective, partition: BlockPartition) -> None:
        self.eta = eta
        self.g = block_gradient(obj, eta, partition, self.id)


class BroadcastBus:
    """Synchronous, lossless all-to-all delivery at communication events."""

    def __init__(self, partition: BlockPartition):
        self.partition = partition
        self.pending: dict[int, Vector] = {}

    def post(self, agent_id: int, values: Vector) -> None:
        if agent_id in self.pending:
            raise HybridGDError(f"agent {agent_id} posted twice in one event")
        self.pending[agent_id] = np.array(values, dtype=np.float64)

    def deliver(self) -> Vector:
        missing = set(range(self.partition.N)) - set(self.pending)
        if missing:
            raise HybridGDError(f"agents {sorted(missing)} did not broadcast")
        eta = np.empty(self.partition.n)
        for i, sl in enumerate(self.partition.blocks()):
            eta[sl] = self.pending[i]
        self.pending.clear()
        return eta


class DistributedEngine:
    def __init__(
        self,
        obj: Objective,
        partition: BlockPartition,
        timer: TimerConfig,
        init: HybridState,
        order_rng: np.random.Generator | None = None,
        trace: WriteTrace | None = None,
    ):
        if partition.n != obj.n or init.n != obj.n:
            raise DimensionError(
                f"dimension mismatch: objective {obj.n}, partition {partition.n}, state {init.n}"
            )
        self.obj = obj
        self.partition = partition
        self.timer = timer
        self.tau = init.tau
        self.order_rng = order_rng
        self.trace = trace
        self.bus = BroadcastBus(partition)
        eta = np.array(init.z2)
        self.agents = []
        for i, sl in enumerate(partition.blocks()):
            local = eta.copy()
            self.agents.append(
                Agent(i, sl, np.array(init.z1[sl]), local, block_gradient(obj, local, partition, i))
            )

    def _order(self) -> list[Agent]:
        if self.order_rng is None:
            return self.agents
        return [self.agents[i] for i in self.order_rng.permutation(len(self.agents))]

    def _eta(self) -> Vector:
        ref = self.agents[0].eta
        for agent in self.agents[1:]:
            if not np.array_equal(agent.eta, ref):
                raise HybridGDError(f"eta copy of agent {agent.id} diverged from agent 0")
        return ref

    def current(self) -> HybridState:
        z1 = np.empty(self.partition.n)
        for agent in self.agents:
            z1[agent.block] = agent.x
        return HybridState(z1, self._eta(), self.tau)

    def flow_samples(self, offsets: np.ndarray) -> np.ndarray:
        out = np.empty((offsets.shape[0], self.partition.n))
        for agent in self._order():
            out[:, agent.block] = agent.sample(offsets)
        return out

    def advance(self, duration: float) -> None:
        for agent in self._order():
            agent.flow(duration)
            if self.trace is not None:
                self.trace.append((agent.id, np.arange(agent.block.start, agent.block.stop)))
        self.tau = self.tau - duration

    def communicate(self, resets: Iterator[float]) -> float:
        if self.tau != 0.0:
            raise HybridGDError(f"communication requested with tau={self.tau}")
        for agent in self._order():
            self.bus.post(agent.id, agent.x)
        eta = self.bus.deliver()
        for agent in self._order():
            agent.receive(eta.copy(), self.obj, self.partition)
        self._eta()
        r = float(next(resets))
        if not self.timer.tau_min <= r <= self.timer.tau_max:
            raise ConfigError(f"reset value {r} outside [{self.timer.tau_min}, {self.timer.tau_max}]")
        self.tau = r
        return r


def run_distributed(
    obj: Objective,
    partition: BlockPartition,
    init: HybridState,
    timer: TimerConfig,
    stop: StopRule,
    sample_interval: float | None = None,
    seed: int = 0,
    order_rng: np.random.Generator | None = None,
    trace: WriteTrace | None = None,
) -> Trajectory:
    """Run the algorithm agent by agent; output format matches ``simulate``.

    ``order_rng`` shuffles the agent iteration order at every step, and
    ``trace`` (if given) collects ``(agent_id, indices)`` for every write to x.
    """
    engine = DistributedEngine(obj, partition, timer, init, order_rng, trace)
    return run_schedule(engine, obj, timer, stop, sample_interval, seed)


def check_write_disjointness(trace: Iterable[tuple[int, Iterable[int]]], n: int | None = None) -> bool:
    """True iff every written index of x has exactly one writer.

    With ``n`` given, the written indices must also cover ``0..n-1``.
    """
    owner: dict[int, int] = {}
    for agent_id, indices in trace:
        for idx in np.asarray(indices).ravel().tolist():
            prev = owner.setdefault(int(idx), agent_id)
            if prev != agent_id:
                return False
    if n is not None and set(owner) != set(range(n)):
        return False
    return True
