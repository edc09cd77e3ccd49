import numpy as np
import pytest

from hybrid_gd import (
    BlockPartition,
    HybridState,
    SpectrumSpec,
    StopRule,
    TimerConfig,
    UniformReset,
    build_quadratic,
    check_write_disjointness,
    run_distributed,
    simulate,
)
from hybrid_gd.agents import BroadcastBus, DistributedEngine
from hybrid_gd.certificate import auto_tau_max
from hybrid_gd.errors import DimensionError, HybridGDError


def _setup(n, seed=0):
    obj = build_quadratic(SpectrumSpec.linear(n, 1.0, 2.5, seed))
    tau = auto_tau_max(1.0, 2.5)
    timer = TimerConfig(tau / 2, tau, UniformReset())
    rng = np.random.default_rng(seed)
    init = HybridState(rng.normal(size=n), rng.normal(size=n), tau)
    return obj, timer, init


def test_single_agent_matches_centralized_bitwise():
    obj, timer, init = _setup(4)
    stop = StopRule(max_jumps=20)
    a = simulate(obj, None, init, timer, stop, seed=3)
    b = run_distributed(obj, BlockPartition.contiguous(4, 1), init, timer, stop, seed=3)
    assert a.max_deviation(b) == 0.0
    assert np.array_equal(a.t, b.t) and np.array_equal(a.tau, b.tau)


@pytest.mark.parametrize("N", [2, 3, 5])
def test_scalar_and_block_agents_match(N):
    obj, timer, init = _setup(5, 1)
    stop = StopRule(max_jumps=20)
    a = simulate(obj, None, init, timer, stop, seed=1)
    b = run_distributed(obj, BlockPartition.contiguous(5, N), init, timer, stop, seed=1)
    assert a.max_deviation(b) <= 1e-12


def test_shuffled_order_matches():
    obj, timer, init = _setup(6, 2)
    stop = StopRule(max_jumps=15)
    a = simulate(obj, None, init, timer, stop, seed=2)
    b = run_distributed(
        obj, BlockPartition.contiguous(6, 6), init, timer, stop, seed=2, order_rng=np.random.default_rng(9)
    )
    assert a.max_deviation(b) == 0.0


def test_equilibrium_agents_do_not_move():
    obj, timer, _ = _setup(4)
    init = HybridState(obj.x_star, obj.x_star, timer.tau_max)
    traj = run_distributed(obj, BlockPartition.contiguous(4, 4), init, timer, StopRule(max_jumps=5))
    assert np.array_equal(traj.z1, np.broadcast_to(obj.x_star, traj.z1.shape))


def test_trace_disjoint_and_covering():
    obj, timer, init = _setup(10)
    trace = []
    run_distributed(obj, BlockPartition((4, 3, 3)), init, timer, StopRule(max_jumps=3), trace=trace)
    assert check_write_disjointness(trace, 10)
    written = sorted({int(i) for _, idx in trace for i in idx})
    assert written == list(range(10))


def test_overlapping_writes_detected():
    trace = [(0, np.array([0, 1, 2])), (1, np.array([2, 3]))]
    assert not check_write_disjointness(trace)
    assert not check_write_disjointness([(0, [0, 1])], n=3)
    assert check_write_disjointness([(0, [0, 1]), (1, [2])], n=3)


def test_bus_requires_every_agent():
    bus = BroadcastBus(BlockPartition((1, 1)))
    bus.post(0, np.array([1.0]))
    with pytest.raises(HybridGDError):
        bus.post(0, np.array([1.0]))
    with pytest.raises(HybridGDError):
        bus.deliver()
    bus.post(1, np.array([2.0]))
    assert bus.deliver().tolist() == [1.0, 2.0]


def test_engine_rejects_mismatched_dimensions():
    obj, timer, init = _setup(4)
    with pytest.raises(DimensionError):
        DistributedEngine(obj, BlockPartition((2, 3)), timer, init)


def test_agent_gradient_is_block_of_last_memory():
    obj, timer, init = _setup(5, 4)
    p = BlockPartition((2, 3))
    eng = DistributedEngine(obj, p, timer, init)
    full = obj.gradient(init.z2)
    assert np.array_equal(np.concatenate([a.g for a in eng.agents]), full)
    eng.advance(eng.tau)
    eng.communicate(timer.resets())
    state = eng.current()
    assert np.array_equal(state.z1, state.z2)
    assert np.array_equal(np.concatenate([a.g for a in eng.agents]), obj.gradient(state.z2))
