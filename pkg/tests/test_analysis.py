import math

import numpy as np
import pytest

from hybrid_gd import (
    ConvergenceCertificate,
    FixedReset,
    HybridState,
    QuadraticObjective,
    SpectrumSpec,
    StopRule,
    TimerConfig,
    build_quadratic,
    check_convergence_envelope,
    check_escape_growth,
    check_first_jump,
    check_flow_contraction,
    check_gradient_alignment,
    check_jump_descent,
    check_structure,
    check_timer_discipline,
    distance_to_A,
    fit_decay_rate,
    lyapunov,
    proposition_bound,
    simulate,
    theorem_bound,
    validate_config,
)
from hybrid_gd.analysis import check_lyapunov_sandwich, fit_log_slope
from hybrid_gd.certificate import auto_tau_max
from hybrid_gd.errors import InapplicableHypothesis


@pytest.fixture
def unit_cert():
    return ConvergenceCertificate.from_constants(1.0, 1.0, 0.25)


def test_distance_examples():
    x = np.zeros(2)
    assert distance_to_A(HybridState(x, x, 0.1), x) == 0.0
    assert distance_to_A(HybridState([0.75], [1.0], 0.0), [0.0]) == 1.25
    assert distance_to_A(HybridState(x, [1.0, 0.0], 0.0), x) == 1.0


def test_lyapunov_examples(scalar_obj):
    assert lyapunov(scalar_obj, HybridState([0.0], [0.0], 0.1)) == 0.0
    assert lyapunov(scalar_obj, HybridState([0.75], [1.0], 0.0)) == 0.3291015625


def test_theorem_bound_examples(unit_cert):
    assert theorem_bound(unit_cert, 0.0, 1.0) == pytest.approx(8 / 3 * 2**0.25, rel=1e-15)
    assert theorem_bound(unit_cert, 1e6, 1.0) < 1e-300
    ratio = theorem_bound(unit_cert, 64.0, 1.0) / theorem_bound(unit_cert, 0.0, 1.0)
    assert ratio == pytest.approx(math.exp(-1.0), rel=1e-14)
    with pytest.raises(ValueError):
        theorem_bound(unit_cert, -1.0, 1.0)
    arr = theorem_bound(unit_cert, np.array([0.0, 64.0]), 2.0)
    assert arr.shape == (2,)


def test_proposition_bound_examples(unit_cert):
    assert proposition_bound(unit_cert, 0.0, 1.0) == pytest.approx(8**0.25, rel=1e-15)
    assert proposition_bound(unit_cert, 0.0, 0.0) == 0.0


def _scalar_run(scalar_obj, jumps=3, z2=1.0):
    timer = TimerConfig(0.25, 0.25, FixedReset(0.25))
    traj = simulate(scalar_obj, None, HybridState([1.0], [z2], 0.25), timer, StopRule(max_jumps=jumps), 0.0625)
    return traj, timer, validate_config(scalar_obj, timer)


def test_scalar_contraction_is_tight(scalar_obj):
    traj, _, cert = _scalar_run(scalar_obj, 1)
    rep = check_flow_contraction(traj, scalar_obj, cert)
    assert rep.passed
    k = int(np.nonzero((traj.t == 0.25) & (traj.j == 0))[0][0])
    assert traj.z1[k, 0] ** 2 == 0.5625
    assert abs(rep["flow_contraction"].worst_margin) <= 1e-15


def test_scalar_alignment_and_descent(scalar_obj):
    traj, _, cert = _scalar_run(scalar_obj)
    assert check_gradient_alignment(traj, scalar_obj, cert).passed
    rep = check_jump_descent(traj, scalar_obj)
    assert rep.passed
    first = traj.jumps[0]
    assert lyapunov(scalar_obj, first.pre) == 0.3291015625
    assert lyapunov(scalar_obj, first.post) == 0.158203125


def test_checks_pass_on_scalar_run(scalar_obj):
    traj, timer, cert = _scalar_run(scalar_obj, 10)
    for rep in (
        check_convergence_envelope(traj, scalar_obj, cert, "theorem"),
        check_convergence_envelope(traj, scalar_obj, cert, "proposition"),
        check_escape_growth(traj, scalar_obj, cert),
        check_first_jump(traj, scalar_obj),
        check_timer_discipline(traj, timer),
        check_structure(traj, timer),
    ):
        assert rep.passed, rep.lines()


def test_equal_init_checks_refuse_other_inits(scalar_obj):
    traj, _, cert = _scalar_run(scalar_obj, 2, z2=0.0)
    for fn in (
        lambda: check_flow_contraction(traj, scalar_obj, cert),
        lambda: check_gradient_alignment(traj, scalar_obj, cert),
        lambda: check_jump_descent(traj, scalar_obj),
        lambda: check_convergence_envelope(traj, scalar_obj, cert, "proposition"),
    ):
        with pytest.raises(InapplicableHypothesis):
            fn()
    assert check_convergence_envelope(traj, scalar_obj, cert, "theorem").passed


def test_equilibrium_trajectory_trivially_passes():
    obj = build_quadratic(SpectrumSpec.linear(3, 1.0, 2.0, 0))
    tau = auto_tau_max(1.0, 2.0)
    timer = TimerConfig(tau / 2, tau)
    cert = validate_config(obj, timer)
    traj = simulate(obj, None, HybridState(obj.x_star, obj.x_star, tau), timer, StopRule(max_jumps=4))
    for rep in (
        check_jump_descent(traj, obj),
        check_escape_growth(traj, obj, cert),
        check_gradient_alignment(traj, obj, cert),
        check_convergence_envelope(traj, obj, cert, "theorem"),
    ):
        assert rep.passed


def test_violation_is_reported():
    obj = QuadraticObjective.from_matrix([[1.0]], [0.0])
    timer = TimerConfig(0.25, 0.25)
    cert = validate_config(obj, timer)
    traj = simulate(obj, None, HybridState([1.0], [1.0], 0.25), timer, StopRule(max_jumps=2))
    # a certificate with a much faster rate than the dynamics allow
    fake = ConvergenceCertificate(**{**cert.__dict__, "rate": 50.0, "thm_prefactor": 1.0})
    rep = check_convergence_envelope(traj, obj, fake, "theorem")
    assert not rep.passed
    assert rep["theorem_envelope"].worst_margin < 0


def test_sandwich_on_random_states():
    obj = build_quadratic(SpectrumSpec.linear(5, 0.7, 2.9, 3))
    rng = np.random.default_rng(0)
    z1 = obj.x_star + rng.normal(size=(500, 5))
    z2 = obj.x_star + rng.normal(size=(500, 5))
    assert check_lyapunov_sandwich(obj, z1, z2).passed


def test_fit_decay_rate_negative(scalar_obj):
    traj, _, _ = _scalar_run(scalar_obj, 20)
    rate = fit_decay_rate(traj, scalar_obj.x_star)
    # distance shrinks by 0.75 per interval of length 0.25
    assert rate == pytest.approx(4 * math.log(0.75), rel=0.05)


def test_fit_log_slope_errors():
    with pytest.raises(ValueError):
        fit_log_slope(np.arange(5.0), np.ones(5))
    with pytest.raises(ValueError):
        fit_log_slope(np.arange(20.0), np.ones(20))
    t = np.linspace(0, 1, 30)
    assert fit_log_slope(t, np.exp(-2 * t)) == pytest.approx(-2.0, rel=1e-10)


def test_report_serialization(scalar_obj):
    traj, timer, cert = _scalar_run(scalar_obj)
    rep = check_timer_discipline(traj, timer)
    d = rep.results[0].as_dict()
    assert set(d) == {"name", "pass", "worst_margin", "at_t", "at_j"}
    assert all(isinstance(line, str) for line in rep.lines())
