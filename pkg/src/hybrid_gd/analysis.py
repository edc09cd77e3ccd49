"""Distances, Lyapunov function, certified bounds and trajectory checks.

Every check returns a :class:`CheckReport`.  A margin is ``RHS - LHS`` of the
inequality, normalized by ``max(1, |RHS|)`` unless stated otherwise, and an
inequality passes iff its worst margin is ``>= -tolerance``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from numpy.typing import ArrayLike

from .certificate import ConvergenceCertificate
from .errors import DimensionError, InapplicableHypothesis
from .hybrid import HybridState, TimerConfig, Trajectory
from .objective import Objective, QuadraticObjective

INEQUALITY_TOL = 1e-9
JUMP_DESCENT_TOL = 1e-10
FIRST_JUMP_FACTOR = math.sqrt(2.0) * 4.0 / 3.0


@dataclass
class InequalityResult:
    name: str
    worst_margin: float
    at_t: float | None
    at_j: int | None
    tolerance: float
    checked: int

    @property
    def passed(self) -> bool:
        return self.worst_margin >= -self.tolerance

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "pass": self.passed,
            "worst_margin": self.worst_margin,
            "at_t": self.at_t,
            "at_j": self.at_j,
        }


@dataclass
class CheckReport:
    name: str
    results: list[InequalityResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def __getitem__(self, name: str) -> InequalityResult:
        for r in self.results:
            if r.name == name:
                return r
        raise KeyError(name)

    def lines(self) -> list[str]:
        return [
            f"{'PASS' if r.passed else 'FAIL'} {r.name}: worst margin {r.worst_margin:.3e} "
            f"at (t={r.at_t}, j={r.at_j}) over {r.checked} points"
            for r in self.results
        ]


def _result(name: str, margins: np.ndarray, t: np.ndarray, j: np.ndarray, tol: float) -> InequalityResult:
    margins = np.asarray(margins, dtype=np.float64)
    if margins.size == 0:
        return InequalityResult(name, math.inf, None, None, tol, 0)
    # NaN margins must fail
    bad = np.where(np.isnan(margins), -np.inf, margins)
    k = int(np.argmin(bad))
    return InequalityResult(name, float(bad[k]), float(t[k]), int(j[k]), tol, int(margins.size))


def _normalized(rhs: np.ndarray, lhs: np.ndarray) -> np.ndarray:
    return (rhs - lhs) / np.maximum(1.0, np.abs(rhs))


# Pointwise quantities


def distance_to_A(state: HybridState, x_star: ArrayLike) -> float:
    """Euclidean distance of (z1, z2) to (x*, x*)."""
    x_star = np.asarray(x_star, dtype=np.float64)
    if x_star.shape != state.z1.shape:
        raise DimensionError(f"x_star has shape {x_star.shape}, state has {state.z1.shape}")
    return math.sqrt(float(np.sum((state.z1 - x_star) ** 2) + np.sum((state.z2 - x_star) ** 2)))


def lyapunov(obj: Objective, state: HybridState) -> float:
    if state.n != obj.n:
        raise DimensionError(f"state has dimension {state.n}, objective {obj.n}")
    return obj.gap(state.z1) ** 2 + obj.gap(state.z2) ** 2


def lower_comparison(beta: float, s):
    return beta**2 / 16.0 * np.asarray(s, dtype=np.float64) ** 4


def upper_comparison(K: float, s):
    return K**2 / 2.0 * np.asarray(s, dtype=np.float64) ** 4


def _bound(prefactor: float, rate: float, t, d0: float):
    t_arr = np.asarray(t, dtype=np.float64)
    if np.any(t_arr < 0):
        raise ValueError(f"bound requested at negative time {t}")
    out = prefactor * np.exp(-rate * t_arr) * d0
    return float(out) if out.ndim == 0 else out


def theorem_bound(cert: ConvergenceCertificate, t, initial_distance: float):
    """Certified distance to the optimum for samples after the first jump."""
    return _bound(cert.thm_prefactor, cert.rate, t, initial_distance)


def proposition_bound(cert: ConvergenceCertificate, t, initial_distance: float):
    """Certified distance to the optimum when z1(0,0) == z2(0,0)."""
    return _bound(cert.prop_prefactor, cert.rate, t, initial_distance)


# Vectorized helpers over trajectory samples


def _gaps(obj: Objective, X: np.ndarray) -> np.ndarray:
    if isinstance(obj, QuadraticObjective):
        E = X - obj.x_star
        return 0.5 * np.einsum("ij,ij->i", E @ obj.Q, E)
    return np.array([obj.gap(x) for x in X])


def _gradients(obj: Objective, X: np.ndarray) -> np.ndarray:
    if isinstance(obj, QuadraticObjective):
        return X @ obj.Q + obj.b
    return np.array([obj.gradient(x) for x in X])


def trajectory_distances(traj: Trajectory, x_star: ArrayLike) -> np.ndarray:
    x_star = np.asarray(x_star, dtype=np.float64)
    return np.sqrt(np.sum((traj.z1 - x_star) ** 2, axis=1) + np.sum((traj.z2 - x_star) ** 2, axis=1))


def trajectory_lyapunov(traj: Trajectory, obj: Objective) -> np.ndarray:
    return _gaps(obj, traj.z1) ** 2 + _gaps(obj, traj.z2) ** 2


def has_equal_init(traj: Trajectory) -> bool:
    return bool(np.array_equal(traj.z1[0], traj.z2[0]))


def _require_equal_init(traj: Trajectory, what: str) -> None:
    if not has_equal_init(traj):
        raise InapplicableHypothesis(f"{what} assumes z1(0,0) == z2(0,0)")


# Trajectory checks


def check_flow_contraction(traj: Trajectory, obj: Objective, cert: ConvergenceCertificate) -> CheckReport:
    """Per-interval contraction, gap and lower bounds of the flowed blocks.

    With ``s = t - t_j`` and ``e = z2(t_j) - x*``:
    ``|z1 - x*|^2 <= q(s) |e|^2``, ``|z1 - z2| <= tau_max |grad L(z2)|``,
    ``|z1 - x*|^2 >= B |e|^2``, and ``0 < q(s) < 1`` for ``s > 0`` where
    ``q(s) = 1 - 2 s beta + s^2 K^2``.
    """
    _require_equal_init(traj, "the flow contraction check")
    x_star = obj.x_star
    s = traj.elapsed_in_interval()
    e2 = np.sum((traj.z2 - x_star) ** 2, axis=1)
    d1 = np.sum((traj.z1 - x_star) ** 2, axis=1)
    q = 1.0 - 2.0 * s * cert.beta + s**2 * cert.K**2
    gap = np.linalg.norm(traj.z1 - traj.z2, axis=1)
    held = cert.tau_max * np.linalg.norm(_gradients(obj, traj.z2), axis=1)

    report = CheckReport("contraction")
    report.results.append(_result("flow_contraction", _normalized(q * e2, d1), traj.t, traj.j, INEQUALITY_TOL))
    report.results.append(_result("flow_gap", _normalized(held, gap), traj.t, traj.j, INEQUALITY_TOL))
    report.results.append(_result("flow_lower", _normalized(d1, cert.B * e2), traj.t, traj.j, INEQUALITY_TOL))
    interior = s > 0
    q_margin = np.minimum(q[interior], 1.0 - q[interior])
    report.results.append(_result("q_range", q_margin, traj.t[interior], traj.j[interior], 0.0))
    return report


def check_gradient_alignment(traj: Trajectory, obj: Objective, cert: ConvergenceCertificate) -> CheckReport:
    """Gradient alignment: grad L(z1) . grad L(z2) >= A |z2(t_j) - x*|^2.

    Checked on every flow sample, including interval endpoints where the
    inequality also holds by continuity.
    """
    _require_equal_init(traj, "the gradient alignment check")
    e2 = np.sum((traj.z2 - obj.x_star) ** 2, axis=1)
    align = np.einsum("ij,ij->i", _gradients(obj, traj.z1), _gradients(obj, traj.z2))
    report = CheckReport("alignment")
    report.results.append(
        _result("gradient_alignment", _normalized(align, cert.A_const * e2), traj.t, traj.j, INEQUALITY_TOL)
    )
    a_margin = cert.A_const if cert.A_const > 0 else -math.inf
    report.results.append(InequalityResult("alignment_constant_positive", a_margin, 0.0, 0, 0.0, 1))
    return report


def check_jump_descent(traj: Trajectory, obj: Objective) -> CheckReport:
    """V never increases across a jump (absolute tolerance 1e-10)."""
    _require_equal_init(traj, "jump descent")
    margins, ts, js = [], [], []
    for rec in traj.jumps:
        margins.append(lyapunov(obj, rec.pre) - lyapunov(obj, rec.post))
        ts.append(rec.t)
        js.append(rec.j)
    report = CheckReport("jump_descent")
    report.results.append(_result("jump_descent", np.array(margins), np.array(ts), np.array(js), JUMP_DESCENT_TOL))
    return report


def check_convergence_envelope(
    traj: Trajectory,
    obj: Objective,
    cert: ConvergenceCertificate,
    mode: Literal["proposition", "theorem"] = "theorem",
) -> CheckReport:
    """Distance to the optimum stays under the certified exponential envelope.

    ``theorem`` checks samples with j >= 1 for any initialization;
    ``proposition`` checks every sample and needs z1(0,0) == z2(0,0).
    """
    d = trajectory_distances(traj, obj.x_star)
    d0 = float(d[0])
    if mode == "proposition":
        _require_equal_init(traj, "the proposition envelope")
        mask = np.ones(len(traj), dtype=bool)
        bound = proposition_bound(cert, traj.t, d0)
    elif mode == "theorem":
        mask = traj.j >= 1
        bound = theorem_bound(cert, traj.t, d0)
    else:
        raise ValueError(f"unknown envelope mode {mode!r}")
    bound = np.asarray(bound)
    report = CheckReport(f"{mode}_envelope")
    report.results.append(
        _result(f"{mode}_envelope", _normalized(bound[mask], d[mask]), traj.t[mask], traj.j[mask], INEQUALITY_TOL)
    )
    return report


def check_escape_growth(traj: Trajectory, obj: Objective, cert: ConvergenceCertificate) -> CheckReport:
    """V(sample) <= 8192 K^2 / (81 beta^2) * V(initial) on any trajectory."""
    V = trajectory_lyapunov(traj, obj)
    cap = np.full_like(V, cert.escape_growth * V[0])
    report = CheckReport("escape_growth")
    report.results.append(_result("escape_growth", _normalized(cap, V), traj.t, traj.j, INEQUALITY_TOL))
    return report


def check_first_jump(traj: Trajectory, obj: Objective) -> CheckReport:
    """|phi(t1, 1)|_A <= sqrt(2) * 4/3 * |phi(0, 0)|_A for any initialization."""
    report = CheckReport("first_jump")
    if not traj.jumps:
        report.results.append(_result("first_jump_bound", np.array([]), np.array([]), np.array([]), INEQUALITY_TOL))
        return report
    rec = traj.jumps[0]
    d0 = distance_to_A(traj.initial, obj.x_star)
    d1 = distance_to_A(rec.post, obj.x_star)
    rhs = np.array([FIRST_JUMP_FACTOR * d0])
    report.results.append(
        _result("first_jump_bound", _normalized(rhs, np.array([d1])), np.array([rec.t]), np.array([rec.j + 1]), INEQUALITY_TOL)
    )
    return report


def check_timer_discipline(traj: Trajectory, timer: TimerConfig) -> CheckReport:
    """Inter-jump gaps in [tau_min, tau_max] exactly, and the non-Zeno count."""
    times = np.array([rec.t for rec in traj.jumps])
    js = np.array([rec.j for rec in traj.jumps])
    gaps = np.diff(times)
    report = CheckReport("timer")
    report.results.append(_result("timer_gap_lower", gaps - timer.tau_min, times[1:], js[1:], 0.0))
    report.results.append(_result("timer_gap_upper", timer.tau_max - gaps, times[1:], js[1:], 0.0))
    resets = np.array([rec.reset for rec in traj.jumps])
    report.results.append(
        _result(
            "timer_reset_range",
            np.minimum(resets - timer.tau_min, timer.tau_max - resets),
            times,
            js,
            0.0,
        )
    )
    T = float(traj.t[-1])
    allowed = math.ceil(T / timer.tau_min) + 1
    report.results.append(
        InequalityResult("non_zeno", float(allowed - len(traj.jumps)), T, int(traj.j[-1]), 0.0, 1)
    )
    return report


def check_structure(traj: Trajectory, timer: TimerConfig) -> CheckReport:
    """Hybrid-time-domain and sample-and-hold well-formedness of a trajectory."""
    report = CheckReport("structure")
    t, j = traj.t, traj.j
    dt, dj = np.diff(t), np.diff(j)
    # lexicographic (t, j) nondecreasing, and j advances by at most one at a time
    lex = np.where(dj == 0, dt, np.where(dj == 1, np.where(dt == 0, 0.0, -np.inf), -np.inf))
    report.results.append(_result("hybrid_time_order", lex, t[1:], j[1:], 0.0))
    tau_margin = np.minimum(traj.tau, timer.tau_max - traj.tau)
    report.results.append(_result("tau_range", tau_margin, t, j, 0.0))
    same = dj == 0
    hold = np.where(np.all(traj.z2[1:] == traj.z2[:-1], axis=1), 0.0, -np.inf)
    report.results.append(_result("sample_and_hold", hold[same], t[1:][same], j[1:][same], 0.0))
    slope = -np.abs((traj.tau[1:] - traj.tau[:-1]) + dt)
    report.results.append(_result("timer_slope", slope[same], t[1:][same], j[1:][same], 1e-12))
    starts = traj.interval_starts()
    ends = np.append(starts[1:], np.inf)
    window = np.minimum(t - starts[j], ends[j] - t)
    report.results.append(_result("interval_window", window, t, j, 0.0))
    finite = np.where(np.all(np.isfinite(traj.z1), axis=1) & np.all(np.isfinite(traj.z2), axis=1), 0.0, -np.inf)
    report.results.append(_result("finite", finite, t, j, 0.0))
    return report


def check_lyapunov_sandwich(obj: Objective, z1: np.ndarray, z2: np.ndarray) -> CheckReport:
    """beta^2 d^4 / 16 <= V <= K^2 d^4 / 2 on the given states, relative margins."""
    z1 = np.atleast_2d(z1)
    z2 = np.atleast_2d(z2)
    V = _gaps(obj, z1) ** 2 + _gaps(obj, z2) ** 2
    d = np.sqrt(np.sum((z1 - obj.x_star) ** 2, axis=1) + np.sum((z2 - obj.x_star) ** 2, axis=1))
    lo = lower_comparison(obj.beta, d)
    hi = upper_comparison(obj.K, d)
    tiny = np.finfo(np.float64).tiny
    idx = np.arange(V.shape[0])
    zeros = np.zeros_like(idx)
    report = CheckReport("lyapunov_sandwich")
    report.results.append(
        _result("lyapunov_lower", (V - lo) / np.maximum(lo, tiny), idx.astype(float), zeros, INEQUALITY_TOL)
    )
    report.results.append(
        _result("lyapunov_upper", (hi - V) / np.maximum(hi, tiny), idx.astype(float), zeros, INEQUALITY_TOL)
    )
    return report


def fit_log_slope(t: ArrayLike, d: ArrayLike, floor: float = 1e-12, min_samples: int = 10) -> float:
    """Least-squares slope of log(d) against t, ignoring points with d <= floor."""
    t = np.asarray(t, dtype=np.float64)
    d = np.asarray(d, dtype=np.float64)
    keep = d > floor
    t, d = t[keep], d[keep]
    if t.size < min_samples:
        raise ValueError(f"need at least {min_samples} samples above {floor}, got {t.size}")
    if np.ptp(t) == 0.0:
        raise ValueError("samples span no time")
    logd = np.log(d)
    if np.ptp(logd) == 0.0:
        raise ValueError("constant series: no decay to fit")
    slope, _ = np.polyfit(t, logd, 1)
    return float(slope)


def fit_decay_rate(traj: Trajectory, x_star: ArrayLike) -> float:
    """Empirical exponential rate of the distance to the optimum after the first jump."""
    d = trajectory_distances(traj, x_star)
    after = traj.j >= 1
    return fit_log_slope(traj.t[after], d[after])


# names used by the operation contract
check_lemma3 = check_flow_contraction
check_lemma4 = check_gradient_alignment


def report_dicts(reports: list[CheckReport]) -> list[dict]:
    return [r.as_dict() for rep in reports for r in rep.results]

