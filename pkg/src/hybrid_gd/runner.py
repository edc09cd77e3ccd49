"""End-to-end runs: configured simulation, checks, CSV/JSON artifacts, presets."""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import analysis
from .agents import check_write_disjointness, run_distributed
from .analysis import CheckReport
from .certificate import ConvergenceCertificate
from .config import (
    ExperimentConfig,
    build_init,
    build_objective,
    build_partition,
    build_stop,
    build_timer,
    config_from_dict,
)
from .errors import InapplicableHypothesis
from .hybrid import HybridState, JumpRecord, TimerConfig, Trajectory, simulate, validate_config
from .objective import QuadraticObjective

log = logging.getLogger(__name__)

EQUIVALENCE_TOL = 1e-12
# Q is written to objective.json only up to this size
OBJECTIVE_MATRIX_LIMIT = 1000


@dataclass
class RunSummary:
    name: str
    preset: str | None
    seed: int
    certificate: ConvergenceCertificate
    final_t: float
    final_j: int
    final_dist: float
    final_dist_z1: float
    jump_count: int
    status: str
    reports: list[CheckReport] = field(default_factory=list)
    skipped: list[str] = field(default_factory=list)
    wall_clock: float = 0.0

    @property
    def passed(self) -> bool:
        return all(rep.passed for rep in self.reports)

    def to_dict(self) -> dict:
        """JSON payload; wall-clock time is left out so reruns are byte-identical."""
        c = self.certificate
        return _finite_or_none(
            {
                "name": self.name,
                "preset": self.preset,
                "seed": self.seed,
                "certificate": {
                    "beta": c.beta,
                    "K": c.K,
                    "tau_min": c.tau_min,
                    "tau_max": c.tau_max,
                    "A": c.A_const,
                    "B": c.B,
                    "rate": c.rate,
                    "prefactors": {"proposition": c.prop_prefactor, "theorem": c.thm_prefactor},
                    "escape_growth": c.escape_growth,
                },
                "final": {"t": self.final_t, "j": self.final_j, "dist": self.final_dist, "dist_z1": self.final_dist_z1},
                "jump_count": self.jump_count,
                "status": self.status,
                "checks": analysis.report_dicts(self.reports),
                "skipped_checks": self.skipped,
                "passed": self.passed,
            }
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _finite_or_none(obj):
    if isinstance(obj, dict):
        return {k: _finite_or_none(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_finite_or_none(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


@dataclass
class RunResult:
    config: ExperimentConfig
    objective: QuadraticObjective
    timer: TimerConfig
    trajectory: Trajectory
    summary: RunSummary


def run_checks(
    names: list[str],
    traj: Trajectory,
    obj: QuadraticObjective,
    cert: ConvergenceCertificate,
    timer: TimerConfig,
) -> tuple[list[CheckReport], list[str]]:
    """Run the named checks; those whose hypothesis fails are returned as skipped."""
    table: dict[str, Callable[[], CheckReport]] = {
        "structure": lambda: analysis.check_structure(traj, timer),
        "timer": lambda: analysis.check_timer_discipline(traj, timer),
        "contraction": lambda: analysis.check_flow_contraction(traj, obj, cert),
        "alignment": lambda: analysis.check_gradient_alignment(traj, obj, cert),
        "jump_descent": lambda: analysis.check_jump_descent(traj, obj),
        "proposition": lambda: analysis.check_convergence_envelope(traj, obj, cert, "proposition"),
        "theorem": lambda: analysis.check_convergence_envelope(traj, obj, cert, "theorem"),
        "first_jump": lambda: analysis.check_first_jump(traj, obj),
        "escape_growth": lambda: analysis.check_escape_growth(traj, obj, cert),
    }
    reports, skipped = [], []
    for name in names:
        try:
            reports.append(table[name]())
        except InapplicableHypothesis as exc:
            log.info("skipping %s: %s", name, exc)
            skipped.append(name)
    return reports, skipped


def _summarize(cfg, obj, cert, traj, reports, skipped, wall) -> RunSummary:
    final = traj.final
    return RunSummary(
        name=cfg.name,
        preset=cfg.preset,
        seed=cfg.seed,
        certificate=cert,
        final_t=float(traj.t[-1]),
        final_j=int(traj.j[-1]),
        final_dist=analysis.distance_to_A(final, obj.x_star),
        final_dist_z1=float(np.linalg.norm(final.z1 - obj.x_star)),
        jump_count=len(traj.jumps),
        status=traj.status,
        reports=reports,
        skipped=skipped,
        wall_clock=wall,
    )


def run_experiment(
    cfg: ExperimentConfig,
    out_dir: str | Path | None = None,
    distributed: bool = False,
    order_rng: np.random.Generator | None = None,
) -> RunResult:
    """Build, simulate, check and (optionally) write artifacts for one config."""
    start = time.perf_counter()
    obj = build_objective(cfg)
    partition = build_partition(cfg)
    timer = build_timer(cfg, obj)
    cert = validate_config(obj, timer)
    init = build_init(cfg, obj, timer)
    stop = build_stop(cfg)
    if distributed:
        traj = run_distributed(obj, partition, init, timer, stop, cfg.sample_interval, cfg.seed, order_rng)
    else:
        traj = simulate(obj, partition, init, timer, stop, cfg.sample_interval, cfg.seed)
    reports, skipped = run_checks(cfg.requested_checks(), traj, obj, cert, timer)
    summary = _summarize(cfg, obj, cert, traj, reports, skipped, time.perf_counter() - start)
    if out_dir is not None:
        write_artifacts(Path(out_dir), cfg, obj, cert, traj, summary)
    return RunResult(cfg, obj, timer, traj, summary)


# Artifacts


def trajectory_table(traj: Trajectory, obj: QuadraticObjective, cert: ConvergenceCertificate) -> tuple[list[str], np.ndarray]:
    n = traj.n
    header = ["t", "j", "tau"]
    header += [f"z1_{i}" for i in range(1, n + 1)]
    header += [f"z2_{i}" for i in range(1, n + 1)]
    header += ["dist_A", "dist_z1", "V", "bound_theorem"]
    d = analysis.trajectory_distances(traj, obj.x_star)
    d1 = np.linalg.norm(traj.z1 - obj.x_star, axis=1)
    V = analysis.trajectory_lyapunov(traj, obj)
    bound = np.asarray(analysis.theorem_bound(cert, traj.t, float(d[0])))
    data = np.column_stack([traj.t, traj.j, traj.tau, traj.z1, traj.z2, d, d1, V, bound])
    return header, data


def write_trajectory_csv(path: Path, traj: Trajectory, obj: QuadraticObjective, cert: ConvergenceCertificate) -> None:
    header, data = trajectory_table(traj, obj, cert)
    fmt = ["%.17g", "%d"] + ["%.17g"] * (data.shape[1] - 2)
    np.savetxt(path, data, fmt=fmt, delimiter=",", header=",".join(header), comments="")


def read_trajectory_csv(path: str | Path) -> Trajectory:
    """Reload the sampled states and jump log written by :func:`write_trajectory_csv`."""
    path = Path(path)
    with path.open() as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    n = sum(1 for h in header if h.startswith("z1_"))
    t, j, tau = data[:, 0], data[:, 1].astype(np.int64), data[:, 2]
    z1, z2 = data[:, 3 : 3 + n], data[:, 3 + n : 3 + 2 * n]
    jumps = []
    for k in np.nonzero(np.diff(j) == 1)[0]:
        pre = HybridState(z1[k], z2[k], tau[k])
        post = HybridState(z1[k + 1], z2[k + 1], tau[k + 1])
        jumps.append(JumpRecord(float(t[k]), int(j[k]), pre, post, float(tau[k + 1])))
    return Trajectory(t, j, tau, z1, z2, jumps, status="loaded")


def write_artifacts(
    out_dir: Path,
    cfg: ExperimentConfig,
    obj: QuadraticObjective,
    cert: ConvergenceCertificate,
    traj: Trajectory,
    summary: RunSummary,
) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    write_trajectory_csv(out_dir / "trajectory.csv", traj, obj, cert)
    payload = summary.to_dict()
    payload["jumps"] = [{"t": r.t, "j": r.j, "reset": r.reset} for r in traj.jumps]
    (out_dir / "summary.json").write_text(json.dumps(payload, indent=2) + "\n")
    (out_dir / "config.json").write_text(cfg.to_json() + "\n")
    objective = {"n": obj.n, "beta": obj.beta, "K": obj.K, "b": obj.b.tolist(), "x_star": obj.x_star.tolist()}
    if obj.n <= OBJECTIVE_MATRIX_LIMIT:
        objective["Q"] = obj.Q.tolist()
    (out_dir / "objective.json").write_text(json.dumps(objective) + "\n")


# Distributed vs centralized


@dataclass
class Comparison:
    centralized: RunSummary
    distributed: RunSummary
    deviation: float
    disjoint: bool

    @property
    def passed(self) -> bool:
        return self.deviation <= EQUIVALENCE_TOL and self.disjoint

    def to_dict(self) -> dict:
        return _finite_or_none(
            {
                "name": self.centralized.name,
                "deviation": self.deviation,
                "tolerance": EQUIVALENCE_TOL,
                "write_disjoint": self.disjoint,
                "passed": self.passed,
                "centralized": self.centralized.to_dict(),
                "distributed": self.distributed.to_dict(),
            }
        )


def compare_modes(cfg: ExperimentConfig, shuffle_seed: int | None = None) -> Comparison:
    """Run the monolithic and the agent-based simulators on the same config."""
    central = run_experiment(cfg)
    obj, timer = central.objective, central.timer
    partition = build_partition(cfg)
    init = build_init(cfg, obj, timer)
    order_rng = None if shuffle_seed is None else np.random.default_rng(shuffle_seed)
    trace: list = []
    start = time.perf_counter()
    traj = run_distributed(
        obj, partition, init, timer, build_stop(cfg), cfg.sample_interval, cfg.seed, order_rng, trace
    )
    cert = central.summary.certificate
    reports, skipped = run_checks(cfg.requested_checks(), traj, obj, cert, timer)
    dist_summary = _summarize(cfg, obj, cert, traj, reports, skipped, time.perf_counter() - start)
    deviation = central.trajectory.max_deviation(traj)
    return Comparison(central.summary, dist_summary, deviation, check_write_disjointness(trace, obj.n))


# Presets


def _trial(name: str, z2: str, seed: int) -> ExperimentConfig:
    return config_from_dict(
        {
            "name": name,
            "preset": name,
            "objective": {"n": 5, "eigenvalues": [5.0] * 5},
            "partition": {"N": 5},
            "timer": {"auto_paper": True},
            "init": {"z1": "all_twos", "z2": z2},
            "stop": {"max_jumps": 20},
            "seed": seed,
        }
    )


def _trial1(seed: int = 0, large: bool = False) -> list[ExperimentConfig]:
    return [_trial("trial1", "all_twos", seed)]


def _trial2(seed: int = 0, large: bool = False) -> list[ExperimentConfig]:
    return [_trial("trial2", "at_minimizer", seed)]


SCALING_SIZES = (5, 100, 500, 1000)
SCALING_LARGE = 5000


def _scaling(seed: int = 0, large: bool = False) -> list[ExperimentConfig]:
    sizes = SCALING_SIZES + ((SCALING_LARGE,) if large else ())
    out = []
    for n in sizes:
        out.append(
            config_from_dict(
                {
                    "name": f"scaling_n{n}",
                    "preset": "scaling",
                    "objective": {"n": n, "beta": 2.0, "K": 4.0},
                    "partition": {"N": n},
                    "timer": {"auto_paper": True},
                    "init": {"z1": "all_twos", "z2": "all_twos"},
                    "stop": {"tolerance": 1e-6, "max_jumps": 20000},
                    # endpoints only: keeps the n=1000 CSV small
                    "sample_interval": 4.0 / 193.0,
                    "seed": seed,
                }
            )
        )
    return out


SWEEP_SIZES = (1, 2, 5, 20)


def _lemma_sweep(seed: int = 0, large: bool = False) -> list[ExperimentConfig]:
    out = []
    for k in range(100):
        s = seed + k
        rng = np.random.default_rng(s)
        n = SWEEP_SIZES[k % len(SWEEP_SIZES)]
        beta = float(rng.uniform(0.5, 2.0))
        K = beta if n == 1 else float(beta * rng.uniform(1.0, 3.0))
        reset = {"kind": "fixed"} if (k // len(SWEEP_SIZES)) % 2 == 0 else {"kind": "uniform"}
        z = rng.uniform(-3.0, 3.0, size=n).tolist()
        out.append(
            config_from_dict(
                {
                    "name": f"lemma_sweep_{k:03d}",
                    "preset": "lemma_sweep",
                    "objective": {"n": n, "beta": beta, "K": K},
                    "partition": {"N": n},
                    "timer": {"auto_paper": True, "reset_policy": reset},
                    "init": {"z1": z, "z2": z},
                    "stop": {"max_jumps": 25},
                    "seed": s,
                }
            )
        )
    return out


PRESETS: dict[str, tuple[str, Callable[..., list[ExperimentConfig]]]] = {
    "trial1": ("n=N=5, beta=K=5, z1(0,0)=z2(0,0)=(2,...,2), 20 jumps", _trial1),
    "trial2": ("as trial1 but z2(0,0)=x*: distance grows by sqrt(2) at the first jump", _trial2),
    "scaling": ("n=N in {5,100,500,1000}, beta=2, K=4, run to distance 1e-6 (--large adds n=5000)", _scaling),
    "lemma_sweep": ("100 seeded equal-init runs, n in {1,2,5,20}, fixed and uniform resets", _lemma_sweep),
}


def list_presets() -> list[tuple[str, str]]:
    return [(name, desc) for name, (desc, _) in PRESETS.items()]


def preset_configs(name: str, seed: int = 0, large: bool = False) -> list[ExperimentConfig]:
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; known: {list(PRESETS)}")
    return PRESETS[name][1](seed, large)
