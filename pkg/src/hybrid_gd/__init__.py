"""Distributed gradient descent with intermittent communication, simulated as a hybrid system."""

from .agents import check_write_disjointness, run_distributed
from .analysis import (
    CheckReport,
    InequalityResult,
    check_convergence_envelope,
    check_escape_growth,
    check_first_jump,
    check_flow_contraction,
    check_gradient_alignment,
    check_jump_descent,
    check_lemma3,
    check_lemma4,
    check_structure,
    check_timer_discipline,
    distance_to_A,
    fit_decay_rate,
    lyapunov,
    proposition_bound,
    theorem_bound,
)
from .certificate import ConvergenceCertificate
from .hybrid import (
    FixedReset,
    HybridState,
    HybridTime,
    SequenceReset,
    StopRule,
    TimerConfig,
    Trajectory,
    UniformReset,
    flow,
    jump,
    simulate,
    validate_config,
)
from .objective import (
    BlockPartition,
    QuadraticObjective,
    SpectrumSpec,
    block_gradient,
    build_quadratic,
)

__version__ = "0.1.0"
