"""Objective functions and the seeded random quadratic generator.

Every simulator and checker in the package only needs an object satisfying
:class:`Objective`: a value, a gradient, the strong-convexity constant ``beta``,
the gradient Lipschitz constant ``K`` and the minimizer ``x_star``.  Only the
quadratic ``L(x) = 1/2 x^T Q x + b^T x`` ships.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol, Sequence, runtime_checkable

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import ConfigError, DimensionError, HybridGDError, InvalidSpectrumError

Vector = NDArray[np.float64]
Matrix = NDArray[np.float64]


@runtime_checkable
class Objective(Protocol):
    n: int
    beta: float
    K: float
    x_star: Vector

    def value(self, x: Vector) -> float: ...

    def gradient(self, x: Vector) -> Vector: ...

    def gap(self, x: Vector) -> float:
        """L(x) - L(x_star)."""
        ...


def _as_vector(x: ArrayLike, n: int, name: str = "x") -> Vector:
    arr = np.asarray(x, dtype=np.float64)
    if arr.shape != (n,):
        raise DimensionError(f"{name} has shape {arr.shape}, expected ({n},)")
    return arr


@dataclass(frozen=True)
class SpectrumSpec:
    n: int
    eigenvalues: tuple[float, ...]
    seed: int = 0

    def __post_init__(self) -> None:
        eig = tuple(float(v) for v in self.eigenvalues)
        object.__setattr__(self, "eigenvalues", eig)
        if self.n < 1:
            raise InvalidSpectrumError(f"n must be positive, got {self.n}")
        if len(eig) != self.n:
            raise InvalidSpectrumError(f"expected {self.n} eigenvalues, got {len(eig)}")
        if any(not np.isfinite(v) or v <= 0.0 for v in eig):
            raise InvalidSpectrumError(f"eigenvalues must be finite and positive: {eig}")
        if list(eig) != sorted(eig):
            raise InvalidSpectrumError("eigenvalues must be sorted ascending")
        if not 0 <= int(self.seed) < 2**64:
            raise InvalidSpectrumError(f"seed must be a 64-bit unsigned integer, got {self.seed}")

    @classmethod
    def linear(cls, n: int, beta: float, K: float, seed: int = 0) -> "SpectrumSpec":
        """Spectrum with extremes ``beta`` and ``K`` and linearly spaced interior."""
        if n == 1:
            if beta != K:
                raise InvalidSpectrumError("n=1 admits a single eigenvalue; need beta == K")
            return cls(1, (float(beta),), seed)
        eig = np.linspace(beta, K, n)
        eig[0], eig[-1] = beta, K
        return cls(n, tuple(eig.tolist()), seed)


@dataclass(frozen=True, eq=False)
class QuadraticObjective:
    """L(x) = 1/2 x^T Q x + b^T x with Q symmetric positive definite."""

    Q: Matrix
    b: Vector
    beta: float
    K: float
    x_star: Vector = field(repr=False)

    @property
    def n(self) -> int:
        return self.b.shape[0]

    @classmethod
    def from_matrix(cls, Q: ArrayLike, b: ArrayLike) -> "QuadraticObjective":
        """Build from explicit data, reading beta and K off the spectrum of Q."""
        Q = np.array(Q, dtype=np.float64)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            raise DimensionError(f"Q must be square, got shape {Q.shape}")
        b = _as_vector(b, Q.shape[0], "b")
        scale = max(1.0, float(np.max(np.abs(Q))))
        if np.max(np.abs(Q - Q.T)) > 1e-12 * scale:
            raise InvalidSpectrumError("Q is not symmetric")
        eig = np.linalg.eigvalsh(Q)
        if eig[0] <= 0.0:
            raise InvalidSpectrumError(f"Q is not positive definite (min eigenvalue {eig[0]})")
        x_star = np.linalg.solve(Q, -b)
        return cls(Q, b, float(eig[0]), float(eig[-1]), x_star)

    def value(self, x: ArrayLike) -> float:
        x = _as_vector(x, self.n)
        return float(0.5 * x @ (self.Q @ x) + self.b @ x)

    def gradient(self, x: ArrayLike) -> Vector:
        x = _as_vector(x, self.n)
        return self.Q @ x + self.b

    def gap(self, x: ArrayLike) -> float:
        # centred form avoids cancellation in L(x) - L(x*)
        e = _as_vector(x, self.n) - self.x_star
        return float(0.5 * e @ (self.Q @ e))


def random_orthogonal(n: int, rng: np.random.Generator) -> Matrix:
    """Orthogonal factor of a standard-normal matrix, with diag(R) made nonnegative."""
    G = rng.standard_normal((n, n))
    U, R = np.linalg.qr(G)
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return U * signs


def build_quadratic(spec: SpectrumSpec, b: ArrayLike | None = None) -> QuadraticObjective:
    """Random quadratic ``Q = U^T D U`` with b uniform in [1, 5].

    One generator seeded from ``spec.seed`` draws U first and then b, so the
    same spec always reproduces the same instance.  Passing ``b`` overrides the
    random linear term (U is still drawn from the same stream).
    """
    n = spec.n
    rng = np.random.default_rng(spec.seed)
    U = random_orthogonal(n, rng)
    D = np.diag(np.asarray(spec.eigenvalues))
    Q = U.T @ D @ U
    Q = 0.5 * (Q + Q.T)
    b_rand = rng.uniform(1.0, 5.0, size=n)
    b_vec = b_rand if b is None else _as_vector(b, n, "b").copy()
    x_star = np.linalg.solve(Q, -b_vec)
    if not np.all(np.isfinite(x_star)):
        raise HybridGDError("singular solve for the minimizer of an SPD quadratic")
    return QuadraticObjective(Q, b_vec, spec.eigenvalues[0], spec.eigenvalues[-1], x_star)


def validate_objective(obj: QuadraticObjective, tol: float = 1e-9) -> None:
    """Recompute the extremes of the spectrum and the stationarity residual.

    Raises :class:`InvalidSpectrumError` when the stored beta/K disagree with Q
    or when Q x* + b is not zero to relative accuracy ``tol``.
    """
    eig = np.linalg.eigvalsh(obj.Q)
    scale = max(1.0, obj.K)
    if abs(eig[0] - obj.beta) > tol * scale or abs(eig[-1] - obj.K) > tol * scale:
        raise InvalidSpectrumError(
            f"stored (beta, K)=({obj.beta}, {obj.K}) disagree with spectrum ({eig[0]}, {eig[-1]})"
        )
    if not 0.0 < obj.beta <= obj.K:
        raise InvalidSpectrumError("need 0 < beta <= K")
    residual = np.linalg.norm(obj.Q @ obj.x_star + obj.b)
    ref = max(1.0, np.linalg.norm(obj.b))
    if residual > tol * ref:
        raise InvalidSpectrumError(f"minimizer residual {residual:.3e} too large")


@dataclass(frozen=True)
class BlockPartition:
    """Contiguous blocks of the decision variable, one per agent.

    Agents are indexed from 0.  ``sizes[i]`` is the length of agent i's block.
    """

    sizes: tuple[int, ...]

    def __post_init__(self) -> None:
        sizes = tuple(int(s) for s in self.sizes)
        object.__setattr__(self, "sizes", sizes)
        if not sizes:
            raise ConfigError("partition needs at least one agent")
        if any(s < 1 for s in sizes):
            raise ConfigError(f"block sizes must be positive: {sizes}")

    @classmethod
    def contiguous(cls, n: int, N: int) -> "BlockPartition":
        """floor(n/N) per agent, the remainder spread over the first n mod N agents."""
        if not 1 <= N <= n:
            raise ConfigError(f"need 1 <= N <= n, got N={N}, n={n}")
        q, r = divmod(n, N)
        return cls(tuple(q + 1 if i < r else q for i in range(N)))

    @property
    def N(self) -> int:
        return len(self.sizes)

    @property
    def n(self) -> int:
        return sum(self.sizes)

    @property
    def offsets(self) -> tuple[int, ...]:
        return tuple(int(o) for o in np.concatenate(([0], np.cumsum(self.sizes)[:-1])))

    def block(self, i: int) -> slice:
        if not 0 <= i < self.N:
            raise IndexError(f"agent index {i} out of range for N={self.N}")
        start = self.offsets[i]
        return slice(start, start + self.sizes[i])

    def blocks(self) -> list[slice]:
        return [self.block(i) for i in range(self.N)]


def block_gradient(obj: Objective, eta: ArrayLike, partition: BlockPartition, i: int) -> Vector:
    """Block i of the full gradient at ``eta``.

    Taken as a slice of the full gradient so that stacking all blocks reproduces
    ``obj.gradient(eta)`` bit for bit.
    """
    if partition.n != obj.n:
        raise DimensionError(f"partition covers {partition.n} entries, objective has {obj.n}")
    sl = partition.block(i)
    return obj.gradient(eta)[sl].copy()


def spectrum_from(values: Sequence[float], seed: int = 0) -> SpectrumSpec:
    return SpectrumSpec(len(values), tuple(sorted(float(v) for v in values)), seed)
