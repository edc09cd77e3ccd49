"""Constants certified by the convergence analysis for a given (beta, K, tau_max)."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass


@dataclass(frozen=True)
class ConvergenceCertificate:
    beta: float
    K: float
    tau_min: float
    tau_max: float
    B: float
    A_const: float
    rate: float
    prop_prefactor: float
    thm_prefactor: float
    escape_growth: float

    @classmethod
    def from_constants(
        cls, beta: float, K: float, tau_max: float, tau_min: float | None = None
    ) -> "ConvergenceCertificate":
        B = 1.0 - 2.0 * tau_max * K
        A = beta**2 * B - tau_max * K**3
        root = math.sqrt(K / beta)
        cert = cls(
            beta=float(beta),
            K=float(K),
            tau_min=float(tau_max if tau_min is None else tau_min),
            tau_max=float(tau_max),
            B=B,
            A_const=A,
            rate=beta * A * B / (8.0 * K**2),
            prop_prefactor=root * 8.0**0.25,
            thm_prefactor=(8.0 / 3.0) * 2.0**0.25 * root,
            escape_growth=8192.0 * K**2 / (81.0 * beta**2),
        )
        return cert

    @property
    def tau_bound(self) -> float:
        """Strict upper limit on tau_max: beta^2 / (3 K^3)."""
        return dwell_time_bound(self.beta, self.K)

    def as_dict(self) -> dict[str, float]:
        return asdict(self)


def dwell_time_bound(beta: float, K: float) -> float:
    return beta**2 / (3.0 * K**3)


def auto_tau_max(beta: float, K: float) -> float:
    """The preset choice beta^2 / (3 K^3 + 1), strictly inside the bound."""
    return beta**2 / (3.0 * K**3 + 1.0)
