from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np


@dataclass(frozen=True)
class PhysicalParams:
    """Material, penalty and time-step parameters (defaults: all ones, K = I)."""

    rho_f: float = 1.0
    mu_f: float = 1.0
    rho_p: float = 1.0
    mu_p: float = 1.0
    lambda_p: float = 1.0
    alpha: float = 1.0
    C0: float = 1.0
    K: tuple = ((1.0, 0.0), (0.0, 1.0))
    gamma: float = 1.0
    L: float = 1.0
    dt: float = 1e-2

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.L > 0:
            raise ValueError("L must be positive")
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")
        for name in ("rho_f", "mu_f", "rho_p", "mu_p", "lambda_p", "alpha", "C0"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        K = self.K_matrix
        if K.shape != (2, 2) or not np.allclose(K, K.T) or np.any(np.linalg.eigvalsh(K) <= 0):
            raise ValueError("K must be symmetric positive definite")

    @property
    def K_matrix(self) -> np.ndarray:
        return np.asarray(self.K, dtype=float)

    def with_(self, **changes) -> "PhysicalParams":
        return replace(self, **changes)
