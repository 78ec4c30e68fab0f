"""Variable transformations applied before a basic function is evaluated.

All functions accept a single vector of shape ``(D,)`` or a batch of shape
``(n, D)``; the coordinate index ``i`` always runs along the last axis.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np


class BenchmarkDomainError(ValueError):
    """Raised when a transformation receives non-finite input."""


def _check_finite(z: np.ndarray) -> None:
    if not np.all(np.isfinite(z)):
        raise BenchmarkDomainError("transformation input contains non-finite values")


def _coordinate_fraction(dim: int) -> np.ndarray:
    # (i - 1) / (D - 1) for i = 1..D, defined as 0 when D == 1
    if dim == 1:
        return np.zeros(1)
    return np.arange(dim, dtype=float) / (dim - 1)


def apply_osz(z):
    """Oscillation transform: smooth local irregularities, sign preserving."""
    z = np.asarray(z, dtype=float)
    _check_finite(z)
    nonzero = z != 0
    z_hat = np.log(np.where(nonzero, np.abs(z), 1.0))
    positive = z > 0
    c1 = np.where(positive, 10.0, 5.5)
    c2 = np.where(positive, 7.9, 3.1)
    out = np.sign(z) * np.exp(z_hat + 0.049 * (np.sin(c1 * z_hat) + np.sin(c2 * z_hat)))
    return out


def apply_asy(z, beta: float = 0.2):
    """Asymmetry transform; non-positive coordinates pass through unchanged."""
    if beta <= 0:
        raise ValueError("beta must be positive")
    z = np.asarray(z, dtype=float)
    _check_finite(z)
    frac = _coordinate_fraction(z.shape[-1])
    positive = z > 0
    zp = np.where(positive, z, 1.0)
    with np.errstate(over="ignore"):
        powered = zp ** (1.0 + beta * frac * np.sqrt(zp))
    return np.where(positive, powered, z)


def lambda_diagonal(dim: int, alpha: float = 10.0) -> np.ndarray:
    return alpha ** (0.5 * _coordinate_fraction(dim))


def apply_lambda(z, alpha: float = 10.0):
    """Diagonal conditioning: coordinate i is scaled by alpha**(0.5 (i-1)/(D-1))."""
    if alpha < 1:
        raise ValueError("alpha must be >= 1")
    z = np.asarray(z, dtype=float)
    return z * lambda_diagonal(z.shape[-1], alpha)


@dataclass
class TransformChain:
    """Shift, permutation and optional rotation of one subproblem.

    ``permutation[j]`` is the position in the shifted sub-vector that becomes
    coordinate ``j`` before rotation. The oscillation/asymmetry/conditioning
    flags are normally left as ``None`` so that each basic function applies
    its own composition; setting them overrides that composition.
    """

    shift_vector: np.ndarray
    permutation: np.ndarray
    rotation: Optional[np.ndarray] = None
    use_osz: Optional[bool] = None
    use_asy: Optional[bool] = None
    asy_beta: float = 0.2
    use_lambda: Optional[bool] = None
    lambda_alpha: float = 10.0

    def __post_init__(self):
        self.shift_vector = np.asarray(self.shift_vector, dtype=float)
        self.permutation = np.asarray(self.permutation, dtype=np.int64)
        dim = self.shift_vector.shape[0]
        if self.permutation.shape != (dim,) or not np.array_equal(
            np.sort(self.permutation), np.arange(dim)
        ):
            raise ValueError("permutation must be a bijection on 0..D-1")
        if self.rotation is not None:
            self.rotation = np.asarray(self.rotation, dtype=float)
            if self.rotation.shape != (dim, dim):
                raise ValueError("rotation must be a D x D matrix")
            err = np.max(np.abs(self.rotation.T @ self.rotation - np.eye(dim)))
            if err >= 1e-10:
                raise ValueError(f"rotation is not orthogonal (max error {err:.3g})")
        if self.asy_beta <= 0:
            raise ValueError("asy_beta must be positive")
        if self.lambda_alpha < 1:
            raise ValueError("lambda_alpha must be >= 1")

    @property
    def dim(self) -> int:
        return int(self.shift_vector.shape[0])

    @classmethod
    def identity(cls, dim: int) -> "TransformChain":
        return cls(np.zeros(dim), np.arange(dim))

    def locate(self, x_sub):
        """Shift, permute and rotate; returns the vector fed to the basic function chain."""
        x_sub = np.asarray(x_sub, dtype=float)
        if x_sub.shape[-1] != self.dim:
            raise ValueError(
                f"sub-solution has dimension {x_sub.shape[-1]}, chain expects {self.dim}"
            )
        z = (x_sub - self.shift_vector)[..., self.permutation]
        if self.rotation is not None:
            z = z @ self.rotation.T
        return z
