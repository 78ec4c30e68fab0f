"""The four evolution strategies of the default pool.

High tier (linear memory): diagonal-covariance CMA and a limited-memory
matrix adaptation ES. Low tier (quadratic memory): full CMA-ES and an ES that
adapts a Cholesky factor through rank-one updates.
"""
from __future__ import annotations

import math

import numpy as np

from .base import EvolutionStrategy

# largest log step-size increase per generation; keeps repaired outliers from overflowing sigma
MAX_LOG_SIGMA_STEP = 1.0


def _csa_rates(dim: int, mueff: float):
    cs = (mueff + 2.0) / (dim + mueff + 5.0)
    ds = 1.0 + 2.0 * max(0.0, math.sqrt((mueff - 1.0) / (dim + 1.0)) - 1.0) + cs
    cc = (4.0 + mueff / dim) / (dim + 4.0 + 2.0 * mueff / dim)
    return cs, ds, cc


class _CSAMixin:
    """Cumulative step-size adaptation shared by three of the strategies."""

    def _csa(self, zw: np.ndarray) -> float:
        self.ps = (1.0 - self.cs) * self.ps + math.sqrt(self.cs * (2.0 - self.cs) * self.mueff) * zw
        norm = float(np.linalg.norm(self.ps))
        self.sigma *= math.exp(min((self.cs / self.ds) * (norm / self.chi_n - 1.0), MAX_LOG_SIGMA_STEP))
        decay = 1.0 - (1.0 - self.cs) ** (2 * (self.generation + 1))
        return 1.0 if norm / math.sqrt(decay) < (1.4 + 2.0 / (self.dim + 1.0)) * self.chi_n else 0.0


class SepCMAES(_CSAMixin, EvolutionStrategy):
    """CMA-ES restricted to a diagonal covariance, with the usual learning-rate boost."""

    name = "sep-cma"
    tier = "high"
    state_arrays = ("diag", "pc", "ps")

    def _set_constants(self):
        n = self.dim
        self.cs, self.ds, self.cc = _csa_rates(n, self.mueff)
        boost = (n + 2.0) / 3.0
        c1 = 2.0 / ((n + 1.3) ** 2 + self.mueff)
        cmu = 2.0 * (self.mueff - 2.0 + 1.0 / self.mueff) / ((n + 2.0) ** 2 + self.mueff)
        self.c1 = min(1.0, boost * c1)
        self.cmu = min(1.0 - self.c1, boost * cmu)

    def _cold_state(self):
        self.diag = np.ones(self.dim)
        self.pc = np.zeros(self.dim)
        self.ps = np.zeros(self.dim)

    def _shape(self, Z):
        return Z * np.sqrt(self.diag)

    def _whiten(self, Y):
        return Y / np.sqrt(self.diag)

    def _update(self, Y, Z):
        w = self.weights
        yw, zw = w @ Y, w @ Z
        self.mean = self.mean + self.sigma * yw
        hs = self._csa(zw)
        self.pc = (1.0 - self.cc) * self.pc + hs * math.sqrt(self.cc * (2.0 - self.cc) * self.mueff) * yw
        lost = (1.0 - hs) * self.c1 * self.cc * (2.0 - self.cc)
        self.diag = (
            (1.0 - self.c1 - self.cmu + lost) * self.diag
            + self.c1 * self.pc**2
            + self.cmu * (w @ Y**2)
        )
        np.maximum(self.diag, 1e-300, out=self.diag)

    def _degenerate(self):
        return self.diag.max() > 1e28 * self.diag.min()


class LMMAES(EvolutionStrategy):
    """Limited-memory matrix adaptation ES keeping ``m`` direction vectors."""

    name = "lm-ma-es"
    tier = "high"
    state_arrays = ("ps", "directions")
    n_directions = 10

    def _set_constants(self):
        n, lam = self.dim, self.lam
        self.cs = min(2.0 * lam / n, 0.5)
        j = np.arange(self.n_directions)
        self.cd = 1.0 / (1.5**j * n)
        self.cc = np.minimum(lam / (4.0**j * n), 1.0)

    def _cold_state(self):
        self.ps = np.zeros(self.dim)
        self.directions = np.zeros((self.n_directions, self.dim))

    def _active(self):
        return min(int(self.generation), self.n_directions)

    def _shape(self, Z):
        D = Z.copy()
        for j in range(self._active()):
            v = self.directions[j]
            D = (1.0 - self.cd[j]) * D + self.cd[j] * np.outer(D @ v, v)
        return D

    def _whiten(self, Y):
        # each factor (1-c) I + c v v^T inverts in closed form; undo them last-first
        Z = Y.copy()
        for j in reversed(range(self._active())):
            v, c = self.directions[j], self.cd[j]
            vv = float(v @ v)
            Z = (Z - (c / (1.0 - c + c * vv)) * np.outer(Z @ v, v)) / (1.0 - c)
        return Z

    def _degenerate(self):
        # healthy paths stay near sqrt(mueff * n); ten chained factors overflow long before 1e100
        return float(np.abs(self.directions).max(initial=0.0)) > 1e10

    def _update(self, Y, Z):
        w = self.weights
        zw = w @ Z
        self.mean = self.mean + self.sigma * (w @ Y)
        self.ps = (1.0 - self.cs) * self.ps + math.sqrt(self.mueff * self.cs * (2.0 - self.cs)) * zw
        coef = np.sqrt(self.mueff * self.cc * (2.0 - self.cc))
        self.directions = (1.0 - self.cc)[:, None] * self.directions + coef[:, None] * zw
        self.sigma *= math.exp(min(0.5 * self.cs * (float(self.ps @ self.ps) / self.dim - 1.0), MAX_LOG_SIGMA_STEP))


class CMAES(_CSAMixin, EvolutionStrategy):
    """Full-covariance CMA-ES following the standard tutorial formulation."""

    name = "cma"
    tier = "low"
    state_arrays = ("C", "B", "D", "pc", "ps")
    state_scalars = ("eigen_generation",)

    def _set_constants(self):
        n = self.dim
        self.cs, self.ds, self.cc = _csa_rates(n, self.mueff)
        self.c1 = 2.0 / ((n + 1.3) ** 2 + self.mueff)
        self.cmu = min(
            1.0 - self.c1,
            2.0 * (self.mueff - 2.0 + 1.0 / self.mueff) / ((n + 2.0) ** 2 + self.mueff),
        )
        self.eigen_gap = max(1, int(self.lam / (self.c1 + self.cmu) / n / 10.0))

    def _cold_state(self):
        n = self.dim
        self.C = np.eye(n)
        self.B = np.eye(n)
        self.D = np.ones(n)
        self.pc = np.zeros(n)
        self.ps = np.zeros(n)
        self.eigen_generation = 0
        self._after_load()

    def _after_load(self):
        self.invsqrtC = (self.B / self.D) @ self.B.T

    def _shape(self, Z):
        return (Z * self.D) @ self.B.T

    def _whiten(self, Y):
        return Y @ self.invsqrtC.T

    def _update(self, Y, Z):
        w = self.weights
        yw = w @ Y
        self.mean = self.mean + self.sigma * yw
        hs = self._csa(self.invsqrtC @ yw)
        self.pc = (1.0 - self.cc) * self.pc + hs * math.sqrt(self.cc * (2.0 - self.cc) * self.mueff) * yw
        lost = (1.0 - hs) * self.c1 * self.cc * (2.0 - self.cc)
        self.C = (
            (1.0 - self.c1 - self.cmu + lost) * self.C
            + self.c1 * np.outer(self.pc, self.pc)
            + self.cmu * (Y.T * w) @ Y
        )
        if self.generation + 1 - self.eigen_generation >= self.eigen_gap:
            self._decompose()

    def _decompose(self):
        self.eigen_generation = int(self.generation + 1)
        C = np.triu(self.C) + np.triu(self.C, 1).T
        values, vectors = np.linalg.eigh(C)
        if not np.all(np.isfinite(values)) or values.min() <= 0.0:
            values = np.maximum(values, 1e-20 * max(values.max(), 1e-300))
            C = (vectors * values) @ vectors.T
        self.C = C
        self.B = vectors
        self.D = np.sqrt(values)
        self._after_load()

    def _degenerate(self):
        return self.D.max() > 1e14 * self.D.min()


class CholeskyES(_CSAMixin, EvolutionStrategy):
    """ES adapting a full Cholesky factor ``A`` (and its inverse) by rank-one updates only."""

    name = "chol-r1"
    tier = "low"
    state_arrays = ("A", "Ainv", "pc", "ps")

    def _set_constants(self):
        n = self.dim
        self.cs, self.ds, self.cc = _csa_rates(n, self.mueff)
        self.c1 = 2.0 / (n + math.sqrt(2.0)) ** 2

    def _cold_state(self):
        n = self.dim
        self.A = np.eye(n)
        self.Ainv = np.eye(n)
        self.pc = np.zeros(n)
        self.ps = np.zeros(n)

    def _shape(self, Z):
        return Z @ self.A.T

    def _whiten(self, Y):
        return Y @ self.Ainv.T

    def _update(self, Y, Z):
        w = self.weights
        yw, zw = w @ Y, w @ Z
        self.mean = self.mean + self.sigma * yw
        hs = self._csa(zw)
        self.pc = (1.0 - self.cc) * self.pc + hs * math.sqrt(self.cc * (2.0 - self.cc) * self.mueff) * yw
        self.A, self.Ainv = rank_one_cholesky(self.A, self.Ainv, self.pc, 1.0 - self.c1, self.c1)

    def _degenerate(self):
        return np.abs(self.A).max() * np.abs(self.Ainv).max() > 1e14


def rank_one_cholesky(A, Ainv, v, alpha, beta):
    """Factors of ``alpha * A A^T + beta * v v^T`` and their inverse, in O(n^2)."""
    u = Ainv @ v
    uu = float(u @ u)
    if uu == 0.0 or not math.isfinite(uu):
        return A, Ainv
    ra = math.sqrt(alpha)
    root = math.sqrt(1.0 + beta * uu / alpha)
    A_new = ra * A + (ra / uu) * (root - 1.0) * np.outer(v, u)
    Ainv_new = Ainv / ra - (1.0 / (ra * uu)) * (1.0 - 1.0 / root) * np.outer(u, u @ Ainv)
    return A_new, Ainv_new


STRATEGIES = {cls.name: cls for cls in (SepCMAES, LMMAES, CMAES, CholeskyES)}
