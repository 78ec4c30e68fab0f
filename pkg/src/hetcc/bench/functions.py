"""The seven basic functions and the per-subproblem evaluation path."""
from __future__ import annotations

from enum import IntEnum

import numpy as np

from .transforms import TransformChain, apply_asy, apply_lambda, apply_osz

COST_CEILING = 1e300


class BasicFunctionId(IntEnum):
    SPHERE = 1
    ELLIPTIC = 2
    RASTRIGIN = 3
    ACKLEY = 4
    SCHWEFEL12 = 5
    KATSUURA = 6
    ATTRACTIVE_SECTOR = 7


# (osz, asy, lambda) composition each function applies to its located input
INTERNAL_CHAIN = {
    BasicFunctionId.SPHERE: (True, True, True),
    BasicFunctionId.ELLIPTIC: (True, False, False),
    BasicFunctionId.RASTRIGIN: (True, True, True),
    BasicFunctionId.ACKLEY: (True, True, True),
    BasicFunctionId.SCHWEFEL12: (True, True, False),
    BasicFunctionId.KATSUURA: (True, True, True),
    BasicFunctionId.ATTRACTIVE_SECTOR: (True, True, True),
}


def _sphere(z):
    return np.sum(z * z, axis=-1)


def _elliptic(z):
    dim = z.shape[-1]
    frac = np.arange(dim) / (dim - 1) if dim > 1 else np.zeros(1)
    return np.sum(10.0 ** (6.0 * frac) * z * z, axis=-1)


def _rastrigin(z):
    return np.sum(z * z - 10.0 * np.cos(2.0 * np.pi * z) + 10.0, axis=-1)


def _ackley(z):
    dim = z.shape[-1]
    a = -20.0 * np.exp(-0.2 * np.sqrt(np.sum(z * z, axis=-1) / dim))
    b = -np.exp(np.sum(np.cos(2.0 * np.pi * z), axis=-1) / dim)
    return a + b + 20.0 + np.e


def _schwefel12(z):
    return np.sum(np.cumsum(z, axis=-1) ** 2, axis=-1)


def _round_half_away(v):
    return np.sign(v) * np.floor(np.abs(v) + 0.5)


_KATSUURA_POWERS = 2.0 ** np.arange(1, 33)


def _katsuura(z):
    dim = z.shape[-1]
    scaled = z[..., None] * _KATSUURA_POWERS
    inner = np.sum(np.abs(scaled - _round_half_away(scaled)) / _KATSUURA_POWERS, axis=-1)
    factors = (1.0 + np.arange(1, dim + 1) * inner) ** (10.0 / dim**1.2)
    # normalised so that the optimum value is 0 like the other six
    return np.prod(factors, axis=-1) - 1.0


def _attractive_sector(z):
    z2 = z * z
    z4 = z2 * z2
    return np.sum(np.where(z > 0, 100.0 * z2 + z4, z2 + 100.0 * z4), axis=-1)


_IMPLS = {
    BasicFunctionId.SPHERE: _sphere,
    BasicFunctionId.ELLIPTIC: _elliptic,
    BasicFunctionId.RASTRIGIN: _rastrigin,
    BasicFunctionId.ACKLEY: _ackley,
    BasicFunctionId.SCHWEFEL12: _schwefel12,
    BasicFunctionId.KATSUURA: _katsuura,
    BasicFunctionId.ATTRACTIVE_SECTOR: _attractive_sector,
}


def clamp_cost(values):
    """Replace overflowed or NaN costs by the ceiling; returns (values, saturated)."""
    values = np.asarray(values, dtype=float)
    saturated = ~(np.abs(values) < COST_CEILING)
    return np.where(saturated, COST_CEILING, values), saturated


def eval_basic_raw(fn, z_prime):
    fn = BasicFunctionId(fn)
    z_prime = np.asarray(z_prime, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        values = _IMPLS[fn](z_prime)
    return clamp_cost(values)


def eval_basic(fn, z_prime):
    """Evaluate basic function ``fn`` on an already transformed input.

    Works on a single vector (returns a float) or a ``(n, D)`` batch.
    Overflowing values are clamped to :data:`COST_CEILING`.
    """
    values, _ = eval_basic_raw(fn, z_prime)
    return float(values) if values.ndim == 0 else values


def internal_transform(fn, z, chain: TransformChain | None = None):
    """Apply the oscillation/asymmetry/conditioning composition used by ``fn``."""
    osz, asy, lam = INTERNAL_CHAIN[BasicFunctionId(fn)]
    beta, alpha = 0.2, 10.0
    if chain is not None:
        osz = osz if chain.use_osz is None else chain.use_osz
        asy = asy if chain.use_asy is None else chain.use_asy
        lam = lam if chain.use_lambda is None else chain.use_lambda
        beta, alpha = chain.asy_beta, chain.lambda_alpha
    if osz:
        z = apply_osz(z)
    if asy:
        z = apply_asy(z, beta)
    if lam:
        z = apply_lambda(z, alpha)
    return z


def eval_subproblem_raw(fn, chain: TransformChain, x_sub):
    z = internal_transform(fn, chain.locate(x_sub), chain)
    return eval_basic_raw(fn, z)


def eval_subproblem(fn, chain: TransformChain, x_sub):
    values, _ = eval_subproblem_raw(fn, chain, x_sub)
    return float(values) if values.ndim == 0 else values
