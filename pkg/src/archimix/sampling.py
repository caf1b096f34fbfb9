"""Samplers for Archimedean copulas.

A network generator is an exact finite mixture of negative exponentials,
so its mixing variable M is discrete over root-to-output paths.  M is
drawn WITHOUT enumerating the mixture by walking the layers backward:
pick the last hidden unit by the output weights, then each predecessor by
the unit's combination weights, accumulating decay rates along the way.
Given M, a copula sample is u_i = phi(E_i / M) with E_i standard
exponential (Marshall-Olkin construction).

All randomness comes from a counter-based generator (Philox) with a fixed
draw order, so a seed pins every output bit for bit.  Exponential draws
use the inverse CDF, -log1p(-U).
"""

from __future__ import annotations

import math

import numpy as np

from .copula import CopulaModel
from .families import Clayton, Frank, Independence, ParametricFamily
from .inversion import solve_decreasing
from .network import GeneratorNetwork


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(int(seed)))


def _row_choice(rng: np.random.Generator, probs: np.ndarray) -> np.ndarray:
    """One categorical draw per row of a (n, m) probability matrix."""
    cdf = np.cumsum(probs, axis=1)
    r = rng.random(probs.shape[0])
    idx = np.sum(r[:, None] > cdf, axis=1)
    return np.minimum(idx, probs.shape[1] - 1)


def sample_mixing(net: GeneratorNetwork, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw n values of the mixing variable by the backward path walk.

    Each path is selected with probability equal to the product of its
    combination weights; its mixing value is the sum of its decay rates.
    """
    w_out = net.mix_weights[-1][0]
    idx = _row_choice(rng, np.broadcast_to(w_out, (n, w_out.size)))
    m = net.decay_rates[-1][idx].copy()
    for li in range(net.depth - 1, 0, -1):
        probs = net.mix_weights[li][idx]
        idx = _row_choice(rng, probs)
        m += net.decay_rates[li - 1][idx]
    return m


def _exponential(rng: np.random.Generator, shape) -> np.ndarray:
    return -np.log1p(-rng.random(shape))


def sample_network(net: GeneratorNetwork, d: int, n: int, seed: int) -> np.ndarray:
    """n copula samples in d dimensions from a network generator.

    Draw order: mixing walk first, then the (n, d) exponential block.
    """
    if d < 2:
        raise ValueError("copula dimension must be >= 2")
    if n < 1:
        raise ValueError("need n >= 1")
    rng = _rng(seed)
    m = sample_mixing(net, n, rng)
    e = _exponential(rng, (n, d))
    t = e / m[:, None]
    return net.stacks(t.ravel(), 0)[:, 0].reshape(n, d)


def sample_bivariate(family: ParametricFamily, n: int, seed: int) -> np.ndarray:
    """n bivariate samples from a parametric family by conditional inversion.

    Draws (u1, w) uniform and solves the conditional CDF
    phi'(t1 + t2) / phi'(t1) = w for the second coordinate.  Clayton and
    Frank use their closed-form conditional inverses; other families solve
    numerically on the generator scale.
    """
    if n < 1:
        raise ValueError("need n >= 1")
    rng = _rng(seed)
    raw = rng.random((n, 2))
    tiny = 1e-15
    u1 = np.clip(raw[:, 0], tiny, 1.0 - tiny)
    w = np.clip(raw[:, 1], tiny, 1.0 - tiny)
    if isinstance(family, Independence):
        return np.column_stack([u1, w])
    if isinstance(family, Clayton):
        th = family.theta
        u2 = np.power((np.power(w, -th / (1.0 + th)) - 1.0) * np.power(u1, -th) + 1.0,
                      -1.0 / th)
        return np.column_stack([u1, u2])
    if isinstance(family, Frank):
        th = family.theta
        eu = np.exp(-th * u1)
        u2 = -np.log1p(w * math.expm1(-th) / (eu - w * (eu - 1.0))) / th
        return np.column_stack([u1, u2])
    t1 = family.inverse(u1)
    base_slope = family.stacks(t1, 1)[:, 1]

    def ratio(tau, idx):
        st = family.stacks(tau, 2)
        return st[:, 1] / base_slope[idx], st[:, 2] / base_slope[idx]

    tau = solve_decreasing(ratio, w, t_min=t1)
    u2 = family.stacks(np.maximum(tau - t1, 0.0), 0)[:, 0]
    return np.column_stack([u1, u2])


def sample_clayton_mixing(theta: float, d: int, n: int, seed: int) -> np.ndarray:
    """n Clayton samples in any dimension via Gamma(1/theta) mixing."""
    if d < 2:
        raise ValueError("copula dimension must be >= 2")
    fam = Clayton(theta)
    rng = _rng(seed)
    m = rng.gamma(1.0 / fam.theta, 1.0, size=n)
    e = _exponential(rng, (n, d))
    return np.power(1.0 + e / m[:, None], -1.0 / fam.theta)


def sample(model: CopulaModel, n: int, seed: int) -> np.ndarray:
    """Samples from a copula model, dispatching on its generator kind."""
    gen = model.generator
    if isinstance(gen, GeneratorNetwork):
        return sample_network(gen, model.d, n, seed)
    if isinstance(gen, Clayton):
        return sample_clayton_mixing(gen.theta, model.d, n, seed)
    if model.d == 2 and isinstance(gen, ParametricFamily):
        return sample_bivariate(gen, n, seed)
    raise ValueError(f"no sampler for generator {type(gen).__name__} in d = {model.d}")
