"""Truncated derivative-stack arithmetic with exact parameter adjoints.

A stack of order K for a scalar function f of one input t is the vector
(f(t), f'(t), ..., f^(K)(t)).  Stacks are closed under the operations a
layered mixture of negative exponentials needs: convex combination,
product (Leibniz rule), and multiplication by exp(-rate*t).  A stack may
carry adjoints: row k of the adjoint matrix is the gradient of entry k
with respect to a flat parameter vector, propagated exactly alongside
the values (no numerical differentiation anywhere).

The same coefficient kernels operate on arrays shaped (..., K+1) so the
network forward pass can run them over whole batches.
"""

from __future__ import annotations

import math

import numpy as np

# Hard refusal level for derivative order; per-model caps are configured
# lower (see copula.EvalSettings).
MAX_ORDER = 12

_binom_cache: dict[int, np.ndarray] = {}


def binomial_table(order: int) -> np.ndarray:
    """Table C[k, j] = (k choose j) for k, j <= order. Cached, read-only."""
    tab = _binom_cache.get(order)
    if tab is None:
        tab = np.array(
            [[math.comb(k, j) if j <= k else 0 for j in range(order + 1)]
             for k in range(order + 1)],
            dtype=float,
        )
        tab.setflags(write=False)
        _binom_cache[order] = tab
    return tab


def _check_order(order: int) -> None:
    if not isinstance(order, (int, np.integer)):
        raise ValueError("derivative order must be an integer")
    if order < 0:
        raise ValueError("derivative order must be >= 0")
    if order > MAX_ORDER:
        raise ValueError(f"derivative order {order} exceeds the engine limit {MAX_ORDER}")


def exp_decay_stack(rates, t, order: int) -> np.ndarray:
    """Derivative stack of exp(-rate*t): entry k is (-rate)**k * exp(-rate*t).

    `rates` and `t` broadcast; the result gains a trailing axis of length
    order+1.  rate == 0 yields exactly (1, 0, 0, ...).
    """
    _check_order(order)
    r = np.asarray(rates, dtype=float)
    tt = np.asarray(t, dtype=float)
    shape = np.broadcast_shapes(r.shape, tt.shape)
    out = np.empty(shape + (order + 1,))
    out[..., 0] = np.exp(-r * tt)
    neg_r = np.broadcast_to(-r, shape)
    for k in range(1, order + 1):
        out[..., k] = out[..., k - 1] * neg_r
    return out


def leibniz(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Product of two derivative stacks: out[k] = sum_j C(k,j) a[j] b[k-j]."""
    k1 = a.shape[-1]
    if b.shape[-1] != k1:
        raise ValueError("stack orders differ")
    tab = binomial_table(k1 - 1)
    out = np.empty(np.broadcast_shapes(a.shape[:-1], b.shape[:-1]) + (k1,))
    for k in range(k1):
        acc = a[..., 0] * b[..., k]
        for j in range(1, k + 1):
            acc = acc + tab[k, j] * a[..., j] * b[..., k - j]
        out[..., k] = acc
    return out


def leibniz_vjp(grad: np.ndarray, other: np.ndarray) -> np.ndarray:
    """Gradient of leibniz(a, b) in a, given upstream grad and the factor b.

    ga[j] = sum_{k >= j} C(k,j) * other[k-j] * grad[k].
    """
    k1 = grad.shape[-1]
    tab = binomial_table(k1 - 1)
    out = np.empty(np.broadcast_shapes(grad.shape[:-1], other.shape[:-1]) + (k1,))
    for j in range(k1):
        acc = tab[j, j] * other[..., 0] * grad[..., j]
        for k in range(j + 1, k1):
            acc = acc + tab[k, j] * other[..., k - j] * grad[..., k]
        out[..., j] = acc
    return out


class SeriesValue:
    """Immutable derivative stack with optional parameter adjoints.

    coeffs[k] is the k-th derivative with respect to the scalar input.
    adjoints (when present) has shape (order+1, P); row k is the gradient
    of coeffs[k] over a flat parameter vector of length P.
    """

    __slots__ = ("coeffs", "adjoints")

    def __init__(self, coeffs, adjoints=None):
        c = np.asarray(coeffs, dtype=float)
        if c.ndim != 1 or c.size < 1:
            raise ValueError("coeffs must be a 1-d vector of length order+1")
        _check_order(c.size - 1)
        c = c.copy()
        c.setflags(write=False)
        self.coeffs = c
        if adjoints is not None:
            adj = np.asarray(adjoints, dtype=float)
            if adj.ndim != 2 or adj.shape[0] != c.size:
                raise ValueError("adjoints must have shape (order+1, P)")
            if not np.all(np.isfinite(adj)):
                raise ValueError("adjoints must be finite")
            adj = adj.copy()
            adj.setflags(write=False)
            adjoints = adj
        self.adjoints = adjoints

    @property
    def order(self) -> int:
        return self.coeffs.size - 1

    def __repr__(self):
        return f"SeriesValue(order={self.order}, value={self.coeffs[0]!r})"


def series_exp_decay(rate: float, t: float, order: int, rate_adjoint=None) -> SeriesValue:
    """Stack of exp(-rate*t) at t, optionally with parameter adjoints.

    `rate_adjoint` is d(rate)/d(parameters), a length-P vector; when given,
    the result carries adjoints d(coeffs[k])/d(parameters) obtained from
    d/d(rate) [(-rate)^k e^(-rate t)] = -k*stack[k-1] - t*stack[k].
    """
    _check_order(order)
    rate = float(rate)
    t = float(t)
    if not math.isfinite(rate) or rate < 0:
        raise ValueError("rate must be finite and >= 0")
    if not math.isfinite(t) or t < 0:
        raise ValueError("t must be finite and >= 0")
    coeffs = exp_decay_stack(rate, t, order)
    if rate_adjoint is None:
        return SeriesValue(coeffs)
    ra = np.asarray(rate_adjoint, dtype=float)
    if ra.ndim != 1:
        raise ValueError("rate_adjoint must be a 1-d vector")
    d_rate = np.empty(order + 1)
    d_rate[0] = -t * coeffs[0]
    for k in range(1, order + 1):
        d_rate[k] = -k * coeffs[k - 1] - t * coeffs[k]
    return SeriesValue(coeffs, np.outer(d_rate, ra))


def series_combine(values, weights, weight_adjoints=None) -> SeriesValue:
    """Convex combination of stacks of equal order.

    weights must be non-negative and sum to 1 within 1e-12.  When
    `weight_adjoints` is given (one length-P vector per weight), the result's
    adjoints include the weight-parameter contribution coeffs_i * d(w_i) in
    addition to the propagated value adjoints.
    """
    values = list(values)
    w = np.asarray(weights, dtype=float)
    if len(values) == 0 or w.shape != (len(values),):
        raise ValueError("need one weight per value")
    if np.any(w < 0):
        raise ValueError("weights must be non-negative")
    if abs(float(w.sum()) - 1.0) > 1e-12:
        raise ValueError("weights must sum to 1 within 1e-12")
    order = values[0].order
    for v in values:
        if v.order != order:
            raise ValueError("stack orders differ")
    coeffs = np.zeros(order + 1)
    for wi, v in zip(w, values):
        coeffs += wi * v.coeffs
    adj = None
    p = None
    for v in values:
        if v.adjoints is not None:
            p = v.adjoints.shape[1]
    if weight_adjoints is not None:
        wa = [np.asarray(a, dtype=float) for a in weight_adjoints]
        if len(wa) != len(values):
            raise ValueError("need one weight adjoint per value")
        p = wa[0].size if p is None else p
    if p is not None:
        adj = np.zeros((order + 1, p))
        for i, (wi, v) in enumerate(zip(w, values)):
            if v.adjoints is not None:
                adj += wi * v.adjoints
            if weight_adjoints is not None:
                adj += np.outer(v.coeffs, weight_adjoints[i])
    return SeriesValue(coeffs, adj)


def series_multiply(a: SeriesValue, b: SeriesValue) -> SeriesValue:
    """Leibniz product of two stacks, propagating adjoints bilinearly."""
    if a.order != b.order:
        raise ValueError("stack orders differ")
    coeffs = leibniz(a.coeffs, b.coeffs)
    if a.adjoints is None and b.adjoints is None:
        return SeriesValue(coeffs)
    k1 = a.order + 1
    p = a.adjoints.shape[1] if a.adjoints is not None else b.adjoints.shape[1]
    adj = np.zeros((k1, p))
    tab = binomial_table(a.order)
    for k in range(k1):
        for j in range(k + 1):
            c = tab[k, j]
            if a.adjoints is not None:
                adj[k] += c * b.coeffs[k - j] * a.adjoints[j]
            if b.adjoints is not None:
                adj[k] += c * a.coeffs[j] * b.adjoints[k - j]
    return SeriesValue(coeffs, adj)


def stack_log(a: np.ndarray) -> np.ndarray:
    """Stack of log(f) from the stack of f (f > 0 at the base point).

    Recurrence from f * (log f)' = f':
    l[k] = (a[k] - sum_{j=1}^{k-1} C(k-1,j) a[j] l[k-j]) / a[0].
    """
    a = np.asarray(a, dtype=float)
    k1 = a.shape[-1]
    tab = binomial_table(k1 - 1)
    out = np.empty_like(a)
    out[..., 0] = np.log(a[..., 0])
    for k in range(1, k1):
        acc = a[..., k].copy()
        for j in range(1, k):
            acc -= tab[k - 1, j] * a[..., j] * out[..., k - j]
        out[..., k] = acc / a[..., 0]
    return out


def stack_exp(g: np.ndarray) -> np.ndarray:
    """Stack of exp(f) from the stack of f.

    Recurrence from (e^f)' = f' e^f:
    e[k+1] = sum_{j=0}^{k} C(k,j) g[j+1] e[k-j].
    """
    g = np.asarray(g, dtype=float)
    k1 = g.shape[-1]
    tab = binomial_table(k1 - 1)
    out = np.empty_like(g)
    out[..., 0] = np.exp(g[..., 0])
    for k in range(k1 - 1):
        acc = g[..., 1] * out[..., k]
        for j in range(1, k + 1):
            acc = acc + tab[k, j] * g[..., j + 1] * out[..., k - j]
        out[..., k + 1] = acc
    return out


def stack_pow(a: np.ndarray, p: float, base=None) -> np.ndarray:
    """Stack of f**p from the stack of f (f > 0 at the base point).

    Recurrence from a v' = p a' v.  `base` optionally supplies a
    precomputed a[0]**p (useful when the naive power loses precision).
    """
    a = np.asarray(a, dtype=float)
    k1 = a.shape[-1]
    tab = binomial_table(k1 - 1)
    out = np.empty_like(a)
    out[..., 0] = np.power(a[..., 0], p) if base is None else base
    for k in range(k1 - 1):
        acc = p * a[..., 1] * out[..., k]
        for j in range(1, k + 1):
            acc = acc + p * tab[k, j] * a[..., j + 1] * out[..., k - j]
        for j in range(1, k + 1):
            acc = acc - tab[k, j] * a[..., j] * out[..., k + 1 - j]
        out[..., k + 1] = acc / a[..., 0]
    return out
