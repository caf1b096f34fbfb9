"""Classical one-parameter Archimedean generators used as references.

Each family exposes the same generator protocol as the learned network:
closed-form derivative stacks (stacks / derivatives) and a closed-form
inverse.  Parameter ranges are restricted to where the generator is
completely monotone, so every family is a valid reference in any
dimension.
"""

from __future__ import annotations

import math

import numpy as np

from .series import SeriesValue, exp_decay_stack, stack_exp, stack_log, stack_pow


class ParametricFamily:
    """Shared scaffolding: validation plus scalar wrappers over the stacks."""

    name = "abstract"

    def stacks(self, t, order: int) -> np.ndarray:
        raise NotImplementedError

    def inverse(self, u) -> np.ndarray:
        """phi^{-1}(u) for u in (0, 1], elementwise."""
        u = np.atleast_1d(np.asarray(u, dtype=float))
        if np.any(~np.isfinite(u)) or np.any(u <= 0.0) or np.any(u > 1.0):
            raise ValueError("u values must lie in (0, 1]")
        return self._inverse(u)

    def _inverse(self, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def derivatives(self, t: float, order: int) -> SeriesValue:
        """Scalar derivative stack as a SeriesValue (no parameter adjoints)."""
        return SeriesValue(self.stacks(np.array([float(t)]), order)[0])

    def _check_t(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if np.any(~np.isfinite(t)) or np.any(t < 0):
            raise ValueError("t values must be finite and >= 0")
        return t

    def __repr__(self):
        theta = getattr(self, "theta", None)
        return f"{type(self).__name__}(theta={theta!r})" if theta is not None else f"{type(self).__name__}()"


class Independence(ParametricFamily):
    """phi(t) = exp(-t); the independence copula."""

    name = "independence"

    def stacks(self, t, order: int) -> np.ndarray:
        t = self._check_t(t)
        return exp_decay_stack(1.0, t, order)

    def _inverse(self, u: np.ndarray) -> np.ndarray:
        return -np.log(u)


class Clayton(ParametricFamily):
    """phi(t) = (1 + t)^(-1/theta), theta > 0."""

    name = "clayton"

    def __init__(self, theta: float):
        theta = float(theta)
        if not math.isfinite(theta) or theta <= 0:
            raise ValueError("Clayton requires theta > 0")
        self.theta = theta

    def stacks(self, t, order: int) -> np.ndarray:
        t = self._check_t(t)
        a = -1.0 / self.theta
        out = np.empty((t.size, order + 1))
        base = np.power(1.0 + t, a)
        out[:, 0] = base
        fac = 1.0
        for k in range(1, order + 1):
            fac *= a - (k - 1)
            out[:, k] = fac * np.power(1.0 + t, a - k)
        return out

    def _inverse(self, u: np.ndarray) -> np.ndarray:
        return np.power(u, -self.theta) - 1.0

    def cdf2(self, u1, u2):
        """Closed-form bivariate CDF, handy as an oracle."""
        u1 = np.asarray(u1, dtype=float)
        u2 = np.asarray(u2, dtype=float)
        s = np.power(u1, -self.theta) + np.power(u2, -self.theta) - 1.0
        return np.power(s, -1.0 / self.theta)


class Frank(ParametricFamily):
    """phi(t) = -log(1 - (1 - e^-theta) e^-t) / theta, theta > 0."""

    name = "frank"

    def __init__(self, theta: float):
        theta = float(theta)
        if not math.isfinite(theta) or theta <= 0:
            raise ValueError("Frank requires theta > 0")
        self.theta = theta

    def stacks(self, t, order: int) -> np.ndarray:
        t = self._check_t(t)
        c = -math.expm1(-self.theta)  # 1 - e^-theta
        # w = 1 - c e^-t, written to survive t -> 0 with large theta:
        # w = -expm1(-t) + e^-(t + theta); w^(k) = (-1)^(k+1) c e^-t for k >= 1
        w = np.empty((t.size, order + 1))
        ce = c * np.exp(-t)
        w[:, 0] = -np.expm1(-t) + np.exp(-(t + self.theta))
        for k in range(1, order + 1):
            w[:, k] = ce
            ce = -ce
        out = -stack_log(w) / self.theta
        out[t == 0.0, 0] = 1.0
        return out

    def _inverse(self, u: np.ndarray) -> np.ndarray:
        ratio = np.expm1(-self.theta * u) / math.expm1(-self.theta)
        return -np.log(ratio)


class Joe(ParametricFamily):
    """phi(t) = 1 - (1 - e^-t)^(1/theta), theta >= 1."""

    name = "joe"

    def __init__(self, theta: float):
        theta = float(theta)
        if not math.isfinite(theta) or theta < 1:
            raise ValueError("Joe requires theta >= 1")
        self.theta = theta

    def stacks(self, t, order: int) -> np.ndarray:
        t = self._check_t(t)
        if order >= 1 and np.any(t == 0.0):
            raise ValueError("Joe derivatives at t = 0 are singular")
        a = 1.0 / self.theta
        # v = 1 - e^-t; v^a computed via exp(a log v) with log v = log1p(-e^-t)
        # so the value survives both tails of t.
        v = np.empty((t.size, order + 1))
        e = np.exp(-t)
        with np.errstate(divide="ignore"):
            log_v = np.log1p(-e)
        v[:, 0] = -np.expm1(-t)
        sgn = e.copy()
        for k in range(1, order + 1):
            v[:, k] = sgn
            sgn = -sgn
        base = np.exp(a * log_v)
        p = stack_pow(v, a, base=base)
        out = -p
        out[:, 0] = -np.expm1(a * log_v)
        return out

    def _inverse(self, u: np.ndarray) -> np.ndarray:
        # t = -log(1 - (1-u)^theta)
        with np.errstate(divide="ignore"):
            pw = np.exp(self.theta * np.log1p(-u))
        return -np.log1p(-pw)


class Gumbel(ParametricFamily):
    """phi(t) = exp(-t^(1/theta)), theta >= 1."""

    name = "gumbel"

    def __init__(self, theta: float):
        theta = float(theta)
        if not math.isfinite(theta) or theta < 1:
            raise ValueError("Gumbel requires theta >= 1")
        self.theta = theta

    def stacks(self, t, order: int) -> np.ndarray:
        t = self._check_t(t)
        if order >= 1 and np.any(t == 0.0):
            raise ValueError("Gumbel derivatives at t = 0 are singular for theta > 1")
        a = 1.0 / self.theta
        g = np.empty((t.size, order + 1))
        g[:, 0] = -np.power(t, a)
        fac = -1.0
        for k in range(1, order + 1):
            fac *= a - (k - 1)
            g[:, k] = fac * np.power(t, a - k)
        return stack_exp(g)

    def _inverse(self, u: np.ndarray) -> np.ndarray:
        return np.power(-np.log(u), self.theta)


_FAMILIES = {
    "clayton": Clayton,
    "frank": Frank,
    "joe": Joe,
    "gumbel": Gumbel,
}


def make_family(name: str, theta: float | None = None) -> ParametricFamily:
    """Family by tag; `independence` takes no parameter."""
    key = str(name).lower()
    if key == "independence":
        if theta is not None:
            raise ValueError("independence takes no parameter")
        return Independence()
    cls = _FAMILIES.get(key)
    if cls is None:
        raise ValueError(f"unknown family {name!r}; choose from "
                         f"{sorted(_FAMILIES) + ['independence']}")
    if theta is None:
        raise ValueError(f"family {name!r} needs a parameter")
    return cls(theta)
