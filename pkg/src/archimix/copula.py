"""Probabilistic queries on an Archimedean copula with a pluggable generator.

The copula in d dimensions is C(u) = phi(phi^{-1}(u_1) + ... + phi^{-1}(u_d)).
The generator can be a learned exponential-mixture network or a classical
parametric family; both expose derivative stacks, so CDF, density,
conditionals and rectangle probabilities all reduce to a few stack
evaluations at sums of inverted coordinates.

Exactness conventions: coordinate sums are taken in sorted order, so every
query is exactly permutation-symmetric; a coordinate equal to 1 drops out
with t = 0 exactly; a coordinate equal to 0 short-circuits the CDF to 0;
rectangle terms are accumulated with exact summation so degenerate
rectangles cancel to exactly zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvariantViolationError, NumericDegeneracyError
from .inversion import invert_values


@dataclass(frozen=True)
class EvalSettings:
    """Numerical policy for queries.

    derivative_cap bounds the generator derivative order a query may
    demand; boundary_clamp is the floor applied to query coordinates
    before inversion.
    """

    derivative_cap: int = 6
    inversion_tol: float = 1e-10
    newton_max_iter: int = 200
    boundary_clamp: float = 1e-12


class CopulaModel:
    """A d-dimensional Archimedean copula over a generator."""

    def __init__(self, d: int, generator, settings: EvalSettings | None = None):
        d = int(d)
        if d < 2:
            raise ValueError("copula dimension must be >= 2")
        self.d = d
        self.generator = generator
        self.settings = settings if settings is not None else EvalSettings()

    # -- plumbing ----------------------------------------------------------

    def _stacks(self, t, order: int) -> np.ndarray:
        return self.generator.stacks(np.atleast_1d(np.asarray(t, dtype=float)), order)

    def _inverse(self, u: np.ndarray) -> np.ndarray:
        inverse = getattr(self.generator, "inverse", None)
        if inverse is not None:
            return inverse(u)
        t, _, _ = invert_values(self.generator, u, self.settings.inversion_tol,
                                self.settings.newton_max_iter)
        return t

    def _clamp(self, u: np.ndarray) -> np.ndarray:
        return np.clip(u, self.settings.boundary_clamp, 1.0)

    def _point(self, u, lo: float, hi: float, what: str) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape != (self.d,):
            raise ValueError(f"{what} must be a vector of length {self.d}")
        if np.any(~np.isfinite(u)) or np.any(u < lo) or np.any(u > hi):
            raise ValueError(f"{what} coordinates must lie in [{lo}, {hi}]")
        return u

    def _matrix(self, U, what: str) -> np.ndarray:
        U = np.asarray(U, dtype=float)
        if U.ndim != 2 or U.shape[1] != self.d:
            raise ValueError(f"{what} must have shape (n, {self.d})")
        if np.any(~np.isfinite(U)):
            raise ValueError(f"{what} has non-finite entries")
        return U

    @staticmethod
    def _sorted_sums(t: np.ndarray) -> np.ndarray:
        return np.sum(np.sort(t, axis=-1), axis=-1)

    # -- queries -------------------------------------------------------------

    def cdf(self, u) -> float:
        """C(u) for one point with coordinates in [0, 1]."""
        return float(self.cdf_values(self._point(u, 0.0, 1.0, "point")[None, :])[0])

    def cdf_values(self, U) -> np.ndarray:
        """C at each row of U, shape (n, d), coordinates in [0, 1]."""
        U = self._matrix(U, "points")
        if np.any(U < 0.0) or np.any(U > 1.0):
            raise ValueError("CDF coordinates must lie in [0, 1]")
        out = np.zeros(U.shape[0])
        ok = ~np.any(U == 0.0, axis=1)
        if ok.any():
            v = self._clamp(U[ok])
            t = self._inverse(v.ravel()).reshape(v.shape)
            s = self._sorted_sums(t)
            out[ok] = self._stacks(s, 0)[:, 0]
        return out

    def log_density(self, u) -> float:
        """Log copula density at one strictly interior point."""
        return float(self.log_density_values(np.asarray(u, dtype=float)[None, :])[0])

    def log_density_values(self, U) -> np.ndarray:
        """Log copula density at each row of U; rows must be strictly interior.

        log c(u) = log((-1)^d phi^(d)(s)) - sum_i log(-phi'(t_i)) with
        t_i = phi^{-1}(u_i) and s = sum_i t_i.  A numerator that is not
        strictly positive is reported as numeric degeneracy, never clipped.
        """
        U = self._matrix(U, "points")
        if np.any(U <= 0.0) or np.any(U >= 1.0):
            raise ValueError("density requires points in the open unit cube")
        d = self.d
        if d > self.settings.derivative_cap:
            raise ValueError(f"density in dimension {d} needs derivative order {d}, "
                             f"above the cap {self.settings.derivative_cap}")
        v = self._clamp(U)
        t = self._inverse(v.ravel()).reshape(v.shape)
        s = self._sorted_sums(t)
        slopes = self._stacks(t.ravel(), 1)[:, 1].reshape(t.shape)
        top = self._stacks(s, d)[:, d]
        signed = top if d % 2 == 0 else -top
        if np.any(signed <= 0.0):
            idx = int(np.argmax(signed <= 0.0))
            raise NumericDegeneracyError(
                f"(-1)^d phi^(d) collapsed to {signed[idx]:.3e} at point index {idx}")
        if np.any(slopes >= 0.0):
            idx = int(np.argmax(np.any(slopes >= 0.0, axis=1)))
            raise NumericDegeneracyError(f"phi' is not negative at point index {idx}")
        return np.log(signed) - np.sum(np.log(-slopes), axis=1)

    def _split_query(self, u, given):
        u = self._point(u, 0.0, 1.0, "point")
        given = sorted({int(i) for i in given})
        if any(i < 0 or i >= self.d for i in given):
            raise ValueError("conditioning indices out of range")
        if len(given) < 1 or len(given) >= self.d:
            raise ValueError("conditioning set must be a non-empty strict subset")
        rest = [i for i in range(self.d) if i not in given]
        return u, given, rest

    def conditional_cdf(self, u, given) -> float:
        """P(U_rest <= u_rest | U_given = u_given) for one full point u.

        Equals phi^(k)(s_full) / phi^(k)(s_given) with k = |given|: the
        per-coordinate slope factors cancel between numerator and
        denominator.
        """
        u, given, rest = self._split_query(u, given)
        k = len(given)
        if k > self.settings.derivative_cap - 1:
            raise ValueError(f"conditioning on {k} coordinates needs derivative order {k + 1}, "
                             f"above the cap {self.settings.derivative_cap}")
        obs = u[given]
        query = u[rest]
        if np.any(obs <= 0.0) or np.any(obs >= 1.0):
            raise ValueError("conditioned coordinates must be strictly interior")
        if np.any(query <= 0.0):
            raise ValueError("query coordinates must lie in (0, 1]")
        t_obs = self._inverse(self._clamp(obs))
        active = query < 1.0
        t_query = np.zeros(query.size)
        if active.any():
            t_query[active] = self._inverse(self._clamp(query[active]))
        s_given = self._sorted_sums(t_obs[None, :])[0]
        s_full = self._sorted_sums(np.concatenate([t_obs, t_query])[None, :])[0]
        st = self._stacks(np.array([s_full, s_given]), k)
        num, den = st[0, k], st[1, k]
        sign = 1.0 if k % 2 == 0 else -1.0
        if sign * den <= 0.0:
            raise NumericDegeneracyError("phi^(k) collapsed at the conditioning point")
        return float(np.clip(num / den, 0.0, 1.0))

    def conditional_log_density(self, u, given) -> float:
        """Log density of the unconditioned coordinates given the others.

        Joint log density at the full point minus the log density of the
        conditioned block under its own |given|-margin copula.
        """
        u, given, rest = self._split_query(u, given)
        k = len(given)
        if np.any(u <= 0.0) or np.any(u >= 1.0):
            raise ValueError("conditional density requires a strictly interior point")
        full = self.log_density(u)
        if k == 1:
            return full  # one-dimensional margin density is 1 on (0, 1)
        marg = CopulaModel(k, self.generator, self.settings).log_density(u[given])
        return full - marg

    def rectangle_prob(self, lower, upper) -> float:
        """P(lower <= U <= upper) by inclusion-exclusion over the 2^d vertices.

        Bounds may touch 0 and 1.  Signed terms are accumulated with exact
        summation and shared bound inversions, so a degenerate rectangle
        comes out exactly 0; a total below -1e-9 raises, smaller negative
        noise clamps to 0.
        """
        lo = self._point(lower, 0.0, 1.0, "lower bounds")
        hi = self._point(upper, 0.0, 1.0, "upper bounds")
        if np.any(lo > hi):
            raise ValueError("rectangle needs lower <= upper in every coordinate")
        bounds = np.stack([hi, lo], axis=1)  # (d, 2); column index 1 is the lower bound
        is_zero = bounds == 0.0
        t_bound = np.zeros((self.d, 2))
        finite = ~is_zero & (bounds < 1.0)
        if finite.any():
            vals = self._clamp(bounds[finite])
            uniq, inv = np.unique(vals, return_inverse=True)
            t_bound[finite] = self._inverse(uniq)[inv]
        choice = np.zeros(self.d, dtype=int)
        terms = []
        for mask in range(1 << self.d):
            n_low = 0
            for j in range(self.d):
                pick = (mask >> j) & 1  # 1 -> lower bound
                choice[j] = pick
                n_low += pick
            if bool(is_zero[np.arange(self.d), choice].any()):
                continue
            t_vertex = t_bound[np.arange(self.d), choice]
            s = float(np.sum(np.sort(t_vertex)))
            c = float(self._stacks(np.array([s]), 0)[0, 0])
            terms.append(c if n_low % 2 == 0 else -c)
        total = math.fsum(terms)
        if total < -1e-9:
            raise InvariantViolationError(f"rectangle probability {total:.3e} below -1e-9")
        return max(total, 0.0)

    def rectangle_log_prob(self, lower, upper) -> float:
        """log P(lower <= U <= upper); -inf for an empty rectangle."""
        p = self.rectangle_prob(lower, upper)
        return math.log(p) if p > 0.0 else float("-inf")

    def tail_dependence_profile(self, levels):
        """Lower and upper tail ratios along the diagonal (d = 2 only).

        Returns (lower, upper) arrays: C(u,u)/u and (1 - 2u + C(u,u))/(1-u)
        at each level u in (0, 1).
        """
        if self.d != 2:
            raise ValueError("tail dependence profile requires d = 2")
        levels = np.atleast_1d(np.asarray(levels, dtype=float))
        if np.any(levels <= 0.0) or np.any(levels >= 1.0):
            raise ValueError("levels must lie strictly inside (0, 1)")
        diag = self.cdf_values(np.column_stack([levels, levels]))
        lower = diag / levels
        upper = (1.0 - 2.0 * levels + diag) / (1.0 - levels)
        return lower, upper
