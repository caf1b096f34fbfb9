"""Numerical inversion of a generator: solve phi(t) = u on [0, inf).

phi is continuous, strictly decreasing from phi(0) = 1 toward 0, and
log-convex (a mixture of exponentials), so Newton steps on log phi from
the left end of a bracket approach the root monotonically; a bisection
fallback guards every step and the bracket never loses the root.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 200
_MAX_DOUBLINGS = 100


@dataclass(frozen=True)
class InverseResult:
    """One inverted point with solve diagnostics and optional gradients.

    d_du is dt*/du = 1/phi'(t*); d_dweights is the gradient of t* over the
    flat raw weights, -adj(phi)(t*) / phi'(t*), from the implicit function
    theorem applied to phi(t*) = u.
    """

    t_star: float
    residual: float
    iterations: int
    d_du: float
    d_dweights: np.ndarray | None = None


def invert_values(net, u, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER):
    """Vectorized inverse of the generator at each u in (0, 1].

    Returns (t, residual, iterations) arrays.  u == 1 maps to t = 0 with
    zero iterations; each other point converges when |phi(t) - u| <= tol.
    """
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if u.ndim != 1:
        raise ValueError("u must be a 1-d array")
    if np.any(~np.isfinite(u)) or np.any(u <= 0.0) or np.any(u > 1.0):
        raise ValueError("u values must lie in (0, 1]")
    n = u.size
    t = np.zeros(n)
    residual = np.zeros(n)
    iterations = np.zeros(n, dtype=int)
    active = np.flatnonzero(u < 1.0)
    if active.size == 0:
        return t, residual, iterations

    ua = u[active]
    lo = np.zeros(active.size)
    hi = np.ones(active.size)
    # grow the right end until phi(hi) < u
    need = np.arange(active.size)
    for _ in range(_MAX_DOUBLINGS):
        vals = net.stacks(hi[need], 0)[:, 0]
        still = vals >= ua[need]
        if not still.any():
            break
        need = need[still]
        hi[need] *= 2.0
    else:
        raise ConvergenceError("bracketing failed: phi does not drop below u")

    ta = lo.copy()
    res_a = np.full(active.size, np.inf)
    it_a = np.zeros(active.size, dtype=int)
    live = np.arange(active.size)
    log_u = np.log(ua)
    for _ in range(max_iter):
        if live.size == 0:
            break
        st = net.stacks(ta[live], 1)
        val = st[:, 0]
        slope = st[:, 1]
        f = val - ua[live]
        res_a[live] = np.abs(f)
        it_a[live] += 1
        done = res_a[live] <= tol
        pos = f > 0.0
        lo_idx = live[pos]
        lo[lo_idx] = np.maximum(lo[lo_idx], ta[lo_idx])
        hi_idx = live[~pos]
        hi[hi_idx] = np.minimum(hi[hi_idx], ta[hi_idx])
        # Newton on log phi: t - (log phi - log u) * phi / phi'
        with np.errstate(divide="ignore", invalid="ignore"):
            step = (np.log(val) - log_u[live]) * val / slope
            t_new = ta[live] - step
        bad = (~np.isfinite(t_new)) | (t_new <= lo[live]) | (t_new >= hi[live])
        t_new[bad] = 0.5 * (lo[live][bad] + hi[live][bad])
        keep = ~done
        ta[live[keep]] = t_new[keep]
        live = live[keep]
    if live.size > 0:
        raise ConvergenceError(
            f"inversion did not reach tol {tol} within {max_iter} iterations "
            f"for {live.size} point(s); worst residual {float(res_a[live].max())}")

    t[active] = ta
    residual[active] = res_a
    iterations[active] = it_a
    return t, residual, iterations


def invert(net, u: float, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
           want_weight_gradient: bool = False) -> InverseResult:
    """Invert the generator at one u, with solve metadata and gradients."""
    t, residual, iterations = invert_values(net, np.array([float(u)]), tol, max_iter)
    t_star = float(t[0])
    if want_weight_gradient:
        sv = net.derivatives(t_star, 1, want_adjoints=True)
        slope = sv.coeffs[1]
        d_dw = -sv.adjoints[0] / slope
    else:
        sv = net.derivatives(t_star, 1)
        slope = sv.coeffs[1]
        d_dw = None
    return InverseResult(t_star=t_star, residual=float(residual[0]),
                         iterations=int(iterations[0]), d_du=1.0 / slope,
                         d_dweights=d_dw)


def solve_decreasing(eval_fn, target, t_min=0.0, tol: float = DEFAULT_TOL,
                     max_iter: int = DEFAULT_MAX_ITER):
    """Roots of g_i(t) = target_i for smooth decreasing g_i with g_i(t_min) >= target_i.

    eval_fn(t, idx) must return (values, slopes) for the points named by
    idx.  Plain Newton with a maintained bracket and bisection fallback;
    used for conditional quantile solves where g is a derivative ratio
    rather than phi itself.
    """
    target = np.atleast_1d(np.asarray(target, dtype=float))
    n = target.size
    lo = np.broadcast_to(np.asarray(t_min, dtype=float), (n,)).copy()
    hi = np.maximum(2.0 * lo, 1.0)
    need = np.arange(n)
    for _ in range(_MAX_DOUBLINGS):
        vals, _ = eval_fn(hi[need], need)
        still = vals >= target[need]
        if not still.any():
            break
        need = need[still]
        hi[need] *= 2.0
    else:
        raise ConvergenceError("bracketing failed in decreasing solve")
    t = lo.copy()
    live = np.arange(n)
    for _ in range(max_iter):
        vals, slopes = eval_fn(t[live], live)
        f = vals - target[live]
        done = np.abs(f) <= tol
        pos = f > 0.0
        lo_idx = live[pos]
        lo[lo_idx] = np.maximum(lo[lo_idx], t[lo_idx])
        hi_idx = live[~pos]
        hi[hi_idx] = np.minimum(hi[hi_idx], t[hi_idx])
        with np.errstate(divide="ignore", invalid="ignore"):
            t_new = t[live] - f / slopes
        bad = (~np.isfinite(t_new)) | (t_new <= lo[live]) | (t_new >= hi[live])
        t_new[bad] = 0.5 * (lo[live][bad] + hi[live][bad])
        keep = ~done
        t[live[keep]] = t_new[keep]
        live = live[keep]
        if live.size == 0:
            break
    else:
        raise ConvergenceError(f"decreasing solve did not converge within {max_iter} iterations")
    return t
