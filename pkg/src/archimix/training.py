"""Maximum-likelihood training of the generator network.

Both losses share one gradient scheme: run the batch forward pass once at
every needed site, then back-propagate analytic seed vectors through the
recorded tape.  Coordinates enter through the inverted values t_i =
phi^{-1}(u_i), whose weight-gradient comes from the implicit function
theorem, dt/dw = -(d phi/d w)(t) / phi'(t); that turns into an extra seed
on the value entry of each t-site stack.

The optimizer is plain SGD with classical momentum
(v <- mu v - eta g, w <- w + v) over seeded shuffled batches, so a config
plus seed pins the whole weight trajectory bit for bit.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .copula import EvalSettings
from .data import CensoredDataset, Dataset
from .errors import (ConvergenceError, DataError, InvariantViolationError,
                     NumericDegeneracyError)
from .inversion import invert_values
from .network import GeneratorNetwork


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer protocol; the defaults are the reference protocol."""

    learning_rate: float = 1e-5
    momentum: float = 0.9
    batch_size: int = 200
    epochs: int = 40_000
    seed: int = 0
    eval_every: int = 100


@dataclass
class TrainReport:
    """Outcome of a fit: final weights plus the learning trajectory."""

    net: GeneratorNetwork
    train_nll: list[float] = field(default_factory=list)
    test_nll: float | None = None
    seconds: float = 0.0
    epochs_run: int = 0
    aborted: bool = False
    abort_reason: str | None = None


def _interior(points: np.ndarray, what: str) -> None:
    if np.any(points <= 0.0) or np.any(points >= 1.0):
        idx = int(np.argmax(np.any((points <= 0.0) | (points >= 1.0), axis=1)))
        raise DataError(f"{what} must be strictly inside the unit cube (row {idx})")


def _invert(gen, u: np.ndarray, settings: EvalSettings) -> np.ndarray:
    inverse = getattr(gen, "inverse", None)
    if inverse is not None:
        return inverse(u)
    t, _, _ = invert_values(gen, u, settings.inversion_tol, settings.newton_max_iter)
    return t


def _stacks_maybe_tape(gen, t: np.ndarray, order: int, want_tape: bool):
    if not want_tape:
        return gen.stacks(t, order), None
    if not isinstance(gen, GeneratorNetwork):
        raise ValueError("loss gradients need a generator network")
    return gen._forward(t, order, want_tape=True)


def loss_pointwise(net, points: np.ndarray,
                   settings: EvalSettings | None = None, want_grad: bool = True):
    """Mean negative log copula density of the rows, and its weight gradient.

    Returns (value, grad) with grad None when want_grad is False.  The
    value path works for any generator; gradients need a network.
    """
    settings = settings if settings is not None else EvalSettings()
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2:
        raise ValueError("points must be a (n, d) matrix")
    n, d = pts.shape
    if d < 2:
        raise ValueError("points must have d >= 2 columns")
    if d > settings.derivative_cap:
        raise ValueError(f"dimension {d} exceeds the derivative cap {settings.derivative_cap}")
    _interior(pts, "training points")
    v = np.clip(pts, settings.boundary_clamp, 1.0)
    t_flat = _invert(net, v.ravel(), settings)
    t = t_flat.reshape(n, d)
    s = np.sum(np.sort(t, axis=1), axis=1)
    f_t, tape_t = _stacks_maybe_tape(net, t_flat, 2, want_grad)
    f_s, tape_s = _stacks_maybe_tape(net, s, d + 1, want_grad)
    slope = f_t[:, 1].reshape(n, d)
    curve = f_t[:, 2].reshape(n, d)
    top = f_s[:, d]
    top_next = f_s[:, d + 1]
    signed = top if d % 2 == 0 else -top
    if np.any(signed <= 0.0):
        idx = int(np.argmax(signed <= 0.0))
        raise NumericDegeneracyError(
            f"(-1)^d phi^(d) collapsed to {signed[idx]:.3e} at batch row {idx}")
    if np.any(slope >= 0.0):
        raise NumericDegeneracyError("phi' is not negative at a training point")
    nll = float(np.mean(-np.log(signed) + np.sum(np.log(-slope), axis=1)))
    if not want_grad:
        return nll, None
    seed_s = np.zeros((n, d + 2))
    seed_s[:, d] = -1.0 / (top * n)
    dnll_dt = (-top_next / top)[:, None] + curve / slope
    seed_t = np.zeros((n * d, 3))
    seed_t[:, 1] = 1.0 / (slope.ravel() * n)
    seed_t[:, 0] = (dnll_dt / (-slope)).ravel() / n
    grad = net._backward(tape_s, seed_s) + net._backward(tape_t, seed_t)
    return nll, grad


def loss_censored(net, lower: np.ndarray, upper: np.ndarray,
                  settings: EvalSettings | None = None, want_grad: bool = True):
    """Mean negative log rectangle probability of the boxes, and its gradient.

    Rectangle probabilities come from inclusion-exclusion over the 2^d
    vertices; a box the model gives non-positive probability is an infinite
    loss and is reported as a data error.  The value path works for any
    generator; gradients need a network.
    """
    settings = settings if settings is not None else EvalSettings()
    lo = np.asarray(lower, dtype=float)
    hi = np.asarray(upper, dtype=float)
    if lo.ndim != 2 or lo.shape != hi.shape:
        raise ValueError("bounds must be matching (n, d) matrices")
    n, d = lo.shape
    if d < 2:
        raise ValueError("boxes must have d >= 2 coordinates")
    if np.any(lo < 0.0) or np.any(hi > 1.0) or np.any(lo > hi):
        raise DataError("boxes must satisfy 0 <= lower <= upper <= 1")
    if np.any(lo >= hi):
        idx = int(np.argmax(np.any(lo >= hi, axis=1)))
        raise DataError(f"box with an empty side at row {idx} has zero probability")
    zero_lo = lo == 0.0
    t_lo = np.zeros((n, d))
    t_hi = np.zeros((n, d))
    need_lo = ~zero_lo
    need_hi = hi < 1.0
    vals = np.concatenate([np.clip(lo[need_lo], settings.boundary_clamp, 1.0),
                           np.clip(hi[need_hi], settings.boundary_clamp, 1.0)])
    t_all = _invert(net, vals, settings)
    k = int(need_lo.sum())
    t_lo[need_lo] = t_all[:k]
    t_hi[need_hi] = t_all[k:]

    n_vert = 1 << d
    bits = ((np.arange(n_vert)[:, None] >> np.arange(d)[None, :]) & 1).astype(bool)  # (V, d); True -> lower
    t_choice = np.where(bits[None, :, :], t_lo[:, None, :], t_hi[:, None, :])  # (n, V, d)
    dead = np.any(bits[None, :, :] & zero_lo[:, None, :], axis=2)  # (n, V)
    s = np.sum(np.sort(t_choice, axis=2), axis=2)
    sign = np.where(bits.sum(axis=1) % 2 == 0, 1.0, -1.0)

    f_s, tape_s = _stacks_maybe_tape(net, s.ravel(), 1, want_grad)
    c = f_s[:, 0].reshape(n, n_vert)
    c_slope = f_s[:, 1].reshape(n, n_vert)
    c = np.where(dead, 0.0, c)
    p = c @ sign
    if np.any(p <= 0.0):
        idx = int(np.argmax(p <= 0.0))
        raise DataError(f"box at row {idx} has non-positive probability {p[idx]:.3e}")
    nll = float(np.mean(-np.log(p)))
    if not want_grad:
        return nll, None

    dnll_dc = np.where(dead, 0.0, -sign[None, :] / (p[:, None] * n))  # (n, V)
    seed_s = np.zeros((n * n_vert, 2))
    seed_s[:, 0] = dnll_dc.ravel()
    grad = net._backward(tape_s, seed_s)

    # through the inverted bounds: dC_v/dt_(j, chosen bound) = phi'(s_v)
    w_vertex = np.where(dead, 0.0, dnll_dc * c_slope)  # (n, V)
    w_lo = np.einsum("nv,vj->nj", w_vertex, bits.astype(float))
    w_hi = np.einsum("nv,vj->nj", w_vertex, (~bits).astype(float))
    sites = np.concatenate([t_lo.ravel(), t_hi.ravel()])
    f_b, tape_b = net._forward(sites, 1, want_tape=True)
    b_slope = f_b[:, 1]
    w_bound = np.concatenate([w_lo.ravel(), w_hi.ravel()])
    # zero-coordinate lower bounds carry no gradient
    w_bound[:n * d][zero_lo.ravel()] = 0.0
    seed_b = np.zeros((2 * n * d, 2))
    seed_b[:, 0] = w_bound / (-b_slope)
    grad += net._backward(tape_b, seed_b)
    return nll, grad


def _loss_for(net, data, settings, want_grad):
    if isinstance(data, CensoredDataset):
        return loss_censored(net, data.lower, data.upper, settings, want_grad)
    values = data.values if isinstance(data, Dataset) else np.asarray(data, dtype=float)
    return loss_pointwise(net, values, settings, want_grad)


def evaluate_nll(gen, data, settings: EvalSettings | None = None) -> float:
    """NLL of a dataset under a generator (pointwise or censored by data type)."""
    value, _ = _loss_for(gen, data, settings, want_grad=False)
    return value


def _take(data, idx):
    if isinstance(data, CensoredDataset):
        return CensoredDataset(data.lower[idx], data.upper[idx], data.noise_level)
    if isinstance(data, Dataset):
        return data.values[idx]
    return np.asarray(data, dtype=float)[idx]


def fit(net: GeneratorNetwork, train, test=None, cfg: TrainConfig | None = None,
        settings: EvalSettings | None = None, telemetry_path: str | None = None,
        log_every: int = 0) -> TrainReport:
    """SGD-with-momentum maximum likelihood over seeded shuffled batches.

    train is a Dataset (pointwise density loss) or CensoredDataset
    (rectangle-probability loss); test, when given, is scored with its own
    matching loss.  The momentum update steps on the batch-sum gradient
    (batch size times the mean-loss gradient), which is what the default
    learning rate is calibrated to.  A non-finite loss or gradient, or a
    model so degenerate the loss cannot be evaluated, aborts the run and
    returns the last weights that were still scoreable, flagged in the
    report.  Telemetry rows (epoch, train NLL, test NLL,
    seconds) go to telemetry_path at the eval_every cadence.
    """
    cfg = cfg if cfg is not None else TrainConfig()
    if cfg.batch_size < 1 or cfg.epochs < 0:
        raise ValueError("batch_size must be >= 1 and epochs >= 0")
    n = train.n if isinstance(train, (Dataset, CensoredDataset)) else len(train)
    rng = np.random.Generator(np.random.Philox(int(cfg.seed)))
    w = net.weights()
    vel = np.zeros_like(w)
    cur = net
    report = TrainReport(net=cur)
    telemetry = open(telemetry_path, "w", encoding="utf-8") if telemetry_path else None
    t0 = time.perf_counter()
    try:
        if telemetry:
            telemetry.write("epoch,train_nll,test_nll,seconds\n")

        def emit(epoch, train_nll):
            if not telemetry:
                return
            test_nll = (evaluate_nll(cur, test, settings) if test is not None else None)
            tn = format(test_nll, ".17g") if test_nll is not None else ""
            telemetry.write(f"{epoch},{format(train_nll, '.17g')},{tn},"
                            f"{time.perf_counter() - t0:.3f}\n")
            telemetry.flush()

        for epoch in range(1, cfg.epochs + 1):
            perm = rng.permutation(n)
            total = 0.0
            for start in range(0, n, cfg.batch_size):
                idx = perm[start:start + cfg.batch_size]
                try:
                    value, grad = _loss_for(cur, _take(train, idx), settings, True)
                except (NumericDegeneracyError, InvariantViolationError,
                        DataError, ConvergenceError) as exc:
                    report.aborted = True
                    report.abort_reason = f"epoch {epoch}: {exc}"
                    break
                if not np.isfinite(value) or not np.all(np.isfinite(grad)):
                    report.aborted = True
                    report.abort_reason = f"epoch {epoch}: non-finite loss or gradient"
                    break
                vel = cfg.momentum * vel - cfg.learning_rate * (idx.size * grad)
                w = w + vel
                cur = cur.replace_weights(w)
                total += value * idx.size
            if report.aborted:
                break
            epoch_nll = total / n
            report.train_nll.append(epoch_nll)
            report.epochs_run = epoch
            if log_every and epoch % log_every == 0:
                print(f"epoch {epoch}: train nll {epoch_nll:.6f}", flush=True)
            if cfg.eval_every and epoch % cfg.eval_every == 0:
                emit(epoch, epoch_nll)
        report.net = cur
        if test is not None and not report.aborted:
            report.test_nll = evaluate_nll(cur, test, settings)
        if report.train_nll and (not cfg.eval_every or report.epochs_run % max(cfg.eval_every, 1) != 0):
            emit(report.epochs_run, report.train_nll[-1])
    finally:
        if telemetry:
            telemetry.close()
    report.seconds = time.perf_counter() - t0
    return report


def fit_parametric(family_name: str, theta0: float, train: Dataset, test: Dataset | None = None,
                   cfg: TrainConfig | None = None, settings: EvalSettings | None = None):
    """Maximum-likelihood parameter of a classical family by the same protocol.

    SGD with momentum on theta, using a central finite-difference gradient
    of the batch NLL (the families have closed-form stacks, so batches are
    cheap).  Returns (theta_star, test_nll, history).
    """
    from .families import make_family

    cfg = cfg if cfg is not None else TrainConfig()
    theta = float(theta0)
    lo_dom = {"clayton": 1e-6, "frank": 1e-6, "joe": 1.0, "gumbel": 1.0}.get(family_name.lower())
    if lo_dom is None:
        raise ValueError(f"cannot fit family {family_name!r}")
    rng = np.random.Generator(np.random.Philox(int(cfg.seed)))
    vel = 0.0
    n = train.n
    history = []

    def nll_at(th, rows):
        return loss_pointwise(make_family(family_name, th), rows, settings, want_grad=False)[0]

    for epoch in range(1, cfg.epochs + 1):
        perm = rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            rows = train.values[perm[start:start + cfg.batch_size]]
            h = 1e-6 * max(1.0, abs(theta))
            up = nll_at(min(theta + h, 1e6), rows)
            dn = nll_at(max(theta - h, lo_dom), rows)
            g = (up - dn) / (2.0 * h)
            if not np.isfinite(g):
                raise NumericDegeneracyError(f"non-finite parametric gradient at theta {theta}")
            vel = cfg.momentum * vel - cfg.learning_rate * (rows.shape[0] * g)
            theta = max(theta + vel, lo_dom)
            total += nll_at(theta, rows) * rows.shape[0]
        history.append(total / n)
    test_nll = None
    if test is not None:
        test_nll = loss_pointwise(make_family(family_name, theta), test.values,
                                  settings, want_grad=False)[0]
    return theta, test_nll, history
