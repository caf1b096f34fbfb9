"""Layered exponential-mixture generator network.

The generator phi is built from layers of units.  The input layer is the
constant 1.  Unit i of a hidden layer multiplies exp(-rate_i * t) by a
convex combination of the previous layer's units; the output is a convex
combination of the last hidden layer (no decay of its own).  Every unit is
therefore a mixture of negative exponentials, so phi is completely
monotone, phi(0) = 1, and phi is a valid Archimedean generator in any
dimension.

Constraints are kept by construction through raw weights: decay rates are
exp(raw) > 0 and each combination row is softmax(raw row), which is
non-negative and sums to one.  The flat weight layout is all combination
weights followed by all rate weights, layer-major, row-major.
"""

from __future__ import annotations

import json
import math
import os

import numpy as np

from .errors import CapacityError
from .series import MAX_ORDER, SeriesValue, exp_decay_stack, leibniz, leibniz_vjp

MODEL_FORMAT_VERSION = 1
MAX_MIXTURE_ATOMS = 1_000_000


def _softmax_rows(m: np.ndarray) -> np.ndarray:
    z = np.exp(m - m.max(axis=1, keepdims=True))
    return z / z.sum(axis=1, keepdims=True)


class _Tape:
    """Recorded intermediates of one batch forward pass."""

    __slots__ = ("t", "layers", "last")

    def __init__(self, t, layers, last):
        self.t = t
        self.layers = layers  # per hidden layer: (input stacks, combined, exp stacks)
        self.last = last      # last hidden layer's output stacks


class GeneratorNetwork:
    """Archimedean generator represented as a layered exponential mixture.

    raw_mix: list of L+1 matrices; entry i has shape (width of layer i+1,
    width of layer i) with layer 0 the constant input (width 1) and layer
    L+1 the output (width 1).  raw_rate: list of L vectors, one decay rate
    per hidden unit.  Derived weights: mix_weights[i] = row softmax of
    raw_mix[i], decay_rates[i] = exp(raw_rate[i]).
    """

    __slots__ = ("raw_mix", "raw_rate", "mix_weights", "decay_rates")

    def __init__(self, raw_mix, raw_rate):
        raw_mix = [np.array(m, dtype=float) for m in raw_mix]
        raw_rate = [np.array(v, dtype=float) for v in raw_rate]
        if len(raw_mix) != len(raw_rate) + 1:
            raise ValueError("need one mix matrix per layer plus the output layer")
        if len(raw_rate) < 1:
            raise ValueError("need at least one hidden layer")
        prev_width = 1
        for i, m in enumerate(raw_mix):
            if m.ndim != 2 or m.shape[1] != prev_width:
                raise ValueError(f"mix matrix {i} has shape {m.shape}, expected (*, {prev_width})")
            if m.shape[0] < 1:
                raise ValueError(f"mix matrix {i} has no rows")
            if not np.all(np.isfinite(m)):
                raise ValueError(f"mix matrix {i} has non-finite entries")
            prev_width = m.shape[0]
        if prev_width != 1:
            raise ValueError("output layer must have width 1")
        for i, v in enumerate(raw_rate):
            if v.shape != (raw_mix[i].shape[0],):
                raise ValueError(f"rate vector {i} has shape {v.shape}, expected ({raw_mix[i].shape[0]},)")
            if not np.all(np.isfinite(v)):
                raise ValueError(f"rate vector {i} has non-finite entries")
        for m in raw_mix:
            m.setflags(write=False)
        for v in raw_rate:
            v.setflags(write=False)
        self.raw_mix = raw_mix
        self.raw_rate = raw_rate
        self.mix_weights = [_softmax_rows(m) for m in raw_mix]
        with np.errstate(over="ignore"):  # inf rates surface as degeneracy downstream
            self.decay_rates = [np.exp(v) for v in raw_rate]

    @property
    def depth(self) -> int:
        return len(self.raw_rate)

    @property
    def widths(self) -> tuple[int, ...]:
        return tuple(m.shape[0] for m in self.raw_mix[:-1])

    @property
    def n_weights(self) -> int:
        return sum(m.size for m in self.raw_mix) + sum(v.size for v in self.raw_rate)

    def weights(self) -> np.ndarray:
        """Flat raw weight vector: mix entries then rate entries, layer-major."""
        return np.concatenate([m.ravel() for m in self.raw_mix]
                              + [v.ravel() for v in self.raw_rate])

    def replace_weights(self, flat: np.ndarray) -> "GeneratorNetwork":
        """New network with the same architecture and the given flat weights."""
        flat = np.asarray(flat, dtype=float)
        if flat.shape != (self.n_weights,):
            raise ValueError(f"expected {self.n_weights} weights, got {flat.shape}")
        pos = 0
        raw_mix = []
        for m in self.raw_mix:
            raw_mix.append(flat[pos:pos + m.size].reshape(m.shape))
            pos += m.size
        raw_rate = []
        for v in self.raw_rate:
            raw_rate.append(flat[pos:pos + v.size])
            pos += v.size
        return GeneratorNetwork(raw_mix, raw_rate)

    # -- forward / backward ------------------------------------------------

    def _check_t(self, t: np.ndarray) -> None:
        if t.ndim != 1:
            raise ValueError("t must be a 1-d array")
        if not np.all(np.isfinite(t)) or np.any(t < 0):
            raise ValueError("t values must be finite and >= 0")

    def stacks(self, t, order: int) -> np.ndarray:
        """Derivative stacks of phi at each t: shape (len(t), order+1)."""
        out, _ = self._forward(np.asarray(t, dtype=float), order, want_tape=False)
        return out

    def _forward(self, t: np.ndarray, order: int, want_tape: bool):
        self._check_t(t)
        if order > MAX_ORDER:
            raise ValueError(f"derivative order {order} exceeds the engine limit {MAX_ORDER}")
        k1 = order + 1
        m = t.size
        zero = t == 0.0
        any_zero = bool(zero.any())
        cur = np.zeros((m, 1, k1))
        cur[:, 0, 0] = 1.0
        layers = [] if want_tape else None
        for li in range(self.depth):
            mix = self.mix_weights[li]
            comb = np.matmul(mix, cur)
            es = exp_decay_stack(self.decay_rates[li][None, :], t[:, None], order)
            out = leibniz(comb, es)
            if any_zero:
                # exp(0) == 1 and rows sum to 1, so unit values at t = 0 are
                # exactly 1 up to summation noise; pin them.
                out[zero, :, 0] = 1.0
            if want_tape:
                layers.append((cur, comb, es))
            cur = out
        w_out = self.mix_weights[-1][0]
        final = np.matmul(w_out, cur)
        if any_zero:
            final[zero, 0] = 1.0
        tape = _Tape(t, layers, cur) if want_tape else None
        return final, tape

    def _backward(self, tape: _Tape, seed: np.ndarray) -> np.ndarray:
        """Gradient of sum_points <seed, stack> over the flat raw weights."""
        g_mix = [np.zeros_like(m) for m in self.mix_weights]
        g_rate = [np.zeros_like(v) for v in self.decay_rates]
        w_out = self.mix_weights[-1][0]
        g_mix[-1][0] = np.tensordot(seed, tape.last, axes=([0, 1], [0, 2]))
        g = seed[:, None, :] * w_out[None, :, None]
        t_col = tape.t[:, None, None]
        for li in reversed(range(self.depth)):
            prev, comb, es = tape.layers[li]
            g_comb = leibniz_vjp(g, es)
            g_es = leibniz_vjp(g, comb)
            # d es[k] / d rate = -k*es[k-1] - t*es[k]
            d_rate = -t_col * es
            if es.shape[-1] > 1:
                k = np.arange(1, es.shape[-1], dtype=float)
                d_rate[..., 1:] -= k * es[..., :-1]
            g_rate[li] += np.sum(g_es * d_rate, axis=(0, 2))
            g_mix[li] += np.tensordot(g_comb, prev, axes=([0, 2], [0, 2]))
            g = np.matmul(self.mix_weights[li].T, g_comb)
        # chain through the reparameterizations
        flat = []
        for mix, gm in zip(self.mix_weights, g_mix):
            inner = np.sum(gm * mix, axis=1, keepdims=True)
            flat.append((mix * (gm - inner)).ravel())
        for rate, gr in zip(self.decay_rates, g_rate):
            flat.append(gr * rate)
        return np.concatenate(flat)

    def derivatives(self, t: float, order: int, want_adjoints: bool = False) -> SeriesValue:
        """Derivative stack of phi at a scalar t, optionally with weight adjoints."""
        t_arr = np.array([t], dtype=float)
        if not want_adjoints:
            out, _ = self._forward(t_arr, order, want_tape=False)
            return SeriesValue(out[0])
        out, tape = self._forward(t_arr, order, want_tape=True)
        rows = np.empty((order + 1, self.n_weights))
        seed = np.zeros((1, order + 1))
        for k in range(order + 1):
            seed[:] = 0.0
            seed[0, k] = 1.0
            rows[k] = self._backward(tape, seed)
        return SeriesValue(out[0], rows)

    def __call__(self, t) -> np.ndarray:
        """phi evaluated at an array of t values."""
        return self.stacks(np.atleast_1d(np.asarray(t, dtype=float)), 0)[:, 0]


class MixtureRepresentation:
    """Exact finite-mixture form of a network: phi(t) = sum_k w[k] exp(-r[k] t)."""

    __slots__ = ("weights", "rates")

    def __init__(self, weights, rates):
        w = np.asarray(weights, dtype=float)
        r = np.asarray(rates, dtype=float)
        if w.shape != r.shape or w.ndim != 1:
            raise ValueError("weights and rates must be matching 1-d arrays")
        if np.any(w <= 0):
            raise ValueError("mixture weights must be positive")
        if np.any(r < 0):
            raise ValueError("mixture rates must be >= 0")
        if abs(float(w.sum()) - 1.0) > 1e-12:
            raise ValueError("mixture weights must sum to 1 within 1e-12")
        w.setflags(write=False)
        r.setflags(write=False)
        self.weights = w
        self.rates = r

    @property
    def n_atoms(self) -> int:
        return self.weights.size

    def stacks(self, t, order: int, chunk: int = 4096) -> np.ndarray:
        """Closed-form derivative stacks: entry k is sum_a w_a (-r_a)^k e^(-r_a t)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.zeros((t.size, order + 1))
        for lo in range(0, self.n_atoms, chunk):
            w = self.weights[lo:lo + chunk]
            r = self.rates[lo:lo + chunk]
            es = exp_decay_stack(r[None, :], t[:, None], order)
            out += np.einsum("a,mak->mk", w, es)
        return out


def enumerate_mixture(net: GeneratorNetwork, max_atoms: int = MAX_MIXTURE_ATOMS) -> MixtureRepresentation:
    """Expand a network into its exact mixture of negative exponentials.

    Each root-to-output path contributes one atom whose weight is the
    product of combination weights along the path and whose rate is the sum
    of decay rates along it.  The atom count is the product of the hidden
    widths; counts above `max_atoms` are refused.
    """
    total = 1
    for w in net.widths:
        total *= w
    if total > max_atoms:
        raise CapacityError(f"mixture would have {total} atoms, cap is {max_atoms}")
    alphas = [np.array([1.0])]
    betas = [np.array([0.0])]
    for li in range(net.depth):
        mix = net.mix_weights[li]
        rates = net.decay_rates[li]
        new_alphas, new_betas = [], []
        for i in range(mix.shape[0]):
            new_alphas.append(np.concatenate([mix[i, j] * alphas[j] for j in range(mix.shape[1])]))
            new_betas.append(np.concatenate([betas[j] + rates[i] for j in range(mix.shape[1])]))
        alphas, betas = new_alphas, new_betas
    w_out = net.mix_weights[-1][0]
    weight = np.concatenate([w_out[j] * alphas[j] for j in range(w_out.size)])
    rate = np.concatenate(betas)
    return MixtureRepresentation(weight, rate)


def init_network(depth: int = 2, widths=(10, 10), seed: int = 0) -> GeneratorNetwork:
    """Fresh network with mix weights ~ U[0,1] and rate weights ~ U[0,2).

    Draw order is fixed (all mix matrices layer by layer, then all rate
    vectors) from a single counter-based stream, so a seed pins the
    initialization bit for bit.
    """
    widths = tuple(int(w) for w in widths)
    if depth != len(widths):
        raise ValueError("depth must equal len(widths)")
    if depth < 1 or any(w < 1 for w in widths):
        raise ValueError("need at least one hidden layer of width >= 1")
    rng = np.random.Generator(np.random.Philox(seed))
    shapes = [(widths[0], 1)]
    for i in range(1, depth):
        shapes.append((widths[i], widths[i - 1]))
    shapes.append((1, widths[-1]))
    raw_mix = [rng.uniform(0.0, 1.0, size=s) for s in shapes]
    raw_rate = [rng.uniform(0.0, 2.0, size=(w,)) for w in widths]
    return GeneratorNetwork(raw_mix, raw_rate)


# -- serialization ---------------------------------------------------------

def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _fmt_nested(a) -> str:
    if isinstance(a, np.ndarray) and a.ndim > 1:
        return "[" + ", ".join(_fmt_nested(row) for row in a) + "]"
    return "[" + ", ".join(_fmt(x) for x in np.asarray(a).ravel()) + "]"


def save_model(net: GeneratorNetwork, path: str) -> None:
    """Write the raw weights as JSON with round-trip-exact floats."""
    h = ", ".join(str(w) for w in net.widths)
    mix = "[" + ", ".join(_fmt_nested(m) for m in net.raw_mix) + "]"
    rate = "[" + ", ".join(_fmt_nested(v) for v in net.raw_rate) + "]"
    text = ("{\n"
            f'  "format_version": {MODEL_FORMAT_VERSION},\n'
            f'  "L": {net.depth},\n'
            f'  "H": [{h}],\n'
            f'  "phi_A": {mix},\n'
            f'  "phi_B": {rate}\n'
            "}\n")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def load_model(path: str) -> GeneratorNetwork:
    """Read a model written by save_model; rejects unknown format versions."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise ValueError(f"{os.path.basename(path)}: model file must hold a JSON object")
    version = doc.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model format_version {version!r}")
    for key in ("L", "H", "phi_A", "phi_B"):
        if key not in doc:
            raise ValueError(f"model file missing key {key!r}")
    depth = doc["L"]
    widths = doc["H"]
    if depth != len(widths):
        raise ValueError("model file: L does not match len(H)")
    raw_mix = [np.array(m, dtype=float) for m in doc["phi_A"]]
    raw_rate = [np.array(v, dtype=float) for v in doc["phi_B"]]
    net = GeneratorNetwork(raw_mix, raw_rate)
    if net.widths != tuple(widths):
        raise ValueError("model file: H does not match the weight shapes")
    return net
