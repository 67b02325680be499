"""Tanh MLP with exact derivatives up to second order in its inputs.

The network propagates second-order Taylor jets (value, gradient, Hessian
with respect to the inputs) through every layer, so PDE residuals can be
evaluated without finite differences.  A hand-written reverse pass over the
jet propagation yields exact parameter gradients of any scalar loss built
from the jets, including mixed derivatives such as d/dtheta of d2phi/dx2.

All arithmetic is float64.  Parameters are initialized Glorot-uniform with
zero biases from numpy's PCG64 generator (``np.random.default_rng(seed)``),
so a (layer_sizes, seed) pair pins every weight bit-exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import CheckpointError, ConfigError, InputError
from .tape import Var


@dataclass(frozen=True)
class Jet2:
    """Value, gradient, and symmetric Hessian of a scalar output at a point."""

    value: float
    grad: np.ndarray   # (d,)
    hess: np.ndarray   # (d, d)


@dataclass(frozen=True)
class MlpParams:
    """Weights and biases of a tanh MLP (identity output layer)."""

    layer_sizes: tuple
    weights: list       # per layer, shape (n_out, n_in)
    biases: list        # per layer, shape (n_out,)
    activation: str = "tanh"
    seed: int = 0

    def __post_init__(self):
        sizes = self.layer_sizes
        if len(self.weights) != len(sizes) - 1 or len(self.biases) != len(sizes) - 1:
            raise ConfigError("weight/bias count does not match layer_sizes")
        for ell, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (sizes[ell + 1], sizes[ell]):
                raise ConfigError(
                    f"layer {ell}: weight shape {w.shape} != "
                    f"({sizes[ell + 1]}, {sizes[ell]})")
            if b.shape != (sizes[ell + 1],):
                raise ConfigError(f"layer {ell}: bias shape {b.shape} invalid")

    @property
    def d_in(self):
        return self.layer_sizes[0]


@dataclass
class ParamGrads:
    """Gradient structure congruent to :class:`MlpParams`."""

    weights: list
    biases: list

    def as_flat(self):
        parts = [w.ravel() for w in self.weights] + [b.ravel() for b in self.biases]
        return np.concatenate(parts)


def init_params(layer_sizes, seed):
    """Glorot-uniform weights, zero biases; deterministic in (sizes, seed)."""
    sizes = tuple(int(s) for s in layer_sizes)
    if len(sizes) < 2:
        raise ConfigError("layer_sizes needs at least an input and an output layer")
    if any(s <= 0 for s in sizes):
        raise ConfigError(f"layer_sizes must be positive, got {sizes}")
    if sizes[-1] != 1:
        raise ConfigError("output layer must have exactly one unit")

    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return MlpParams(layer_sizes=sizes, weights=weights, biases=biases, seed=int(seed))


# ---------------------------------------------------------------------------
# forward jet propagation
# ---------------------------------------------------------------------------

def _triangle(d):
    return tuple((i, k) for i in range(d) for k in range(i, d))


@dataclass
class _LayerRecord:
    """Per-layer state kept for the reverse pass.

    Jets are stacked channel-first as (C, n, m) with C = 1 + d + P:
    channel 0 the value, channels 1..d the gradient, then one channel per
    requested Hessian pair (i, k), i <= k.  One GEMM moves all channels
    through a linear layer at once; pair channels never couple, so a
    subset (e.g. only the entries a PDE residual reads) propagates at a
    fraction of the full cost.
    """

    jets_in: np.ndarray       # (C, n, m_in), input jets of the layer
    z: np.ndarray             # (C, n, m_out), pre-activation jets
    t: np.ndarray = None      # tanh(z value) on hidden layers
    s: np.ndarray = None      # 1 - t^2
    outer: np.ndarray = None  # (P, n, m_out): dz_i * dz_k per pair


def _linear(jets, w):
    c, n, _ = jets.shape
    return (jets.reshape(c * n, -1) @ w.T).reshape(c, n, w.shape[0])


def _forward(params, x, keep_records=False, pairs=None):
    """Propagate (value, grad, hess-pair) jets through the network."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[1] != params.d_in:
        raise InputError(
            f"expected input of shape (n, {params.d_in}), got {x.shape}")
    n, d = x.shape
    if pairs is None:
        pairs = _triangle(d)
    n_channels = 1 + d + len(pairs)
    n_layers = len(params.weights)

    jets = np.zeros((n_channels, n, d))
    jets[0] = x
    for i in range(d):
        jets[1 + i, :, i] = 1.0      # seed the identity jacobian

    records = []
    for ell, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = _linear(jets, w)
        z[0] += b
        if ell < n_layers - 1:
            t = np.tanh(z[0])
            s = np.multiply(t, t)
            np.subtract(1.0, s, out=s)
            g = z[1:1 + d]
            outer = np.empty_like(z[1 + d:])
            for idx, (i, k) in enumerate(pairs):
                np.multiply(g[i], g[k], out=outer[idx])
            nxt = np.empty_like(z)
            nxt[0] = t
            np.multiply(g, s, out=nxt[1:1 + d])
            np.multiply(z[1 + d:], s, out=nxt[1 + d:])
            nxt[1 + d:] += (-2.0 * t * s) * outer
            if keep_records:
                records.append(_LayerRecord(jets_in=jets, z=z, t=t, s=s,
                                            outer=outer))
            jets = nxt
        else:
            if keep_records:
                records.append(_LayerRecord(jets_in=jets, z=z))
            jets = z

    value = jets[0, :, 0]
    grad = jets[1:1 + d, :, 0].T.copy()
    hess_pairs = jets[1 + d:, :, 0].copy()      # (P, n)
    return value, grad, hess_pairs, records


def _pairs_to_hess(hess_pairs, pairs, d):
    """(P, n) pair channels to symmetric (n, d, d) matrices."""
    n = hess_pairs.shape[1]
    hess = np.empty((n, d, d))
    for idx, (i, k) in enumerate(pairs):
        hess[:, i, k] = hess_pairs[idx]
        hess[:, k, i] = hess_pairs[idx]
    return hess


def forward_jet_batch(params, x):
    """Values, gradients, and Hessians of the network at a batch of points."""
    value, grad, hess_pairs, _ = _forward(params, x)
    d = params.d_in
    return value, grad, _pairs_to_hess(hess_pairs, _triangle(d), d)


def forward_jet(params, x):
    """Exact Jet2 of the network output at a single point."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    value, grad, hess = forward_jet_batch(params, x[None, :])
    return Jet2(value=float(value[0]), grad=grad[0], hess=hess[0])


# ---------------------------------------------------------------------------
# reverse pass over the jet propagation
# ---------------------------------------------------------------------------

def _backward(params, records, vbar, gbar, hbar_pairs, pairs):
    """Exact dL/dtheta given cotangents of (value, grad, hess-pair) channels."""
    n_layers = len(params.weights)
    n, d = gbar.shape
    n_channels = 1 + d + len(pairs)

    jbar = np.zeros((n_channels, n, 1))
    jbar[0, :, 0] = vbar
    jbar[1:1 + d, :, 0] = gbar.T
    jbar[1 + d:, :, 0] = hbar_pairs

    grads_w = [None] * n_layers
    grads_b = [None] * n_layers

    for ell in reversed(range(n_layers)):
        rec = records[ell]
        w = params.weights[ell]

        if rec.t is not None:
            t, s, outer = rec.t, rec.s, rec.outer
            spp = -2.0 * t * s                 # sigma''
            sppp = s * (6.0 * t * t - 2.0)     # sigma'''
            g = rec.z[1:1 + d]
            zh = rec.z[1 + d:]
            gbar_in = jbar[1:1 + d]
            hbar_in = jbar[1 + d:]

            zbar = np.empty_like(jbar)
            zbar[0] = (jbar[0] * s
                       + (gbar_in * g).sum(axis=0) * spp
                       + (hbar_in * (sppp * outer + spp * zh)).sum(axis=0))
            np.multiply(gbar_in, s, out=zbar[1:1 + d])
            # each pair channel feeds both of its gradient factors
            for idx, (i, k) in enumerate(pairs):
                hs = hbar_in[idx] * spp
                zbar[1 + i] += hs * g[k]
                zbar[1 + k] += hs * g[i]
            np.multiply(hbar_in, s, out=zbar[1 + d:])
        else:
            zbar = jbar

        c, _, m_out = zbar.shape
        m_in = rec.jets_in.shape[2]
        grads_b[ell] = zbar[0].sum(axis=0)     # bias feeds the value channel only
        grads_w[ell] = (zbar.reshape(c * n, m_out).T
                        @ rec.jets_in.reshape(c * n, m_in))
        jbar = (zbar.reshape(c * n, m_out) @ w).reshape(c, n, m_in)

    return ParamGrads(weights=grads_w, biases=grads_b)


class JetLeaves:
    """Componentwise tape leaves for the jets of a batch of points.

    ``value`` is a Var over the (n,) output values, ``grad[i]`` a Var over
    the i-th input derivative, and ``hess[i][j]`` (== ``hess[j][i]``, the
    same object) a Var over the (i,j) second derivative; entries outside
    the propagated pair set are None.  Loss functions combine these with
    plain numpy constants.
    """

    def __init__(self, value, grad, hess_pairs, pairs):
        d = grad.shape[1]
        self.d = d
        self.pairs = pairs
        self.value = Var(value)
        self.grad = [Var(grad[:, i]) for i in range(d)]
        self.hess = [[None] * d for _ in range(d)]
        for idx, (i, k) in enumerate(pairs):
            v = Var(hess_pairs[idx])
            self.hess[i][k] = v
            self.hess[k][i] = v

    def seeds(self, n):
        """Assemble (vbar, gbar, hbar_pairs) arrays from accumulated cotangents."""
        def pulled(var, shape):
            if var.grad is None:
                return np.zeros(shape)
            return np.broadcast_to(var.grad, shape).astype(float)

        vbar = pulled(self.value, (n,))
        gbar = np.stack([pulled(g, (n,)) for g in self.grad], axis=1)
        hbar = np.stack([pulled(self.hess[i][k], (n,)) for i, k in self.pairs])
        return vbar, gbar, hbar


def loss_gradient(params, x, loss_fn, hess_pairs=None):
    """Exact parameter gradient of ``loss_fn`` evaluated on batch jets.

    ``loss_fn`` receives a :class:`JetLeaves` and must return a scalar tape
    ``Var`` (or a plain float for constant losses).  ``hess_pairs`` limits
    the propagated second derivatives to the listed (i, k) index pairs
    (defaults to all of them).  Returns ``(loss_value, ParamGrads)``.
    """
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        raise InputError("loss_gradient needs a non-empty batch")
    pairs = _triangle(params.d_in) if hess_pairs is None \
        else tuple((min(i, k), max(i, k)) for i, k in hess_pairs)
    value, grad, hp, records = _forward(params, x, keep_records=True, pairs=pairs)
    n = x.shape[0]

    leaves = JetLeaves(value, grad, hp, pairs)
    loss = loss_fn(leaves)
    if not isinstance(loss, Var):
        zero = ParamGrads(weights=[np.zeros_like(w) for w in params.weights],
                          biases=[np.zeros_like(b) for b in params.biases])
        return float(loss), zero
    loss.backward()

    vbar, gbar, hbar = leaves.seeds(n)
    return float(loss.value), _backward(params, records, vbar, gbar, hbar, pairs)


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

def _floats_to_hex(arr):
    return [float(v).hex() for v in np.asarray(arr, dtype=float).ravel()]


def _hex_to_array(items, shape, what):
    try:
        vals = [float.fromhex(s) for s in items]
    except (TypeError, ValueError) as exc:
        raise CheckpointError(f"{what}: malformed hex float") from exc
    expected = int(np.prod(shape))
    if len(vals) != expected:
        raise CheckpointError(
            f"{what}: payload has {len(vals)} values, header implies {expected}")
    return np.array(vals, dtype=float).reshape(shape)


def save_checkpoint(params, meta, path):
    """Write params + string metadata as JSON with hex-float payloads."""
    meta = {str(k): str(v) for k, v in (meta or {}).items()}
    doc = {
        "layer_sizes": list(params.layer_sizes),
        "activation": params.activation,
        "weights": [_floats_to_hex(w) for w in params.weights],
        "biases": [_floats_to_hex(b) for b in params.biases],
        "seed": int(params.seed),
        "meta": meta,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_checkpoint(path):
    """Read a checkpoint; returns (MlpParams, meta). Round-trip is bit-exact."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"{path}: not valid JSON") from exc

    try:
        sizes = tuple(int(s) for s in doc["layer_sizes"])
        raw_w = doc["weights"]
        raw_b = doc["biases"]
        seed = int(doc["seed"])
        meta = dict(doc.get("meta", {}))
        activation = doc.get("activation", "tanh")
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"{path}: missing or malformed field") from exc

    if activation != "tanh":
        raise CheckpointError(f"unsupported activation {activation!r}")
    if len(raw_w) != len(sizes) - 1 or len(raw_b) != len(sizes) - 1:
        raise CheckpointError("layer count mismatch between header and payload")

    weights, biases = [], []
    for ell in range(len(sizes) - 1):
        shape = (sizes[ell + 1], sizes[ell])
        weights.append(_hex_to_array(raw_w[ell], shape, f"weights[{ell}]"))
        biases.append(_hex_to_array(raw_b[ell], (sizes[ell + 1],), f"biases[{ell}]"))

    params = MlpParams(layer_sizes=sizes, weights=weights, biases=biases, seed=seed)
    return params, meta
