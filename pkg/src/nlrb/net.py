"""Dense feed-forward networks on flat parameter vectors, plus Adam.

Parameters are stored layer-major: for each layer, the weight matrix
(out x in, row-major) followed by the bias vector. Hidden layers share one
activation; the output layer is always linear. Reverse-mode gradients are
provided with respect to both parameters and inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, TrainingError

ACTIVATIONS = ("identity", "tanh", "swish")
ACT_IDENTITY, ACT_TANH, ACT_SWISH = 0, 1, 2


def act_id(name: str) -> int:
    try:
        return ACTIVATIONS.index(name)
    except ValueError:
        raise ConfigError(f"unknown activation {name!r}; expected one of {ACTIVATIONS}") from None


def act_derivs(aid: int, z: np.ndarray, order: int) -> tuple[np.ndarray, ...]:
    """Elementwise activation value and derivatives up to ``order`` (<= 3)."""
    if aid == ACT_IDENTITY:
        out = (z, np.ones_like(z), np.zeros_like(z), np.zeros_like(z))
    elif aid == ACT_TANH:
        t = np.tanh(z)
        d1 = 1.0 - t * t
        d2 = -2.0 * t * d1
        d3 = -2.0 * d1 * d1 - 2.0 * t * d2
        out = (t, d1, d2, d3)
    elif aid == ACT_SWISH:
        s = 1.0 / (1.0 + np.exp(-z))
        s1 = s * (1.0 - s)
        s2 = s1 * (1.0 - 2.0 * s)
        s3 = s2 * (1.0 - 2.0 * s) - 2.0 * s1 * s1
        a = z * s
        d1 = s + z * s1
        d2 = 2.0 * s1 + z * s2
        d3 = 3.0 * s2 + z * s3
        out = (a, d1, d2, d3)
    else:
        raise ConfigError(f"unknown activation id {aid}")
    return out[: order + 1]


@dataclass(frozen=True)
class MlpSpec:
    """Architecture of a dense MLP: layer sizes and hidden activation."""

    layer_sizes: tuple[int, ...]
    activation: str = "tanh"

    def __post_init__(self):
        if len(self.layer_sizes) < 2:
            raise ConfigError("an MLP needs at least input and output layers")
        if any(s < 1 for s in self.layer_sizes):
            raise ConfigError(f"layer sizes must be >= 1, got {self.layer_sizes}")
        act_id(self.activation)
        object.__setattr__(self, "layer_sizes", tuple(int(s) for s in self.layer_sizes))

    @property
    def n_params(self) -> int:
        sizes = self.layer_sizes
        return sum((sizes[k] + 1) * sizes[k + 1] for k in range(len(sizes) - 1))

    @property
    def act_id(self) -> int:
        return act_id(self.activation)

    def asdict(self) -> dict:
        return {"layer_sizes": list(self.layer_sizes), "activation": self.activation}

    @classmethod
    def fromdict(cls, d: dict) -> "MlpSpec":
        return cls(tuple(d["layer_sizes"]), d["activation"])


def unflatten(spec: MlpSpec, params: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    """Split a flat parameter vector into per-layer (W, b) views."""
    params = np.asarray(params, dtype=float)
    if params.shape != (spec.n_params,):
        raise ConfigError(
            f"parameter vector has length {params.shape}, spec needs {spec.n_params}"
        )
    layers = []
    off = 0
    sizes = spec.layer_sizes
    for k in range(len(sizes) - 1):
        nin, nout = sizes[k], sizes[k + 1]
        w = params[off : off + nin * nout].reshape(nout, nin)
        off += nin * nout
        b = params[off : off + nout]
        off += nout
        layers.append((w, b))
    return layers


def flatten(spec: MlpSpec, layers: list[tuple[np.ndarray, np.ndarray]]) -> np.ndarray:
    out = np.empty(spec.n_params)
    off = 0
    for w, b in layers:
        out[off : off + w.size] = w.ravel()
        off += w.size
        out[off : off + b.size] = b
        off += b.size
    return out


def init_params(spec: MlpSpec, rng: np.random.Generator) -> np.ndarray:
    """Glorot-uniform weights, zero biases."""
    layers = []
    sizes = spec.layer_sizes
    for k in range(len(sizes) - 1):
        nin, nout = sizes[k], sizes[k + 1]
        bound = np.sqrt(6.0 / (nin + nout))
        layers.append((rng.uniform(-bound, bound, (nout, nin)), np.zeros(nout)))
    return flatten(spec, layers)


def _forward_cached(spec, params, x):
    layers = unflatten(spec, params)
    aid = spec.act_id
    a = np.asarray(x, dtype=float)
    cache = []  # (input, pre-activation) per layer
    last = len(layers) - 1
    for k, (w, b) in enumerate(layers):
        z = a @ w.T + b
        cache.append((a, z))
        a = z if k == last else act_derivs(aid, z, 0)[0]
    return a, cache


def forward(spec: MlpSpec, params: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Evaluate the network; x is an input vector (or batch of rows)."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != spec.layer_sizes[0]:
        raise ConfigError(
            f"input has size {x.shape[-1]}, spec expects {spec.layer_sizes[0]}"
        )
    y, _ = _forward_cached(spec, params, x)
    return y


def _backward(spec, params, x, upstream):
    x = np.asarray(x, dtype=float)
    upstream = np.asarray(upstream, dtype=float)
    single = x.ndim == 1
    xb = x[None, :] if single else x
    gb = upstream[None, :] if single else upstream
    if gb.shape[-1] != spec.layer_sizes[-1]:
        raise ConfigError(
            f"upstream has size {gb.shape[-1]}, spec outputs {spec.layer_sizes[-1]}"
        )
    _, cache = _forward_cached(spec, params, xb)
    layers = unflatten(spec, params)
    aid = spec.act_id
    grads = [None] * len(layers)
    g = gb
    for k in range(len(layers) - 1, -1, -1):
        a_in, z = cache[k]
        if k != len(layers) - 1:
            g = g * act_derivs(aid, z, 1)[1]
        w, _ = layers[k]
        grads[k] = (g.T @ a_in, g.sum(axis=0))
        g = g @ w
    gx = g[0] if single else g
    return flatten(spec, grads), gx


def grad_params(spec: MlpSpec, params, x, upstream) -> np.ndarray:
    """Gradient of upstream . output with respect to the flat parameters."""
    return _backward(spec, params, x, upstream)[0]


def grad_input(spec: MlpSpec, params, x, upstream) -> np.ndarray:
    """Gradient of upstream . output with respect to the input vector."""
    return _backward(spec, params, x, upstream)[1]


@dataclass
class AdamState:
    """Adam moments for one flat parameter vector."""

    m: np.ndarray
    v: np.ndarray
    t: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params: np.ndarray, lr: float = 1e-3, **kw) -> "AdamState":
        return cls(m=np.zeros_like(params), v=np.zeros_like(params), lr=lr, **kw)


def adam_step(state: AdamState, params: np.ndarray, grad: np.ndarray) -> np.ndarray:
    """One bias-corrected Adam update; rejects non-finite gradients.

    Mutates ``state`` in place and returns the updated parameter vector.
    """
    if grad.shape != params.shape:
        raise ConfigError("gradient and parameter shapes differ")
    if not np.all(np.isfinite(grad)):
        raise TrainingError("non-finite gradient, step rejected", epoch=state.t)
    state.t += 1
    state.m += (1.0 - state.beta1) * (grad - state.m)
    state.v += (1.0 - state.beta2) * (grad * grad - state.v)
    mhat = state.m / (1.0 - state.beta1**state.t)
    vhat = state.v / (1.0 - state.beta2**state.t)
    return params - state.lr * mhat / (np.sqrt(vhat) + state.eps)
