"""Small deterministic neural-network engine on top of numpy.

Tensors are plain ``float64`` ndarrays with the batch on axis 0. Layers are
channels-last (``(..., length, channels)`` or ``(..., height, width,
channels)``); every axis in front of the spatial axes is treated as batch, so
a 2D convolution over a ``(B, 800, 3, 3, C)`` tensor convolves each of the
800 time steps independently.

A network is an immutable list of :class:`LayerSpec` plus a per-sample input
shape. Parameters live in a separate ``{layer_index: {"W": ..., "b": ...}}``
mapping so they can be swapped, copied and serialized without touching the
architecture.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

KINDS = (
    "Conv1D",
    "Conv2D",
    "MaxPool1D",
    "MaxPool2D",
    "Upsample1D",
    "Upsample2D",
    "Dense",
    "Flatten",
    "Reshape",
    "Activation",
)
ACTIVATIONS = ("linear", "tanh", "relu", "sigmoid")

Params = dict[int, dict[str, np.ndarray]]


class ShapeError(ValueError):
    """Raised when a tensor does not fit the layer it is fed to."""

    def __init__(self, message: str, layer: int | None = None):
        self.layer = layer
        prefix = f"layer {layer}: " if layer is not None else ""
        super().__init__(prefix + message)


class NonFiniteError(FloatingPointError):
    pass


class MissingCacheError(RuntimeError):
    pass


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    filters: int = 0
    kernel: tuple[int, ...] = ()
    pool: tuple[int, ...] = ()
    units: int = 0
    activation: str = "linear"
    target_shape: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        nd = self.spatial_dims
        if self.kind.startswith("Conv"):
            if self.filters < 1:
                raise ValueError("convolution needs at least one filter")
            if len(self.kernel) != nd or min(self.kernel) < 1:
                raise ValueError(f"{self.kind} kernel must be {nd} extents >= 1")
        if self.kind.startswith(("MaxPool", "Upsample")):
            if len(self.pool) != nd or min(self.pool) < 1:
                raise ValueError(f"{self.kind} factors must be {nd} values >= 1")
        if self.kind == "Dense" and self.units < 1:
            raise ValueError("Dense output width must be >= 1")
        if self.kind == "Reshape" and (not self.target_shape or min(self.target_shape) < 1):
            raise ValueError("Reshape needs a positive target shape")

    @property
    def spatial_dims(self) -> int:
        if self.kind.endswith("1D"):
            return 1
        if self.kind.endswith("2D"):
            return 2
        return 0

    @property
    def has_params(self) -> bool:
        return self.kind in ("Conv1D", "Conv2D", "Dense")

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "filters": self.filters,
            "kernel": list(self.kernel),
            "pool": list(self.pool),
            "units": self.units,
            "activation": self.activation,
            "target_shape": list(self.target_shape),
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "LayerSpec":
        return cls(
            kind=d["kind"],
            filters=int(d.get("filters", 0)),
            kernel=tuple(d.get("kernel", ())),
            pool=tuple(d.get("pool", ())),
            units=int(d.get("units", 0)),
            activation=d.get("activation", "linear"),
            target_shape=tuple(d.get("target_shape", ())),
        )


# constructors that read like the architecture tables
def Conv1D(filters: int, kernel: int = 3, activation: str = "linear") -> LayerSpec:
    return LayerSpec("Conv1D", filters=filters, kernel=(kernel,), activation=activation)


def Conv2D(filters: int, kernel=(3, 3), activation: str = "linear") -> LayerSpec:
    return LayerSpec("Conv2D", filters=filters, kernel=tuple(kernel), activation=activation)


def MaxPool1D(factor: int = 2) -> LayerSpec:
    return LayerSpec("MaxPool1D", pool=(factor,))


def MaxPool2D(factors=(2, 2)) -> LayerSpec:
    return LayerSpec("MaxPool2D", pool=tuple(factors))


def Upsample1D(factor: int = 2) -> LayerSpec:
    return LayerSpec("Upsample1D", pool=(factor,))


def Upsample2D(factors=(2, 2)) -> LayerSpec:
    return LayerSpec("Upsample2D", pool=tuple(factors))


def Dense(units: int, activation: str = "linear") -> LayerSpec:
    return LayerSpec("Dense", units=units, activation=activation)


def Flatten() -> LayerSpec:
    return LayerSpec("Flatten")


def Reshape(*shape: int) -> LayerSpec:
    return LayerSpec("Reshape", target_shape=tuple(shape))


def Activation(name: str) -> LayerSpec:
    return LayerSpec("Activation", activation=name)


@dataclass(frozen=True)
class Network:
    input_shape: tuple[int, ...]
    layers: tuple[LayerSpec, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        object.__setattr__(self, "input_shape", tuple(int(s) for s in self.input_shape))
        object.__setattr__(self, "layers", tuple(self.layers))
        self.shapes()  # validates the whole chain up front

    def shapes(self) -> list[tuple[int, ...]]:
        """Per-sample output shape of every layer, in order."""
        out = []
        shape = self.input_shape
        for i, layer in enumerate(self.layers):
            shape = output_shape(layer, shape, i)
            out.append(shape)
        return out

    @property
    def output_shape(self) -> tuple[int, ...]:
        shapes = self.shapes()
        return shapes[-1] if shapes else self.input_shape

    def to_dict(self) -> dict[str, Any]:
        return {"input_shape": list(self.input_shape), "layers": [l.to_dict() for l in self.layers]}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Network":
        return cls(tuple(d["input_shape"]), tuple(LayerSpec.from_dict(l) for l in d["layers"]))


def output_shape(layer: LayerSpec, shape: tuple[int, ...], index: int | None = None) -> tuple[int, ...]:
    nd = layer.spatial_dims
    kind = layer.kind
    if kind.startswith(("Conv", "MaxPool", "Upsample")) and len(shape) < nd + 1:
        raise ShapeError(f"{kind} needs rank >= {nd + 1} per sample, got {shape}", index)
    if kind.startswith("Conv"):
        return shape[:-1] + (layer.filters,)
    if kind.startswith("MaxPool"):
        spatial = shape[-nd - 1 : -1]
        for s, p in zip(spatial, layer.pool):
            if s % p:
                raise ShapeError(f"extent {s} not divisible by pool factor {p}", index)
        return shape[: -nd - 1] + tuple(s // p for s, p in zip(spatial, layer.pool)) + shape[-1:]
    if kind.startswith("Upsample"):
        spatial = shape[-nd - 1 : -1]
        return shape[: -nd - 1] + tuple(s * p for s, p in zip(spatial, layer.pool)) + shape[-1:]
    if kind == "Dense":
        return shape[:-1] + (layer.units,)
    if kind == "Flatten":
        return (math.prod(shape),)
    if kind == "Reshape":
        if math.prod(layer.target_shape) != math.prod(shape):
            raise ShapeError(f"cannot reshape {shape} to {layer.target_shape}", index)
        return tuple(layer.target_shape)
    return shape


def param_shapes(layer: LayerSpec, in_shape: tuple[int, ...]) -> dict[str, tuple[int, ...]]:
    if layer.kind.startswith("Conv"):
        return {"W": tuple(layer.kernel) + (in_shape[-1], layer.filters), "b": (layer.filters,)}
    if layer.kind == "Dense":
        return {"W": (in_shape[-1], layer.units), "b": (layer.units,)}
    return {}


def count_parameters(network: Network) -> int:
    total = 0
    shape = network.input_shape
    for i, layer in enumerate(network.layers):
        total += sum(math.prod(s) for s in param_shapes(layer, shape).values())
        shape = output_shape(layer, shape, i)
    return total


def layer_parameter_counts(network: Network) -> list[int]:
    counts = []
    shape = network.input_shape
    for i, layer in enumerate(network.layers):
        counts.append(sum(math.prod(s) for s in param_shapes(layer, shape).values()))
        shape = output_shape(layer, shape, i)
    return counts


def init_params(network: Network, rng: np.random.Generator | int | None = 0, scheme: str = "uniform") -> Params:
    """Uniform fan-in initialisation, W ~ U(-sqrt(3/fan_in), sqrt(3/fan_in)), zero biases.

    ``scheme="zeros"`` gives an all-zero parameter set.
    """
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    params: Params = {}
    shape = network.input_shape
    for i, layer in enumerate(network.layers):
        shapes = param_shapes(layer, shape)
        if shapes:
            w_shape = shapes["W"]
            fan_in = math.prod(w_shape[:-1])
            if scheme == "zeros":
                w = np.zeros(w_shape)
            else:
                limit = math.sqrt(3.0 / fan_in)
                w = rng.uniform(-limit, limit, size=w_shape)
            params[i] = {"W": w, "b": np.zeros(shapes["b"])}
        shape = output_shape(layer, shape, i)
    return params


def copy_params(params: Params) -> Params:
    return {i: {k: v.copy() for k, v in p.items()} for i, p in params.items()}


# ---------------------------------------------------------------- activations


def _act(name: str, z: np.ndarray) -> np.ndarray:
    if name == "linear":
        return z
    if name == "tanh":
        return np.tanh(z)
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "sigmoid":
        return 0.5 * (1.0 + np.tanh(0.5 * z))
    raise ValueError(name)


def _act_grad(name: str, z: np.ndarray, a: np.ndarray, g: np.ndarray) -> np.ndarray:
    if name == "linear":
        return g
    if name == "tanh":
        return g * (1.0 - a * a)
    if name == "relu":
        return g * (z > 0)
    if name == "sigmoid":
        return g * a * (1.0 - a)
    raise ValueError(name)


# ---------------------------------------------------------------- convolution


def _pads(kernel: tuple[int, ...]) -> list[tuple[int, int]]:
    # "same" padding; extra element goes on the right for even kernels
    return [((k - 1) // 2, k - 1 - (k - 1) // 2) for k in kernel]


def _offsets(kernel, spatial):
    for offs in np.ndindex(*kernel):
        yield (slice(None),) + tuple(slice(o, o + s) for o, s in zip(offs, spatial))


def _conv_forward(x: np.ndarray, W: np.ndarray, b: np.ndarray, nd: int):
    # Two equivalent schedules, picked so the shifted copies run over the
    # narrower of the input/output channel counts:
    #   cin <= cout: gather shifted inputs (im2col) and do one matmul
    #   cin >  cout: one matmul on the padded input, then shift-add outputs
    kernel = W.shape[:nd]
    k = int(np.prod(kernel))
    cin, cout = W.shape[-2], W.shape[-1]
    lead = x.shape[: -nd - 1]
    spatial = x.shape[-nd - 1 : -1]
    xb = x.reshape((-1,) + spatial + (cin,))
    xp = np.pad(xb, [(0, 0)] + _pads(kernel) + [(0, 0)])
    rows = xb.shape[0] * math.prod(spatial)
    if cin <= cout:
        cols = np.empty((rows, k, cin))
        for j, sl in enumerate(_offsets(kernel, spatial)):
            cols[:, j, :] = xp[sl].reshape(rows, cin)
        out = cols.reshape(rows, k * cin) @ W.reshape(k * cin, cout)
    else:
        wb = W.reshape(k, cin, cout).transpose(1, 0, 2).reshape(cin, k * cout)
        yp = (xp.reshape(-1, cin) @ wb).reshape(xp.shape[:-1] + (k, cout))
        out = np.zeros((xb.shape[0],) + spatial + (cout,))
        for j, sl in enumerate(_offsets(kernel, spatial)):
            out += yp[sl + (j,)]
        out = out.reshape(rows, cout)
    out += b
    return out.reshape(lead + spatial + (cout,)), xp


def _conv_backward(x_shape, xp: np.ndarray, W: np.ndarray, g: np.ndarray, nd: int):
    kernel = W.shape[:nd]
    k = int(np.prod(kernel))
    cin, cout = W.shape[-2], W.shape[-1]
    spatial = x_shape[-nd - 1 : -1]
    n = xp.shape[0]
    rows = n * math.prod(spatial)
    g2 = g.reshape(rows, cout)
    dxp = np.zeros_like(xp)
    if cin <= cout:
        cols = np.empty((rows, k, cin))
        for j, sl in enumerate(_offsets(kernel, spatial)):
            cols[:, j, :] = xp[sl].reshape(rows, cin)
        dW = (cols.reshape(rows, k * cin).T @ g2).reshape(W.shape)
        dcols = (g2 @ W.reshape(k * cin, cout).T).reshape((n,) + spatial + (k, cin))
        for j, sl in enumerate(_offsets(kernel, spatial)):
            dxp[sl] += dcols[..., j, :]
    else:
        # gcols[q, j] = g[q - offset_j], laid out on the padded grid
        gcols = np.zeros(xp.shape[:-1] + (k, cout))
        gs = g.reshape((n,) + spatial + (cout,))
        for j, sl in enumerate(_offsets(kernel, spatial)):
            gcols[sl + (j,)] = gs
        gcols = gcols.reshape(-1, k * cout)
        dwb = xp.reshape(-1, cin).T @ gcols
        dW = dwb.reshape(cin, k, cout).transpose(1, 0, 2).reshape(W.shape)
        wb = W.reshape(k, cin, cout).transpose(1, 0, 2).reshape(cin, k * cout)
        dxp = (gcols @ wb.T).reshape(xp.shape)
    inner = (slice(None),) + tuple(slice(lo, lo + s) for (lo, _), s in zip(_pads(kernel), spatial))
    dx = dxp[inner].reshape(x_shape)
    return dW, g2.sum(axis=0), dx


# ---------------------------------------------------------------- pooling


def _blocked(x: np.ndarray, pool: tuple[int, ...]):
    """View (..., s1, s2, C) as (N, o1, o2, C, p1*p2) windows."""
    nd = len(pool)
    spatial = x.shape[-nd - 1 : -1]
    c = x.shape[-1]
    xb = x.reshape((-1,) + spatial + (c,))
    split = []
    for s, p in zip(spatial, pool):
        split += [s // p, p]
    xb = xb.reshape((xb.shape[0],) + tuple(split) + (c,))
    # move window axes (odd positions 2,4,..) to the end
    outer = [0] + [1 + 2 * i for i in range(nd)] + [1 + 2 * nd]
    inner = [2 + 2 * i for i in range(nd)]
    xb = xb.transpose(outer + inner)
    return xb.reshape(xb.shape[: nd + 2] + (math.prod(pool),))


def _unblocked(xw: np.ndarray, pool: tuple[int, ...], x_shape) -> np.ndarray:
    nd = len(pool)
    n = xw.shape[0]
    outs = xw.shape[1 : nd + 1]
    c = xw.shape[nd + 1]
    xw = xw.reshape((n,) + outs + (c,) + tuple(pool))
    # inverse of the permutation used in _blocked
    perm = [0]
    for i in range(nd):
        perm += [1 + i, nd + 2 + i]
    perm += [nd + 1]
    return xw.transpose(perm).reshape(x_shape)


def _pool_forward(x: np.ndarray, pool: tuple[int, ...]):
    nd = len(pool)
    xw = _blocked(x, pool)
    idx = np.argmax(xw, axis=-1)
    out = np.take_along_axis(xw, idx[..., None], axis=-1)[..., 0]
    lead = x.shape[: -nd - 1]
    spatial = tuple(s // p for s, p in zip(x.shape[-nd - 1 : -1], pool))
    return out.reshape(lead + spatial + x.shape[-1:]), idx


def _pool_backward(x_shape, idx: np.ndarray, pool: tuple[int, ...], g: np.ndarray) -> np.ndarray:
    gw = np.zeros(idx.shape + (math.prod(pool),))
    np.put_along_axis(gw, idx[..., None], g.reshape(idx.shape)[..., None], axis=-1)
    return _unblocked(gw, pool, x_shape)


def _upsample_forward(x: np.ndarray, pool: tuple[int, ...]) -> np.ndarray:
    nd = len(pool)
    for ax, p in zip(range(x.ndim - nd - 1, x.ndim - 1), pool):
        x = np.repeat(x, p, axis=ax)
    return x


def _upsample_backward(x_shape, pool: tuple[int, ...], g: np.ndarray) -> np.ndarray:
    return _blocked(g, pool).sum(axis=-1).reshape(x_shape)


# ---------------------------------------------------------------- forward / backward


@dataclass
class ForwardCache:
    network: Network
    entries: list[dict[str, Any]]
    batch: int


def _check_input(network: Network, x: np.ndarray) -> None:
    if x.ndim != len(network.input_shape) + 1 or tuple(x.shape[1:]) != network.input_shape:
        raise ShapeError(f"input shape {x.shape[1:]} does not match network input {network.input_shape}", 0)


def forward(network: Network, params: Params, x: np.ndarray, keep_cache: bool = True):
    """Run ``x`` (batch-first) through the network; returns ``(output, cache)``."""
    x = np.asarray(x, dtype=np.float64)
    _check_input(network, x)
    batch = x.shape[0]
    entries: list[dict[str, Any]] = []
    for i, layer in enumerate(network.layers):
        kind = layer.kind
        entry: dict[str, Any] = {"x_shape": x.shape}
        if kind.startswith("Conv"):
            p = params[i]
            z, xp = _conv_forward(x, p["W"], p["b"], layer.spatial_dims)
            a = _act(layer.activation, z)
            entry.update(xp=xp, z=z, a=a)
        elif kind == "Dense":
            p = params[i]
            x2 = x.reshape(-1, x.shape[-1])
            z = (x2 @ p["W"] + p["b"]).reshape(x.shape[:-1] + (layer.units,))
            a = _act(layer.activation, z)
            entry.update(x=x2, z=z, a=a)
        elif kind.startswith("MaxPool"):
            a, idx = _pool_forward(x, layer.pool)
            entry.update(idx=idx)
        elif kind.startswith("Upsample"):
            a = _upsample_forward(x, layer.pool)
        elif kind in ("Flatten", "Reshape"):
            a = x.reshape((batch,) + output_shape(layer, x.shape[1:], i))
        else:  # Activation
            z = x
            a = _act(layer.activation, z)
            entry.update(z=z, a=a)
        if not np.all(np.isfinite(a)):
            raise NonFiniteError(f"layer {i} ({kind}) produced non-finite values")
        if keep_cache:
            entries.append(entry)
        x = a
    return x, ForwardCache(network, entries, batch) if keep_cache else None


def predict(network: Network, params: Params, x: np.ndarray, batch_size: int = 64) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] == 0:
        return np.zeros((0,) + network.output_shape)
    outs = [forward(network, params, x[s : s + batch_size], keep_cache=False)[0] for s in range(0, x.shape[0], batch_size)]
    return np.concatenate(outs, axis=0)


def backward(network: Network, params: Params, cache: ForwardCache | None, grad_out: np.ndarray):
    """Reverse pass. Returns ``(param_grads, input_grad)``."""
    if cache is None or cache.network is not network or len(cache.entries) != len(network.layers):
        raise MissingCacheError("backward needs the cache of a forward pass on the same network")
    g = np.asarray(grad_out, dtype=np.float64)
    expected = (cache.batch,) + network.output_shape
    if g.shape != expected:
        raise ShapeError(f"output gradient shape {g.shape} != forward output {expected}")
    grads: Params = {}
    for i in range(len(network.layers) - 1, -1, -1):
        layer = network.layers[i]
        e = cache.entries[i]
        kind = layer.kind
        if kind.startswith("Conv"):
            gz = _act_grad(layer.activation, e["z"], e["a"], g)
            dW, db, g = _conv_backward(e["x_shape"], e["xp"], params[i]["W"], gz, layer.spatial_dims)
            grads[i] = {"W": dW, "b": db}
        elif kind == "Dense":
            gz = _act_grad(layer.activation, e["z"], e["a"], g).reshape(-1, layer.units)
            grads[i] = {"W": e["x"].T @ gz, "b": gz.sum(axis=0)}
            g = (gz @ params[i]["W"].T).reshape(e["x_shape"])
        elif kind.startswith("MaxPool"):
            g = _pool_backward(e["x_shape"], e["idx"], layer.pool, g)
        elif kind.startswith("Upsample"):
            g = _upsample_backward(e["x_shape"], layer.pool, g)
        elif kind in ("Flatten", "Reshape"):
            g = g.reshape(e["x_shape"])
        else:
            g = _act_grad(layer.activation, e["z"], e["a"], g)
    return grads, g


def mse(pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean squared error over every element, with its gradient w.r.t. ``pred``."""
    diff = pred - target
    return float(np.mean(diff * diff)), 2.0 * diff / diff.size


# ---------------------------------------------------------------- optimizer


@dataclass
class AdamState:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: Params = field(default_factory=dict)
    v: Params = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")


def optimizer_step(state: AdamState, params: Params, grads: Params) -> Params:
    """One adaptive-moment update, applied to ``params`` in place."""
    for i, g in grads.items():
        for k, gv in g.items():
            if gv.shape != params[i][k].shape:
                raise ShapeError(f"gradient {k} shape {gv.shape} != parameter {params[i][k].shape}", i)
            if not np.all(np.isfinite(gv)):
                raise NonFiniteError(f"non-finite gradient in layer {i} {k}")
    state.step += 1
    t = state.step
    c1 = 1.0 - state.beta1**t
    c2 = 1.0 - state.beta2**t
    for i, g in grads.items():
        m = state.m.setdefault(i, {k: np.zeros_like(v) for k, v in params[i].items()})
        v = state.v.setdefault(i, {k: np.zeros_like(v) for k, v in params[i].items()})
        for k, gv in g.items():
            m[k] *= state.beta1
            m[k] += (1.0 - state.beta1) * gv
            v[k] *= state.beta2
            v[k] += (1.0 - state.beta2) * gv * gv
            params[i][k] -= state.learning_rate * (m[k] / c1) / (np.sqrt(v[k] / c2) + state.eps)
    return params
