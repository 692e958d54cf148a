"""CAE architectures (Types I, II, III) and the latent/state FFNNs.

Type I  -- one path signal per row, 1D convolutions over time.
Type II -- all nine paths side by side, 2D convolutions over (time, path).
Type III -- paths folded into a 3x3 (actuator, receiver) grid; 2D convolutions
act on the grid only, the time axis is carried through untouched and the
latent is an ``N x D`` "latent signal".
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import nn
from .nn import Conv1D, Conv2D, Dense, Flatten, MaxPool1D, MaxPool2D, Reshape, Upsample1D, Upsample2D

HIDDEN = "tanh"
N_PATHS = 9
SWEEP_LATENT_WIDTHS = (2, 3, 4, 5, 6, 7)
SWEEP_FILTERS = (8, 16, 32, 64, 128)


@dataclass(frozen=True)
class CaeSpec:
    model_type: int
    latent_width: int = 7
    first_filters: int = 64
    signal_length: int = 800

    def __post_init__(self) -> None:
        if self.model_type not in (1, 2, 3):
            raise ValueError(f"model_type must be 1, 2 or 3, got {self.model_type}")
        if self.latent_width < 1:
            raise ValueError("latent width must be positive")
        if self.first_filters < 2 or self.first_filters % 2:
            raise ValueError("first_filters must be an even number >= 2")

    @property
    def second_filters(self) -> int:
        return self.first_filters // 2

    @property
    def row_shape(self) -> tuple[int, ...]:
        """Shape of one input row without the channel axis."""
        n = self.signal_length
        return {1: (n,), 2: (n, N_PATHS), 3: (n, 3, 3)}[self.model_type]

    @property
    def input_shape(self) -> tuple[int, ...]:
        return self.row_shape + (1,)

    @property
    def latent_shape(self) -> tuple[int, ...]:
        if self.model_type == 3:
            return (self.signal_length, self.latent_width)
        return (self.latent_width,)

    @property
    def state_width(self) -> int:
        # Type I rows carry their path, so the state vector gets a third entry
        return 3 if self.model_type == 1 else 2

    def to_dict(self) -> dict:
        return {
            "model_type": self.model_type,
            "latent_width": self.latent_width,
            "first_filters": self.first_filters,
            "signal_length": self.signal_length,
        }


def _check_divisible(n: int, by: int, what: str) -> None:
    if n % by:
        raise nn.ShapeError(f"{what} of {n} is not divisible by {by}")


def cae_networks(spec: CaeSpec) -> tuple[nn.Network, nn.Network]:
    f1, f2, d, n = spec.first_filters, spec.second_filters, spec.latent_width, spec.signal_length
    if spec.model_type == 1:
        _check_divisible(n, 4, "signal length")
        q = n // 4
        enc = [
            Conv1D(f1, 3, HIDDEN),
            MaxPool1D(2),
            Conv1D(f2, 3, HIDDEN),
            MaxPool1D(2),
            Flatten(),
            Dense(32, HIDDEN),
            Dense(d),
        ]
        dec = [
            Dense(32, HIDDEN),
            Dense(q * f2, HIDDEN),
            Reshape(q, f2),
            Upsample1D(2),
            Conv1D(f1, 3, HIDDEN),
            Upsample1D(2),
            Conv1D(1, 3),
        ]
    elif spec.model_type == 2:
        _check_divisible(n, 4, "signal length")
        q = n // 4
        enc = [
            Conv2D(f1, (3, 3), HIDDEN),
            MaxPool2D((2, 3)),
            Conv2D(f2, (3, 3), HIDDEN),
            MaxPool2D((2, 3)),
            Flatten(),
            Dense(32, HIDDEN),
            Dense(d),
        ]
        dec = [
            Dense(32, HIDDEN),
            Dense(q * f2, HIDDEN),
            Reshape(q, 1, f2),
            Upsample2D((2, 3)),
            Conv2D(f1, (3, 3), HIDDEN),
            Upsample2D((2, 3)),
            Conv2D(1, (3, 3)),
        ]
    else:
        enc = [
            Conv2D(f1, (3, 3), HIDDEN),
            MaxPool2D((3, 3)),
            Conv2D(f2, (3, 3), HIDDEN),
            Reshape(n, f2),
            Dense(d),
        ]
        dec = [
            Dense(32, HIDDEN),
            Reshape(n, 1, 1, 32),
            Conv2D(f1, (3, 3), HIDDEN),
            Upsample2D((3, 3)),
            Conv2D(1, (3, 3)),
        ]
    return nn.Network(spec.input_shape, tuple(enc)), nn.Network(spec.latent_shape, tuple(dec))


@dataclass
class Cae:
    """Encoder/decoder pair with their parameter sets."""

    spec: CaeSpec
    encoder: nn.Network
    decoder: nn.Network
    enc_params: nn.Params = field(repr=False)
    dec_params: nn.Params = field(repr=False)

    def _rows(self, x: np.ndarray) -> tuple[np.ndarray, bool]:
        x = np.asarray(x, dtype=np.float64)
        row = self.spec.row_shape
        if x.shape == row or x.shape == self.spec.input_shape:
            x = x[None]
            single = True
        else:
            single = False
        if x.shape[1:] == row:
            x = x[..., None]
        if x.shape[1:] != self.spec.input_shape:
            raise nn.ShapeError(
                f"Type {self.spec.model_type} rows must be {row}, got {x.shape[1:]}"
            )
        return x, single

    def encode(self, x: np.ndarray) -> np.ndarray:
        """Latent for one row or a batch of rows (channel axis optional)."""
        x, single = self._rows(x)
        z = nn.predict(self.encoder, self.enc_params, x)
        return z[0] if single else z

    def decode(self, z: np.ndarray) -> np.ndarray:
        """Reconstruction (with trailing channel axis) for one latent or a batch."""
        z = np.asarray(z, dtype=np.float64)
        single = z.shape == self.spec.latent_shape
        if single:
            z = z[None]
        if z.shape[1:] != self.spec.latent_shape:
            raise nn.ShapeError(f"latent must be {self.spec.latent_shape}, got {z.shape[1:]}")
        y = nn.predict(self.decoder, self.dec_params, z)
        return y[0] if single else y

    def reconstruct(self, x: np.ndarray) -> np.ndarray:
        """encode -> decode, returned in the row layout (no channel axis)."""
        return self.decode(self.encode(x))[..., 0]


def build_cae(spec: CaeSpec, seed: int | None = 0, scheme: str = "uniform") -> Cae:
    enc, dec = cae_networks(spec)
    rng = np.random.default_rng(seed)
    return Cae(spec, enc, dec, nn.init_params(enc, rng, scheme), nn.init_params(dec, rng, scheme))


def count_parameters(model, which: str = "all") -> int:
    """Exact weight + bias count of a CAE (``encoder``/``decoder``/``all``) or a network."""
    if isinstance(model, nn.Network):
        return nn.count_parameters(model)
    if isinstance(model, CaeSpec):
        enc, dec = cae_networks(model)
    else:
        enc, dec = model.encoder, model.decoder
    if which == "encoder":
        return nn.count_parameters(enc)
    if which == "decoder":
        return nn.count_parameters(dec)
    if which == "all":
        return nn.count_parameters(enc) + nn.count_parameters(dec)
    raise ValueError(f"which must be encoder, decoder or all, not {which!r}")


def layer_table(spec: CaeSpec) -> list[tuple[str, str, tuple[int, ...], int]]:
    """``(part, kind, output shape, parameters)`` rows, input layers included."""
    rows = []
    for part, net in zip(("encoder", "decoder"), cae_networks(spec)):
        if part == "encoder":
            rows.append((part, "Input", net.input_shape, 0))
        for layer, shape, count in zip(net.layers, net.shapes(), nn.layer_parameter_counts(net)):
            rows.append((part, layer.kind, shape, count))
    return rows


# ---------------------------------------------------------------- FFNNs


@dataclass(frozen=True)
class FfnnSpec:
    input_width: int
    output_width: int
    hidden_width: int = 64
    hidden_depth: int = 5
    activation: str = HIDDEN

    def __post_init__(self) -> None:
        if min(self.input_width, self.output_width, self.hidden_width) < 1:
            raise ValueError("FFNN widths must be positive")
        if self.hidden_depth < 1:
            raise ValueError("FFNN depth must be >= 1")

    def mirror(self) -> "FfnnSpec":
        return replace(self, input_width=self.output_width, output_width=self.input_width)

    def to_dict(self) -> dict:
        return {
            "input_width": self.input_width,
            "output_width": self.output_width,
            "hidden_width": self.hidden_width,
            "hidden_depth": self.hidden_depth,
            "activation": self.activation,
        }


def ffnn_pair(cae_spec: CaeSpec, hidden_width: int = 64, hidden_depth: int = 5) -> tuple[FfnnSpec, FfnnSpec]:
    """Estimation (latent -> state) and generation (state -> latent) specs."""
    flat = int(np.prod(cae_spec.latent_shape))
    est = FfnnSpec(flat, cae_spec.state_width, hidden_width, hidden_depth)
    return est, est.mirror()


def ffnn_network(spec: FfnnSpec) -> nn.Network:
    layers = [Dense(spec.hidden_width, spec.activation) for _ in range(spec.hidden_depth)]
    layers.append(Dense(spec.output_width))
    return nn.Network((spec.input_width,), tuple(layers))


@dataclass
class Ffnn:
    """Dense stack with fixed affine scaling on both ends.

    Inputs are standardized and outputs de-standardized with statistics
    frozen from the training set, so the network itself sees unit-scale data
    while callers work with raw latents and raw state values.
    """

    spec: FfnnSpec
    network: nn.Network
    params: nn.Params = field(repr=False)
    x_mean: np.ndarray = None
    x_scale: np.ndarray = None
    y_mean: np.ndarray = None
    y_scale: np.ndarray = None

    def __post_init__(self) -> None:
        if self.x_mean is None:
            self.x_mean = np.zeros(self.spec.input_width)
        if self.x_scale is None:
            self.x_scale = np.ones(self.spec.input_width)
        if self.y_mean is None:
            self.y_mean = np.zeros(self.spec.output_width)
        if self.y_scale is None:
            self.y_scale = np.ones(self.spec.output_width)

    def fit_scaling(self, x: np.ndarray, y: np.ndarray) -> None:
        self.x_mean, self.x_scale = _moments(x)
        self.y_mean, self.y_scale = _moments(y)

    def scale_inputs(self, x: np.ndarray) -> np.ndarray:
        return (x - self.x_mean) / self.x_scale

    def scale_targets(self, y: np.ndarray) -> np.ndarray:
        return (y - self.y_mean) / self.y_scale

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        x = x.reshape(1 if single else x.shape[0], -1)
        if x.shape[1] != self.spec.input_width:
            raise nn.ShapeError(f"FFNN expects width {self.spec.input_width}, got {x.shape[1]}")
        y = nn.predict(self.network, self.params, self.scale_inputs(x)) * self.y_scale + self.y_mean
        return y[0] if single else y


def _moments(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64).reshape(len(a), -1)
    sd = a.std(axis=0)
    # constant columns (e.g. a single path in a subset) keep unit scale
    return a.mean(axis=0), np.where(sd > 1e-12, sd, 1.0)


def build_ffnn(spec: FfnnSpec, seed: int | None = 0, scheme: str = "uniform") -> Ffnn:
    net = ffnn_network(spec)
    return Ffnn(spec, net, nn.init_params(net, np.random.default_rng(seed), scheme))


def encode(cae: Cae, row: np.ndarray) -> np.ndarray:
    return cae.encode(row)


def decode(cae: Cae, latent: np.ndarray) -> np.ndarray:
    return cae.decode(latent)
