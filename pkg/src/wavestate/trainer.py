"""Training loops for the CAE and the FFNNs, and the hyperparameter sweeps."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import nn
from .models import (
    SWEEP_FILTERS,
    SWEEP_LATENT_WIDTHS,
    Cae,
    CaeSpec,
    Ffnn,
    FfnnSpec,
    build_cae,
    build_ffnn,
)

log = logging.getLogger(__name__)


class DivergenceError(FloatingPointError):
    def __init__(self, epoch: int, detail: str = ""):
        self.epoch = epoch
        super().__init__(f"training diverged at epoch {epoch}" + (f": {detail}" if detail else ""))


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 60
    batch_size: int = 16
    learning_rate: float = 1e-3
    seed: int = 0
    patience: int | None = None

    def __post_init__(self) -> None:
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch size must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")


CAE_DEFAULTS = TrainConfig(epochs=60, batch_size=2)
FFNN_DEFAULTS = TrainConfig(epochs=300, batch_size=4)


@dataclass
class TrainResult:
    model: Cae | Ffnn
    history: list[float]  # loss before training, then after each epoch
    best_epoch: int
    seconds_per_epoch: float
    heldout_rmse: float | None = None

    @property
    def best_history(self) -> list[float]:
        return list(np.minimum.accumulate(self.history))


def _batches(n: int, batch_size: int, rng: np.random.Generator):
    order = rng.permutation(n)
    for s in range(0, n, batch_size):
        yield order[s : s + batch_size]


def _fit(nets, params, x, y, loss_of, config: TrainConfig, eval_fn):
    """Generic minibatch loop with best-so-far tracking.

    ``nets``/``params`` are parallel lists of networks chained head to tail.
    """
    rng = np.random.default_rng(config.seed)
    opt = [nn.AdamState(config.learning_rate) for _ in nets]
    history = [eval_fn(params)]
    best = (history[0], 0, [nn.copy_params(p) for p in params])
    stall = 0
    t0 = time.perf_counter()
    for epoch in range(1, config.epochs + 1):
        for idx in _batches(len(x), config.batch_size, rng):
            try:
                h = x[idx]
                caches = []
                for net, p in zip(nets, params):
                    h, c = nn.forward(net, p, h)
                    caches.append(c)
                loss, g = loss_of(h, y[idx])
                if not math.isfinite(loss):
                    raise DivergenceError(epoch, "non-finite batch loss")
                for k in range(len(nets) - 1, -1, -1):
                    grads, g = nn.backward(nets[k], params[k], caches[k], g)
                    nn.optimizer_step(opt[k], params[k], grads)
            except nn.NonFiniteError as exc:
                raise DivergenceError(epoch, str(exc)) from exc
        try:
            loss = eval_fn(params)
        except nn.NonFiniteError as exc:
            raise DivergenceError(epoch, str(exc)) from exc
        if not math.isfinite(loss):
            raise DivergenceError(epoch, "non-finite epoch loss")
        history.append(loss)
        if loss < best[0]:
            best = (loss, epoch, [nn.copy_params(p) for p in params])
            stall = 0
        else:
            stall += 1
            if config.patience is not None and stall >= config.patience:
                log.info("early stop at epoch %d", epoch)
                break
        log.debug("epoch %d loss %.6g", epoch, loss)
    elapsed = time.perf_counter() - t0
    per_epoch = elapsed / max(1, len(history) - 1)
    return best, history, per_epoch


def _with_channel(spec: CaeSpec, data: np.ndarray) -> np.ndarray:
    data = np.asarray(data, dtype=np.float64)
    if data.shape[1:] == spec.row_shape:
        data = data[..., None]
    if data.shape[1:] != spec.input_shape:
        raise nn.ShapeError(f"tensors {data.shape[1:]} do not match Type {spec.model_type} rows {spec.row_shape}")
    return data


def reconstruction_mse(cae: Cae, data: np.ndarray, params=None, batch_size: int = 32) -> float:
    data = _with_channel(cae.spec, data)
    enc_p, dec_p = params if params is not None else (cae.enc_params, cae.dec_params)
    total = 0.0
    for s in range(0, len(data), batch_size):
        xb = data[s : s + batch_size]
        z, _ = nn.forward(cae.encoder, enc_p, xb, keep_cache=False)
        y, _ = nn.forward(cae.decoder, dec_p, z, keep_cache=False)
        total += float(np.sum((y - xb) ** 2))
    return total / data.size


def train_cae(spec: CaeSpec | Cae, tensors, config: TrainConfig = CAE_DEFAULTS) -> TrainResult:
    """Fit the autoencoder on reconstruction MSE; returns the best epoch's weights."""
    cae = spec if isinstance(spec, Cae) else build_cae(spec, seed=config.seed)
    data = _with_channel(cae.spec, getattr(tensors, "data", tensors))
    params = [cae.enc_params, cae.dec_params]
    (loss, epoch, best_params), history, per_epoch = _fit(
        [cae.encoder, cae.decoder],
        params,
        data,
        data,
        nn.mse,
        config,
        lambda p: reconstruction_mse(cae, data, p),
    )
    trained = Cae(cae.spec, cae.encoder, cae.decoder, best_params[0], best_params[1])
    log.info("CAE type %d: mse %.4g -> %.4g (best epoch %d)", cae.spec.model_type, history[0], loss, epoch)
    return TrainResult(trained, history, epoch, per_epoch)


def rmse(predicted, actual) -> float:
    p = np.asarray(predicted, dtype=np.float64)
    a = np.asarray(actual, dtype=np.float64)
    if p.shape != a.shape:
        raise ValueError(f"shape mismatch {p.shape} vs {a.shape}")
    if p.size == 0:
        raise ValueError("rmse of an empty sequence")
    return float(np.sqrt(np.mean((p - a) ** 2)))


def train_ffnn(
    spec: FfnnSpec | Ffnn,
    inputs: np.ndarray,
    targets: np.ndarray,
    config: TrainConfig = FFNN_DEFAULTS,
    heldout: tuple[np.ndarray, np.ndarray] | None = None,
) -> TrainResult:
    """Regress ``targets`` on ``inputs``; history is training RMSE per epoch."""
    model = spec if isinstance(spec, Ffnn) else build_ffnn(spec, seed=config.seed)
    x = np.asarray(inputs, dtype=np.float64).reshape(len(inputs), -1)
    y = np.asarray(targets, dtype=np.float64).reshape(len(targets), -1)
    if x.shape[1] != model.spec.input_width or y.shape[1] != model.spec.output_width:
        raise nn.ShapeError(
            f"FFNN {model.spec.input_width}->{model.spec.output_width} given {x.shape[1]}->{y.shape[1]}"
        )

    if not isinstance(spec, Ffnn):
        model.fit_scaling(x, y)
    xs, ys = model.scale_inputs(x), model.scale_targets(y)

    def train_rmse(p):
        return rmse(nn.predict(model.network, p[0], xs) * model.y_scale + model.y_mean, y)

    (loss, epoch, best), history, per_epoch = _fit(
        [model.network], [model.params], xs, ys, nn.mse, config, train_rmse
    )
    trained = Ffnn(model.spec, model.network, best[0], model.x_mean, model.x_scale, model.y_mean, model.y_scale)
    if heldout is not None:
        hx = np.asarray(heldout[0], dtype=np.float64).reshape(len(heldout[0]), -1)
        held = rmse(trained(hx), np.asarray(heldout[1], dtype=np.float64).reshape(len(hx), -1))
    else:
        held = loss
    return TrainResult(trained, history, epoch, per_epoch, held)


# ---------------------------------------------------------------- sweeps


@dataclass
class SweepResult:
    axis: str
    value: int
    mean: float
    ci95: float
    n: int
    seconds_per_epoch: float = field(default=0.0, compare=False)

    def row(self) -> dict:
        return {"axis": self.axis, "value": self.value, "mean": self.mean, "ci95": self.ci95, "n": self.n}


def ci95(values) -> tuple[float, float]:
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        raise ValueError("no values")
    mean = float(v.mean())
    half = 1.96 * float(v.std(ddof=1)) / math.sqrt(v.size) if v.size > 1 else 0.0
    return mean, half


def per_signal_rss_sss(original: np.ndarray, recon: np.ndarray, model_type: int) -> np.ndarray:
    """RSS/SSS% of every individual path signal, shape (rows, paths)."""
    from .inspect import rss_sss_batch

    o = np.asarray(original).reshape(len(original), original.shape[1], -1)
    r = np.asarray(recon).reshape(o.shape)
    return rss_sss_batch(o, r, axis=1)


def sweep_cae(
    model_type: int,
    train,
    test,
    latent_widths=SWEEP_LATENT_WIDTHS,
    filters=SWEEP_FILTERS,
    config: TrainConfig = CAE_DEFAULTS,
    default_latent: int = 7,
    default_filters: int = 64,
) -> list[SweepResult]:
    """Single-variable sweeps: latent width at fixed filters, then filters at fixed width."""
    train_x = getattr(train, "data", train)
    test_x = getattr(test, "data", test)
    length = train_x.shape[1]
    results = []
    plan = [("latent_width", d, CaeSpec(model_type, d, default_filters, length)) for d in latent_widths]
    plan += [("filters", f, CaeSpec(model_type, default_latent, f, length)) for f in filters]
    for axis, value, spec in plan:
        res = train_cae(spec, train_x, config)
        recon = res.model.reconstruct(test_x)
        errs = per_signal_rss_sss(test_x, recon, model_type)
        mean, half = ci95(errs)
        log.info("sweep %s=%s: %.4f%% +- %.4f (%.2fs/epoch)", axis, value, mean, half, res.seconds_per_epoch)
        results.append(SweepResult(axis, value, mean, half, errs.size, res.seconds_per_epoch))
    return results


def sweep_ffnn(
    train: tuple[np.ndarray, np.ndarray],
    test: tuple[np.ndarray, np.ndarray],
    widths=(8, 16, 32, 64, 128),
    depths=(1, 2, 3, 4, 5, 6),
    config: TrainConfig = FFNN_DEFAULTS,
    default_width: int = 64,
    default_depth: int = 5,
) -> list[SweepResult]:
    """RMSE of the latent->state FFNN over width (depth fixed) then depth (width fixed)."""
    x, y = (np.asarray(a, dtype=np.float64) for a in train)
    tx, ty = (np.asarray(a, dtype=np.float64) for a in test)
    x = x.reshape(len(x), -1)
    tx = tx.reshape(len(tx), -1)
    y = y.reshape(len(y), -1)
    ty = ty.reshape(len(ty), -1)
    plan = [("hidden_width", w, FfnnSpec(x.shape[1], y.shape[1], w, default_depth)) for w in widths]
    plan += [("hidden_depth", d, FfnnSpec(x.shape[1], y.shape[1], default_width, d)) for d in depths]
    results = []
    for axis, value, spec in plan:
        res = train_ffnn(spec, x, y, config)
        sq = np.sqrt(np.mean((res.model(tx) - ty) ** 2, axis=1))
        mean = float(np.sqrt(np.mean((res.model(tx) - ty) ** 2)))
        _, half = ci95(sq)
        results.append(SweepResult(axis, value, mean, half, len(tx), res.seconds_per_epoch))
    return results


def with_epochs(config: TrainConfig, epochs: int) -> TrainConfig:
    return replace(config, epochs=epochs)


# ---------------------------------------------------------------- full framework


@dataclass
class Framework:
    """CAE plus the estimation (latent -> state) and generation (state -> latent) FFNNs."""

    cae: Cae
    ffnn1: Ffnn
    ffnn2: Ffnn
    cae_history: list[float] = field(default_factory=list)
    ffnn1_history: list[float] = field(default_factory=list)
    ffnn2_history: list[float] = field(default_factory=list)

    @property
    def model_type(self) -> int:
        return self.cae.spec.model_type


def train_framework(
    train,
    spec: CaeSpec | None = None,
    cae_config: TrainConfig = CAE_DEFAULTS,
    ffnn_config: TrainConfig = FFNN_DEFAULTS,
    hidden_width: int = 64,
    hidden_depth: int = 5,
) -> Framework:
    """CAE first; then, with the encoder frozen, both FFNNs on the training latents."""
    from .models import ffnn_pair

    if spec is None:
        spec = CaeSpec(train.model_type, signal_length=train.data.shape[1])
    cae_res = train_cae(spec, train.data, cae_config)
    cae = cae_res.model
    z = cae.encode(train.data).reshape(len(train.data), -1)
    est_spec, gen_spec = ffnn_pair(spec, hidden_width, hidden_depth)
    f1 = train_ffnn(est_spec, z, train.labels, ffnn_config)
    f2 = train_ffnn(gen_spec, train.labels, z, ffnn_config)
    return Framework(cae, f1.model, f2.model, cae_res.history, f1.history, f2.history)
