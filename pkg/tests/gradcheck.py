"""Central finite-difference oracle and a generator of small random networks."""

from __future__ import annotations

import numpy as np

from wavestate import nn


def numeric_grads(network, params, x, weights, h=1e-5):
    """d/dtheta of sum(forward(x) * weights) by central differences."""

    def f():
        out, _ = nn.forward(network, params, x, keep_cache=False)
        return float(np.sum(out * weights))

    grads = {}
    for i, p in params.items():
        grads[i] = {}
        for k, arr in p.items():
            g = np.zeros_like(arr)
            it = np.nditer(arr, flags=["multi_index"])
            for _ in it:
                idx = it.multi_index
                old = arr[idx]
                arr[idx] = old + h
                up = f()
                arr[idx] = old - h
                down = f()
                arr[idx] = old
                g[idx] = (up - down) / (2 * h)
            grads[i][k] = g
    return grads


def max_relative_error(analytic, numeric, floor=1e-6):
    worst = 0.0
    for i in numeric:
        for k in numeric[i]:
            a, n = analytic[i][k], numeric[i][k]
            err = np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
            worst = max(worst, float(err.max()))
    return worst


def check(network, params, x, rng, h=1e-5):
    out, cache = nn.forward(network, params, x)
    weights = rng.standard_normal(out.shape)
    analytic, _ = nn.backward(network, params, cache, weights)
    return max_relative_error(analytic, numeric_grads(network, params, x, weights, h))


def random_network(rng, max_params=200):
    """A 1-3 layer network from the supported layer kinds with <= max_params weights."""
    acts = ["tanh", "linear"]
    while True:
        family = rng.integers(3)
        n_layers = int(rng.integers(1, 4))
        if family == 0:  # 1D signal
            length = int(rng.choice([4, 6, 8]))
            shape = (length, int(rng.integers(1, 3)))
            pool = [(nn.MaxPool1D, (2,)), (nn.Upsample1D, (2,))]
            conv = lambda: nn.Conv1D(int(rng.integers(1, 4)), int(rng.choice([1, 3])), str(rng.choice(acts)))
        elif family == 1:  # 2D grid
            shape = (int(rng.choice([4, 6])), int(rng.choice([3, 6])), 1)
            pool = [(nn.MaxPool2D, (2, 3)), (nn.Upsample2D, (2, 1))]
            conv = lambda: nn.Conv2D(int(rng.integers(1, 3)), (3, 3), str(rng.choice(acts)))
        else:  # vectors
            shape = (int(rng.integers(2, 7)),)
            pool = []
            conv = None
        layers = []
        cur = shape
        for _ in range(n_layers):
            options = ["dense", "act"] + (["conv", "pool"] if conv else [])
            kind = rng.choice(options)
            if kind == "dense":
                layers.append(nn.Dense(int(rng.integers(1, 5)), str(rng.choice(acts))))
            elif kind == "act":
                layers.append(nn.Activation("tanh"))
            elif kind == "conv":
                layers.append(conv())
            else:
                ctor, factors = pool[int(rng.integers(len(pool)))]
                layers.append(ctor(factors if len(factors) > 1 else factors[0]))
            try:
                net = nn.Network(shape, tuple(layers))
            except nn.ShapeError:
                layers.pop()
                continue
            cur = net.output_shape
        if not layers:
            continue
        net = nn.Network(shape, tuple(layers))
        if 0 < nn.count_parameters(net) <= max_params:
            return net, cur
