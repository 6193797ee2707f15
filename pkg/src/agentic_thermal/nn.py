"""Minimal feed-forward networks with hand-written backprop, plus Adam."""

from __future__ import annotations

import numpy as np


def _views(flat: np.ndarray, shapes) -> list[np.ndarray]:
    out, i = [], 0
    for shape in shapes:
        n = int(np.prod(shape))
        out.append(flat[i:i + n].reshape(shape))
        i += n
    return out


class MLP:
    """Dense network, ReLU hidden layers, linear output.

    ``params`` is ``[W0, b0, W1, b1, ...]``; every entry is a view into the
    single vector ``flat`` so optimizers can update all weights in one
    operation. ``backward`` fills ``grads`` (views into ``grad_flat``) in place.
    """

    def __init__(self, sizes, rng: np.random.Generator | None = None, out_scale: float = 1.0):
        self.sizes = tuple(int(s) for s in sizes)
        self.shapes = []
        for fan_in, fan_out in zip(self.sizes[:-1], self.sizes[1:]):
            self.shapes += [(fan_in, fan_out), (fan_out,)]
        total = sum(int(np.prod(s)) for s in self.shapes)
        self.flat = np.zeros(total)
        self.grad_flat = np.zeros(total)
        self.params = _views(self.flat, self.shapes)
        self.grads = _views(self.grad_flat, self.shapes)
        if rng is not None:
            last = self.n_layers - 1
            for i in range(self.n_layers):
                fan_in, fan_out = self.shapes[2 * i]
                limit = np.sqrt(6.0 / (fan_in + fan_out)) * (out_scale if i == last else 1.0)
                self.params[2 * i][...] = rng.uniform(-limit, limit, size=(fan_in, fan_out))

    @property
    def n_layers(self) -> int:
        return len(self.shapes) // 2

    def forward(self, x: np.ndarray):
        """Return output and the cache needed by :meth:`backward`."""
        acts = [x]
        h = x
        last = self.n_layers - 1
        p = self.params
        for i in range(self.n_layers):
            z = h @ p[2 * i]
            z += p[2 * i + 1]
            h = z if i == last else np.maximum(z, 0.0, out=z)
            acts.append(h)
        return h, acts

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)[0]

    def backward(self, acts, dout: np.ndarray, need_input_grad: bool = False,
                 param_grads: bool = True):
        """Backpropagate ``dout``; returns (``grads`` or None, input gradient or None)."""
        d = dout
        dx = None
        for i in reversed(range(self.n_layers)):
            if param_grads:
                np.matmul(acts[i].T, d, out=self.grads[2 * i])
                np.sum(d, axis=0, out=self.grads[2 * i + 1])
            if i > 0:
                d = d @ self.params[2 * i].T
                d *= acts[i] > 0.0
            elif need_input_grad:
                dx = d @ self.params[0].T
        return (self.grads if param_grads else None), dx

    def copy_from(self, other: "MLP") -> None:
        self.flat[...] = other.flat

    def polyak_from(self, other: "MLP", tau: float) -> None:
        self.flat *= 1.0 - tau
        self.flat += tau * other.flat

    def clone(self) -> "MLP":
        new = MLP(self.sizes)
        new.flat[...] = self.flat
        return new


class Adam:
    """Adam over a list of arrays updated in place (ideally flat parameter vectors)."""

    def __init__(self, params, lr: float = 3e-4, betas=(0.9, 0.999), eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, grads) -> None:
        self.t += 1
        c1 = 1.0 - self.b1 ** self.t
        c2 = 1.0 - self.b2 ** self.t
        step = self.lr / c1
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * (g * g)
            p -= step * m / (np.sqrt(v / c2) + self.eps)
