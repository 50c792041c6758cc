"""Minimal feedforward/recurrent network kit with hand-written backprop.

Everything runs in float64 numpy. Layers cache whatever the backward pass
needs during forward; `backward` must be called with the most recent
forward still cached. Shapes are batch-first: dense layers take (B, n),
recurrent layers take (B, T, n) and return the full hidden sequence.
"""

from __future__ import annotations

import numpy as np

_SIGMOID_LO = np.finfo(np.float64).tiny
_SIGMOID_HI = 1.0 - 2.0 ** -53


def stable_sigmoid(x: np.ndarray) -> np.ndarray:
    """Numerically stable logistic, clipped to the open interval (0, 1)."""
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return np.clip(out, _SIGMOID_LO, _SIGMOID_HI)


def bce_loss(y: np.ndarray, y_hat: np.ndarray) -> float:
    """Mean binary cross-entropy; predictions are clamped 1e-12 from {0, 1}."""
    y = np.asarray(y, dtype=np.float64)
    y_hat = np.asarray(y_hat, dtype=np.float64)
    if y.shape != y_hat.shape:
        raise ValueError(f"batch shapes differ: targets {y.shape} vs predictions {y_hat.shape}")
    if y.size == 0:
        raise ValueError("empty batch")
    p = np.clip(y_hat, 1e-12, 1.0 - 1e-12)
    return float(np.mean(-(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))))


def bce_grad(y: np.ndarray, y_hat: np.ndarray) -> np.ndarray:
    """Gradient of `bce_loss` w.r.t. the predictions."""
    y = np.asarray(y, dtype=np.float64)
    p = np.clip(y_hat, 1e-12, 1.0 - 1e-12)
    return (p - y) / (p * (1.0 - p)) / y.size


class Parameter:
    """A weight array together with its gradient accumulator."""

    def __init__(self, name: str, value: np.ndarray):
        self.name = name
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)

    def zero_grad(self) -> None:
        self.grad[...] = 0.0


def xavier_uniform(rng: np.random.Generator, fan_in: int, fan_out: int, shape) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class Module:
    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def parameters(self) -> list[Parameter]:
        return []


class Dense(Module):
    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator, name: str = "dense"):
        self.w = Parameter(f"{name}.w", xavier_uniform(rng, n_in, n_out, (n_in, n_out)))
        self.b = Parameter(f"{name}.b", np.zeros(n_out))
        self._x: np.ndarray | None = None

    def forward(self, x, train=False):
        self._x = x
        return x @ self.w.value + self.b.value

    def backward(self, grad):
        self.w.grad += self._x.T @ grad
        self.b.grad += grad.sum(axis=0)
        return grad @ self.w.value.T

    def parameters(self):
        return [self.w, self.b]


class Tanh(Module):
    def forward(self, x, train=False):
        self._out = np.tanh(x)
        return self._out

    def backward(self, grad):
        return grad * (1.0 - self._out ** 2)


class Sigmoid(Module):
    def forward(self, x, train=False):
        self._out = stable_sigmoid(x)
        return self._out

    def backward(self, grad):
        return grad * self._out * (1.0 - self._out)


class Flatten(Module):
    def forward(self, x, train=False):
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad):
        return grad.reshape(self._shape)


class TakeLast(Module):
    """Select the final timestep of a (B, T, H) sequence."""

    def forward(self, x, train=False):
        self._shape = x.shape
        return x[:, -1, :]

    def backward(self, grad):
        out = np.zeros(self._shape)
        out[:, -1, :] = grad
        return out


class Dropout(Module):
    """Inverted dropout; identity outside training passes."""

    def __init__(self, rate: float):
        if not 0.0 <= rate < 1.0:
            raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
        self.rate = rate
        self.rng: np.random.Generator | None = None
        self._mask: np.ndarray | None = None

    def forward(self, x, train=False):
        if not train or self.rate == 0.0:
            self._mask = None
            return x
        if self.rng is None:
            raise RuntimeError("dropout used in training mode without an RNG attached")
        keep = 1.0 - self.rate
        self._mask = (self.rng.random(x.shape) < keep) / keep
        return x * self._mask

    def backward(self, grad):
        if self._mask is None:
            return grad
        return grad * self._mask


class LSTM(Module):
    """Single recurrent layer with standard input/forget/output/candidate gating.

    Gate pre-activations share one (4H)-wide projection; slices are ordered
    i, f, o, g. The forget-gate bias starts at 1 so early training keeps
    cell state. Returns the full hidden sequence (B, T, H).
    """

    def __init__(self, n_in: int, n_hidden: int, rng: np.random.Generator, name: str = "lstm"):
        self.n_in = n_in
        self.n_hidden = n_hidden
        self.wx = Parameter(
            f"{name}.wx", xavier_uniform(rng, n_in, n_hidden, (n_in, 4 * n_hidden))
        )
        self.wh = Parameter(
            f"{name}.wh", xavier_uniform(rng, n_hidden, n_hidden, (n_hidden, 4 * n_hidden))
        )
        b = np.zeros(4 * n_hidden)
        b[n_hidden : 2 * n_hidden] = 1.0
        self.b = Parameter(f"{name}.b", b)
        self._cache = None

    def forward(self, x, train=False):
        batch, steps, _ = x.shape
        h_dim = self.n_hidden
        h = np.zeros((batch, h_dim))
        c = np.zeros((batch, h_dim))
        gates, cells, tanh_c, h_prevs, c_prevs = [], [], [], [], []
        outputs = np.zeros((batch, steps, h_dim))
        for t in range(steps):
            a = x[:, t, :] @ self.wx.value + h @ self.wh.value + self.b.value
            i = stable_sigmoid(a[:, :h_dim])
            f = stable_sigmoid(a[:, h_dim : 2 * h_dim])
            o = stable_sigmoid(a[:, 2 * h_dim : 3 * h_dim])
            g = np.tanh(a[:, 3 * h_dim :])
            h_prevs.append(h)
            c_prevs.append(c)
            c = f * c + i * g
            tc = np.tanh(c)
            h = o * tc
            gates.append((i, f, o, g))
            cells.append(c)
            tanh_c.append(tc)
            outputs[:, t, :] = h
        self._cache = (x, gates, cells, tanh_c, h_prevs, c_prevs)
        return outputs

    def backward(self, grad):
        x, gates, cells, tanh_c, h_prevs, c_prevs = self._cache
        batch, steps, _ = x.shape
        h_dim = self.n_hidden
        dx = np.zeros_like(x)
        dh_next = np.zeros((batch, h_dim))
        dc_next = np.zeros((batch, h_dim))
        for t in reversed(range(steps)):
            i, f, o, g = gates[t]
            dh = grad[:, t, :] + dh_next
            do = dh * tanh_c[t]
            dc = dc_next + dh * o * (1.0 - tanh_c[t] ** 2)
            df = dc * c_prevs[t]
            di = dc * g
            dg = dc * i
            dc_next = dc * f
            da = np.concatenate(
                [
                    di * i * (1.0 - i),
                    df * f * (1.0 - f),
                    do * o * (1.0 - o),
                    dg * (1.0 - g ** 2),
                ],
                axis=1,
            )
            self.wx.grad += x[:, t, :].T @ da
            self.wh.grad += h_prevs[t].T @ da
            self.b.grad += da.sum(axis=0)
            dx[:, t, :] = da @ self.wx.value.T
            dh_next = da @ self.wh.value.T
        return dx

    def parameters(self):
        return [self.wx, self.wh, self.b]


class Sequential(Module):
    def __init__(self, modules: list[Module]):
        self.modules = modules

    def forward(self, x, train=False):
        for module in self.modules:
            x = module.forward(x, train=train)
        return x

    def backward(self, grad):
        for module in reversed(self.modules):
            grad = module.backward(grad)
        return grad

    def parameters(self):
        params: list[Parameter] = []
        for module in self.modules:
            params.extend(module.parameters())
        return params

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()

    def attach_dropout_rng(self, rng: np.random.Generator) -> None:
        for module in self.modules:
            if isinstance(module, Dropout):
                module.rng = rng


class Adam:
    """Adaptive moment estimation over a fixed parameter list."""

    def __init__(
        self,
        params: list[Parameter],
        learning_rate: float = 0.006,
        beta1: float = 0.9,
        beta2: float = 0.999,
        epsilon: float = 1e-8,
    ):
        if learning_rate <= 0:
            raise ValueError(f"learning_rate must be positive, got {learning_rate}")
        self.params = params
        self.lr = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.t = 0
        self.m = [np.zeros_like(p.value) for p in params]
        self.v = [np.zeros_like(p.value) for p in params]

    def step(self) -> None:
        self.t += 1
        for idx, p in enumerate(self.params):
            self.m[idx] = self.beta1 * self.m[idx] + (1.0 - self.beta1) * p.grad
            self.v[idx] = self.beta2 * self.v[idx] + (1.0 - self.beta2) * p.grad ** 2
            m_hat = self.m[idx] / (1.0 - self.beta1 ** self.t)
            v_hat = self.v[idx] / (1.0 - self.beta2 ** self.t)
            p.value -= self.lr * m_hat / (np.sqrt(v_hat) + self.epsilon)


def numeric_gradient_error(
    net: Sequential,
    x: np.ndarray,
    y: np.ndarray,
    step: float = 1e-5,
) -> float:
    """Max relative disagreement between backprop and central differences.

    Dropout must be inactive (eval-mode forward) so the loss is a
    deterministic function of the parameters.
    """

    def loss() -> float:
        return bce_loss(y, net.forward(x, train=False).ravel())

    net.zero_grad()
    probs = net.forward(x, train=False).ravel()
    net.backward(bce_grad(y, probs).reshape(-1, 1))

    worst = 0.0
    for p in net.parameters():
        flat = p.value.ravel()
        grad = p.grad.ravel()
        for j in range(flat.size):
            original = flat[j]
            flat[j] = original + step
            up = loss()
            flat[j] = original - step
            down = loss()
            flat[j] = original
            numeric = (up - down) / (2.0 * step)
            denom = abs(grad[j]) + abs(numeric) + 1e-12
            worst = max(worst, abs(grad[j] - numeric) / denom)
    return worst
