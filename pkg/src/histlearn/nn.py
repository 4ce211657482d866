"""Dense-tensor layers with hand-written backward passes, plus Adam.

There is no autograd here.  Every layer caches what its backward pass
needs during ``forward`` and exposes an explicit ``backward`` that
accumulates parameter gradients and returns the gradient with respect to
its input.  All math is float64; batches travel in the leading dimension,
and single samples (one fewer dimension) are accepted everywhere and
returned in kind.

``grad_check`` closes the loop: central finite differences against any
``f(x) -> (scalar, grad)`` pair, used throughout the test suite.
"""

import numpy as np

from .errors import NonFiniteError, ShapeError


class Parameter:
    """A learnable tensor and its gradient accumulator."""

    def __init__(self, value, name: str = "param"):
        self.value = np.array(value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)
        self.name = name

    def zero_grad(self):
        self.grad[...] = 0.0

    def __repr__(self):
        return f"Parameter({self.name}, shape={self.value.shape})"


def _uniform_init(rng, shape, fan_in):
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Linear:
    """y = x @ W.T + b with weight shaped (out_features, in_features)."""

    def __init__(self, in_features, out_features, rng, name="linear"):
        self.in_features = in_features
        self.out_features = out_features
        self.weight = Parameter(
            _uniform_init(rng, (out_features, in_features), in_features),
            name=f"{name}.weight",
        )
        self.bias = Parameter(_uniform_init(rng, (out_features,), in_features), name=f"{name}.bias")
        self._x = None
        self._single = False

    def params(self):
        return [self.weight, self.bias]

    def forward(self, x):
        x = np.asarray(x, dtype=np.float64)
        in_shape = x.shape
        self._single = x.ndim == 1
        if self._single:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != self.in_features:
            raise ShapeError(
                f"linear: input shape {in_shape} does not match "
                f"weight shape {self.weight.value.shape}"
            )
        self._x = x
        y = x @ self.weight.value.T + self.bias.value
        return y[0] if self._single else y

    def backward(self, grad):
        g = np.asarray(grad, dtype=np.float64)
        if self._single:
            g = g[None, :]
        self.weight.grad += g.T @ self._x
        self.bias.grad += g.sum(axis=0)
        gx = g @ self.weight.value
        return gx[0] if self._single else gx


class Conv2d:
    """Valid cross-correlation, stride 1, one bias per output channel."""

    def __init__(self, in_channels, out_channels, kernel_h, kernel_w, rng, name="conv"):
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_h = kernel_h
        self.kernel_w = kernel_w
        fan_in = in_channels * kernel_h * kernel_w
        self.weight = Parameter(
            _uniform_init(rng, (out_channels, in_channels, kernel_h, kernel_w), fan_in),
            name=f"{name}.weight",
        )
        self.bias = Parameter(_uniform_init(rng, (out_channels,), fan_in), name=f"{name}.bias")
        self._cols = None
        self._in_shape = None
        self._single = False

    def params(self):
        return [self.weight, self.bias]

    def forward(self, x):
        x = np.asarray(x, dtype=np.float64)
        self._single = x.ndim == 3
        if self._single:
            x = x[None]
        if x.ndim != 4 or x.shape[1] != self.in_channels:
            raise ShapeError(
                f"conv2d: input shape {x.shape} does not match kernel shape "
                f"{self.weight.value.shape}"
            )
        b, _, h, w = x.shape
        kh, kw = self.kernel_h, self.kernel_w
        if kh > h or kw > w:
            raise ShapeError(f"conv2d: kernel {kh}x{kw} larger than input {h}x{w}")
        oh, ow = h - kh + 1, w - kw + 1
        # im2col: (B, OH*OW, C*kh*kw) so the correlation is one matmul.
        windows = np.lib.stride_tricks.sliding_window_view(x, (kh, kw), axis=(2, 3))
        cols = windows.transpose(0, 2, 3, 1, 4, 5).reshape(b, oh * ow, -1)
        self._cols = np.ascontiguousarray(cols)
        self._in_shape = x.shape
        wmat = self.weight.value.reshape(self.out_channels, -1)
        y = self._cols @ wmat.T + self.bias.value
        y = y.reshape(b, oh, ow, self.out_channels).transpose(0, 3, 1, 2)
        return y[0] if self._single else y

    def backward(self, grad):
        g = np.asarray(grad, dtype=np.float64)
        if self._single:
            g = g[None]
        b, k, oh, ow = g.shape
        g2 = g.transpose(0, 2, 3, 1).reshape(b, oh * ow, k)
        wmat = self.weight.value.reshape(self.out_channels, -1)
        self.weight.grad += np.einsum("bpk,bpc->kc", g2, self._cols).reshape(self.weight.value.shape)
        self.bias.grad += g2.sum(axis=(0, 1))
        dcols = g2 @ wmat  # (B, OH*OW, C*kh*kw)
        _, c, h, w = self._in_shape
        kh, kw = self.kernel_h, self.kernel_w
        dcols = dcols.reshape(b, oh, ow, c, kh, kw)
        dx = np.zeros(self._in_shape)
        for u in range(kh):
            for v in range(kw):
                dx[:, :, u : u + oh, v : v + ow] += dcols[:, :, :, :, u, v].transpose(0, 3, 1, 2)
        return dx[0] if self._single else dx


class MaxPool2d:
    """2x2 max pooling with stride 2.

    Backward routes the upstream gradient to the first maximal element of
    each window in row-major scan order (``argmax`` breaks ties that way),
    which keeps the pass deterministic on plateaus.
    """

    window = 2

    def params(self):
        return []

    def forward(self, x):
        x = np.asarray(x, dtype=np.float64)
        self._single = x.ndim == 3
        if self._single:
            x = x[None]
        b, c, h, w = x.shape
        if h % 2 or w % 2:
            raise ShapeError(f"maxpool2d: spatial dims must be even, got {h}x{w}")
        r = x.reshape(b, c, h // 2, 2, w // 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(
            b, c, h // 2, w // 2, 4
        )
        self._argmax = r.argmax(axis=-1)
        self._in_shape = x.shape
        out = np.take_along_axis(r, self._argmax[..., None], axis=-1)[..., 0]
        return out[0] if self._single else out

    def backward(self, grad):
        g = np.asarray(grad, dtype=np.float64)
        if self._single:
            g = g[None]
        b, c, h, w = self._in_shape
        scattered = np.zeros((b, c, h // 2, w // 2, 4))
        np.put_along_axis(scattered, self._argmax[..., None], g[..., None], axis=-1)
        dx = scattered.reshape(b, c, h // 2, w // 2, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(
            b, c, h, w
        )
        return dx[0] if self._single else dx


class ReLU:
    def params(self):
        return []

    def forward(self, x):
        x = np.asarray(x, dtype=np.float64)
        self._mask = x > 0  # subgradient 0 at exactly 0
        return np.maximum(x, 0.0)

    def backward(self, grad):
        return np.asarray(grad, dtype=np.float64) * self._mask


class Flatten:
    def params(self):
        return []

    def forward(self, x):
        x = np.asarray(x, dtype=np.float64)
        self._single = x.ndim == 3
        self._in_shape = x.shape
        if self._single:
            return x.reshape(-1)
        return x.reshape(x.shape[0], -1)

    def backward(self, grad):
        return np.asarray(grad, dtype=np.float64).reshape(self._in_shape)


def log_softmax_nll(logits, labels):
    """Negative log likelihood through a numerically stable log-softmax.

    For a single sample (1-D logits, integer label) returns
    ``(-(logits[label] - logsumexp(logits)), softmax(logits) - onehot)``.
    For a batch (2-D logits, label vector) the loss is the batch mean and
    the gradient is scaled by 1/batch accordingly.
    """
    z = np.asarray(logits, dtype=np.float64)
    single = z.ndim == 1
    if single:
        z = z[None, :]
        labels = np.asarray([labels])
    else:
        labels = np.asarray(labels)
    n, k = z.shape
    if labels.shape != (n,):
        raise ShapeError(f"labels shape {labels.shape} does not match logits shape {z.shape}")
    if labels.min() < 0 or labels.max() >= k:
        raise ValueError(f"label out of range: got {labels.min()}..{labels.max()} for {k} classes")

    zmax = z.max(axis=1, keepdims=True)
    ez = np.exp(z - zmax)
    sez = ez.sum(axis=1, keepdims=True)
    log_probs = (z - zmax) - np.log(sez)
    rows = np.arange(n)
    loss = -log_probs[rows, labels].mean()
    grad = ez / sez
    grad[rows, labels] -= 1.0
    if single:
        return loss, grad[0]
    return loss, grad / n


class AdamState:
    """First/second moment estimates and the step counter for one parameter."""

    def __init__(self, param: Parameter):
        self.m = np.zeros_like(param.value)
        self.v = np.zeros_like(param.value)
        self.t = 0


def adam_step(param: Parameter, state: AdamState, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """One Adam update with bias correction; zeroes the gradient afterward."""
    if not lr > 0:
        raise ValueError(f"learning rate must be > 0, got {lr}")
    if not np.all(np.isfinite(param.grad)):
        raise NonFiniteError(f"non-finite gradient in parameter {param.name!r}")
    state.t += 1
    g = param.grad
    state.m = beta1 * state.m + (1.0 - beta1) * g
    state.v = beta2 * state.v + (1.0 - beta2) * np.square(g)
    m_hat = state.m / (1.0 - beta1**state.t)
    v_hat = state.v / (1.0 - beta2**state.t)
    param.value -= lr * m_hat / (np.sqrt(v_hat) + eps)
    param.zero_grad()


class Adam:
    """Adam over a parameter list; one AdamState per parameter."""

    def __init__(self, params, lr=0.001, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.states = [AdamState(p) for p in self.params]

    def step(self):
        for p, s in zip(self.params, self.states):
            adam_step(p, s, self.lr, self.beta1, self.beta2, self.eps)


def grad_check(f, point, h=1e-3):
    """Max relative error between f's analytic gradient and central differences.

    ``f(x)`` must return ``(scalar_value, gradient_like_x)``.  The error at
    coordinate i is ``|a_i - n_i| / max(1e-8, |a_i| + |n_i|)``.
    """
    if not h > 0:
        raise ValueError(f"step size must be > 0, got {h}")
    x0 = np.asarray(point, dtype=np.float64)
    value, analytic = f(x0)
    analytic = np.asarray(analytic, dtype=np.float64)
    if not np.isfinite(value) or not np.all(np.isfinite(analytic)):
        raise NonFiniteError("grad_check: non-finite evaluation at the base point")
    worst = 0.0
    flat = x0.ravel()
    for i in range(flat.size):
        xp = x0.copy()
        xp.ravel()[i] += h
        xm = x0.copy()
        xm.ravel()[i] -= h
        fp, _ = f(xp)
        fm, _ = f(xm)
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise NonFiniteError(f"grad_check: non-finite evaluation at coordinate {i}")
        numeric = (fp - fm) / (2.0 * h)
        a = analytic.ravel()[i]
        err = abs(a - numeric) / max(1e-8, abs(a) + abs(numeric))
        worst = max(worst, err)
    return worst
