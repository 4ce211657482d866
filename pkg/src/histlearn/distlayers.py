"""Layers that do arithmetic on distributions.

A length-N vector is read as the bin masses of a random variable on the
partition of [-1, 1] defined by a :class:`~histlearn.histogram.HistogramSpec`.
Given an input variable X and two learnable kernel histograms W and B, the
layer pair computes the distribution of ``W*X + B`` for independent
variables: a product stage followed by a sum stage.

Both stages are *mass-pairing scatters*: the joint mass ``f_W[i] * f_X[m]``
of every index pair lands in the bin containing ``centers[i] * centers[m]``
(product) or ``centers[i] + centers[m]`` (sum).  This is the exact law of
the product/sum of the two discretized variables.  It needs no 1/|w|
weighting and no interpolation, it conserves mass exactly (sums that leave
[-1, 1] clamp into the boundary bins), and because the map is bilinear the
backward passes below are its exact adjoints: finite differences agree to
machine precision, not just to discretization order.

Accumulation orders are fixed and documented so results are reproducible
bit for bit:

* product: pairs are visited weight-major, i.e. ``(i, m)`` in row-major
  order, equivalent to ``for i: for m: out[k(i,m)] += f_W[i] * f_X[m]``;
* sum: symmetric pairs are pre-added (``f_B[i] f_X[m] + f_B[m] f_X[i]``)
  and visited over the upper triangle in row-major order, which makes the
  sum stage exactly commutative in its two arguments.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ShapeError
from .histogram import HistogramSpec, bin_index
from .nn import Parameter


@dataclass
class DistributionKernel:
    """The learnable pair of kernel histograms (weight and bias variables).

    Entries are unconstrained reals; nothing forces nonnegativity or unit
    mass during training.
    """

    weight_hist: np.ndarray
    bias_hist: np.ndarray

    def __post_init__(self):
        self.weight_hist = np.asarray(self.weight_hist, dtype=np.float64)
        self.bias_hist = np.asarray(self.bias_hist, dtype=np.float64)
        if self.weight_hist.shape != self.bias_hist.shape or self.weight_hist.ndim != 1:
            raise ShapeError(
                f"kernel histograms must be 1-D and equal length, got "
                f"{self.weight_hist.shape} and {self.bias_hist.shape}"
            )
        if not (np.all(np.isfinite(self.weight_hist)) and np.all(np.isfinite(self.bias_hist))):
            raise ValueError("kernel histograms must be finite")


@lru_cache(maxsize=8)
def _index_maps(n_bins: int):
    """Precomputed scatter geometry for one bin count.

    ``prod[i, m]`` / ``sum_[i, m]`` are the output bins of the pair (i, m);
    ``prod_flat`` / ``sum_flat`` are the composite indices ``k * N + m``
    used to scatter or gather against (N, N) matrices; the ``triu_*``
    arrays drive the commutative sum-stage accumulation.
    """
    spec = HistogramSpec(n_bins=n_bins, bandwidth=1.0)
    centers = spec.centers
    prod = bin_index(np.multiply.outer(centers, centers), spec)
    pair_sums = centers[:, None] + centers[None, :]
    sum_ = np.clip(
        np.floor((pair_sums + 1.0) * (n_bins / 2.0)).astype(np.int64), 0, n_bins - 1
    )
    cols = np.broadcast_to(np.arange(n_bins), (n_bins, n_bins))
    iu, ju = np.triu_indices(n_bins)
    return {
        "prod": prod,
        "sum": sum_,
        "prod_flat": (prod * n_bins + cols).ravel(),
        "sum_flat": (sum_ * n_bins + cols).ravel(),
        "triu_i": iu,
        "triu_j": ju,
        "triu_diag": iu == ju,
        "triu_sum_bins": sum_[iu, ju],
    }


def _check_vec(v, spec: HistogramSpec, what: str) -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64)
    if arr.shape != (spec.n_bins,):
        raise ShapeError(f"{what} has shape {arr.shape}, expected ({spec.n_bins},)")
    return arr


def product_dist_forward(f_x, f_w, spec: HistogramSpec) -> np.ndarray:
    """Mass vector of W*X for independent discretized variables."""
    f_x = _check_vec(f_x, spec, "f_x")
    f_w = _check_vec(f_w, spec, "f_w")
    maps = _index_maps(spec.n_bins)
    weights = np.multiply.outer(f_w, f_x).ravel()
    return np.bincount(maps["prod"].ravel(), weights=weights, minlength=spec.n_bins)


def product_dist_backward(grad_fz, f_x, f_w, spec: HistogramSpec):
    """Adjoint of the product scatter: (grad_f_w, grad_f_x)."""
    grad_fz = _check_vec(grad_fz, spec, "grad_fz")
    f_x = _check_vec(f_x, spec, "f_x")
    f_w = _check_vec(f_w, spec, "f_w")
    gathered = grad_fz[_index_maps(spec.n_bins)["prod"]]
    return gathered @ f_x, f_w @ gathered


def sum_dist_forward(f_x, f_b, spec: HistogramSpec) -> np.ndarray:
    """Mass vector of X + B, boundary-clamped; exactly commutative."""
    f_x = _check_vec(f_x, spec, "f_x")
    f_b = _check_vec(f_b, spec, "f_b")
    maps = _index_maps(spec.n_bins)
    iu, ju = maps["triu_i"], maps["triu_j"]
    t1 = f_b[iu] * f_x[ju]
    t2 = f_b[ju] * f_x[iu]
    vals = t1 + t2
    vals[maps["triu_diag"]] = t1[maps["triu_diag"]]
    return np.bincount(maps["triu_sum_bins"], weights=vals, minlength=spec.n_bins)


def sum_dist_backward(grad_fz, f_x, f_b, spec: HistogramSpec):
    """Adjoint of the clamped sum scatter: (grad_f_b, grad_f_x)."""
    grad_fz = _check_vec(grad_fz, spec, "grad_fz")
    f_x = _check_vec(f_x, spec, "f_x")
    f_b = _check_vec(f_b, spec, "f_b")
    gathered = grad_fz[_index_maps(spec.n_bins)["sum"]]
    return gathered @ f_x, f_b @ gathered


def arithmetic_forward(f_x, kernel: DistributionKernel, spec: HistogramSpec) -> np.ndarray:
    """Distribution of W*X + B: product stage, then sum stage."""
    f_y = product_dist_forward(f_x, kernel.weight_hist, spec)
    return sum_dist_forward(f_y, kernel.bias_hist, spec)


def arithmetic_backward(grad_fz, f_x, kernel: DistributionKernel, spec: HistogramSpec):
    """Chained adjoints: (grad_weight_hist, grad_bias_hist, grad_f_x)."""
    f_x = _check_vec(f_x, spec, "f_x")
    f_y = product_dist_forward(f_x, kernel.weight_hist, spec)
    grad_b, grad_fy = sum_dist_backward(grad_fz, f_y, kernel.bias_hist, spec)
    grad_w, grad_fx = product_dist_backward(grad_fy, f_x, kernel.weight_hist, spec)
    return grad_w, grad_b, grad_fx


def init_kernel(spec: HistogramSpec, seed: int, noise_scale: float = 0.01) -> DistributionKernel:
    """Near-identity kernels: W a delta at the bin of 1 - D, B a delta at 0.

    Uniform noise of amplitude ``noise_scale`` is added entrywise (weight
    noise drawn before bias noise), so the module starts as a slightly
    perturbed identity map.  Deterministic per seed.
    """
    if noise_scale < 0:
        raise ValueError(f"noise_scale must be >= 0, got {noise_scale}")
    rng = np.random.default_rng(seed)
    n = spec.n_bins
    weight = np.zeros(n)
    weight[bin_index(1.0 - spec.half_width, spec)] = 1.0
    weight += rng.uniform(-noise_scale, noise_scale, size=n)
    bias = np.zeros(n)
    bias[bin_index(0.0, spec)] = 1.0
    bias += rng.uniform(-noise_scale, noise_scale, size=n)
    return DistributionKernel(weight, bias)


def _scatter_matrix(values: np.ndarray, flat_idx: np.ndarray, n: int) -> np.ndarray:
    """M[k, m] = sum_i values[i] over pairs with output bin k in column m."""
    return np.bincount(flat_idx, weights=np.repeat(values, n), minlength=n * n).reshape(n, n)


class ArithmeticDistributionLayer:
    """Batched W*X + B distribution layer over learnable kernel histograms.

    For a whole batch the scatter is folded into two (N, N) matrices that
    depend only on the current kernels, so forward and backward are plain
    matmuls plus one gather per kernel.  Gradients agree with the
    per-sample functional ops to rounding error.
    """

    def __init__(self, spec: HistogramSpec, kernel: DistributionKernel, name="arith"):
        if kernel.weight_hist.shape != (spec.n_bins,):
            raise ShapeError(
                f"kernel length {kernel.weight_hist.shape} does not match spec "
                f"({spec.n_bins} bins)"
            )
        self.spec = spec
        self.weight_hist = Parameter(kernel.weight_hist, name=f"{name}.weight_hist")
        self.bias_hist = Parameter(kernel.bias_hist, name=f"{name}.bias_hist")

    def params(self):
        return [self.weight_hist, self.bias_hist]

    def forward(self, f_x):
        x = np.asarray(f_x, dtype=np.float64)
        self._single = x.ndim == 1
        if self._single:
            x = x[None, :]
        n = self.spec.n_bins
        if x.ndim != 2 or x.shape[1] != n:
            raise ShapeError(f"expected histograms of shape (batch, {n}), got {x.shape}")
        maps = _index_maps(n)
        self._mw = _scatter_matrix(self.weight_hist.value, maps["prod_flat"], n)
        self._mb = _scatter_matrix(self.bias_hist.value, maps["sum_flat"], n)
        self._fx = x
        self._fy = x @ self._mw.T
        f_z = self._fy @ self._mb.T
        return f_z[0] if self._single else f_z

    def backward(self, grad):
        g = np.asarray(grad, dtype=np.float64)
        if self._single:
            g = g[None, :]
        n = self.spec.n_bins
        maps = _index_maps(n)
        # d loss / d bias[i] = sum_{batch, m} g[., k(i,m)] * f_y[., m]
        corr_b = g.T @ self._fy
        self.bias_hist.grad += corr_b.ravel()[maps["sum_flat"]].reshape(n, n).sum(axis=1)
        g_y = g @ self._mb
        corr_w = g_y.T @ self._fx
        self.weight_hist.grad += corr_w.ravel()[maps["prod_flat"]].reshape(n, n).sum(axis=1)
        g_x = g_y @ self._mw
        return g_x[0] if self._single else g_x
