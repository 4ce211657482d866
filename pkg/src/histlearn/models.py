"""The four benchmark architectures, training, and evaluation.

Architectures (final layer emits 10 logits; the log-softmax + NLL loss is
fused into :func:`histlearn.nn.log_softmax_nll`):

lenet  Conv(1->6, 5x5) / ReLU / MaxPool / Conv(6->16, 5x5) / ReLU / MaxPool
       / Linear(256->120) / ReLU / Linear(120->84) / ReLU / Linear(84->10)
base   Linear(784->256) / ReLU / Linear(256->512) / ReLU / Linear(512->10)
cnn    Conv(1->4, 3x3) / ReLU / Linear(2704->256) / ReLU / Linear(256->512)
       / ReLU / Linear(512->10)
dadm   per-image KDE histogram (256 bins) -> distribution-arithmetic layer
       (two learnable 256-kernels) / ReLU / Linear(256->512) / ReLU
       / Linear(512->10)

The histogram layer has no learnable parameters and training inputs are
fixed, so per-image histograms of a training set are computed once and
cached (:func:`cache_histograms`); with the cache in place dadm training
costs about the same as the plain MLP.
"""

import os
import struct
from dataclasses import dataclass

import numpy as np

from .data import ImageSet
from .distlayers import ArithmeticDistributionLayer, init_kernel
from .errors import DataFormatError, NonFiniteError, ShapeError
from .histogram import HistogramSpec, kde_histogram, kde_histogram_backward
from .nn import Adam, Conv2d, Flatten, Linear, MaxPool2d, ReLU, log_softmax_nll
from .transforms import TransformSpec, apply_transform

ARCHITECTURES = ("lenet", "base", "cnn", "dadm")


@dataclass
class ModelConfig:
    architecture: str
    epochs: int = 10
    batch_size: int = 64
    lr: float = 0.001
    seed: int = 0
    n_bins: int = 256
    bandwidth: float = 0.001

    def __post_init__(self):
        if self.architecture not in ARCHITECTURES:
            raise ValueError(
                f"unknown architecture {self.architecture!r}, expected one of {ARCHITECTURES}"
            )
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if not self.lr > 0:
            raise ValueError(f"lr must be > 0, got {self.lr}")

    def histogram_spec(self) -> HistogramSpec:
        return HistogramSpec(n_bins=self.n_bins, bandwidth=self.bandwidth)


class HistogramLayer:
    """Turns each image of a batch into its KDE histogram.

    No learnable parameters.  The backward pass returns per-pixel
    gradients, so upstream feature extractors could be trained through
    this layer even though the benchmark models use it as the first layer
    on raw images.
    """

    def __init__(self, spec: HistogramSpec):
        self.spec = spec

    def params(self):
        return []

    def forward(self, x):
        # 2-D input is one image; any higher rank is a batch over axis 0.
        x = np.asarray(x, dtype=np.float64)
        self._single = x.ndim == 2
        batch = x[None] if self._single else x
        self._images = batch
        out = np.empty((batch.shape[0], self.spec.n_bins))
        for i in range(batch.shape[0]):
            out[i] = kde_histogram(batch[i], self.spec)
        return out[0] if self._single else out

    def backward(self, grad):
        g = np.asarray(grad, dtype=np.float64)
        if self._single:
            g = g[None]
        out = np.empty_like(self._images)
        for i in range(self._images.shape[0]):
            out[i] = kde_histogram_backward(g[i], self._images[i], self.spec)
        return out[0] if self._single else out


class Model:
    """An ordered layer list with a named architecture."""

    def __init__(self, architecture: str, layers: list):
        self.architecture = architecture
        self.layers = layers

    def parameters(self):
        out = []
        for layer in self.layers:
            out.extend(layer.params())
        return out

    def forward(self, x, start=0):
        for layer in self.layers[start:]:
            x = layer.forward(x)
        return x

    def backward(self, grad, stop=0):
        for layer in reversed(self.layers[stop:]):
            grad = layer.backward(grad)
        return grad

    def histogram_spec(self):
        first = self.layers[0]
        return first.spec if isinstance(first, HistogramLayer) else None


def build_model(cfg: ModelConfig) -> Model:
    """Assemble one architecture with seeded initialization.

    Linear/conv weights and biases start uniform in +-1/sqrt(fan_in); the
    dadm kernels start as a near-identity pair (see ``init_kernel``).
    """
    rng = np.random.default_rng([cfg.seed, 0])
    arch = cfg.architecture
    if arch == "lenet":
        layers = [
            Conv2d(1, 6, 5, 5, rng, name="conv1"),
            ReLU(),
            MaxPool2d(),
            Conv2d(6, 16, 5, 5, rng, name="conv2"),
            ReLU(),
            MaxPool2d(),
            Flatten(),
            Linear(256, 120, rng, name="fc1"),
            ReLU(),
            Linear(120, 84, rng, name="fc2"),
            ReLU(),
            Linear(84, 10, rng, name="fc3"),
        ]
    elif arch == "base":
        layers = [
            Flatten(),
            Linear(784, 256, rng, name="fc1"),
            ReLU(),
            Linear(256, 512, rng, name="fc2"),
            ReLU(),
            Linear(512, 10, rng, name="fc3"),
        ]
    elif arch == "cnn":
        layers = [
            Conv2d(1, 4, 3, 3, rng, name="conv1"),
            ReLU(),
            Flatten(),
            Linear(2704, 256, rng, name="fc1"),  # 4 channels x 26 x 26
            ReLU(),
            Linear(256, 512, rng, name="fc2"),
            ReLU(),
            Linear(512, 10, rng, name="fc3"),
        ]
    elif arch == "dadm":
        spec = cfg.histogram_spec()
        kernel_seed = int(rng.integers(2**31 - 1))
        layers = [
            HistogramLayer(spec),
            ArithmeticDistributionLayer(spec, init_kernel(spec, kernel_seed), name="arith"),
            ReLU(),
            Linear(spec.n_bins, 512, rng, name="fc1"),
            ReLU(),
            Linear(512, 10, rng, name="fc2"),
        ]
    else:  # pragma: no cover - ModelConfig already validated
        raise ValueError(f"unknown architecture {arch!r}")
    return Model(arch, layers)


# --------------------------------------------------------------------------
# Histogram cache


@dataclass
class HistogramCache:
    """Per-image histograms keyed by dataset contents and bin geometry."""

    dataset_checksum: str
    n_bins: int
    bandwidth: float
    histograms: np.ndarray  # (count, n_bins) float64

    def matches(self, image_set: ImageSet, spec: HistogramSpec) -> bool:
        return (
            self.n_bins == spec.n_bins
            and self.bandwidth == spec.bandwidth
            and self.histograms.shape == (image_set.count, spec.n_bins)
            and self.dataset_checksum == image_set.checksum()
        )


def cache_histograms(image_set: ImageSet, spec: HistogramSpec) -> HistogramCache:
    """Compute every image's KDE histogram once."""
    hists = np.empty((image_set.count, spec.n_bins))
    for i in range(image_set.count):
        hists[i] = kde_histogram(image_set.pixels[i], spec)
    return HistogramCache(image_set.checksum(), spec.n_bins, spec.bandwidth, hists)


_CACHE_MAGIC = b"HLHC"
_CACHE_VERSION = 1


def save_histogram_cache(cache: HistogramCache, path):
    """Write the cache with an atomic rename so readers never see a torn file."""
    tmp = str(path) + ".tmp"
    checksum = cache.dataset_checksum.encode()
    with open(tmp, "wb") as fh:
        fh.write(_CACHE_MAGIC)
        fh.write(struct.pack("<I", _CACHE_VERSION))
        fh.write(struct.pack("<I", len(checksum)))
        fh.write(checksum)
        fh.write(struct.pack("<IdI", cache.n_bins, cache.bandwidth, cache.histograms.shape[0]))
        fh.write(np.ascontiguousarray(cache.histograms, dtype="<f8").tobytes())
    os.replace(tmp, path)


def load_histogram_cache(path) -> HistogramCache:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != _CACHE_MAGIC:
        raise DataFormatError(f"{path}: not a histogram cache file")
    try:
        (version,) = struct.unpack_from("<I", blob, 4)
        if version != _CACHE_VERSION:
            raise DataFormatError(f"{path}: unsupported cache version {version}")
        (csum_len,) = struct.unpack_from("<I", blob, 8)
        offset = 12
        checksum = blob[offset : offset + csum_len].decode()
        offset += csum_len
        n_bins, bandwidth, count = struct.unpack_from("<IdI", blob, offset)
    except (struct.error, UnicodeDecodeError) as exc:
        raise DataFormatError(f"{path}: truncated or corrupt cache header: {exc}") from exc
    offset += struct.calcsize("<IdI")
    expected = offset + count * n_bins * 8
    if len(blob) != expected:
        raise DataFormatError(f"{path}: truncated, expected {expected} bytes, got {len(blob)}")
    hists = np.frombuffer(blob, dtype="<f8", offset=offset).reshape(count, n_bins).copy()
    return HistogramCache(checksum, n_bins, float(bandwidth), hists)


def load_or_build_histogram_cache(path, image_set: ImageSet, spec: HistogramSpec) -> HistogramCache:
    """Load the cache when its key matches the dataset; rebuild otherwise."""
    if os.path.isfile(path):
        try:
            cache = load_histogram_cache(path)
        except DataFormatError:
            cache = None
        if cache is not None and cache.matches(image_set, spec):
            return cache
    cache = cache_histograms(image_set, spec)
    save_histogram_cache(cache, path)
    return cache


# --------------------------------------------------------------------------
# Training and evaluation


@dataclass
class EpochStats:
    epoch: int
    mean_loss: float
    train_accuracy: float


@dataclass
class EvalReport:
    """Accuracy of one model under one transform, plus the drop vs original."""

    model: str
    transform: str
    top1: float
    per_class: list  # 10 accuracies, percent
    delta: float  # original top1 - this top1, percent

    def __post_init__(self):
        self.per_class = [float(v) for v in self.per_class]
        if len(self.per_class) != 10:
            raise ShapeError(f"per_class must have 10 entries, got {len(self.per_class)}")


def _model_inputs(model: Model, image_set: ImageSet, histograms=None):
    """Per-sample feature rows and the layer index forward should start at."""
    if model.architecture == "dadm" and histograms is not None:
        return histograms, 1
    return image_set.pixels[:, None, :, :], 0


def train(model: Model, train_set: ImageSet, cfg: ModelConfig, histograms=None, log=None):
    """Adam + NLL minibatch training; returns the per-epoch loss/accuracy curve.

    ``histograms`` short-circuits the dadm histogram layer with cached
    per-image histograms (shape (count, n_bins)).  Training is fully
    deterministic given ``cfg.seed``: initialization is seeded at build
    time and the batch shuffle stream here derives from the same seed.
    The training set is consumed as-is; there is no augmentation hook.
    """
    if model.architecture == "dadm" and histograms is None:
        histograms = cache_histograms(train_set, model.histogram_spec()).histograms
    inputs, start = _model_inputs(model, train_set, histograms)
    labels = train_set.labels
    n = train_set.count
    optimizer = Adam(model.parameters(), lr=cfg.lr)
    shuffle_rng = np.random.default_rng([cfg.seed, 1])
    curve = []
    for epoch in range(1, cfg.epochs + 1):
        order = shuffle_rng.permutation(n)
        total_loss = 0.0
        correct = 0
        for batch_no, lo in enumerate(range(0, n, cfg.batch_size)):
            idx = order[lo : lo + cfg.batch_size]
            logits = model.forward(inputs[idx], start=start)
            loss, grad = log_softmax_nll(logits, labels[idx])
            if not np.isfinite(loss):
                raise NonFiniteError(
                    f"non-finite loss at epoch {epoch}, batch {batch_no} "
                    f"({model.architecture})"
                )
            model.backward(grad, stop=start)
            optimizer.step()
            total_loss += loss * idx.size
            correct += int((logits.argmax(axis=1) == labels[idx]).sum())
        stats = EpochStats(epoch, float(total_loss / n), 100.0 * correct / n)
        curve.append(stats)
        if log is not None:
            log(
                f"epoch {stats.epoch:3d}  loss {stats.mean_loss:.4f}  "
                f"train acc {stats.train_accuracy:.2f}%"
            )
    return curve


def predict(model: Model, image_set: ImageSet, batch_size=256, histograms=None) -> np.ndarray:
    """Top-1 class per image."""
    inputs, start = _model_inputs(model, image_set, histograms)
    out = np.empty(image_set.count, dtype=np.int64)
    for lo in range(0, image_set.count, batch_size):
        logits = model.forward(inputs[lo : lo + batch_size], start=start)
        out[lo : lo + logits.shape[0]] = logits.argmax(axis=1)
    return out


def accuracy_breakdown(predictions: np.ndarray, labels: np.ndarray):
    """(overall %, per-class % list) from predictions; empty classes read 0."""
    overall = 100.0 * float((predictions == labels).mean())
    per_class = []
    for c in range(10):
        mask = labels == c
        per_class.append(100.0 * float((predictions[mask] == c).mean()) if mask.any() else 0.0)
    return overall, per_class


def evaluate(
    model: Model,
    test_set: ImageSet,
    tspec: TransformSpec,
    original_top1=None,
    batch_size=256,
) -> EvalReport:
    """Accuracy on the transformed test set and the drop against originals.

    For ``kind='none'`` the delta is zero by definition.  Otherwise the
    original-set accuracy is taken from ``original_top1`` when given
    (evaluating a battery shares one original pass) and computed here when
    not.
    """
    transformed = apply_transform(test_set, tspec)
    preds = predict(model, transformed, batch_size=batch_size)
    top1, per_class = accuracy_breakdown(preds, transformed.labels)
    if tspec.kind == "none":
        delta = 0.0
    else:
        if original_top1 is None:
            original_preds = predict(model, test_set, batch_size=batch_size)
            original_top1 = 100.0 * float((original_preds == test_set.labels).mean())
        delta = original_top1 - top1
    return EvalReport(model.architecture, tspec.kind, top1, per_class, delta)
