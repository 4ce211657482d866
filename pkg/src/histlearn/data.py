"""MNIST ingestion: IDX parsing, download with verification, normalization.

IDX is the dataset's raw binary container: a big-endian magic number
(0x00000803 for image files, 0x00000801 for label files), big-endian
dimension fields, then unsigned bytes.  Files may be given raw or gzipped;
gzip is detected from the two-byte signature.

Pixels are mapped from bytes to ``v / 127.5 - 1`` so the working range is
exactly [-1, 1].
"""

import gzip
import hashlib
import os
import struct
import urllib.request
from dataclasses import dataclass

import numpy as np

from .errors import DataFormatError

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801

# name -> (raw size, gz size, gz md5)
MNIST_FILES = {
    "train-images-idx3-ubyte": (47040016, 9912422, "f68b3c2dcbeaaa9fbdd348bbdeb94873"),
    "train-labels-idx1-ubyte": (60008, 28881, "d53e105ee54ea40749a09fcbcd1e9432"),
    "t10k-images-idx3-ubyte": (7840016, 1648877, "9fb629c4189551a2d022fa330f9573f3"),
    "t10k-labels-idx1-ubyte": (10008, 4542, "ec29112dd5afa0611ce80d1b7f02629c"),
}

MNIST_MIRRORS = (
    "https://ossci-datasets.s3.amazonaws.com/mnist/",
    "https://storage.googleapis.com/cvdf-datasets/mnist/",
)

DATA_DIR_ENV = "HISTLEARN_DATA_DIR"


def _read_file(path) -> bytes:
    with open(path, "rb") as fh:
        head = fh.read(2)
        fh.seek(0)
        if head == b"\x1f\x8b":
            return gzip.decompress(fh.read())
        return fh.read()


def load_idx(images_path, labels_path):
    """Parse an IDX image/label file pair into raw arrays.

    Returns ``(images, labels)`` with images uint8 of shape (count, H, W)
    and labels uint8 of shape (count,).  Raises :class:`DataFormatError`
    for bad magic numbers, truncated payloads, or image/label count
    mismatches, each with a distinct message.
    """
    img_bytes = _read_file(images_path)
    if len(img_bytes) < 16:
        raise DataFormatError(
            f"{images_path}: truncated header, expected at least 16 bytes, got {len(img_bytes)}"
        )
    magic, count, height, width = struct.unpack(">IIII", img_bytes[:16])
    if magic != IMAGE_MAGIC:
        raise DataFormatError(
            f"{images_path}: bad magic 0x{magic:08x}, expected 0x{IMAGE_MAGIC:08x} (images)"
        )
    expected = 16 + count * height * width
    if len(img_bytes) != expected:
        raise DataFormatError(
            f"{images_path}: truncated, expected {expected} bytes, got {len(img_bytes)}"
        )
    images = np.frombuffer(img_bytes, dtype=np.uint8, offset=16).reshape(count, height, width)

    lbl_bytes = _read_file(labels_path)
    if len(lbl_bytes) < 8:
        raise DataFormatError(
            f"{labels_path}: truncated header, expected at least 8 bytes, got {len(lbl_bytes)}"
        )
    lmagic, lcount = struct.unpack(">II", lbl_bytes[:8])
    if lmagic != LABEL_MAGIC:
        raise DataFormatError(
            f"{labels_path}: bad magic 0x{lmagic:08x}, expected 0x{LABEL_MAGIC:08x} (labels)"
        )
    if len(lbl_bytes) != 8 + lcount:
        raise DataFormatError(
            f"{labels_path}: truncated, expected {8 + lcount} bytes, got {len(lbl_bytes)}"
        )
    if lcount != count:
        raise DataFormatError(
            f"image count {count} ({images_path}) != label count {lcount} ({labels_path})"
        )
    labels = np.frombuffer(lbl_bytes, dtype=np.uint8, offset=8)
    return images.copy(), labels.copy()


def normalize(raw) -> np.ndarray:
    """Bytes 0..255 -> float64 in [-1, 1]; 0 maps to -1 and 255 to +1."""
    return np.asarray(raw, dtype=np.float64) / 127.5 - 1.0


@dataclass
class ImageSet:
    """Normalized grayscale images with labels.

    Invariants checked at construction: pixels in [-1, 1], labels in 0..9,
    one label per image.
    """

    pixels: np.ndarray  # (count, H, W) float64
    labels: np.ndarray  # (count,) int64

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.pixels.ndim != 3:
            raise DataFormatError(f"pixels must be (count, H, W), got shape {self.pixels.shape}")
        if self.labels.shape != (self.pixels.shape[0],):
            raise DataFormatError(
                f"{self.pixels.shape[0]} images but {self.labels.shape[0]} labels"
            )
        if self.pixels.size and (self.pixels.min() < -1.0 or self.pixels.max() > 1.0):
            raise DataFormatError("pixel values outside [-1, 1]")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() > 9):
            raise DataFormatError("labels must be class indices 0..9")

    @property
    def count(self):
        return self.pixels.shape[0]

    @property
    def height(self):
        return self.pixels.shape[1]

    @property
    def width(self):
        return self.pixels.shape[2]

    @classmethod
    def from_idx_files(cls, images_path, labels_path) -> "ImageSet":
        images, labels = load_idx(images_path, labels_path)
        return cls(normalize(images), labels.astype(np.int64))

    def checksum(self) -> str:
        """sha256 over pixel and label bytes; identifies the dataset contents."""
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.pixels).tobytes())
        h.update(np.ascontiguousarray(self.labels).tobytes())
        return h.hexdigest()


def load_mnist(data_dir, split="train") -> ImageSet:
    """Load one MNIST split from a directory holding the standard IDX files."""
    if split == "train":
        images, labels = "train-images-idx3-ubyte", "train-labels-idx1-ubyte"
    elif split == "test":
        images, labels = "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"
    else:
        raise ValueError(f"split must be 'train' or 'test', got {split!r}")
    return ImageSet.from_idx_files(
        os.path.join(data_dir, images), os.path.join(data_dir, labels)
    )


def mnist_files_present(data_dir, file_table=None) -> bool:
    """True when all four raw IDX files exist with their expected sizes."""
    for name, (raw_size, _, _) in (file_table or MNIST_FILES).items():
        path = os.path.join(data_dir, name)
        if not (os.path.isfile(path) and os.path.getsize(path) == raw_size):
            return False
    return True


def _default_download(url: str) -> bytes:
    with urllib.request.urlopen(url, timeout=60) as response:
        return response.read()


def fetch_mnist(data_dir, mirrors=MNIST_MIRRORS, download=None, file_table=None):
    """Ensure the four raw IDX files exist in ``data_dir``; download if needed.

    Existing raw files with correct sizes are left alone (idempotent).
    Gzipped files already in the directory are verified against the
    published md5/size and decompressed; otherwise each mirror is tried in
    order.  Any size or checksum mismatch raises :class:`DataFormatError`
    naming the offending file.  ``download`` and ``file_table`` may be
    injected for testing (a callable ``url -> bytes`` and an alternate
    name -> (raw size, gz size, gz md5) map).
    """
    if download is None:
        download = _default_download
    os.makedirs(data_dir, exist_ok=True)
    paths = []
    for name, (raw_size, gz_size, gz_md5) in (file_table or MNIST_FILES).items():
        raw_path = os.path.join(data_dir, name)
        paths.append(raw_path)
        if os.path.isfile(raw_path):
            actual = os.path.getsize(raw_path)
            if actual != raw_size:
                raise DataFormatError(
                    f"{raw_path}: size {actual} does not match expected {raw_size}"
                )
            continue

        gz_path = raw_path + ".gz"
        if os.path.isfile(gz_path):
            blob = open(gz_path, "rb").read()
        else:
            blob = None
            errors = []
            for mirror in mirrors:
                url = mirror + name + ".gz"
                try:
                    blob = download(url)
                    break
                except Exception as exc:  # noqa: BLE001 - report every mirror failure
                    errors.append(f"{url}: {exc}")
            if blob is None:
                raise DataFormatError(
                    f"could not download {name}.gz from any mirror:\n  " + "\n  ".join(errors)
                )

        if len(blob) != gz_size:
            raise DataFormatError(
                f"{name}.gz: size {len(blob)} does not match expected {gz_size}"
            )
        digest = hashlib.md5(blob).hexdigest()
        if digest != gz_md5:
            raise DataFormatError(
                f"{name}.gz: checksum {digest} does not match expected {gz_md5}"
            )
        raw = gzip.decompress(blob)
        if len(raw) != raw_size:
            raise DataFormatError(
                f"{name}: decompressed size {len(raw)} does not match expected {raw_size}"
            )
        tmp = raw_path + ".tmp"
        with open(tmp, "wb") as fh:
            fh.write(raw)
        os.replace(tmp, raw_path)
        if not os.path.isfile(gz_path):
            with open(gz_path + ".tmp", "wb") as fh:
                fh.write(blob)
            os.replace(gz_path + ".tmp", gz_path)
    return paths
