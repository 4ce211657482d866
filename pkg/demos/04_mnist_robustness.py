"""The full MNIST robustness experiment, end to end.

Requires the MNIST IDX files (about 12 MB download):

    histlearn fetch --data-dir data

then run this script, or do the same thing through the CLI:

    histlearn train --arch dadm --data-dir data --out-dir runs/dadm
    histlearn eval runs/dadm/model_dadm.ckpt --data-dir data --out-dir runs/dadm
    histlearn ablation --data-dir data --out-dir runs/ablation
    histlearn report runs/dadm/reports.csv --data-dir data --out-dir runs/report

Training all four architectures for the full 10 epochs takes a while on a
laptop (the histogram cache from the first dadm run is reused afterwards).

Run:  python demos/04_mnist_robustness.py [data_dir]
"""

import os
import sys
import time

from histlearn import models
from histlearn.data import load_mnist, mnist_files_present
from histlearn.transforms import TransformSpec

data_dir = sys.argv[1] if len(sys.argv) > 1 else "data"
if not mnist_files_present(data_dir):
    sys.exit(f"MNIST files not found in {data_dir!r}; run `histlearn fetch --data-dir {data_dir}` first")

train_set = load_mnist(data_dir, "train")
test_set = load_mnist(data_dir, "test")
print(f"MNIST loaded: {train_set.count} train / {test_set.count} test\n")

battery = [TransformSpec(kind, rng_seed=0) for kind in ("none", "rotate", "translate", "flip", "shuffle")]
rows = {}
for arch in ("lenet", "base", "cnn", "dadm"):
    cfg = models.ModelConfig(arch, epochs=10, batch_size=64, seed=0)
    model = models.build_model(cfg)
    histograms = None
    if arch == "dadm":
        cache_path = os.path.join(data_dir, "hist_cache_train_256_0.001.bin")
        print("building/loading the per-image histogram cache (one-time cost)")
        cache = models.load_or_build_histogram_cache(cache_path, train_set, cfg.histogram_spec())
        histograms = cache.histograms
    print(f"training {arch}")
    start = time.monotonic()
    models.train(model, train_set, cfg, histograms=histograms, log=lambda line: print("  " + line))
    print(f"  {time.monotonic() - start:.0f}s")
    rows[arch] = [models.evaluate(model, test_set, t) for t in battery]
    print()

print("top-1 accuracy (%) under test-time transforms")
print("model   " + "".join(f"{t.kind:>11s}" for t in battery))
for arch, reports in rows.items():
    print(f"{arch:6s}  " + "".join(f"{r.top1:10.2f} " for r in reports))
