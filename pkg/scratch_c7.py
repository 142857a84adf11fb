"""Prototype of acceptance criterion 7 to size runtime and check properties."""
import json
import shutil
import time
from pathlib import Path

import numpy as np

from wassgeo import cli
from wassgeo.render import raster_to_pgm


def make_blob_images(path, n_images=100, size=20, seed=2024):
    path.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:size, 0:size] + 0.5
    paths = []
    for i in range(n_images):
        cx = size / 2 + rng.uniform(-4, 4)
        cy = size / 2 + rng.uniform(-4, 4)
        sigma = 2.5 * rng.uniform(0.8, 1.25)
        img = np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2 * sigma**2))
        img[img < 0.02] = 0.0
        p = path / f"blob{i:03d}.pgm"
        p.write_text(raster_to_pgm(img))
        paths.append(p)
    return paths


def run(tag, tmp):
    tmp = Path(tmp)
    if tmp.exists():
        shutil.rmtree(tmp)
    tmp.mkdir(parents=True)
    t0 = time.time()
    images = make_blob_images(tmp / "img")
    rc = cli.main(["ingest-images", "--output-dir", str(tmp / "measures"),
                   *[str(p) for p in images]])
    assert rc == 0
    measure_paths = sorted((tmp / "measures").glob("*.csv"))
    print("ingest done", time.time() - t0)
    rc = cli.main(["barycenter", "--mode", "fixed", "--grid", "20", "20",
                   "--output", str(tmp / "bary.csv"),
                   *[str(p) for p in measure_paths]])
    assert rc == 0
    t1 = time.time()
    print("barycenter done", t1 - t0)
    from wassgeo import load_measure_csv
    bary = load_measure_csv(tmp / "bary.csv")
    print("bary atoms:", bary.n, "positive:", (bary.weights > 0).sum())
    rc = cli.main(["wpg", "--components", "2", "--grid-k", "9",
                   "--epsilon", "1e-2", "--seed", "7",
                   "--max-iter", "40", "--tol", "1e-5",
                   "--base", str(tmp / "bary.csv"),
                   "--output-dir", str(tmp / "out"),
                   *[str(p) for p in measure_paths]])
    assert rc == 0
    t2 = time.time()
    print("wpg done", t2 - t1, "total", t2 - t0)
    manifest = json.loads((tmp / "out" / "manifest.json").read_text())
    for c, comp in enumerate(manifest["components"]):
        trace = comp["objective_trace"]
        print(f"component {c}: {len(trace)} iters, first {trace[0]:.6f} last {trace[-1]:.6f}")
        last5 = trace[-5:]
        print("  final5:", [f"{v:.8f}" for v in last5])
        print("  non-increasing within 1e-6:",
              all(b <= a + 1e-6 for a, b in zip(last5, last5[1:])))
    return manifest


if __name__ == "__main__":
    run("run1", "/tmp/c7")
