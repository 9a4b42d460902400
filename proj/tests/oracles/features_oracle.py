"""Reference hist-pool-v1 extractor.

Upsamples every pixel into an 8x8 block so the 8x8 grid cells become exact
w x h blocks, then averages blocks with numpy. Writes random PPM images and
their expected feature vectors.

usage: features_oracle.py <out_dir>
"""

import json
import pathlib
import sys

import numpy as np

GRID = 8
BINS = 8


def features(img):
    h, w, _ = img.shape
    up = np.repeat(np.repeat(img.astype(np.float64), GRID, axis=0), GRID, axis=1)
    cells = up.reshape(GRID, h, GRID, w, 3).mean(axis=(1, 3)) / 255.0
    pool = cells.reshape(-1)
    hist = []
    for c in range(3):
        counts = np.bincount(img[:, :, c].reshape(-1) >> 5, minlength=BINS)
        hist.extend(counts / (w * h))
    v = np.concatenate([pool, np.array(hist)])
    return v / np.linalg.norm(v)


def write_ppm(path, img):
    h, w, _ = img.shape
    path.write_bytes(b"P6\n%d %d\n255\n" % (w, h) + img.astype(np.uint8).tobytes())


def main():
    out = pathlib.Path(sys.argv[1])
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(20240611)
    shapes = [(64, 64)] * 4 + [(37, 23), (8, 8), (5, 3), (100, 17), (1, 1), (64, 48)]
    cases = []
    for i, (w, h) in enumerate(shapes):
        img = rng.integers(0, 256, size=(h, w, 3), dtype=np.uint16)
        if i == 1:
            img = np.full((h, w, 3), 128, dtype=np.uint16)
        name = f"img_{i:02d}_{w}x{h}.ppm"
        write_ppm(out / name, img)
        cases.append({"file": name, "features": [float(x) for x in features(img)]})
    (out / "expected.json").write_text(json.dumps({"extractor": "hist-pool-v1", "cases": cases}, indent=1))


if __name__ == "__main__":
    main()
