#!/usr/bin/env python3
"""Generate a synthetic street-scene dataset of paired image/label PNGs.

Scenes are simple geometric compositions over the six default classes
(roads, buildings, vegetation, sky, pedestrians, cars) so the projection
and evaluation pipeline can be exercised without any real dataset.
"""

import argparse
from pathlib import Path

import numpy as np

from equiwarp import LabelMap, RasterImage, write_image, write_labels

CLASS_COLORS = np.array(
    [
        [0.35, 0.35, 0.38],   # roads: asphalt gray
        [0.55, 0.42, 0.36],   # buildings: brick
        [0.18, 0.45, 0.20],   # vegetation: green
        [0.52, 0.70, 0.92],   # sky: light blue
        [0.85, 0.30, 0.25],   # pedestrians: red jacket
        [0.20, 0.25, 0.60],   # cars: blue body
    ],
    dtype=np.float32,
)

ROADS, BUILDINGS, VEGETATION, SKY, PEDESTRIANS, CARS = range(6)


def synth_scene(rng, width, height):
    ids = np.full((height, width), SKY, dtype=np.uint8)
    horizon = int(height * rng.uniform(0.45, 0.6))
    ids[horizon:] = ROADS

    x = 0
    while x < width:                       # skyline of buildings
        bw = rng.integers(width // 10, width // 4)
        top = int(horizon * rng.uniform(0.3, 0.9))
        if rng.random() < 0.75:
            ids[top:horizon, x : x + bw] = BUILDINGS
        x += bw + rng.integers(0, width // 10)

    for _ in range(rng.integers(1, 4)):    # tree crowns as discs
        cx, cy = rng.integers(0, width), rng.integers(int(horizon * 0.5), horizon)
        radius = rng.integers(height // 12, height // 6)
        yy, xx = np.ogrid[:height, :width]
        ids[(yy - cy) ** 2 + (xx - cx) ** 2 <= radius**2] = VEGETATION

    for _ in range(rng.integers(0, 3)):    # cars on the road band
        cw, ch = rng.integers(width // 10, width // 5), rng.integers(height // 14, height // 8)
        cx = rng.integers(0, max(1, width - cw))
        cy = rng.integers(horizon, max(horizon + 1, height - ch))
        ids[cy : cy + ch, cx : cx + cw] = CARS

    if rng.random() < 0.5:                 # occasional pedestrian
        pw, ph = max(2, width // 40), rng.integers(height // 10, height // 6)
        px = rng.integers(0, width - pw)
        py = max(0, horizon - ph // 3)
        ids[py : py + ph, px : px + pw] = PEDESTRIANS

    samples = CLASS_COLORS[ids] + rng.normal(0.0, 0.03, (height, width, 3)).astype(np.float32)
    return (
        RasterImage.from_array(np.clip(samples, 0.0, 1.0).astype(np.float32)),
        LabelMap.from_array(ids),
    )


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--count", type=int, default=20, help="number of pairs")
    parser.add_argument("--width", type=int, default=96)
    parser.add_argument("--height", type=int, default=72)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    out = Path(args.out)
    for i in range(args.count):
        image, labels = synth_scene(rng, args.width, args.height)
        write_image(image, out / f"scene{i:04d}.png")
        write_labels(labels, out / f"scene{i:04d}_labels.png")
    print(f"wrote {args.count} pairs under {out}")


if __name__ == "__main__":
    main()
