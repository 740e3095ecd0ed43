"""Color transfer between two synthetic 64x64 images for several POT fractions.

    python scripts/color_transfer_demo.py --out results/color
"""
import argparse
from pathlib import Path

import numpy as np

from mbpot.apps import ImageRGB, color_transfer
from mbpot.io import write_ppm
from mbpot.minibatch import SolverKind
from mbpot.partial import PartialParams


def gradient_image(seed, warm):
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:64, 0:64] / 63.0
    base = np.stack([xx, yy, 0.5 + 0.5 * np.sin(6 * xx * yy)], axis=-1)
    if warm:
        base = base[..., ::-1] ** 2
    return ImageRGB.from_array(np.clip(base + 0.05 * rng.standard_normal(base.shape), 0, 1))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", type=Path, default=Path("results/color"))
    ap.add_argument("--k", type=int, default=200)
    ap.add_argument("--m", type=int, default=32)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    src, tgt = gradient_image(1, False), gradient_image(2, True)
    write_ppm(args.out / "source.ppm", src)
    write_ppm(args.out / "target.ppm", tgt)
    for s in (0.5, 0.9, 0.99, 1.0):
        kind = SolverKind("pot", pot=PartialParams(s))
        img, visits = color_transfer(src, tgt, args.k, args.m, kind, args.seed, return_visits=True)
        write_ppm(args.out / f"pot_{s}.ppm", img)
        print(f"s={s}: unmodified pixels {int(np.sum(visits == 0))} / {src.size}")


if __name__ == "__main__":
    main()
