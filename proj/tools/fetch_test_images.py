#!/usr/bin/env python3
"""Write the four 256x256 8-bit test images into data/ as binary PGM.

cameraman  skimage.data.camera(), 512x512 averaged 2x2
barbara    a Barbara PNG (for example sporco's data/barbara.png), converted
           to luma, center-cropped to 512x512 and averaged 2x2
texture    stand-in for the mandrill: skimage.data.gravel(), averaged 2x2
geometry   synthetic disc and square on a flat background
"""

import argparse
import pathlib
import sys

import numpy as np


def write_pgm(path, img):
    img = np.clip(np.rint(img), 0, 255).astype(np.uint8)
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (w, h))
        fh.write(img.tobytes())


def halve(img):
    h, w = img.shape
    return img[: h - h % 2, : w - w % 2].reshape(h // 2, 2, w // 2, 2).mean(axis=(1, 3))


def luma(rgb):
    rgb = np.asarray(rgb, dtype=float)[..., :3]
    return rgb @ np.array([0.299, 0.587, 0.114])


def center_crop(img, n):
    h, w = img.shape
    top, left = (h - n) // 2, (w - n) // 2
    return img[top : top + n, left : left + n]


def geometry(n=256):
    yy, xx = np.mgrid[0:n, 0:n].astype(float)
    img = np.full((n, n), 60.0)
    img[40:130, 140:230] = 210.0
    disc = (yy - 170.0) ** 2 + (xx - 90.0) ** 2 < 60.0**2
    img[disc] = 150.0
    return img


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", default=str(pathlib.Path(__file__).resolve().parent.parent / "data"))
    ap.add_argument("--barbara", help="path to a Barbara PNG (RGB or gray)")
    args = ap.parse_args()

    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    from skimage import data, io

    write_pgm(out / "cameraman.pgm", halve(data.camera().astype(float)))
    write_pgm(out / "texture.pgm", halve(data.gravel().astype(float)))
    write_pgm(out / "geometry.pgm", geometry())

    if args.barbara:
        img = io.imread(args.barbara)
        gray = luma(img) if img.ndim == 3 else img.astype(float)
        write_pgm(out / "barbara.pgm", halve(center_crop(gray, 512)))
    else:
        print("no --barbara given; barbara.pgm not written", file=sys.stderr)

    for p in sorted(out.glob("*.pgm")):
        print(p)


if __name__ == "__main__":
    main()
