"""File formats: point-cloud CSV, sparse plan triplets and binary PPM images."""
from __future__ import annotations

import csv
import io
from pathlib import Path

import numpy as np

from .apps import ImageRGB
from .core import DiscreteMeasure
from .errors import InvalidInputError


def _fmt(x) -> str:
    # repr of a Python float is the shortest string that round-trips exactly
    return repr(float(x))


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def read_points(path) -> DiscreteMeasure:
    """Read a point cloud, one point per row.

    A first row that is not numeric is a header. A trailing header column
    named ``weight`` holds the weights, otherwise weights are uniform.
    """
    try:
        text = Path(path).read_text()
    except (OSError, UnicodeDecodeError) as exc:
        raise InvalidInputError(f"cannot read {path}: {exc}") from exc
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    if not rows:
        raise InvalidInputError(f"{path}: no rows")
    header = None
    if not all(_is_number(c) for c in rows[0]):
        header, rows = [c.strip().lower() for c in rows[0]], rows[1:]
    if not rows:
        raise InvalidInputError(f"{path}: header without data")
    width = len(rows[0])
    try:
        data = np.array([[float(c) for c in r] for r in rows])
    except ValueError as exc:
        raise InvalidInputError(f"{path}: non-numeric entry ({exc})") from exc
    if any(len(r) != width for r in rows):
        raise InvalidInputError(f"{path}: ragged rows")
    if header is not None and len(header) != width:
        raise InvalidInputError(f"{path}: header has {len(header)} columns, data has {width}")
    if header is not None and header[-1] == "weight":
        if width < 2:
            raise InvalidInputError(f"{path}: weight column without coordinates")
        return DiscreteMeasure(data[:, :-1], data[:, -1])
    return DiscreteMeasure.uniform(data)


def write_points(path, measure: DiscreteMeasure, weights: bool = True) -> None:
    d = measure.dim
    header = [f"x{i}" for i in range(d)] + (["weight"] if weights else [])
    lines = [",".join(header)]
    for p, w in zip(measure.points, measure.weights):
        vals = list(p) + ([w] if weights else [])
        lines.append(",".join(_fmt(v) for v in vals))
    Path(path).write_text("\n".join(lines) + "\n")


def write_plan(path, plan, tol: float = 0.0) -> None:
    """Sparse ``i,j,mass`` triplets of entries above ``tol``, row-major."""
    P = np.asarray(plan, dtype=float)
    lines = ["i,j,mass"]
    for i, j in zip(*np.nonzero(P > tol)):
        lines.append(f"{i},{j},{_fmt(P[i, j])}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_plan(path, shape=None) -> np.ndarray:
    """Dense plan from triplets; ``shape`` defaults to the largest indices + 1."""
    try:
        rows = list(csv.reader(io.StringIO(Path(path).read_text())))
    except (OSError, UnicodeDecodeError) as exc:
        raise InvalidInputError(f"cannot read {path}: {exc}") from exc
    rows = [r for r in rows if r]
    if rows and not _is_number(rows[0][0]):
        rows = rows[1:]
    try:
        trip = [(int(r[0]), int(r[1]), float(r[2])) for r in rows]
    except (ValueError, IndexError) as exc:
        raise InvalidInputError(f"{path}: malformed triplet ({exc})") from exc
    if shape is None:
        shape = (max((t[0] for t in trip), default=-1) + 1, max((t[1] for t in trip), default=-1) + 1)
    P = np.zeros(shape)
    for i, j, v in trip:
        P[i, j] = v
    return P


def write_matrix(path, M) -> None:
    """Dense numeric matrix as CSV without header."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    Path(path).write_text("".join(",".join(_fmt(v) for v in row) + "\n" for row in M))


def _ppm_tokens(data: bytes, count: int):
    """First ``count`` whitespace-separated header tokens and the offset after them."""
    tokens, pos, n = [], 0, len(data)
    while len(tokens) < count:
        while pos < n and data[pos:pos + 1].isspace():
            pos += 1
        if pos < n and data[pos:pos + 1] == b"#":
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise InvalidInputError("truncated PPM header")
        tokens.append(data[start:pos])
    # exactly one whitespace byte separates the header from the raster
    return tokens, pos + 1


def read_ppm(path) -> ImageRGB:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise InvalidInputError(f"cannot read {path}: {exc}") from exc
    if data[:2] != b"P6":
        raise InvalidInputError(f"{path}: not a binary PPM (magic P6)")
    tokens, offset = _ppm_tokens(data, 4)
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError as exc:
        raise InvalidInputError(f"{path}: bad PPM header") from exc
    if maxval != 255:
        raise InvalidInputError(f"{path}: only maxval 255 is supported, got {maxval}")
    if width < 1 or height < 1:
        raise InvalidInputError(f"{path}: bad dimensions {width}x{height}")
    raster = data[offset:offset + 3 * width * height]
    if len(raster) != 3 * width * height:
        raise InvalidInputError(f"{path}: truncated raster")
    px = np.frombuffer(raster, dtype=np.uint8).reshape(-1, 3).astype(float) / 255.0
    return ImageRGB(width, height, px)


def write_ppm(path, image: ImageRGB) -> None:
    raster = np.clip(np.rint(image.pixels * 255.0), 0, 255).astype(np.uint8)
    Path(path).write_bytes(f"P6\n{image.width} {image.height}\n255\n".encode() + raster.tobytes())
