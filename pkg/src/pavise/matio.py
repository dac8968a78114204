"""Plain-text matrix files.

Format: the first line holds two integers, row and column counts. Every
following token is a decimal real, row-major, separated by arbitrary
whitespace (line breaks included). Values are written with 17 significant
digits so a write/read round trip reproduces every float64 bit-exactly.
"""

from __future__ import annotations

import os

import numpy as np

from .errors import IOFailure


def save_matrix(path: str | os.PathLike, a: np.ndarray) -> None:
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise IOFailure(f"can only store 1- or 2-d arrays, got ndim={a.ndim}")
    rows, cols = a.shape
    parent = os.path.dirname(os.fspath(path))
    try:
        if parent:
            os.makedirs(parent, exist_ok=True)
        with open(path, "w") as fh:
            fh.write(f"{rows} {cols}\n")
            for r in range(rows):
                fh.write(" ".join(f"{v:.17g}" for v in a[r]))
                fh.write("\n")
    except OSError as exc:
        raise IOFailure(f"cannot write {path}: {exc}") from exc


def load_matrix(path: str | os.PathLike) -> np.ndarray:
    try:
        with open(path) as fh:
            header = fh.readline().split()
            body = fh.read().split()
    except OSError as exc:
        raise IOFailure(f"cannot read {path}: {exc}") from exc
    if len(header) != 2:
        raise IOFailure(f"{path}: first line must hold 'rows cols'")
    try:
        rows, cols = int(header[0]), int(header[1])
        values = np.array([float(tok) for tok in body])
    except ValueError as exc:
        raise IOFailure(f"{path}: {exc}") from exc
    if values.size != rows * cols:
        raise IOFailure(
            f"{path}: expected {rows * cols} values, found {values.size}"
        )
    return values.reshape(rows, cols)


def load_vector(path: str | os.PathLike) -> np.ndarray:
    """Load a matrix file that holds a single column (or row) as a 1-d array."""
    a = load_matrix(path)
    if 1 not in a.shape:
        raise IOFailure(f"{path}: expected a vector, got shape {a.shape}")
    return a.ravel()
