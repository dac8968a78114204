"""Encoding data matrices into per-worker shares.

Worker i's share of an n x d matrix A is S_i A, where S_i is a p x n
selection-and-combination matrix built from column i of a null-space basis
of the error locator. Row r of S_i carries the basis coefficients
(b_1i ... b_qi) over the column window [r q, (r+1) q), with the final row
truncated to the leftover width l = n - (p - 1) q. S_i is never stored
densely; every operation works from the coefficient vector plus the block
geometry, which is also what makes streaming appends O(1) rows of work.

With the rref basis variant the last q coefficient rows form an identity,
so all but 2t workers have exactly one nonzero coefficient and their
"encoding" is a plain scaled copy of q-row slices of A.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, OutOfRange
from .flops import OpCounter, charge
from .locator import NullBasis

PROVENANCES = ("X", "XT", "identity-for-sgd", "XR-columns")


@dataclass(frozen=True)
class BlockGeometry:
    """How a length-`rows` axis is cut into p windows of width q.

    The last window may be narrower: l = rows - (p - 1) q, with 1 <= l <= q.
    """

    rows: int
    q: int

    def __post_init__(self):
        if self.rows < 1 or self.q < 1:
            raise DimensionMismatch(
                f"geometry needs positive sizes, got rows={self.rows} q={self.q}"
            )

    @property
    def p(self) -> int:
        return -(-self.rows // self.q)

    @property
    def l(self) -> int:
        return self.rows - (self.p - 1) * self.q

    def width(self, j: int) -> int:
        if not 0 <= j < self.p:
            raise OutOfRange(f"block {j} out of range for p={self.p}")
        return self.q if j < self.p - 1 else self.l

    def block_slice(self, j: int) -> slice:
        if not 0 <= j < self.p:
            raise OutOfRange(f"block {j} out of range for p={self.p}")
        return slice(j * self.q, j * self.q + self.width(j))


@dataclass(frozen=True, eq=False)
class WorkerEncoder:
    """Coefficients plus geometry; enough to rebuild S_i on demand."""

    worker_id: int
    coefficients: np.ndarray  # length q
    geometry: BlockGeometry

    def dense_matrix(self) -> np.ndarray:
        """Materialize S_i (p x rows). Reference and test use only."""
        geom = self.geometry
        s = np.zeros((geom.p, geom.rows))
        for j in range(geom.p):
            s[j, geom.block_slice(j)] = self.coefficients[: geom.width(j)]
        return s


@dataclass(eq=False)
class EncodedShare:
    """One worker's encoded block, S_i A, plus the metadata to use it."""

    worker_id: int
    matrix: np.ndarray  # p x cols
    provenance: str
    coefficients: np.ndarray
    geometry: BlockGeometry

    @property
    def cols(self) -> int:
        return self.matrix.shape[1]

    def encoder(self) -> WorkerEncoder:
        return WorkerEncoder(self.worker_id, self.coefficients, self.geometry)


def _combine_blocks(body, tail, coeff, l, counter):
    """coeff-weighted sums of the q-row windows; skips zero coefficients."""
    nz = np.flatnonzero(coeff)
    nz_tail = nz[nz < l]
    p_minus_1, _, cols = body.shape
    if nz.size == 0:
        top = np.zeros((p_minus_1, cols))
    elif nz.size == 1:
        top = coeff[nz[0]] * body[:, nz[0], :]
    elif nz.size == coeff.size:
        top = np.tensordot(coeff, body, axes=(0, 1))
    else:
        top = np.tensordot(coeff[nz], body[:, nz, :], axes=(0, 1))
    if nz_tail.size:
        bottom = coeff[nz_tail] @ tail[nz_tail]
    else:
        bottom = np.zeros(cols)
    charge(counter, nz.size * p_minus_1 * cols + nz_tail.size * cols)
    return np.vstack([top, bottom[None, :]])


def encode(
    basis: NullBasis,
    a: np.ndarray,
    provenance: str = "X",
    counter: OpCounter | None = None,
) -> list[EncodedShare]:
    """Produce all m worker shares of a.

    The cost charged to `counter` reflects the coefficient sparsity: with
    the rref basis, m - 2t of the workers cost only p * cols multiplies.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.size == 0:
        raise DimensionMismatch(f"need a nonempty 2-d array, got shape {a.shape}")
    if provenance not in PROVENANCES:
        raise ValueError(f"unknown provenance {provenance!r}")
    q = basis.q
    geom = BlockGeometry(rows=a.shape[0], q=q)
    p, l, cols = geom.p, geom.l, a.shape[1]
    body = a[: (p - 1) * q].reshape(p - 1, q, cols)
    tail = a[(p - 1) * q :]
    shares = []
    for i in range(basis.m):
        coeff = basis.coefficients[i]
        matrix = _combine_blocks(body, tail, coeff, l, counter)
        shares.append(
            EncodedShare(
                worker_id=i,
                matrix=matrix,
                provenance=provenance,
                coefficients=coeff,
                geometry=geom,
            )
        )
    return shares


def append_row(
    shares: list[EncodedShare],
    x: np.ndarray,
    counter: OpCounter | None = None,
) -> list[EncodedShare]:
    """Fold one new data row into every share, in place.

    When the last block still has room (l < q) the new row lands in each
    share's existing final row with weight b_{l+1,i}; once the block is
    full a fresh share row b_{1,i} x is appended and p grows by one.
    Workers whose relevant coefficient is zero are untouched (or gain a
    zero row), so a round of appends costs about (2t + 1) * len(x)
    multiplies in total under the rref basis.
    """
    x = np.asarray(x, dtype=float).ravel()
    geom = shares[0].geometry
    if x.size != shares[0].cols:
        raise DimensionMismatch(
            f"row has {x.size} entries, shares have {shares[0].cols} columns"
        )
    q, l = geom.q, geom.l
    new_geom = BlockGeometry(rows=geom.rows + 1, q=q)
    for share in shares:
        if share.geometry is not geom and share.geometry != geom:
            raise DimensionMismatch("shares disagree on geometry")
        coeff = share.coefficients
        if l < q:
            c = coeff[l]
            if c != 0.0:
                share.matrix[-1] += c * x
                charge(counter, x.size)
        else:
            c = coeff[0]
            if c != 0.0:
                share.matrix = np.vstack([share.matrix, c * x])
                charge(counter, x.size)
            else:
                share.matrix = np.vstack([share.matrix, np.zeros_like(x)])
        share.geometry = new_geom
    return shares


def append_column(
    shares: list[EncodedShare],
    col: np.ndarray,
    counter: OpCounter | None = None,
) -> list[EncodedShare]:
    """Append one encoded data column to every share, in place."""
    col = np.asarray(col, dtype=float).ravel()
    geom = shares[0].geometry
    if col.size != geom.rows:
        raise DimensionMismatch(
            f"column has {col.size} entries, geometry holds {geom.rows} rows"
        )
    p, q, l = geom.p, geom.q, geom.l
    body = col[: (p - 1) * q].reshape(p - 1, q)
    tail = col[(p - 1) * q :]
    for share in shares:
        coeff = share.coefficients
        nz = np.flatnonzero(coeff)
        nz_tail = nz[nz < l]
        new = np.zeros(p)
        if nz.size and p > 1:
            new[: p - 1] = body[:, nz] @ coeff[nz]
        if nz_tail.size:
            new[p - 1] = tail[nz_tail] @ coeff[nz_tail]
        charge(counter, nz.size * (p - 1) + nz_tail.size)
        share.matrix = np.hstack([share.matrix, new[:, None]])
    return shares


def storage_report(shares: list[EncodedShare]) -> dict:
    """Total reals held by the cluster and the blow-up over the raw data.

    The raw size is inferred from the first share's geometry (rows times
    columns is the same number whether the encoding was of A or of A
    transposed). Redundancy lands exactly at 2m / (m - 2t) when both A and
    its transpose are encoded and q divides both dimensions.
    """
    if not shares:
        raise DimensionMismatch("no shares to report on")
    total = sum(int(s.matrix.size) for s in shares)
    raw = shares[0].geometry.rows * shares[0].cols
    return {
        "total_reals": total,
        "raw_reals": raw,
        "redundancy_factor": total / raw,
    }
