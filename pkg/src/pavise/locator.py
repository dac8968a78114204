"""Error-locator matrices, null-space bases, and sparse support recovery.

The resilience scheme rests on a k x m matrix F whose row r holds the r-th
powers of m distinct nonzero real nodes (row 0 is all ones). With k = 2t,
the image F e of any t-sparse error vector e pins down both the support and
the values of e: the syndrome of a corrupted response round is enough to
name the corrupt workers exactly. Encoding matrices are drawn from the null
space of F so that honest work cancels out of every syndrome.

Support recovery over the reals is a Prony-type problem and is numerically
hostile in the raw power basis once k grows. Three choices keep it stable
here: nodes are placed at shifted Chebyshev angles cos((4i-1)pi/(4m)) and
ordered so the first k of them spread over the whole range, the null basis
is computed by barycentric interpolation rather than a linear solve, and
whenever every node lies in [-1, 1] the search runs in the cosine-moment
basis cos(r * arccos z), which spans the same row space as F with entries
bounded by one.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, InvalidThreshold, InvalidWorkerCount

NODE_SCHEMES = ("chebyshev", "equispaced")


def _make_nodes(m: int, scheme: str) -> np.ndarray:
    if scheme == "chebyshev":
        i = np.arange(1, m + 1)
        # Angle offset keeps every node nonzero for even m; all are distinct
        # because (4i-1)/(4m) stays strictly inside (0, 1).
        return np.cos((4 * i - 1) * np.pi / (4 * m))
    if scheme == "equispaced":
        return np.arange(1, m + 1) / m
    raise ValueError(f"unknown node scheme {scheme!r}, pick one of {NODE_SCHEMES}")


@dataclass(frozen=True, eq=False)
class ErrorLocator:
    """The syndrome matrix F, kept as nodes plus row count.

    nodes: m distinct nonzero reals, one per worker.
    rows:  k, the number of syndrome rows; k = 2t for budget t.
    """

    nodes: np.ndarray
    rows: int

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float).copy()
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        m = nodes.size
        if m < 2:
            raise InvalidWorkerCount(f"need at least 2 workers, got {m}")
        if np.any(nodes == 0.0):
            raise InvalidWorkerCount("locator nodes must be nonzero")
        if np.unique(nodes).size != m:
            raise InvalidWorkerCount("locator nodes must be distinct")
        if not 0 <= self.rows < m:
            raise InvalidThreshold(
                f"syndrome row count {self.rows} must lie in [0, m) for m={m}"
            )

    @property
    def m(self) -> int:
        return self.nodes.size

    @property
    def q(self) -> int:
        """Dimension of the null space, m - rows."""
        return self.m - self.rows

    @property
    def matrix(self) -> np.ndarray:
        """The k x m power matrix: entry (r, i) is nodes[i]**r."""
        return np.vander(self.nodes, self.rows, increasing=True).T


def _spread_prefix(m: int, k: int) -> np.ndarray:
    """Permutation of range(m) whose first k entries are evenly spread.

    The rref null basis interpolates from the first k nodes onto the other
    q, so those k must cover the whole range with the rest strictly
    interior: that keeps every cardinal value, and hence every basis entry,
    of order one. Taking the first k positions in natural order instead
    would force extrapolation and the entries would grow without bound.
    """
    if k <= 0 or k >= m:
        return np.arange(m)
    if k == 1:
        lead = np.array([0])
    else:
        lead = np.round(np.arange(k) * (m - 1) / (k - 1)).astype(int)
    mask = np.zeros(m, dtype=bool)
    mask[lead] = True
    return np.concatenate([lead, np.flatnonzero(~mask)])


def build_locator(m: int, t: int, scheme: str = "chebyshev") -> ErrorLocator:
    """Locator sized for m workers and corruption budget t (k = 2t rows)."""
    if m < 2:
        raise InvalidWorkerCount(f"need at least 2 workers, got {m}")
    if t < 0 or 2 * t >= m:
        raise InvalidThreshold(
            f"budget t={t} needs 0 <= 2t < m, but m={m}"
        )
    nodes = _make_nodes(m, scheme)
    if scheme == "chebyshev":
        nodes = nodes[_spread_prefix(m, 2 * t)]
    return ErrorLocator(nodes=nodes, rows=2 * t)


@dataclass(frozen=True, eq=False)
class NullBasis:
    """An m x q basis of the null space of a locator's matrix.

    variant 'rref' carries an identity block in its last q rows, which is
    what makes most workers' encoding rows one-coefficient sparse. variant
    'orthonormal' has orthonormal columns (needed when the basis doubles as
    a restriction map whose transpose must also be its pseudo-inverse).
    """

    coefficients: np.ndarray
    variant: str

    def __post_init__(self):
        coeff = np.asarray(self.coefficients, dtype=float)
        coeff.setflags(write=False)
        object.__setattr__(self, "coefficients", coeff)

    @property
    def m(self) -> int:
        return self.coefficients.shape[0]

    @property
    def q(self) -> int:
        return self.coefficients.shape[1]


def _moment_rows(nodes: np.ndarray, count: int) -> np.ndarray:
    """Rows cos(r * arccos z), r = 0..count-1; needs |z| <= 1."""
    theta = np.arccos(np.clip(nodes, -1.0, 1.0))
    return np.cos(np.arange(count)[:, None] * theta[None, :])


def null_basis(locator: ErrorLocator, variant: str = "rref") -> NullBasis:
    if variant not in ("rref", "orthonormal"):
        raise ValueError(f"unknown basis variant {variant!r}")
    m, k, q = locator.m, locator.rows, locator.q
    if k == 0:
        basis = np.eye(m)
    else:
        # The rref basis is Lagrange interpolation in disguise: with the
        # identity block pinned to the last q rows, solving F B = 0 for the
        # top block makes entry (i, j) equal minus the i-th cardinal
        # polynomial of the first k nodes evaluated at tail node j. The
        # barycentric form of those cardinal values reproduces every
        # polynomial of degree < k (power rows and cosine moments alike)
        # to machine precision without any linear solve.
        lead, tail = locator.nodes[:k], locator.nodes[k:]
        diff = lead[:, None] - lead[None, :]
        np.fill_diagonal(diff, 1.0)
        if k > 1:
            # Capacity-style rescaling; a common per-row factor cancels in
            # the ratio below, this only guards the products against
            # over- and underflow at large k.
            diff = diff * (4.0 / float(lead.max() - lead.min()))
        weights = 1.0 / np.prod(diff, axis=1)
        terms = weights[:, None] / (tail[None, :] - lead[:, None])
        basis = np.vstack([-(terms / terms.sum(axis=0)), np.eye(q)])
    if variant == "orthonormal":
        basis, _ = np.linalg.qr(basis)
    return NullBasis(coefficients=basis, variant=variant)


@dataclass(frozen=True, eq=False)
class SupportReport:
    """Outcome of a support search.

    support:    worker indices found corrupt (0-based), at most the budget.
                When the internal engine fails it carries the best
                candidate tried, unverified; the public searches return an
                empty set instead.
    magnitudes: length-m vector of recovered error values, zero off-support,
                or None when the search failed.
    residual:   leftover syndrome norm after explaining the support.
    failed:     True when no hypothesis within budget fit the syndrome.
    """

    support: frozenset
    magnitudes: np.ndarray | None
    residual: float
    failed: bool = False


# --- internal search engine -------------------------------------------------
#
# The same machinery serves two callers: recover_support works on raw power
# syndromes (dictionary rows z^r), while product decoding feeds cosine
# moments (rows cos(r arccos z)). Both dictionaries satisfy the three-term
# structure that turns the moment sequence of a sparse vector into a
# low-rank structured matrix whose left kernel is a polynomial vanishing
# exactly on the support nodes.


def _structured_slab(seq: np.ndarray, nu: int, basis: str) -> np.ndarray:
    """(k - nu) x (nu + 1) structured matrix of the moment sequence.

    Power basis: plain Hankel seq[r + j]. Cosine basis: the product
    cos(a)cos(b) = (cos(a+b) + cos(a-b)) / 2 gives a Toeplitz-plus-Hankel
    shape instead. Either way the matrix has rank exactly |support| in
    exact arithmetic whenever nu >= |support|.
    """
    rows = len(seq) - nu
    r = np.arange(rows)[:, None]
    j = np.arange(nu + 1)[None, :]
    if basis == "power":
        return seq[r + j]
    return 0.5 * (seq[r + j] + seq[np.abs(r - j)])


def _fit(dictionary: np.ndarray, seq: np.ndarray, support) -> tuple[float, np.ndarray]:
    sub = dictionary[:, list(support)]
    coef, *_ = np.linalg.lstsq(sub, seq, rcond=None)
    return float(np.linalg.norm(sub @ coef - seq)), coef


def _candidate_support(dictionary, seq, nu, basis):
    """Support guess of size nu from the annihilating-polynomial kernel.

    The smallest right singular vector of the structured slab gives the
    coefficients of a polynomial (in the dictionary's own basis) that is
    near zero on the support nodes. Rather than root-finding, evaluate it
    on all m nodes and keep the nu smallest magnitudes; there is no chance
    of a root drifting toward the wrong node that way.
    """
    slab = _structured_slab(seq, nu, basis)
    _, _, vt = np.linalg.svd(slab)
    poly = vt[-1]
    scores = np.abs(poly @ dictionary[: nu + 1])
    return np.sort(np.argsort(scores, kind="stable")[:nu])


def _polish(dictionary, seq, support, budget, gate, best_res):
    """Greedy local search around a near-miss support.

    Moves are single-index swaps, drops, and (under budget) additions,
    taking the first strict improvement and restarting. This repairs the
    occasional case where the kernel polynomial mislocates one node.
    """
    m = dictionary.shape[1]
    current = list(support)
    res = best_res
    for _ in range(4 * budget + 4):
        if res <= gate:
            break
        improved = False
        outside = [j for j in range(m) if j not in current]
        candidates = []
        for pos in range(len(current)):
            for j in outside:
                candidates.append(current[:pos] + [j] + current[pos + 1 :])
        if len(current) > 1:
            for pos in range(len(current)):
                candidates.append(current[:pos] + current[pos + 1 :])
        if len(current) < budget:
            for j in outside:
                candidates.append(current + [j])
        for cand in candidates:
            cand_res, _ = _fit(dictionary, seq, cand)
            if cand_res < 0.999 * res:
                current, res = cand, cand_res
                improved = True
                break
        if not improved:
            break
    return np.array(sorted(current), dtype=int), res


def _exhaustive(dictionary, seq, budget, gate):
    """Try every support up to the budget, smallest first. m <= 12 only."""
    m = dictionary.shape[1]
    best = (float(np.linalg.norm(seq)), np.array([], dtype=int))
    for size in range(1, budget + 1):
        for combo in itertools.combinations(range(m), size):
            res, _ = _fit(dictionary, seq, combo)
            if res <= gate:
                return np.array(combo, dtype=int), res
            if res < best[0]:
                best = (res, np.array(combo, dtype=int))
    return best[1], best[0]


def _finish(dictionary, seq, support, gate, m):
    """Final fit, detection-floor trim, and report assembly."""
    support = list(support)
    res, coef = _fit(dictionary, seq, support)
    keep = np.abs(coef) >= gate
    if support and not np.all(keep):
        trimmed = [s for s, k in zip(support, keep) if k]
        if trimmed != support:
            tres, tcoef = (np.linalg.norm(seq), np.array([])) if not trimmed else _fit(
                dictionary, seq, trimmed
            )
            if tres <= gate:
                support, res, coef = trimmed, float(tres), tcoef
    mags = np.zeros(m)
    mags[list(support)] = coef
    return SupportReport(
        support=frozenset(int(s) for s in support),
        magnitudes=mags,
        residual=float(res),
        failed=False,
    )


def _find_support(dictionary, seq, budget, tol, basis):
    """Locate at most `budget` dictionary columns whose combination is seq.

    dictionary: k x m matrix, row r the r-th basis function at each node.
    seq:        the length-k moment sequence to explain.
    Returns a SupportReport; failed=True when nothing within budget fits
    seq to within tol * ||seq||.
    """
    k, m = dictionary.shape
    snorm = float(np.linalg.norm(seq))
    gate = tol * snorm
    if snorm == 0.0:
        return SupportReport(frozenset(), np.zeros(m), 0.0, False)
    if budget == 0 or k == 0:
        return SupportReport(frozenset(), None, snorm, True)

    # Estimate the true sparsity from the numerical rank of the widest slab.
    slab = _structured_slab(seq, budget, basis)
    svals = np.linalg.svd(slab, compute_uv=False)
    nu_est = int(np.count_nonzero(svals > tol * svals[0]))
    nu_est = min(max(nu_est, 1), budget)

    order = [nu_est]
    order += [n for n in range(nu_est + 1, budget + 1)]
    order += [n for n in range(nu_est - 1, 0, -1)]

    best_res, best_support = np.inf, np.array([], dtype=int)
    for nu in order:
        support = _candidate_support(dictionary, seq, nu, basis)
        res, _ = _fit(dictionary, seq, support)
        if res <= gate:
            return _finish(dictionary, seq, support, gate, m)
        if res < best_res:
            best_res, best_support = res, support

    if best_support.size:
        support, res = _polish(dictionary, seq, best_support, budget, gate, best_res)
        if res <= gate:
            return _finish(dictionary, seq, support, gate, m)
        best_res, best_support = min(best_res, res), support

    if m <= 12:
        support, res = _exhaustive(dictionary, seq, budget, gate)
        if res <= gate:
            return _finish(dictionary, seq, support, gate, m)
        if res < best_res:
            best_res, best_support = res, support

    # The best candidate rides along unverified: a caller with an
    # out-of-band consistency check may still be able to use it.
    return SupportReport(
        frozenset(int(s) for s in np.atleast_1d(best_support)),
        None,
        float(best_res),
        True,
    )


def recover_support(
    locator: ErrorLocator,
    syndrome: np.ndarray,
    t: int,
    tol: float = 1e-8,
) -> SupportReport:
    """Find the at-most-t-sparse error vector e with F e = syndrome.

    The search declares failure rather than guessing when no support of
    size <= t reproduces the syndrome to within tol * ||syndrome||.
    """
    syndrome = np.asarray(syndrome, dtype=float).ravel()
    k = locator.rows
    if syndrome.size != k:
        raise DimensionMismatch(
            f"syndrome has {syndrome.size} entries, locator has {k} rows"
        )
    if t < 0 or 2 * t > k:
        raise InvalidThreshold(f"budget t={t} needs 0 <= 2t <= k={k}")
    if t == 0 or k == 0:
        snorm = float(np.linalg.norm(syndrome))
        if snorm == 0.0:
            return SupportReport(frozenset(), np.zeros(locator.m), 0.0, False)
        return SupportReport(frozenset(), None, snorm, True)
    report = _find_support(locator.matrix, syndrome, t, tol, "power")
    if report.failed:
        # Public contract: a failed search names nobody. The unverified
        # candidate the engine carries is for callers with their own
        # consistency check, which this entry point's callers lack.
        return SupportReport(frozenset(), None, report.residual, True)
    return report


def joint_support(
    locator: ErrorLocator,
    syndromes: np.ndarray,
    seed=None,
    t: int | None = None,
    tol: float = 1e-8,
) -> SupportReport:
    """Recover one support shared by many syndromes at once.

    syndromes is p x k, one row per linear system that was answered by the
    same workers in the same round. A worker that corrupted any of the p
    systems shows up in each row's error pattern at the same index, so a
    single random Gaussian combination of the rows exposes the union
    support with probability one, at the cost of one search instead of p.
    Magnitudes in the report refer to the combined syndrome, not to any
    individual system.
    """
    syndromes = np.atleast_2d(np.asarray(syndromes, dtype=float))
    if syndromes.shape[1] != locator.rows:
        raise DimensionMismatch(
            f"syndromes have {syndromes.shape[1]} columns, locator has "
            f"{locator.rows} rows"
        )
    if t is None:
        t = locator.rows // 2
    alpha = np.random.default_rng(seed).standard_normal(syndromes.shape[0])
    return recover_support(locator, alpha @ syndromes, t, tol)
