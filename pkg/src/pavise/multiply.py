"""Coded matrix-vector products and their exact decoding.

Round shape: the master broadcasts a vector v, worker i returns its p-entry
payload S_i A v, and the master reassembles A v from whichever responses
survive. Honest payloads, read across workers one block at a time, live in
the column span of the null basis B, so corrupt workers stick out of the
syndrome no matter what they send. Missing workers are zero-filled, which
turns a straggler into an error at a known index.

Decoding runs the support search once on a random Gaussian combination of
all the block systems (a shared-support trick: the union support comes out
of a single search). Suspect workers are then set aside, the surviving rows
of B are inverted through a QR factorization, and two safety nets guard the
result: a residual gate against the honest rows, and a direct payload check
that re-derives what every suspect should have sent. Failing the gate
triggers a retry with a fresh random combination before giving up.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .encoding import BlockGeometry, EncodedShare
from .errors import BudgetExceeded, DimensionMismatch, RankDeficient
from .flops import OpCounter, charge
from .locator import ErrorLocator, NullBasis, _find_support, _moment_rows

# Master-side decode work stays below MASTER_FLOP_FACTOR * (1 + eps) * n * m
# scalar multiplies for a length-n product (eps the storage overhead rate);
# the constant is generous because it also covers the syndrome search.
MASTER_FLOP_FACTOR = 8


@dataclass(eq=False)
class WorkerResponse:
    """payload is the p-vector S_i A v, or None for a straggler."""

    worker_id: int
    payload: np.ndarray | None


@dataclass(eq=False)
class DecodeOutcome:
    product: np.ndarray
    corrupt_set: frozenset
    erased_set: frozenset
    residual: float
    metadata: dict = field(default_factory=dict)


def worker_product(
    share: EncodedShare, v: np.ndarray, counter: OpCounter | None = None
) -> np.ndarray:
    """One worker's round: multiply the stored share by the broadcast v."""
    v = np.asarray(v, dtype=float).ravel()
    if v.size != share.cols:
        raise DimensionMismatch(
            f"vector has {v.size} entries, share has {share.cols} columns"
        )
    charge(counter, share.matrix.shape[0] * share.cols)
    return share.matrix @ v


def sparse_product(
    share: EncodedShare,
    indices: np.ndarray,
    values: np.ndarray,
    counter: OpCounter | None = None,
) -> np.ndarray:
    """Like worker_product for a v that is zero outside `indices`.

    Cost scales with the number of supplied entries, not with the share
    width, which is what keeps coordinate-style updates cheap.
    """
    indices = np.asarray(indices, dtype=int).ravel()
    values = np.asarray(values, dtype=float).ravel()
    if indices.size != values.size:
        raise DimensionMismatch("indices and values differ in length")
    if indices.size and (indices.min() < 0 or indices.max() >= share.cols):
        raise DimensionMismatch(
            f"column indices out of range for {share.cols} columns"
        )
    charge(counter, share.matrix.shape[0] * indices.size)
    if indices.size == 0:
        return np.zeros(share.matrix.shape[0])
    return share.matrix[:, indices] @ values


def collect_payloads(
    responses: list, m: int, length: int
) -> tuple[np.ndarray, frozenset]:
    """Zero-filled m x length payload matrix plus the set of silent workers."""
    payload_matrix = np.zeros((m, length))
    seen = set()
    erased = set(range(m))
    for resp in responses:
        i = resp.worker_id
        if not 0 <= i < m or i in seen:
            raise DimensionMismatch(f"bad or repeated worker id {i}")
        seen.add(i)
        if resp.payload is None:
            continue
        payload = np.asarray(resp.payload, dtype=float).ravel()
        if payload.size != length:
            raise DimensionMismatch(
                f"worker {i} sent {payload.size} entries, expected {length}"
            )
        payload_matrix[i] = payload
        erased.discard(i)
    return payload_matrix, frozenset(erased)


def decode_systems(
    payload_matrix: np.ndarray,
    erased: frozenset,
    locator: ErrorLocator,
    basis: NullBasis,
    widths: list[int],
    tol: float = 1e-8,
    seed=None,
    attempts: int = 4,
    counter: OpCounter | None = None,
    mode: str = "strict",
) -> tuple[np.ndarray, frozenset, float, dict]:
    """Solve the stacked systems payload[:, j] = B[:, :widths[j]] x_j + e.

    This is the shared decoding core: the j-th column of the m x c payload
    matrix is one linear system over the first widths[j] basis columns,
    all systems corrupted at the same unknown worker indices (plus the
    known erased ones, already zero-filled). Returns a q x c solution array
    (each column zero-padded past its width), the verified corrupt set,
    the largest per-system residual, and decode metadata.

    mode "strict" raises BudgetExceeded when no hypothesis passes the
    consistency gate. mode "best-effort" falls back to the most consistent
    hypothesis seen instead, with metadata["degraded"] = True: payloads
    whose entries cancel far below the scale of the data that produced
    them carry worker roundoff past any gate stated relative to the
    payload itself, and a caller that keeps iterating (an optimizer near a
    stationary point) prefers that answer over an aborted round.
    """
    if mode not in ("strict", "best-effort"):
        raise ValueError(f"unknown decode mode {mode!r}")
    m, k, q = locator.m, locator.rows, locator.q
    if basis.m != m or basis.q != q:
        raise DimensionMismatch("basis does not match the locator")
    count = payload_matrix.shape[1]
    if len(widths) != count:
        raise DimensionMismatch("one width per payload column required")
    if any(w < 1 or w > q for w in widths):
        raise DimensionMismatch(f"system widths must lie in [1, {q}]")
    budget = k // 2
    if len(erased) > budget:
        raise BudgetExceeded(
            f"{len(erased)} workers silent, code absorbs at most {budget}"
        )
    widths = list(widths)

    if k == 0:
        # Trivial code, B = I: worker i holds entry i of every system.
        solution = np.zeros((q, count))
        for j, w in enumerate(widths):
            solution[:w, j] = payload_matrix[:w, j]
        return solution, frozenset(), 0.0, {"seed": seed, "attempts": 0, "degraded": False}

    # Work in the cosine-moment basis whenever the nodes allow it: same row
    # space as the power rows, entries bounded by one.
    if np.max(np.abs(locator.nodes)) <= 1.0:
        dictionary = _moment_rows(locator.nodes, k)
        flavor = "chebyshev"
    else:
        dictionary = locator.matrix
        flavor = "power"

    rng = np.random.default_rng(seed)
    scale = float(np.linalg.norm(payload_matrix))
    # Floating-point leakage from honest rows never vanishes entirely, and
    # payloads produced with heavy cancellation (long sums of O(1) terms
    # landing near zero) leak well above eps relative to their own norm.
    # Syndromes at this level mean a clean round; corruptions below it are
    # not worth flagging because they cannot move the solution past the
    # residual gate.
    noise_floor = 1e-9 * scale * np.sqrt(k)

    def arbitrate(suspects, solution, dev_floor=0.0):
        # A suspect whose payload matches what it should have sent was a
        # false alarm, not a corruption. In a degraded round dev_floor is
        # the accepted misfit: deviations below it look exactly like the
        # surviving rows' own roundoff.
        corrupt = set()
        for i in sorted(suspects - erased):
            coeff = basis.coefficients[i]
            expected = np.array(
                [coeff[: widths[j]] @ solution[: widths[j], j] for j in range(count)]
            )
            charge(counter, q * count)
            dev = np.linalg.norm(payload_matrix[i] - expected)
            gate = max(
                tol * max(float(np.linalg.norm(expected)), noise_floor, 1e-300),
                dev_floor,
            )
            if dev > gate:
                corrupt.add(i)
        return frozenset(corrupt)

    failure = None
    fallback = None
    fallback_ratio = np.inf
    for attempt in range(attempts):
        alpha = rng.standard_normal(count)
        combined = payload_matrix @ alpha
        seq = dictionary @ combined
        charge(counter, m * count + k * m)

        seq_norm = float(np.linalg.norm(seq))
        if seq_norm <= noise_floor:
            suspects = frozenset()
        else:
            # The search gate scales with the syndrome, but the honest
            # rows leak roundoff proportional to the payload. A small true
            # corruption puts the gate below that leakage, so keep it at
            # or above the floor.
            search_tol = max(tol, noise_floor / seq_norm)
            report = _find_support(dictionary, seq, budget, search_tol, flavor)
            charge(counter, k * k * budget)
            if report.failed and not report.support:
                failure = f"support search failed (residual {report.residual:.3e})"
                continue
            # A candidate that missed the syndrome gate is still worth
            # testing: payloads produced with heavy cancellation leak
            # roundoff past any output-scale gate, and the residual check
            # on the surviving rows below is the certificate that counts.
            suspects = report.support

        trusted = sorted(set(range(m)) - suspects - erased)
        if len(trusted) < q:
            failure = "too few trusted rows"
            continue

        sub = basis.coefficients[trusted]
        rhs_all = payload_matrix[trusted]
        solution = np.zeros((q, count))
        residuals = np.zeros(count)
        for width in sorted(set(widths)):
            cols = [j for j, w in enumerate(widths) if w == width]
            qmat, rmat = np.linalg.qr(sub[:, :width])
            diag = np.abs(np.diag(rmat))
            if diag.min() <= 1e-12 * max(diag.max(), 1.0):
                raise RankDeficient("surviving rows do not determine the result")
            rhs = rhs_all[:, cols]
            x = np.linalg.solve(rmat, qmat.T @ rhs)
            solution[:width, cols] = x
            residuals[cols] = np.linalg.norm(sub[:, :width] @ x - rhs, axis=0)
            charge(
                counter,
                2 * len(trusted) * width**2
                + 2 * len(trusted) * width * len(cols),
            )

        gate = tol * max(float(np.linalg.norm(rhs_all)), 1e-300)
        misfit = float(np.linalg.norm(residuals))
        if misfit > gate:
            failure = "residual gate"
            if misfit / gate < fallback_ratio:
                fallback_ratio = misfit / gate
                fallback = (suspects, solution, residuals)
            continue

        return (
            solution,
            arbitrate(suspects, solution),
            float(residuals.max()),
            {"seed": seed, "attempts": attempt + 1, "degraded": False},
        )

    if mode == "best-effort" and fallback is not None:
        suspects, solution, residuals = fallback
        # Factor 4: the fit soaks up part of the surviving rows' noise, and
        # one worker's share of it can sit a few times above the leftover.
        dev_floor = 4.0 * float(np.linalg.norm(residuals))
        return (
            solution,
            arbitrate(suspects, solution, dev_floor=dev_floor),
            float(residuals.max()),
            {"seed": seed, "attempts": attempts, "degraded": True},
        )

    raise BudgetExceeded(
        f"no corruption pattern within budget {budget} explains the "
        f"responses after {attempts} attempts ({failure})"
    )


def decode(
    responses: list[WorkerResponse],
    locator: ErrorLocator,
    basis: NullBasis,
    geometry: BlockGeometry,
    tol: float = 1e-8,
    seed=None,
    attempts: int = 4,
    counter: OpCounter | None = None,
    mode: str = "strict",
) -> DecodeOutcome:
    """Recover the exact length-`geometry.rows` product from the responses.

    Raises BudgetExceeded when no corruption hypothesis within the code's
    budget explains the responses (see decode_systems for the alternative
    mode "best-effort"), and RankDeficient if too few rows survive to pin
    the product down.
    """
    if geometry.q != locator.q:
        raise DimensionMismatch("geometry block width does not match the code")
    p = geometry.p
    payload_matrix, erased = collect_payloads(responses, locator.m, p)
    widths = [geometry.width(j) for j in range(p)]
    solution, corrupt, residual, meta = decode_systems(
        payload_matrix,
        erased,
        locator,
        basis,
        widths,
        tol=tol,
        seed=seed,
        attempts=attempts,
        counter=counter,
        mode=mode,
    )
    product = np.empty(geometry.rows)
    for j in range(p):
        product[geometry.block_slice(j)] = solution[: widths[j], j]
    return DecodeOutcome(
        product=product,
        corrupt_set=corrupt,
        erased_set=erased,
        residual=residual,
        metadata=meta,
    )
