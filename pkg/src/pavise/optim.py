"""Encoded optimizers for generalized linear models, plus serial baselines.

All three optimizers run on a simulated cluster and produce, under any
admissible adversary, the very same iterates as their uncoded serial
counterparts; corruption costs retries at worst, never accuracy.

  PGD   two coded matrix-vector rounds per step: decode Xw, form the loss
        derivative at the master (labels live at the master), decode the
        gradient X'phi, then apply the proximal update.
  CD    workers hold columns of X R (R an orthonormal null-space basis) and
        a private slice v_i of the reparameterized iterate; each iteration
        updates tau coordinate blocks, and the master decodes the touched
        parameter entries from the workers' returned v-slices.
  SGD   shares encode plain rows of X; the master broadcasts one row index,
        decodes that row exactly, and computes the stochastic gradient
        locally, so any objective differentiable at the master works.

Gradients are unnormalized (no 1/n): step sizes are chosen accordingly,
and the default constant step 1/L estimates L = lambda_max(X'X) by power
iteration.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .cluster import Cluster, ClusterConfig, run_round
from .encoding import BlockGeometry, EncodedShare, encode
from .errors import ConfigError, DimensionMismatch, OutOfRange
from .flops import charge
from .locator import ErrorLocator, NullBasis, build_locator, null_basis
from .multiply import (
    collect_payloads,
    decode,
    decode_systems,
    sparse_product,
    worker_product,
)

_TAG_DECODE = 4

LOSSES = ("squared", "logistic")
REGULARIZERS = ("none", "l1", "l2", "box")


@dataclass(frozen=True)
class ModelSpec:
    """Loss plus regularizer defining the objective sum_i l(x_i'w; y_i) + h(w)."""

    loss: str = "squared"
    regularizer: str = "none"
    lam: float = 0.0
    lo: float = -1.0
    hi: float = 1.0

    def __post_init__(self):
        if self.loss not in LOSSES:
            raise ValueError(f"unknown loss {self.loss!r}")
        if self.regularizer not in REGULARIZERS:
            raise ValueError(f"unknown regularizer {self.regularizer!r}")
        if self.lam < 0:
            raise ValueError("regularization weight cannot be negative")
        if self.lo > self.hi:
            raise ValueError("box bounds out of order")


@dataclass(eq=False)
class GlmState:
    """Iterate plus the master's cached Xw for it.

    The cache is refreshed by a decode every time w changes, so after any
    accepted step it matches X @ w to decoding accuracy. SGD does not
    maintain the cache and leaves it None.
    """

    w: np.ndarray
    xw: np.ndarray | None
    iteration: int = 0


def loss_derivative(model: ModelSpec, u: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Componentwise l'(u; y)."""
    if model.loss == "squared":
        return u - y
    return 1.0 / (1.0 + np.exp(-u)) - y


def regularizer_value(model: ModelSpec, w: np.ndarray) -> float:
    if model.regularizer == "l1":
        return model.lam * float(np.sum(np.abs(w)))
    if model.regularizer == "l2":
        return 0.5 * model.lam * float(w @ w)
    return 0.0


def objective_value(model: ModelSpec, X, y, w) -> float:
    u = X @ w
    if model.loss == "squared":
        data = 0.5 * float(np.sum((u - y) ** 2))
    else:
        data = float(np.sum(np.logaddexp(0.0, u) - y * u))
    return data + regularizer_value(model, w)


def prox(model: ModelSpec, z: np.ndarray, step: float) -> np.ndarray:
    """Proximal map of step * regularizer at z."""
    if step <= 0:
        raise ValueError("prox needs a positive step")
    z = np.asarray(z, dtype=float)
    if model.regularizer == "none":
        return z.copy()
    if model.regularizer == "l1":
        shift = model.lam * step
        return np.sign(z) * np.maximum(np.abs(z) - shift, 0.0)
    if model.regularizer == "l2":
        return z / (1.0 + model.lam * step)
    return np.clip(z, model.lo, model.hi)


def default_step_size(X: np.ndarray, iterations: int = 20, seed: int = 0) -> float:
    """Constant step 1/L with L = lambda_max(X'X) from power iteration."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(X.shape[1])
    v /= np.linalg.norm(v)
    estimate = 1.0
    for _ in range(iterations):
        u = X.T @ (X @ v)
        estimate = float(np.linalg.norm(u))
        if estimate == 0.0:
            return 1.0
        v = u / estimate
    return 1.0 / estimate


# --- cluster assembly ---------------------------------------------------------


def _code_for(config: ClusterConfig) -> tuple[ErrorLocator, NullBasis]:
    locator = build_locator(config.m, config.code_budget)
    return locator, null_basis(locator, "rref")


def make_mv_cluster(a: np.ndarray, config: ClusterConfig) -> Cluster:
    """Cluster holding a single matrix, for plain coded products of A v."""
    locator, basis = _code_for(config)
    return Cluster(
        config,
        locator,
        basis,
        shares={"A": encode(basis, a, "X")},
    )


def make_pgd_cluster(X: np.ndarray, y: np.ndarray, config: ClusterConfig) -> Cluster:
    """Cluster provisioned for two-round gradient work: X and X' shares."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if y.size != X.shape[0]:
        raise DimensionMismatch("label count does not match the sample count")
    locator, basis = _code_for(config)
    return Cluster(
        config,
        locator,
        basis,
        shares={
            "X": encode(basis, X, "X"),
            "XT": encode(basis, X.T, "XT"),
        },
        master_data={"y": y, "n": X.shape[0], "d": X.shape[1]},
    )


def make_sgd_cluster(X: np.ndarray, y: np.ndarray, config: ClusterConfig) -> Cluster:
    """Cluster holding encoded sample rows (columns of X') for SGD."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if y.size != X.shape[0]:
        raise DimensionMismatch("label count does not match the sample count")
    locator, basis = _code_for(config)
    return Cluster(
        config,
        locator,
        basis,
        shares={"XT": encode(basis, X.T, "XT")},
        master_data={"y": y, "n": X.shape[0], "d": X.shape[1]},
    )


@dataclass(eq=False)
class CdCodebook:
    """Both codes used by encoded coordinate descent.

    r_basis (orthonormal columns) reparameterizes w = R v; because its
    transpose is also its pseudo-inverse, worker i can keep the slice
    v_i = S_i w consistent using only its own stored data. l_basis is the
    ordinary rref code for the sample-side rounds that refresh the Xw
    cache. The f-map is the parameter partition: block u of every v_i
    corresponds to parameter entries f(u), q at a time with a short final
    block.
    """

    locator: ErrorLocator
    r_basis: NullBasis
    l_basis: NullBasis
    sample_geometry: BlockGeometry
    param_geometry: BlockGeometry

    @property
    def p1(self) -> int:
        return self.sample_geometry.p

    @property
    def p2(self) -> int:
        return self.param_geometry.p

    def f(self, u: int) -> slice:
        """Parameter indices touched by coordinate block u."""
        return self.param_geometry.block_slice(u)


def make_cd_cluster(
    X: np.ndarray, y: np.ndarray, config: ClusterConfig, w0: np.ndarray | None = None
) -> tuple[Cluster, CdCodebook]:
    """Cluster plus codebook for encoded coordinate descent.

    Workers receive rref-encoded X shares (cache refresh rounds), the
    columns of X R_i (their gradient stake), and an initial private slice
    v_i = S_i w0.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    n, d = X.shape
    if y.size != n:
        raise DimensionMismatch("label count does not match the sample count")
    if config.s > 0:
        # A worker that misses an update round keeps a stale v slice for
        # the rest of the run, which the decoder would keep flagging as a
        # corruption. The other optimizers are stateless per round and
        # tolerate stragglers; this one refuses upfront.
        raise ConfigError(
            "coordinate descent workers carry per-round state and cannot "
            "absorb stragglers; run with s = 0"
        )
    if w0 is None:
        w0 = np.zeros(d)
    w0 = np.asarray(w0, dtype=float).ravel()
    if w0.size != d:
        raise DimensionMismatch("w0 length does not match the feature count")

    locator = build_locator(config.m, config.code_budget)
    l_basis = null_basis(locator, "rref")
    r_basis = null_basis(locator, "orthonormal")
    q = locator.q
    sample_geom = BlockGeometry(rows=n, q=q)
    param_geom = BlockGeometry(rows=d, q=q)
    codebook = CdCodebook(locator, r_basis, l_basis, sample_geom, param_geom)

    cluster = Cluster(
        config,
        locator,
        l_basis,
        shares={"X": encode(l_basis, X, "X")},
        master_data={"y": y, "n": n, "d": d},
    )

    p2, l = param_geom.p, param_geom.l
    body = X[:, : (p2 - 1) * q].reshape(n, p2 - 1, q) if p2 > 1 else None
    tail = X[:, (p2 - 1) * q :]
    xr_shares = []
    for i in range(config.m):
        coeff = r_basis.coefficients[i]
        xr = np.empty((n, p2))
        if p2 > 1:
            xr[:, : p2 - 1] = body @ coeff
        xr[:, p2 - 1] = tail @ coeff[:l]
        xr_shares.append(
            EncodedShare(
                worker_id=i,
                matrix=xr,
                provenance="XR-columns",
                coefficients=coeff,
                geometry=param_geom,
            )
        )
        # Private reparameterized slice of the starting point.
        v = np.empty(p2)
        if p2 > 1:
            v[: p2 - 1] = w0[: (p2 - 1) * q].reshape(p2 - 1, q) @ coeff
        v[p2 - 1] = w0[(p2 - 1) * q :] @ coeff[:l]
        cluster.worker_state[i]["v"] = v
    cluster.shares["XR"] = xr_shares
    return cluster, codebook


# --- coded rounds -------------------------------------------------------------


def _mv_compute(share, request, counter, worker_id):
    return worker_product(share, request, counter)


def _sparse_compute(share, request, counter, worker_id):
    indices, values = request
    return sparse_product(share, indices, values, counter)


def _sgd_compute(share, request, counter, worker_id):
    return sparse_product(
        share, np.array([request]), np.array([1.0]), counter
    )


def _coded_round(cluster, key, request, compute, basis=None):
    """Run one round and decode it, charging master time and flops.

    Decoding runs in best-effort mode: near a stationary point the honest
    payloads cancel to roundoff level and cannot certify a strict-tolerance
    decode, yet the iteration should carry on with the best hypothesis.
    """
    round_id = cluster.round_index
    responses = run_round(cluster, key, request, compute)
    geometry = cluster.shares[key][0].geometry
    started = time.perf_counter()
    outcome = decode(
        responses,
        cluster.locator,
        basis if basis is not None else cluster.basis,
        geometry,
        seed=[cluster.config.seed, round_id, _TAG_DECODE],
        counter=cluster.master_counter,
        mode="best-effort",
    )
    cluster.master_time += time.perf_counter() - started
    return outcome


def glm_init(cluster: Cluster, w0: np.ndarray) -> GlmState:
    """Starting state with a decoded cache: one coded round for X w0."""
    w0 = np.asarray(w0, dtype=float).ravel()
    outcome = _coded_round(cluster, "X", w0, _mv_compute)
    return GlmState(w=w0.copy(), xw=outcome.product, iteration=0)


def coded_gradient(cluster: Cluster, model: ModelSpec, w: np.ndarray):
    """Two coded rounds for the full gradient X' l'(Xw; y) at w.

    Returns (gradient, Xw); both are exact to decoding accuracy no matter
    which admissible adversary is active.
    """
    y = cluster.master_data["y"]
    xw = _coded_round(cluster, "X", np.asarray(w, dtype=float), _mv_compute).product
    phi = loss_derivative(model, xw, y)
    charge(cluster.master_counter, phi.size)
    grad = _coded_round(cluster, "XT", phi, _mv_compute).product
    return grad, xw


def pgd_step(
    cluster: Cluster, model: ModelSpec, state: GlmState, step: float
) -> GlmState:
    """One proximal gradient step, two coded rounds.

    The cached Xw stands in for the first round of coded_gradient, and a
    fresh round refreshes the cache at the new iterate, keeping the
    GlmState invariant true on return.
    """
    y = cluster.master_data["y"]
    phi = loss_derivative(model, state.xw, y)
    charge(cluster.master_counter, phi.size)
    grad = _coded_round(cluster, "XT", phi, _mv_compute).product
    moved = state.w - step * grad
    charge(cluster.master_counter, moved.size)
    w_new = prox(model, moved, step)
    charge(cluster.master_counter, moved.size)
    outcome = _coded_round(cluster, "X", w_new, _mv_compute)
    return GlmState(w=w_new, xw=outcome.product, iteration=state.iteration + 1)


def coordinate_schedule(p2: int, tau: int, iteration: int) -> np.ndarray:
    """Round-robin coordinate blocks: tau consecutive blocks, wrapping."""
    start = (iteration * tau) % p2
    return np.sort((start + np.arange(tau)) % p2)


def cd_iteration(
    cluster: Cluster,
    codebook: CdCodebook,
    state: GlmState,
    U,
    model: ModelSpec,
    step: float,
) -> GlmState:
    """One encoded coordinate-descent iteration over blocks U.

    Protocol: the master broadcasts (phi'(Xw), U); each worker updates its
    private slice v_i on blocks U using its stored X R_i columns and sends
    back the updated entries; the master decodes the touched parameter
    entries w_{f(U)} from those slices. A second, sparse round (only the
    changed coordinates travel) refreshes the master's Xw cache, so the
    returned state satisfies the cache invariant.
    """
    U = np.asarray(sorted(set(int(u) for u in np.atleast_1d(U))), dtype=int)
    p2 = codebook.p2
    if U.size == 0 or U.min() < 0 or U.max() >= p2:
        raise OutOfRange(f"coordinate blocks must be a nonempty subset of [0, {p2})")
    y = cluster.master_data["y"]
    config = cluster.config

    phi = loss_derivative(model, state.xw, y)
    charge(cluster.master_counter, phi.size)

    def v_update(share, request, counter, worker_id):
        g, u_idx = request
        upd = share.matrix[:, u_idx].T @ g
        charge(counter, share.matrix.shape[0] * u_idx.size + u_idx.size)
        v = cluster.worker_state[worker_id]["v"]
        new_slice = v[u_idx] - step * upd
        if counter is not None:
            # Stored state always takes the honest update; the decoy pass
            # (counter None) fabricates a message without touching it.
            v[u_idx] = new_slice
        return new_slice

    round_id = cluster.round_index
    responses = run_round(cluster, "XR", (phi, U), v_update)
    payloads, erased = collect_payloads(responses, config.m, U.size)
    widths = [codebook.param_geometry.width(int(u)) for u in U]
    started = time.perf_counter()
    solution, corrupt, residual, meta = decode_systems(
        payloads,
        erased,
        codebook.locator,
        codebook.r_basis,
        widths,
        seed=[config.seed, round_id, _TAG_DECODE],
        counter=cluster.master_counter,
        mode="best-effort",
    )
    cluster.master_time += time.perf_counter() - started

    w_new = state.w.copy()
    for j, u in enumerate(U):
        w_new[codebook.f(int(u))] = solution[: widths[j], j]

    # Sparse cache refresh: only the touched coordinates are broadcast.
    idx = np.concatenate(
        [np.arange(codebook.f(int(u)).start, codebook.f(int(u)).stop) for u in U]
    )
    delta = w_new[idx] - state.w[idx]
    outcome = _coded_round(cluster, "X", (idx, delta), _sparse_compute)
    xw_new = state.xw + outcome.product
    return GlmState(w=w_new, xw=xw_new, iteration=state.iteration + 1)


def sgd_step(
    cluster: Cluster,
    state: GlmState,
    model: ModelSpec,
    rng: np.random.Generator,
    step: float,
    grad_fn=None,
) -> GlmState:
    """One SGD step: broadcast one row index, decode that row, step locally.

    The broadcast is just the integer index (log n bits); the decoded row
    equals the original data row exactly, so grad_fn may implement any
    objective, not only the GLM losses.
    """
    y = cluster.master_data["y"]
    n = cluster.master_data["n"]
    index = int(rng.integers(0, n))
    outcome = _coded_round(cluster, "XT", index, _sgd_compute)
    x_row = outcome.product
    if grad_fn is not None:
        grad = grad_fn(x_row, float(y[index]), state.w)
    else:
        u = float(x_row @ state.w)
        charge(cluster.master_counter, x_row.size)
        factor = float(loss_derivative(model, np.array([u]), y[index : index + 1])[0])
        grad = factor * x_row
        charge(cluster.master_counter, x_row.size)
    w_new = state.w - step * grad
    charge(cluster.master_counter, w_new.size)
    return GlmState(w=w_new, xw=None, iteration=state.iteration + 1)


# --- serial baselines ---------------------------------------------------------


def serial_pgd(X, y, model: ModelSpec, w0, iterations: int, step: float):
    """Uncoded reference PGD; returns the list of iterates w_1 .. w_T."""
    w = np.asarray(w0, dtype=float).copy()
    out = []
    for _ in range(iterations):
        grad = X.T @ loss_derivative(model, X @ w, y)
        w = prox(model, w - step * grad, step)
        out.append(w.copy())
    return out


def serial_cd(X, y, model: ModelSpec, w0, iterations: int, tau: int, q: int, step: float):
    """Uncoded reference block coordinate descent with the same f-map.

    Blocks follow the same round-robin schedule as the coded run; returns
    the list of iterates w_1 .. w_T.
    """
    geom = BlockGeometry(rows=X.shape[1], q=q)
    w = np.asarray(w0, dtype=float).copy()
    out = []
    for it in range(iterations):
        phi = loss_derivative(model, X @ w, y)
        for u in coordinate_schedule(geom.p, tau, it):
            sl = geom.block_slice(int(u))
            w[sl] = w[sl] - step * (X[:, sl].T @ phi)
        out.append(w.copy())
    return out


def serial_sgd(X, y, model: ModelSpec, w0, indices, step: float, grad_fn=None):
    """Uncoded reference SGD over a fixed index sequence."""
    w = np.asarray(w0, dtype=float).copy()
    out = []
    for r in indices:
        x_row = X[int(r)]
        if grad_fn is not None:
            grad = grad_fn(x_row, float(y[int(r)]), w)
        else:
            factor = float(
                loss_derivative(model, np.array([x_row @ w]), y[int(r) : int(r) + 1])[0]
            )
            grad = factor * x_row
        w = w - step * grad
        out.append(w.copy())
    return out
