"""Acceptance suite: one test per delivery criterion, run with -v -s.

Each test prints a single PASS line with the measured numbers once its
assertions hold, so `pytest tests/test_acceptance.py -v -s` yields one
pass/fail line per criterion plus the measurements behind it.
"""

import itertools
import time

import numpy as np
import pytest

from pavise.cluster import ClusterConfig
from pavise.encoding import BlockGeometry, WorkerEncoder, append_column, append_row, encode, storage_report
from pavise.experiments import gen_dataset
from pavise.flops import OpCounter
from pavise.locator import build_locator, null_basis, recover_support
from pavise.multiply import WorkerResponse, decode, worker_product
from pavise.optim import (
    GlmState,
    ModelSpec,
    cd_iteration,
    coordinate_schedule,
    default_step_size,
    glm_init,
    make_cd_cluster,
    make_pgd_cluster,
    make_sgd_cluster,
    pgd_step,
    serial_cd,
    serial_pgd,
    serial_sgd,
    sgd_step,
)

KINDS = ("gaussian-noise", "sign-flip", "decoy-vector")


def corrupt_payload(kind, response, share, v, rng):
    """Replace one honest payload with the named adversary's output."""
    if kind == "gaussian-noise":
        return response.payload + rng.normal(0.0, 100.0, response.payload.shape)
    if kind == "sign-flip":
        return -response.payload
    return worker_product(share, rng.standard_normal(v.shape))


def rel_err(got, want):
    scale = np.linalg.norm(want)
    return np.linalg.norm(got - want) / (scale if scale > 0 else 1.0)


def test_01_exact_multiply_under_attack():
    """Decoded products are exact and every liar is named, at full budget."""
    sizes = (5, 10, 15, 31)
    trials_per = 500
    worst = 0.0
    total = 0
    started = time.perf_counter()
    for m in sizes:
        for t in range((m - 1) // 2 + 1):
            loc = build_locator(m, t)
            bas = null_basis(loc)
            n, d = 3 * loc.q + 1, 4
            rng = np.random.default_rng([9001, m, t])
            A = rng.standard_normal((n, d))
            shares = encode(bas, A)
            geom = shares[0].geometry
            for trial in range(trials_per):
                v = rng.standard_normal(d)
                resp = [
                    WorkerResponse(i, worker_product(shares[i], v))
                    for i in range(m)
                ]
                nbad = int(rng.integers(0, t + 1)) if t else 0
                bad = set(rng.choice(m, size=nbad, replace=False).tolist())
                kind = KINDS[trial % 3]
                for i in bad:
                    resp[i] = WorkerResponse(
                        i, corrupt_payload(kind, resp[i], shares[i], v, rng)
                    )
                out = decode(resp, loc, bas, geom, seed=[9002, m, t, trial])
                assert set(out.corrupt_set) == bad, (m, t, trial, kind)
                err = rel_err(out.product, A @ v)
                assert err < 1e-8, (m, t, trial, kind, err)
                worst = max(worst, err)
                total += 1
    elapsed = time.perf_counter() - started
    assert elapsed < 120.0
    print(
        f"\nPASS exact multiply under attack: {total} trials, "
        f"worst rel err {worst:.2e}, {elapsed:.1f}s"
    )


def test_02_stragglers_and_liars_share_the_budget():
    """m=15 decodes survive every split of 7 failures into missing + lying."""
    m = 15
    worst = 0.0
    for s in range(8):
        for t in range(8 - s):
            loc = build_locator(m, s + t)
            bas = null_basis(loc)
            n, d = 3 * loc.q + 1, 3
            rng = np.random.default_rng([9011, s, t])
            A = rng.standard_normal((n, d))
            shares = encode(bas, A)
            geom = shares[0].geometry
            for trial in range(100):
                v = rng.standard_normal(d)
                resp = [
                    WorkerResponse(i, worker_product(shares[i], v))
                    for i in range(m)
                ]
                picks = rng.choice(m, size=s + t, replace=False)
                slow, bad = set(picks[:s].tolist()), set(picks[s:].tolist())
                for i in slow:
                    resp[i] = WorkerResponse(i, None)
                kind = KINDS[trial % 3]
                for i in bad:
                    resp[i] = WorkerResponse(
                        i, corrupt_payload(kind, resp[i], shares[i], v, rng)
                    )
                out = decode(resp, loc, bas, geom, seed=[9012, s, t, trial])
                assert set(out.corrupt_set) == bad
                assert set(out.erased_set) == slow
                err = rel_err(out.product, A @ v)
                assert err < 1e-8, (s, t, trial, err)
                worst = max(worst, err)
    print(f"\nPASS stragglers plus liars: 36 budget splits x 100 trials, worst rel err {worst:.2e}")


def exhaustive_support(F, syndrome, budget, tol=1e-8):
    """Reference search: smallest subset whose columns explain the syndrome.

    Pure enumeration with dense least squares, sharing no code with the
    structured search under test.
    """
    m = F.shape[1]
    snorm = np.linalg.norm(syndrome)
    gate = tol * max(snorm, 1e-300)
    for size in range(budget + 1):
        for combo in itertools.combinations(range(m), size):
            if size == 0:
                residual = snorm
            else:
                cols = F[:, list(combo)]
                fit, *_ = np.linalg.lstsq(cols, syndrome, rcond=None)
                residual = np.linalg.norm(cols @ fit - syndrome)
            if residual <= gate:
                return frozenset(combo)
    return None


def test_03_support_search_matches_exhaustive_reference():
    """The structured support search never disagrees with brute force."""
    rng = np.random.default_rng(9021)
    disagreements = 0
    for _ in range(1000):
        m = int(rng.integers(4, 11))
        t = int(rng.integers(0, min(2, (m - 1) // 2) + 1))
        loc = build_locator(m, t)
        size = int(rng.integers(0, t + 1))
        support = rng.choice(m, size=size, replace=False)
        e = np.zeros(m)
        e[support] = rng.uniform(1.0, 100.0, size) * rng.choice([-1.0, 1.0], size)
        syndrome = loc.matrix @ e
        report = recover_support(loc, syndrome, t)
        reference = exhaustive_support(loc.matrix, syndrome, t)
        planted = frozenset(int(i) for i in support)
        if report.failed or report.support != reference or reference != planted:
            disagreements += 1
            continue
        if size:
            assert rel_err(report.magnitudes[support], e[support]) < 1e-8
    assert disagreements == 0
    print("\nPASS support search vs exhaustive reference: 1000 trials, 0 disagreements")


def test_04_pgd_trajectories_match_serial():
    """Coded proximal gradient descent tracks the uncoded run to 1e-6."""
    n, d, m = 10000, 250, 15
    iterations = 50
    X, y = gen_dataset(n, d, seed=9031)
    step = default_step_size(X)
    models = [
        ModelSpec(loss="squared", regularizer="none"),
        ModelSpec(loss="squared", regularizer="l1", lam=5.0),
        ModelSpec(loss="squared", regularizer="box", lo=-0.5, hi=0.5),
    ]
    serial = {
        model.regularizer: serial_pgd(X, y, model, np.zeros(d), iterations, step)
        for model in models
    }
    worst = 0.0
    for t in range(1, 8):
        config = ClusterConfig(m=m, t=t, seed=9032 + t, adversary=KINDS[t % 3])
        cluster = make_pgd_cluster(X, y, config)
        for model in models:
            state = glm_init(cluster, np.zeros(d))
            for it in range(iterations):
                state = pgd_step(cluster, model, state, step)
                dev = rel_err(state.w, serial[model.regularizer][it])
                assert dev < 1e-6, (t, model.regularizer, it, dev)
                worst = max(worst, dev)
        del cluster
    print(
        f"\nPASS proximal gradient equivalence: 7 budgets x 3 regularizers x "
        f"{iterations} iterations on {n}x{d}, worst per-iterate rel dev {worst:.2e}"
    )


def test_05_cd_matches_serial_and_keeps_its_invariant():
    """Coded coordinate descent equals serial blocks and v_i = S_i w throughout."""
    n, d, m = 200, 60, 15
    iterations = 100
    rng = np.random.default_rng(9041)
    X = rng.standard_normal((n, d))
    y = rng.standard_normal(n)
    step = default_step_size(X)
    model = ModelSpec(loss="squared")
    worst_traj, worst_inv = 0.0, 0.0
    for t in range(1, 7):
        q = m - 2 * t
        p2 = BlockGeometry(rows=d, q=q).p
        for tau in sorted({1, -(-p2 // 10), -(-p2 // 4)}):
            config = ClusterConfig(m=m, t=t, seed=9042 + t, adversary=KINDS[tau % 3])
            cluster, codebook = make_cd_cluster(X, y, config)
            encoders = [
                WorkerEncoder(i, codebook.r_basis.coefficients[i], codebook.param_geometry).dense_matrix()
                for i in range(m)
            ]
            reference = serial_cd(X, y, model, np.zeros(d), iterations, tau, q, step)
            state = glm_init(cluster, np.zeros(d))
            for it in range(iterations):
                U = coordinate_schedule(p2, tau, it)
                state = cd_iteration(cluster, codebook, state, U, model, step)
                dev = rel_err(state.w, reference[it])
                assert dev < 1e-8, (t, tau, it, dev)
                worst_traj = max(worst_traj, dev)
                for i in range(m):
                    inv = rel_err(cluster.worker_state[i]["v"], encoders[i] @ state.w)
                    assert inv < 1e-8, (t, tau, it, i, inv)
                    worst_inv = max(worst_inv, inv)
    print(
        f"\nPASS coordinate descent equivalence: worst trajectory dev "
        f"{worst_traj:.2e}, worst private-slice drift {worst_inv:.2e}"
    )


def test_06_flop_counters_scale_as_designed():
    """Worker flops grow linearly in tau, one coded round costs (1+eps)nd/m,
    and narrow coordinate rounds undercut full gradient rounds by >= 85%."""
    m = 15
    model = ModelSpec(loss="squared")

    # Linearity in the number of touched blocks.
    n, d, t = 300, 108, 3
    rng = np.random.default_rng(9051)
    X = rng.standard_normal((n, d))
    y = rng.standard_normal(n)
    step = default_step_size(X)
    q = m - 2 * t
    p2 = BlockGeometry(rows=d, q=q).p
    taus = (1, 2, 3, 4, 6, 12)
    per_iter = []
    for tau in taus:
        cluster, codebook = make_cd_cluster(X, y, ClusterConfig(m=m, t=t, seed=9052))
        state = glm_init(cluster, np.zeros(d))
        cluster.reset_costs()
        for it in range(10):
            state = cd_iteration(
                cluster, codebook, state, coordinate_schedule(p2, tau, it), model, step
            )
        per_iter.append(cluster.max_worker_ops() / 10)
    design = np.vstack([np.array(taus, dtype=float), np.ones(len(taus))]).T
    (slope, intercept), *_ = np.linalg.lstsq(design, np.array(per_iter), rcond=None)
    assert slope > 0
    fitted = slope * np.array(taus) + intercept
    misfit = float(np.max(np.abs(per_iter - fitted) / fitted))
    assert misfit < 0.20

    # One coded matrix-vector round per worker.
    n, d = 600, 90
    X, y = gen_dataset(n, d, seed=9053)
    round_errs = []
    for t_round in (1, 3, 5, 7):
        cluster = make_pgd_cluster(X, y, ClusterConfig(m=m, t=t_round, seed=9054))
        cluster.reset_costs()
        glm_init(cluster, np.zeros(d))
        measured = cluster.max_worker_ops()
        eps = 2 * t_round / (m - 2 * t_round)
        expected = (1 + eps) * n * d / m
        round_errs.append(abs(measured - expected) / expected)
        assert round_errs[-1] < 0.20, (t_round, measured, expected)

    # Narrow coordinate rounds against full gradient rounds at t=1.
    n, d, t = 400, 130, 1
    X, y = gen_dataset(n, d, seed=9055)
    step = default_step_size(X)
    q = m - 2 * t
    p2 = BlockGeometry(rows=d, q=q).p
    tau = -(-p2 // 10)
    gd_cluster = make_pgd_cluster(X, y, ClusterConfig(m=m, t=t, seed=9056))
    gd_state = glm_init(gd_cluster, np.zeros(d))
    gd_cluster.reset_costs()
    for _ in range(10):
        gd_state = pgd_step(gd_cluster, model, gd_state, step)
    gd_per = gd_cluster.max_worker_ops() / 10
    cd_cluster, codebook = make_cd_cluster(X, y, ClusterConfig(m=m, t=t, seed=9057))
    cd_state = glm_init(cd_cluster, np.zeros(d))
    cd_cluster.reset_costs()
    for it in range(10):
        cd_state = cd_iteration(
            cd_cluster, codebook, cd_state, coordinate_schedule(p2, tau, it), model, step
        )
    cd_per = cd_cluster.max_worker_ops() / 10
    ratio = cd_per / gd_per
    assert ratio <= 0.15
    wall = (max(cd_cluster.worker_times), cd_cluster.master_time)
    print(
        f"\nPASS flop scaling: tau-linearity misfit {misfit:.1%}, coded-round "
        f"deviation from (1+eps)nd/m max {max(round_errs):.1%}, narrow-round/"
        f"full-round ratio {ratio:.1%}; wall clock recorded (worker "
        f"{wall[0] * 1e3:.2f} ms, master {wall[1] * 1e3:.2f} ms), not asserted"
    )


def test_07_storage_redundancy_is_exact_when_blocks_divide():
    """Encoding a matrix and its transpose costs exactly 2m/(m-2t) copies."""
    cases = [(15, 5, 20, 10), (9, 2, 10, 5), (10, 2, 18, 12)]
    for m, t, n, d in cases:
        loc = build_locator(m, t)
        bas = null_basis(loc)
        A = np.random.default_rng([9061, m, t]).standard_normal((n, d))
        shares = encode(bas, A, "X") + encode(bas, A.T, "XT")
        got = storage_report(shares)["redundancy_factor"]
        assert got == 2 * m / (m - 2 * t), (m, t, got)
    assert storage_report(
        encode(null_basis(build_locator(15, 5)), np.ones((20, 10)), "X")
        + encode(null_basis(build_locator(15, 5)), np.ones((10, 20)), "XT")
    )["redundancy_factor"] == 6.0
    print("\nPASS storage redundancy: exactly 2m/(m-2t) in all divisible cases, 6.0 at m=15 t=5")


def test_08_sgd_recovers_every_sampled_point():
    """1000 coded SGD steps at the maximum budget stay on the serial path."""
    n, d, m, t, steps = 60, 8, 15, 7, 1000
    X, y = gen_dataset(n, d, seed=9071)
    step = 1e-3
    model = ModelSpec(loss="squared")
    cluster = make_sgd_cluster(X, y, ClusterConfig(m=m, t=t, seed=9072))

    recovered = []

    def spy(x_row, target, w):
        recovered.append(x_row.copy())
        return (float(x_row @ w) - target) * x_row

    state = GlmState(w=np.zeros(d), xw=None)
    coded_path = []
    rng = np.random.default_rng(9073)
    for _ in range(steps):
        state = sgd_step(cluster, state, model, rng, step, grad_fn=spy)
        coded_path.append(state.w.copy())

    mirror = np.random.default_rng(9073)
    indices = [int(mirror.integers(0, n)) for _ in range(steps)]
    serial_path = serial_sgd(X, y, model, np.zeros(d), indices, step)

    worst_point = max(rel_err(recovered[k], X[indices[k]]) for k in range(steps))
    worst_step = max(
        rel_err(coded_path[k], serial_path[k]) for k in range(steps)
    )
    assert worst_point < 1e-10
    assert worst_step < 1e-8
    print(
        f"\nPASS stochastic steps: {steps} decoded samples, worst point rel err "
        f"{worst_point:.2e}, worst trajectory rel dev {worst_step:.2e}"
    )


def test_09_streaming_appends_equal_batch_encoding():
    """Random append sequences reproduce batch shares; row appends cost O((2t+1)d)."""
    rng = np.random.default_rng(9081)
    worst = 0.0
    worst_ratio = 0.0
    for _ in range(500):
        m = int(rng.integers(4, 14))
        t = int(rng.integers(0, (m - 1) // 2 + 1))
        loc = build_locator(m, t)
        bas = null_basis(loc)
        q = loc.q
        n0 = int(rng.integers(1, 3 * q + 2))
        d0 = int(rng.integers(1, 6))
        A = rng.standard_normal((n0, d0))
        counter = OpCounter()
        shares = encode(bas, A)
        for _ in range(int(rng.integers(1, 6))):
            if rng.random() < 0.5:
                row = rng.standard_normal(A.shape[1])
                before = counter.ops
                shares = append_row(shares, row, counter)
                spent = counter.ops - before
                ratio = spent / ((2 * t + 1) * A.shape[1])
                assert 0.2 <= ratio <= 4.0, (m, t, A.shape, spent)
                worst_ratio = max(worst_ratio, ratio)
                A = np.vstack([A, row])
            else:
                col = rng.standard_normal(A.shape[0])
                shares = append_column(shares, col, counter)
                A = np.hstack([A, col[:, None]])
        batch = encode(bas, A)
        for live, fresh in zip(shares, batch):
            scale = max(np.max(np.abs(fresh.matrix)), 1.0)
            err = np.max(np.abs(live.matrix - fresh.matrix)) / scale
            assert err < 1e-12, (m, t, err)
            worst = max(worst, err)
    print(
        f"\nPASS streaming appends: 500 sequences, worst entry deviation "
        f"{worst:.2e}, row-append cost within {worst_ratio:.2f}x of (2t+1)d"
    )


def test_10_restricted_code_matrices_keep_full_rank():
    """Row subsets of the null basis, the syndrome map's kernel fit, and
    block-restricted encoders pass 1000 randomized rank checks each."""
    rng = np.random.default_rng(9091)
    deficiencies = 0

    for trial in range(1000):
        m = int(rng.integers(3, 33))
        t = int(rng.integers(1, (m - 1) // 2 + 1))
        loc = build_locator(m, t)
        bas = null_basis(loc, "rref" if trial % 2 else "orthonormal")
        keep = int(rng.integers(m - t, m + 1))
        rows = rng.choice(m, size=keep, replace=False)
        if np.linalg.matrix_rank(bas.coefficients[rows]) != loc.q:
            deficiencies += 1

    for trial in range(1000):
        m = int(rng.integers(3, 33))
        t = int(rng.integers(1, (m - 1) // 2 + 1))
        loc = build_locator(m, t)
        bas = null_basis(loc, "rref" if trial % 2 else "orthonormal")
        product = loc.matrix @ bas.coefficients
        if np.linalg.matrix_rank(product, tol=1e-10) != 0:
            deficiencies += 1
        if np.linalg.matrix_rank(loc.matrix) != loc.rows:
            deficiencies += 1

    for trial in range(1000):
        m = int(rng.integers(3, 33))
        t = int(rng.integers(1, (m - 1) // 2 + 1))
        loc = build_locator(m, t)
        bas = null_basis(loc, "rref" if trial % 2 else "orthonormal")
        q = loc.q
        p = int(rng.integers(1, 4))
        rows = p * q - int(rng.integers(0, q)) if p * q > 1 else 1
        geom = BlockGeometry(rows=max(rows, 1), q=q)
        keep = int(rng.integers(m - t, m + 1))
        picked = rng.choice(m, size=keep, replace=False)
        stack = np.vstack(
            [
                WorkerEncoder(int(i), bas.coefficients[int(i)], geom).dense_matrix()
                for i in picked
            ]
        )
        if np.linalg.matrix_rank(stack) != geom.rows:
            deficiencies += 1

    assert deficiencies == 0
    print("\nPASS restricted-rank checks: 3000 randomized subsets, 0 deficiencies")
