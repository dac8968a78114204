"""Gradient descent, coordinate descent, and SGD on a hostile cluster.

Each optimizer runs its linear algebra through encoded worker rounds, so
the iterates match a single-machine reference run exactly (to decoding
accuracy) even while an adversary corrupts worker messages every round.
The three protocols trade bandwidth against flops differently:

  pgd   two dense rounds per step (X w, then X' phi), full gradient
  cd    touches tau parameter blocks per step, worker cost scales with tau
  sgd   one data row per step, recovered exactly from the encoded shares

Run it:

    python3 demos/coded_optimizers.py
"""

import numpy as np

from pavise import (
    ClusterConfig,
    GlmState,
    ModelSpec,
    cd_iteration,
    coordinate_schedule,
    default_step_size,
    gen_dataset,
    glm_init,
    make_cd_cluster,
    make_pgd_cluster,
    make_sgd_cluster,
    objective_value,
    pgd_step,
    serial_cd,
    serial_pgd,
    serial_sgd,
    sgd_step,
)

ITERATIONS = 60


def deviation(coded, serial):
    """Worst relative gap between two iterate trajectories."""
    worst = 0.0
    for wc, ws in zip(coded, serial):
        denom = max(np.linalg.norm(ws), 1e-300)
        worst = max(worst, np.linalg.norm(wc - ws) / denom)
    return worst


def main():
    X, y = gen_dataset(n=600, d=45, seed=20)
    step = default_step_size(X)
    w0 = np.zeros(X.shape[1])

    config = ClusterConfig(m=13, t=3, seed=91, adversary="sign-flip")
    print(f"dataset 600 x 45, cluster m={config.m}, t={config.t}, "
          f"adversary {config.adversary!r}, {ITERATIONS} iterations each")
    print()

    # Lasso objective: least squares plus an l1 penalty handled by prox.
    model = ModelSpec(loss="squared", regularizer="l1", lam=4.0)

    # --- proximal gradient descent -------------------------------------
    cluster = make_pgd_cluster(X, y, config)
    state = glm_init(cluster, w0)
    coded = []
    for _ in range(ITERATIONS):
        state = pgd_step(cluster, model, state, step)
        coded.append(state.w.copy())
    serial = serial_pgd(X, y, model, w0, ITERATIONS, step)
    obj = objective_value(model, X, y, coded[-1])
    print(f"pgd   objective {obj:12.4f}   trajectory deviation {deviation(coded, serial):.3e}")

    # --- block coordinate descent --------------------------------------
    # tau blocks of q coordinates move per iteration, round robin.
    cluster, codebook = make_cd_cluster(X, y, config, w0)
    state = glm_init(cluster, w0)
    tau = -(-codebook.p2 // 4)   # ceil: a quarter of the blocks per round
    coded = []
    for it in range(ITERATIONS):
        blocks = coordinate_schedule(codebook.p2, tau, it)
        state = cd_iteration(cluster, codebook, state, blocks, model, step)
        coded.append(state.w.copy())
    serial = serial_cd(X, y, model, w0, ITERATIONS, tau, codebook.locator.q, step)
    obj = objective_value(model, X, y, coded[-1])
    print(f"cd    objective {obj:12.4f}   trajectory deviation {deviation(coded, serial):.3e}"
          f"   (tau = {tau} of {codebook.p2} blocks)")

    # --- stochastic gradient descent -----------------------------------
    # The index stream is mirrored into the reference run so both visit
    # the same rows in the same order.
    plain = ModelSpec(loss="squared")
    cluster = make_sgd_cluster(X, y, config)
    state = GlmState(w=w0.copy(), xw=None, iteration=0)
    rng = np.random.default_rng(4242)
    mirror = np.random.default_rng(4242)
    sgd_steps = 8 * ITERATIONS   # one row per step, so give it more of them
    coded = []
    for _ in range(sgd_steps):
        state = sgd_step(cluster, state, plain, rng, step)
        coded.append(state.w.copy())
    indices = [int(mirror.integers(0, X.shape[0])) for _ in range(sgd_steps)]
    serial = serial_sgd(X, y, plain, w0, indices, step)
    obj = objective_value(plain, X, y, coded[-1])
    print(f"sgd   objective {obj:12.4f}   trajectory deviation {deviation(coded, serial):.3e}"
          f"   ({sgd_steps} single-row steps)")

    print()
    print(f"every round, {config.t} of {config.m} workers flipped the sign of")
    print("their payload; the deviations above are pure floating-point noise.")


if __name__ == "__main__":
    main()
