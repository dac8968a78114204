"""What resilience costs: storage blow-up and per-round flops.

Every worker-side multiply in the package is metered. This script reads
the meters for the three costs that matter when sizing a cluster:

  1. storage: encoded shares of X and X' total 2m/(m-2t) times raw X
  2. a full coded matrix-vector round: max worker load ~ (1+eps) nd / m
  3. coordinate descent: per-iteration worker cost proportional to tau

eps = 2t/(m-2t) is the price of tolerating t liars; at t=0 every row
below degrades to the plain uncoded cost.
"""

import numpy as np

from pavise import (
    ClusterConfig,
    ModelSpec,
    cd_iteration,
    coordinate_schedule,
    default_step_size,
    gen_dataset,
    glm_init,
    make_cd_cluster,
    make_pgd_cluster,
    pgd_step,
    storage_report,
)


def storage_table():
    print("storage redundancy (shares of X plus X', q divides n and d)")
    print("   m   t   predicted 2m/(m-2t)   measured")
    for m, t, n, d in ((15, 1, 260, 39), (15, 3, 270, 90), (15, 5, 300, 60)):
        config = ClusterConfig(m=m, t=t, seed=1)
        X, y = gen_dataset(n, d, seed=5)
        cluster = make_pgd_cluster(X, y, config)
        shares = cluster.shares["X"] + cluster.shares["XT"]
        report = storage_report(shares)
        predicted = 2 * m / (m - 2 * t)
        print(f"  {m:2d}  {t:2d}   {predicted:19.4f}   {report['redundancy_factor']:.4f}")
    print()


def round_cost():
    print("one coded round of X w: busiest worker vs (1+eps) nd / m")
    n, d = 600, 90
    X, y = gen_dataset(n, d, seed=6)
    w = np.ones(d)
    print("   m   t     predicted   measured   ratio")
    for t in (0, 2, 5):
        config = ClusterConfig(m=15, t=t, seed=2)
        cluster = make_pgd_cluster(X, y, config)
        cluster.reset_costs()
        glm_init(cluster, w)
        measured = cluster.max_worker_ops()
        eps = config.epsilon
        predicted = (1 + eps) * n * d / config.m
        print(f"  15  {t:2d}   {predicted:11.0f}   {measured:8d}   {measured / predicted:.3f}")
    print("(ratio > 1 comes from ceiling the block count; eps at t=0 is 0)")
    print()


def cd_scaling():
    print("coordinate descent: busiest worker per iteration as tau grows")
    n, d = 300, 90
    X, y = gen_dataset(n, d, seed=7)
    config = ClusterConfig(m=15, t=3, seed=3, adversary="decoy-vector")
    model = ModelSpec(loss="squared", regularizer="l1", lam=1.0)
    step = default_step_size(X)
    cluster, codebook = make_cd_cluster(X, y, config)
    state = glm_init(cluster, np.zeros(d))
    print(f"  p2 = {codebook.p2} parameter blocks of q = {codebook.locator.q}")
    print("  tau   ops/iteration   ops per block")
    for tau in (1, 2, 5, 10):
        cluster.reset_costs()
        iters = 4
        for it in range(iters):
            blocks = coordinate_schedule(codebook.p2, tau, it)
            state = cd_iteration(cluster, codebook, state, blocks, model, step)
        per_iter = cluster.max_worker_ops() / iters
        print(f"  {tau:3d}   {per_iter:13.0f}   {per_iter / tau:13.0f}")

    # For scale: one full-gradient iteration on the same data.
    pgd_cluster = make_pgd_cluster(X, y, config)
    pgd_state = glm_init(pgd_cluster, np.zeros(d))
    pgd_cluster.reset_costs()
    pgd_step(pgd_cluster, model, pgd_state, step)
    print(f"  full gradient step, same data: {pgd_cluster.max_worker_ops()} ops")


def main():
    storage_table()
    round_cost()
    cd_scaling()


if __name__ == "__main__":
    main()
