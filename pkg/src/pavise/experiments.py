"""Experiment harness: datasets, coded-vs-serial runs, CSV records.

A run is described entirely by a config file (see cluster.parse_config).
Every iteration of the chosen task produces one CSV row holding cost
counters, wall times, the objective value, and the deviation of the coded
iterate from an uncoded serial run with identical hyperparameters. The
deviation column is the headline number: exact recovery means it sits at
floating-point noise no matter the adversary.

Wall-time columns are recorded for orientation only; correctness and cost
assertions elsewhere rely on the deterministic flop counters.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from .cluster import ClusterConfig, config_from_settings, load_config
from .errors import (
    BudgetExceeded,
    BudgetViolation,
    ConfigError,
    IOFailure,
    PaviseError,
    RankDeficient,
)
from .matio import load_matrix, load_vector, save_matrix
from .optim import (
    ModelSpec,
    cd_iteration,
    coordinate_schedule,
    default_step_size,
    glm_init,
    GlmState,
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

CSV_COLUMNS = (
    "task",
    "m",
    "t",
    "s",
    "adversary",
    "iteration",
    "max_worker_flops",
    "master_flops",
    "wall_time_worker_max",
    "wall_time_master",
    "objective_value",
    "trajectory_deviation_vs_serial",
)

_TAG_SGD_INDEX = 5


@dataclass
class ExperimentRecord:
    task: str
    m: int
    t: int
    s: int
    adversary: str
    iteration: int
    max_worker_flops: int
    master_flops: int
    wall_time_worker_max: float
    wall_time_master: float
    objective_value: float
    trajectory_deviation_vs_serial: float

    def csv_row(self) -> str:
        return ",".join(
            [
                self.task,
                str(self.m),
                str(self.t),
                str(self.s),
                self.adversary,
                str(self.iteration),
                str(self.max_worker_flops),
                str(self.master_flops),
                f"{self.wall_time_worker_max:.17g}",
                f"{self.wall_time_master:.17g}",
                f"{self.objective_value:.17g}",
                f"{self.trajectory_deviation_vs_serial:.17g}",
            ]
        )


def gen_dataset(n: int, d: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Synthetic sparse linear regression: X ~ N(0, I), y = X theta + z.

    theta has exactly ceil(d/3) nonzero entries drawn N(0, 4); the noise z
    is standard normal. Deterministic in seed.
    """
    if n < 1 or d < 1:
        raise ConfigError(f"dataset sizes must be positive, got n={n} d={d}")
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, d))
    theta = np.zeros(d)
    nonzeros = math.ceil(d / 3)
    theta[rng.choice(d, size=nonzeros, replace=False)] = rng.normal(
        0.0, 2.0, size=nonzeros
    )
    y = X @ theta + rng.standard_normal(n)
    return X, y


def parse_synth_spec(spec: str) -> tuple[int, int] | None:
    """'synth:NxD' -> (N, D); None when the string is a file prefix instead."""
    if not spec.startswith("synth:"):
        return None
    body = spec[len("synth:") :]
    parts = body.lower().split("x")
    if len(parts) != 2:
        raise ConfigError(f"bad synthetic dataset spec {spec!r}, want synth:NxD")
    try:
        n, d = int(parts[0]), int(parts[1])
    except ValueError as exc:
        raise ConfigError(f"bad synthetic dataset spec {spec!r}: {exc}") from exc
    return n, d


def resolve_dataset(spec: str, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Either generate synth:NxD data or load <prefix>_X.txt / <prefix>_y.txt."""
    synth = parse_synth_spec(spec)
    if synth is not None:
        return gen_dataset(synth[0], synth[1], seed)
    X = load_matrix(f"{spec}_X.txt")
    y = load_vector(f"{spec}_y.txt")
    if y.size != X.shape[0]:
        raise IOFailure(
            f"dataset {spec!r}: X has {X.shape[0]} rows but y has {y.size}"
        )
    return X, y


def write_dataset(spec: str, seed: int, out_prefix: str) -> tuple[int, int]:
    """Generate the config's synthetic dataset and store it as matrix files."""
    synth = parse_synth_spec(spec)
    if synth is None:
        raise ConfigError(
            f"dataset {spec!r} is a file prefix; only synth:NxD can be generated"
        )
    X, y = gen_dataset(synth[0], synth[1], seed)
    save_matrix(f"{out_prefix}_X.txt", X)
    save_matrix(f"{out_prefix}_y.txt", y)
    return synth


def _model_for_task(task: str, lam: float) -> ModelSpec:
    if task == "lasso":
        return ModelSpec(loss="squared", regularizer="l1", lam=lam)
    if task == "ridge":
        return ModelSpec(loss="squared", regularizer="l2", lam=lam)
    return ModelSpec(loss="squared", regularizer="none")


def resolve_tau(tau_setting: float, p2: int) -> int:
    """tau <= 1 reads as a fraction of the p2 blocks, otherwise a count."""
    if tau_setting <= 0:
        raise ConfigError(f"tau must be positive, got {tau_setting}")
    tau = math.ceil(tau_setting * p2) if tau_setting <= 1.0 else int(round(tau_setting))
    return max(1, min(tau, p2))


def _deviation(coded: np.ndarray, serial: np.ndarray) -> float:
    return float(
        np.linalg.norm(coded - serial) / max(np.linalg.norm(serial), 1.0)
    )


def run_from_settings(settings: dict) -> list[ExperimentRecord]:
    """Execute one configured experiment and return its per-iteration rows."""
    config = config_from_settings(settings)
    X, y = resolve_dataset(settings["dataset"], settings["seed"])
    n, d = X.shape
    task = settings["task"]
    iterations = settings["iterations"]
    if iterations < 1:
        raise ConfigError("iterations must be at least 1")
    step = settings["step_size"] or default_step_size(X)
    lam = settings["lambda"]
    model = _model_for_task(task, lam)
    w0 = np.zeros(d)

    records = []

    def snapshot(cluster):
        return (
            [c.ops for c in cluster.worker_counters],
            cluster.master_counter.ops,
            list(cluster.worker_times),
            cluster.master_time,
        )

    def record(cluster, before, iteration, w_coded, w_serial):
        ops_before, master_before, times_before, mtime_before = before
        worker_deltas = [
            c.ops - prev for c, prev in zip(cluster.worker_counters, ops_before)
        ]
        time_deltas = [
            now - prev for now, prev in zip(cluster.worker_times, times_before)
        ]
        records.append(
            ExperimentRecord(
                task=task,
                m=config.m,
                t=config.t,
                s=config.s,
                adversary=config.adversary,
                iteration=iteration,
                max_worker_flops=max(worker_deltas),
                master_flops=cluster.master_counter.ops - master_before,
                wall_time_worker_max=max(time_deltas),
                wall_time_master=cluster.master_time - mtime_before,
                objective_value=objective_value(model, X, y, w_coded),
                trajectory_deviation_vs_serial=_deviation(w_coded, w_serial),
            )
        )

    if task in ("gd", "lasso", "ridge"):
        cluster = make_pgd_cluster(X, y, config)
        serial = serial_pgd(X, y, model, w0, iterations, step)
        state = glm_init(cluster, w0)
        for it in range(iterations):
            before = snapshot(cluster)
            state = pgd_step(cluster, model, state, step)
            record(cluster, before, it + 1, state.w, serial[it])
    elif task == "cd":
        cluster, codebook = make_cd_cluster(X, y, config, w0)
        tau = resolve_tau(settings["tau"], codebook.p2)
        serial = serial_cd(X, y, model, w0, iterations, tau, codebook.locator.q, step)
        state = glm_init(cluster, w0)
        for it in range(iterations):
            before = snapshot(cluster)
            U = coordinate_schedule(codebook.p2, tau, it)
            state = cd_iteration(cluster, codebook, state, U, model, step)
            record(cluster, before, it + 1, state.w, serial[it])
    elif task == "sgd":
        cluster = make_sgd_cluster(X, y, config)
        index_rng = np.random.default_rng([config.seed, _TAG_SGD_INDEX])
        mirror_rng = np.random.default_rng([config.seed, _TAG_SGD_INDEX])
        indices = [int(mirror_rng.integers(0, n)) for _ in range(iterations)]
        serial = serial_sgd(X, y, model, w0, indices, step)
        state = GlmState(w=w0.copy(), xw=None, iteration=0)
        for it in range(iterations):
            before = snapshot(cluster)
            state = sgd_step(cluster, state, model, index_rng, step)
            record(cluster, before, it + 1, state.w, serial[it])
    else:
        raise ConfigError(f"unknown task {task!r}")

    return records


def write_csv(records: list[ExperimentRecord], path: str) -> None:
    parent = os.path.dirname(path)
    try:
        if parent:
            os.makedirs(parent, exist_ok=True)
        with open(path, "w") as fh:
            fh.write(",".join(CSV_COLUMNS) + "\n")
            for rec in records:
                fh.write(rec.csv_row() + "\n")
    except OSError as exc:
        raise IOFailure(f"cannot write {path}: {exc}") from exc


def run_experiment(config_path: str, out_path: str, seed_override=None) -> int:
    """Run one configured experiment to CSV. Returns a process exit code."""
    try:
        settings = load_config(config_path)
        if seed_override is not None:
            settings["seed"] = int(seed_override)
        records = run_from_settings(settings)
        write_csv(records, out_path)
    except ConfigError as exc:
        print(f"config-parse-error: {exc}")
        return 2
    except BudgetViolation as exc:
        print(f"budget-violation: {exc}")
        return 3
    except IOFailure as exc:
        print(f"io-error: {exc}")
        return 4
    except (BudgetExceeded, RankDeficient) as exc:
        print(f"decode-failure: {exc}")
        return 1
    except PaviseError as exc:
        print(f"error: {exc}")
        return 1
    return 0


def verify_config(settings: dict) -> tuple[bool, list[str]]:
    """Fast property checks for one configuration; returns (ok, report lines).

    Exercises the actual pipeline at reduced size: code construction, an
    honest round-trip, an adversarial round-trip with corrupt-set
    localization, and budget arithmetic.
    """
    from .cluster import replay, run_round as _run_round
    from .multiply import decode as _decode
    from .optim import make_mv_cluster, _mv_compute

    lines = []
    ok = True

    def check(name, passed, detail=""):
        nonlocal ok
        ok = ok and bool(passed)
        suffix = f" ({detail})" if detail else ""
        lines.append(f"{'PASS' if passed else 'FAIL'} {name}{suffix}")

    config = config_from_settings(settings)
    rng = np.random.default_rng(settings["seed"])
    rows = max(4 * config.m, 64)
    cols = 24
    a = rng.standard_normal((rows, cols))
    v = rng.standard_normal(cols)
    truth = a @ v

    cluster = make_mv_cluster(a, config)
    basis = cluster.basis
    fb = (
        np.max(np.abs(cluster.locator.matrix @ basis.coefficients))
        if cluster.locator.rows
        else 0.0
    )
    check("null basis annihilates the locator", fb < 1e-10, f"max |F B| = {fb:.2e}")

    geometry = cluster.shares["A"][0].geometry
    outcome = _decode(
        _run_round(cluster, "A", v, _mv_compute),
        cluster.locator,
        basis,
        geometry,
        seed=settings["seed"],
    )
    rel = float(np.linalg.norm(outcome.product - truth) / np.linalg.norm(truth))
    check("coded product matches A v", rel < 1e-8, f"rel err {rel:.2e}")

    expected_corrupt, expected_stragglers = (set(), set())
    if config.adversary != "honest" or config.s:
        c0, s0 = replay(config, cluster.round_index - 1)
        expected_stragglers = set(s0)
        if config.adversary != "honest":
            expected_corrupt = set(c0)
    check(
        "corrupt workers localized",
        outcome.corrupt_set == frozenset(expected_corrupt),
        f"found {sorted(outcome.corrupt_set)}",
    )
    check(
        "stragglers accounted",
        outcome.erased_set == frozenset(expected_stragglers),
        f"found {sorted(outcome.erased_set)}",
    )
    eps = config.epsilon
    check(
        "budget arithmetic",
        config.s + config.t <= math.floor(eps / (1 + eps) * config.m / 2) + 1e-9,
        f"epsilon = {eps:.3f}",
    )
    return ok, lines
