"""Deterministic master-worker cluster simulation.

The cluster is a synchronous round machine, not a network: run_round calls
the worker function for every worker, then applies the configured adversary
to at most t of the payloads and drops up to s others. Which workers lie or
stall in round r is a pure function of (seed, r), so any round can be
replayed exactly, and two runs with the same config produce bit-identical
transcripts.

Adversary kinds:
  honest                  everyone tells the truth.
  gaussian-noise          adds N(0, sigma^2) entrywise to the payload.
  sign-flip               negates the payload.
  decoy-vector            runs the real protocol on a made-up request, so
                          the lie is internally consistent and cannot be
                          caught by sanity checks on the payload alone.
  adaptive-random-subset  overwrites a random subset of payload entries
                          with noise, a different subset every round.

Corrupt targets are drawn per round by default; fixed-set keeps one set for
the whole run. Lies live only in the messages: a corrupt worker's stored
share and local state stay intact, and the same worker can answer honestly
next round.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .errors import BudgetViolation, ConfigError
from .flops import OpCounter
from .locator import ErrorLocator, NullBasis
from .multiply import WorkerResponse

ADVERSARY_KINDS = (
    "honest",
    "gaussian-noise",
    "sign-flip",
    "decoy-vector",
    "adaptive-random-subset",
)
TARGET_MODES = ("per-round-random", "fixed-set")
STRAGGLER_POLICIES = ("none", "random-per-round")

# Stream tags keep the corrupt draw, the straggler draw, and each worker's
# payload noise on disjoint substreams of the config seed.
_TAG_CORRUPT = 1
_TAG_STRAGGLE = 2
_TAG_PAYLOAD = 3


@dataclass(frozen=True)
class ClusterConfig:
    """Sizing and adversary policy for one simulated cluster.

    The code is provisioned for s + t combined failures: syndrome rows
    k = 2(s + t), so the storage overhead rate epsilon is determined by
    the budgets rather than chosen freely.
    """

    m: int
    t: int
    s: int = 0
    seed: int = 0
    adversary: str = "gaussian-noise"
    sigma: float = 100.0
    target: str = "per-round-random"
    straggler_policy: str | None = None

    def __post_init__(self):
        if self.straggler_policy is None:
            object.__setattr__(
                self,
                "straggler_policy",
                "none" if self.s == 0 else "random-per-round",
            )
        if self.m < 2:
            raise BudgetViolation(f"need at least 2 workers, got m={self.m}")
        if self.t < 0 or self.s < 0:
            raise BudgetViolation("budgets t and s cannot be negative")
        if self.s + self.t > (self.m - 1) // 2:
            raise BudgetViolation(
                f"s + t = {self.s + self.t} exceeds the correctable "
                f"maximum {(self.m - 1) // 2} for m={self.m}"
            )
        if self.adversary not in ADVERSARY_KINDS:
            raise ConfigError(
                f"unknown adversary {self.adversary!r}, pick one of {ADVERSARY_KINDS}"
            )
        if self.target not in TARGET_MODES:
            raise ConfigError(f"unknown target mode {self.target!r}")
        if self.straggler_policy not in STRAGGLER_POLICIES:
            raise ConfigError(
                f"unknown straggler policy {self.straggler_policy!r}"
            )
        if self.s > 0 and self.straggler_policy == "none":
            raise BudgetViolation("s > 0 needs straggler_policy=random-per-round")
        if self.sigma < 0:
            raise ConfigError("sigma cannot be negative")

    @property
    def code_budget(self) -> int:
        """Combined failures the code must absorb per round."""
        return self.s + self.t

    @property
    def syndrome_rows(self) -> int:
        return 2 * self.code_budget

    @property
    def epsilon(self) -> float:
        """Storage overhead rate: syndrome rows over surviving block width."""
        return self.syndrome_rows / (self.m - self.syndrome_rows)


def replay(config: ClusterConfig, round_index: int) -> tuple[tuple, tuple]:
    """Which workers lie and which stay silent in a given round.

    Pure function of (config.seed, round_index): calling it never advances
    any stream, so tests can reconstruct a full transcript after the fact.
    """
    m, t, s = config.m, config.t, config.s
    if config.target == "fixed-set":
        rng = np.random.default_rng([config.seed, _TAG_CORRUPT])
    else:
        rng = np.random.default_rng([config.seed, round_index, _TAG_CORRUPT])
    corrupt = rng.choice(m, size=t, replace=False) if t else np.array([], dtype=int)
    stragglers = np.array([], dtype=int)
    if s and config.straggler_policy == "random-per-round":
        remaining = np.setdiff1d(np.arange(m), corrupt)
        rng2 = np.random.default_rng([config.seed, round_index, _TAG_STRAGGLE])
        stragglers = rng2.choice(remaining, size=s, replace=False)
    return (
        tuple(int(i) for i in np.sort(corrupt)),
        tuple(int(i) for i in np.sort(stragglers)),
    )


class Cluster:
    """Shares, per-worker state, and cost meters for one simulated run."""

    def __init__(
        self,
        config: ClusterConfig,
        locator: ErrorLocator,
        basis: NullBasis,
        shares: dict[str, list] | None = None,
        master_data: dict | None = None,
    ):
        if locator.m != config.m:
            raise BudgetViolation("locator and config disagree on worker count")
        if locator.rows != config.syndrome_rows:
            raise BudgetViolation(
                f"locator has {locator.rows} syndrome rows, config needs "
                f"{config.syndrome_rows}"
            )
        self.config = config
        self.locator = locator
        self.basis = basis
        self.shares = shares or {}
        self.master_data = master_data or {}
        self.worker_state = [dict() for _ in range(config.m)]
        self.worker_counters = [OpCounter() for _ in range(config.m)]
        self.worker_times = [0.0 for _ in range(config.m)]
        self.master_counter = OpCounter()
        self.master_time = 0.0
        self.round_index = 0

    def reset_costs(self) -> None:
        for c in self.worker_counters:
            c.reset()
        self.master_counter.reset()
        self.worker_times = [0.0 for _ in range(self.config.m)]
        self.master_time = 0.0

    def max_worker_ops(self) -> int:
        return max(c.ops for c in self.worker_counters)


def _decoy_request(request, rng, share):
    """A plausible but wrong request of the same shape as the real one."""
    if isinstance(request, tuple):
        return tuple(_decoy_request(part, rng, share) for part in request)
    if isinstance(request, np.ndarray):
        if np.issubdtype(request.dtype, np.integer):
            return request
        return rng.standard_normal(request.shape)
    if isinstance(request, (int, np.integer)):
        return int(rng.integers(0, share.cols))
    return request


def _corrupted_payload(config, truth, rng, share, request, compute, worker_id):
    kind = config.adversary
    if kind == "gaussian-noise":
        return truth + rng.normal(0.0, config.sigma, size=truth.shape)
    if kind == "sign-flip":
        return -truth
    if kind == "decoy-vector":
        decoy = _decoy_request(request, rng, share)
        return compute(share, decoy, None, worker_id)
    if kind == "adaptive-random-subset":
        out = truth.copy()
        size = int(rng.integers(1, truth.size + 1))
        idx = rng.choice(truth.size, size=size, replace=False)
        out[idx] = rng.normal(0.0, config.sigma, size=size)
        return out
    raise ConfigError(f"unknown adversary {kind!r}")


def run_round(
    cluster: Cluster,
    share_key: str,
    request,
    compute,
) -> list[WorkerResponse]:
    """One synchronous round: broadcast, compute, corrupt, collect.

    compute(share, request, counter, worker_id) -> payload does the honest
    work and charges the worker's flop counter. Corrupt workers first do
    the honest work (the protocol cost is paid either way), then replace
    the outgoing message; their stored share and state are never touched.
    """
    config = cluster.config
    r = cluster.round_index
    cluster.round_index += 1
    corrupt, stragglers = replay(config, r)
    corrupt, stragglers = set(corrupt), set(stragglers)
    responses = []
    for i in range(config.m):
        if i in stragglers:
            responses.append(WorkerResponse(worker_id=i, payload=None))
            continue
        share = cluster.shares[share_key][i]
        started = time.perf_counter()
        truth = compute(share, request, cluster.worker_counters[i], i)
        cluster.worker_times[i] += time.perf_counter() - started
        payload = np.asarray(truth, dtype=float)
        if i in corrupt and config.adversary != "honest":
            rng = np.random.default_rng([config.seed, r, _TAG_PAYLOAD, i])
            payload = _corrupted_payload(
                config, payload, rng, share, request, compute, i
            )
        responses.append(WorkerResponse(worker_id=i, payload=payload))
    return responses


# --- config files ------------------------------------------------------------

CONFIG_TYPES = {
    "m": int,
    "t": int,
    "s": int,
    "seed": int,
    "adversary": str,
    "sigma": float,
    "straggler_policy": str,
    "dataset": str,
    "task": str,
    "iterations": int,
    "tau": float,
    "step_size": float,
    "lambda": float,
}

CONFIG_DEFAULTS = {
    "s": 0,
    "seed": 0,
    "adversary": "gaussian-noise",
    "sigma": 100.0,
    "straggler_policy": None,
    "dataset": "synth:200x30",
    "task": "gd",
    "iterations": 10,
    "tau": 0.25,
    "step_size": 0.0,  # 0 means: estimate 1/L by power iteration
    "lambda": 0.0,
}

TASKS = ("gd", "lasso", "ridge", "cd", "sgd")


def parse_config(text: str) -> dict:
    """Parse flat "key = value" lines into a validated settings dict.

    Blank lines and lines starting with # are skipped. Unknown keys,
    duplicate keys, missing m or t, and type errors all raise ConfigError.
    """
    settings = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in CONFIG_TYPES:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in settings:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            settings[key] = CONFIG_TYPES[key](value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from exc
    for required in ("m", "t"):
        if required not in settings:
            raise ConfigError(f"missing required key {required!r}")
    merged = dict(CONFIG_DEFAULTS)
    merged.update(settings)
    if merged["task"] not in TASKS:
        raise ConfigError(f"unknown task {merged['task']!r}, pick one of {TASKS}")
    return merged


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def config_from_settings(settings: dict) -> ClusterConfig:
    """Build the ClusterConfig portion of a parsed settings dict."""
    return ClusterConfig(
        m=settings["m"],
        t=settings["t"],
        s=settings.get("s", 0),
        seed=settings.get("seed", 0),
        adversary=settings.get("adversary", "gaussian-noise"),
        sigma=settings.get("sigma", 100.0),
        straggler_policy=settings.get("straggler_policy"),
    )
