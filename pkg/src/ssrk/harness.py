"""Run engine, adversarial configuration generators, stabilization metrics,
and statistical experiment sweeps."""

from __future__ import annotations

import csv
import hashlib
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import engine as eng
from .core import (
    AgentState,
    Configuration,
    ConfigurationError,
    Mode,
    ProtocolParams,
    RngStream,
    copy_config,
    new_params,
    sample_ordered_pair,
)
from .protocol import count_colliding_pairs, in_safe_set, interact
from .target import BASELINE, TargetFinder, get_target_finder

ADVERSARIAL_GENERATORS = (
    "uniform_random",
    "all_same_rank",
    "clocks_near_t4",
    "det_all_one",
    "mode_R_all_null",
)
GENERATORS = ADVERSARIAL_GENERATORS + ("safe_fuzzed", "initialized")

_KIND_CODE = {name: code for code, name in enumerate(ADVERSARIAL_GENERATORS)}

DEFAULT_TAIL = 1_000_000


def mix_seed(*parts) -> int:
    """Stable 64-bit seed derived from arbitrary labels."""
    digest = hashlib.sha256(":".join(str(p) for p in parts).encode()).digest()
    return int.from_bytes(digest[:8], "big")


# ---------------------------------------------------------------------------
# Configuration generators
# ---------------------------------------------------------------------------


def generate_arrays(
    kind: str,
    params: ProtocolParams,
    rng: RngStream,
    distinct_ranks: bool = False,
) -> tuple[np.ndarray, np.ndarray]:
    """Engine-array form of generate_config; advances the caller's rng."""
    P = eng.params_vector(params)
    S, L = eng.alloc_state(params)
    rs = eng.rng_array(rng)
    if kind in _KIND_CODE:
        eng.gen_named(S, L, P, rs, _KIND_CODE[kind])
    elif kind == "safe_fuzzed":
        scratch = np.empty(params.n + 1, dtype=np.int64)
        ok = False
        for _ in range(100):
            if eng.gen_safe_fuzz(S, L, P, rs, scratch):
                ok = True
                break
        if not ok:
            raise ConfigurationError("safe_fuzzed generation did not converge")
    elif kind == "initialized":
        eng.gen_initialized(S, L, P, rs, 1 if distinct_ranks else 0)
    else:
        raise ConfigurationError(
            f"unknown generator {kind!r}; available: {sorted(GENERATORS)}"
        )
    eng.rng_store(rng, rs)
    return S, L


def generate_config(
    kind: str,
    params: ProtocolParams,
    rng: RngStream,
    distinct_ranks: bool = False,
) -> Configuration:
    S, L = generate_arrays(kind, params, rng, distinct_ranks)
    return eng.arrays_to_config(S, L, params)


def _base_agent(params: ProtocolParams, rank, leader: int) -> AgentState:
    return AgentState(
        rank=rank,
        target=1,
        leader=leader,
        ltimer=params.lsle_timer_max,
    )


def find_start_config(params: ProtocolParams, ranks) -> Configuration:
    """All agents at the find-window entry phase with finder vars reset."""
    config = []
    for idx, rank in enumerate(ranks):
        a = _base_agent(params, rank, 1 if idx == 0 else 0)
        a.clock = params.c_M * (params.t1 - 1)
        a.mode = Mode.F
        config.append(a)
    return config


def detect_start_config(params: ProtocolParams, ranks, r: int) -> Configuration:
    """All agents at the detect-window entry phase, targeting rank r."""
    config = []
    for idx, rank in enumerate(ranks):
        a = _base_agent(params, rank, 1 if idx == 0 else 0)
        a.clock = params.c_M * (params.t2 - 1)
        a.mode = Mode.D
        a.target = r
        config.append(a)
    return config


def rank_start_config(params: ProtocolParams) -> Configuration:
    """All agents at the rank-window entry phase with ranking vars reset."""
    config = []
    for idx in range(params.n):
        leader = 1 if idx == 0 else 0
        a = _base_agent(params, 1 if leader else None, leader)
        a.clock = params.c_M * (params.t3 - 1)
        a.mode = Mode.R
        a.det = 1
        a.parity = params.t3_5 % 2
        config.append(a)
    return config


# ---------------------------------------------------------------------------
# Single runs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RunReport:
    """Per-run probe record; parallel time is interactions divided by n."""

    seed: int
    interactions_executed: int
    first_safe_entry: int | None
    last_rank_change: int
    parallel_time_to_safe: float | None
    collisions_initial: int
    det_events: int
    leader_changes: int

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "interactions_executed": self.interactions_executed,
            "first_safe_entry": self.first_safe_entry,
            "last_rank_change": self.last_rank_change,
            "parallel_time_to_safe": self.parallel_time_to_safe,
            "collisions_initial": self.collisions_initial,
            "det_events": self.det_events,
            "leader_changes": self.leader_changes,
        }


def _report(params, seed, collisions, first, executed, last_rc, dets, leads):
    return RunReport(
        seed=seed,
        interactions_executed=int(executed),
        first_safe_entry=None if first < 0 else int(first),
        last_rank_change=max(int(last_rc), 0),
        parallel_time_to_safe=None if first < 0 else first / params.n,
        collisions_initial=int(collisions),
        det_events=int(dets),
        leader_changes=int(leads),
    )


def run_arrays(
    S: np.ndarray,
    L: np.ndarray,
    params: ProtocolParams,
    seed: int,
    max_interactions: int,
    stride: int | None = None,
    tail: int = DEFAULT_TAIL,
    rng: RngStream | None = None,
) -> RunReport:
    """Engine-side run on pre-built arrays (mutated in place)."""
    P = eng.params_vector(params)
    scratch = np.empty(params.n + 1, dtype=np.int64)
    collisions = eng.eng_count_colliding(S, P, scratch)
    rs = eng.rng_array(rng) if rng is not None else eng.seeded_rng_array(seed)
    if stride is None:
        stride = params.n
    first, executed, last_rc, dets, leads, tail_viol = eng.run_main(
        S, L, P, rs, max_interactions, stride, tail
    )
    if rng is not None:
        eng.rng_store(rng, rs)
    if tail_viol:
        raise AssertionError(
            f"rank changed {tail_viol} time(s) during the confirmation tail; "
            "safe-set closure violated"
        )
    return _report(params, seed, collisions, first, executed, last_rc, dets, leads)


def run(
    config0: Configuration,
    params: ProtocolParams,
    seed: int = 0,
    max_interactions: int = 10_000_000,
    plugin: str = "baseline",
    stride: int | None = None,
    tail: int = DEFAULT_TAIL,
    rng: RngStream | None = None,
    want_final: bool = False,
):
    """Execute interactions until safe-set entry plus a confirmation tail.

    Safe entry is detected at stride granularity (default n); the reported
    entry is the interaction count of the succeeding check, not backtracked.
    Budget exhaustion reports first_safe_entry = None.
    """
    finder = get_target_finder(plugin)
    if len(config0) != params.n:
        raise ConfigurationError(
            f"configuration has {len(config0)} agents, expected {params.n}"
        )
    if finder is BASELINE:
        S, L = eng.config_to_arrays(config0, params)
        report = run_arrays(
            S, L, params, seed, max_interactions, stride, tail, rng
        )
        if want_final:
            return report, eng.arrays_to_config(S, L, params)
        return report
    report, final = _run_pure(
        config0, params, seed, max_interactions, finder, stride, tail, rng
    )
    if want_final:
        return report, final
    return report


def _run_pure(config0, params, seed, budget, finder, stride, tail, rng):
    """Reference run loop; used for non-baseline finder plug-ins and by the
    engine equivalence tests."""
    config = copy_config(config0)
    n = params.n
    if stride is None:
        stride = n
    if rng is None:
        rng = RngStream(seed)
    collisions = count_colliding_pairs(config)
    first = -1
    last_rc = -1
    dets = 0
    leads = 0
    k = 0
    if in_safe_set(config, params):
        first = 0
    while first < 0 and k < budget:
        lim = min(k + stride, budget)
        while k < lim:
            k += 1
            i, j = sample_ordered_pair(rng, n)
            ri, rj = config[i].rank, config[j].rank
            dj, lj = config[j].det, config[j].leader
            interact(config, i, j, params, rng, finder)
            if config[i].rank != ri or config[j].rank != rj:
                last_rc = k
            if dj == 0 and config[j].det == 1:
                dets += 1
            if config[j].leader != lj:
                leads += 1
        if in_safe_set(config, params):
            first = k
    tail_viol = 0
    if first >= 0:
        for _ in range(tail):
            k += 1
            i, j = sample_ordered_pair(rng, n)
            ri, rj = config[i].rank, config[j].rank
            dj, lj = config[j].det, config[j].leader
            interact(config, i, j, params, rng, finder)
            if config[i].rank != ri or config[j].rank != rj:
                last_rc = k
                tail_viol += 1
            if dj == 0 and config[j].det == 1:
                dets += 1
            if config[j].leader != lj:
                leads += 1
    if tail_viol:
        raise AssertionError(
            f"rank changed {tail_viol} time(s) during the confirmation tail; "
            "safe-set closure violated"
        )
    report = _report(params, seed, collisions, first, k, last_rc, dets, leads)
    return report, config


# Window-scoped runs (engine-backed) -----------------------------------------


def run_detect_window(config0, params, seed, budget=200_000_000):
    """(all_det_in_window, det_events, interactions) from a window start."""
    S, L = eng.config_to_arrays(config0, params)
    P = eng.params_vector(params)
    rs = eng.seeded_rng_array(seed)
    success, dets, k = eng.run_detect_window(S, L, P, rs, budget)
    return bool(success), int(dets), int(k)


def run_rank_window(config0, params, seed, budget=200_000_000):
    """(ranks_complete, alignment_ok, interactions) from a window start."""
    S, L = eng.config_to_arrays(config0, params)
    P = eng.params_vector(params)
    rs = eng.seeded_rng_array(seed)
    ranks_ok, align_ok, k = eng.run_rank_window(S, L, P, rs, budget)
    return bool(ranks_ok), bool(align_ok), int(k)


def run_find_window(config0, params, seed, r, budget=200_000_000):
    """(all_targets_equal_r, interactions) from a window start."""
    S, L = eng.config_to_arrays(config0, params)
    P = eng.params_vector(params)
    rs = eng.seeded_rng_array(seed)
    ok, k = eng.run_find_window(S, L, P, rs, budget, r)
    return bool(ok), int(k)


def run_to_initialized(config0, params, seed, budget):
    """(entry_interaction_or_None, executed) until the initialized set."""
    S, L = eng.config_to_arrays(config0, params)
    P = eng.params_vector(params)
    rs = eng.seeded_rng_array(seed)
    entry, executed = eng.run_until_init(S, L, P, rs, budget)
    return (None if entry < 0 else int(entry)), int(executed)


def run_lsle_hold(config0, params, seed, need, budget):
    """(reached, longest_hold, executed): longest unique-leader persistence."""
    S, L = eng.config_to_arrays(config0, params)
    P = eng.params_vector(params)
    rs = eng.seeded_rng_array(seed)
    reached, hold, k = eng.run_lsle_hold(S, L, P, rs, need, budget)
    return bool(reached), int(hold), int(k)


# Closure fuzzing -------------------------------------------------------------


@dataclass(frozen=True)
class ClosureViolation:
    config_index: int
    pair: tuple[int, int]
    pre: Configuration
    post: Configuration


def closure_fuzz(params: ProtocolParams, n_configs: int, seed: int) -> ClosureViolation | None:
    """Exhaustive one-interaction closure over fuzzed safe configurations.

    Returns None when every configuration stays safe under all n(n-1)
    ordered pairs, otherwise the first counterexample found."""
    if n_configs < 1:
        raise ConfigurationError("n_configs must be >= 1")
    P = eng.params_vector(params)
    c, i, j = eng.closure_fuzz(P, n_configs, seed)
    if c == -1:
        return None
    if c == -2:
        raise ConfigurationError("safe_fuzzed generation did not converge")
    # replay the generator to recover the offending configuration
    S, L = eng.alloc_state(params)
    scratch = np.empty(params.n + 1, dtype=np.int64)
    rs = np.empty(4, dtype=np.uint64)
    eng._seed_rs(rs, seed + int(c))
    for _ in range(100):
        if eng.gen_safe_fuzz(S, L, P, rs, scratch):
            break
    pre = eng.arrays_to_config(S, L, params)
    S2, L2 = S.copy(), L.copy()
    eng.eng_interact(S2, L2, int(i), int(j), P, rs.copy())
    post = eng.arrays_to_config(S2, L2, params)
    return ClosureViolation(int(c), (int(i), int(j)), pre, post)


def totality_fuzz(params: ProtocolParams, n_configs: int, seed: int, steps: int = 2) -> int:
    """Drive uniform-random configurations; returns the first configuration
    index leaving its variable domains, or -1."""
    P = eng.params_vector(params)
    return int(eng.totality_fuzz(P, n_configs, seed, steps))


# ---------------------------------------------------------------------------
# Experiment sweeps
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentSpec:
    """Declarative sweep description."""

    n: tuple
    rho: tuple
    generators: tuple
    trials: int
    max_interactions: int
    seed: int = 0
    constants: dict = field(default_factory=dict)
    output: str | None = None

    _KNOWN = {
        "n", "rho", "generators", "trials", "max_interactions",
        "seed", "constants", "output",
    }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        unknown = set(d) - cls._KNOWN
        if unknown:
            raise ConfigurationError(f"unknown spec keys: {sorted(unknown)}")
        missing = {"n", "rho", "generators", "trials", "max_interactions"} - set(d)
        if missing:
            raise ConfigurationError(f"missing spec keys: {sorted(missing)}")
        spec = cls(
            n=tuple(d["n"]),
            rho=tuple(d["rho"]),
            generators=tuple(d["generators"]),
            trials=d["trials"],
            max_interactions=d["max_interactions"],
            seed=d.get("seed", 0),
            constants=dict(d.get("constants", {})),
            output=d.get("output"),
        )
        spec.validate()
        return spec

    @classmethod
    def from_json(cls, text: str) -> "ExperimentSpec":
        data = json.loads(text)
        if not isinstance(data, dict):
            raise ConfigurationError("experiment spec must be a JSON object")
        return cls.from_dict(data)

    def validate(self) -> None:
        if not self.n or not self.rho or not self.generators:
            raise ConfigurationError("n, rho, and generators must be non-empty")
        if not isinstance(self.trials, int) or self.trials < 1:
            raise ConfigurationError(f"trials must be >= 1, got {self.trials!r}")
        if not isinstance(self.max_interactions, int) or self.max_interactions < 1:
            raise ConfigurationError(
                f"max_interactions must be >= 1, got {self.max_interactions!r}"
            )
        for gen in self.generators:
            if gen not in GENERATORS:
                raise ConfigurationError(
                    f"unknown generator {gen!r}; available: {sorted(GENERATORS)}"
                )
        for n in self.n:
            for rho in self.rho:
                new_params(n, rho, **self.constants)  # raises ParameterError


CSV_COLUMNS = (
    "n",
    "rho",
    "generator",
    "trial",
    "seed",
    "first_safe_entry",
    "parallel_time_to_safe",
    "last_rank_change",
    "det_events",
    "leader_changes",
    "interactions_executed",
    "median_parallel_time_to_safe",
    "p90_parallel_time_to_safe",
)


def _fmt(v) -> str:
    if v is None:
        return ""
    return str(v)


def _trial_row(n, rho, gen, trial, report: RunReport) -> dict:
    return {
        "n": str(n),
        "rho": str(rho),
        "generator": gen,
        "trial": str(trial),
        "seed": str(report.seed),
        "first_safe_entry": _fmt(report.first_safe_entry),
        "parallel_time_to_safe": _fmt(report.parallel_time_to_safe),
        "last_rank_change": str(report.last_rank_change),
        "det_events": str(report.det_events),
        "leader_changes": str(report.leader_changes),
        "interactions_executed": str(report.interactions_executed),
        "median_parallel_time_to_safe": "",
        "p90_parallel_time_to_safe": "",
    }


def _agg_row(n, rho, gen, reports) -> dict:
    times = [r.parallel_time_to_safe for r in reports if r.parallel_time_to_safe is not None]
    median = p90 = ""
    if times:
        median = str(float(np.percentile(times, 50)))
        p90 = str(float(np.percentile(times, 90)))
    row = {col: "" for col in CSV_COLUMNS}
    row.update(
        n=str(n),
        rho=str(rho),
        generator=f"{gen}/agg",
        median_parallel_time_to_safe=median,
        p90_parallel_time_to_safe=p90,
    )
    return row


def _sweep_trial(spec: ExperimentSpec, n: int, rho: int, gen: str, trial: int) -> RunReport:
    params = new_params(n, rho, **spec.constants)
    seed = mix_seed(spec.seed, n, rho, gen, trial)
    rng = RngStream(seed)
    S, L = generate_arrays(gen, params, rng)
    return run_arrays(S, L, params, seed, spec.max_interactions, rng=rng)


def sweep(spec: ExperimentSpec, jobs: int = 1, out_path: str | None = None) -> list[dict]:
    """Execute the sweep grid; returns data rows plus per-cell aggregate rows
    in deterministic (n, rho, generator, trial) order regardless of jobs."""
    cells = [
        (n, rho, gen)
        for n in spec.n
        for rho in spec.rho
        for gen in spec.generators
    ]
    tasks = [(n, rho, gen, t) for (n, rho, gen) in cells for t in range(spec.trials)]
    results: dict[tuple, RunReport] = {}
    try:
        if jobs <= 1:
            for task in tasks:
                results[task] = _sweep_trial(spec, *task)
        else:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                for task, report in zip(
                    tasks, pool.map(lambda t: _sweep_trial(spec, *t), tasks)
                ):
                    results[task] = report
    except KeyboardInterrupt:
        if out_path is not None:
            rows = _rows_from_results(spec, cells, results, partial=True)
            write_csv(rows, out_path)
        raise
    rows = _rows_from_results(spec, cells, results, partial=False)
    if out_path is not None:
        write_csv(rows, out_path)
    return rows


def _rows_from_results(spec, cells, results, partial: bool) -> list[dict]:
    rows = []
    for (n, rho, gen) in cells:
        reports = []
        for t in range(spec.trials):
            report = results.get((n, rho, gen, t))
            if report is None:
                if partial:
                    continue
                raise RuntimeError("missing sweep result")
            reports.append(report)
            rows.append(_trial_row(n, rho, gen, t, report))
        if reports:
            rows.append(_agg_row(n, rho, gen, reports))
    return rows


def write_csv(rows: list[dict], path: str) -> None:
    parent = os.path.dirname(os.path.abspath(path))
    if not os.path.isdir(parent):
        raise ConfigurationError(f"output directory does not exist: {parent}")
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)


def measure_throughput(n: int = 1024, rho: int = 16, interactions: int = 5_000_000, seed: int = 1) -> float:
    """Interactions per second of the compiled engine on one core."""
    import time

    params = new_params(n, rho)
    rng = RngStream(seed)
    S, L = generate_arrays("det_all_one", params, rng)
    P = eng.params_vector(params)
    rs = eng.rng_array(rng)
    eng.bench_loop(S, L, P, rs, 1000)  # compile warmup
    t0 = time.perf_counter()
    eng.bench_loop(S, L, P, rs, interactions)
    dt = time.perf_counter() - t0
    return interactions / dt
