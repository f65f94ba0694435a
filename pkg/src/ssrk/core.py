"""Domain types, parameter derivation, the pair scheduler, and state accounting."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields
from enum import IntEnum
from typing import Iterator


class ParameterError(ValueError):
    """A protocol parameter is outside its declared range."""


class ConfigurationError(ValueError):
    """A run configuration is malformed (unknown generator, bad spec, ...)."""


class Mode(IntEnum):
    BOT = 0
    F = 1
    D = 2
    R = 3


MODE_NAMES = {Mode.BOT: "bot", Mode.F: "F", Mode.D: "D", Mode.R: "R"}
MODE_FROM_NAME = {name: mode for mode, name in MODE_NAMES.items()}

DEFAULT_CONSTANTS = {
    "c_M": 8,
    "c_T": 4,
    "c_R": 4,
    "c_D": 32,
    "c_L": 4,
    "c_min": 4,
}

_MASK64 = (1 << 64) - 1


def ceil_sqrt(n: int) -> int:
    r = math.isqrt(n)
    return r if r * r == n else r + 1


def ceil_log2(n: int) -> int:
    return (n - 1).bit_length()


@dataclass(frozen=True)
class ProtocolParams:
    """Population size, detection parameter, tunable constants, and the
    derived phase boundaries of the main cycle."""

    n: int
    rho: int
    c_M: int
    c_T: int
    c_R: int
    c_D: int
    c_L: int
    c_min: int
    find_window_multiplier: int
    detect_window_multiplier: int
    t1: int
    t2: int
    t3: int
    t3_5: int
    t4: int
    m: int
    lgn: int
    lsle_timer_max: int

    @property
    def clock_cap(self) -> int:
        return self.c_M * self.t4

    @property
    def reset_max(self) -> int:
        return self.c_R * self.lgn

    @property
    def delay_max(self) -> int:
        return self.c_D * self.lgn

    @property
    def nonce_max(self) -> int:
        return self.n * self.n


def new_params(n: int, rho: int, **overrides) -> ProtocolParams:
    """Validate (n, rho) plus constant overrides and derive phase boundaries.

    Accepted overrides: c_M, c_T, c_R, c_D, c_L, c_min, lsle_timer_max,
    find_window_multiplier, detect_window_multiplier.
    """
    allowed = set(DEFAULT_CONSTANTS) | {
        "lsle_timer_max",
        "find_window_multiplier",
        "detect_window_multiplier",
    }
    unknown = set(overrides) - allowed
    if unknown:
        raise ParameterError(f"unknown constants: {sorted(unknown)}")

    if not isinstance(n, int) or n < 4:
        raise ParameterError(f"n must be an integer >= 4, got {n!r}")
    m = ceil_sqrt(n)
    if not isinstance(rho, int) or not 1 <= rho <= m:
        raise ParameterError(
            f"rho must satisfy 1 <= rho <= ceil(sqrt(n)) = {m}, got {rho!r}"
        )

    consts = dict(DEFAULT_CONSTANTS)
    for key in DEFAULT_CONSTANTS:
        if key in overrides:
            consts[key] = overrides[key]
    for key, val in consts.items():
        if not isinstance(val, int) or val < 1:
            raise ParameterError(f"{key} must be a positive integer, got {val!r}")
    if consts["c_T"] < 2:
        raise ParameterError(f"c_T must be >= 2, got {consts['c_T']}")

    fwm = overrides.get("find_window_multiplier", 1)
    dwm = overrides.get("detect_window_multiplier", 1)
    for key, val in (("find_window_multiplier", fwm), ("detect_window_multiplier", dwm)):
        if not isinstance(val, int) or val < 1:
            raise ParameterError(f"{key} must be a positive integer, got {val!r}")

    lgn = ceil_log2(n)
    c_T = consts["c_T"]
    t1 = 2
    t2 = t1 + fwm * c_T * m
    # lg(rho) clamped below at 1 so the detect window stays non-degenerate at
    # rho = 1; see the direct-detection budget, which needs ~n^2 interactions.
    lg_rho = max(math.log2(rho), 1.0)
    t3 = t2 + max(1, dwm * c_T * math.ceil(n * lg_rho / (rho * lgn)))
    t4 = t3 + 2 * c_T * m
    t3_5 = t4 - 1 - c_T * (m + 1)

    lsle_timer_max = overrides.get("lsle_timer_max", 8 * consts["c_L"] * lgn)
    if not isinstance(lsle_timer_max, int) or lsle_timer_max < 1:
        raise ParameterError(
            f"lsle_timer_max must be a positive integer, got {lsle_timer_max!r}"
        )

    if not (t1 < t2 < t3 < t3_5 < t4):
        raise ParameterError(
            f"phase boundaries not strictly ordered: "
            f"t1={t1}, t2={t2}, t3={t3}, t3_5={t3_5}, t4={t4}"
        )

    return ProtocolParams(
        n=n,
        rho=rho,
        c_M=consts["c_M"],
        c_T=c_T,
        c_R=consts["c_R"],
        c_D=consts["c_D"],
        c_L=consts["c_L"],
        c_min=consts["c_min"],
        find_window_multiplier=fwm,
        detect_window_multiplier=dwm,
        t1=t1,
        t2=t2,
        t3=t3,
        t3_5=t3_5,
        t4=t4,
        m=m,
        lgn=lgn,
        lsle_timer_max=lsle_timer_max,
    )


@dataclass
class AgentState:
    """The full per-agent variable bundle.

    rank/target/kid use None as the null sentinel. ``list`` holds at most rho
    rank names from [1, rho^2] excluding the agent's own target.
    """

    rank: int | None = None
    clock: int = 0
    mode: Mode = Mode.BOT
    target: int | None = None
    det: int = 0
    reset: int = 0
    delay: int = 0
    list: set[int] = field(default_factory=set)
    kid: int | None = None
    susp: int = 0
    index: int = 0
    nonce: int = 0
    cand: int = 0
    parity: int = 0
    leader: int = 0
    ltimer: int = 0
    ft_found: int = 0

    def copy(self) -> AgentState:
        dup = AgentState(**{f.name: getattr(self, f.name) for f in fields(self)})
        dup.list = set(self.list)
        return dup


Configuration = list  # list[AgentState], indexed by simulator-only agent id


def initialized_agent(rank: int, leader: int = 0, params: ProtocolParams | None = None) -> AgentState:
    a = AgentState(rank=rank, target=1, leader=leader)
    if leader and params is not None:
        a.ltimer = params.lsle_timer_max
    return a


def validate_agent(a: AgentState, params: ProtocolParams) -> None:
    """Raise ValueError if any field is outside its declared domain."""
    p = params
    if a.rank is None:
        if a.mode != Mode.R:
            raise ValueError("rank may be null only in mode R")
    elif not 1 <= a.rank <= p.n:
        raise ValueError(f"rank {a.rank} outside [1, {p.n}]")
    if not 0 <= a.clock <= p.clock_cap:
        raise ValueError(f"clock {a.clock} outside [0, {p.clock_cap}]")
    if a.mode not in (Mode.BOT, Mode.F, Mode.D, Mode.R):
        raise ValueError(f"invalid mode {a.mode}")
    if a.target is not None and not 1 <= a.target <= p.n:
        raise ValueError(f"target {a.target} outside [1, {p.n}]")
    if not 0 <= a.reset <= p.reset_max:
        raise ValueError(f"reset {a.reset} outside [0, {p.reset_max}]")
    if not 0 <= a.delay <= p.delay_max:
        raise ValueError(f"delay {a.delay} outside [0, {p.delay_max}]")
    if len(a.list) > p.rho:
        raise ValueError(f"|list| = {len(a.list)} exceeds rho = {p.rho}")
    rho2 = p.rho * p.rho
    for v in a.list:
        if not 1 <= v <= rho2 or v == a.target:
            raise ValueError(f"list value {v} outside R_name for target {a.target}")
    if a.kid is not None and (not 1 <= a.kid <= rho2 or a.kid == a.target):
        raise ValueError(f"kid {a.kid} outside R_name for target {a.target}")
    if not 0 <= a.index <= p.lgn:
        raise ValueError(f"index {a.index} outside [0, {p.lgn}]")
    if not 0 <= a.nonce <= p.nonce_max:
        raise ValueError(f"nonce {a.nonce} outside [0, {p.nonce_max}]")
    if not 0 <= a.ltimer <= p.lsle_timer_max:
        raise ValueError(f"ltimer {a.ltimer} outside [0, {p.lsle_timer_max}]")
    for name in ("det", "susp", "cand", "parity", "leader", "ft_found"):
        if getattr(a, name) not in (0, 1):
            raise ValueError(f"{name} must be a bit")


def validate_config(config: Configuration, params: ProtocolParams) -> None:
    if len(config) != params.n:
        raise ValueError(f"configuration has {len(config)} agents, expected {params.n}")
    for a in config:
        validate_agent(a, params)


def phase(a: AgentState, params: ProtocolParams) -> int:
    return a.clock // params.c_M


def phase_of_clock(clock: int, c_M: int) -> int:
    return clock // c_M


# ---------------------------------------------------------------------------
# Seeded PRNG: xoshiro256++ (Blackman/Vigna), state expanded from a 64-bit
# seed via splitmix64. Period 2^256 - 1; identical sequences for equal seeds.
# ---------------------------------------------------------------------------


def _splitmix64(x: int) -> tuple[int, int]:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x, z ^ (z >> 31)


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK64


class RngStream:
    """Deterministic 64-bit-seeded random stream (xoshiro256++)."""

    __slots__ = ("seed", "s0", "s1", "s2", "s3")

    def __init__(self, seed: int):
        self.seed = seed & _MASK64
        x = self.seed
        x, self.s0 = _splitmix64(x)
        x, self.s1 = _splitmix64(x)
        x, self.s2 = _splitmix64(x)
        x, self.s3 = _splitmix64(x)
        if self.s0 == self.s1 == self.s2 == self.s3 == 0:
            self.s0 = 1

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self.s0, self.s1, self.s2, self.s3
        result = (_rotl((s0 + s3) & _MASK64, 23) + s0) & _MASK64
        t = (s1 << 17) & _MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self.s0, self.s1, self.s2, self.s3 = s0, s1, s2, s3
        return result

    def below(self, k: int) -> int:
        """Uniform integer in [0, k). One draw; modulo bias is O(k / 2^64)."""
        return self.next_u64() % k

    def state(self) -> tuple[int, int, int, int]:
        return (self.s0, self.s1, self.s2, self.s3)

    def set_state(self, state) -> None:
        self.s0, self.s1, self.s2, self.s3 = (int(v) & _MASK64 for v in state)


def sample_ordered_pair(rng: RngStream, n: int) -> tuple[int, int]:
    """Uniform ordered pair of distinct indices in [0, n). Exactly two draws."""
    i = rng.below(n)
    j = rng.below(n - 1)
    if j >= i:
        j += 1
    return i, j


# ---------------------------------------------------------------------------
# State-space accounting
# ---------------------------------------------------------------------------


def _log2_int(x: int) -> float:
    if x <= 0:
        raise ValueError("log2 of non-positive value")
    e = x.bit_length() - 53
    if e > 0:
        return math.log2(x >> e) + e
    return math.log2(x)


def list_domain_size(rho: int) -> int:
    """Number of subsets of R_name (rho^2 - 1 names) of size at most rho."""
    return sum(math.comb(rho * rho - 1, i) for i in range(rho + 1))


def list_domain_bits(rho: int) -> float:
    return _log2_int(list_domain_size(rho))


def domain_sizes(params: ProtocolParams) -> dict[str, int]:
    p = params
    return {
        "rank": p.n + 1,
        "clock": p.clock_cap + 1,
        "mode": 4,
        "target": p.n + 1,
        "det": 2,
        "reset": p.reset_max + 1,
        "delay": p.delay_max + 1,
        "list": list_domain_size(p.rho),
        "kid": p.rho * p.rho,  # rho^2 - 1 names plus the null sentinel
        "susp": 2,
        "index": p.lgn + 1,
        "nonce": p.nonce_max + 1,
        "cand": 2,
        "parity": 2,
        "leader": 2,
        "ltimer": p.lsle_timer_max + 1,
        "ft_found": 2,
    }


def state_space_bits(params: ProtocolParams) -> float:
    """lg of the product of all per-agent variable domain cardinalities."""
    return sum(_log2_int(size) for size in domain_sizes(params).values())


# ---------------------------------------------------------------------------
# Configuration snapshots (JSON, null sentinels serialized as literal null)
# ---------------------------------------------------------------------------


def agent_to_dict(a: AgentState) -> dict:
    return {
        "rank": a.rank,
        "clock": a.clock,
        "mode": MODE_NAMES[a.mode],
        "target": a.target,
        "det": a.det,
        "reset": a.reset,
        "delay": a.delay,
        "list": sorted(a.list),
        "kid": a.kid,
        "susp": a.susp,
        "index": a.index,
        "nonce": a.nonce,
        "cand": a.cand,
        "parity": a.parity,
        "leader": a.leader,
        "ltimer": a.ltimer,
        "ft_found": a.ft_found,
    }


def agent_from_dict(d: dict) -> AgentState:
    known = {
        "rank", "clock", "mode", "target", "det", "reset", "delay", "list",
        "kid", "susp", "index", "nonce", "cand", "parity", "leader", "ltimer",
        "ft_found",
    }
    unknown = set(d) - known
    if unknown:
        raise ConfigurationError(f"unknown agent fields: {sorted(unknown)}")
    missing = known - set(d)
    if missing:
        raise ConfigurationError(f"missing agent fields: {sorted(missing)}")
    mode = MODE_FROM_NAME.get(d["mode"])
    if mode is None:
        raise ConfigurationError(f"unknown mode {d['mode']!r}")
    a = AgentState(**{k: d[k] for k in known - {"mode", "list"}})
    a.mode = mode
    a.list = set(d["list"])
    return a


def config_to_json(config: Configuration) -> str:
    return json.dumps([agent_to_dict(a) for a in config], sort_keys=True, indent=2)


def config_from_json(text: str, params: ProtocolParams | None = None) -> Configuration:
    data = json.loads(text)
    if not isinstance(data, list):
        raise ConfigurationError("snapshot must be a JSON array of agent objects")
    config = [agent_from_dict(d) for d in data]
    if params is not None:
        validate_config(config, params)
    return config


def copy_config(config: Configuration) -> Configuration:
    return [a.copy() for a in config]
