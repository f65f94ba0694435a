"""The composed protocol: reset propagation, leader delay, phase clock
driving, mode switching with auto-initialization, guarded dispatch into the
sub-protocols, plus the initialized-set and safe-set checkers."""

from __future__ import annotations

from collections import Counter

from .blocks import lsle_step, phase_clock_step
from .core import AgentState, Configuration, Mode, ProtocolParams, RngStream, phase
from .detect import detect_init, detect_step, is_king, is_ronin, is_vassal
from .rank import rank_init, rank_step
from .target import BASELINE, TargetFinder


def interact(
    config: Configuration,
    ini_idx: int,
    res_idx: int,
    params: ProtocolParams,
    rng: RngStream,
    finder: TargetFinder = BASELINE,
) -> Configuration:
    """Apply one interaction between the given initiator and responder.

    Total on every in-domain configuration; mutates only the two addressed
    agents (plus the caller's rng during rank lotteries).
    """
    if ini_idx == res_idx:
        raise ValueError("initiator and responder must differ")
    ini = config[ini_idx]
    res = config[res_idx]
    was_r_ini = ini.mode == Mode.R
    was_r_res = res.mode == Mode.R

    lsle_step(ini, res, params)

    joint = max(ini.reset - 1, res.reset - 1, 0)
    ini.reset = joint
    res.reset = joint

    if res.reset > 0:
        ini.clock = 0
        res.clock = 0
        ini.delay = params.delay_max
        res.delay = params.delay_max
        ini.mode = Mode.BOT
        res.mode = Mode.BOT
        ini.det = 0
        res.det = 0
    elif res.leader == 1 and res.delay > 0:
        res.delay -= 1
    else:
        phase_clock_step(ini, res, params)
        if phase(res, params) == params.t4:
            res.reset = params.reset_max
        p1 = phase(ini, params)
        p2 = phase(res, params)

        new_mode = res.mode
        if p2 == params.t1 - 1:
            new_mode = Mode.F
        elif p2 == params.t2 - 1:
            new_mode = Mode.D
        elif p2 == params.t3 - 1 and res.det == 1:
            new_mode = Mode.R
        if new_mode != res.mode:
            res.mode = new_mode
            if new_mode == Mode.F:
                finder.init(res)
            elif new_mode == Mode.D:
                detect_init(res)
            else:
                rank_init(res, params)

        if ini.mode == res.mode and (res.mode != Mode.D or ini.target == res.target):
            if res.mode == Mode.F and params.t1 <= p1 and p2 <= params.t2 - 2:
                finder.step(ini, res)
            elif res.mode == Mode.D and params.t2 <= p1 and p2 <= params.t3 - 2:
                detect_step(ini, res, res.target, params)
            elif res.mode == Mode.R and params.t3 <= p1 and p2 <= params.t4 - 1:
                rank_step(ini, res, params, rng)

    # Leaving mode R with an unassigned rank falls back to rank 1; the
    # resulting duplicate is caught by the next detection cycle.
    if was_r_ini and ini.mode != Mode.R and ini.rank is None:
        ini.rank = 1
    if was_r_res and res.mode != Mode.R and res.rank is None:
        res.rank = 1
    return config


def in_initialized_set(config: Configuration) -> bool:
    """True when every agent has clock = reset = det = 0 and mode bot, and no
    leader still holds a restart delay (non-leader delays are dead state)."""
    for a in config:
        if a.clock != 0 or a.reset != 0 or a.det != 0 or a.mode != Mode.BOT:
            return False
        if a.leader == 1 and a.delay != 0:
            return False
    return True


def in_safe_set(config: Configuration, params: ProtocolParams) -> bool:
    """Membership in the closed safe set: distinct ranks, no mode-R agent,
    no detection flags, and no inconsistent suspicion among detector roles."""
    seen = set()
    for a in config:
        if a.rank is None or a.rank in seen:
            return False
        seen.add(a.rank)
        if a.mode == Mode.R or a.det != 0:
            return False

    rho = params.rho
    for a in config:
        if a.mode != Mode.D:
            continue
        if (is_king(a, a.target) or is_ronin(a, a.target, rho)) and a.susp != 0:
            return False

    for a in config:
        if a.mode != Mode.D or not is_king(a, a.target):
            continue
        for b in config:
            if b is a or b.mode != Mode.D or b.target != a.target:
                continue
            if is_vassal(b) and b.list <= a.list:
                if b.susp != 0 or a.kid != b.kid:
                    return False
    return True


def count_colliding_pairs(config: Configuration) -> int:
    counts = Counter(a.rank for a in config if a.rank is not None)
    return sum(c * (c - 1) // 2 for c in counts.values())
