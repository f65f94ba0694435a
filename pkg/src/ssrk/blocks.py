"""Reusable building blocks: one-way epidemic, single-leader phase clock,
and a timeout-based loosely-stabilizing leader election."""

from __future__ import annotations

from .core import AgentState, ProtocolParams


def epidemic_step(ini_value, res_value):
    """One-way epidemic: the responder adopts the pairwise maximum."""
    return max(ini_value, res_value)


def phase_clock_step(ini: AgentState, res: AgentState, params: ProtocolParams) -> None:
    """Leader-driven phase clock update on the responder.

    A leader responder whose clock matches the initiator's ticks forward
    (capped at c_M * t4); everyone else catches up to the pairwise maximum.
    The initiator's clock never changes, so phase(ini) <= phase(res) holds
    afterwards.
    """
    if res.leader == 1 and ini.clock == res.clock:
        res.clock = min(res.clock + 1, params.clock_cap)
    else:
        res.clock = max(ini.clock, res.clock)


def lsle_step(ini: AgentState, res: AgentState, params: ProtocolParams) -> None:
    """Timeout-based loose leader election.

    Two leaders meeting demote the responder. Leaders keep their timer at the
    ceiling; a non-leader responder takes the pairwise maximum minus one and
    promotes itself with a full timer when the countdown reaches zero.
    """
    cap = params.lsle_timer_max
    if ini.leader == 1 and res.leader == 1:
        res.leader = 0
    if ini.leader == 1:
        ini.ltimer = cap
    if res.leader == 1:
        res.ltimer = cap
    else:
        t = max(ini.ltimer, res.ltimer) - 1
        if t <= 0:
            res.leader = 1
            res.ltimer = cap
        else:
            res.ltimer = t
