"""Targeted collision detection: kings adopt vassals, suspicion spreads among
mutually trusting saturated agents, and kings convert suspicion into
detection. Direct same-rank detection runs unconditionally."""

from __future__ import annotations

from .core import AgentState, ProtocolParams


class RNameView:
    """Membership view of the name pool [1, rho^2] minus the target rank."""

    __slots__ = ("rho", "r")

    def __init__(self, rho: int, r: int | None):
        self.rho = rho
        self.r = r

    def __contains__(self, x) -> bool:
        return x is not None and 1 <= x <= self.rho * self.rho and x != self.r

    @property
    def size(self) -> int:
        rho2 = self.rho * self.rho
        if self.r is not None and 1 <= self.r <= rho2:
            return rho2 - 1
        return rho2


def detect_init(a: AgentState) -> None:
    """Reset the detector variables at mode-D entry. Rank and target survive."""
    a.det = 0
    a.list = set()
    a.kid = None
    a.susp = 0


def is_king(a: AgentState, r: int | None) -> bool:
    return a.rank is not None and a.rank == r


def is_vassal(a: AgentState) -> bool:
    return a.rank in a.list


def is_ronin(a: AgentState, r: int | None, rho: int) -> bool:
    return a.rank in RNameView(rho, r) and a.rank not in a.list


def trust(a: AgentState, b: AgentState, r: int | None, rho: int) -> bool:
    """a trusts b: same kingdom id, a's list contained in b's saturated list,
    and b is a king or vassal."""
    return (
        a.kid == b.kid
        and a.list <= b.list
        and len(b.list) == rho
        and (is_king(b, r) or is_vassal(b))
    )


def detect_step(ini: AgentState, res: AgentState, r: int | None, params: ProtocolParams) -> None:
    """One detector interaction. The caller guarantees both agents are in
    mode D with target r. Ranks, modes, targets, and clocks never change."""
    rho = params.rho
    if (
        is_king(ini, r)
        and len(ini.list) < rho
        and res.rank not in ini.list
        and is_ronin(res, r, rho)
    ):
        # Adoption: the king records the ronin's rank; both share the list
        # and the kingdom id (the first vassal's rank if none is set yet).
        new_list = ini.list | {res.rank}
        ini.list = set(new_list)
        res.list = set(new_list)
        new_kid = res.rank if ini.kid is None else ini.kid
        ini.kid = new_kid
        res.kid = new_kid
    elif is_vassal(res) and trust(res, ini, r, rho):
        res.list = ini.list | res.list
    elif is_king(ini, r) and is_vassal(res) and ini.kid != res.kid:
        res.susp = 1
    elif trust(ini, res, r, rho) and trust(res, ini, r, rho):
        res.susp = max(ini.susp, res.susp)

    if (is_king(res, r) and res.susp == 1) or (
        ini.rank is not None and ini.rank == res.rank
    ):
        res.det = 1
    else:
        res.det = max(ini.det, res.det)
