"""Rank assignment: part 1 hands out ranks [1, n-m] in parallel by binary
splitting; part 2 assigns the last m ranks sequentially through per-round
nonce lotteries paced by the phase clock."""

from __future__ import annotations

from .core import AgentState, ProtocolParams, RngStream, phase


def rank_init(a: AgentState, params: ProtocolParams) -> None:
    """Initialize ranking variables at mode-R entry. Exactly one leader is
    expected; it seeds the splitting tree with rank 1."""
    a.index = 0
    a.rank = 1 if a.leader == 1 else None
    a.nonce = 0
    a.parity = params.t3_5 % 2
    a.cand = 0


def rank_step(ini: AgentState, res: AgentState, params: ProtocolParams, rng: RngStream) -> None:
    """One ranking interaction inside the dispatch window.

    Part 1 (responder phase below t3_5): a ranked initiator splits its masked
    suffix, handing the responder the branch rank when it stays within
    [1, n-m]. The initiator's index advances even when the branch overflows.

    Part 2: on each first arrival in a phase (parity toggle) the responder
    processes round boundaries: award the round rank to a surviving
    candidate, refresh candidacy, and redraw its lottery nonce. Within a
    phase the maximum nonce spreads and knocks out smaller candidates.
    """
    p1 = phase(ini, params)
    p2 = phase(res, params)
    n, m, lgn, c_T = params.n, params.m, params.lgn, params.c_T

    if p2 < params.t3_5:
        if ini.rank is not None and ini.index < lgn and res.rank is None:
            ini.index += 1
            r_new = ini.rank + (1 << (lgn - ini.index))
            if r_new <= n - m:
                res.rank = r_new
                res.index = ini.index

    if p2 >= params.t3_5 and p2 % 2 == res.parity:
        res.parity = 1 - res.parity
        h = p2 - params.t3_5
        if h % c_T == 0:
            if res.cand == 1:
                awarded = n - m + h // c_T
                if awarded <= n:
                    res.rank = awarded
            res.cand = 1 if res.rank is None else 0
        if res.cand == 1:
            res.nonce = 1 + rng.below(params.nonce_max)
        else:
            res.nonce = 0

    if p1 == p2 and p2 >= params.t3_5 and res.nonce < ini.nonce:
        res.cand = 0
        res.nonce = ini.nonce
