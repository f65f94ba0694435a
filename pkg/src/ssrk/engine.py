"""Compiled struct-of-arrays engine.

The pure-python modules are the readable reference implementation; this
engine reproduces their transition bit-for-bit (same PRNG, same draw order)
on row-per-agent int64 arrays so Monte-Carlo workloads run at tens of
millions of interactions per second. tests/test_engine.py enforces
trajectory equivalence between the two layers.

Layout: one int64 matrix ``S[agent, field]`` (columns ``F_*`` below), plus a
uint64 bitset matrix ``L[agent, word]`` for the detector's rank list. Null
rank/target/kid encode as 0. Parameters travel as an int64 vector (``P_*``).
"""

from __future__ import annotations

import numpy as np
from numba import int64, njit, uint64

from .core import (
    AgentState,
    Configuration,
    Mode,
    ProtocolParams,
    RngStream,
)

# S columns
F_RANK = 0
F_CLOCK = 1
F_MODE = 2
F_TARGET = 3
F_DET = 4
F_RESET = 5
F_DELAY = 6
F_KID = 7
F_SUSP = 8
F_LSIZE = 9
F_INDEX = 10
F_NONCE = 11
F_CAND = 12
F_PARITY = 13
F_LEADER = 14
F_LTIMER = 15
F_FTF = 16
NF = 17

# P entries
P_N = 0
P_RHO = 1
P_CM = 2
P_CT = 3
P_CR = 4
P_CD = 5
P_CL = 6
P_CMIN = 7
P_T1 = 8
P_T2 = 9
P_T3 = 10
P_T35 = 11
P_T4 = 12
P_M = 13
P_LGN = 14
P_LTMAX = 15
P_W = 16
P_CLOCKCAP = 17
P_RESETMAX = 18
P_DELAYMAX = 19
P_NONCEMAX = 20
NP = 21

MODE_BOT = int(Mode.BOT)
MODE_F = int(Mode.F)
MODE_D = int(Mode.D)
MODE_R = int(Mode.R)


def params_vector(params: ProtocolParams) -> np.ndarray:
    p = params
    w = max(1, (p.rho * p.rho + 63) // 64)
    vec = np.array(
        [
            p.n, p.rho, p.c_M, p.c_T, p.c_R, p.c_D, p.c_L, p.c_min,
            p.t1, p.t2, p.t3, p.t3_5, p.t4, p.m, p.lgn, p.lsle_timer_max,
            w, p.clock_cap, p.reset_max, p.delay_max, p.nonce_max,
        ],
        dtype=np.int64,
    )
    assert vec.shape[0] == NP
    return vec


def alloc_state(params: ProtocolParams) -> tuple[np.ndarray, np.ndarray]:
    w = max(1, (params.rho * params.rho + 63) // 64)
    S = np.zeros((params.n, NF), dtype=np.int64)
    L = np.zeros((params.n, w), dtype=np.uint64)
    return S, L


def config_to_arrays(config: Configuration, params: ProtocolParams) -> tuple[np.ndarray, np.ndarray]:
    S, L = alloc_state(params)
    for idx, a in enumerate(config):
        S[idx, F_RANK] = a.rank or 0
        S[idx, F_CLOCK] = a.clock
        S[idx, F_MODE] = int(a.mode)
        S[idx, F_TARGET] = a.target or 0
        S[idx, F_DET] = a.det
        S[idx, F_RESET] = a.reset
        S[idx, F_DELAY] = a.delay
        S[idx, F_KID] = a.kid or 0
        S[idx, F_SUSP] = a.susp
        S[idx, F_LSIZE] = len(a.list)
        S[idx, F_INDEX] = a.index
        S[idx, F_NONCE] = a.nonce
        S[idx, F_CAND] = a.cand
        S[idx, F_PARITY] = a.parity
        S[idx, F_LEADER] = a.leader
        S[idx, F_LTIMER] = a.ltimer
        S[idx, F_FTF] = a.ft_found
        for v in a.list:
            L[idx, (v - 1) >> 6] |= np.uint64(1) << np.uint64((v - 1) & 63)
    return S, L


def arrays_to_config(S: np.ndarray, L: np.ndarray, params: ProtocolParams) -> Configuration:
    config = []
    rho2 = params.rho * params.rho
    for idx in range(params.n):
        members = {
            v for v in range(1, rho2 + 1)
            if (int(L[idx, (v - 1) >> 6]) >> ((v - 1) & 63)) & 1
        }
        config.append(
            AgentState(
                rank=int(S[idx, F_RANK]) or None,
                clock=int(S[idx, F_CLOCK]),
                mode=Mode(int(S[idx, F_MODE])),
                target=int(S[idx, F_TARGET]) or None,
                det=int(S[idx, F_DET]),
                reset=int(S[idx, F_RESET]),
                delay=int(S[idx, F_DELAY]),
                list=members,
                kid=int(S[idx, F_KID]) or None,
                susp=int(S[idx, F_SUSP]),
                index=int(S[idx, F_INDEX]),
                nonce=int(S[idx, F_NONCE]),
                cand=int(S[idx, F_CAND]),
                parity=int(S[idx, F_PARITY]),
                leader=int(S[idx, F_LEADER]),
                ltimer=int(S[idx, F_LTIMER]),
                ft_found=int(S[idx, F_FTF]),
            )
        )
    return config


def rng_array(rng: RngStream) -> np.ndarray:
    return np.array(rng.state(), dtype=np.uint64)


def rng_store(rng: RngStream, arr: np.ndarray) -> None:
    rng.set_state(arr)


def seeded_rng_array(seed: int) -> np.ndarray:
    return rng_array(RngStream(seed))


# ---------------------------------------------------------------------------
# PRNG (xoshiro256++, identical to core.RngStream)
# ---------------------------------------------------------------------------


@njit(cache=True, nogil=True)
def _next_u64(rs):
    s0, s1, s2, s3 = rs[0], rs[1], rs[2], rs[3]
    x = s0 + s3
    result = ((x << uint64(23)) | (x >> uint64(41))) + s0
    t = s1 << uint64(17)
    s2 ^= s0
    s3 ^= s1
    s1 ^= s2
    s0 ^= s3
    s2 ^= t
    s3 = (s3 << uint64(45)) | (s3 >> uint64(19))
    rs[0], rs[1], rs[2], rs[3] = s0, s1, s2, s3
    return result


@njit(cache=True, nogil=True)
def _seed_rs(rs, seed):
    x = uint64(seed)
    for k in range(4):
        x = x + uint64(0x9E3779B97F4A7C15)
        z = x
        z = (z ^ (z >> uint64(30))) * uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> uint64(27))) * uint64(0x94D049BB133111EB)
        rs[k] = z ^ (z >> uint64(31))
    if rs[0] == uint64(0) and rs[1] == uint64(0) and rs[2] == uint64(0) and rs[3] == uint64(0):
        rs[0] = uint64(1)


@njit(cache=True, nogil=True)
def _below(rs, k):
    return int64(_next_u64(rs) % uint64(k))


@njit(cache=True, nogil=True)
def _pair(rs, n):
    i = _below(rs, n)
    j = _below(rs, n - 1)
    if j >= i:
        j += 1
    return i, j


@njit(cache=True, nogil=True)
def _popcount(x):
    x = x - ((x >> uint64(1)) & uint64(0x5555555555555555))
    x = (x & uint64(0x3333333333333333)) + ((x >> uint64(2)) & uint64(0x3333333333333333))
    x = (x + (x >> uint64(4))) & uint64(0x0F0F0F0F0F0F0F0F)
    return int64((x * uint64(0x0101010101010101)) >> uint64(56))


# ---------------------------------------------------------------------------
# Detector list bitsets
# ---------------------------------------------------------------------------


@njit(cache=True, nogil=True)
def _list_has(L, a, v):
    idx = v - 1
    return (L[a, idx >> 6] >> uint64(idx & 63)) & uint64(1) != uint64(0)


@njit(cache=True, nogil=True)
def _list_has_safe(L, a, v, rho2):
    return v >= 1 and v <= rho2 and _list_has(L, a, v)


@njit(cache=True, nogil=True)
def _list_add(S, L, a, v):
    idx = v - 1
    w = idx >> 6
    bit = uint64(1) << uint64(idx & 63)
    if L[a, w] & bit == uint64(0):
        L[a, w] |= bit
        S[a, F_LSIZE] += 1


@njit(cache=True, nogil=True)
def _list_subset(L, a, b):
    for w in range(L.shape[1]):
        if L[a, w] & ~L[b, w] != uint64(0):
            return False
    return True


@njit(cache=True, nogil=True)
def _is_king(S, a, r):
    return r != 0 and S[a, F_RANK] == r


@njit(cache=True, nogil=True)
def _is_vassal(S, L, a, rho2):
    rk = S[a, F_RANK]
    return rk >= 1 and rk <= rho2 and _list_has(L, a, rk)


@njit(cache=True, nogil=True)
def _is_ronin(S, L, a, r, rho2):
    rk = S[a, F_RANK]
    return rk >= 1 and rk <= rho2 and rk != r and not _list_has(L, a, rk)


@njit(cache=True, nogil=True)
def _trust(S, L, a, b, r, rho, rho2):
    return (
        S[a, F_KID] == S[b, F_KID]
        and S[b, F_LSIZE] == rho
        and _list_subset(L, a, b)
        and (_is_king(S, b, r) or _is_vassal(S, L, b, rho2))
    )


# ---------------------------------------------------------------------------
# Sub-protocol steps
# ---------------------------------------------------------------------------


@njit(cache=True, nogil=True)
def _target_step(S, i, j):
    if S[i, F_RANK] != 0 and S[i, F_RANK] == S[j, F_RANK]:
        S[i, F_FTF] = 1
        S[j, F_FTF] = 1
        S[i, F_TARGET] = S[i, F_RANK]
        S[j, F_TARGET] = S[j, F_RANK]
    if S[i, F_FTF] > S[j, F_FTF] or (
        S[i, F_FTF] == S[j, F_FTF] and S[i, F_TARGET] > S[j, F_TARGET]
    ):
        S[j, F_FTF] = S[i, F_FTF]
        S[j, F_TARGET] = S[i, F_TARGET]


@njit(cache=True, nogil=True)
def _detect_step(S, L, i, j, P):
    r = S[j, F_TARGET]
    rho = P[P_RHO]
    rho2 = rho * rho
    if (
        _is_king(S, i, r)
        and S[i, F_LSIZE] < rho
        and not _list_has_safe(L, i, S[j, F_RANK], rho2)
        and _is_ronin(S, L, j, r, rho2)
    ):
        vr = S[j, F_RANK]
        _list_add(S, L, i, vr)
        for w in range(L.shape[1]):
            L[j, w] = L[i, w]
        S[j, F_LSIZE] = S[i, F_LSIZE]
        kid = vr if S[i, F_KID] == 0 else S[i, F_KID]
        S[i, F_KID] = kid
        S[j, F_KID] = kid
    elif _is_vassal(S, L, j, rho2) and _trust(S, L, j, i, r, rho, rho2):
        cnt = int64(0)
        for w in range(L.shape[1]):
            L[j, w] |= L[i, w]
            cnt += _popcount(L[j, w])
        S[j, F_LSIZE] = cnt
    elif _is_king(S, i, r) and _is_vassal(S, L, j, rho2) and S[i, F_KID] != S[j, F_KID]:
        S[j, F_SUSP] = 1
    elif _trust(S, L, i, j, r, rho, rho2) and _trust(S, L, j, i, r, rho, rho2):
        if S[i, F_SUSP] > S[j, F_SUSP]:
            S[j, F_SUSP] = S[i, F_SUSP]

    if (_is_king(S, j, r) and S[j, F_SUSP] == 1) or (
        S[i, F_RANK] != 0 and S[i, F_RANK] == S[j, F_RANK]
    ):
        S[j, F_DET] = 1
    elif S[i, F_DET] > S[j, F_DET]:
        S[j, F_DET] = S[i, F_DET]


@njit(cache=True, nogil=True)
def _rank_step(S, i, j, p1, p2, P, rs):
    t35 = P[P_T35]
    n = P[P_N]
    m = P[P_M]
    c_T = P[P_CT]
    lgn = P[P_LGN]
    if p2 < t35:
        if S[i, F_RANK] != 0 and S[i, F_INDEX] < lgn and S[j, F_RANK] == 0:
            S[i, F_INDEX] += 1
            r_new = S[i, F_RANK] + (int64(1) << (lgn - S[i, F_INDEX]))
            if r_new <= n - m:
                S[j, F_RANK] = r_new
                S[j, F_INDEX] = S[i, F_INDEX]
    if p2 >= t35 and (p2 & 1) == S[j, F_PARITY]:
        S[j, F_PARITY] = 1 - S[j, F_PARITY]
        h = p2 - t35
        if h % c_T == 0:
            if S[j, F_CAND] == 1:
                awarded = n - m + h // c_T
                if awarded <= n:
                    S[j, F_RANK] = awarded
            S[j, F_CAND] = 1 if S[j, F_RANK] == 0 else 0
        if S[j, F_CAND] == 1:
            S[j, F_NONCE] = 1 + _below(rs, P[P_NONCEMAX])
        else:
            S[j, F_NONCE] = 0
    if p1 == p2 and p2 >= t35 and S[j, F_NONCE] < S[i, F_NONCE]:
        S[j, F_CAND] = 0
        S[j, F_NONCE] = S[i, F_NONCE]


# ---------------------------------------------------------------------------
# The composed interaction
# ---------------------------------------------------------------------------


@njit(cache=True, nogil=True)
def eng_interact(S, L, i, j, P, rs):
    """One interaction; returns (rank_changed, det_raised, leader_delta)."""
    rank_i0 = S[i, F_RANK]
    rank_j0 = S[j, F_RANK]
    det_j0 = S[j, F_DET]
    lead_j0 = S[j, F_LEADER]
    mode_i0 = S[i, F_MODE]
    mode_j0 = S[j, F_MODE]

    ltmax = P[P_LTMAX]
    if S[i, F_LEADER] == 1 and S[j, F_LEADER] == 1:
        S[j, F_LEADER] = 0
    if S[i, F_LEADER] == 1:
        S[i, F_LTIMER] = ltmax
    if S[j, F_LEADER] == 1:
        S[j, F_LTIMER] = ltmax
    else:
        t = max(S[i, F_LTIMER], S[j, F_LTIMER]) - 1
        if t <= 0:
            S[j, F_LEADER] = 1
            S[j, F_LTIMER] = ltmax
        else:
            S[j, F_LTIMER] = t

    joint = max(S[i, F_RESET] - 1, S[j, F_RESET] - 1)
    if joint < 0:
        joint = 0
    S[i, F_RESET] = joint
    S[j, F_RESET] = joint

    if joint > 0:
        S[i, F_CLOCK] = 0
        S[j, F_CLOCK] = 0
        dmax = P[P_DELAYMAX]
        S[i, F_DELAY] = dmax
        S[j, F_DELAY] = dmax
        S[i, F_MODE] = MODE_BOT
        S[j, F_MODE] = MODE_BOT
        S[i, F_DET] = 0
        S[j, F_DET] = 0
    elif S[j, F_LEADER] == 1 and S[j, F_DELAY] > 0:
        S[j, F_DELAY] -= 1
    else:
        if S[j, F_LEADER] == 1 and S[i, F_CLOCK] == S[j, F_CLOCK]:
            c = S[j, F_CLOCK] + 1
            cap = P[P_CLOCKCAP]
            S[j, F_CLOCK] = c if c < cap else cap
        elif S[i, F_CLOCK] > S[j, F_CLOCK]:
            S[j, F_CLOCK] = S[i, F_CLOCK]

        c_M = P[P_CM]
        p1 = S[i, F_CLOCK] // c_M
        p2 = S[j, F_CLOCK] // c_M
        if p2 == P[P_T4]:
            S[j, F_RESET] = P[P_RESETMAX]

        mode_j = S[j, F_MODE]
        new_mode = mode_j
        if p2 == P[P_T1] - 1:
            new_mode = MODE_F
        elif p2 == P[P_T2] - 1:
            new_mode = MODE_D
        elif p2 == P[P_T3] - 1 and S[j, F_DET] == 1:
            new_mode = MODE_R
        if new_mode != mode_j:
            S[j, F_MODE] = new_mode
            if new_mode == MODE_F:
                S[j, F_TARGET] = 1
                S[j, F_FTF] = 0
            elif new_mode == MODE_D:
                S[j, F_DET] = 0
                S[j, F_KID] = 0
                S[j, F_SUSP] = 0
                S[j, F_LSIZE] = 0
                for w in range(L.shape[1]):
                    L[j, w] = uint64(0)
            else:
                S[j, F_INDEX] = 0
                S[j, F_RANK] = 1 if S[j, F_LEADER] == 1 else 0
                S[j, F_NONCE] = 0
                S[j, F_PARITY] = P[P_T35] & 1
                S[j, F_CAND] = 0

        if S[i, F_MODE] == S[j, F_MODE] and (
            S[j, F_MODE] != MODE_D or S[i, F_TARGET] == S[j, F_TARGET]
        ):
            md = S[j, F_MODE]
            if md == MODE_F and P[P_T1] <= p1 and p2 <= P[P_T2] - 2:
                _target_step(S, i, j)
            elif md == MODE_D and P[P_T2] <= p1 and p2 <= P[P_T3] - 2:
                _detect_step(S, L, i, j, P)
            elif md == MODE_R and P[P_T3] <= p1 and p2 <= P[P_T4] - 1:
                _rank_step(S, i, j, p1, p2, P, rs)

    if mode_i0 == MODE_R and S[i, F_MODE] != MODE_R and S[i, F_RANK] == 0:
        S[i, F_RANK] = 1
    if mode_j0 == MODE_R and S[j, F_MODE] != MODE_R and S[j, F_RANK] == 0:
        S[j, F_RANK] = 1

    rank_changed = int64(0)
    if S[i, F_RANK] != rank_i0 or S[j, F_RANK] != rank_j0:
        rank_changed = int64(1)
    det_raised = int64(0)
    if det_j0 == 0 and S[j, F_DET] == 1:
        det_raised = int64(1)
    leader_delta = S[j, F_LEADER] - lead_j0
    return rank_changed, det_raised, leader_delta


# ---------------------------------------------------------------------------
# Checkers
# ---------------------------------------------------------------------------


@njit(cache=True, nogil=True)
def eng_in_initialized(S, P):
    n = P[P_N]
    for a in range(n):
        if (
            S[a, F_CLOCK] != 0
            or S[a, F_RESET] != 0
            or S[a, F_DET] != 0
            or S[a, F_MODE] != MODE_BOT
        ):
            return False
        if S[a, F_LEADER] == 1 and S[a, F_DELAY] != 0:
            return False
    return True


@njit(cache=True, nogil=True)
def eng_in_safe(S, L, P, scratch):
    n = P[P_N]
    for v in range(n + 1):
        scratch[v] = 0
    for a in range(n):
        rk = S[a, F_RANK]
        if rk == 0 or scratch[rk] != 0:
            return False
        scratch[rk] = 1
        if S[a, F_MODE] == MODE_R or S[a, F_DET] != 0:
            return False

    rho = P[P_RHO]
    rho2 = rho * rho
    for a in range(n):
        if S[a, F_MODE] != MODE_D:
            continue
        r = S[a, F_TARGET]
        if (_is_king(S, a, r) or _is_ronin(S, L, a, r, rho2)) and S[a, F_SUSP] != 0:
            return False

    # rank -> agent map (ranks distinct here); scratch reused as map + 1
    for v in range(n + 1):
        scratch[v] = 0
    for a in range(n):
        scratch[S[a, F_RANK]] = a + 1
    for b in range(n):
        if S[b, F_MODE] != MODE_D or not _is_vassal(S, L, b, rho2):
            continue
        t = S[b, F_TARGET]
        if t < 1 or t > n or scratch[t] == 0:
            continue
        a = scratch[t] - 1
        if S[a, F_MODE] != MODE_D or S[a, F_TARGET] != t:
            continue
        if _list_subset(L, b, a):
            if S[b, F_SUSP] != 0 or S[a, F_KID] != S[b, F_KID]:
                return False
    return True


@njit(cache=True, nogil=True)
def eng_count_colliding(S, P, scratch):
    n = P[P_N]
    for v in range(n + 1):
        scratch[v] = 0
    for a in range(n):
        rk = S[a, F_RANK]
        if rk != 0:
            scratch[rk] += 1
    total = int64(0)
    for v in range(1, n + 1):
        c = scratch[v]
        total += c * (c - 1) // 2
    return total


@njit(cache=True, nogil=True)
def eng_in_domain(S, L, P):
    """Return the first agent violating its variable domain, or -1."""
    n = P[P_N]
    rho = P[P_RHO]
    rho2 = rho * rho
    for a in range(n):
        rk = S[a, F_RANK]
        md = S[a, F_MODE]
        if md < 0 or md > 3:
            return a
        if rk == 0:
            if md != MODE_R:
                return a
        elif rk < 1 or rk > n:
            return a
        if S[a, F_CLOCK] < 0 or S[a, F_CLOCK] > P[P_CLOCKCAP]:
            return a
        if S[a, F_TARGET] < 0 or S[a, F_TARGET] > n:
            return a
        if S[a, F_RESET] < 0 or S[a, F_RESET] > P[P_RESETMAX]:
            return a
        if S[a, F_DELAY] < 0 or S[a, F_DELAY] > P[P_DELAYMAX]:
            return a
        if S[a, F_INDEX] < 0 or S[a, F_INDEX] > P[P_LGN]:
            return a
        if S[a, F_NONCE] < 0 or S[a, F_NONCE] > P[P_NONCEMAX]:
            return a
        if S[a, F_LTIMER] < 0 or S[a, F_LTIMER] > P[P_LTMAX]:
            return a
        for f in (F_DET, F_SUSP, F_CAND, F_PARITY, F_LEADER, F_FTF):
            if S[a, f] != 0 and S[a, f] != 1:
                return a
        cnt = int64(0)
        for w in range(L.shape[1]):
            cnt += _popcount(L[a, w])
        if cnt != S[a, F_LSIZE] or cnt > rho:
            return a
        if rho2 < 64 * L.shape[1]:
            # no bits above rho^2
            top = L.shape[1] - 1
            hi = L[a, top] >> uint64(rho2 - 64 * top)
            if hi != uint64(0):
                return a
        tgt = S[a, F_TARGET]
        if tgt >= 1 and tgt <= rho2 and _list_has(L, a, tgt):
            return a
        kd = S[a, F_KID]
        if kd < 0 or kd > rho2 or (kd != 0 and kd == tgt):
            return a
    return -1


# ---------------------------------------------------------------------------
# Configuration generators
# ---------------------------------------------------------------------------


@njit(cache=True, nogil=True)
def gen_uniform(S, L, P, rs):
    n = P[P_N]
    rho = P[P_RHO]
    rho2 = rho * rho
    for a in range(n):
        md = _below(rs, 4)
        S[a, F_MODE] = md
        if md == MODE_R:
            S[a, F_RANK] = _below(rs, n + 1)
        else:
            S[a, F_RANK] = 1 + _below(rs, n)
        S[a, F_CLOCK] = _below(rs, P[P_CLOCKCAP] + 1)
        tgt = _below(rs, n + 1)
        S[a, F_TARGET] = tgt
        S[a, F_DET] = _below(rs, 2)
        S[a, F_RESET] = _below(rs, P[P_RESETMAX] + 1)
        S[a, F_DELAY] = _below(rs, P[P_DELAYMAX] + 1)
        S[a, F_SUSP] = _below(rs, 2)
        S[a, F_INDEX] = _below(rs, P[P_LGN] + 1)
        S[a, F_NONCE] = _below(rs, P[P_NONCEMAX] + 1)
        S[a, F_CAND] = _below(rs, 2)
        S[a, F_PARITY] = _below(rs, 2)
        S[a, F_LEADER] = _below(rs, 2)
        S[a, F_LTIMER] = _below(rs, P[P_LTMAX] + 1)
        S[a, F_FTF] = _below(rs, 2)
        for w in range(L.shape[1]):
            L[a, w] = uint64(0)
        S[a, F_LSIZE] = 0
        in_pool = 1 if (tgt >= 1 and tgt <= rho2) else 0
        pool = rho2 - in_pool
        smax = rho if rho < pool else pool
        want = _below(rs, smax + 1) if smax > 0 else 0
        added = 0
        while added < want:
            v = 1 + _below(rs, rho2)
            if v == tgt or _list_has(L, a, v):
                continue
            _list_add(S, L, a, v)
            added += 1
        if pool == 0:
            S[a, F_KID] = 0
        else:
            while True:
                c = _below(rs, rho2 + 1)
                if c != 0 and c == tgt:
                    continue
                S[a, F_KID] = c
                break


@njit(cache=True, nogil=True)
def _permute_ranks(S, P, rs):
    n = P[P_N]
    for a in range(n):
        S[a, F_RANK] = a + 1
    for a in range(n - 1, 0, -1):
        b = _below(rs, a + 1)
        tmp = S[a, F_RANK]
        S[a, F_RANK] = S[b, F_RANK]
        S[b, F_RANK] = tmp


@njit(cache=True, nogil=True)
def gen_initialized(S, L, P, rs, distinct):
    n = P[P_N]
    for a in range(n):
        for f in range(NF):
            S[a, f] = 0
        for w in range(L.shape[1]):
            L[a, w] = uint64(0)
        S[a, F_TARGET] = 1
    _permute_ranks(S, P, rs)
    if distinct == 0:
        S[1, F_RANK] = S[0, F_RANK]
    S[0, F_LEADER] = 1
    S[0, F_LTIMER] = P[P_LTMAX]


@njit(cache=True, nogil=True)
def gen_named(S, L, P, rs, kind):
    """kind: 0 uniform, 1 all_same_rank, 2 clocks_near_t4, 3 det_all_one,
    4 mode_R_all_null."""
    gen_uniform(S, L, P, rs)
    n = P[P_N]
    if kind == 1:
        for a in range(n):
            S[a, F_RANK] = 1
    elif kind == 2:
        lo = P[P_CM] * (P[P_T4] - 1)
        span = P[P_CLOCKCAP] - lo + 1
        for a in range(n):
            S[a, F_CLOCK] = lo + _below(rs, span)
    elif kind == 3:
        for a in range(n):
            S[a, F_DET] = 1
    elif kind == 4:
        for a in range(n):
            S[a, F_MODE] = MODE_R
            S[a, F_RANK] = 0


@njit(cache=True, nogil=True)
def gen_safe_fuzz(S, L, P, rs, scratch):
    """Random safe-set member: aggressive everywhere the safe set allows."""
    gen_uniform(S, L, P, rs)
    n = P[P_N]
    rho = P[P_RHO]
    rho2 = rho * rho
    _permute_ranks(S, P, rs)
    for a in range(n):
        S[a, F_MODE] = _below(rs, 3)  # bot, F, or D; never R
        S[a, F_DET] = 0
    for a in range(n):
        if S[a, F_MODE] != MODE_D:
            continue
        r = S[a, F_TARGET]
        if _is_king(S, a, r) or _is_ronin(S, L, a, r, rho2):
            S[a, F_SUSP] = 0
    for v in range(n + 1):
        scratch[v] = 0
    for a in range(n):
        scratch[S[a, F_RANK]] = a + 1
    for b in range(n):
        if S[b, F_MODE] != MODE_D or not _is_vassal(S, L, b, rho2):
            continue
        t = S[b, F_TARGET]
        if t < 1 or t > n or scratch[t] == 0:
            continue
        a = scratch[t] - 1
        if S[a, F_MODE] != MODE_D or S[a, F_TARGET] != t:
            continue
        if _list_subset(L, b, a):
            S[b, F_SUSP] = 0
            S[b, F_KID] = S[a, F_KID]
    return eng_in_safe(S, L, P, scratch)


# ---------------------------------------------------------------------------
# Run loops
# ---------------------------------------------------------------------------


@njit(cache=True, nogil=True)
def run_main(S, L, P, rs, budget, stride, tail):
    """Main run: interact until the safe set is entered (stride-granular
    detection), then confirm rank immutability over the tail.

    Returns (first_safe_entry, executed, last_rank_change, det_events,
    leader_changes, tail_rank_changes); first_safe_entry is -1 on budget
    exhaustion.
    """
    n = P[P_N]
    scratch = np.empty(n + 1, np.int64)
    first_safe = int64(-1)
    last_rank_change = int64(-1)
    det_events = int64(0)
    leader_changes = int64(0)
    k = int64(0)
    if eng_in_safe(S, L, P, scratch):
        first_safe = 0
    while first_safe < 0 and k < budget:
        lim = k + stride
        if lim > budget:
            lim = budget
        while k < lim:
            i, j = _pair(rs, n)
            rc, dr, ld = eng_interact(S, L, i, j, P, rs)
            k += 1
            if rc != 0:
                last_rank_change = k
            det_events += dr
            if ld != 0:
                leader_changes += 1
        if eng_in_safe(S, L, P, scratch):
            first_safe = k
    tail_viol = int64(0)
    if first_safe >= 0:
        for _ in range(tail):
            i, j = _pair(rs, n)
            rc, dr, ld = eng_interact(S, L, i, j, P, rs)
            k += 1
            if rc != 0:
                last_rank_change = k
                tail_viol += 1
            det_events += dr
            if ld != 0:
                leader_changes += 1
    return first_safe, k, last_rank_change, det_events, leader_changes, tail_viol


@njit(cache=True, nogil=True)
def _init_clean(S, a):
    if (
        S[a, F_CLOCK] != 0
        or S[a, F_RESET] != 0
        or S[a, F_DET] != 0
        or S[a, F_MODE] != MODE_BOT
    ):
        return False
    return S[a, F_LEADER] != 1 or S[a, F_DELAY] == 0


@njit(cache=True, nogil=True)
def run_until_init(S, L, P, rs, budget):
    """Interact until the initialized set is reached; exact entry point.

    A cached not-yet-initialized agent makes the per-interaction membership
    test O(1) until that agent settles."""
    n = P[P_N]
    if eng_in_initialized(S, P):
        return int64(0), int64(0)
    hint = int64(-1)
    k = int64(0)
    while k < budget:
        i, j = _pair(rs, n)
        eng_interact(S, L, i, j, P, rs)
        k += 1
        if hint >= 0 and not _init_clean(S, hint):
            continue
        hint = -1
        done = True
        for a in range(n):
            if not _init_clean(S, a):
                hint = a
                done = False
                break
        if done:
            return k, k
    return int64(-1), k


@njit(cache=True, nogil=True)
def run_detect_window(S, L, P, rs, budget):
    """Run from a detect-window start until every agent leaves the window.

    Returns (all_det_reached_in_window, det_events, executed)."""
    n = P[P_N]
    c_M = P[P_CM]
    hi = P[P_T3] - 2
    det_events = int64(0)
    success = int64(0)
    k = int64(0)
    while k < budget:
        for _ in range(n):
            i, j = _pair(rs, n)
            rc, dr, ld = eng_interact(S, L, i, j, P, rs)
            k += 1
            det_events += dr
        all_det = True
        for a in range(n):
            if S[a, F_DET] == 0:
                all_det = False
                break
        if all_det:
            success = 1
            break
        minp = S[0, F_CLOCK] // c_M
        for a in range(1, n):
            p = S[a, F_CLOCK] // c_M
            if p < minp:
                minp = p
        if minp > hi:
            break
    return success, det_events, k


@njit(cache=True, nogil=True)
def run_rank_window(S, L, P, rs, budget):
    """Run from a rank-window start until the cycle-end reset fires.

    Returns (ranks_complete, alignment_ok, executed)."""
    n = P[P_N]
    c_M = P[P_CM]
    t35 = P[P_T35]
    lgn = P[P_LGN]
    align_ok = int64(1)
    k = int64(0)
    while k < budget:
        for _ in range(n):
            i, j = _pair(rs, n)
            eng_interact(S, L, i, j, P, rs)
            k += 1
        for a in range(n):
            if S[a, F_MODE] == MODE_R and S[a, F_RANK] != 0:
                if S[a, F_CLOCK] // c_M < t35:
                    span = int64(1) << (lgn - S[a, F_INDEX])
                    if (S[a, F_RANK] - 1) % span != 0:
                        align_ok = 0
        stop = False
        for a in range(n):
            if S[a, F_RESET] > 0:
                stop = True
                break
        if stop:
            break
    scratch = np.zeros(n + 1, np.int64)
    for a in range(n):
        rk = S[a, F_RANK]
        if rk >= 1 and rk <= n:
            scratch[rk] += 1
    ranks_ok = int64(1)
    for v in range(1, n + 1):
        if scratch[v] != 1:
            ranks_ok = 0
            break
    return ranks_ok, align_ok, k


@njit(cache=True, nogil=True)
def run_find_window(S, L, P, rs, budget, r):
    """Run from a find-window start until every agent leaves the window.

    Returns (all_targets_equal_r, executed)."""
    n = P[P_N]
    c_M = P[P_CM]
    hi = P[P_T2] - 2
    k = int64(0)
    while k < budget:
        for _ in range(n):
            i, j = _pair(rs, n)
            eng_interact(S, L, i, j, P, rs)
            k += 1
        minp = S[0, F_CLOCK] // c_M
        for a in range(1, n):
            p = S[a, F_CLOCK] // c_M
            if p < minp:
                minp = p
        if minp > hi:
            break
    ok = int64(1)
    for a in range(n):
        if S[a, F_TARGET] != r:
            ok = 0
            break
    return ok, k


@njit(cache=True, nogil=True)
def run_lsle_hold(S, L, P, rs, need, budget):
    """Longest stretch with one stable unique leader; early exit at need.

    Returns (reached, longest_hold, executed)."""
    n = P[P_N]
    cnt = int64(0)
    for a in range(n):
        cnt += S[a, F_LEADER]
    start = int64(0)
    max_hold = int64(0)
    k = int64(0)
    while k < budget:
        i, j = _pair(rs, n)
        rc, dr, ld = eng_interact(S, L, i, j, P, rs)
        k += 1
        if ld != 0:
            if cnt == 1:
                hold = k - start
                if hold > max_hold:
                    max_hold = hold
            cnt += ld
            if cnt == 1:
                start = k
        elif cnt == 1 and k - start >= need:
            return int64(1), k - start, k
    if cnt == 1:
        hold = k - start
        if hold > max_hold:
            max_hold = hold
    return (int64(1) if max_hold >= need else int64(0)), max_hold, k


@njit(cache=True, nogil=True)
def run_epidemic(n, seed, budget):
    """One-way epidemic from a single maximal agent; interactions to cover."""
    rs = np.empty(4, np.uint64)
    _seed_rs(rs, seed)
    v = np.zeros(n, np.int64)
    v[0] = 1
    cnt = int64(1)
    k = int64(0)
    while k < budget:
        i, j = _pair(rs, n)
        k += 1
        if v[i] > v[j]:
            v[j] = v[i]
            cnt += 1
            if cnt == n:
                return k
    return int64(-1)


@njit(cache=True, nogil=True)
def run_phase_clock(n, c_M, t4, max_phase, seed, budget):
    """Standalone phase clock with a fixed unique leader (agent 0).

    Returns, for each phase i in [0, max_phase], the longest interaction
    window during which every agent sat in phase i."""
    rs = np.empty(4, np.uint64)
    _seed_rs(rs, seed)
    clock = np.zeros(n, np.int64)
    cap = c_M * t4
    cnt = np.zeros(t4 + 1, np.int64)
    cnt[0] = n
    best = np.zeros(max_phase + 1, np.int64)
    full_phase = int64(0)
    full_start = int64(0)
    remaining = int64(n)  # agents in phases <= max_phase
    k = int64(0)
    while remaining > 0 and k < budget:
        i, j = _pair(rs, n)
        k += 1
        old = clock[j]
        if j == 0 and clock[i] == old:
            new = old + 1
            if new > cap:
                new = cap
        elif clock[i] > old:
            new = clock[i]
        else:
            continue
        if new == old:
            continue
        clock[j] = new
        po = old // c_M
        pn = new // c_M
        if pn != po:
            cnt[po] -= 1
            cnt[pn] += 1
            if po == full_phase:
                if po <= max_phase:
                    length = k - full_start
                    if length > best[po]:
                        best[po] = length
                full_phase = -1
            if cnt[pn] == n:
                full_phase = pn
                full_start = k
            if po <= max_phase and pn > max_phase:
                remaining -= 1
    return best


@njit(cache=True, nogil=True)
def closure_fuzz(P, n_configs, seed0):
    """Exhaustive one-step closure over fuzzed safe configurations.

    Returns (-1, -1, -1) if clean, (-2, c, 0) if generation failed, or the
    violating (config_index, initiator, responder)."""
    n = P[P_N]
    w = P[P_W]
    S = np.empty((n, NF), np.int64)
    L = np.empty((n, w), np.uint64)
    S2 = np.empty((n, NF), np.int64)
    L2 = np.empty((n, w), np.uint64)
    scratch = np.empty(n + 1, np.int64)
    rs = np.empty(4, np.uint64)
    rs2 = np.empty(4, np.uint64)
    for c in range(n_configs):
        _seed_rs(rs, seed0 + c)
        ok = False
        for _ in range(100):
            if gen_safe_fuzz(S, L, P, rs, scratch):
                ok = True
                break
        if not ok:
            return int64(-2), int64(c), int64(0)
        for i in range(n):
            for j in range(n):
                if i == j:
                    continue
                for a in range(n):
                    for f in range(NF):
                        S2[a, f] = S[a, f]
                    for ww in range(w):
                        L2[a, ww] = L[a, ww]
                for ww in range(4):
                    rs2[ww] = rs[ww]
                eng_interact(S2, L2, i, j, P, rs2)
                if not eng_in_safe(S2, L2, P, scratch):
                    return int64(c), int64(i), int64(j)
    return int64(-1), int64(-1), int64(-1)


@njit(cache=True, nogil=True)
def bench_loop(S, L, P, rs, iters):
    """Raw interaction loop without any probing; for throughput measurement."""
    n = P[P_N]
    acc = int64(0)
    for _ in range(iters):
        i, j = _pair(rs, n)
        rc, dr, ld = eng_interact(S, L, i, j, P, rs)
        acc += rc + dr
    return acc


@njit(cache=True, nogil=True)
def totality_fuzz(P, n_configs, seed0, steps):
    """Uniform-random configurations driven a few steps; checks that every
    field stays inside its domain. Returns the first bad config or -1."""
    n = P[P_N]
    w = P[P_W]
    S = np.empty((n, NF), np.int64)
    L = np.empty((n, w), np.uint64)
    rs = np.empty(4, np.uint64)
    for c in range(n_configs):
        _seed_rs(rs, seed0 + c)
        gen_uniform(S, L, P, rs)
        if eng_in_domain(S, L, P) >= 0:
            return int64(c)
        for _ in range(steps):
            i, j = _pair(rs, n)
            eng_interact(S, L, i, j, P, rs)
        if eng_in_domain(S, L, P) >= 0:
            return int64(c)
    return int64(-1)
