import math

import pytest
from hypothesis import given, settings, strategies as st

from ssrk.core import (
    AgentState,
    Mode,
    ParameterError,
    RngStream,
    ceil_log2,
    ceil_sqrt,
    config_from_json,
    config_to_json,
    domain_sizes,
    initialized_agent,
    list_domain_bits,
    list_domain_size,
    new_params,
    phase,
    sample_ordered_pair,
    state_space_bits,
    validate_agent,
)


class TestNewParams:
    def test_worked_example(self):
        p = new_params(16, 2, c_T=2, c_M=4)
        assert (p.t1, p.t2, p.t3, p.t4) == (2, 10, 14, 30)
        assert p.t3_5 == 19
        assert p.m == 4

    def test_rho_one_window_is_nondegenerate(self):
        # lg(1) = 0 would empty the detect window; the clamp keeps it at
        # ceil(n / lg n) phase blocks so detection can actually run.
        p = new_params(16, 1, c_T=2)
        assert p.t3 - p.t2 == 2 * math.ceil(16 / 4)
        assert p.t3 - 2 >= p.t2  # non-empty dispatch window [t2, t3-2]

    def test_rho_above_sqrt_rejected(self):
        with pytest.raises(ParameterError, match=r"ceil\(sqrt\(n\)\) = 4"):
            new_params(16, 5)

    def test_small_n_rejected(self):
        for n in (0, 1, 2, 3):
            with pytest.raises(ParameterError):
                new_params(n, 1)

    def test_c_t_lower_bound(self):
        with pytest.raises(ParameterError, match="c_T"):
            new_params(16, 2, c_T=1)

    def test_unknown_constant_rejected(self):
        with pytest.raises(ParameterError, match="unknown"):
            new_params(16, 2, c_Q=3)

    def test_boundary_ordering_and_gap(self):
        for n in (4, 5, 8, 16, 100, 256, 1000, 1024):
            for rho in {1, 2, ceil_sqrt(n)}:
                p = new_params(n, rho)
                assert p.t1 < p.t2 < p.t3 < p.t3_5 < p.t4
                assert p.t4 - p.t3 == 2 * p.c_T * p.m
                assert p.t2 - p.t1 == p.c_T * p.m
                assert p.t3_5 == p.t4 - 1 - p.c_T * (p.m + 1)

    @given(st.integers(4, 2048), st.data())
    @settings(max_examples=60, deadline=None)
    def test_ordering_property(self, n, data):
        rho = data.draw(st.integers(1, ceil_sqrt(n)))
        p = new_params(n, rho)
        assert p.t1 < p.t2 < p.t3 < p.t3_5 < p.t4
        assert p.m == ceil_sqrt(n)
        assert p.lgn == ceil_log2(n)

    def test_find_window_multiplier_scales_only_t2_gap(self):
        base = new_params(64, 2)
        wide = new_params(64, 2, find_window_multiplier=4)
        assert wide.t2 - wide.t1 == 4 * (base.t2 - base.t1)
        assert wide.t3 - wide.t2 == base.t3 - base.t2
        assert wide.t4 - wide.t3 == base.t4 - base.t3

    def test_detect_window_multiplier_scales_only_t3_gap(self):
        base = new_params(256, 16)
        wide = new_params(256, 16, detect_window_multiplier=4)
        assert wide.t3 - wide.t2 == 4 * (base.t3 - base.t2)
        assert wide.t2 == base.t2
        assert wide.t4 - wide.t3 == base.t4 - base.t3


class TestPhase:
    def test_zero_clock(self):
        p = new_params(16, 2, c_M=4)
        assert phase(AgentState(rank=1, clock=0), p) == 0

    def test_integer_division(self):
        p = new_params(16, 2, c_M=4)
        assert phase(AgentState(rank=1, clock=9), p) == 2

    def test_cap_value(self):
        p = new_params(16, 2, c_M=4)
        assert phase(AgentState(rank=1, clock=p.clock_cap), p) == p.t4

    @given(st.integers(0, 10_000), st.integers(0, 10_000))
    @settings(max_examples=50, deadline=None)
    def test_monotone_in_clock(self, c1, c2):
        p = new_params(16, 2)
        lo, hi = sorted((min(c1, p.clock_cap), min(c2, p.clock_cap)))
        assert phase(AgentState(rank=1, clock=lo), p) <= phase(
            AgentState(rank=1, clock=hi), p
        )


class TestRng:
    def test_determinism(self):
        a = RngStream(12345)
        b = RngStream(12345)
        assert [a.next_u64() for _ in range(100)] == [b.next_u64() for _ in range(100)]

    def test_distinct_seeds_diverge(self):
        a = RngStream(1)
        b = RngStream(2)
        assert [a.next_u64() for _ in range(4)] != [b.next_u64() for _ in range(4)]

    def test_pair_never_equal(self):
        rng = RngStream(7)
        for _ in range(5000):
            i, j = sample_ordered_pair(rng, 5)
            assert i != j
            assert 0 <= i < 5 and 0 <= j < 5

    def test_pair_two_agents(self):
        rng = RngStream(3)
        seen = {sample_ordered_pair(rng, 2) for _ in range(200)}
        assert seen == {(0, 1), (1, 0)}

    def test_pair_sequence_determinism(self):
        a = RngStream(99)
        b = RngStream(99)
        sa = [sample_ordered_pair(a, 6) for _ in range(1000)]
        sb = [sample_ordered_pair(b, 6) for _ in range(1000)]
        assert sa == sb

    def test_pair_frequencies_n4(self):
        rng = RngStream(2024)
        counts = {}
        draws = 1_000_000
        for _ in range(draws):
            ij = sample_ordered_pair(rng, 4)
            counts[ij] = counts.get(ij, 0) + 1
        assert len(counts) == 12
        for c in counts.values():
            assert abs(c / draws - 1 / 12) < 0.005

    @pytest.mark.parametrize("n", [4, 8])
    def test_pair_chi_square(self, n):
        from scipy.stats import chisquare

        rng = RngStream(555 + n)
        pairs = n * (n - 1)
        counts = [0] * pairs
        draws = 1_000_000
        for _ in range(draws):
            i, j = sample_ordered_pair(rng, n)
            counts[i * (n - 1) + (j if j < i else j - 1)] += 1
        assert chisquare(counts).pvalue > 0.001


class TestStateSpaceBits:
    def test_list_domain_rho2(self):
        assert list_domain_size(2) == 7  # C(3,0)+C(3,1)+C(3,2)
        assert abs(list_domain_bits(2) - math.log2(7)) < 1e-12

    def test_list_domain_rho1_degenerate(self):
        assert list_domain_size(1) == 1
        assert list_domain_bits(1) == 0.0

    def test_list_domain_rho32_bound(self):
        exact = sum(math.comb(1023, i) for i in range(33))
        assert list_domain_size(32) == exact
        assert list_domain_bits(32) <= 2 * 32 * math.log2(32)

    def test_total_is_sum_of_domain_logs(self):
        p = new_params(64, 4)
        sizes = domain_sizes(p)
        expected = 0.0
        for size in sizes.values():
            expected += math.log2(size)
        assert abs(state_space_bits(p) - expected) < 1e-9

    def test_constant_factor_bound(self):
        # non-list domains stay within K * lg n with K <= 20 at n >= 8
        for n in (8, 16, 64, 256, 1024):
            for rho in (1, 2, ceil_sqrt(n)):
                p = new_params(n, rho)
                non_list = state_space_bits(p) - list_domain_bits(rho)
                assert non_list <= 20 * p.lgn, (n, rho, non_list / p.lgn)


class TestSerialization:
    def test_round_trip(self):
        p = new_params(16, 2)
        config = [initialized_agent(r + 1, leader=1 if r == 0 else 0, params=p) for r in range(16)]
        config[3].mode = Mode.D
        config[3].list = {2, 3}
        config[3].target = 9
        config[3].kid = 2
        config[5].mode = Mode.R
        config[5].rank = None
        text = config_to_json(config)
        back = config_from_json(text, p)
        assert back == config
        assert '"rank": null' in text

    def test_unknown_field_rejected(self):
        import json as _json
        from ssrk.core import ConfigurationError, agent_to_dict

        d = agent_to_dict(AgentState(rank=1))
        d["bogus"] = 1
        with pytest.raises(ConfigurationError, match="bogus"):
            config_from_json(_json.dumps([d]))

    def test_validate_rejects_null_rank_outside_r(self):
        p = new_params(16, 2)
        a = AgentState(rank=None, mode=Mode.F)
        with pytest.raises(ValueError, match="null"):
            validate_agent(a, p)
