import math

from ssrk import engine as eng
from ssrk.blocks import epidemic_step, lsle_step, phase_clock_step
from ssrk.core import AgentState, RngStream, new_params, phase, sample_ordered_pair


def agent(**kw):
    kw.setdefault("rank", 1)
    return AgentState(**kw)


class TestEpidemicStep:
    def test_max_rule(self):
        assert epidemic_step(5, 3) == 5

    def test_equal_values(self):
        assert epidemic_step(3, 3) == 3

    def test_population_max_invariant(self):
        rng = RngStream(11)
        values = [rng.below(100) for _ in range(20)]
        top = max(values)
        for _ in range(2000):
            i, j = sample_ordered_pair(rng, 20)
            old = values[j]
            values[j] = epidemic_step(values[i], values[j])
            assert values[j] >= old
            assert max(values) == top

    def test_monte_carlo_completion_bound(self):
        # module-scale check; the full n=1024, 100-run version is acceptance 6
        n = 256
        bound = int(4 * n * math.log(n))
        done = sum(1 for seed in range(30) if eng.run_epidemic(n, seed, bound) > 0)
        assert done >= 29


class TestPhaseClockStep:
    def setup_method(self):
        self.p = new_params(16, 2, c_M=4)

    def test_leader_tick(self):
        ini = agent(clock=7)
        res = agent(clock=7, leader=1)
        phase_clock_step(ini, res, self.p)
        assert res.clock == 8
        assert ini.clock == 7

    def test_non_leader_catch_up(self):
        ini = agent(clock=9)
        res = agent(clock=4)
        phase_clock_step(ini, res, self.p)
        assert res.clock == 9

    def test_cap_clamp(self):
        cap = self.p.clock_cap
        ini = agent(clock=cap)
        res = agent(clock=cap, leader=1)
        phase_clock_step(ini, res, self.p)
        assert res.clock == cap

    def test_responder_non_decreasing_and_phase_order(self):
        rng = RngStream(5)
        for _ in range(4000):
            ini = agent(clock=rng.below(self.p.clock_cap + 1), leader=rng.below(2))
            res = agent(clock=rng.below(self.p.clock_cap + 1), leader=rng.below(2))
            before = res.clock
            phase_clock_step(ini, res, self.p)
            assert res.clock >= before
            assert phase(ini, self.p) <= phase(res, self.p)


class TestLsleStep:
    def setup_method(self):
        self.p = new_params(16, 2)
        self.cap = self.p.lsle_timer_max

    def test_two_leaders_demote_responder(self):
        ini = agent(leader=1, ltimer=3)
        res = agent(leader=1, ltimer=5)
        lsle_step(ini, res, self.p)
        assert ini.leader == 1
        assert res.leader == 0
        assert ini.ltimer == self.cap

    def test_countdown_promotion(self):
        ini = agent(leader=0, ltimer=0)
        res = agent(leader=0, ltimer=1)
        lsle_step(ini, res, self.p)
        assert res.leader == 1
        assert res.ltimer == self.cap

    def test_leader_refreshes_own_timer(self):
        ini = agent(leader=0, ltimer=9)
        res = agent(leader=1, ltimer=2)
        lsle_step(ini, res, self.p)
        assert res.ltimer == self.cap

    def test_non_leader_takes_max_minus_one(self):
        ini = agent(leader=0, ltimer=9)
        res = agent(leader=0, ltimer=4)
        lsle_step(ini, res, self.p)
        assert res.ltimer == 8
        assert ini.ltimer == 9

    def test_leader_emergence_from_zero_leaders(self):
        # countdown forces rule-(d) promotion; empirically this needs a small
        # multiple of lsle_timer_max * n interactions from all-max timers
        from ssrk.harness import generate_config

        p = new_params(64, 2)
        bound = 4 * p.lsle_timer_max * p.n
        for seed in range(15):
            rng = RngStream(seed)
            config = generate_config("uniform_random", p, rng)
            for a in config:
                a.leader = 0
            S, L = eng.config_to_arrays(config, p)
            P = eng.params_vector(p)
            rs = eng.seeded_rng_array(seed)
            emerged = False
            for k in range(bound):
                i, j = eng._pair(rs, p.n)
                _, _, ld = eng.eng_interact(S, L, i, j, P, rs)
                if ld > 0:
                    emerged = True
                    break
            assert emerged, f"no leader within {bound} interactions (seed {seed})"

    def test_single_leader_stable_without_timeouts(self):
        rng = RngStream(8)
        p = self.p
        config = [agent(leader=1 if k == 0 else 0, ltimer=p.lsle_timer_max) for k in range(16)]
        for _ in range(20000):
            i, j = sample_ordered_pair(rng, 16)
            lsle_step(config[i], config[j], p)
            assert sum(a.leader for a in config) == 1

    def test_holding_time_proxy(self):
        # unique leader persists for >= 10 * n * t4 * c_M interactions from
        # adversarial starts (100 runs spread over the five generators)
        from ssrk.harness import ADVERSARIAL_GENERATORS, generate_config, run_lsle_hold

        p = new_params(256, 16)
        need = 10 * p.n * p.t4 * p.c_M
        ok = 0
        total = 0
        for gen in ADVERSARIAL_GENERATORS:
            for trial in range(20):
                seed = 1000 + 37 * trial + hash(gen) % 97
                rng = RngStream(seed)
                config = generate_config(gen, p, rng)
                reached, hold, _ = run_lsle_hold(config, p, seed, need, 3 * need)
                ok += reached
                total += 1
        assert ok >= 95, f"{ok}/{total} runs held a unique leader long enough"
