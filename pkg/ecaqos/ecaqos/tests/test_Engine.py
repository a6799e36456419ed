import sys
import warnings
import numpy as np
import pytest
from numpy import testing

from ecaqos.Mac import AC, AcParams, Eca
from ecaqos.Channel import ACCESS_MODE, SLOT_KIND, DeliveryVerdict
from ecaqos.Station import PROTOCOL
from ecaqos.Traffic import TRAFFIC_PROFILE
from ecaqos.Scenario import Scenario
from ecaqos.Engine import (SimClock, SlotOutcome, World, classify_slot, advance_slot, skip_idle,
                           run_simulation, stream, RNG_PURPOSE)
from ecaqos.Metrics import summarize, emit_results


def scenario(n=2, protocol=PROTOCOL.ECA_QOS_FS, duration=0.5, **kw) -> Scenario:
    mix = (protocol,) if isinstance(protocol, str) else tuple(protocol)
    return Scenario(n_stations=n, mix=mix, duration=duration, replications=2, seed=2024, **kw)


##########################################################################################
class TestClassify:

    def test_empty(self):
        out = classify_slot([])
        assert out.kind == SLOT_KIND.EMPTY and out.winner is None and not out.busy

    def test_success(self):
        out = classify_slot([(1, AC.VO)])
        assert out.kind == SLOT_KIND.SUCCESS and out.winner == (1, AC.VO) and not out.failed

    def test_collision(self):
        out = classify_slot([(1, AC.VO), (2, AC.VI)])
        assert out.kind == SLOT_KIND.COLLISION
        assert out.participants == frozenset({(1, AC.VO), (2, AC.VI)})
        assert out.winner is None and out.failed

    def test_channel_error(self):
        out = classify_slot([(1, AC.BE)], DeliveryVerdict([False]))
        assert out.kind == SLOT_KIND.SUCCESS and out.errored and out.failed
        assert out.delivered == 0

    def test_one_ac_per_station(self):
        with pytest.raises(AssertionError):
            classify_slot([(1, AC.VO), (1, AC.BE)])


class TestClock:

    def test_advance(self):
        c = SimClock()
        c.advance(9)
        c.advance(90, 10)
        assert c.now == 99 and c.slot_index == 11


class TestStreams:

    def test_independent(self):
        a = stream(1, 0, 0, AC.VO, RNG_PURPOSE.BACKOFF).integers(0, 2**32, 5)
        b = stream(1, 0, 0, AC.VO, RNG_PURPOSE.TRAFFIC).integers(0, 2**32, 5)
        c = stream(1, 1, 0, AC.VO, RNG_PURPOSE.BACKOFF).integers(0, 2**32, 5)
        d = stream(1, 0, 0, AC.VO, RNG_PURPOSE.BACKOFF).integers(0, 2**32, 5)
        assert not np.array_equal(a, b) and not np.array_equal(a, c)
        testing.assert_array_equal(a, d)


class TestSlots:

    def world(self, n=2):
        w = World(scenario(n=n, acs=(AC.BE,)), 0)
        for st in w.stations:
            st.acs[0].aifs_left = 0
        return w

    def test_empty_slot(self):
        w = self.world()
        a, b = (st.acs[0] for st in w.stations)
        a.backoff, b.backoff = 5, 7
        out = advance_slot(w)
        assert out.kind == SLOT_KIND.EMPTY and out.duration == 9
        assert (a.backoff, b.backoff) == (4, 6)
        assert w.clock.now == 9 and w.result.census[SLOT_KIND.EMPTY] == 1

    def test_single_attempt(self):
        w = self.world()
        a, b = (st.acs[0] for st in w.stations)
        a.backoff, b.backoff = 0, 7
        out = advance_slot(w)
        assert out.kind == SLOT_KIND.SUCCESS and out.winner == (0, AC.BE)
        assert b.backoff == 6
        assert a.deterministic and a.backoff == 15
        stats = w.result.stats[(0, AC.BE)]
        assert stats.attempts == 1 and stats.successes == 1 and stats.delivered_bytes == 1470
        assert stats.delay_sum == out.duration

    def test_collision(self):
        w = self.world()
        a, b = (st.acs[0] for st in w.stations)
        a.backoff, b.backoff = 0, 0
        out = advance_slot(w)
        assert out.kind == SLOT_KIND.COLLISION
        assert out.participants == frozenset({(0, AC.BE), (1, AC.BE)})
        assert a.stage == 1 and b.stage == 1
        assert w.result.last_collision_time == w.clock.now == out.duration
        assert len(a.queue) == 1000

    def test_skip_idle(self):
        w = self.world()
        a, b = (st.acs[0] for st in w.stations)
        a.backoff, b.backoff = 10, 12
        assert skip_idle(w) == 10
        assert a.ready and b.backoff == 2
        assert w.clock.now == 90 and w.result.census[SLOT_KIND.EMPTY] == 10
        assert skip_idle(w) == 0

    def test_virtual_collision_counted(self):
        w = World(scenario(n=1, protocol=PROTOCOL.EDCA, acs=(AC.VO, AC.BE)), 0)
        vo, be = w.stations[0].acs
        vo.backoff = be.backoff = 0
        vo.aifs_left = be.aifs_left = 0
        out = advance_slot(w)
        assert out.kind == SLOT_KIND.SUCCESS and out.winner == (0, AC.VO)
        assert w.result.stats[(0, AC.BE)].virtual_collisions == 1
        assert w.result.stats[(0, AC.BE)].attempts == 0
        assert be.retries == 1


class TestRunSimulation:

    def test_deterministic(self):
        s = scenario(n=3, duration=0.3)
        assert run_simulation(s, 0) == run_simulation(s, 0)
        assert not run_simulation(s, 0) == run_simulation(s, 1)

    def test_replication_bounds(self):
        with pytest.raises(ValueError):
            run_simulation(scenario(), 2)

    def test_single_contender(self):
        for protocol in (PROTOCOL.EDCA, PROTOCOL.ECA_QOS_FS):
            r = run_simulation(scenario(n=1, protocol=protocol, acs=(AC.BE,), duration=1), 0)
            assert r.census[SLOT_KIND.COLLISION] == 0
            assert r.stats[(0, AC.BE)].failures == 0
            assert r.stats[(0, AC.BE)].delivered_mpdus > 100

    def test_no_virtual_collisions_with_smart_backoff(self):
        with warnings.catch_warnings():
            warnings.simplefilter('error', UserWarning)
            r = run_simulation(scenario(n=1, duration=3), 0)
        assert r.slots > 5000
        assert sum(st.virtual_collisions for st in r.stats.values()) == 0
        assert r.sb_virtual_collisions == 0
        assert r.census[SLOT_KIND.COLLISION] == 0

    def test_census_and_throughput(self):
        r = run_simulation(scenario(n=4, duration=0.5), 0)
        assert r.slots == sum(r.census.values())
        assert r.duration >= 0.5e6
        m = r.metrics()
        all_rows = m[(m['protocol'] == 'ALL') & (m['metric'] == 'throughput_bps')]
        total = all_rows.loc[all_rows['ac'] == 'ALL', 'value'].iloc[0]
        per_ac = all_rows.loc[all_rows['ac'] != 'ALL', 'value'].sum()
        testing.assert_allclose(per_ac, total, rtol=1e-9)
        fractions = m[m['metric'].str.endswith('_slot_fraction')]['value']
        testing.assert_allclose(fractions.sum(), 1)

    def test_channel_errors(self):
        s = scenario(n=1, acs=(AC.BE,), p_e=0.1, access=ACCESS_MODE.BASIC_BA, duration=10)
        r = run_simulation(s, 0)
        st = r.stats[(0, AC.BE)]
        assert st.attempts > 10**4
        testing.assert_allclose(st.failures/st.attempts, 0.1, atol=0.01)
        assert r.census[SLOT_KIND.COLLISION] == 0 and r.errored == st.failures

    def test_stickiness_lowers_failures(self):
        def failures(stickiness):
            s = scenario(n=20, duration=4, stickiness=stickiness, stickiness_cap=max(stickiness, 2))
            r = run_simulation(s, 0)
            attempts = sum(st.attempts for st in r.stats.values())
            return sum(st.failures for st in r.stats.values())/attempts
        assert failures(1) < failures(0)

    def test_non_saturated(self):
        s = scenario(n=3, traffic=TRAFFIC_PROFILE.NON_SATURATED, duration=1.5)
        r = run_simulation(s, 0)
        vi = sum(r.stats[(i, AC.VI)].delivered_mpdus for i in range(3))
        be = sum(r.stats[(i, AC.BE)].delivered_mpdus for i in range(3))
        assert vi > 0 and be > 0
        for i in range(3):
            st = r.stats[(i, AC.VI)]
            if st.delay_count:
                assert st.delay_sum/st.delay_count > 0

    def test_mixed(self):
        s = scenario(n=4, protocol=(PROTOCOL.EDCA, PROTOCOL.ECA_QOS_FS), duration=0.5)
        m = run_simulation(s, 0).metrics()
        assert set(m['protocol']) == {'ALL', PROTOCOL.EDCA, PROTOCOL.ECA_QOS_FS}
        jfi = m[(m['protocol'] == 'ALL') & (m['metric'] == 'jfi')]['value'].iloc[0]
        assert 0 < jfi <= 1


class TestSchedules:

    def test_period_is_deterministic_backoff_plus_one(self):
        w = World(scenario(n=1, acs=(AC.BE,)), 0)
        be = w.stations[0].acs[0]
        successes = []
        while len(successes) < 12:
            skip_idle(w)
            out = advance_slot(w)
            assert out.kind != SLOT_KIND.COLLISION
            if out.kind == SLOT_KIND.SUCCESS:
                successes.append(w.clock.slot_index)
        assert be.deterministic and be.bd == 15
        # the counter runs down on the transmission slot too: one attempt every B_d+1 slots
        testing.assert_array_equal(np.diff(successes[1:]), 16)

    def test_single_ac_absorption(self):
        s = scenario(n=6, acs=(AC.BE,), hysteresis=False, duration=2)
        for rep in range(s.replications):
            r = run_simulation(s, rep)
            assert r.collision_free_tail() >= 1e6, rep

    def test_no_virtual_collisions_in_full_runs(self):
        s = scenario(n=5, duration=2)
        r = run_simulation(s, 1)
        assert r.sb_virtual_collisions == 0
        assert sum(st.virtual_collisions for st in r.stats.values()) == 0


class TestCapacity:
    '''
    A single AC with B_d+1 of at most 8 slots leaves room for exactly 8 collision-free stations.
    '''

    def small(self, n, duration) -> Scenario:
        params = {AC.BE: AcParams(ac=AC.BE, cw_min=8, cw_max=16, m=1)}
        return scenario(n=n, acs=(AC.BE,), eca_params=params, sr_reduction=Eca.SR_REDUCTION.OFF,
                        duration=duration)

    def test_within_capacity(self):
        s = self.small(6, 3)
        for rep in range(s.replications):
            assert run_simulation(s, rep).collision_free_tail() >= 1e6, rep

    def test_beyond_capacity(self):
        s = self.small(9, 1)
        for rep in range(s.replications):
            r = run_simulation(s, rep)
            assert r.census[SLOT_KIND.COLLISION] > 20
            assert r.longest_collision_free < 0.05e6, rep


class TestAcceptance:

    @pytest.mark.slow
    def test_default_converges_for_few_stations(self):
        s = scenario(n=4, duration=15)
        s.replications = 3
        tails = [run_simulation(s, rep).collision_free_tail() for rep in range(s.replications)]
        assert sum(t >= 5e6 for t in tails) >= 2, tails

    @pytest.mark.slow
    def test_eca_failures_well_below_edca(self):
        def point(protocol):
            s = scenario(n=20, protocol=protocol, duration=4)
            s.replications = 1
            return summarize([run_simulation(s, 0)]).value('failure_fraction')
        eca, edca = point(PROTOCOL.ECA_QOS_FS), point(PROTOCOL.EDCA)
        assert 0 < eca and 3*eca <= edca

    def test_fair_share_is_fair(self):
        def jain(protocol):
            s = scenario(n=4, protocol=protocol, duration=3)
            return summarize([run_simulation(s, rep) for rep in range(s.replications)]).value('jfi')
        fs = jain(PROTOCOL.ECA_QOS_FS)
        assert fs >= 0.95
        assert jain(PROTOCOL.ECA_QOS_TXOP) <= fs - 0.05

    def test_edca_starves_best_effort(self):
        def starved(n):
            s = scenario(n=n, protocol=PROTOCOL.EDCA, access=ACCESS_MODE.BASIC_BA, duration=1)
            s.replications = 1
            return summarize([run_simulation(s, 0)]).value('starved', ac=AC.BE)
        assert starved(2) == 0
        assert starved(40) == 1

    @pytest.mark.slow
    def test_protocol_ordering_in_saturation(self):
        def throughput(n, protocol):
            s = scenario(n=n, protocol=protocol, access=ACCESS_MODE.RTS_CTS, duration=2)
            s.replications = 1
            return summarize([run_simulation(s, 0)]).value('throughput_bps')
        assert throughput(14, PROTOCOL.ECA_QOS_FS) > throughput(14, PROTOCOL.EDCA)
        assert throughput(40, PROTOCOL.EDCA) <= 0.8*throughput(10, PROTOCOL.EDCA)

    @pytest.mark.slow
    def test_non_saturated_delay_follows_priority(self):
        s = scenario(n=4, traffic=TRAFFIC_PROFILE.NON_SATURATED, p_e=0.1, duration=10)
        s.replications = 1
        point = summarize([run_simulation(s, 0)])
        vo, vi, be = (point.value('mean_queueing_delay_us', ac=ac) for ac in (AC.VO, AC.VI, AC.BE))
        assert vo < vi < be

    @pytest.mark.slow
    def test_mixing_helps_edca(self):
        def failures(mix, protocol):
            s = scenario(n=10, protocol=mix, traffic=TRAFFIC_PROFILE.NON_SATURATED, p_e=0.1, duration=3)
            s.replications = 1
            return summarize([run_simulation(s, 0)]).value('failure_fraction', protocol=protocol)
        mixed = failures((PROTOCOL.EDCA, PROTOCOL.ECA_QOS_FS), PROTOCOL.EDCA)
        assert mixed <= failures(PROTOCOL.EDCA, 'ALL')

    def test_same_seed_same_csv(self):
        def csv():
            s = scenario(n=3, duration=0.3)
            point = summarize([run_simulation(s, rep) for rep in range(s.replications)])
            return emit_results([point])
        assert csv() == csv()


if __name__ == "__main__":
    sys.exit(pytest.main(["-qq"], plugins=None))
