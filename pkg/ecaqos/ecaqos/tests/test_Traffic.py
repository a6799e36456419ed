import sys
import numpy as np
import pytest
from numpy import testing
from scipy.stats import truncnorm

from ecaqos.Traffic import (packetize, VoiceSourceParams, VoiceSource, VideoSourceParams, VideoSource,
                            SaturatedSourceParams, SaturatedSource, US)
from ecaqos.Station import MacQueue


##########################################################################################
class TestPacketize:

    def test_split(self):
        assert packetize(5658) == [1470, 1470, 1470, 1248]
        assert packetize(348) == [348]
        assert packetize(1470) == [1470]
        assert packetize(1471) == [1470, 1]

    def test_bytes_conserved(self):
        for n in (1, 999, 2940, 10**5 + 7):
            assert sum(packetize(n)) == n
            assert max(packetize(n)) <= 1470

    def test_empty_frame(self):
        with pytest.raises(ValueError):
            packetize(0)


class TestVoice:

    def test_packet_spacing(self):
        params = VoiceSourceParams(on_mean=10**6)   # practically always On
        src = VoiceSource(params, np.random.default_rng(0))
        src.on, src.next_packet = True, 0.0
        times = [src.next_arrival()[0] for _ in range(50)]
        testing.assert_allclose(np.diff(times), 20000)
        assert params.interval == pytest.approx(0.02)

    def test_payload(self):
        src = VoiceSource(VoiceSourceParams(), np.random.default_rng(1))
        t, payloads = src.next_arrival()
        assert payloads == [38] and t >= 0

    def test_off_phase_is_silent(self):
        src = VoiceSource(VoiceSourceParams(), np.random.default_rng(2))
        for _ in range(2000):
            t, payload = src.next_event()
            if payload is not None:
                assert src.on and t < src.phase_end

    def test_duty_cycle(self):
        # packets every 1000 s leave the phase process untouched and cheap to run
        params = VoiceSourceParams(rate=38*8/1000)
        src = VoiceSource(params, np.random.default_rng(3))
        on_time, horizon = 0.0, 10**5*US
        last, was_on = 0.0, src.on
        while src.clock < horizon:
            t, payload = src.next_event()
            if payload is None:
                if was_on:
                    on_time += t - last
                last, was_on = t, src.on
        testing.assert_allclose(on_time/src.clock, 3.110/(3.110 + 3.2727), atol=0.02)


class TestVideo:

    def test_gop_positions(self):
        p = VideoSourceParams()
        assert p.frame_distribution(0) == ('I', 5658, 2*5658)
        assert [p.frame_distribution(i)[0] for i in (1, 2, 3)] == ['B', 'B', 'B']
        assert p.frame_distribution(4) == ('P', 1634, 2*1634)
        assert p.frame_distribution(16)[0] == 'I'

    def test_frame_sizes(self):
        p = VideoSourceParams()
        src = VideoSource(p, np.random.default_rng(4))
        i_frames = []
        for _ in range(10**4):
            size, _ = src.next_frame()
            i_frames.append(size)
            for _ in range(15):
                src.next_frame()
        a = (1 - 5658)/(2*5658)
        expected = truncnorm.mean(a, np.inf, loc=5658, scale=2*5658)
        assert expected > 5658
        testing.assert_allclose(np.mean(i_frames), expected, rtol=0.05)
        assert min(i_frames) >= 1

    def test_rate(self):
        p = VideoSourceParams()
        src = VideoSource(p, np.random.default_rng(5))
        total, frames = 0, 16*4000
        for _ in range(frames):
            t, payloads = src.next_arrival()
            total += sum(payloads)
        rate = total*8/(frames*src.interval/US)
        testing.assert_allclose(rate, 300e3, rtol=0.1)

    def test_frame_cadence(self):
        src = VideoSource(VideoSourceParams(), np.random.default_rng(6))
        t0 = src.next_frame()[1]
        t1 = src.next_frame()[1]
        assert 0 <= t0 < src.interval
        testing.assert_allclose(t1 - t0, src.interval)

    def test_check_parameters(self):
        with pytest.raises(ValueError):
            VideoSourceParams(gop='IXB').check_parameters()


class TestSaturated:

    def test_refill(self):
        q = MacQueue(capacity=10)
        src = SaturatedSource(SaturatedSourceParams())
        assert src.refill(q, 0) == 10
        q.pop(3)
        assert src.refill(q, 5) == 3
        assert len(q) == 10
        assert q.head(1) == [(1470, 0)]


if __name__ == "__main__":
    sys.exit(pytest.main(["-qq"], plugins=None))
