"""
Traffic sources: on/off voice, GOP-structured video and saturated (always backlogged) sources.
Arrival times are microseconds of virtual time.
"""
import numpy as np
from scipy.stats import truncnorm

US = 1e6     # microseconds per second


##########################################################################################
class TRAFFIC_PROFILE:
    PROFILES = (SATURATED:= 'SATURATED',
                NON_SATURATED:= 'NON_SATURATED')


def packetize(frame_bytes: int, max_payload: int=1470) -> list:
    '''
    split a frame into MPDU payloads of at most `max_payload` bytes, the remainder last

    >>> packetize(5658)
    [1470, 1470, 1470, 1248]
    '''
    if frame_bytes < 1:
        raise ValueError(f'frame must have at least one byte, got {frame_bytes}')
    if max_payload < 1:
        raise ValueError(f'maximum payload must be at least one byte, got {max_payload}')
    full, rest = divmod(int(frame_bytes), int(max_payload))
    return [int(max_payload)]*full + ([rest] if rest else [])


##########################################################################################
class VoiceSourceParams:
    '''
    exponential on/off source emitting constant-size packets at a constant bit rate while On

    Attributes
    ----------
    on_mean, off_mean: float
        mean phase durations in seconds
    rate: float
        bit/s during On
    payload: int
        packet size in bytes
    '''

    def __init__(self, on_mean: float=3.110, off_mean: float=3.2727, rate: float=15200.0,
                 payload: int=38):
        self.on_mean = on_mean
        self.off_mean = off_mean
        self.rate = rate
        self.payload = payload

    def __str__(self):
        return str(self.__dict__)

    @property
    def interval(self) -> float:
        '''
        seconds between packets during On
        '''
        return self.payload*8/self.rate

    @property
    def duty_cycle(self) -> float:
        return self.on_mean/(self.on_mean + self.off_mean)

    def check_parameters(self):
        if self.on_mean <= 0 or self.off_mean <= 0:
            raise ValueError('voice phase means must be positive')
        if self.rate <= 0 or self.payload < 1:
            raise ValueError('voice rate and payload must be positive')

    @classmethod
    def from_dict(cls, d: dict=None):
        p = VoiceSourceParams()
        p.__dict__.update(d)
        return p


class VoiceSource:
    '''
    Voice source state: the current phase, when it ends and when the next packet is due.
    The initial phase is drawn from its stationary probability.
    '''

    def __init__(self, params: VoiceSourceParams=None, rng: np.random.Generator=None, start: float=0):
        self.params = VoiceSourceParams() if params is None else params
        self.rng = rng
        self.on = bool(rng.random() < self.params.duty_cycle)
        self.clock = start
        self.phase_end = start + self._phase_length(self.on)
        self.next_packet = start if self.on else None

    def __str__(self):
        return str({'on': self.on, 'clock': self.clock, 'phase_end': self.phase_end,
                    'next_packet': self.next_packet})

    def _phase_length(self, on: bool) -> float:
        mean = self.params.on_mean if on else self.params.off_mean
        return self.rng.exponential(mean)*US

    def next_event(self) -> tuple:
        '''
        advance to the next event

        Returns
        -------
        time: float
            microseconds
        payload: int or None
            packet size in bytes, or None for a phase switch
        '''
        if self.on and self.next_packet < self.phase_end:
            self.clock = self.next_packet
            self.next_packet += self.params.interval*US
            return self.clock, self.params.payload
        self.clock = self.phase_end
        self.on = not self.on
        self.phase_end = self.clock + self._phase_length(self.on)
        self.next_packet = self.clock if self.on else None
        return self.clock, None

    def next_arrival(self) -> tuple:
        '''
        time of the next packet and its MPDU payloads, skipping phase switches
        '''
        while True:
            t, payload = self.next_event()
            if payload is not None:
                return t, [payload]


##########################################################################################
class VideoSourceParams:
    '''
    Group-of-pictures video source; frame sizes are normal, truncated below at one byte, with a
    standard deviation of `sd_factor` times the frame type mean.
    '''

    def __init__(self, gop: str='IBBBPBBBPBBBPBBB', mean_i: float=5658.0, mean_p: float=1634.0,
                 mean_b: float=348.0, sd_factor: float=2.0, rate: float=300e3, max_payload: int=1470):
        self.gop = gop
        self.mean_i = mean_i
        self.mean_p = mean_p
        self.mean_b = mean_b
        self.sd_factor = sd_factor
        self.rate = rate
        self.max_payload = max_payload

    def __str__(self):
        return str(self.__dict__)

    def frame_distribution(self, position: int) -> tuple:
        '''
        (frame type, mean, sd) of the frame at GOP `position` before truncation
        '''
        kind = self.gop[position % len(self.gop)]
        mean = {'I': self.mean_i, 'P': self.mean_p, 'B': self.mean_b}[kind]
        return kind, mean, self.sd_factor*mean

    def gop_arrays(self) -> tuple:
        '''
        truncnorm shape parameters for every position of the GOP
        '''
        loc = np.array([self.frame_distribution(i)[1] for i in range(len(self.gop))], dtype=float)
        scale = self.sd_factor*loc
        a = (1 - loc)/scale
        return a, loc, scale

    @property
    def gop_bytes(self) -> float:
        '''
        expected bytes per GOP after truncation
        '''
        a, loc, scale = self.gop_arrays()
        return float(np.sum(truncnorm.mean(a, np.inf, loc=loc, scale=scale)))

    @property
    def frame_interval(self) -> float:
        '''
        seconds between frames that deliver `rate` bit/s on average
        '''
        return self.gop_bytes*8/self.rate/len(self.gop)

    def check_parameters(self):
        if not self.gop or set(self.gop) - set('IPB'):
            raise ValueError(f'GOP pattern must be a nonempty string over I, P, B; got {self.gop!r}')
        if min(self.mean_i, self.mean_p, self.mean_b) <= 0 or self.sd_factor <= 0:
            raise ValueError('video frame means and sd factor must be positive')
        if self.rate <= 0 or self.max_payload < 1:
            raise ValueError('video rate and maximum payload must be positive')

    @classmethod
    def from_dict(cls, d: dict=None):
        p = VideoSourceParams()
        p.__dict__.update(d)
        return p


class VideoSource:
    '''
    Video source state: position in the GOP and time of the next frame. A random phase within
    the first frame interval keeps stations from emitting in lockstep.
    '''

    def __init__(self, params: VideoSourceParams=None, rng: np.random.Generator=None, start: float=0):
        self.params = VideoSourceParams() if params is None else params
        self.rng = rng
        self.interval = self.params.frame_interval*US
        self.position = 0
        self.clock = start + rng.uniform(0, self.interval)
        self._gop_shape = self.params.gop_arrays()
        self._sizes = None

    def __str__(self):
        return str({'position': self.position, 'clock': self.clock, 'interval': self.interval})

    def _draw_gop(self) -> np.ndarray:
        a, loc, scale = self._gop_shape
        sizes = truncnorm.rvs(a, np.inf, loc=loc, scale=scale, random_state=self.rng)
        return np.maximum(np.rint(sizes), 1).astype(int)

    def next_frame(self) -> tuple:
        '''
        Returns
        -------
        frame_bytes: int
        time: float
            emission time in microseconds
        '''
        if self.position == 0:
            self._sizes = self._draw_gop()
        size = int(self._sizes[self.position])
        t = self.clock
        self.position = (self.position + 1) % len(self.params.gop)
        self.clock += self.interval
        return size, t

    def next_arrival(self) -> tuple:
        size, t = self.next_frame()
        return t, packetize(size, self.params.max_payload)


##########################################################################################
class SaturatedSourceParams:
    def __init__(self, payload: int=1470):
        self.payload = payload

    def __str__(self):
        return str(self.__dict__)

    def check_parameters(self):
        if self.payload < 1:
            raise ValueError(f'saturated payload must be positive, got {self.payload}')

    @classmethod
    def from_dict(cls, d: dict=None):
        p = SaturatedSourceParams()
        p.__dict__.update(d)
        return p


class SaturatedSource:
    '''
    keeps its queue full; it has no arrival events of its own
    '''

    def __init__(self, params: SaturatedSourceParams=None):
        self.params = SaturatedSourceParams() if params is None else params

    def __str__(self):
        return str(self.__dict__)

    def refill(self, queue, now: float) -> int:
        '''
        top `queue` up to its capacity with packets enqueued at `now`; returns the number added
        '''
        n = queue.capacity - len(queue)
        for _ in range(n):
            queue.enqueue(self.params.payload, now)
        return n
