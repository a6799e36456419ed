"""
Per-access-category contention state machines for EDCA and CSMA/ECA_QoS
"""
import math
import warnings
import numpy as np

##########################################################################################
class AC:
    '''
    access categories and their relative priorities (802.1D mapping is static configuration)
    '''
    ACS = (VO:= 'VO',
           VI:= 'VI',
           BE:= 'BE',
           BK:= 'BK',
           LEGACY:= 'LEGACY')
    PRIORITY = {VO: 4, VI: 3, BE: 2, BK: 1, LEGACY: 0}
    AGGREGATING = (VO, VI)   # only high priority ACs aggregate frames

    @classmethod
    def by_priority(cls, acs) -> list:
        '''
        return the access categories in `acs` sorted from highest to lowest priority
        '''
        return sorted(acs, key=lambda a: cls.PRIORITY[a], reverse=True)


##########################################################################################
# default contention parameters. txop_limit is in microseconds; 0 means a single MSDU per access.
EDCA_TABLE = {
    AC.BK:     {'cw_min': 32, 'cw_max': 1024, 'm': 5, 'aifsn': 8, 'txop_limit': 0},
    AC.BE:     {'cw_min': 32, 'cw_max': 1024, 'm': 5, 'aifsn': 4, 'txop_limit': 0},
    AC.VI:     {'cw_min': 16, 'cw_max': 32,   'm': 1, 'aifsn': 3, 'txop_limit': 3008},
    AC.VO:     {'cw_min': 8,  'cw_max': 16,   'm': 1, 'aifsn': 3, 'txop_limit': 1504},
    AC.LEGACY: {'cw_min': 16, 'cw_max': 1024, 'm': 5, 'aifsn': 3, 'txop_limit': 0},
}

# CSMA/ECA_QoS waits a single DIFS (AIFSN 3) for every AC; TXOP limits are only used by the
# TXOP aggregation variant.
ECA_TABLE = {
    AC.BK:     {'cw_min': 32, 'cw_max': 1024, 'm': 5, 'aifsn': 3, 'txop_limit': 0},
    AC.BE:     {'cw_min': 32, 'cw_max': 1024, 'm': 5, 'aifsn': 3, 'txop_limit': 0},
    AC.VI:     {'cw_min': 16, 'cw_max': 512,  'm': 5, 'aifsn': 3, 'txop_limit': 3008},
    AC.VO:     {'cw_min': 8,  'cw_max': 256,  'm': 5, 'aifsn': 3, 'txop_limit': 1504},
    AC.LEGACY: {'cw_min': 32, 'cw_max': 1024, 'm': 5, 'aifsn': 3, 'txop_limit': 0},
}

DIFS_AIFSN = 3


##########################################################################################
class AcParams:
    '''
    Static contention parameters of one access category.

    Attributes
    ----------
    ac: str
        one of AC.ACS
    cw_min, cw_max: int
        contention window bounds, in slots
    m: int
        maximum backoff stage
    aifsn: int
        arbitration inter-frame spacing number
    txop_limit: float
        transmission opportunity limit in microseconds; 0 means one MSDU per access
    '''

    ATTRIBUTES = ('ac', 'cw_min', 'cw_max', 'm', 'aifsn', 'txop_limit')

    def __init__(
                 self,
                 ac: str=AC.BE,
                 cw_min: int=32,
                 cw_max: int=1024,
                 m: int=5,
                 aifsn: int=DIFS_AIFSN,
                 txop_limit: float=0):
        self.ac = ac
        self.cw_min = cw_min
        self.cw_max = cw_max
        self.m = m
        self.aifsn = aifsn
        self.txop_limit = txop_limit

    def __str__(self):
        return str(self.__dict__)

    @property
    def priority_rank(self) -> int:
        return AC.PRIORITY[self.ac]

    @property
    def bd_lowest(self) -> int:
        return compute_deterministic_backoff(self, 0)

    @property
    def bd_highest(self) -> int:
        return compute_deterministic_backoff(self, self.m)

    @property
    def aifs_surplus(self) -> int:
        '''
        idle slots this AC must observe after a busy slot beyond the DIFS folded into the slot
        '''
        return max(self.aifsn - DIFS_AIFSN, 0)

    def cw(self, stage: int) -> int:
        '''
        contention window at backoff stage `stage`, 2^stage * cw_min
        '''
        return (2**stage)*self.cw_min

    def check_parameters(self):
        '''
        raise ValueError if the parameters are not usable
        '''
        if self.ac not in AC.ACS:
            raise ValueError(f'unknown access category {self.ac}')
        if self.cw_min < 1 or self.cw_max < self.cw_min:
            raise ValueError(f'{self.ac}: need 1 <= cw_min <= cw_max, got {self.cw_min}, {self.cw_max}')
        if self.m < 0:
            raise ValueError(f'{self.ac}: maximum backoff stage must be nonnegative, got {self.m}')
        if self.aifsn < 1:
            raise ValueError(f'{self.ac}: AIFSN must be at least 1, got {self.aifsn}')
        if self.txop_limit < 0:
            raise ValueError(f'{self.ac}: TXOP limit must be nonnegative, got {self.txop_limit}')

    @classmethod
    def from_dict(cls, d: dict=None):
        p = AcParams()
        p.__dict__.update(d)
        return p

    @classmethod
    def edca_presets(cls) -> dict:
        '''
        dict of AcParams keyed by AC with the default EDCA contention parameters
        '''
        return {ac: AcParams(ac=ac, **row) for ac, row in EDCA_TABLE.items()}

    @classmethod
    def eca_presets(cls) -> dict:
        '''
        dict of AcParams keyed by AC with the default CSMA/ECA_QoS contention parameters
        '''
        return {ac: AcParams(ac=ac, **row) for ac, row in ECA_TABLE.items()}


##########################################################################################
def draw_random_backoff(params: AcParams, stage: int, rng: np.random.Generator) -> int:
    '''
    uniform backoff in [0, 2^stage * cw_min - 1]
    '''
    assert 0 <= stage <= params.m, f'stage {stage} outside [0, {params.m}]'
    return int(rng.integers(0, params.cw(stage)))


def compute_deterministic_backoff(params: AcParams, stage: int) -> int:
    '''
    deterministic backoff ceil(CW(stage)/2) - 1 picked after a successful transmission
    '''
    assert 0 <= stage <= params.m, f'stage {stage} outside [0, {params.m}]'
    return math.ceil(params.cw(stage)/2) - 1


def aifs_duration(params: AcParams, sifs: float, slot: float) -> float:
    '''
    AIFS[AC] = SIFS + slot*(AIFSN[AC] - 1), in the units of `sifs` and `slot`
    '''
    if params.aifsn < 1:
        raise ValueError(f'AIFSN must be at least 1, got {params.aifsn}')
    return sifs + slot*(params.aifsn - 1)


def forbidden_difference(diff, bd: int):
    '''
    Which backoff differences to a sibling are ruled out when the smaller deterministic backoff
    of the pair is `bd`.

    A difference is forbidden when it is 0, a multiple of `bd`, or a multiple of the cycle
    `bd + 1` after which the shorter schedule repeats (schedules are powers of two apart, so the
    two counters would then expire together).

    Parameters
    ----------
    diff: int or array of int
        absolute differences between counters
    bd: int
        min(B_d[i], B_d[j])

    Returns
    -------
    forbidden: bool or array of bool
    '''
    diff = np.asarray(diff)
    bad = (diff == 0) | (diff % (bd + 1) == 0)
    if bd > 0:
        bad |= diff % bd == 0
    return bad


def fair_share_count(stage: int) -> int:
    '''
    number of MPDUs an AC at backoff stage `stage` may aggregate under Fair Share
    '''
    assert stage >= 0, f'negative backoff stage {stage}'
    return 2**stage


##########################################################################################
class AcState:
    '''
    Dynamic contention state of one access category inside a station.

    The backoff counter is expressed at the start of the next slot: the AC transmits in the
    first slot that starts with `backoff == 0` and `aifs_left == 0`.
    '''

    def __init__(
                 self,
                 params: AcParams=None,
                 queue: object=None,
                 rng: np.random.Generator=None,
                 source: object=None):
        self.params = params
        self.queue = queue              # MacQueue of this AC
        self.rng = rng                  # backoff stream of this (station, AC)
        self.source = source            # traffic source feeding the queue
        self.backoff = 0
        self.stage = 0
        self.cw_curr = params.cw_min if params is not None else None
        self.deterministic = False
        self.stickiness_left = 0
        self.retries = 0
        self.sr_bitmap = None
        self.sr_successes = 0
        self.sr_pending = None          # stage chosen by the last bitmap evaluation
        self.sr_cycles = 0              # consecutive clear cycles behind sr_pending
        self.aifs_left = 0
        self.active = False             # contending for the channel
        self.drop_hol = False           # retry limit exceeded on the last failure
        self.retry_drops = 0
        self.sb_fallbacks = 0

    def __str__(self):
        return (f'ac: {self.ac} backoff: {self.backoff} stage: {self.stage} cw_curr: {self.cw_curr} '
                f'deterministic: {self.deterministic} stickiness_left: {self.stickiness_left} '
                f'retries: {self.retries} active: {self.active}')

    @property
    def ac(self) -> str:
        return self.params.ac

    @property
    def bd(self) -> int:
        return compute_deterministic_backoff(self.params, self.stage)

    @property
    def ready(self) -> bool:
        return self.active and self.backoff == 0 and self.aifs_left == 0

    def slots_to_attempt(self) -> int:
        '''
        number of consecutive empty slots before this AC attempts a transmission
        '''
        if self.aifs_left == 0:
            return self.backoff
        return self.aifs_left + max(self.backoff - 1, 0)

    def idle(self, n: int=1):
        '''
        account for `n` consecutive empty slots
        '''
        if self.aifs_left > 0:
            if n < self.aifs_left:
                self.aifs_left -= n
                return
            n -= self.aifs_left - 1     # the slot that completes AIFS also counts down
            self.aifs_left = 0
        self.backoff = max(self.backoff - n, 0)

    def busy(self):
        '''
        account for a busy slot in which this AC did not transmit
        '''
        surplus = self.params.aifs_surplus
        if surplus > 0:
            self.aifs_left = surplus
        elif self.backoff > 0:
            self.backoff -= 1

    def reset_contention(self):
        '''
        back to stage 0 with CW_min, random mode
        '''
        self.stage = 0
        self.cw_curr = self.params.cw_min
        self.retries = 0
        self.deterministic = False
        self.stickiness_left = 0
        self.sr_bitmap = None
        self.sr_successes = 0
        self.sr_pending = None
        self.sr_cycles = 0

    def new_bitmap(self):
        '''
        empty Schedule Reset bitmap of length B_d+1; position 0 is the AC's own transmission
        '''
        self.sr_bitmap = np.zeros(self.bd + 1, dtype=np.uint8)
        self.sr_bitmap[0] = 1
        self.sr_successes = 0


##########################################################################################
class Edca:
    '''
    EDCA backoff rules: random backoff, CW reset on success, CW doubling on failure.
    '''

    @classmethod
    def on_arrival(cls, state: AcState) -> AcState:
        state.reset_contention()
        state.backoff = draw_random_backoff(state.params, 0, state.rng)
        state.aifs_left = state.params.aifs_surplus
        return state

    @classmethod
    def on_success(cls, state: AcState) -> AcState:
        '''
        CW_curr <- CW_min, new random backoff in [0, CW_min - 1]
        '''
        state.reset_contention()
        state.backoff = draw_random_backoff(state.params, 0, state.rng)
        state.aifs_left = state.params.aifs_surplus
        return state

    @classmethod
    def on_failure(cls, state: AcState, retry_limit: int=7) -> AcState:
        '''
        CW_curr <- min(2 CW_curr, CW_max) and a new random backoff in [0, CW_curr - 1].
        Past `retry_limit` retries the head-of-line unit is dropped (`drop_hol` is set) and the
        contention state resets as on success.
        '''
        p = state.params
        state.retries += 1
        if state.retries > retry_limit:
            state.drop_hol = True
            return cls.on_success(state)
        state.cw_curr = min(2*state.cw_curr, p.cw_max)
        state.stage = min(state.stage + 1, p.m)
        state.backoff = int(state.rng.integers(0, state.cw_curr))
        state.aifs_left = p.aifs_surplus
        return state


##########################################################################################
class Eca:
    '''
    CSMA/ECA_QoS backoff rules: deterministic backoff after success with Hysteresis, stickiness,
    Schedule Reset and Smart Backoff.
    '''

    class SR_REDUCTION:
        '''
        how Schedule Reset shortens the schedule
        '''
        REDUCTIONS = (HALF:= 'HALF',
                      SMALLER:= 'SMALLER',
                      OFF:= 'OFF')

    class SR_GAMMA:
        '''
        consecutive successes between bitmap evaluations
        '''
        GAMMAS = (AGGRESSIVE:= 'AGGRESSIVE',
                  CONSERVATIVE:= 'CONSERVATIVE')

    @classmethod
    def conflicts(cls, value: int, bd: int, siblings: list) -> bool:
        '''
        Would an AC whose counter is `value` and whose deterministic backoff is `bd` clash with one
        of `siblings`? See `forbidden_difference`.
        '''
        return any(bool(forbidden_difference(abs(value - s.backoff), min(bd, s.bd))) for s in siblings)

    @classmethod
    def smart_backoff(cls, target: AcState, siblings: list, stage: int, rng: np.random.Generator) -> int:
        '''
        Backoff for `target` at backoff stage `stage` that cannot cause a virtual collision with any
        backlogged sibling.

        The window [0, 2^stage*cw_min - 1] is enumerated and a value is chosen uniformly among
        those that satisfy, for every sibling j,
            B != B[j]  and  |B - B[j]| mod min(B_d, B_d[j]) != 0
        and whose difference is not a multiple of the shorter cycle min(B_d, B_d[j]) + 1 either,
        since the AC would then expire together with the sibling one cycle later.
        If no value qualifies, falls back to a plain uniform draw and counts it in
        `target.sb_fallbacks`.

        Parameters
        ----------
        target: AcState
            the AC drawing the backoff
        siblings: list of AcState
            the other ACs of the station; only those contending constrain the draw
        stage: int
            backoff stage of `target` for this draw
        rng: numpy Generator

        Returns
        -------
        backoff: int
        '''
        window = target.params.cw(stage)
        constraints = [s for s in siblings if s.active and s is not target]
        if not constraints:
            return int(rng.integers(0, window))
        bd = compute_deterministic_backoff(target.params, stage)
        candidates = np.arange(window)
        ok = np.ones(window, dtype=bool)
        for s in constraints:
            ok &= ~forbidden_difference(np.abs(candidates - s.backoff), min(bd, s.bd))
        valid = candidates[ok]
        if valid.size == 0:
            target.sb_fallbacks += 1
            warnings.warn(f'no Smart Backoff value in [0, {window-1}] for AC {target.ac}; '
                          'using a uniform draw')
            return int(rng.integers(0, window))
        return int(valid[rng.integers(valid.size)])

    @classmethod
    def fresh_backoff(cls, state: AcState, siblings: list, smart: bool=True) -> int:
        if smart:
            return cls.smart_backoff(state, siblings, state.stage, state.rng)
        return draw_random_backoff(state.params, state.stage, state.rng)

    @classmethod
    def on_arrival(cls, state: AcState, siblings: list, smart: bool=True) -> AcState:
        state.reset_contention()
        state.backoff = cls.fresh_backoff(state, siblings, smart)
        state.aifs_left = state.params.aifs_surplus
        return state

    @classmethod
    def on_success(
                   cls,
                   state: AcState,
                   sr_decision: int=None,
                   stickiness: int=1,
                   stickiness_cap: int=2,
                   hysteresis: bool=True) -> AcState:
        '''
        Keep the backoff stage (Hysteresis) and set the deterministic backoff B_d(k).

        A Schedule Reset decision moves the AC to the smaller stage `sr_decision` first and refills
        stickiness to the dynamic cap; otherwise stickiness refills to its base level.
        '''
        if sr_decision is not None and sr_decision < state.stage:
            state.stage = sr_decision
            state.stickiness_left = stickiness_cap
        else:
            state.stickiness_left = stickiness
        if not hysteresis:
            state.stage = 0
        state.retries = 0
        state.cw_curr = state.params.cw(state.stage)
        state.backoff = state.bd
        if not state.deterministic or state.sr_bitmap is None or len(state.sr_bitmap) != state.bd + 1:
            state.new_bitmap()
        state.deterministic = True
        state.aifs_left = state.params.aifs_surplus
        return state

    @classmethod
    def on_failure(
                   cls,
                   state: AcState,
                   siblings: list,
                   smart: bool=True,
                   retry_limit: int=7) -> AcState:
        '''
        Stick to the deterministic backoff while stickiness lasts; otherwise move one backoff stage
        up (at most m) and draw a Smart Backoff. Past `retry_limit` retries the head-of-line unit is
        dropped (`drop_hol` is set) and the AC restarts at stage 0.
        '''
        p = state.params
        state.retries += 1
        state.sr_successes = 0
        state.sr_pending = None
        state.sr_cycles = 0
        if state.sr_bitmap is not None:
            state.new_bitmap()
        if state.retries > retry_limit:
            state.drop_hol = True
            return cls.on_arrival(state, siblings, smart)
        if state.deterministic and state.stickiness_left > 0:
            state.stickiness_left -= 1
            state.backoff = state.bd
            state.aifs_left = p.aifs_surplus
            return state
        state.stage = min(state.stage + 1, p.m)
        state.cw_curr = p.cw(state.stage)
        state.deterministic = False
        state.sr_bitmap = None
        state.backoff = cls.fresh_backoff(state, siblings, smart)
        state.aifs_left = p.aifs_surplus
        return state

    @classmethod
    def sr_observe_slot(cls, state: AcState, busy: bool) -> AcState:
        '''
        OR the state of the slot that is about to elapse into the Schedule Reset bitmap.
        The slot sits `(B_d + 1 - backoff) mod (B_d + 1)` slots after the AC's own transmission.
        '''
        if not state.deterministic or state.sr_bitmap is None:
            return state
        size = len(state.sr_bitmap)
        assert state.backoff < size, f'counter {state.backoff} beyond schedule of {size} slots'
        state.sr_bitmap[(size - state.backoff) % size] |= int(busy)
        return state

    @classmethod
    def sr_gamma(cls, state: AcState, mode: str=SR_GAMMA.AGGRESSIVE) -> int:
        if mode == cls.SR_GAMMA.AGGRESSIVE:
            return 1
        elif mode == cls.SR_GAMMA.CONSERVATIVE:
            return 2**((state.params.m - state.stage) + 1)
        raise NotImplementedError(f'Schedule Reset gamma mode {mode} not implemented')

    @classmethod
    def sr_evaluate(cls, state: AcState, mode: str=SR_REDUCTION.HALF) -> int:
        '''
        Look for a shorter collision-free schedule in the bitmap.

        HALF: stage k-1 if the slot half a schedule after the AC's own transmission was always empty.
        SMALLER: the smallest stage k* < k whose schedule length divides B_d+1 and whose nonzero
        multiples were all empty.

        The bitmap and the success counter are reset whatever the outcome.

        Returns
        -------
        stage: int or None
            the reduced backoff stage, or None when no reduction is possible
        '''
        bitmap = state.sr_bitmap
        assert bitmap is not None, 'Schedule Reset evaluated without a bitmap'
        size = len(bitmap)
        k = state.stage
        decision = None
        if mode == cls.SR_REDUCTION.HALF:
            half = math.ceil(size/2)
            if k >= 1 and half < size and not bitmap[half::half].any():
                decision = k - 1
        elif mode == cls.SR_REDUCTION.SMALLER:
            for kk in range(k):
                period = compute_deterministic_backoff(state.params, kk) + 1
                if size % period == 0 and not bitmap[period::period].any():
                    decision = kk
                    break
        elif mode != cls.SR_REDUCTION.OFF:
            raise NotImplementedError(f'Schedule Reset mode {mode} not implemented')
        state.new_bitmap()
        return decision
