"""
Slotted discrete-event engine: one shared channel, many stations, one slot at a time.

Every slot starts by delivering due arrivals; then all ACs whose counter is 0 attempt, each
station resolves its internal contention, the channel outcome is classified and the clock
advances by the slot's duration. Runs of empty slots are skipped in one step.
"""
import heapq
import logging
import math
import warnings
import numpy as np

from .Mac import AC, Eca
from .Channel import SLOT_KIND, ErrorModel, apply_channel_errors, slot_duration
from .Station import MacQueue, make_station
from .Scenario import Scenario
from .Traffic import TRAFFIC_PROFILE, SaturatedSource, VideoSource, VoiceSource, US
from .Metrics import AcStats, RunResult

logger = logging.getLogger(__name__)


class RNG_PURPOSE:
    '''
    independent random streams of each (station, AC)
    '''
    PURPOSES = (BACKOFF:= 0,
                TRAFFIC:= 1,
                CHANNEL:= 2)


def stream(seed: int, replication: int, station: int, ac: str, purpose: int) -> np.random.Generator:
    '''
    random stream of one (replication, station, AC, purpose); streams never overlap
    '''
    key = (replication, station, AC.ACS.index(ac), purpose)
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=key))


##########################################################################################
class SimClock:
    '''
    virtual time in microseconds and the number of slots elapsed
    '''

    def __init__(self, now: int=0, slot_index: int=0):
        self.now = now
        self.slot_index = slot_index

    def __str__(self):
        return str(self.__dict__)

    def advance(self, duration: int, slots: int=1):
        assert duration >= 0 and slots >= 0, 'time runs forward'
        self.now += duration
        self.slot_index += slots


class SlotOutcome:
    '''
    What happened on the channel in one slot.

    Attributes
    ----------
    kind: str
        SLOT_KIND.EMPTY, SLOT_KIND.SUCCESS or SLOT_KIND.COLLISION
    participants: frozenset of (station, AC)
    winner: (station, AC) or None
        the transmitter of a single-attempt slot
    delivered: int
        MPDUs that got through
    errored: bool
        the single attempt was lost to channel errors
    duration: int
        microseconds
    '''

    def __init__(self, kind: str=SLOT_KIND.EMPTY, participants: frozenset=frozenset(), winner: tuple=None,
                 delivered: int=0, errored: bool=False, duration: int=0):
        self.kind = kind
        self.participants = participants
        self.winner = winner
        self.delivered = delivered
        self.errored = errored
        self.duration = duration

    def __str__(self):
        return str(self.__dict__)

    @property
    def busy(self) -> bool:
        return self.kind != SLOT_KIND.EMPTY

    @property
    def failed(self) -> bool:
        return self.kind == SLOT_KIND.COLLISION or self.errored


def classify_slot(attempts, verdict=None) -> SlotOutcome:
    '''
    Classify a slot from the (station, AC) pairs that transmitted in it.

    Parameters
    ----------
    attempts: collection of (station, AC)
        at most one pair per station
    verdict: DeliveryVerdict
        channel outcome of a single attempt; None means delivered in full

    Returns
    -------
    outcome: SlotOutcome
    '''
    participants = frozenset(attempts)
    stations = [s for s, _ in participants]
    assert len(stations) == len(set(stations)), 'a station attempted with two ACs in one slot'
    if not participants:
        return SlotOutcome(kind=SLOT_KIND.EMPTY)
    if len(participants) >= 2:
        return SlotOutcome(kind=SLOT_KIND.COLLISION, participants=participants)
    winner = next(iter(participants))
    if verdict is None:
        return SlotOutcome(kind=SLOT_KIND.SUCCESS, participants=participants, winner=winner, delivered=1)
    return SlotOutcome(kind=SLOT_KIND.SUCCESS, participants=participants, winner=winner,
                       delivered=verdict.n_delivered, errored=not verdict.success)


##########################################################################################
class World:
    '''
    Mutable state of one replication: clock, stations, pending arrivals and counters.
    '''

    def __init__(self, scenario: Scenario, replication: int=0):
        self.scenario = scenario
        self.replication = replication
        self.phy = scenario.phy
        self.clock = SimClock()
        self.end = int(round(scenario.duration*US))
        self.error_model = ErrorModel(scenario.p_e)
        self.arrivals = []              # heap of (time, sequence, station, AC, payloads)
        self._sequence = 0
        self.result = RunResult(label=scenario.label, fingerprint=scenario.fingerprint(),
                                seed=scenario.seed, replication=replication,
                                n_stations=scenario.n_stations)
        self.channel_rngs = {}
        self.stations = [self._build_station(sid) for sid in range(scenario.n_stations)]
        self._last_collision_end = 0

    def __str__(self):
        return f'World(replication={self.replication}, clock={self.clock}, stations={len(self.stations)})'

    def _source(self, sid: int, ac: str):
        s = self.scenario
        if s.traffic == TRAFFIC_PROFILE.NON_SATURATED and ac == AC.VO:
            return VoiceSource(s.voice, stream(s.seed, self.replication, sid, ac, RNG_PURPOSE.TRAFFIC))
        if s.traffic == TRAFFIC_PROFILE.NON_SATURATED and ac == AC.VI:
            return VideoSource(s.video, stream(s.seed, self.replication, sid, ac, RNG_PURPOSE.TRAFFIC))
        return SaturatedSource(s.saturated)

    def _build_station(self, sid: int):
        s = self.scenario
        protocol = s.protocol_mix[sid]
        params = s.params_for(protocol)
        queues = {ac: MacQueue(s.queue_capacity) for ac in params}
        rngs = {ac: stream(s.seed, self.replication, sid, ac, RNG_PURPOSE.BACKOFF) for ac in params}
        sources = {ac: self._source(sid, ac) for ac in params}
        station = make_station(sid, protocol, params, queues, rngs, sources,
                               smart_backoff=s.smart_backoff, hysteresis=s.hysteresis,
                               sr_reduction=s.sr_reduction, sr_gamma=s.sr_gamma,
                               sr_exempt=s.sr_exempt, stickiness=s.stickiness,
                               stickiness_cap=s.stickiness_cap, retry_limit=s.retry_limit)
        for state in station.acs:
            self.result.stats[(sid, state.ac)] = AcStats(station=sid, ac=state.ac, protocol=protocol)
            self.channel_rngs[(sid, state.ac)] = stream(s.seed, self.replication, sid, state.ac,
                                                        RNG_PURPOSE.CHANNEL)
            if isinstance(state.source, SaturatedSource):
                state.source.refill(state.queue, 0)
                station.on_arrival(state)
            else:
                self._schedule(sid, state)
        return station

    def _schedule(self, sid: int, state):
        t, payloads = state.source.next_arrival()
        heapq.heappush(self.arrivals, (t, self._sequence, sid, state.ac, payloads))
        self._sequence += 1

    def next_arrival_time(self) -> float:
        return self.arrivals[0][0] if self.arrivals else math.inf

    def deliver_arrivals(self):
        '''
        enqueue every arrival due by the start of the current slot
        '''
        now = self.clock.now
        while self.arrivals and self.arrivals[0][0] <= now:
            t, _, sid, ac, payloads = heapq.heappop(self.arrivals)
            station = self.stations[sid]
            state = station.state(ac)
            for payload in payloads:
                if not state.queue.enqueue(payload, t):
                    self.result.stats[(sid, ac)].queue_drops += 1
            station.on_arrival(state)
            self._schedule(sid, state)

    def active_states(self):
        for station in self.stations:
            for state in station.acs:
                if state.active:
                    yield state

    def finish(self) -> RunResult:
        r = self.result
        r.duration = self.clock.now
        r.longest_collision_free = max(r.longest_collision_free, r.duration - self._last_collision_end)
        for station in self.stations:
            r.sb_virtual_collisions += station.sb_virtual_collisions
            for state in station.acs:
                st = r.stats[(station.id, state.ac)]
                st.final_stage = state.stage
                st.sb_fallbacks = state.sb_fallbacks
                st.retry_drops = state.retry_drops
        overflow = sum(st.queue_drops for st in r.stats.values())
        if overflow:
            warnings.warn(f'{overflow} packets dropped at full queues in replication {self.replication}')
        return r


##########################################################################################
def skip_idle(world: World) -> int:
    '''
    Elapse the run of empty slots before the next attempt, the next arrival or the end of the
    run, whichever comes first. Returns the number of slots skipped (0 when some AC attempts in
    the current slot).
    '''
    world.deliver_arrivals()
    states = list(world.active_states())
    sigma = world.phy.empty_slot
    now = world.clock.now
    n = math.ceil((world.end - now)/sigma)
    if states:
        n = min(n, min(s.slots_to_attempt() for s in states))
    if world.arrivals:
        n = min(n, max(math.ceil((world.next_arrival_time() - now)/sigma), 1))
    if n <= 0:
        return 0
    for s in states:
        s.idle(n)
    world.clock.advance(n*sigma, n)
    world.result.census[SLOT_KIND.EMPTY] += n
    return n


def advance_slot(world: World) -> SlotOutcome:
    '''
    Simulate one slot.

    Every AC with a zero counter (and AIFS satisfied) attempts; each station lets its highest
    priority ready AC through and sends the others down their failure path. ACs that did not
    attempt count the slot down. The chosen units go on air, the outcome is classified, timed
    and applied: delivered MPDUs leave their queues, failed units return to them.

    Returns
    -------
    outcome: SlotOutcome
    '''
    world.deliver_arrivals()
    now = world.clock.now
    result = world.result
    ready = {}
    for station in world.stations:
        r = station.ready()
        if r:
            ready[station.id] = r
    busy = bool(ready)
    attempting = {id(s) for states in ready.values() for s in states}

    for state in world.active_states():
        Eca.sr_observe_slot(state, busy)
    for state in world.active_states():
        if id(state) in attempting:
            continue
        if busy:
            state.busy()
        else:
            state.idle(1)

    units = {}
    for sid, states in ready.items():
        station = world.stations[sid]
        winner, losers = station.resolve_virtual_collision(states, now)
        for loser in losers:
            result.stats[(sid, loser.ac)].virtual_collisions += 1
        units[(sid, winner.ac)] = (station, winner, station.build_transmission(winner, world.phy))

    verdict = None
    if len(units) == 1:
        (key, (_, _, unit)), = units.items()
        verdict = apply_errors(world, key, unit)
    outcome = classify_slot(units.keys(), verdict)
    if outcome.kind == SLOT_KIND.SUCCESS and verdict is None:
        outcome.delivered = len(units[outcome.winner][2])

    if outcome.kind == SLOT_KIND.EMPTY:
        outcome.duration = slot_duration(SLOT_KIND.EMPTY, world.scenario.access, world.phy)
    elif outcome.kind == SLOT_KIND.SUCCESS:
        _, _, unit = units[outcome.winner]
        outcome.duration = slot_duration(SLOT_KIND.SUCCESS, world.scenario.access, world.phy,
                                         airtime=unit.airtime, n_mpdus=len(unit), errored=outcome.errored)
    else:
        longest = max((u for _, _, u in units.values()), key=lambda u: u.airtime)
        outcome.duration = slot_duration(SLOT_KIND.COLLISION, world.scenario.access, world.phy,
                                         airtime=longest.airtime)
    world.clock.advance(outcome.duration)
    end = world.clock.now
    result.census[outcome.kind] += 1

    if outcome.kind == SLOT_KIND.COLLISION:
        result.longest_collision_free = max(result.longest_collision_free, now - world._last_collision_end)
        world._last_collision_end = end
        result.last_collision_time = end
    if outcome.failed:
        result.last_failure_time = end
    if outcome.errored:
        result.errored += 1

    for key, (station, state, unit) in units.items():
        stats = result.stats[key]
        stats.attempts += 1
        if outcome.kind == SLOT_KIND.SUCCESS and not outcome.errored:
            delivered = verdict.delivered if verdict is not None else np.ones(len(unit), dtype=bool)
            entries = station.on_success(state, unit, delivered, end)
            stats.record_success(entries, end)
        else:
            stats.failures += 1
            station.on_failure(state, unit, end)
    return outcome


def apply_errors(world: World, key: tuple, unit):
    if world.error_model.p_e == 0:
        return None
    return apply_channel_errors(unit, world.error_model, world.channel_rngs[key])


##########################################################################################
def run_simulation(scenario: Scenario, replication_index: int=0) -> RunResult:
    '''
    Run one replication of `scenario` for `scenario.duration` seconds of virtual time.

    Identical scenario, seed and replication index give identical results.

    Parameters
    ----------
    scenario: Scenario
    replication_index: int
        in [0, scenario.replications)

    Returns
    -------
    result: RunResult
    '''
    scenario.check_parameters()
    if not 0 <= replication_index < scenario.replications:
        raise ValueError(f'replication index {replication_index} outside [0, {scenario.replications})')
    world = World(scenario, replication_index)
    logger.info(f'{scenario.label}: replication {replication_index}, {scenario.n_stations} stations, '
                f'{scenario.duration} s')
    while world.clock.now < world.end:
        if not skip_idle(world):
            advance_slot(world)
    result = world.finish()
    logger.info(f'{scenario.label}: replication {replication_index} done, {result.slots} slots, '
                f'census {result.census}')
    return result
