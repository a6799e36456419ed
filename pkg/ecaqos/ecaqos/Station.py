"""
Stations: one FIFO queue and one contention state per access category, internal (virtual)
collision resolution and the aggregation policies that turn queued MPDUs into a transmission.
"""
import itertools
import warnings
from collections import deque

from .Mac import AC, AcState, Edca, Eca, compute_deterministic_backoff, fair_share_count
from .Channel import PhyParams


##########################################################################################
class PROTOCOL:
    '''
    MAC protocol run by a station
    '''
    PROTOCOLS = (EDCA:= 'EDCA',
                 ECA_QOS_FS:= 'ECA_QOS_FS',
                 ECA_QOS_TXOP:= 'ECA_QOS_TXOP')
    ECA = (ECA_QOS_FS, ECA_QOS_TXOP)


class POLICY:
    '''
    how many queued MPDUs go out in one channel access
    '''
    POLICIES = (FAIR_SHARE:= 'FAIR_SHARE',
                TXOP:= 'TXOP',
                SINGLE_MSDU:= 'SINGLE_MSDU')


class UNIT_KIND:
    UNIT_KINDS = (AMPDU:= 'AMPDU',
                  TXOP_BURST:= 'TXOP_BURST',
                  SINGLE_MSDU:= 'SINGLE_MSDU')


MAX_AMPDU = 32


##########################################################################################
class MacQueue:
    '''
    FIFO of (payload bytes, enqueue time) with tail drop at `capacity`
    '''

    def __init__(self, capacity: int=1000):
        if capacity < 1:
            raise ValueError(f'queue capacity must be positive, got {capacity}')
        self.capacity = capacity
        self.entries = deque()
        self.drops = 0

    def __len__(self):
        return len(self.entries)

    def __str__(self):
        return f'MacQueue(len={len(self.entries)}, capacity={self.capacity}, drops={self.drops})'

    def enqueue(self, payload: int, now: float) -> bool:
        if len(self.entries) >= self.capacity:
            self.drops += 1
            return False
        self.entries.append((payload, now))
        return True

    def head(self, n: int) -> list:
        return list(itertools.islice(self.entries, n))

    def pop(self, n: int) -> list:
        return [self.entries.popleft() for _ in range(min(n, len(self.entries)))]

    def restore(self, entries: list):
        '''
        put `entries` back at the head in their original order
        '''
        self.entries.extendleft(reversed(entries))


##########################################################################################
class TransmissionUnit:
    '''
    MPDUs sent in one channel access

    Attributes
    ----------
    kind: str
        one of UNIT_KIND.UNIT_KINDS
    entries: list of (payload, enqueue time)
    airtime: int
        data airtime in microseconds
    origin: tuple
        (station id, AC)
    '''

    def __init__(self, kind: str=UNIT_KIND.SINGLE_MSDU, entries: list=None, airtime: int=0,
                 origin: tuple=None):
        self.kind = kind
        self.entries = [] if entries is None else entries
        self.airtime = airtime
        self.origin = origin

    def __str__(self):
        return str(self.__dict__)

    def __len__(self):
        return len(self.entries)

    @property
    def mpdus(self) -> list:
        return [payload for payload, _ in self.entries]


def ampdu_airtime(payloads: list, phy: PhyParams) -> int:
    '''
    one preamble, then all MPDUs with their MAC headers back to back
    '''
    return phy.preamble + phy.tx_time(sum(payloads) + phy.mac_header_bytes*len(payloads))


def txop_burst(payloads: list, txop_limit: float, phy: PhyParams) -> tuple:
    '''
    Greedy TXOP packing: separate PPDUs spaced by SIFS, as many as fit in `txop_limit`.
    At least one MPDU is always sent.

    Returns
    -------
    count: int
    airtime: int
    '''
    count, airtime = 0, 0
    for payload in payloads:
        cost = phy.mpdu_time(payload) + (phy.sifs if count else 0)
        if count and airtime + cost > txop_limit:
            break
        count += 1
        airtime += cost
    return count, airtime


def build_transmission(state: AcState, policy: str, phy: PhyParams, origin: tuple=None) -> TransmissionUnit:
    '''
    Dequeue the MPDUs for the next transmission of `state`'s AC.

    Parameters
    ----------
    state: AcState
        the transmitting AC; its queue must not be empty
    policy: str
        POLICY.FAIR_SHARE sends 2^k MPDUs as an A-MPDU (at most 32), POLICY.TXOP packs separate
        MPDUs into the TXOP limit and POLICY.SINGLE_MSDU sends one
    phy: PhyParams
    origin: tuple
        (station id, AC) recorded on the unit

    Returns
    -------
    unit: TransmissionUnit
    '''
    queue = state.queue
    if len(queue) == 0:
        raise ValueError(f'AC {state.ac} has nothing to transmit')
    if state.ac not in AC.AGGREGATING:
        policy = POLICY.SINGLE_MSDU
    if policy == POLICY.FAIR_SHARE:
        entries = queue.pop(min(fair_share_count(state.stage), MAX_AMPDU))
        kind = UNIT_KIND.AMPDU if len(entries) > 1 else UNIT_KIND.SINGLE_MSDU
        airtime = ampdu_airtime([p for p, _ in entries], phy)
    elif policy == POLICY.TXOP and state.params.txop_limit > 0:
        head = queue.head(MAX_AMPDU)
        count, airtime = txop_burst([p for p, _ in head], state.params.txop_limit, phy)
        entries = queue.pop(count)
        kind = UNIT_KIND.TXOP_BURST if count > 1 else UNIT_KIND.SINGLE_MSDU
    elif policy in POLICY.POLICIES:
        entries = queue.pop(1)
        kind = UNIT_KIND.SINGLE_MSDU
        airtime = phy.mpdu_time(entries[0][0])
    else:
        raise NotImplementedError(f'aggregation policy {policy} not implemented')
    return TransmissionUnit(kind=kind, entries=entries, airtime=airtime, origin=origin)


##########################################################################################
class Station:
    '''
    A contender with one queue and one AcState per access category.

    The station runs EDCA or one of the CSMA/ECA_QoS variants for all of its ACs. ACs are held in
    priority order, highest first.
    '''

    def __init__(
                 self,
                 id: int=0,
                 protocol: str=PROTOCOL.ECA_QOS_FS,
                 acs: list=None,
                 smart_backoff: bool=True,
                 hysteresis: bool=True,
                 sr_reduction: str=Eca.SR_REDUCTION.HALF,
                 sr_gamma: str=Eca.SR_GAMMA.AGGRESSIVE,
                 sr_exempt: tuple=(AC.BK,),
                 stickiness: int=1,
                 stickiness_cap: int=2,
                 retry_limit: int=7):
        if protocol not in PROTOCOL.PROTOCOLS:
            raise ValueError(f'unknown protocol {protocol}')
        self.id = id
        self.protocol = protocol
        self.acs = sorted([] if acs is None else acs, key=lambda s: s.params.priority_rank, reverse=True)
        self.smart_backoff = smart_backoff
        self.hysteresis = hysteresis
        self.sr_reduction = sr_reduction
        self.sr_gamma = sr_gamma
        self.sr_exempt = tuple(sr_exempt)
        self.stickiness = stickiness
        self.stickiness_cap = stickiness_cap
        self.retry_limit = retry_limit
        self.sb_virtual_collisions = 0

    def __str__(self):
        return f'Station {self.id} ({self.protocol}): ' + '; '.join(str(s) for s in self.acs)

    @property
    def is_eca(self) -> bool:
        return self.protocol in PROTOCOL.ECA

    def state(self, ac: str) -> AcState:
        for s in self.acs:
            if s.ac == ac:
                return s
        raise KeyError(f'station {self.id} has no AC {ac}')

    def siblings(self, state: AcState) -> list:
        return [s for s in self.acs if s is not state]

    def policy(self, ac: str) -> str:
        if ac not in AC.AGGREGATING:
            return POLICY.SINGLE_MSDU
        return {PROTOCOL.EDCA: POLICY.TXOP,
                PROTOCOL.ECA_QOS_FS: POLICY.FAIR_SHARE,
                PROTOCOL.ECA_QOS_TXOP: POLICY.TXOP}[self.protocol]

    def ready(self) -> list:
        '''
        ACs that attempt in the current slot, highest priority first
        '''
        return [s for s in self.acs if s.ready]

    def resolve_virtual_collision(self, ready: list, now: float=0) -> tuple:
        '''
        The highest priority ready AC gets the channel; every other ready AC is treated as if it
        had collided on the medium.

        Returns
        -------
        winner: AcState
        losers: list of AcState
        '''
        assert len(ready) >= 1, 'no AC is ready'
        winner, losers = ready[0], ready[1:]
        for s in ready[1:]:
            assert s.params.priority_rank < winner.params.priority_rank, 'ready ACs out of priority order'
        if losers and self.is_eca and self.smart_backoff:
            self.sb_virtual_collisions += 1
            warnings.warn(f'virtual collision in station {self.id} under Smart Backoff: '
                          f'{winner.ac} beats {[s.ac for s in losers]}')
        for s in losers:
            self.fail(s)
            if s.drop_hol:
                s.drop_hol = False
                s.retry_drops += 1
                # a loser never built a unit: its head-of-line unit is the first queued MPDU
                s.queue.pop(1)
                self.on_dequeue_complete(s, now)
        return winner, losers

    def build_transmission(self, state: AcState, phy: PhyParams) -> TransmissionUnit:
        return build_transmission(state, self.policy(state.ac), phy, origin=(self.id, state.ac))

    def on_arrival(self, state: AcState) -> AcState:
        '''
        a packet reached the queue of an idle AC: start contending with a fresh backoff
        '''
        if state.active or len(state.queue) == 0:
            return state
        state.active = True
        if self.is_eca:
            return Eca.on_arrival(state, self.siblings(state), self.smart_backoff)
        return Edca.on_arrival(state)

    def succeed(self, state: AcState) -> AcState:
        '''
        Protocol success path, including the Schedule Reset bookkeeping of CSMA/ECA_QoS.

        A reduction found by a bitmap evaluation is only pending. Every cycle that ends at a later
        success is evaluated as well, and a busy slot at the shorter schedule's positions cancels
        the reduction. It is applied, subject to the veto, once the clear cycles span
        `sr_horizon` slots, so no deterministic schedule in the network can hide from the bitmap.
        '''
        if not self.is_eca:
            return Edca.on_success(state)
        decision, pending, cycles = None, None, 0
        if self.sr_enabled(state) and state.deterministic:
            state.sr_successes += 1
            if state.sr_pending is not None or state.sr_successes >= Eca.sr_gamma(state, self.sr_gamma):
                found = Eca.sr_evaluate(state, self.sr_reduction)
                if found is not None:
                    pending = found if state.sr_pending is None else max(found, state.sr_pending)
                    cycles = state.sr_cycles + 1
                    if cycles*(state.bd + 1) >= self.sr_horizon():
                        if self._schedule_fits(state, pending):
                            decision = pending
                        pending, cycles = None, 0
        Eca.on_success(state, sr_decision=decision, stickiness=self.stickiness,
                       stickiness_cap=self.stickiness_cap, hysteresis=self.hysteresis)
        state.sr_pending, state.sr_cycles = pending, cycles
        return state

    def sr_horizon(self) -> int:
        '''
        slots a pending Schedule Reset must stay clear for: the longest deterministic schedule
        any AC of the station can reach
        '''
        return max(s.params.bd_highest + 1 for s in self.acs)

    def fail(self, state: AcState) -> AcState:
        if self.is_eca:
            return Eca.on_failure(state, self.siblings(state), self.smart_backoff, self.retry_limit)
        return Edca.on_failure(state, self.retry_limit)

    def sr_enabled(self, state: AcState) -> bool:
        return (self.is_eca and self.hysteresis and self.sr_reduction != Eca.SR_REDUCTION.OFF
                and state.ac not in self.sr_exempt)

    def _schedule_fits(self, state: AcState, stage: int) -> bool:
        '''
        would the shorter schedule at `stage` keep clear of the other ACs of this station?
        '''
        if not self.smart_backoff:
            return True
        bd = compute_deterministic_backoff(state.params, stage)
        others = [s for s in self.siblings(state) if s.active]
        return not Eca.conflicts(bd, bd, others)

    def on_success(self, state: AcState, unit: TransmissionUnit, delivered, now: float) -> list:
        '''
        Handle an acknowledged transmission of `unit`.

        MPDUs that were not delivered go back to the head of the queue. Returns the delivered
        (payload, enqueue time) entries.
        '''
        got = [e for e, ok in zip(unit.entries, delivered) if ok]
        lost = [e for e, ok in zip(unit.entries, delivered) if not ok]
        if lost:
            state.queue.restore(lost)
        self.succeed(state)
        self.on_dequeue_complete(state, now)
        return got

    def on_failure(self, state: AcState, unit: TransmissionUnit, now: float) -> bool:
        '''
        Handle a failed transmission of `unit`: requeue it, or drop it past the retry limit.
        Returns True when the unit was dropped.
        '''
        self.fail(state)
        dropped = state.drop_hol
        state.drop_hol = False
        if dropped:
            state.retry_drops += 1
        else:
            state.queue.restore(unit.entries)
        self.on_dequeue_complete(state, now)
        return dropped

    def on_dequeue_complete(self, state: AcState, now: float) -> AcState:
        '''
        withdraw the AC from contention when its queue ran dry; saturated sources refill first
        '''
        refill = getattr(state.source, 'refill', None)
        if refill is not None:
            refill(state.queue, now)
        if len(state.queue) == 0:
            state.reset_contention()
            state.active = False
            state.backoff = 0
            state.aifs_left = 0
        return state


def make_station(id: int, protocol: str, params: dict, queues: dict, rngs: dict, sources: dict,
                 **kwargs) -> Station:
    '''
    assemble a Station from per-AC parameters, queues, backoff streams and sources keyed by AC
    '''
    acs = [AcState(params=params[ac], queue=queues[ac], rng=rngs[ac], source=sources.get(ac))
           for ac in params]
    return Station(id=id, protocol=protocol, acs=acs, **kwargs)
