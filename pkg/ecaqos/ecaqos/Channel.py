"""
PHY timing, airtime of transmission units, slot durations and the channel error model.
All times are integer microseconds.
"""
import math
import numpy as np

##########################################################################################
class ACCESS_MODE:
    '''
    handshake protecting a channel access
    '''
    ACCESS_MODES = (BASIC_BA:= 'BASIC_BA',
                    RTS_CTS:= 'RTS_CTS')


class SLOT_KIND:
    SLOT_KINDS = (EMPTY:= 'EMPTY',
                  SUCCESS:= 'SUCCESS',
                  COLLISION:= 'COLLISION')


##########################################################################################
class PhyParams:
    '''
    802.11n single spatial stream PHY, 20 MHz channel, 64-QAM rate 3/4

    Attributes
    ----------
    phy_rate: float
        data rate in bit/s
    control_rate: float
        rate of the control frames (RTS, CTS, ACK, BlockAck) in bit/s
    empty_slot, difs, sifs, symbol, preamble: int
        durations in microseconds
    *_bytes: int
        frame and header sizes in bytes
    '''

    def __init__(
                 self,
                 phy_rate: float=65e6,
                 control_rate: float=6e6,
                 channel_width: int=20,
                 streams: int=1,
                 empty_slot: int=9,
                 difs: int=34,
                 sifs: int=16,
                 symbol: int=4,
                 preamble: int=20,
                 rts_bytes: int=20,
                 cts_bytes: int=14,
                 ack_bytes: int=14,
                 block_ack_bytes: int=32,
                 mac_header_bytes: int=36):
        self.phy_rate = phy_rate
        self.control_rate = control_rate
        self.channel_width = channel_width
        self.streams = streams
        self.empty_slot = empty_slot
        self.difs = difs
        self.sifs = sifs
        self.symbol = symbol
        self.preamble = preamble
        self.rts_bytes = rts_bytes
        self.cts_bytes = cts_bytes
        self.ack_bytes = ack_bytes
        self.block_ack_bytes = block_ack_bytes
        self.mac_header_bytes = mac_header_bytes

    def __str__(self):
        return str(self.__dict__)

    def check_parameters(self):
        for name in ('phy_rate', 'control_rate', 'empty_slot', 'symbol'):
            if getattr(self, name) <= 0:
                raise ValueError(f'{name} must be positive, got {getattr(self, name)}')
        for name in ('difs', 'sifs', 'preamble', 'rts_bytes', 'cts_bytes', 'ack_bytes',
                     'block_ack_bytes', 'mac_header_bytes'):
            if getattr(self, name) < 0:
                raise ValueError(f'{name} must be nonnegative, got {getattr(self, name)}')

    @classmethod
    def from_dict(cls, d: dict=None):
        p = PhyParams()
        p.__dict__.update(d)
        return p

    def tx_time(self, n_bytes: int, rate: float=None) -> int:
        '''
        time on air of `n_bytes` at `rate` (default: the data rate), rounded up to whole symbols
        '''
        return tx_time(n_bytes, self.phy_rate if rate is None else rate, self.symbol)

    def control_time(self, n_bytes: int) -> int:
        '''
        preamble plus payload time of a control frame
        '''
        return self.preamble + self.tx_time(n_bytes, self.control_rate)

    def mpdu_time(self, payload: int) -> int:
        '''
        airtime of one MPDU sent as its own PPDU
        '''
        return self.preamble + self.tx_time(payload + self.mac_header_bytes)


def tx_time(n_bytes: int, rate: float, symbol: int=4) -> int:
    '''
    ceil(bits / (rate * symbol)) * symbol, in microseconds

    Parameters
    ----------
    n_bytes: int
        frame length; must be at least 1
    rate: float
        bit/s
    symbol: int
        OFDM symbol duration in microseconds

    Returns
    -------
    time: int
        microseconds, a multiple of `symbol`
    '''
    if n_bytes < 1:
        raise ValueError(f'frame length must be at least one byte, got {n_bytes}')
    symbols = math.ceil(round(8*n_bytes*1e6/(rate*symbol), 9))
    return int(symbols*symbol)


##########################################################################################
def slot_duration(kind: str, access: str, phy: PhyParams, airtime: int=0, n_mpdus: int=1,
                  errored: bool=False) -> int:
    '''
    Duration of a slot.

    Parameters
    ----------
    kind: str
        SLOT_KIND.EMPTY, SLOT_KIND.SUCCESS or SLOT_KIND.COLLISION
    access: str
        ACCESS_MODE.BASIC_BA or ACCESS_MODE.RTS_CTS
    phy: PhyParams
    airtime: int
        data airtime of the unit sent (success) or of the longest unit involved (collision)
    n_mpdus: int
        MPDUs in the acknowledged unit; more than one is acknowledged with a BlockAck
    errored: bool
        a single attempt whose MPDUs were all lost: no acknowledgement comes back and the
        sender waits out an ACK timeout instead

    Returns
    -------
    duration: int
        microseconds
    '''
    if kind == SLOT_KIND.EMPTY:
        return phy.empty_slot
    timeout = phy.control_time(phy.ack_bytes)
    ack = phy.control_time(phy.block_ack_bytes if n_mpdus > 1 else phy.ack_bytes)
    if errored:
        ack = timeout
    rts = phy.control_time(phy.rts_bytes)
    cts = phy.control_time(phy.cts_bytes)
    if kind == SLOT_KIND.SUCCESS:
        if access == ACCESS_MODE.BASIC_BA:
            return phy.difs + airtime + phy.sifs + ack
        elif access == ACCESS_MODE.RTS_CTS:
            return phy.difs + rts + phy.sifs + cts + phy.sifs + airtime + phy.sifs + ack
    elif kind == SLOT_KIND.COLLISION:
        if access == ACCESS_MODE.BASIC_BA:
            return phy.difs + airtime + phy.sifs + timeout
        elif access == ACCESS_MODE.RTS_CTS:
            return phy.difs + rts + phy.sifs + cts
    else:
        raise ValueError(f'unknown slot kind {kind}')
    raise ValueError(f'unknown access mode {access}')


##########################################################################################
class DeliveryVerdict:
    '''
    per-MPDU outcome of a transmission through the error model
    '''

    def __init__(self, delivered: np.ndarray=None):
        self.delivered = np.asarray(delivered, dtype=bool)

    def __str__(self):
        return str(self.__dict__)

    @property
    def success(self) -> bool:
        '''
        a transmission succeeds when at least one of its MPDUs got through
        '''
        return bool(self.delivered.any())

    @property
    def n_delivered(self) -> int:
        return int(self.delivered.sum())


class ErrorModel:
    '''
    independent per-MPDU loss with probability p_e
    '''

    def __init__(self, p_e: float=0):
        if not 0 <= p_e <= 1:
            raise ValueError(f'MPDU error probability must be in [0, 1], got {p_e}')
        self.p_e = p_e

    def __str__(self):
        return str(self.__dict__)

    def apply(self, n_mpdus: int, rng: np.random.Generator) -> DeliveryVerdict:
        if self.p_e == 0:
            return DeliveryVerdict(np.ones(n_mpdus, dtype=bool))
        return DeliveryVerdict(rng.random(n_mpdus) >= self.p_e)


def apply_channel_errors(unit, model: ErrorModel, rng: np.random.Generator) -> DeliveryVerdict:
    '''
    pass each MPDU of `unit` independently through `model`
    '''
    return model.apply(len(unit.entries), rng)
