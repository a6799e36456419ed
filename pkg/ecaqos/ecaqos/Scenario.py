"""
Scenario description: who contends, with which protocol and traffic, over which PHY, for how long.
Scenarios are read from INI files and fingerprinted so results can be traced to their inputs.
"""
import copy
import configparser
import hashlib
import json
import re
import numpy as np

from .Mac import AC, AcParams, Eca
from .Channel import ACCESS_MODE, PhyParams
from .Station import PROTOCOL
from .Traffic import TRAFFIC_PROFILE, VoiceSourceParams, VideoSourceParams, SaturatedSourceParams


class NpEncoder(json.JSONEncoder):
    '''
    for json dumps of Scenarios and results
    '''
    def default(self, obj):
        if isinstance(obj, np.integer):
            return int(obj)
        if isinstance(obj, np.floating):
            return float(obj)
        if isinstance(obj, np.bool_):
            return bool(obj)
        if isinstance(obj, np.ndarray):
            return obj.tolist()
        if isinstance(obj, (AcParams, PhyParams, VoiceSourceParams, VideoSourceParams,
                            SaturatedSourceParams)):
            return obj.__dict__
        return json.JSONEncoder.default(self, obj)


class ScenarioError(ValueError):
    '''
    invalid scenario; `line` is the 1-based line of the offending entry when it is known
    '''
    def __init__(self, message: str, line: int=None):
        self.line = line
        super().__init__(message if line is None else f'line {line}: {message}')


##########################################################################################
class AGGREGATION:
    AGGREGATIONS = (FAIR_SHARE:= 'FAIR_SHARE',
                    TXOP:= 'TXOP')


class Scenario:
    '''
    Everything one simulation run depends on.

    Attributes
    ----------
    label: str
        name used in result files
    n_stations: int
    mix: tuple of str
        protocols assigned to stations round-robin; ('EDCA', 'ECA_QOS_FS') alternates them
    protocol_mix: dict
        station id -> protocol; derived from `mix` when not given
    traffic: str
        TRAFFIC_PROFILE.SATURATED (all ACs backlogged) or TRAFFIC_PROFILE.NON_SATURATED (voice on VO,
        video on VI, saturated BE and BK)
    access: str
        ACCESS_MODE.BASIC_BA or ACCESS_MODE.RTS_CTS
    p_e: float
        MPDU error probability
    duration: float
        seconds of virtual time per replication
    replications: int
    seed: int
        base seed; every stream of every replication derives from it
    sr_gamma, sr_reduction: str
        Schedule Reset cadence (Eca.SR_GAMMA) and reduction rule (Eca.SR_REDUCTION)
    stickiness, stickiness_cap: int
        failures tolerated in deterministic mode, and the level after an effective Schedule Reset
    hysteresis, smart_backoff: bool
        ablation switches for CSMA/ECA_QoS
    sr_exempt: tuple
        ACs that never run Schedule Reset
    acs: tuple
        ACs present in every station
    queue_capacity, retry_limit: int
    aggregation: str
        what a plain "eca" protocol means: AGGREGATION.FAIR_SHARE or AGGREGATION.TXOP
    edca_params, eca_params: dict
        AcParams keyed by AC
    phy: PhyParams
    voice, video, saturated: traffic source parameters
    '''

    def __init__(
                 self,
                 label: str='scenario',
                 n_stations: int=1,
                 mix: tuple=(PROTOCOL.ECA_QOS_FS,),
                 protocol_mix: dict=None,
                 traffic: str=TRAFFIC_PROFILE.SATURATED,
                 access: str=ACCESS_MODE.RTS_CTS,
                 p_e: float=0.0,
                 duration: float=40.0,
                 replications: int=20,
                 seed: int=12345678901234567890,
                 sr_gamma: str=Eca.SR_GAMMA.AGGRESSIVE,
                 sr_reduction: str=Eca.SR_REDUCTION.HALF,
                 stickiness: int=1,
                 stickiness_cap: int=2,
                 hysteresis: bool=True,
                 smart_backoff: bool=True,
                 sr_exempt: tuple=(AC.BK,),
                 acs: tuple=(AC.VO, AC.VI, AC.BE, AC.BK),
                 queue_capacity: int=1000,
                 retry_limit: int=7,
                 aggregation: str=AGGREGATION.FAIR_SHARE,
                 edca_params: dict=None,
                 eca_params: dict=None,
                 phy: PhyParams=None,
                 voice: VoiceSourceParams=None,
                 video: VideoSourceParams=None,
                 saturated: SaturatedSourceParams=None):
        self.label = label
        self.n_stations = n_stations
        self.mix = tuple(mix)
        self.protocol_mix = (self.assign_protocols(n_stations, self.mix) if protocol_mix is None
                             else dict(protocol_mix))
        self.traffic = traffic
        self.access = access
        self.p_e = p_e
        self.duration = duration
        self.replications = replications
        self.seed = seed
        self.sr_gamma = sr_gamma
        self.sr_reduction = sr_reduction
        self.stickiness = stickiness
        self.stickiness_cap = stickiness_cap
        self.hysteresis = hysteresis
        self.smart_backoff = smart_backoff
        self.sr_exempt = tuple(sr_exempt)
        self.acs = tuple(AC.by_priority(acs))
        self.queue_capacity = queue_capacity
        self.retry_limit = retry_limit
        self.aggregation = aggregation
        self.edca_params = AcParams.edca_presets() if edca_params is None else edca_params
        self.eca_params = AcParams.eca_presets() if eca_params is None else eca_params
        self.phy = PhyParams() if phy is None else phy
        self.voice = VoiceSourceParams() if voice is None else voice
        self.video = VideoSourceParams() if video is None else video
        self.saturated = SaturatedSourceParams() if saturated is None else saturated

    def __str__(self):
        return json.dumps(self.to_dict(), cls=NpEncoder)

    @classmethod
    def assign_protocols(cls, n_stations: int, mix: tuple) -> dict:
        '''
        station id -> protocol, cycling through `mix`
        '''
        if not mix:
            raise ValueError('protocol mix is empty')
        return {i: mix[i % len(mix)] for i in range(n_stations)}

    @classmethod
    def eca_protocol(cls, aggregation: str) -> str:
        return {AGGREGATION.FAIR_SHARE: PROTOCOL.ECA_QOS_FS,
                AGGREGATION.TXOP: PROTOCOL.ECA_QOS_TXOP}[aggregation]

    def params_for(self, protocol: str) -> dict:
        '''
        AcParams of the ACs present, keyed by AC, for stations running `protocol`
        '''
        table = self.edca_params if protocol == PROTOCOL.EDCA else self.eca_params
        return {ac: table[ac] for ac in self.acs}

    @property
    def protocols(self) -> list:
        '''
        distinct protocols in the scenario, in order of first appearance
        '''
        return list(dict.fromkeys(self.protocol_mix[i] for i in sorted(self.protocol_mix)))

    def with_stations(self, n: int):
        '''
        copy of the scenario with `n` stations, protocols reassigned from `mix`
        '''
        s = copy.deepcopy(self)
        s.n_stations = n
        s.protocol_mix = self.assign_protocols(n, self.mix)
        return s

    def to_dict(self) -> dict:
        d = copy.copy(self.__dict__)
        d['protocol_mix'] = {str(k): v for k, v in self.protocol_mix.items()}
        return d

    def fingerprint(self) -> str:
        '''
        SHA-256 of the scenario contents other than the seed and the number of replications
        '''
        d = self.to_dict()
        for k in ('seed', 'replications', 'label'):
            d.pop(k)
        return hashlib.sha256(json.dumps(d, cls=NpEncoder, sort_keys=True).encode()).hexdigest()

    def check_parameters(self):
        '''
        Check whether the scenario is usable; complain if not.

        Side effects
        ------------
        raises ValueError describing the first problem found
        '''
        if self.n_stations < 1:
            raise ValueError(f'need at least one station, got {self.n_stations}')
        if sorted(self.protocol_mix) != list(range(self.n_stations)):
            raise ValueError(f'protocol mix must assign exactly stations 0..{self.n_stations-1}')
        for sid, p in self.protocol_mix.items():
            if p not in PROTOCOL.PROTOCOLS:
                raise ValueError(f'unknown protocol {p} for station {sid}')
        if self.traffic not in TRAFFIC_PROFILE.PROFILES:
            raise ValueError(f'unknown traffic profile {self.traffic}')
        if self.access not in ACCESS_MODE.ACCESS_MODES:
            raise ValueError(f'unknown access mode {self.access}')
        if not 0 <= self.p_e <= 1:
            raise ValueError(f'p_e must be in [0, 1], got {self.p_e}')
        if self.duration <= 0:
            raise ValueError(f'duration must be positive, got {self.duration}')
        if self.replications < 1:
            raise ValueError(f'need at least one replication, got {self.replications}')
        if self.sr_gamma not in Eca.SR_GAMMA.GAMMAS:
            raise ValueError(f'unknown Schedule Reset gamma {self.sr_gamma}')
        if self.sr_reduction not in Eca.SR_REDUCTION.REDUCTIONS:
            raise ValueError(f'unknown Schedule Reset reduction {self.sr_reduction}')
        if self.stickiness < 0 or self.stickiness_cap < self.stickiness:
            raise ValueError(f'need 0 <= stickiness <= stickiness_cap, got {self.stickiness}, '
                             f'{self.stickiness_cap}')
        if not self.acs or set(self.acs) - set(AC.ACS):
            raise ValueError(f'access categories must be a nonempty subset of {AC.ACS}, got {self.acs}')
        if set(self.sr_exempt) - set(AC.ACS):
            raise ValueError(f'unknown AC in sr_exempt {self.sr_exempt}')
        if self.queue_capacity < 1:
            raise ValueError(f'queue capacity must be positive, got {self.queue_capacity}')
        if self.retry_limit < 0:
            raise ValueError(f'retry limit must be nonnegative, got {self.retry_limit}')
        if self.aggregation not in AGGREGATION.AGGREGATIONS:
            raise ValueError(f'unknown aggregation {self.aggregation}')
        for table in (self.edca_params, self.eca_params):
            for ac in self.acs:
                table[ac].check_parameters()
        for p in (self.phy, self.voice, self.video, self.saturated):
            p.check_parameters()

    @classmethod
    def from_dict(cls, d: dict=None):
        s = Scenario()
        s.__dict__.update(d)
        return s


##########################################################################################
# INI grammar
PROTOCOL_NAMES = {'edca': (PROTOCOL.EDCA,),
                  'eca_fs': (PROTOCOL.ECA_QOS_FS,),
                  'eca_txop': (PROTOCOL.ECA_QOS_TXOP,)}
TRAFFIC_NAMES = {'saturated': TRAFFIC_PROFILE.SATURATED, 'saturation': TRAFFIC_PROFILE.SATURATED,
                 'non_saturated': TRAFFIC_PROFILE.NON_SATURATED,
                 'non-saturated': TRAFFIC_PROFILE.NON_SATURATED,
                 'non_saturation': TRAFFIC_PROFILE.NON_SATURATED}
ACCESS_NAMES = {'basic': ACCESS_MODE.BASIC_BA, 'basic_ba': ACCESS_MODE.BASIC_BA,
                'rts_cts': ACCESS_MODE.RTS_CTS, 'rts/cts': ACCESS_MODE.RTS_CTS}

SCENARIO_KEYS = {'label': str, 'n_stations': int, 'n': int, 'protocol': str, 'mix': str,
                 'traffic': str, 'access': str, 'p_e': float, 'duration': float,
                 'replications': int, 'seed': int, 'sr_gamma': str, 'sr_reduction': str,
                 'stickiness': int, 'stickiness_cap': int, 'hysteresis': bool,
                 'smart_backoff': bool, 'sr_exempt': str, 'acs': str, 'queue_capacity': int,
                 'retry_limit': int, 'aggregation': str}

# (lower bound, upper bound), inclusive
RANGES = {'n_stations': (1, None), 'p_e': (0, 1), 'duration': (1e-6, None),
          'replications': (1, None), 'seed': (0, 2**64 - 1), 'stickiness': (0, None),
          'stickiness_cap': (0, None), 'queue_capacity': (1, None), 'retry_limit': (0, None),
          'cw_min': (1, None), 'cw_max': (1, None), 'm': (0, 10), 'aifsn': (1, 15),
          'txop_limit': (0, None)}

AC_KEYS = {'cw_min': int, 'cw_max': int, 'm': int, 'aifsn': int, 'txop_limit': float}
PARAM_SECTIONS = {'phy': PhyParams, 'voice': VoiceSourceParams, 'video': VideoSourceParams,
                  'saturated': SaturatedSourceParams}


def _key_lines(text: str) -> dict:
    '''
    (section, key) -> 1-based line number of the entry; keys before any header belong to [scenario]
    '''
    lines, section = {}, 'scenario'
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line[0] in '#;':
            continue
        header = re.match(r'\[(.+)\]$', line)
        if header:
            section = header.group(1).strip()
            lines.setdefault((section, None), i)
            continue
        key = re.split(r'[=:]', line, maxsplit=1)[0].strip().lower()
        lines.setdefault((section, key), i)
    return lines


def _convert(raw: str, kind: type, where: str, line: int):
    try:
        if kind is bool:
            flag = configparser.ConfigParser.BOOLEAN_STATES.get(raw.strip().lower())
            if flag is None:
                raise ValueError(raw)
            return flag
        if kind is int:
            return int(raw, 0)
        return kind(raw)
    except ValueError:
        raise ScenarioError(f'{where}: cannot read {raw!r} as {kind.__name__}', line)


def _check_range(key: str, value, where: str, line: int):
    if key not in RANGES:
        return
    lo, hi = RANGES[key]
    if (lo is not None and value < lo) or (hi is not None and value > hi):
        raise ScenarioError(f'{where}={value} out of range [{lo}, {"inf" if hi is None else hi}]', line)


def _names(raw: str) -> list:
    return [v.strip() for v in re.split(r'[,\s]+', raw) if v.strip()]


def parse_scenario(text: str) -> Scenario:
    '''
    Build a Scenario from INI text.

    Sections: [scenario] (keys may also precede any header), [phy], [voice], [video], [saturated],
    [edca.<AC>] and [eca.<AC>]. Anything not given keeps its default.

    Parameters
    ----------
    text: str
        the configuration

    Returns
    -------
    scenario: Scenario

    Side effects
    ------------
    raises ScenarioError, with the line number when it is known, on unknown sections or keys,
    unreadable or out-of-range values and inconsistent protocol assignments
    '''
    lines = _key_lines(text)
    parser = configparser.ConfigParser(interpolation=None, strict=False,
                                       inline_comment_prefixes=('#', ';'))
    try:
        parser.read_string('[scenario]\n' + text)
    except configparser.ParsingError as e:
        lineno = e.errors[0][0] - 1 if e.errors else None
        raise ScenarioError(f'cannot parse configuration: {e.message}', lineno)
    except configparser.Error as e:
        raise ScenarioError(f'cannot parse configuration: {e}')

    kw = {}
    edca, eca = AcParams.edca_presets(), AcParams.eca_presets()
    for section in parser.sections():
        sline = lines.get((section, None))
        items = parser.items(section)
        if section == 'scenario':
            for key, raw in items:
                line = lines.get((section, key))
                if key not in SCENARIO_KEYS:
                    raise ScenarioError(f'unknown key {key!r} in [scenario]', line)
                value = _convert(raw, SCENARIO_KEYS[key], key, line)
                _check_range('n_stations' if key == 'n' else key, value, key, line)
                kw[key] = (value, line)
        elif section in PARAM_SECTIONS:
            cls = PARAM_SECTIONS[section]
            defaults = cls().__dict__
            values = {}
            for key, raw in items:
                line = lines.get((section, key))
                if key not in defaults:
                    raise ScenarioError(f'unknown key {key!r} in [{section}]', line)
                kind = type(defaults[key])
                values[key] = raw.strip() if kind is str else _convert(raw, kind, key, line)
            params = cls.from_dict(values)
            try:
                params.check_parameters()
            except ValueError as e:
                raise ScenarioError(f'[{section}]: {e}', sline)
            kw[section] = (params, sline)
        elif re.match(r'^(edca|eca)\.\w+$', section, re.IGNORECASE):
            family, ac = section.split('.')
            ac = ac.upper()
            if ac not in AC.ACS:
                raise ScenarioError(f'unknown access category in section [{section}]', sline)
            table = edca if family.lower() == 'edca' else eca
            for key, raw in items:
                line = lines.get((section, key))
                if key not in AC_KEYS:
                    raise ScenarioError(f'unknown key {key!r} in [{section}]', line)
                value = _convert(raw, AC_KEYS[key], key, line)
                _check_range(key, value, key, line)
                setattr(table[ac], key, value)
            try:
                table[ac].check_parameters()
            except ValueError as e:
                raise ScenarioError(f'[{section}]: {e}', sline)
        else:
            raise ScenarioError(f'unknown section [{section}]', sline)
    return _build(kw, edca, eca)


def _build(kw: dict, edca: dict, eca: dict) -> Scenario:
    def take(key, default=None):
        return kw.pop(key, (default, None))

    args = {'edca_params': edca, 'eca_params': eca}
    for section in PARAM_SECTIONS:
        if section in kw:
            args[section] = kw.pop(section)[0]

    aggregation, line = take('aggregation', AGGREGATION.FAIR_SHARE)
    aggregation = aggregation.upper()
    if aggregation not in AGGREGATION.AGGREGATIONS:
        raise ScenarioError(f'unknown aggregation {aggregation!r}', line)
    args['aggregation'] = aggregation
    eca_default = Scenario.eca_protocol(aggregation)
    names = dict(PROTOCOL_NAMES, eca=(eca_default,), mixed=(PROTOCOL.EDCA, eca_default))

    def protocols(raw, line):
        out = []
        for name in _names(raw):
            if name.lower() in names:
                out.extend(names[name.lower()])
            elif name.upper() in PROTOCOL.PROTOCOLS:
                out.append(name.upper())
            else:
                raise ScenarioError(f'unknown protocol {name!r}', line)
        return tuple(out)

    protocol, pline = take('protocol')
    mix, mline = take('mix')
    if protocol is not None and mix is not None:
        raise ScenarioError('give either protocol or mix, not both', mline)
    if protocol is not None:
        args['mix'] = protocols(protocol, pline)
        if len(args['mix']) > 1 and protocol.lower() != 'mixed':
            raise ScenarioError(f'protocol takes a single value, got {protocol!r}; use mix', pline)
    elif mix is not None:
        args['mix'] = protocols(mix, mline)
        if not args['mix']:
            raise ScenarioError('mix is empty', mline)

    n, nline = take('n')
    n_stations, line = take('n_stations')
    if n is not None and n_stations is not None and n != n_stations:
        raise ScenarioError(f'n={n} and n_stations={n_stations} disagree', line)
    args['n_stations'] = n_stations if n_stations is not None else (n if n is not None else 1)

    traffic, line = take('traffic')
    if traffic is not None:
        if traffic.lower() not in TRAFFIC_NAMES:
            raise ScenarioError(f'unknown traffic profile {traffic!r}', line)
        args['traffic'] = TRAFFIC_NAMES[traffic.lower()]
    access, line = take('access')
    if access is not None:
        if access.lower() not in ACCESS_NAMES:
            raise ScenarioError(f'unknown access mode {access!r}', line)
        args['access'] = ACCESS_NAMES[access.lower()]
    for key, choices in (('sr_gamma', Eca.SR_GAMMA.GAMMAS), ('sr_reduction', Eca.SR_REDUCTION.REDUCTIONS)):
        value, line = take(key)
        if value is not None:
            if value.upper() not in choices:
                raise ScenarioError(f'{key} must be one of {choices}, got {value!r}', line)
            args[key] = value.upper()
    for key in ('acs', 'sr_exempt'):
        value, line = take(key)
        if value is not None:
            acs = tuple(a.upper() for a in _names(value))
            if set(acs) - set(AC.ACS) or (key == 'acs' and not acs):
                raise ScenarioError(f'{key} must list ACs from {AC.ACS}, got {value!r}', line)
            args[key] = acs
    for key, (value, line) in kw.items():
        args[key] = value

    try:
        scenario = Scenario(**args)
        scenario.check_parameters()
    except ScenarioError:
        raise
    except ValueError as e:
        raise ScenarioError(str(e))
    return scenario


def parse_scenario_file(path: str) -> Scenario:
    '''
    read a scenario from an INI file; the label defaults to the file name
    '''
    with open(path) as f:
        text = f.read()
    scenario = parse_scenario(text)
    if not re.search(r'^\s*label\s*[=:]', text, re.MULTILINE):
        scenario.label = re.sub(r'\.[^.]*$', '', path.replace('\\', '/').split('/')[-1])
    return scenario
