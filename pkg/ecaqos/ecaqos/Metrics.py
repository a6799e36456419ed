"""
Per-run counters, derived metrics, replication summaries and result files.
"""
import json
import logging
import numpy as np
import pandas as pd

from .Scenario import NpEncoder

logger = logging.getLogger(__name__)

ALL = 'ALL'
STARVATION_FRACTION = 0.01


def jfi(values) -> float:
    '''
    Jain's fairness index (sum x)^2 / (n sum x^2) of nonnegative values; NaN when all are zero

    >>> jfi([2, 1, 1])
    0.8888888888888888
    '''
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        raise ValueError('JFI of an empty sequence')
    if np.any(x < 0):
        raise ValueError('JFI needs nonnegative values')
    denominator = x.size*np.sum(x**2)
    if denominator == 0:
        return np.nan
    return float(np.sum(x)**2/denominator)


##########################################################################################
class AcStats:
    '''
    counters of one access category of one station over a run
    '''

    def __init__(self, station: int=0, ac: str=None, protocol: str=None):
        self.station = station
        self.ac = ac
        self.protocol = protocol
        self.delivered_bytes = 0
        self.delivered_mpdus = 0
        self.attempts = 0
        self.successes = 0
        self.failures = 0
        self.virtual_collisions = 0
        self.retry_drops = 0
        self.queue_drops = 0
        self.delay_sum = 0.0
        self.delay_count = 0
        self.first_success = None
        self.last_success = None
        self.gap_sum = 0.0
        self.gap_count = 0
        self.final_stage = 0
        self.sb_fallbacks = 0

    def __str__(self):
        return str(self.__dict__)

    @property
    def drops(self) -> int:
        return self.retry_drops + self.queue_drops

    def record_success(self, entries: list, now: float):
        '''
        count the delivered (payload, enqueue time) entries of a successful transmission at `now`
        '''
        self.successes += 1
        self.delivered_mpdus += len(entries)
        self.delivered_bytes += sum(p for p, _ in entries)
        self.delay_sum += sum(now - t for _, t in entries)
        self.delay_count += len(entries)
        if self.last_success is not None:
            self.gap_sum += now - self.last_success
            self.gap_count += 1
        else:
            self.first_success = now
        self.last_success = now


class RunResult:
    '''
    Everything measured in one replication.

    Times are microseconds of virtual time.
    '''

    def __init__(self, label: str='scenario', fingerprint: str=None, seed: int=None,
                 replication: int=0, n_stations: int=0):
        self.label = label
        self.fingerprint = fingerprint
        self.seed = seed
        self.replication = replication
        self.n_stations = n_stations
        self.stats = {}                 # (station, AC) -> AcStats
        self.census = {'EMPTY': 0, 'SUCCESS': 0, 'COLLISION': 0}
        self.errored = 0                # single-attempt slots lost to channel errors
        self.last_failure_time = None
        self.last_collision_time = None
        self.longest_collision_free = 0
        self.duration = 0
        self.sb_virtual_collisions = 0

    def __str__(self):
        return (f'RunResult {self.label} replication {self.replication}: n={self.n_stations} '
                f'census={self.census} duration={self.duration}')

    def __eq__(self, other):
        if not isinstance(other, RunResult):
            return NotImplemented
        return self.frame().equals(other.frame()) and self.census == other.census \
            and self.last_failure_time == other.last_failure_time

    @property
    def slots(self) -> int:
        return sum(self.census.values())

    def frame(self) -> pd.DataFrame:
        '''
        one row of raw counters per (station, AC)
        '''
        rows = [dict(s.__dict__, drops=s.drops) for s in self.stats.values()]
        return pd.DataFrame(rows)

    def collision_free_tail(self) -> float:
        '''
        virtual time since the last collision slot ended, or the whole run when there was none
        '''
        return self.duration - (self.last_collision_time or 0)

    def metrics(self) -> pd.DataFrame:
        '''
        Derived metrics in long format: columns protocol, ac, metric, value.

        Rows are produced for every protocol present (and ALL when stations run different
        protocols) and every AC plus ALL. Slot census and timing metrics appear once, under
        protocol ALL and ac ALL.
        '''
        df = self.frame()
        seconds = self.duration/1e6
        protocols = list(dict.fromkeys(df['protocol']))
        groups = [(ALL, df)]
        if len(protocols) > 1:
            groups += [(p, df[df['protocol'] == p]) for p in protocols]
        rows = []

        def put(protocol, ac, metric, value):
            rows.append({'protocol': protocol, 'ac': ac, 'metric': metric, 'value': float(value)})

        for protocol, g in groups:
            n = g['station'].nunique()
            for ac in list(dict.fromkeys(g['ac'])) + [ALL]:
                a = g if ac == ALL else g[g['ac'] == ac]
                throughput = a['delivered_bytes'].sum()*8/seconds
                attempts = a['attempts'].sum()
                gaps = a[a['gap_count'] > 0]
                put(protocol, ac, 'throughput_bps', throughput)
                put(protocol, ac, 'per_node_throughput_bps', throughput/n)
                put(protocol, ac, 'delivered_mpdus', a['delivered_mpdus'].sum())
                put(protocol, ac, 'attempts', attempts)
                put(protocol, ac, 'failures', a['failures'].sum())
                put(protocol, ac, 'failure_fraction',
                    a['failures'].sum()/attempts if attempts else np.nan)
                put(protocol, ac, 'virtual_collisions', a['virtual_collisions'].sum())
                put(protocol, ac, 'drops', a['drops'].sum())
                put(protocol, ac, 'mean_queueing_delay_us',
                    a['delay_sum'].sum()/a['delay_count'].sum() if a['delay_count'].sum() else np.nan)
                put(protocol, ac, 'time_between_successes_us',
                    (gaps['gap_sum']/gaps['gap_count']).mean() if len(gaps) else np.nan)
                put(protocol, ac, 'mean_final_stage', a['final_stage'].mean())
                put(protocol, ac, 'sb_fallbacks', a['sb_fallbacks'].sum())
            per_station = g.groupby('station')['delivered_bytes'].sum()
            put(protocol, ALL, 'jfi', jfi(per_station.to_numpy()))

        slots = self.slots
        for kind, count in self.census.items():
            put(ALL, ALL, f'{kind.lower()}_slot_fraction', count/slots if slots else np.nan)
        put(ALL, ALL, 'slots', slots)
        put(ALL, ALL, 'errored_slots', self.errored)
        put(ALL, ALL, 'last_failure_time_s',
            np.nan if self.last_failure_time is None else self.last_failure_time/1e6)
        put(ALL, ALL, 'last_collision_time_s',
            np.nan if self.last_collision_time is None else self.last_collision_time/1e6)
        put(ALL, ALL, 'collision_free_tail_s', self.collision_free_tail()/1e6)
        put(ALL, ALL, 'longest_collision_free_s', self.longest_collision_free/1e6)
        put(ALL, ALL, 'sb_virtual_collisions', self.sb_virtual_collisions)
        return pd.DataFrame(rows)


##########################################################################################
def _std(values: pd.Series) -> float:
    '''
    sample standard deviation ignoring NaN; 0 for a single value or when all values are equal
    '''
    x = values.dropna().to_numpy(dtype=float)
    if x.size == 0:
        return np.nan
    if x.size == 1 or np.ptp(x) == 0:
        return 0.0
    return float(np.std(x, ddof=1))


class SummaryPoint:
    '''
    Metrics of one scenario at one N, averaged over replications.

    Attributes
    ----------
    table: pandas DataFrame
        columns protocol, ac, metric, mean, std
    '''

    def __init__(self, label: str=None, fingerprint: str=None, seed: int=None, n: int=0,
                 replications: int=0, table: pd.DataFrame=None):
        self.label = label
        self.fingerprint = fingerprint
        self.seed = seed
        self.n = n
        self.replications = replications
        self.table = table

    def __str__(self):
        return f'SummaryPoint {self.label} n={self.n} replications={self.replications}'

    def value(self, metric: str, ac: str=ALL, protocol: str=ALL, stat: str='mean') -> float:
        t = self.table
        row = t[(t['protocol'] == protocol) & (t['ac'] == ac) & (t['metric'] == metric)]
        if row.empty:
            raise KeyError(f'no {metric} for protocol {protocol}, ac {ac}')
        return float(row[stat].iloc[0])

    def frame(self) -> pd.DataFrame:
        t = self.table.copy()
        for col, v in reversed(list({'fingerprint': self.fingerprint, 'seed': self.seed,
                                     'label': self.label, 'n': self.n,
                                     'replications': self.replications}.items())):
            t.insert(0, col, v)
        return t


def summarize(results: list) -> SummaryPoint:
    '''
    Average the metrics of replications of one scenario.

    Adds a `starved` metric per (protocol, AC): 1 when the mean per-node throughput of the AC is
    below 1% of that of VO, or nothing was delivered at all.

    Parameters
    ----------
    results: list of RunResult
        replications of the same scenario at the same N

    Returns
    -------
    point: SummaryPoint
    '''
    if not results:
        raise ValueError('nothing to summarize')
    fingerprints = {r.fingerprint for r in results}
    if len(fingerprints) > 1:
        raise ValueError(f'results come from different scenarios: {sorted(fingerprints)}')
    if len({r.n_stations for r in results}) > 1:
        raise ValueError('results come from different numbers of stations')
    long = pd.concat([r.metrics() for r in results], ignore_index=True)
    table = (long.groupby(['protocol', 'ac', 'metric'], sort=False)['value']
                 .agg(mean='mean', std=_std).reset_index())

    starved = []
    per_node = table[table['metric'] == 'per_node_throughput_bps']
    for protocol, g in per_node.groupby('protocol', sort=False):
        vo = g.loc[g['ac'] == 'VO', 'mean']
        reference = float(vo.iloc[0]) if len(vo) else np.nan
        for _, row in g.iterrows():
            if row['ac'] == ALL:
                continue
            starving = row['mean'] == 0 or (reference > 0 and row['mean'] < STARVATION_FRACTION*reference)
            starved.append({'protocol': protocol, 'ac': row['ac'], 'metric': 'starved',
                            'mean': float(starving), 'std': 0.0})
    if starved:
        table = pd.concat([table, pd.DataFrame(starved)], ignore_index=True)
    first = results[0]
    logger.debug(f'{first.label}: summarized {len(results)} replications at n={first.n_stations}')
    return SummaryPoint(label=first.label, fingerprint=first.fingerprint, seed=first.seed,
                        n=first.n_stations, replications=len(results), table=table)


##########################################################################################
class OUTPUT_FORMAT:
    FORMATS = (CSV:= 'csv',
               JSON:= 'json')


def results_frame(points: list) -> pd.DataFrame:
    return pd.concat([p.frame() for p in points], ignore_index=True)


def emit_results(points: list, fmt: str=OUTPUT_FORMAT.CSV, path=None) -> str:
    '''
    Write summary points as CSV or as a JSON array of records with the same columns:
    fingerprint, seed, label, n, replications, protocol, ac, metric, mean, std.

    Parameters
    ----------
    points: list of SummaryPoint
    fmt: str
        'csv' or 'json'
    path: str or file object
        destination; None returns the text instead

    Returns
    -------
    text: str or None
    '''
    if fmt not in OUTPUT_FORMAT.FORMATS:
        raise ValueError(f'unknown output format {fmt}')
    df = results_frame(points)
    if fmt == OUTPUT_FORMAT.CSV:
        return df.to_csv(path, index=False)
    text = json.dumps(df.to_dict(orient='records'), cls=NpEncoder, indent=1)
    if path is None:
        return text
    if hasattr(path, 'write'):
        path.write(text)
    else:
        with open(path, 'w') as f:
            f.write(text)
    return None
