"""
Command line: run a scenario, sweep the number of stations, or compare scenarios side by side.

    python -m ecaqos run Examples/saturated_eca.ini --replications 5
    python -m ecaqos sweep Examples/saturated_edca.ini --n 2:30:2 --jobs 4 --output edca.csv
    python -m ecaqos compare Examples/saturated_edca.ini Examples/saturated_eca.ini --n 5,10,20
"""
import argparse
import logging
import multiprocessing as mp
import sys
from tqdm import tqdm

from .Engine import run_simulation
from .Metrics import OUTPUT_FORMAT, emit_results, summarize
from .Scenario import parse_scenario_file

logger = logging.getLogger(__name__)


def parse_counts(text: str) -> list:
    '''
    station counts from 'start:stop[:step]' (stop included) or a comma separated list

    >>> parse_counts('2:10:4')
    [2, 6, 10]
    '''
    try:
        if ':' in text:
            parts = [int(p) for p in text.split(':')]
            if len(parts) not in (2, 3):
                raise ValueError(text)
            start, stop = parts[:2]
            step = parts[2] if len(parts) == 3 else 1
            if step < 1:
                raise ValueError(text)
            counts = list(range(start, stop + 1, step))
        else:
            counts = [int(p) for p in text.split(',') if p.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f'cannot read station counts from {text!r}')
    if not counts or min(counts) < 1:
        raise argparse.ArgumentTypeError(f'station counts must be positive, got {text!r}')
    return counts


def _replicate(args: tuple):
    scenario, r = args
    return run_simulation(scenario, r)


def run_replications(scenario, jobs: int=1, progress: bool=False) -> list:
    '''
    every replication of `scenario`, in replication order
    '''
    tasks = [(scenario, r) for r in range(scenario.replications)]
    if jobs > 1 and len(tasks) > 1:
        with mp.Pool(min(jobs, len(tasks))) as pool:
            it = pool.imap(_replicate, tasks)
            return list(tqdm(it, total=len(tasks), disable=not progress, desc=scenario.label))
    return [_replicate(t) for t in tqdm(tasks, disable=not progress, desc=scenario.label)]


def sweep(scenario, counts: list=None, jobs: int=1, progress: bool=False) -> list:
    '''
    one SummaryPoint per station count; the scenario's own count when `counts` is None
    '''
    points = []
    for n in (counts or [scenario.n_stations]):
        s = scenario.with_stations(n)
        logger.info(f'{s.label}: N={n}, {s.replications} replications')
        points.append(summarize(run_replications(s, jobs, progress)))
    return points


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--seed', type=int, help='base seed (overrides the scenario)')
    common.add_argument('--replications', type=int, help='replications per point')
    common.add_argument('--duration', type=float, help='seconds of virtual time per replication')
    common.add_argument('--format', choices=OUTPUT_FORMAT.FORMATS, default=OUTPUT_FORMAT.CSV)
    common.add_argument('--output', default='-', help="result file; '-' writes to stdout")
    common.add_argument('--jobs', type=int, default=1, help='worker processes')
    common.add_argument('-v', '--verbose', action='count', default=0)

    parser = argparse.ArgumentParser(prog='ecaqos',
                                     description='slot-level simulation of EDCA and CSMA/ECA_QoS')
    sub = parser.add_subparsers(dest='command', required=True)
    run = sub.add_parser('run', parents=[common], help='run one scenario')
    run.add_argument('scenario')
    sw = sub.add_parser('sweep', parents=[common], help='run a scenario over station counts')
    sw.add_argument('scenario')
    sw.add_argument('--n', type=parse_counts, required=True, help="'start:stop[:step]' or 'n1,n2,...'")
    cmp = sub.add_parser('compare', parents=[common], help='run several scenarios on the same counts')
    cmp.add_argument('scenarios', nargs='+')
    cmp.add_argument('--n', type=parse_counts, help="'start:stop[:step]' or 'n1,n2,...'")
    return parser


def _load(path: str, args):
    scenario = parse_scenario_file(path)
    if args.seed is not None:
        scenario.seed = args.seed
    if args.replications is not None:
        scenario.replications = args.replications
    if args.duration is not None:
        scenario.duration = args.duration
    scenario.check_parameters()
    return scenario


def main(argv: list=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10*min(args.verbose, 2),
                        format='%(asctime)s %(name)s %(levelname)s %(message)s')
    try:
        if args.jobs < 1:
            raise ValueError(f'--jobs must be at least 1, got {args.jobs}')
        progress = args.verbose > 0
        if args.command == 'run':
            points = sweep(_load(args.scenario, args), None, args.jobs, progress)
        elif args.command == 'sweep':
            points = sweep(_load(args.scenario, args), args.n, args.jobs, progress)
        else:
            points = []
            for path in args.scenarios:
                points += sweep(_load(path, args), args.n, args.jobs, progress)
        if args.output == '-':
            emit_results(points, args.format, sys.stdout)
        else:
            emit_results(points, args.format, args.output)
            logger.info(f'wrote {len(points)} points to {args.output}')
    except (ValueError, OSError) as e:
        print(f'ecaqos: error: {e}', file=sys.stderr)
        return 2
    return 0
