"""Command line front end for the studies.

Example::

    igaieti --study kappa_table --domain cantilever --K 8 --degree 2 3 --levels 2 3

A config file holds ``key = value`` lines with the same keys as the long
flags (``lambda`` for the second Lamé coefficient, lists comma separated,
``#`` starts a comment). Flags given on the command line override the file.
On failure a single JSON object ``{"error": ..., "message": ...}`` is
printed to stderr and the exit code is nonzero.
"""
import argparse
import json
import sys

from .ieti import PRIMAL_MODES
from .studies import STUDIES, ExperimentConfig, run

EXIT_USAGE = 2
EXIT_FAILURE = 1

# key -> (ExperimentConfig field, converter, is list)
KEYS = {
    'domain': ('domain', str, False),
    'K': ('K', int, True),
    'Ky': ('Ky', int, False),
    'length': ('length', float, False),
    'degree': ('degree', int, True),
    'levels': ('levels', int, True),
    'mu': ('mu', float, False),
    'lambda': ('lam', float, True),
    'primal': ('primal', str, False),
    'tol': ('tol', float, False),
    'seed': ('seed', int, False),
    'study': ('study', str, False),
    'load': ('load', float, False),
    'max_it': ('max_it', int, False),
    'out': (None, str, False),
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser():
    p = _Parser(prog='igaieti', description='IETI-DP elasticity studies on multi-patch spline domains.')
    p.add_argument('--config', help='flat key = value config file')
    p.add_argument('--study', choices=STUDIES)
    p.add_argument('--domain', help="'cantilever', 'strip' or a geometry file path")
    p.add_argument('--K', type=int, nargs='+', help='patch counts along the length')
    p.add_argument('--Ky', type=int, help='patch rows of the strip grid')
    p.add_argument('--length', type=float, help='strip length (default K)')
    p.add_argument('--degree', type=int, nargs='+')
    p.add_argument('--levels', type=int, nargs='+')
    p.add_argument('--mu', type=float)
    p.add_argument('--lambda', dest='lambda_', type=float, nargs='+')
    p.add_argument('--primal', choices=PRIMAL_MODES)
    p.add_argument('--tol', type=float)
    p.add_argument('--seed', type=int)
    p.add_argument('--load', type=float, help='end load magnitude g0')
    p.add_argument('--max-it', dest='max_it', type=int)
    p.add_argument('--out', help='CSV output path (default stdout)')
    return p


def read_config(text):
    """Parse flat ``key = value`` text into a dict of converted values."""
    out = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split('#', 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition('=')
        key, val = key.strip(), val.strip()
        if not sep or key not in KEYS:
            raise UsageError('config line %d: unknown or malformed entry %r' % (n, line))
        _, conv, is_list = KEYS[key]
        try:
            out[key] = [conv(v) for v in val.split(',')] if is_list else conv(val)
        except ValueError:
            raise UsageError('config line %d: bad value for %s' % (n, key)) from None
    return out


def make_config(argv):
    """(ExperimentConfig, output path or None) from command line arguments."""
    args = build_parser().parse_args(argv)
    values = {}
    if args.config:
        with open(args.config) as fh:
            values.update(read_config(fh.read()))
    for key in KEYS:
        v = getattr(args, 'lambda_' if key == 'lambda' else key, None)
        if v is not None:
            values[key] = v
    out = values.pop('out', None)
    kwargs = {KEYS[k][0]: v for k, v in values.items()}
    return ExperimentConfig(**kwargs).validate(), out


def main(argv=None):
    try:
        cfg, out = make_config(sys.argv[1:] if argv is None else argv)
        report = run(cfg)
        text = report.to_csv()
        if out:
            with open(out, 'w') as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
        return 0
    except UsageError as exc:
        _report_error('usage', exc)
        return EXIT_USAGE
    except Exception as exc:
        _report_error(type(exc).__name__, exc)
        return EXIT_FAILURE


def _report_error(kind, exc):
    sys.stderr.write(json.dumps({'error': kind, 'message': str(exc)}) + '\n')


if __name__ == '__main__':
    sys.exit(main())
