import argparse
import logging

from typing import List

from . import __version__
from .clConfig import clConfig, clConfigError
from .clDistill import clDistill
from .clGradCheck import clGradCheck
from .clHarness import clHarness
from .clSequence import clSequence
from .clSparse import clSparse
from .clStream import clOnlineLearner

logger = logging.getLogger('clLearn')

def parseArgs(argv: List[str] = None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(prog = 'clLearn',
                                     description = 'Continual learning experiments on dense numpy networks.')
    parser.add_argument('--log-level', default = 'INFO', choices = ['DEBUG', 'INFO', 'WARNING', 'ERROR'])
    parser.add_argument('--version', action = 'version', version = '%(prog)s ' + __version__)
    commands = parser.add_subparsers(dest = 'command', required = True)
    run = commands.add_parser('run', help = 'run a JSON experiment config')
    run.add_argument('config')
    gradcheck = commands.add_parser('gradcheck', help = 'compare analytic gradients with finite differences')
    gradcheck.add_argument('--seed', type = int, default = 0)
    commands.add_parser('list-methods', help = 'list importance methods, regularizers, distillation modes and stream variants')
    return parser.parse_args(argv)

def listMethods() -> List[str]:
    return \
    [
        'importance: {}'.format(', '.join(clSequence.importances)),
        'rep_reg: {}'.format(', '.join(clSparse.kinds())),
        'distill: {}'.format(', '.join(clDistill.modes)),
        'stream: {}'.format(', '.join(clOnlineLearner.variants)),
    ]

def main(argv: List[str] = None) -> int:
    """
    Returns 0 on success, 1 when a run fails and 2 for configuration errors.
    """
    args = parseArgs(argv)
    logging.basicConfig(level = getattr(logging, args.log_level),
                        format = '%(asctime)s %(levelname)s %(name)s: %(message)s')
    if args.command == 'list-methods':
        for line in listMethods(): print(line)
        return 0
    if args.command == 'gradcheck':
        checker = clGradCheck()
        results = checker.run(seed = args.seed)
        for line in checker.report(results): print(line)
        return 0 if all(result.passed for result in results) else 1
    config = clConfig()
    try:
        experiment = config.parse(args.config)
    except clConfigError as error:
        logger.error('%s', error)
        return 2
    print(config.echo(experiment))
    try:
        artifacts = clHarness().run(experiment)
    except Exception:
        logger.exception('Run failed')
        return 1
    for artifact in artifacts: logger.info('Seed %d written to %s', artifact.seed, artifact.directory)
    return 0

if __name__ == '__main__':
    raise SystemExit(main())
