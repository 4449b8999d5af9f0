import json
import logging
import os
import shutil
import time

from typing import List, NamedTuple, Tuple

from . import __version__
from .clConfig import clConfig
from .clData import clData
from .clGradCheck import clGradCheck
from .clMetrics import clMetrics
from .clNetwork import clNetwork
from .clSequence import clSequence
from .clStream import clStream

logger = logging.getLogger(__name__)

class clHarness:
    """
    clHarness runs a resolved experiment once per seed. Every seed writes
    its own directory under the output directory holding the metrics
    (metrics.csv for sequence and joint runs, trace.csv for streams,
    gradcheck.txt for gradient checks), summary.txt and run.json.
    A failing seed removes its directory before the error propagates.
    """

    # Defines the outcome of one seed.

    runArtifact = \
        NamedTuple(
        'runArtifact',
        [
            ('seed', int),
            ('directory', str),
            ('echo', dict),
            ('metrics', object),
            ('wall_time', float),
            ('version', str)
        ])

    __clConfig = clConfig()
    __clData = clData()
    __clStream = clStream()

    def __init__(self):
        """
        clHarness Constructor
        """
        pass

    def tasks(self, dataset: dict, seed: int) -> Tuple[List[clData.taskDataset], int]:
        """
        Returns the task sequence of a dataset section and the input width.
        """
        kind = dataset['kind']
        if kind == 'sphere':
            tasks = [self.__clData.sphereTask(index, quadrant, dataset['train_size'], dataset['test_size'], seed)
                     for index, quadrant in enumerate(dataset['quadrants'])]
            return tasks, 4
        base = self.__clData.loadMnist(dataset['data_dir'], dataset['train_subset'], dataset['test_subset'], seed)
        if kind == 'permuted_mnist': tasks = self.__clData.permutedTasks(base, dataset['tasks'], seed)
        else: tasks = self.__clData.splitClasses(base, dataset['groups'])
        return tasks, base.train.inputs.shape[1]

    def stream(self, dataset: dict, seed: int) -> Tuple[clData.stream, List[clData.labeledBatch], int, int]:
        """
        Returns the stream of a dataset section, one test set per phase,
        the input width and the number of classes.
        """
        batches, size = dataset['stream_batches'], dataset['stream_batch_size']
        if dataset['kind'] == 'sphere':
            phases = [clData.phase(quadrant, batches, size) for quadrant in dataset['quadrants']]
            tests = [self.__clData.sphereQuadrant(quadrant, dataset['test_size'], seed + 7919)
                     for quadrant in dataset['quadrants']]
            return self.__clData.makeStream(phases, seed), tests, 4, 2
        tasks, width = self.tasks(dataset, seed)
        phases = [clData.phase(task.train, batches, size) for task in tasks]
        return self.__clData.makeStream(phases, seed), [task.test for task in tasks], width, tasks[0].num_classes

    def __network(self, experiment: clConfig.experiment, width: int, seed: int, heads = None) -> clNetwork:
        network = experiment.network
        return clNetwork.build([width] + list(network['hidden']), network['activation'], heads, seed)

    def __sequence(self, experiment: clConfig.experiment, seed: int, directory: str) -> clMetrics:
        tasks, width = self.tasks(experiment.dataset, seed)
        net = self.__network(experiment, width, seed)
        method = self.__clConfig.method(experiment.echo, seed)
        sequence = clSequence()
        if experiment.mode == 'joint': metrics = sequence.jointTrain(tasks, net, method)
        else: metrics = sequence.runSequence(tasks, net, method)
        metrics.toCsv(os.path.join(directory, 'metrics.csv'))
        lines = metrics.summary()
        lines += ['{},{:.6f}'.format(key, value) for key, value in sequence.analysis.items()]
        self.__write(os.path.join(directory, 'summary.txt'), lines)
        return metrics

    def __stream(self, experiment: clConfig.experiment, seed: int, directory: str) -> List[clStream.traceRow]:
        stream, tests, width, classes = self.stream(experiment.dataset, seed)
        net = self.__network(experiment, width, seed, {0: classes})
        config = self.__clConfig.stream(experiment.echo, seed)
        rows = self.__clStream.runStream(stream, net, config, tests)
        self.__clStream.writeTrace(rows, os.path.join(directory, 'trace.csv'))
        final = self.__clStream.finalAccuracy(rows)
        lines = ['phase_accuracy_{},{:.6f}'.format(phase, accuracy) for phase, accuracy in final.items()]
        if rows: lines.append('omega_updates,{}'.format(rows[-1].omega_updates))
        self.__write(os.path.join(directory, 'summary.txt'), lines)
        return rows

    def __gradcheck(self, seed: int, directory: str) -> List[clGradCheck.result]:
        checker = clGradCheck()
        results = checker.run(seed = seed)
        lines = checker.report(results)
        for line in lines: print(line)
        self.__write(os.path.join(directory, 'gradcheck.txt'), lines)
        self.__write(os.path.join(directory, 'summary.txt'), lines[-1:])
        failed = [result.name for result in results if not result.passed]
        if failed: raise ValueError('Gradient check failed for {}'.format(', '.join(failed)))
        return results

    def __write(self, path: str, lines: List[str]):
        with open(path, 'w', newline = '') as stream:
            stream.write('\n'.join(lines) + '\n')

    def __serialize(self, metrics) -> object:
        if isinstance(metrics, clMetrics):
            return [{'task': task, 'stage': stage, 'accuracy': accuracy}
                    for (task, stage), accuracy in sorted(metrics.entries.items())]
        return [row._asdict() for row in metrics]

    def runSeed(self, experiment: clConfig.experiment, seed: int) -> runArtifact:
        """
        Runs one seed into its own directory and returns its artifact.
        """
        directory = os.path.join(experiment.output, 'seed_{}'.format(seed))
        os.makedirs(directory, exist_ok = True)
        start = time.perf_counter()
        try:
            if experiment.mode in ('sequence', 'joint'): metrics = self.__sequence(experiment, seed, directory)
            elif experiment.mode == 'stream': metrics = self.__stream(experiment, seed, directory)
            else: metrics = self.__gradcheck(seed, directory)
            wallTime = time.perf_counter() - start
            artifact = self.runArtifact(seed, directory, experiment.echo, metrics, wallTime, __version__)
            document = \
            {
                'config': experiment.echo,
                'seed': seed,
                'metrics': self.__serialize(metrics),
                'wall_time': wallTime,
                'version': __version__,
                'mode': experiment.mode,
            }
            with open(os.path.join(directory, 'run.json'), 'w') as stream:
                json.dump(document, stream, indent = 2, sort_keys = True)
        except Exception:
            logger.error('Seed %d failed, removing %s', seed, directory)
            shutil.rmtree(directory, ignore_errors = True)
            raise
        logger.info('Seed %d done in %.1fs: %s', seed, wallTime, directory)
        return artifact

    def run(self, experiment: clConfig.experiment) -> List[runArtifact]:
        """
        Runs every seed of the experiment in order and returns one
        artifact per seed. The first failing seed aborts the run.
        """
        return [self.runSeed(experiment, seed) for seed in experiment.seeds]

# end class
