import logging
import numpy
import os
import struct

from typing import List, NamedTuple, Sequence, Union

logger = logging.getLogger(__name__)

"""
clData builds the labeled data the learners consume: permuted-pixel and
split-class task sequences, the 4D unit-sphere quadrant stream, and
batches parsed from IDX files.
"""

class clData:

    IMAGE_MAGIC = 0x00000803
    LABEL_MAGIC = 0x00000801

    MNIST_FILES = \
    {
        'train': ('train-images-idx3-ubyte', 'train-labels-idx1-ubyte'),
        'test': ('t10k-images-idx3-ubyte', 't10k-labels-idx1-ubyte'),
    }

    quadrants = ('q1', 'q2')

    # Defines a batch of row inputs [N x D] with integer class labels [N].

    labeledBatch = \
        NamedTuple(
        'labeledBatch',
        [
            ('inputs', numpy.ndarray),
            ('labels', numpy.ndarray)
        ])

    # Defines one task of a task-incremental sequence.

    taskDataset = \
        NamedTuple(
        'taskDataset',
        [
            ('task_id', int),
            ('train', labeledBatch),
            ('test', labeledBatch),
            ('num_classes', int)
        ])

    # Defines one phase of a stream. The source is a quadrant name for
    # sphere phases or a labeled batch drawn from without replacement.

    phase = \
        NamedTuple(
        'phase',
        [
            ('source', Union[str, labeledBatch]),
            ('batches', int),
            ('size', int)
        ])

    # Defines a stream: an ordered list of small batches and the hidden
    # phase tag of each, visible to evaluators only.

    stream = \
        NamedTuple(
        'stream',
        [
            ('batches', List[labeledBatch]),
            ('tags', List[int])
        ])

    def __init__(self):
        """
        clData Constructor
        """
        pass

    def batch(self, inputs, labels) -> labeledBatch:
        """
        Returns a labeled batch after checking shapes and finiteness.
        """
        inputs = numpy.asarray(inputs, dtype = numpy.float64)
        labels = numpy.asarray(labels, dtype = numpy.int64).reshape(-1)
        if inputs.ndim != 2: raise ValueError('Inputs must be a [N x D] matrix')
        if inputs.shape[0] != labels.shape[0]:
            raise ValueError('{} inputs but {} labels'.format(inputs.shape[0], labels.shape[0]))
        if not numpy.all(numpy.isfinite(inputs)): raise ValueError('Inputs must be finite')
        return self.labeledBatch(inputs, labels)

    def subset(self, batch: labeledBatch, count: int, seed: int = 0) -> labeledBatch:
        """
        Returns a deterministic random subset of count samples,
        or the batch itself when count is None or not smaller.
        """
        if count is None or count >= batch.labels.shape[0]: return batch
        order = numpy.sort(numpy.random.default_rng([seed, 2]).permutation(batch.labels.shape[0])[:count])
        return self.labeledBatch(batch.inputs[order], batch.labels[order])

    def sphereLabels(self, inputs: numpy.ndarray) -> numpy.ndarray:
        """
        Returns 1 for points inside or on the unit sphere, 0 outside.
        """
        return (numpy.linalg.norm(inputs, axis = 1) <= 1.0).astype(numpy.int64)

    def sphereQuadrant(self, quadrant: str, count: int, seed: int = 0) -> labeledBatch:
        """
        Returns count 4D points of one quadrant labeled in/out of the unit sphere.
        Directions are uniform on the positive orthant of the sphere, radii
        uniform in [0, 2], so in and out points are near balanced. The second
        quadrant negates coordinate 0.
        """
        quadrant = str(quadrant).lower()
        if quadrant not in self.quadrants: raise ValueError('Unknown quadrant {}'.format(quadrant))
        if count < 1: raise ValueError('Need at least one sample')
        rng = numpy.random.default_rng([seed, 3, self.quadrants.index(quadrant)])
        directions = numpy.abs(rng.standard_normal((count, 4)))
        directions /= numpy.linalg.norm(directions, axis = 1, keepdims = True)
        points = directions * rng.uniform(0.0, 2.0, size = (count, 1))
        if quadrant == 'q2': points[:, 0] = -points[:, 0]
        return self.labeledBatch(points, self.sphereLabels(points))

    def sphereTask(self, taskId: int, quadrant: str, trainCount: int, testCount: int, seed: int = 0) -> taskDataset:
        """
        Returns a two-class task drawn from one sphere quadrant with
        independent train and test draws.
        """
        train = self.sphereQuadrant(quadrant, trainCount, seed)
        test = self.sphereQuadrant(quadrant, testCount, seed + 7919)
        return self.taskDataset(taskId, train, test, 2)

    def permutations(self, dim: int, count: int, seed: int = 0) -> List[numpy.ndarray]:
        """
        Returns count permutations of range(dim); the first is the identity,
        the others are seed-derived and pairwise distinct whenever dim allows.
        """
        if count < 1: raise ValueError('Need at least one task')
        rng = numpy.random.default_rng([seed, 4])
        perms = [numpy.arange(dim)]
        attempts = 0
        while len(perms) < count:
            perm = rng.permutation(dim)
            attempts += 1
            if attempts < 1000 and any(numpy.array_equal(perm, other) for other in perms[1:]): continue
            perms.append(perm)
        return perms

    def permute(self, batch: labeledBatch, perm: numpy.ndarray) -> labeledBatch:
        """
        Returns a batch whose input columns are reordered by perm.
        """
        return self.labeledBatch(batch.inputs[:, perm], batch.labels)

    def unpermute(self, batch: labeledBatch, perm: numpy.ndarray) -> labeledBatch:
        """
        Undoes permute() with the inverse permutation.
        """
        return self.labeledBatch(batch.inputs[:, numpy.argsort(perm)], batch.labels)

    def permutedTasks(self, base: taskDataset, count: int, seed: int = 0) -> List[taskDataset]:
        """
        Returns count tasks; task 0 is the base itself and each later task
        applies one fixed permutation of the input coordinates to both
        train and test inputs. Labels are unchanged.
        """
        perms = self.permutations(base.train.inputs.shape[1], count, seed)
        tasks = [base._replace(task_id = 0)]
        for taskId, perm in enumerate(perms[1:], start = 1):
            tasks.append(self.taskDataset(taskId, self.permute(base.train, perm),
                                          self.permute(base.test, perm), base.num_classes))
        return tasks

    def splitClasses(self, base: taskDataset, groups: Sequence[Sequence[int]]) -> List[taskDataset]:
        """
        Returns one task per class group holding only that group's samples,
        relabeled 0..len(group)-1 in group order.
        """
        seen = set()
        for group in groups:
            if not group: raise ValueError('Class groups must be nonempty')
            overlap = seen.intersection(group)
            if overlap: raise ValueError('Class groups overlap on {}'.format(sorted(overlap)))
            seen.update(group)
        tasks = []
        for taskId, group in enumerate(groups):
            group = [int(label) for label in group]
            tasks.append(self.taskDataset(taskId, self.__select(base.train, group),
                                          self.__select(base.test, group), len(group)))
        return tasks

    def __select(self, batch: labeledBatch, group: List[int]) -> labeledBatch:
        mask = numpy.isin(batch.labels, group)
        relabel = numpy.full(max(int(batch.labels.max(initial = 0)), max(group)) + 1, -1, dtype = numpy.int64)
        relabel[group] = numpy.arange(len(group))
        return self.labeledBatch(batch.inputs[mask], relabel[batch.labels[mask]])

    def loadIdx(self, imagesPath: str, labelsPath: str) -> labeledBatch:
        """
        Parses a big-endian IDX image file and its label file.
        Pixels are scaled to [0, 1] and images flattened row-major.
        """
        with open(imagesPath, 'rb') as stream: images = stream.read()
        with open(labelsPath, 'rb') as stream: labels = stream.read()
        if len(images) < 16 or len(labels) < 8: raise ValueError('Truncated IDX header')
        magic, count, rows, cols = struct.unpack('>IIII', images[:16])
        if magic != self.IMAGE_MAGIC: raise ValueError('wrong magic 0x{:08x} in image file {}'.format(magic, imagesPath))
        labelMagic, labelCount = struct.unpack('>II', labels[:8])
        if labelMagic != self.LABEL_MAGIC: raise ValueError('wrong magic 0x{:08x} in label file {}'.format(labelMagic, labelsPath))
        if count != labelCount: raise ValueError('{} images but {} labels'.format(count, labelCount))
        size = count * rows * cols
        if len(images) - 16 < size: raise ValueError('Truncated image payload in {}'.format(imagesPath))
        if len(labels) - 8 < count: raise ValueError('Truncated label payload in {}'.format(labelsPath))
        pixels = numpy.frombuffer(images, dtype = numpy.uint8, count = size, offset = 16)
        inputs = pixels.reshape(count, rows * cols).astype(numpy.float64) / 255.0
        classes = numpy.frombuffer(labels, dtype = numpy.uint8, count = count, offset = 8).astype(numpy.int64)
        logger.debug('Loaded %d images of %dx%d from %s', count, rows, cols, imagesPath)
        return self.labeledBatch(inputs, classes)

    def loadMnist(self, directory: str = None, trainCount: int = None, testCount: int = None, seed: int = 0) -> taskDataset:
        """
        Loads the four standard MNIST files from directory, or from the
        CL_DATA_DIR environment variable, with optional deterministic subsets.
        """
        directory = directory or os.environ.get('CL_DATA_DIR')
        if not directory: raise ValueError('No data directory: set CL_DATA_DIR or dataset.data_dir')
        parts = {}
        for split, (images, labels) in self.MNIST_FILES.items():
            parts[split] = self.loadIdx(os.path.join(directory, images), os.path.join(directory, labels))
        train = self.subset(parts['train'], trainCount, seed)
        test = self.subset(parts['test'], testCount, seed + 1)
        return self.taskDataset(0, train, test, 10)

    def makeStream(self, phases: Sequence[phase], seed: int = 0) -> stream:
        """
        Returns the concatenation of the phases' batches in order.
        Sphere phases draw fresh points per phase; batch phases walk a
        seed-shuffled order of their source without replacement, wrapping
        around when exhausted. Tags hold the phase index.
        """
        batches = []
        tags = []
        for index, phase in enumerate(phases):
            if phase.size < 1: raise ValueError('Batch size must be at least 1')
            total = phase.batches * phase.size
            if total == 0: continue
            if isinstance(phase.source, str):
                pool = self.sphereQuadrant(phase.source, total, seed + 104729 * (index + 1))
            else:
                source = phase.source
                rng = numpy.random.default_rng([seed, 5, index])
                order = numpy.concatenate([rng.permutation(source.labels.shape[0])
                                           for _ in range(-(-total // source.labels.shape[0]))])[:total]
                pool = self.labeledBatch(source.inputs[order], source.labels[order])
            for start in range(0, total, phase.size):
                batches.append(self.labeledBatch(pool.inputs[start:start + phase.size],
                                                 pool.labels[start:start + phase.size]))
                tags.append(index)
        return self.stream(batches, tags)

    def shuffleStream(self, stream: stream, seed: int = 0) -> stream:
        """
        Returns the same batches in a seed-shuffled order across phases,
        an i.i.d. reference for the phase-ordered stream.
        """
        order = numpy.random.default_rng([seed, 6]).permutation(len(stream.batches))
        return self.stream([stream.batches[index] for index in order], [stream.tags[index] for index in order])

# end class
