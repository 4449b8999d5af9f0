import os
import struct

import numpy
import pytest

from clLearn.clData import clData
from clLearn.clLayer import clLayer
from clLearn.clNetwork import clNetwork

slow = pytest.mark.skipif(not os.environ.get('CL_RUN_SLOW'), reason = 'set CL_RUN_SLOW=1 for acceptance-scale runs')

@pytest.fixture
def rng():
    return numpy.random.default_rng(12345)

@pytest.fixture
def smallNet():
    """A 4-6-5 relu trunk with two 3-wide heads."""
    return clNetwork.build([4, 6, 5], 'relu', {0: 3, 1: 3}, seed = 3)

@pytest.fixture
def sigmoidNet():
    return clNetwork.build([3, 4], 'sigmoid', {0: 3}, seed = 11)

def linearNet(weights, head = None, activation = 'identity') -> clNetwork:
    """
    Returns a network with one trunk layer holding the delivered weights
    and an identity head, zero biases throughout.
    """
    weights = numpy.array(weights, dtype = numpy.float64, ndmin = 2)
    trunk = [clLayer(weights, None, activation)]
    if head is None: head = numpy.eye(weights.shape[0])
    return clNetwork(trunk, {0: clLayer(head, None, 'identity')})

def writeIdx(directory, prefix: str, images: numpy.ndarray, labels: numpy.ndarray,
             imageMagic: int = clData.IMAGE_MAGIC, labelMagic: int = clData.LABEL_MAGIC):
    """
    Writes an IDX image file and label file and returns their paths.
    """
    count, rows, cols = images.shape
    imagesPath = os.path.join(str(directory), prefix + '-images-idx3-ubyte')
    labelsPath = os.path.join(str(directory), prefix + '-labels-idx1-ubyte')
    with open(imagesPath, 'wb') as stream:
        stream.write(struct.pack('>IIII', imageMagic, count, rows, cols))
        stream.write(images.astype(numpy.uint8).tobytes())
    with open(labelsPath, 'wb') as stream:
        stream.write(struct.pack('>II', labelMagic, labels.shape[0]))
        stream.write(labels.astype(numpy.uint8).tobytes())
    return imagesPath, labelsPath

def writeMnist(directory, trainCount: int = 60, testCount: int = 20, seed: int = 0):
    """
    Writes a tiny MNIST look-alike under the standard file names: 4x4
    images whose brightest pixel encodes the label.
    """
    rng = numpy.random.default_rng(seed)
    for split, count in (('train', trainCount), ('test', testCount)):
        labels = numpy.arange(count) % 10
        images = rng.integers(0, 40, size = (count, 4, 4))
        images.reshape(count, 16)[numpy.arange(count), labels] = 255
        imagesName, labelsName = clData.MNIST_FILES[split]
        imagesPath, labelsPath = writeIdx(directory, split, images, labels)
        os.replace(imagesPath, os.path.join(str(directory), imagesName))
        os.replace(labelsPath, os.path.join(str(directory), labelsName))
    return str(directory)

@pytest.fixture
def mnistDir(tmp_path):
    return writeMnist(tmp_path)
