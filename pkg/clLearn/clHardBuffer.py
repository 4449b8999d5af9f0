import numpy
import traceback

from typing import List, NamedTuple

from .clLayer import logSoftmax
from .clNetwork import clNetwork

class clHardBuffer:
    """
    A fixed-capacity store of the hardest samples seen so far, replayed at
    every online step. On update, the losses of residents and newcomers are
    recomputed under the current parameters and the highest-loss samples
    are kept, newer samples winning ties.
    """

    # Defines one stored sample with its loss when last scored and its
    # arrival stamp.

    item = \
        NamedTuple(
        'item',
        [
            ('input', numpy.ndarray),
            ('label', int),
            ('loss', float),
            ('stamp', int)
        ])

    __slots__ = ['__capacity', '__clock', '__items']

    def __init__(self, capacity: int = 30):
        """
        Constructor creates an empty buffer.
        """
        if capacity < 0: raise ValueError('Buffer capacity must be non-negative')
        self.__capacity = int(capacity)
        self.__clock = 0
        self.__items = []

    @property
    def capacity(self) -> int:
        """
        Property
        Returns |B|.
        """
        return self.__capacity

    @property
    def inputs(self) -> numpy.ndarray:
        """
        Property
        Returns the stored inputs as a matrix, None when empty.
        """
        if not self.__items: return None
        return numpy.stack([item.input for item in self.__items])

    @property
    def items(self) -> List[item]:
        """
        Property
        Returns the stored items, hardest first.
        """
        return list(self.__items)

    @property
    def labels(self) -> numpy.ndarray:
        """
        Property
        Returns the stored labels, None when empty.
        """
        if not self.__items: return None
        return numpy.array([item.label for item in self.__items], dtype = numpy.int64)

    @property
    def losses(self) -> numpy.ndarray:
        """
        Property
        Returns the cached losses of the stored items.
        """
        return numpy.array([item.loss for item in self.__items], dtype = numpy.float64)

    @property
    def size(self) -> int:
        """
        Property
        Returns the number of stored items.
        """
        try:
            return len(self.__items)
        except Exception:
            traceback.print_exc()
            return None

    def sampleLosses(self, net: clNetwork, head: int, inputs: numpy.ndarray, labels: numpy.ndarray) -> numpy.ndarray:
        """
        Returns the per-sample cross-entropy under the current parameters.
        """
        logits, _ = net.forward(head, inputs)
        return -logSoftmax(logits)[numpy.arange(labels.shape[0]), labels]

    def update(self, batch, net: clNetwork, head: int) -> 'clHardBuffer':
        """
        Rescores residents and the new batch and keeps the top |B| by loss.
        Returns the buffer.
        """
        newItems = []
        for row in range(batch.labels.shape[0]):
            newItems.append(self.item(numpy.array(batch.inputs[row], dtype = numpy.float64), int(batch.labels[row]),
                                      0.0, self.__clock))
            self.__clock += 1
        if self.__capacity == 0:
            self.__items = []
            return self
        pool = self.__items + newItems
        losses = self.sampleLosses(net, head, numpy.stack([item.input for item in pool]),
                                   numpy.array([item.label for item in pool], dtype = numpy.int64))
        pool = [item._replace(loss = float(loss)) for item, loss in zip(pool, losses)]
        pool.sort(key = lambda item: (-item.loss, -item.stamp))
        self.__items = pool[:self.__capacity]
        return self

# end class
