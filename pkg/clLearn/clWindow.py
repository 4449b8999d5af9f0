import math
import numpy
import traceback

from collections import deque
from typing import List, Tuple

class clLossWindow:
    """
    A sliding window over the last |W| losses of an online learner.
    """

    __slots__ = ['__values']

    def __init__(self, size: int = 5):
        """
        Constructor creates an empty window of the delivered length.
        """
        if size < 1: raise ValueError('Window size must be at least 1')
        self.__values = deque(maxlen = int(size))

    @property
    def full(self) -> bool:
        """
        Property
        Returns True when the window holds |W| losses.
        """
        return len(self.__values) == self.__values.maxlen

    @property
    def size(self) -> int:
        """
        Property
        Returns the window length |W|.
        """
        return self.__values.maxlen

    @property
    def values(self) -> List[float]:
        """
        Property
        Returns the losses, oldest first.
        """
        return list(self.__values)

    def __len__(self) -> int:
        return len(self.__values)

    def clear(self):
        """
        Empties the window.
        """
        self.__values.clear()

    def push(self, loss: float):
        """
        Appends a loss, dropping the oldest when full.
        """
        loss = float(loss)
        if not math.isfinite(loss) or loss < 0: raise ValueError('Window losses must be finite and non-negative, got {}'.format(loss))
        self.__values.append(loss)

    def stats(self) -> Tuple[float, float]:
        """
        Returns the mean and population standard deviation of the window.
        """
        if not self.__values: raise ValueError('Statistics of an empty loss window')
        values = numpy.fromiter(self.__values, dtype = numpy.float64)
        return float(values.mean()), float(values.std())

# end class

class clPlateau:
    """
    Plateau search state: whether a plateau may trigger consolidation
    (armed) and the loss statistics of the last accepted plateau.
    """

    __slots__ = ['__armed', '__mu_old', '__sigma_old']

    def __init__(self):
        """
        Constructor starts armed with zero statistics.
        """
        self.__armed = True
        self.__mu_old = 0.0
        self.__sigma_old = 0.0

    @property
    def armed(self) -> bool:
        """
        Property
        Returns True while plateaus are searched for.
        """
        return self.__armed

    @armed.setter
    def armed(self, value: bool):
        """
        Property
        Arms or disarms the plateau search.
        Restores the previous value on failure.
        """
        try:
            preArmed = self.__armed
            if type(value) != bool: raise ValueError('armed takes a boolean')
            self.__armed = value
        except Exception:
            self.__armed = preArmed
            traceback.print_exc()

    @property
    def mu_old(self) -> float:
        """
        Property
        Returns the loss mean of the last plateau.
        """
        return self.__mu_old

    @property
    def sigma_old(self) -> float:
        """
        Property
        Returns the loss standard deviation of the last plateau.
        """
        return self.__sigma_old

    def accept(self, window: clLossWindow):
        """
        Stores the window statistics as the last plateau and disarms.
        """
        self.__mu_old, self.__sigma_old = window.stats()
        self.__armed = False

    def plateauDetected(self, window: clLossWindow, deltaMu: float, deltaSigma: float) -> bool:
        """
        Returns True when armed, the window is full, and both its mean
        and standard deviation are below their thresholds.
        """
        if not self.__armed or not window.full: return False
        mu, sigma = window.stats()
        return mu < deltaMu and sigma < deltaSigma

    def peakDetected(self, window: clLossWindow) -> bool:
        """
        Returns True when the window mean exceeds the last plateau's
        mean plus one standard deviation.
        """
        if len(window) == 0: return False
        mu, _ = window.stats()
        return mu > self.__mu_old + self.__sigma_old

# end class
