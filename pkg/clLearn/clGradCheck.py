import logging
import numpy

from collections import OrderedDict
from typing import Callable, Dict, List, NamedTuple, Tuple

from .clData import clData
from .clDistill import clAutoencoder, clDistill
from .clImportance import clImportance, clParamImportance
from .clNetwork import clNetwork
from .clSparse import clSparse

logger = logging.getLogger(__name__)

class clGradCheck:
    """
    clGradCheck compares every analytic gradient of the package with
    central finite differences on small sigmoid networks and random
    activation matrices. Network checks must agree to 1e-4 in relative
    error; the closed-form representation and parameter regularizers to 1e-6.
    """

    checks = ('softmax_xent', 'mse', 'penalty', 'sni', 'slni', 'slnid', 'decov', 'l1_rep',
              'l1_param', 'l2_wd', 'distill', 'ebll')

    NETWORK_TOLERANCE = 1e-4
    CLOSED_FORM_TOLERANCE = 1e-6

    # Defines the outcome of one check.

    result = \
        NamedTuple(
        'result',
        [
            ('name', str),
            ('max_error', float),
            ('tolerance', float),
            ('passed', bool)
        ])

    __clDistill = clDistill()
    __clImportance = clImportance()
    __clSparse = clSparse()

    __slots__ = ['__floor', '__step']

    def __init__(self, step: float = 1e-5, floor: float = 1e-4):
        """
        Constructor sets the difference step and the denominator floor
        of the relative error.
        """
        self.__step = step
        self.__floor = floor

    def relativeError(self, analytic: numpy.ndarray, numeric: numpy.ndarray) -> float:
        """
        Returns max |a - n| / max(|a|, |n|, floor) over all entries.
        """
        analytic = numpy.asarray(analytic, dtype = numpy.float64)
        numeric = numpy.asarray(numeric, dtype = numpy.float64)
        if analytic.size == 0: return 0.0
        scale = numpy.maximum(numpy.maximum(numpy.abs(analytic), numpy.abs(numeric)), self.__floor)
        return float(numpy.max(numpy.abs(analytic - numeric) / scale))

    def numeric(self, function: Callable[[], float], array: numpy.ndarray) -> numpy.ndarray:
        """
        Returns the central difference gradient of function() with
        respect to array, perturbed in place and restored entry by entry.
        """
        grad = numpy.zeros_like(array)
        for index in numpy.ndindex(array.shape):
            original = array[index]
            array[index] = original + self.__step
            plus = function()
            array[index] = original - self.__step
            minus = function()
            array[index] = original
            grad[index] = (plus - minus) / (2.0 * self.__step)
        return grad

    def compareNetwork(self, net: clNetwork, heads: List[int], function: Callable[[], Tuple[float, Dict[str, numpy.ndarray]]]) -> float:
        """
        Returns the largest relative error between the analytic
        parameter gradients of function and finite differences of its
        value, over the trunk and the delivered heads.
        """
        _, analytic = function()
        if isinstance(analytic, clNetwork.gradients): analytic = analytic.params
        error = 0.0
        for name, param in net.parameters(heads).items():
            numeric = self.numeric(lambda: function()[0], param)
            expected = analytic.get(name, numpy.zeros_like(param))
            error = max(error, self.relativeError(expected, numeric))
        return error

    def compareArray(self, array: numpy.ndarray, function: Callable[[], Tuple[float, numpy.ndarray]]) -> float:
        """
        Returns the relative error of function's gradient with respect to array.
        """
        _, analytic = function()
        return self.relativeError(analytic, self.numeric(lambda: function()[0], array))

    @staticmethod
    def smallNet(seed: int = 0, heads: Dict[int, int] = None) -> clNetwork:
        """
        Returns a 3-4 sigmoid trunk with identity heads, 31 parameters
        with the default 3-wide head.
        """
        return clNetwork.build([3, 4], 'sigmoid', heads or {0: 3}, seed)

    def __inputs(self, rng: numpy.random.Generator, count: int = 5) -> numpy.ndarray:
        return rng.normal(size = (count, 3))

    def __activations(self, rng: numpy.random.Generator) -> numpy.ndarray:
        # Away from zero so that L1 terms stay differentiable.
        return rng.uniform(0.1, 1.0, size = (6, 8))

    def __softmaxXent(self, rng: numpy.random.Generator) -> float:
        net = self.smallNet(1)
        inputs = self.__inputs(rng)
        labels = rng.integers(0, 3, size = 5)
        return self.compareNetwork(net, [0], lambda: net.lossAndBackward(0, inputs, labels))

    def __mse(self, rng: numpy.random.Generator) -> float:
        net = self.smallNet(2)
        inputs = self.__inputs(rng)
        targets = rng.normal(size = (5, 3))
        return self.compareNetwork(net, [0], lambda: net.lossAndBackward(0, inputs, targets, 'mse'))

    def __penalty(self, rng: numpy.random.Generator) -> float:
        net = self.smallNet(3)
        params = net.parameters([0])
        snapshot = OrderedDict((name, value + rng.normal(scale = 0.1, size = value.shape)) for name, value in params.items())
        omega = clParamImportance(OrderedDict((name, rng.uniform(size = value.shape)) for name, value in params.items()), 1)
        return self.compareNetwork(net, [0], lambda: self.__clImportance.penalty(net, snapshot, omega, 0.7, [0]))

    def __sni(self, rng: numpy.random.Generator) -> float:
        H = self.__activations(rng)
        return self.compareArray(H, lambda: self.__clSparse.sni(H))

    def __slni(self, rng: numpy.random.Generator) -> float:
        H = self.__activations(rng)
        return self.compareArray(H, lambda: self.__clSparse.slni(H, 8.0 / 6.0))

    def __slnid(self, rng: numpy.random.Generator) -> float:
        H = self.__activations(rng)
        alpha = rng.uniform(size = 8)
        return self.compareArray(H, lambda: self.__clSparse.slnid(H, alpha, 8.0 / 6.0))

    def __decov(self, rng: numpy.random.Generator) -> float:
        H = self.__activations(rng)
        return self.compareArray(H, lambda: self.__clSparse.decov(H))

    def __l1Rep(self, rng: numpy.random.Generator) -> float:
        H = self.__activations(rng)
        return self.compareArray(H, lambda: self.__clSparse.l1Rep(H))

    def __awayFromZero(self, net: clNetwork, rng: numpy.random.Generator):
        for param in net.parameters([0]).values():
            param[...] = rng.choice([-1.0, 1.0], size = param.shape) * rng.uniform(0.1, 1.0, size = param.shape)

    def __l1Param(self, rng: numpy.random.Generator) -> float:
        net = self.smallNet(4)
        self.__awayFromZero(net, rng)
        return self.compareNetwork(net, [0], lambda: self.__clSparse.l1Param(net, [0]))

    def __l2Decay(self, rng: numpy.random.Generator) -> float:
        net = self.smallNet(5)
        return self.compareNetwork(net, [0], lambda: self.__clSparse.l2Decay(net, [0]))

    def __distill(self, rng: numpy.random.Generator) -> float:
        net = self.smallNet(6)
        inputs = self.__inputs(rng)
        teacher = rng.normal(size = (5, 3))

        def objective():
            logits, trace = net.forward(0, inputs)
            value, dLogits = self.__clDistill.distillation(logits, teacher, 2.0)
            return value, net.backward(trace, {0: dLogits})

        return self.compareNetwork(net, [0], objective)

    def __ebll(self, rng: numpy.random.Generator) -> float:
        net = self.smallNet(7, {0: 2, 1: 2})
        inputs = self.__inputs(rng)
        labels = rng.integers(0, 2, size = 5)
        autoencoder = clAutoencoder.build(4, 2, 0, 7)
        old = net.copy()
        for param in old.parameters([0]).values(): param += rng.normal(scale = 0.2, size = param.shape)
        records = self.__clDistill.record(old, [0], {0: autoencoder}, inputs)
        config = self.__clDistill.config('ebll', 2.0, 0.8)
        batch = clData.labeledBatch(inputs, labels)
        return self.compareNetwork(net, [0, 1],
                                   lambda: self.__clDistill.ebllLoss(net, 1, batch, records, {0: autoencoder}, config))

    def run(self, names: List[str] = None, seed: int = 0) -> List[result]:
        """
        Runs the delivered checks, all by default, and returns their results.
        """
        names = list(names or self.checks)
        runners = \
        {
            'softmax_xent': (self.__softmaxXent, self.NETWORK_TOLERANCE),
            'mse': (self.__mse, self.NETWORK_TOLERANCE),
            'penalty': (self.__penalty, self.CLOSED_FORM_TOLERANCE),
            'sni': (self.__sni, self.CLOSED_FORM_TOLERANCE),
            'slni': (self.__slni, self.CLOSED_FORM_TOLERANCE),
            'slnid': (self.__slnid, self.CLOSED_FORM_TOLERANCE),
            'decov': (self.__decov, self.CLOSED_FORM_TOLERANCE),
            'l1_rep': (self.__l1Rep, self.CLOSED_FORM_TOLERANCE),
            'l1_param': (self.__l1Param, self.CLOSED_FORM_TOLERANCE),
            'l2_wd': (self.__l2Decay, self.CLOSED_FORM_TOLERANCE),
            'distill': (self.__distill, self.NETWORK_TOLERANCE),
            'ebll': (self.__ebll, self.NETWORK_TOLERANCE),
        }
        results = []
        for index, name in enumerate(names):
            if name not in runners: raise ValueError('Unknown gradient check {}'.format(name))
            method, tolerance = runners[name]
            error = method(numpy.random.default_rng([seed, 9, index]))
            results.append(self.result(name, error, tolerance, error < tolerance))
            logger.debug('Gradient check %s: %.3e', name, error)
        return results

    def report(self, results: List[result]) -> List[str]:
        """
        Returns the report table lines, the overall maximum last.
        """
        lines = ['{:<14}{:>12}{:>12}  {}'.format('check', 'max_error', 'tolerance', 'status')]
        for result in results:
            lines.append('{:<14}{:>12.3e}{:>12.1e}  {}'.format(result.name, result.max_error, result.tolerance,
                                                              'ok' if result.passed else 'FAILED'))
        worst = max((result.max_error for result in results), default = 0.0)
        lines.append('max relative error {:.3e}'.format(worst))
        return lines

# end class
