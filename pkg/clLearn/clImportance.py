import logging
import numpy
import traceback

from collections import OrderedDict
from typing import Dict, Iterable, List, NamedTuple, Tuple

from .clLayer import softmax
from .clNetwork import clNetwork

logger = logging.getLogger(__name__)

class clParamImportance:
    """
    Per-parameter importance weights (Omega) keyed by parameter name,
    with the number of estimates folded in so far.
    """

    __slots__ = ['__count', '__values']

    def __init__(self, values: Dict[str, numpy.ndarray] = None, count: int = 0):
        """
        Constructor copies the delivered arrays.
        """
        self.__values = OrderedDict((name, numpy.array(value, dtype = numpy.float64))
                                    for name, value in (values or {}).items())
        self.__count = int(count)
        for name, value in self.__values.items():
            if not numpy.all(numpy.isfinite(value)) or numpy.any(value < 0):
                raise ValueError('Importance {} must be finite and non-negative'.format(name))

    @staticmethod
    def zeros(params: Dict[str, numpy.ndarray]) -> 'clParamImportance':
        """
        Returns an all-zero importance shaped like the delivered parameters.
        """
        return clParamImportance(OrderedDict((name, numpy.zeros_like(value)) for name, value in params.items()))

    @property
    def count(self) -> int:
        """
        Property
        Returns the number of accumulated estimates.
        """
        return self.__count

    @count.setter
    def count(self, value: int):
        """
        Property
        Sets the number of accumulated estimates.
        Restores the previous value on failure.
        """
        try:
            preCount = self.__count
            self.__count = int(value)
        except Exception:
            self.__count = preCount
            traceback.print_exc()

    @property
    def names(self) -> List[str]:
        """
        Property
        Returns the parameter names.
        """
        return list(self.__values)

    @property
    def size(self) -> int:
        """
        Property
        Returns the total number of scalar weights.
        """
        return int(sum(value.size for value in self.__values.values()))

    @property
    def values(self) -> 'OrderedDict[str, numpy.ndarray]':
        """
        Property
        Returns the live name to array map.
        """
        return self.__values

    def copy(self) -> 'clParamImportance':
        """
        Returns an independent copy.
        """
        return clParamImportance(self.__values, self.__count)

# end class

class clNeuronImportance:
    """
    Per-neuron importance (alpha), one vector per trunk layer.
    """

    __slots__ = ['__layers']

    def __init__(self, layers: List[numpy.ndarray]):
        """
        Constructor copies the delivered vectors.
        """
        self.__layers = [numpy.array(layer, dtype = numpy.float64).reshape(-1) for layer in layers]
        for layer in self.__layers:
            if not numpy.all(numpy.isfinite(layer)) or numpy.any(layer < 0):
                raise ValueError('Neuron importance must be finite and non-negative')

    @staticmethod
    def zeros(net: clNetwork) -> 'clNeuronImportance':
        """
        Returns all-zero neuron importance for every trunk layer of net.
        """
        return clNeuronImportance([numpy.zeros(layer.outputs) for layer in net.trunk])

    @property
    def layers(self) -> List[numpy.ndarray]:
        """
        Property
        Returns the per-layer vectors.
        """
        return self.__layers

    def merge(self, other: 'clNeuronImportance') -> 'clNeuronImportance':
        """
        Returns the elementwise maximum of both importances, so neurons
        once important stay excluded from inhibition.
        """
        if [layer.shape for layer in self.__layers] != [layer.shape for layer in other.layers]:
            raise ValueError('Neuron importance shapes differ')
        return clNeuronImportance([numpy.maximum(mine, theirs) for mine, theirs in zip(self.__layers, other.layers)])

# end class

class clImportance:
    """
    clImportance estimates parameter and neuron importance, accumulates
    estimates, and evaluates the quadratic consolidation penalty.
    """

    modes = ('loss_grad', 'function_grad')
    rules = ('cma', 'decay')

    # Defines per-layer representation statistics: the mean activation of
    # every neuron and the fraction of activations at (near) zero.

    activationStats = \
        NamedTuple(
        'activationStats',
        [
            ('mean', List[numpy.ndarray]),
            ('sparsity', List[float])
        ])

    def __init__(self):
        """
        clImportance Constructor
        """
        pass

    def __keep(self, grads: Dict[str, numpy.ndarray], includeHead: bool) -> 'OrderedDict[str, numpy.ndarray]':
        return OrderedDict((name, value) for name, value in grads.items()
                           if includeHead or name.startswith('trunk.'))

    def mas(self, net: clNetwork, head: int, inputs: numpy.ndarray, includeHead: bool = False) -> clParamImportance:
        """
        Returns Omega_ij = mean_n | d ||f(x_n)||^2 / d theta_ij | where f is
        the pre-softmax output of the head. Labels are not needed.
        Head parameters are included only when includeHead is set.
        """
        logits, trace = net.forward(head, inputs)
        count = logits.shape[0]
        grads = net.backward(trace, {head: 2.0 * logits}, None, 'abs')
        return clParamImportance(OrderedDict((name, value / count)
                                             for name, value in self.__keep(grads.params, includeHead).items()))

    def ewc(self, net: clNetwork, head: int, batch, includeHead: bool = False) -> clParamImportance:
        """
        Returns the diagonal empirical Fisher
        Omega_ij = mean_n (d log p(y_n | x_n) / d theta_ij)^2.
        """
        logits, trace = net.forward(head, batch.inputs)
        count = logits.shape[0]
        dense = numpy.zeros_like(logits)
        dense[numpy.arange(count), batch.labels] = 1.0
        grads = net.backward(trace, {head: softmax(logits) - dense}, None, 'square')
        return clParamImportance(OrderedDict((name, value / count)
                                             for name, value in self.__keep(grads.params, includeHead).items()))

    def neurons(self, net: clNetwork, head: int, batch, mode: str = 'loss_grad') -> clNeuronImportance:
        """
        Returns alpha_j = mean_n |g_j(x_n)| for every trunk neuron, where
        g_j is the derivative of the per-sample loss (loss_grad) or of
        ||f(x_n)||^2 (function_grad) with respect to the pre-activation out_j.
        """
        if mode not in self.modes: raise ValueError('Unknown neuron importance mode {}'.format(mode))
        inputs = batch.inputs if hasattr(batch, 'inputs') else batch
        logits, trace = net.forward(head, inputs)
        count = logits.shape[0]
        if mode == 'loss_grad':
            if not hasattr(batch, 'labels'): raise ValueError('loss_grad neuron importance needs labels')
            dense = numpy.zeros_like(logits)
            dense[numpy.arange(count), batch.labels] = 1.0
            dLogits = softmax(logits) - dense
        else:
            dLogits = 2.0 * logits
        grads = net.backward(trace, {head: dLogits})
        return clNeuronImportance([numpy.abs(layer).sum(axis = 0) / count for layer in grads.neurons])

    def accumulate(self, acc: clParamImportance, new: clParamImportance, rule: str = 'cma') -> clParamImportance:
        """
        Folds a new estimate into the accumulator in place and returns it.
        cma: acc <- (acc * k + new) / (k + 1) with k the estimates so far.
        decay: acc <- (acc + new) / 2.
        The first estimate is taken as is under both rules.
        """
        if rule not in self.rules: raise ValueError('Unknown accumulation rule {}'.format(rule))
        if acc.names != new.names:
            raise ValueError('Importance shapes differ: {} vs {}'.format(acc.names, new.names))
        for name in acc.names:
            if acc.values[name].shape != new.values[name].shape:
                raise ValueError('Importance shape mismatch on {}'.format(name))
        k = acc.count
        for name, value in new.values.items():
            if k == 0: acc.values[name] = value.copy()
            elif rule == 'cma': acc.values[name] = (acc.values[name] * k + value) / (k + 1)
            else: acc.values[name] = (acc.values[name] + value) / 2.0
        acc.count = k + 1
        logger.debug('Omega estimate %d folded by %s, largest entry %.3g', acc.count, rule,
                     max((float(numpy.max(value, initial = 0.0)) for value in acc.values.values()), default = 0.0))
        return acc

    def penalty(self, net: clNetwork, snapshot: Dict[str, numpy.ndarray], omega: clParamImportance,
                lam: float, heads: Iterable[int] = ()) -> Tuple[float, 'OrderedDict[str, numpy.ndarray]']:
        """
        Returns lam * sum Omega (theta - theta*)^2 over the parameters named
        in omega and the local gradient 2 lam Omega (theta - theta*).
        """
        if lam < 0: raise ValueError('Penalty weight must be non-negative')
        live = net.parameters(heads)
        value = 0.0
        grads = OrderedDict()
        for name, weight in omega.values.items():
            if name not in live: raise ValueError('Network has no parameter {}'.format(name))
            delta = live[name] - snapshot[name]
            value += float(numpy.sum(weight * delta ** 2))
            grads[name] = 2.0 * lam * weight * delta
        return lam * value, grads

    def anchor(self, net: clNetwork, snapshot: Dict[str, numpy.ndarray], omega: clParamImportance,
               lam: float, lr: float, heads: Iterable[int] = ()) -> clNetwork:
        """
        Applies the penalty as an implicit step after the data step:
        theta <- (theta + c theta*) / (1 + c) with c = lr 2 lam Omega.
        The step never overshoots theta*, so any lam is stable and a very
        large lam holds every important parameter at theta*.
        Returns the network.
        """
        if lam < 0: raise ValueError('Penalty weight must be non-negative')
        if not lr > 0: raise ValueError('Learning rate must be positive, got {}'.format(lr))
        live = net.parameters(heads)
        for name in omega.names:
            if name not in live: raise ValueError('Network has no parameter {}'.format(name))
        moved = 0.0
        for name, weight in omega.values.items():
            stiffness = 2.0 * lr * lam * weight
            pulled = (live[name] + stiffness * snapshot[name]) / (1.0 + stiffness)
            moved = max(moved, float(numpy.max(numpy.abs(pulled - live[name]), initial = 0.0)))
            live[name][...] = pulled
        logger.debug('Anchor step moved parameters by at most %.3g', moved)
        return net

    def freeCapacity(self, omega: clParamImportance, threshold: float = 1e-2) -> float:
        """
        Returns the fraction of parameters whose importance is below threshold.
        """
        if omega.size == 0: return 1.0
        below = sum(int(numpy.sum(value < threshold)) for value in omega.values.values())
        return below / omega.size

    def activations(self, net: clNetwork, inputs: numpy.ndarray, tolerance: float = 1e-6) -> activationStats:
        """
        Returns the mean activation per neuron and the fraction of
        activations below tolerance for every trunk layer.
        """
        trace = net.features(inputs)
        return self.activationStats([post.mean(axis = 0) for post in trace.post],
                                    [float(numpy.mean(numpy.abs(post) < tolerance)) for post in trace.post])

# end class
