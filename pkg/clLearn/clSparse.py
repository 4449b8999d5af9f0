import numpy

from collections import OrderedDict
from typing import Dict, Iterable, NamedTuple, Tuple

from .clNetwork import clNetwork

# Registry of regularizer kinds: kind -> (method name, target).
# Representation kinds act on trunk post-activations H_l,
# parameter kinds act on the trainable parameters.

REGULARIZERS = OrderedDict()

def regularizer(kind: str, target: str):
    def register(method):
        REGULARIZERS[kind] = (method.__name__, target)
        return method
    return register

class clSparse:
    """
    clSparse holds the representation regularizers: neural inhibition
    (SNI), its Gaussian-localized (SLNI) and importance-discounted
    (SNID, SLNID) forms, and the L1-Rep, DeCov, L1-Param and weight decay
    baselines. Every regularizer returns its value and the gradient of
    that value with respect to its argument.
    """

    # Defines a regularizer configuration. sigma_scale is a fraction of
    # the layer width J, so sigma = sigma_scale * J.

    regConfig = \
        NamedTuple(
        'regConfig',
        [
            ('kind', str),
            ('lam', float),
            ('sigma_scale', float)
        ])

    def __init__(self):
        """
        clSparse Constructor
        """
        pass

    @staticmethod
    def kinds() -> Tuple[str, ...]:
        """
        Returns every registered regularizer kind.
        """
        return tuple(REGULARIZERS)

    def config(self, kind: str, lam: float = 1e-4, sigmaScale: float = 1.0 / 6.0) -> regConfig:
        """
        Returns a validated regularizer configuration.
        """
        if kind not in REGULARIZERS: raise ValueError('Unknown regularizer {}'.format(kind))
        if lam < 0: raise ValueError('Regularizer weight must be non-negative')
        if not sigmaScale > 0: raise ValueError('sigma_scale must be positive')
        return self.regConfig(kind, float(lam), float(sigmaScale))

    def gaussianWeight(self, j, k, sigma: float):
        """
        Returns exp(-(j - k)^2 / (2 sigma^2)) for neuron indices j and k.
        """
        if not sigma > 0: raise ValueError('sigma must be positive')
        return numpy.exp(-(numpy.asarray(j, dtype = numpy.float64) - k) ** 2 / (2.0 * sigma ** 2))

    def pairWeights(self, width: int, sigma: float = None, alpha: numpy.ndarray = None) -> numpy.ndarray:
        """
        Returns the symmetric [J x J] pair weight matrix with a zero diagonal:
        one for plain inhibition, the Gaussian weight when sigma is given,
        times exp(-(alpha_j + alpha_k)) when alpha is given.
        """
        index = numpy.arange(width)
        if sigma is None: weights = numpy.ones((width, width))
        else: weights = self.gaussianWeight(index[:, None], index[None, :], sigma)
        if alpha is not None:
            alpha = numpy.asarray(alpha, dtype = numpy.float64).reshape(-1)
            if alpha.shape[0] != width:
                raise ValueError('Neuron importance has {} entries for a layer of {}'.format(alpha.shape[0], width))
            weights = weights * numpy.exp(-(alpha[:, None] + alpha[None, :]))
        numpy.fill_diagonal(weights, 0.0)
        return weights

    def __inhibition(self, H: numpy.ndarray, weights: numpy.ndarray) -> Tuple[float, numpy.ndarray]:
        """
        Returns (1/N) sum_n sum_{j<k} w_jk h_j h_k and its gradient
        (1/N) sum_{k != j} w_jk h_k.
        """
        H = numpy.asarray(H, dtype = numpy.float64)
        count = H.shape[0]
        coupled = H @ weights
        return float(numpy.sum(coupled * H) / (2.0 * count)), coupled / count

    @regularizer('sni', 'representation')
    def sni(self, H: numpy.ndarray) -> Tuple[float, numpy.ndarray]:
        """
        Sparse coding through neural inhibition: every pair of
        co-active neurons is penalized once.
        """
        return self.__inhibition(H, self.pairWeights(H.shape[1]))

    @regularizer('snid', 'representation')
    def snid(self, H: numpy.ndarray, alpha: numpy.ndarray) -> Tuple[float, numpy.ndarray]:
        """
        Neural inhibition discounted by neuron importance, without locality.
        """
        return self.__inhibition(H, self.pairWeights(H.shape[1], None, alpha))

    @regularizer('slni', 'representation')
    def slni(self, H: numpy.ndarray, sigma: float) -> Tuple[float, numpy.ndarray]:
        """
        Neural inhibition with pairs weighted by a Gaussian of their index distance.
        """
        return self.__inhibition(H, self.pairWeights(H.shape[1], sigma))

    @regularizer('slnid', 'representation')
    def slnid(self, H: numpy.ndarray, alpha: numpy.ndarray, sigma: float) -> Tuple[float, numpy.ndarray]:
        """
        Local neural inhibition discounted by neuron importance: pairs
        holding an important neuron are excluded from the penalty.
        """
        return self.__inhibition(H, self.pairWeights(H.shape[1], sigma, alpha))

    @regularizer('decov', 'representation')
    def decov(self, H: numpy.ndarray) -> Tuple[float, numpy.ndarray]:
        """
        Sum of the squared off-diagonal batch covariances of the activations.
        """
        H = numpy.asarray(H, dtype = numpy.float64)
        count = H.shape[0]
        centered = H - H.mean(axis = 0, keepdims = True)
        covariance = centered.T @ centered / count
        offDiagonal = covariance - numpy.diag(numpy.diag(covariance))
        value = float(numpy.sum(offDiagonal ** 2))
        # centered columns sum to zero, so the mean term of the chain rule vanishes
        return value, 4.0 * centered @ offDiagonal / count

    @regularizer('l1_rep', 'representation')
    def l1Rep(self, H: numpy.ndarray) -> Tuple[float, numpy.ndarray]:
        """
        Batch mean of the L1 norm of the activations; the subgradient at 0 is 0.
        """
        H = numpy.asarray(H, dtype = numpy.float64)
        count = H.shape[0]
        return float(numpy.sum(numpy.abs(H)) / count), numpy.sign(H) / count

    @regularizer('l1_param', 'parameter')
    def l1Param(self, net: clNetwork, heads: Iterable[int] = ()) -> Tuple[float, 'OrderedDict[str, numpy.ndarray]']:
        """
        L1 norm of the trainable parameters; the subgradient at 0 is 0.
        """
        params = net.parameters(heads)
        value = float(sum(numpy.sum(numpy.abs(param)) for param in params.values()))
        return value, OrderedDict((name, numpy.sign(param)) for name, param in params.items())

    @regularizer('l2_wd', 'parameter')
    def l2Decay(self, net: clNetwork, heads: Iterable[int] = ()) -> Tuple[float, 'OrderedDict[str, numpy.ndarray]']:
        """
        Weight decay: half the squared L2 norm of the trainable parameters.
        """
        params = net.parameters(heads)
        value = float(sum(0.5 * numpy.sum(param ** 2) for param in params.values()))
        return value, OrderedDict((name, param.copy()) for name, param in params.items())

    def layer(self, config: regConfig, H: numpy.ndarray, alpha: numpy.ndarray = None) -> Tuple[float, numpy.ndarray]:
        """
        Evaluates a representation regularizer on one layer's activations,
        unweighted. Missing neuron importance counts as zero.
        """
        method, target = REGULARIZERS[config.kind]
        if target != 'representation': raise ValueError('{} does not act on activations'.format(config.kind))
        width = H.shape[1]
        if alpha is None: alpha = numpy.zeros(width)
        sigma = config.sigma_scale * width
        if config.kind == 'sni': return self.sni(H)
        if config.kind == 'snid': return self.snid(H, alpha)
        if config.kind == 'slni': return self.slni(H, sigma)
        if config.kind == 'slnid': return self.slnid(H, alpha, sigma)
        return getattr(self, method)(H)

    def regularize(self, config: regConfig, net: clNetwork, trace, heads: Iterable[int] = (),
                   alpha = None) -> Tuple[float, Dict[int, numpy.ndarray], 'OrderedDict[str, numpy.ndarray]']:
        """
        Returns lam times the regularizer summed over every trunk layer,
        with gradients split into trunk activation gradients (by layer
        index) and parameter gradients (by parameter name).
        alpha, when given, is a clNeuronImportance.
        """
        method, target = REGULARIZERS[config.kind]
        if target == 'parameter':
            value, grads = getattr(self, method)(net, heads)
            return config.lam * value, {}, OrderedDict((name, config.lam * grad) for name, grad in grads.items())
        value = 0.0
        activationGrads = {}
        for index, H in enumerate(trace.post):
            layerAlpha = alpha.layers[index] if alpha is not None else None
            layerValue, layerGrad = self.layer(config, H, layerAlpha)
            value += layerValue
            activationGrads[index] = config.lam * layerGrad
        return config.lam * value, activationGrads, OrderedDict()

# end class
