import numpy
import traceback

from typing import Tuple

class clLayer():
    """
    Represents a fully connected layer out = W x + b followed by an
    elementwise activation drawn from a closed set.
    Weights are stored [out x in], the bias as a vector of length out.
    """

    activations = ('relu', 'sigmoid', 'identity')

    __slots__ = ['__activation', '__bias', '__weights']

    def __init__(self, weights: numpy.ndarray, bias: numpy.ndarray = None, activation: str = 'relu'):
        """
        Constructor copies the delivered arrays as 64-bit floats.
        A missing bias defaults to zeros.
        """
        weights = numpy.array(weights, dtype = numpy.float64, ndmin = 2)
        if weights.ndim != 2: raise ValueError('Weights must be a matrix, got {} dimensions'.format(weights.ndim))
        if bias is None: bias = numpy.zeros(weights.shape[0])
        bias = numpy.array(bias, dtype = numpy.float64).reshape(-1)
        if bias.shape[0] != weights.shape[0]:
            raise ValueError('Bias length {} does not match {} weight rows'.format(bias.shape[0], weights.shape[0]))
        if activation not in self.activations:
            raise ValueError('Unknown activation {}'.format(activation))
        if not numpy.all(numpy.isfinite(weights)) or not numpy.all(numpy.isfinite(bias)):
            raise ValueError('Layer parameters must be finite')
        self.__weights = weights
        self.__bias = bias
        self.__activation = activation

    @property
    def activation(self) -> str:
        """
        Property
        Returns the activation name.
        """
        return self.__activation

    @property
    def bias(self) -> numpy.ndarray:
        """
        Property
        Returns the live bias vector.
        """
        return self.__bias

    @bias.setter
    def bias(self, value: numpy.ndarray):
        """
        Property
        Replaces the bias vector.
        Restores the previous value on failure.
        """
        try:
            preBias = self.__bias
            value = numpy.array(value, dtype = numpy.float64).reshape(-1)
            if value.shape != preBias.shape: raise ValueError('Bias shape mismatch')
            self.__bias = value
        except Exception:
            self.__bias = preBias
            traceback.print_exc()

    @property
    def inputs(self) -> int:
        """
        Property
        Returns the input width.
        """
        return self.__weights.shape[1]

    @property
    def outputs(self) -> int:
        """
        Property
        Returns the output width.
        """
        return self.__weights.shape[0]

    @property
    def shape(self) -> Tuple[int, int]:
        """
        Property
        Returns (outputs, inputs).
        """
        return self.__weights.shape

    @property
    def weights(self) -> numpy.ndarray:
        """
        Property
        Returns the live weight matrix.
        """
        return self.__weights

    @weights.setter
    def weights(self, value: numpy.ndarray):
        """
        Property
        Replaces the weight matrix.
        Restores the previous value on failure.
        """
        try:
            preWeights = self.__weights
            value = numpy.array(value, dtype = numpy.float64, ndmin = 2)
            if value.shape != preWeights.shape: raise ValueError('Weight shape mismatch')
            self.__weights = value
        except Exception:
            self.__weights = preWeights
            traceback.print_exc()

    def activate(self, out: numpy.ndarray) -> numpy.ndarray:
        """
        Applies the activation to a batch of pre-activations.
        """
        if self.__activation == 'relu': return numpy.maximum(out, 0.0)
        if self.__activation == 'sigmoid': return sigmoid(out)
        return out.copy()

    def derivative(self, out: numpy.ndarray, post: numpy.ndarray) -> numpy.ndarray:
        """
        Returns the elementwise derivative of the activation at out,
        reusing the already computed post-activation where possible.
        The relu derivative at zero is zero.
        """
        if self.__activation == 'relu': return (out > 0).astype(numpy.float64)
        if self.__activation == 'sigmoid': return post * (1.0 - post)
        return numpy.ones_like(out)

    def copy(self) -> 'clLayer':
        """
        Returns an independent copy.
        """
        return clLayer(self.__weights.copy(), self.__bias.copy(), self.__activation)

    def pre(self, inputs: numpy.ndarray) -> numpy.ndarray:
        """
        Returns the pre-activations W x + b for a batch of row inputs [N x in].
        """
        return inputs @ self.__weights.T + self.__bias

# end class

def sigmoid(values: numpy.ndarray) -> numpy.ndarray:
    """
    Numerically stable logistic function.
    """
    values = numpy.asarray(values, dtype = numpy.float64)
    result = numpy.empty_like(values)
    positive = values >= 0
    result[positive] = 1.0 / (1.0 + numpy.exp(-values[positive]))
    expValues = numpy.exp(values[~positive])
    result[~positive] = expValues / (1.0 + expValues)
    return result

def softmax(logits: numpy.ndarray) -> numpy.ndarray:
    """
    Row-wise softmax of a [N x C] matrix.
    """
    shifted = logits - numpy.max(logits, axis = 1, keepdims = True)
    expLogits = numpy.exp(shifted)
    return expLogits / numpy.sum(expLogits, axis = 1, keepdims = True)

def logSoftmax(logits: numpy.ndarray) -> numpy.ndarray:
    """
    Row-wise log softmax of a [N x C] matrix.
    """
    shifted = logits - numpy.max(logits, axis = 1, keepdims = True)
    return shifted - numpy.log(numpy.sum(numpy.exp(shifted), axis = 1, keepdims = True))
