import numpy

from collections import OrderedDict
from typing import Dict, Iterable, List, NamedTuple, Tuple

from .clLayer import clLayer, logSoftmax, softmax

class clNetwork:
    """
    class clNetwork
    A dense feed-forward network made of a shared trunk of hidden layers
    and a map of task heads. The head output is classified with a softmax
    at loss time only; heads are usually identity layers producing logits.

    Current assumptions and limitations:

    * Batches are row-major: inputs are [N x D], every activation [N x J].

    * All parameters and activations are 64-bit floats.

    * Reverse mode is written out by hand per layer; gradients are exact,
      not approximated.
    """

    losses = ('softmax_xent', 'mse')
    reductions = ('sum', 'abs', 'square')

    # Defines the record of one forward pass through the trunk:
    # the inputs, the pre-activations out_i and post-activations h_i
    # of every trunk layer, and the logits of the evaluated head if any.

    trace = \
        NamedTuple(
        'trace',
        [
            ('inputs', numpy.ndarray),
            ('pre', List[numpy.ndarray]),
            ('post', List[numpy.ndarray]),
            ('head', int),
            ('logits', numpy.ndarray)
        ])

    # Defines a gradient set: parameter gradients keyed by parameter name
    # and pre-activation gradients dJ/dout per trunk layer.

    gradients = \
        NamedTuple(
        'gradients',
        [
            ('params', Dict[str, numpy.ndarray]),
            ('neurons', List[numpy.ndarray])
        ])

    __slots__ = ['__heads', '__seed', '__trunk']

    def __init__(self, trunk: List[clLayer], heads: Dict[int, clLayer] = None, seed: int = 0):
        """
        Constructor checks that the trunk layer dimensions chain and
        that every head reads the last trunk output.
        """
        if not trunk: raise ValueError('A network needs at least one trunk layer')
        for lower, upper in zip(trunk[:-1], trunk[1:]):
            if upper.inputs != lower.outputs:
                raise ValueError('Trunk dimensions do not chain: {} then {}'.format(lower.shape, upper.shape))
        self.__trunk = list(trunk)
        self.__heads = OrderedDict()
        self.__seed = seed
        for task, layer in sorted((heads or {}).items()):
            self.__attach(task, layer)

    def __attach(self, task: int, layer: clLayer):
        """
        Registers a head after checking its input width.
        """
        if layer.inputs != self.features_width:
            raise ValueError('Head {} reads {} features but the trunk emits {}'.format(task, layer.inputs, self.features_width))
        self.__heads[task] = layer

    @staticmethod
    def glorot(rng: numpy.random.Generator, fanOut: int, fanIn: int) -> numpy.ndarray:
        """
        Returns a [fanOut x fanIn] matrix drawn from uniform(-a, a)
        with a = sqrt(6 / (fanIn + fanOut)).
        """
        limit = numpy.sqrt(6.0 / (fanIn + fanOut))
        return rng.uniform(-limit, limit, size = (fanOut, fanIn))

    @staticmethod
    def build(layerDims: List[int], activation: str = 'relu', headDims: Dict[int, int] = None, seed: int = 0) -> 'clNetwork':
        """
        Returns a network whose trunk chains the delivered layer widths,
        with one identity head per entry of headDims.
        Weights are Glorot uniform, biases zero. The trunk draws from a
        generator seeded with (seed, 0) and each head from (seed, 1, task)
        so that heads added later match heads built up front.
        """
        if len(layerDims) < 2:
            raise ValueError('layer_dims needs at least an input and one hidden width, got {}'.format(list(layerDims)))
        if any(int(dim) < 1 for dim in layerDims): raise ValueError('Layer widths must be positive')
        if seed < 0: raise ValueError('Seed must be non-negative')
        rng = numpy.random.default_rng([seed, 0])
        trunk = []
        for fanIn, fanOut in zip(layerDims[:-1], layerDims[1:]):
            trunk.append(clLayer(clNetwork.glorot(rng, int(fanOut), int(fanIn)), None, activation))
        network = clNetwork(trunk, None, seed)
        for task, width in sorted((headDims or {}).items()):
            network.addHead(task, width)
        return network

    @property
    def features_width(self) -> int:
        """
        Property
        Returns the width of the last trunk layer.
        """
        return self.__trunk[-1].outputs

    @property
    def heads(self) -> Dict[int, clLayer]:
        """
        Property
        Returns the head map in task order.
        """
        return self.__heads

    @property
    def input_width(self) -> int:
        """
        Property
        Returns the input dimension D.
        """
        return self.__trunk[0].inputs

    @property
    def seed(self) -> int:
        """
        Property
        Returns the construction seed.
        """
        return self.__seed

    @property
    def trunk(self) -> List[clLayer]:
        """
        Property
        Returns the trunk layers in order.
        """
        return self.__trunk

    def addHead(self, task: int, width: int, seed: int = None) -> clLayer:
        """
        Creates and attaches a Glorot-initialized identity head for a task.
        Returns the new head.
        """
        if task in self.__heads: raise ValueError('Head {} already exists'.format(task))
        if width < 1: raise ValueError('Head width must be positive')
        seed = self.__seed if seed is None else seed
        rng = numpy.random.default_rng([seed, 1, task])
        head = clLayer(self.glorot(rng, width, self.features_width), None, 'identity')
        self.__attach(task, head)
        return head

    def copy(self) -> 'clNetwork':
        """
        Returns an independent deep copy.
        """
        return clNetwork([layer.copy() for layer in self.__trunk],
                         {task: layer.copy() for task, layer in self.__heads.items()},
                         self.__seed)

    def head(self, task: int) -> clLayer:
        """
        Returns the head of a task.
        """
        if task not in self.__heads: raise ValueError('Unknown head {}'.format(task))
        return self.__heads[task]

    def parameters(self, heads: Iterable[int] = ()) -> 'OrderedDict[str, numpy.ndarray]':
        """
        Returns live references to the trunk parameters followed by the
        parameters of the listed heads, keyed trunk.<i>.weights,
        trunk.<i>.bias, head.<task>.weights, head.<task>.bias.
        """
        params = OrderedDict()
        for index, layer in enumerate(self.__trunk):
            params['trunk.{}.weights'.format(index)] = layer.weights
            params['trunk.{}.bias'.format(index)] = layer.bias
        for task in heads:
            layer = self.head(task)
            params['head.{}.weights'.format(task)] = layer.weights
            params['head.{}.bias'.format(task)] = layer.bias
        return params

    def snapshot(self, heads: Iterable[int] = ()) -> 'OrderedDict[str, numpy.ndarray]':
        """
        Returns copies of the parameters returned by parameters().
        """
        return OrderedDict((name, value.copy()) for name, value in self.parameters(heads).items())

    def features(self, inputs: numpy.ndarray) -> trace:
        """
        Runs the trunk on a batch and returns a trace without head output.
        """
        inputs = numpy.asarray(inputs, dtype = numpy.float64)
        if inputs.ndim != 2 or inputs.shape[1] != self.input_width:
            raise ValueError('Expected inputs [N x {}], got {}'.format(self.input_width, inputs.shape))
        pre = []
        post = []
        values = inputs
        for layer in self.__trunk:
            out = layer.pre(values)
            values = layer.activate(out)
            pre.append(out)
            post.append(values)
        return self.trace(inputs, pre, post, None, None)

    def headLogits(self, task: int, trace: trace) -> numpy.ndarray:
        """
        Returns the output of a head applied to the features of a trace.
        """
        layer = self.head(task)
        return layer.activate(layer.pre(trace.post[-1]))

    def forward(self, task: int, inputs: numpy.ndarray) -> Tuple[numpy.ndarray, trace]:
        """
        Returns the logits O_task(trunk(x)) and the full trace.
        """
        self.head(task)
        trace = self.features(inputs)
        logits = self.headLogits(task, trace)
        return logits, trace._replace(head = task, logits = logits)

    @staticmethod
    def dataLoss(logits: numpy.ndarray, targets, loss: str = 'softmax_xent') -> Tuple[float, numpy.ndarray]:
        """
        Returns the batch-mean data loss and its gradient with respect to
        the logits. Targets are class indices; mse also accepts a target
        matrix shaped like the logits.
        """
        if loss not in clNetwork.losses: raise ValueError('Unknown loss {}'.format(loss))
        count, classes = logits.shape
        targets = numpy.asarray(targets)
        if targets.ndim == 2:
            if loss != 'mse': raise ValueError('Target matrices are only valid for mse')
            if targets.shape != logits.shape: raise ValueError('Target matrix shape mismatch')
            dense = targets.astype(numpy.float64)
        else:
            targets = targets.astype(numpy.int64).reshape(-1)
            if targets.shape[0] != count:
                raise ValueError('Got {} targets for {} samples'.format(targets.shape[0], count))
            if count and (targets.max() >= classes or targets.min() < 0):
                raise ValueError('Target class {} outside head width {}'.format(int(targets.max()), classes))
            dense = numpy.zeros_like(logits)
            dense[numpy.arange(count), targets] = 1.0
        if loss == 'softmax_xent':
            logProbs = logSoftmax(logits)
            value = -numpy.sum(dense * logProbs) / count
            grad = (softmax(logits) - dense) / count
        else:
            residual = logits - dense
            value = numpy.sum(residual ** 2) / count
            grad = 2.0 * residual / count
        return float(value), grad

    def backward(self, trace: trace, headGrads: Dict[int, numpy.ndarray],
                 activationGrads: Dict[int, numpy.ndarray] = None, reduce: str = 'sum') -> gradients:
        """
        Back-propagates gradients delivered on the outputs of one or more
        heads, plus optional gradients on trunk post-activations h_l, and
        returns the gradient set.
        With reduce='sum' parameter gradients are the usual batch sums.
        With 'abs' or 'square' they are sums of the absolute values or
        squares of the per-sample gradients, which for a dense layer are
        the outer products of the per-sample delta and layer input.
        """
        if reduce not in self.reductions: raise ValueError('Unknown reduction {}'.format(reduce))
        activationGrads = activationGrads or {}
        features = trace.post[-1]
        dPost = numpy.zeros_like(features)
        headParams = OrderedDict()
        for task, dLogits in sorted(headGrads.items()):
            layer = self.head(task)
            out = layer.pre(features)
            dOut = dLogits * layer.derivative(out, layer.activate(out))
            headParams['head.{}.weights'.format(task)], headParams['head.{}.bias'.format(task)] = \
                self.__reduce(dOut, features, reduce)
            dPost = dPost + dOut @ layer.weights
        trunkParams = {}
        neurons = [None] * len(self.__trunk)
        for index in reversed(range(len(self.__trunk))):
            layer = self.__trunk[index]
            if index in activationGrads: dPost = dPost + activationGrads[index]
            dOut = dPost * layer.derivative(trace.pre[index], trace.post[index])
            neurons[index] = dOut
            layerInputs = trace.inputs if index == 0 else trace.post[index - 1]
            trunkParams['trunk.{}.weights'.format(index)], trunkParams['trunk.{}.bias'.format(index)] = \
                self.__reduce(dOut, layerInputs, reduce)
            dPost = dOut @ layer.weights
        params = OrderedDict()
        for index in range(len(self.__trunk)):
            params['trunk.{}.weights'.format(index)] = trunkParams['trunk.{}.weights'.format(index)]
            params['trunk.{}.bias'.format(index)] = trunkParams['trunk.{}.bias'.format(index)]
        params.update(headParams)
        return self.gradients(params, neurons)

    @staticmethod
    def __reduce(dOut: numpy.ndarray, layerInputs: numpy.ndarray, reduce: str) -> Tuple[numpy.ndarray, numpy.ndarray]:
        if reduce == 'abs':
            return numpy.abs(dOut).T @ numpy.abs(layerInputs), numpy.abs(dOut).sum(axis = 0)
        if reduce == 'square':
            return (dOut ** 2).T @ (layerInputs ** 2), (dOut ** 2).sum(axis = 0)
        return dOut.T @ layerInputs, dOut.sum(axis = 0)

    def lossAndBackward(self, task: int, inputs: numpy.ndarray, targets, loss: str = 'softmax_xent',
                        extraActivationGrads: Dict[int, numpy.ndarray] = None) -> Tuple[float, gradients]:
        """
        Returns the batch-mean data loss and the exact gradients of that
        loss plus any regularizer contributions injected on trunk
        post-activations. The returned value holds the data loss only.
        """
        logits, trace = self.forward(task, inputs)
        value, dLogits = self.dataLoss(logits, targets, loss)
        if extraActivationGrads:
            for index, grad in extraActivationGrads.items():
                if grad.shape != trace.post[index].shape:
                    raise ValueError('Activation gradient {} has shape {}, expected {}'.format(index, grad.shape, trace.post[index].shape))
        return value, self.backward(trace, {task: dLogits}, extraActivationGrads)

    def sgdStep(self, grads: Dict[str, numpy.ndarray], lr: float) -> 'clNetwork':
        """
        Applies theta <- theta - lr * grad in place to every parameter
        named in grads. Grads may be a gradient set or a name map.
        Returns the network.
        """
        if not lr > 0: raise ValueError('Learning rate must be positive, got {}'.format(lr))
        if isinstance(grads, self.gradients): grads = grads.params
        live = self.parameters(sorted(self.__heads))
        for name, grad in grads.items():
            if not numpy.all(numpy.isfinite(grad)): raise ValueError('Non-finite gradient for {}'.format(name))
            if name not in live: raise ValueError('Unknown parameter {}'.format(name))
        for name, grad in grads.items():
            live[name] -= lr * grad
        return self

# end class

def addGradients(target: Dict[str, numpy.ndarray], extra: Dict[str, numpy.ndarray], scale: float = 1.0) -> Dict[str, numpy.ndarray]:
    """
    Adds scale * extra into target name by name, creating missing
    entries, and returns target.
    """
    for name, value in extra.items():
        if name in target: target[name] = target[name] + scale * value
        else: target[name] = scale * value
    return target
