import logging
import numpy

from typing import Dict, List, NamedTuple, Tuple, Union

from .clLayer import clLayer, logSoftmax, softmax
from .clNetwork import clNetwork

logger = logging.getLogger(__name__)

class clAutoencoder:
    """
    An undercomplete autoencoder over trunk features:
    r(x) = W_dec sigmoid(W_enc x + b_enc) + b_dec.
    Once trained for a task it is frozen.
    """

    __slots__ = ['__decoder', '__encoder', '__task']

    def __init__(self, encoder: clLayer, decoder: clLayer, task: int = 0):
        """
        Constructor checks the code is narrower than the features.
        """
        if encoder.activation != 'sigmoid': raise ValueError('The code activation is the sigmoid')
        if decoder.inputs != encoder.outputs or decoder.outputs != encoder.inputs:
            raise ValueError('Encoder {} and decoder {} do not mirror'.format(encoder.shape, decoder.shape))
        if encoder.outputs >= encoder.inputs:
            raise ValueError('Code size {} must be below the feature size {}'.format(encoder.outputs, encoder.inputs))
        self.__encoder = encoder
        self.__decoder = decoder
        self.__task = task

    @staticmethod
    def build(features: int, code: int, task: int = 0, seed: int = 0) -> 'clAutoencoder':
        """
        Returns a Glorot-initialized autoencoder.
        """
        if code >= features:
            raise ValueError('Code size {} must be below the feature size {}'.format(code, features))
        rng = numpy.random.default_rng([seed, 7, task])
        encoder = clLayer(clNetwork.glorot(rng, code, features), None, 'sigmoid')
        decoder = clLayer(clNetwork.glorot(rng, features, code), None, 'identity')
        return clAutoencoder(encoder, decoder, task)

    @property
    def code_size(self) -> int:
        """
        Property
        Returns the code width.
        """
        return self.__encoder.outputs

    @property
    def decoder(self) -> clLayer:
        """
        Property
        Returns the decoding layer.
        """
        return self.__decoder

    @property
    def encoder(self) -> clLayer:
        """
        Property
        Returns the encoding layer.
        """
        return self.__encoder

    @property
    def task(self) -> int:
        """
        Property
        Returns the task the autoencoder was trained for.
        """
        return self.__task

    def encode(self, features: numpy.ndarray) -> numpy.ndarray:
        """
        Returns the codes sigmoid(W_enc x + b_enc).
        """
        return self.__encoder.activate(self.__encoder.pre(features))

    def reconstruct(self, features: numpy.ndarray) -> numpy.ndarray:
        """
        Returns r(x).
        """
        return self.__decoder.pre(self.encode(features))

    def reconstructionError(self, features: numpy.ndarray) -> float:
        """
        Returns the batch mean of ||r(x) - x||_2.
        """
        return float(numpy.mean(numpy.linalg.norm(self.reconstruct(features) - features, axis = 1)))

# end class

class clDistill:
    """
    clDistill implements knowledge distillation (LwF), autoencoder
    training, target and code recording, and the EBLL objective.
    """

    modes = ('lwf', 'ebll')
    reconstructions = ('norm', 'squared')

    # Defines the distillation settings. alpha is the code penalty weight,
    # one float for every old task or a map from task to weight.

    distillConfig = \
        NamedTuple(
        'distillConfig',
        [
            ('mode', str),
            ('temperature', float),
            ('alpha', Union[float, Dict[int, float]]),
            ('beta', float),
            ('code_size', int),
            ('ae_epochs', int),
            ('ae_lr', float),
            ('reconstruction', str)
        ])

    # Defines what is recorded for an old task before training a new one:
    # the old head's logits and the old autoencoder's codes on the new
    # task's training inputs. Codes are None under LwF.

    taskRecord = \
        NamedTuple(
        'taskRecord',
        [
            ('task_id', int),
            ('targets', numpy.ndarray),
            ('codes', numpy.ndarray)
        ])

    def __init__(self):
        """
        clDistill Constructor
        """
        pass

    def config(self, mode: str = 'ebll', temperature: float = 2.0, alpha = 1.0, beta: float = 1e-3,
               codeSize: int = 32, aeEpochs: int = 20, aeLr: float = 0.01, reconstruction: str = 'norm') -> distillConfig:
        """
        Returns a validated distillation configuration.
        """
        if mode not in self.modes: raise ValueError('Unknown distillation mode {}'.format(mode))
        if not temperature > 0: raise ValueError('Temperature must be positive, got {}'.format(temperature))
        alphas = alpha.values() if isinstance(alpha, dict) else [alpha]
        if any(value < 0 for value in alphas): raise ValueError('alpha must be non-negative')
        if beta < 0: raise ValueError('beta must be non-negative')
        if reconstruction not in self.reconstructions: raise ValueError('Unknown reconstruction {}'.format(reconstruction))
        return self.distillConfig(mode, float(temperature), alpha, float(beta), int(codeSize), int(aeEpochs),
                                  float(aeLr), reconstruction)

    def alphaFor(self, config: distillConfig, task: int) -> float:
        """
        Returns the code penalty weight of an old task.
        """
        if isinstance(config.alpha, dict): return float(config.alpha.get(task, 0.0))
        return float(config.alpha)

    def distillation(self, student: numpy.ndarray, teacher: numpy.ndarray, temperature: float) -> Tuple[float, numpy.ndarray]:
        """
        Returns the batch-mean cross-entropy between the temperature
        softened teacher and student distributions, and its gradient with
        respect to the student logits. Raising softmax outputs to 1/tau
        and renormalizing equals a softmax of the logits divided by tau.
        """
        if not temperature > 0: raise ValueError('Temperature must be positive, got {}'.format(temperature))
        student = numpy.asarray(student, dtype = numpy.float64)
        teacher = numpy.asarray(teacher, dtype = numpy.float64)
        if student.shape != teacher.shape:
            raise ValueError('Student {} and teacher {} shapes differ'.format(student.shape, teacher.shape))
        count = student.shape[0]
        soft = softmax(teacher / temperature)
        value = -numpy.sum(soft * logSoftmax(student / temperature)) / count
        grad = (softmax(student / temperature) - soft) / (temperature * count)
        return float(value), grad

    def distillLoss(self, student: numpy.ndarray, teacher: numpy.ndarray, temperature: float) -> float:
        """
        Returns the distillation loss only.
        """
        return self.distillation(student, teacher, temperature)[0]

    def trainAutoencoder(self, frozenNet: clNetwork, head: int, data, codeSize: int, beta: float,
                         epochs: int, lr: float, seed: int = 0, batchSize: int = None,
                         reconstruction: str = 'norm') -> clAutoencoder:
        """
        Trains an autoencoder on the frozen trunk features of data by SGD on
        mean[ beta ||r(F(x)) - F(x)|| + loss(O(r(F(x))), y) ], where O is the
        frozen head. The network is only read.
        """
        if reconstruction not in self.reconstructions: raise ValueError('Unknown reconstruction {}'.format(reconstruction))
        if not lr > 0: raise ValueError('Learning rate must be positive')
        features = frozenNet.features(data.inputs).post[-1]
        autoencoder = clAutoencoder.build(features.shape[1], codeSize, head, seed)
        headLayer = frozenNet.head(head)
        encoder, decoder = autoencoder.encoder, autoencoder.decoder
        total = features.shape[0]
        batchSize = batchSize or total
        for epoch in range(epochs):
            order = numpy.random.default_rng([seed, 8, head, epoch]).permutation(total)
            for start in range(0, total, batchSize):
                rows = order[start:start + batchSize]
                batchFeatures = features[rows]
                count = rows.shape[0]
                codes = autoencoder.encode(batchFeatures)
                residual = decoder.pre(codes) - batchFeatures
                if reconstruction == 'norm':
                    norms = numpy.linalg.norm(residual, axis = 1, keepdims = True)
                    dRecon = beta * numpy.divide(residual, norms, out = numpy.zeros_like(residual), where = norms > 0) / count
                else:
                    dRecon = 2.0 * beta * residual / count
                out = headLayer.pre(residual + batchFeatures)
                _, dLogits = clNetwork.dataLoss(headLayer.activate(out), data.labels[rows])
                dRecon = dRecon + (dLogits * headLayer.derivative(out, headLayer.activate(out))) @ headLayer.weights
                dCodes = dRecon @ decoder.weights
                dPre = dCodes * codes * (1.0 - codes)
                decoder.weights = decoder.weights - lr * dRecon.T @ codes
                decoder.bias = decoder.bias - lr * dRecon.sum(axis = 0)
                encoder.weights = encoder.weights - lr * dPre.T @ batchFeatures
                encoder.bias = encoder.bias - lr * dPre.sum(axis = 0)
            logger.debug('Autoencoder %d epoch %d reconstruction error %.6f', head, epoch,
                         autoencoder.reconstructionError(features))
        logger.info('Trained autoencoder for task %d: code %d, reconstruction error %.6f',
                    head, codeSize, autoencoder.reconstructionError(features))
        return autoencoder

    def autoencoderLoss(self, frozenNet: clNetwork, head: int, data, autoencoder: clAutoencoder,
                        beta: float, reconstruction: str = 'norm') -> float:
        """
        Returns the autoencoder training objective on data.
        """
        features = frozenNet.features(data.inputs).post[-1]
        residual = autoencoder.reconstruct(features) - features
        if reconstruction == 'norm': recon = numpy.mean(numpy.linalg.norm(residual, axis = 1))
        else: recon = numpy.mean(numpy.sum(residual ** 2, axis = 1))
        headLayer = frozenNet.head(head)
        value, _ = clNetwork.dataLoss(headLayer.activate(headLayer.pre(residual + features)), data.labels)
        return float(beta * recon + value)

    def record(self, net: clNetwork, oldTasks: List[int], autoencoders: Dict[int, clAutoencoder],
               inputs: numpy.ndarray, withCodes: bool = True) -> List[taskRecord]:
        """
        Records, for every old task, the old head's logits and the old
        autoencoder's codes on the new task's inputs. Must run before the
        network is updated for the new task.
        """
        if not oldTasks: return []
        trace = net.features(inputs)
        records = []
        for task in oldTasks:
            codes = None
            if withCodes:
                if task not in autoencoders: raise ValueError('No autoencoder recorded for old task {}'.format(task))
                codes = autoencoders[task].encode(trace.post[-1])
            records.append(self.taskRecord(task, net.headLogits(task, trace), codes))
        return records

    def take(self, records: List[taskRecord], rows: numpy.ndarray) -> List[taskRecord]:
        """
        Returns the records restricted to the delivered rows of the new task.
        """
        return [record._replace(targets = record.targets[rows],
                                codes = None if record.codes is None else record.codes[rows])
                for record in records]

    def ebllLoss(self, net: clNetwork, newHead: int, batch, records: List[taskRecord],
                 autoencoders: Dict[int, clAutoencoder], config: distillConfig, trace = None,
                 activationGrads: Dict[int, numpy.ndarray] = None) -> Tuple[float, clNetwork.gradients]:
        """
        Returns the composite objective
        loss(new head) + sum_t distill(old head t, Y*_t)
        + sum_t alpha_t / 2 * mean_n ||sigmoid(W_enc,t F(x)) - C*_t||^2
        and its gradients through the trunk and every involved head.
        Autoencoders stay frozen. Records must align with the batch rows.
        Extra activation gradients, when given, are back-propagated too.
        """
        if trace is None: trace = net.features(batch.inputs)
        features = trace.post[-1]
        count = features.shape[0]
        value, dLogits = clNetwork.dataLoss(net.headLogits(newHead, trace), batch.labels)
        headGrads = {newHead: dLogits}
        grads = dict(activationGrads or {})
        last = len(trace.post) - 1
        dFeatures = numpy.zeros_like(features)
        for record in records:
            if record.targets.shape[0] != count: raise ValueError('Record rows do not align with the batch')
            distill, dOld = self.distillation(net.headLogits(record.task_id, trace), record.targets, config.temperature)
            value += distill
            headGrads[record.task_id] = headGrads.get(record.task_id, 0.0) + dOld
            alpha = self.alphaFor(config, record.task_id)
            if record.codes is None or alpha == 0: continue
            encoder = autoencoders[record.task_id].encoder
            codes = encoder.activate(encoder.pre(features))
            residual = codes - record.codes
            value += 0.5 * alpha * float(numpy.sum(residual ** 2)) / count
            dFeatures += (alpha * residual / count * codes * (1.0 - codes)) @ encoder.weights
        if records and numpy.any(dFeatures): grads[last] = grads.get(last, 0.0) + dFeatures
        return float(value), net.backward(trace, headGrads, grads)

# end class
