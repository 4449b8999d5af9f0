import logging
import numpy

from collections import OrderedDict
from typing import Dict, List, NamedTuple, Optional

from .clData import clData
from .clDistill import clAutoencoder, clDistill
from .clImportance import clImportance, clNeuronImportance, clParamImportance
from .clMetrics import clMetrics
from .clNetwork import clNetwork, addGradients
from .clSparse import clSparse

logger = logging.getLogger(__name__)

class methodConfig(NamedTuple):
    """
    Configuration of one continual learning method in the
    task-incremental setting.
    """
    importance: str = 'none'
    lam: float = 0.0
    rep_reg: Optional[clSparse.regConfig] = None
    distill: Optional[clDistill.distillConfig] = None
    epochs: int = 10
    lr: float = 0.01
    batch_size: int = 100
    seed: int = 0
    shared_head: bool = False
    omega_rule: str = 'cma'
    importance_samples: Optional[int] = None

class clSequence:
    """
    class clSequence
    Trains a network on a list of tasks one after the other, applying the
    configured method: plain finetuning, MAS or EWC consolidation, a
    representation regularizer from clSparse, LwF distillation or EBLL.
    Omega, theta*, neuron importance and autoencoders are updated at task
    boundaries. After every stage all seen tasks are evaluated.
    """

    importances = ('none', 'mas', 'ewc')

    __clData = clData()
    __clDistill = clDistill()
    __clImportance = clImportance()
    __clSparse = clSparse()

    __slots__ = ['__alpha', '__analysis', '__autoencoders', '__omega', '__snapshot']

    def __init__(self):
        """
        Constructor starts with no consolidated knowledge.
        """
        self.__alpha = None
        self.__analysis = OrderedDict()
        self.__autoencoders = OrderedDict()
        self.__omega = None
        self.__snapshot = None

    @property
    def alpha(self) -> clNeuronImportance:
        """
        Property
        Returns the accumulated neuron importance, None before any boundary.
        """
        return self.__alpha

    @property
    def analysis(self) -> 'OrderedDict[str, object]':
        """
        Property
        Returns the post-sequence analysis: free capacity and
        per-layer activation sparsity after the last task.
        """
        return self.__analysis

    @property
    def autoencoders(self) -> Dict[int, clAutoencoder]:
        """
        Property
        Returns the frozen autoencoders by head.
        """
        return self.__autoencoders

    @property
    def omega(self) -> clParamImportance:
        """
        Property
        Returns the accumulated parameter importance, None when unused.
        """
        return self.__omega

    @property
    def snapshot(self) -> Dict[str, numpy.ndarray]:
        """
        Property
        Returns theta* from the last boundary.
        """
        return self.__snapshot

    def validate(self, method: methodConfig) -> methodConfig:
        """
        Returns the method after checking it is consistent.
        """
        if method.importance not in self.importances: raise ValueError('Unknown importance {}'.format(method.importance))
        if method.lam < 0: raise ValueError('lambda must be non-negative')
        if method.omega_rule not in self.__clImportance.rules: raise ValueError('Unknown omega rule {}'.format(method.omega_rule))
        if method.epochs < 0 or method.batch_size < 1: raise ValueError('epochs and batch_size must be positive')
        if not method.lr > 0: raise ValueError('Learning rate must be positive')
        if method.distill is not None and method.shared_head:
            raise ValueError('Distillation needs one head per task')
        return method

    def __headOf(self, task: clData.taskDataset, method: methodConfig) -> int:
        return 0 if method.shared_head else task.task_id

    def __penaltyHeads(self, method: methodConfig) -> List[int]:
        return [0] if method.shared_head else []

    def evaluate(self, net: clNetwork, head: int, test: clData.labeledBatch, chunk: int = 1000) -> float:
        """
        Returns the fraction of test samples whose largest logit is the label.
        """
        total = test.labels.shape[0]
        if total == 0: raise ValueError('Cannot evaluate on an empty test set')
        correct = 0
        for start in range(0, total, chunk):
            logits, _ = net.forward(head, test.inputs[start:start + chunk])
            correct += int(numpy.sum(numpy.argmax(logits, axis = 1) == test.labels[start:start + chunk]))
        return correct / total

    def __step(self, net: clNetwork, method: methodConfig, inputs: numpy.ndarray, labels: numpy.ndarray,
               heads: numpy.ndarray, records: List[clDistill.taskRecord]) -> float:
        """
        One SGD step on the data loss plus regularizer and distillation
        terms, then the implicit penalty step toward theta*.
        Returns the data loss.
        """
        trace = net.features(inputs)
        activationGrads = {}
        paramGrads = OrderedDict()
        batchHeads = [int(head) for head in numpy.unique(heads)]
        if method.rep_reg is not None:
            _, activationGrads, paramGrads = self.__clSparse.regularize(method.rep_reg, net, trace, batchHeads, self.__alpha)
        if method.distill is not None:
            batch = clData.labeledBatch(inputs, labels)
            value, grads = self.__clDistill.ebllLoss(net, batchHeads[0], batch, records, self.__autoencoders,
                                                      method.distill, trace, activationGrads)
        else:
            count = labels.shape[0]
            value = 0.0
            headGrads = {}
            for head in batchHeads:
                mask = heads == head
                logits = net.headLogits(head, trace)
                headValue, dLogits = clNetwork.dataLoss(logits[mask], labels[mask])
                share = mask.sum() / count
                value += share * headValue
                full = numpy.zeros_like(logits)
                full[mask] = dLogits * share
                headGrads[head] = full
            grads = net.backward(trace, headGrads, activationGrads)
        params = addGradients(OrderedDict(grads.params), paramGrads)
        net.sgdStep(params, method.lr)
        if method.lam > 0 and self.__omega is not None and self.__omega.count > 0:
            self.__clImportance.anchor(net, self.__snapshot, self.__omega, method.lam, method.lr,
                                       self.__penaltyHeads(method))
        return value

    def __train(self, net: clNetwork, method: methodConfig, inputs: numpy.ndarray, labels: numpy.ndarray,
                heads: numpy.ndarray, stage: int, records: List[clDistill.taskRecord]):
        """
        Runs the epochs of one stage. Every epoch reshuffles with a
        generator seeded by (seed, stage, epoch).
        """
        total = labels.shape[0]
        for epoch in range(method.epochs):
            order = numpy.random.default_rng([method.seed, stage, epoch]).permutation(total)
            losses = []
            for start in range(0, total, method.batch_size):
                rows = order[start:start + method.batch_size]
                losses.append(self.__step(net, method, inputs[rows], labels[rows], heads[rows],
                                          self.__clDistill.take(records, rows)))
            logger.debug('Stage %d epoch %d mean loss %.6f', stage, epoch, float(numpy.mean(losses)) if losses else 0.0)

    def __consolidate(self, net: clNetwork, method: methodConfig, task: clData.taskDataset, head: int):
        """
        Task boundary: accumulate Omega and snapshot theta*, merge neuron
        importance for importance-discounted regularizers, and train the
        task's autoencoder under EBLL.
        """
        samples = self.__clData.subset(task.train, method.importance_samples, method.seed)
        if method.importance != 'none':
            if method.importance == 'mas':
                estimate = self.__clImportance.mas(net, head, samples.inputs, method.shared_head)
            else:
                estimate = self.__clImportance.ewc(net, head, samples, method.shared_head)
            if self.__omega is None: self.__omega = clParamImportance.zeros(estimate.values)
            self.__clImportance.accumulate(self.__omega, estimate, method.omega_rule)
            self.__snapshot = net.snapshot(self.__penaltyHeads(method))
            logger.info('Task %d: omega updated (%d estimates, free capacity %.3f)', task.task_id,
                        self.__omega.count, self.__clImportance.freeCapacity(self.__omega))
        if method.rep_reg is not None and method.rep_reg.kind in ('snid', 'slnid'):
            mode = 'function_grad' if method.importance == 'mas' else 'loss_grad'
            self.__alpha = self.__alpha.merge(self.__clImportance.neurons(net, head, samples, mode))
        distill = method.distill
        if distill is not None and distill.mode == 'ebll':
            self.__autoencoders[head] = self.__clDistill.trainAutoencoder(
                net, head, task.train, distill.code_size, distill.beta, distill.ae_epochs, distill.ae_lr,
                method.seed, method.batch_size, distill.reconstruction)

    def __prepare(self, net: clNetwork, tasks: List[clData.taskDataset], method: methodConfig):
        self.validate(method)
        self.__omega = None
        self.__snapshot = None
        self.__alpha = clNeuronImportance.zeros(net)
        self.__autoencoders = OrderedDict()
        self.__analysis = OrderedDict()
        for task in tasks:
            head = self.__headOf(task, method)
            if head not in net.heads: net.addHead(head, task.num_classes)
            elif net.head(head).outputs < task.num_classes:
                raise ValueError('Head {} is narrower than task {} with {} classes'.format(head, task.task_id, task.num_classes))

    def __analyse(self, net: clNetwork, tasks: List[clData.taskDataset], method: methodConfig):
        if not tasks: return
        if self.__omega is not None: self.__analysis['free_capacity'] = self.__clImportance.freeCapacity(self.__omega)
        samples = self.__clData.subset(tasks[-1].test, 1000, method.seed)
        stats = self.__clImportance.activations(net, samples.inputs)
        for index, sparsity in enumerate(stats.sparsity):
            self.__analysis['sparsity_layer_{}'.format(index)] = sparsity

    def runSequence(self, tasks: List[clData.taskDataset], net: clNetwork, method: methodConfig) -> clMetrics:
        """
        Trains the tasks in order and returns the accuracy matrix.
        Missing heads are created from each task's class count.
        """
        self.__prepare(net, tasks, method)
        metrics = clMetrics()
        for stage, task in enumerate(tasks):
            head = self.__headOf(task, method)
            records = []
            if method.distill is not None and stage > 0:
                records = self.__clDistill.record(net, [self.__headOf(old, method) for old in tasks[:stage]],
                                                  self.__autoencoders, task.train.inputs,
                                                  method.distill.mode == 'ebll')
            heads = numpy.full(task.train.labels.shape[0], head)
            self.__train(net, method, task.train.inputs, task.train.labels, heads, stage, records)
            self.__consolidate(net, method, task, head)
            for seen in range(stage + 1):
                metrics.set(seen, stage, self.evaluate(net, self.__headOf(tasks[seen], method), tasks[seen].test))
            logger.info('Stage %d done: %s', stage,
                        ' '.join('{:.4f}'.format(metrics.get(seen, stage)) for seen in range(stage + 1)))
        self.__analyse(net, tasks, method)
        return metrics

    def jointTrain(self, tasks: List[clData.taskDataset], net: clNetwork, method: methodConfig) -> clMetrics:
        """
        Trains on the shuffled union of all tasks at once, each sample
        routed to its task's head, and records every task's accuracy at
        the last stage. This is the upper-bound reference.
        """
        if method.distill is not None: raise ValueError('Joint training does not distill')
        self.__prepare(net, tasks, method)
        metrics = clMetrics()
        if not tasks: return metrics
        inputs = numpy.concatenate([task.train.inputs for task in tasks])
        labels = numpy.concatenate([task.train.labels for task in tasks])
        heads = numpy.concatenate([numpy.full(task.train.labels.shape[0], self.__headOf(task, method)) for task in tasks])
        self.__train(net, method, inputs, labels, heads, 0, [])
        last = len(tasks) - 1
        for index, task in enumerate(tasks):
            metrics.set(index, last, self.evaluate(net, self.__headOf(task, method), task.test))
        self.__analyse(net, tasks, method)
        return metrics

# end class
