import csv
import logging
import numpy

from collections import OrderedDict
from typing import List, NamedTuple

from .clData import clData
from .clHardBuffer import clHardBuffer
from .clImportance import clImportance, clParamImportance
from .clNetwork import clNetwork, addGradients
from .clWindow import clLossWindow, clPlateau

logger = logging.getLogger(__name__)

class streamConfig(NamedTuple):
    """
    Configuration of the task-free online learner. Defaults suit the small
    sphere streams.
    """
    variant: str = 'continual'
    capacity: int = 30
    lam: float = 0.5
    delta_mu: float = 0.5
    delta_sigma: float = 0.1
    window: int = 5
    steps: int = 5
    lr: float = 0.01
    omega_estimator: str = 'mas'
    omega_rule: str = 'cma'
    eval_every: int = 10
    seed: int = 0

class clOnlineLearner:
    """
    class clOnlineLearner
    Online continual learning over a stream of small batches. Every
    arrival takes a few SGD steps on the recent samples plus the hard
    buffer under the importance-weighted penalty. The first step's data
    loss enters the loss window; a plateau in the window refreshes Omega
    and theta* on the hard buffer, and a later peak re-arms the search.
    A single shared head serves the whole stream.
    """

    variants = ('continual', 'online', 'online_no_hard', 'online_joint')
    estimators = ('mas', 'ewc')

    __clImportance = clImportance()

    __slots__ = \
    [
        '__arrivals',
        '__buffer',
        '__config',
        '__head',
        '__last_loss',
        '__net',
        '__omega',
        '__omega_updates',
        '__peak_events',
        '__plateau',
        '__snapshot',
        '__window',
    ]

    def __init__(self, net: clNetwork, config: streamConfig, head: int = 0):
        """
        Constructor resolves the variant and initializes the protocol
        state: empty buffer and window, zero Omega and theta*, armed.
        """
        if config.variant not in self.variants: raise ValueError('Unknown stream variant {}'.format(config.variant))
        if config.omega_estimator not in self.estimators: raise ValueError('Unknown estimator {}'.format(config.omega_estimator))
        if config.steps < 1: raise ValueError('At least one gradient step per arrival')
        if config.lam < 0: raise ValueError('lambda must be non-negative')
        if config.variant in ('online', 'online_joint'): config = config._replace(lam = 0.0)
        if config.variant == 'online_no_hard': config = config._replace(lam = 0.0, capacity = 0)
        self.__config = config
        self.__net = net
        self.__head = head
        net.head(head)
        self.__buffer = clHardBuffer(config.capacity)
        self.__window = clLossWindow(config.window)
        self.__plateau = clPlateau()
        params = net.parameters([head])
        self.__omega = clParamImportance.zeros(params)
        self.__snapshot = OrderedDict((name, numpy.zeros_like(value)) for name, value in params.items())
        self.__omega_updates = 0
        self.__peak_events = 0
        self.__arrivals = 0
        self.__last_loss = None

    @property
    def arrivals(self) -> int:
        """
        Property
        Returns the number of processed arrivals.
        """
        return self.__arrivals

    @property
    def buffer(self) -> clHardBuffer:
        """
        Property
        Returns the hard buffer.
        """
        return self.__buffer

    @property
    def config(self) -> streamConfig:
        """
        Property
        Returns the resolved configuration.
        """
        return self.__config

    @property
    def consolidates(self) -> bool:
        """
        Property
        Returns True for variants that update Omega at plateaus.
        """
        return self.__config.variant == 'continual'

    @property
    def loss_mean(self) -> float:
        """
        Property
        Returns the window mean, or the last window loss when the window
        was just cleared.
        """
        if len(self.__window): return self.__window.stats()[0]
        return self.__last_loss

    @property
    def net(self) -> clNetwork:
        """
        Property
        Returns the learner's network.
        """
        return self.__net

    @property
    def omega(self) -> clParamImportance:
        """
        Property
        Returns the accumulated importance.
        """
        return self.__omega

    @property
    def omega_updates(self) -> int:
        """
        Property
        Returns the number of Omega updates so far.
        """
        return self.__omega_updates

    @property
    def peak_events(self) -> int:
        """
        Property
        Returns the number of peaks that re-armed the plateau search.
        """
        return self.__peak_events

    @property
    def plateau(self) -> clPlateau:
        """
        Property
        Returns the plateau state.
        """
        return self.__plateau

    @property
    def snapshot(self) -> 'OrderedDict[str, numpy.ndarray]':
        """
        Property
        Returns theta* from the last Omega update.
        """
        return self.__snapshot

    @property
    def window(self) -> clLossWindow:
        """
        Property
        Returns the loss window.
        """
        return self.__window

    def __consolidate(self, recent: clData.labeledBatch):
        """
        Estimates importance on the hard buffer (the recent samples when
        the buffer is empty), folds it into Omega and snapshots theta*.
        """
        if self.__buffer.size: samples = clData.labeledBatch(self.__buffer.inputs, self.__buffer.labels)
        else: samples = recent
        if self.__config.omega_estimator == 'mas':
            estimate = self.__clImportance.mas(self.__net, self.__head, samples.inputs, True)
        else:
            estimate = self.__clImportance.ewc(self.__net, self.__head, samples, True)
        self.__clImportance.accumulate(self.__omega, estimate, self.__config.omega_rule)
        self.__snapshot = self.__net.snapshot([self.__head])
        self.__omega_updates += 1

    def step(self, recent: clData.labeledBatch) -> float:
        """
        Processes one arrival and returns the data loss of its first step.
        """
        config = self.__config
        net = self.__net
        head = self.__head
        firstLoss = None
        for stepIndex in range(config.steps):
            logits, trace = net.forward(head, recent.inputs)
            recentLoss, dRecent = clNetwork.dataLoss(logits, recent.labels)
            grads = OrderedDict(net.backward(trace, {head: dRecent}).params)
            recentCount = recent.labels.shape[0]
            combined = recentLoss
            if self.__buffer.size:
                bufferLogits, bufferTrace = net.forward(head, self.__buffer.inputs)
                bufferLoss, dBuffer = clNetwork.dataLoss(bufferLogits, self.__buffer.labels)
                addGradients(grads, net.backward(bufferTrace, {head: dBuffer}).params)
                bufferCount = self.__buffer.size
                combined = (recentLoss * recentCount + bufferLoss * bufferCount) / (recentCount + bufferCount)
            if stepIndex == 0:
                self.__window.push(combined)
                self.__last_loss = combined
                firstLoss = combined
            net.sgdStep(grads, config.lr)
            if config.lam > 0 and self.__omega.count > 0:
                self.__clImportance.anchor(net, self.__snapshot, self.__omega, config.lam, config.lr, [head])
        if self.__plateau.plateauDetected(self.__window, config.delta_mu, config.delta_sigma):
            if self.consolidates:
                self.__consolidate(recent)
                logger.info('Arrival %d: plateau, omega update %d', self.__arrivals, self.__omega_updates)
            self.__plateau.accept(self.__window)
            self.__window.clear()
        if not self.__plateau.armed and self.__plateau.peakDetected(self.__window):
            self.__plateau.armed = True
            self.__peak_events += 1
            logger.debug('Arrival %d: peak, plateau search re-armed', self.__arrivals)
        self.__buffer.update(recent, net, head)
        self.__arrivals += 1
        return firstLoss

# end class

class clStream:
    """
    clStream runs an online learner over a stream and records the
    per-phase test accuracy trace.
    """

    header = ['step', 'phase', 'phase_accuracy', 'loss_mean', 'omega_updates']

    # Defines one trace row: accuracy on one phase's test set after an arrival.

    traceRow = \
        NamedTuple(
        'traceRow',
        [
            ('step', int),
            ('phase', int),
            ('phase_accuracy', float),
            ('loss_mean', float),
            ('omega_updates', int)
        ])

    __clData = clData()

    def __init__(self):
        """
        clStream Constructor
        """
        pass

    def accuracy(self, net: clNetwork, head: int, test: clData.labeledBatch) -> float:
        """
        Returns the argmax accuracy on a test batch.
        """
        if test.labels.shape[0] == 0: raise ValueError('Cannot evaluate on an empty test set')
        logits, _ = net.forward(head, test.inputs)
        return float(numpy.mean(numpy.argmax(logits, axis = 1) == test.labels))

    def runStream(self, stream: clData.stream, net: clNetwork, config: streamConfig,
                  tests: List[clData.labeledBatch], head: int = 0) -> List[traceRow]:
        """
        Feeds every arrival to a fresh learner and, after every
        eval_every-th arrival and after the last one, evaluates every
        phase's held-out test set. The online_joint variant first shuffles
        the stream across phases. Returns the trace rows.
        """
        if config.eval_every < 1: raise ValueError('eval_every must be at least 1')
        if config.variant == 'online_joint': stream = self.__clData.shuffleStream(stream, config.seed)
        learner = clOnlineLearner(net, config, head)
        rows = []
        total = len(stream.batches)
        for step, batch in enumerate(stream.batches):
            learner.step(batch)
            if (step + 1) % config.eval_every and step + 1 != total: continue
            lossMean = learner.loss_mean
            for phase, test in enumerate(tests):
                rows.append(self.traceRow(step, phase, self.accuracy(net, head, test),
                                          float('nan') if lossMean is None else float(lossMean),
                                          learner.omega_updates))
        logger.info('Stream of %d arrivals done: %d omega updates, %d peaks', total,
                    learner.omega_updates, learner.peak_events)
        return rows

    def writeTrace(self, rows: List[traceRow], path: str):
        """
        Writes the trace as CSV, floats with 6 decimals.
        """
        with open(path, 'w', newline = '') as stream:
            writer = csv.writer(stream, lineterminator = '\n')
            writer.writerow(self.header)
            for row in rows:
                writer.writerow([row.step, row.phase, '{:.6f}'.format(row.phase_accuracy),
                                 '{:.6f}'.format(row.loss_mean), row.omega_updates])

    def readTrace(self, path: str) -> List[traceRow]:
        """
        Reads a trace written by writeTrace.
        """
        with open(path, newline = '') as stream:
            reader = csv.reader(stream)
            header = next(reader)
            if header != self.header: raise ValueError('Unexpected trace header {}'.format(header))
            return [self.traceRow(int(step), int(phase), float(accuracy), float(loss), int(updates))
                    for step, phase, accuracy, loss, updates in reader]

    def finalAccuracy(self, rows: List[traceRow]) -> 'OrderedDict[int, float]':
        """
        Returns each phase's accuracy from the last evaluation.
        """
        final = OrderedDict()
        if not rows: return final
        last = rows[-1].step
        for row in rows:
            if row.step == last: final[row.phase] = row.phase_accuracy
        return final

# end class
