import csv
import numpy
import traceback

from collections import OrderedDict
from typing import Dict, List, Tuple

class clMetrics:
    """
    Accuracy matrix of a task sequence: A[t][s] is the test accuracy of
    task t after training stage s, defined only for s >= t.
    Average accuracy and forgetting are read from the last stage.
    """

    header = ['task', 'stage', 'accuracy']

    __slots__ = ['__accuracy']

    def __init__(self):
        """
        Constructor creates an empty matrix.
        """
        self.__accuracy = OrderedDict()

    @property
    def avg_accuracy(self) -> float:
        """
        Property
        Returns the mean accuracy over all tasks after the last stage.
        Returns None for an empty matrix.
        """
        try:
            last = self.last_stage
            if last is None: return None
            values = [self.__accuracy[(task, last)] for task in self.tasks if (task, last) in self.__accuracy]
            return float(numpy.mean(values))
        except Exception:
            traceback.print_exc()
            return None

    @property
    def average_forgetting(self) -> float:
        """
        Property
        Returns the mean forgetting over the previous tasks, 0 when there are none.
        """
        forgetting = self.forgetting
        if not forgetting: return 0.0
        return float(numpy.mean(list(forgetting.values())))

    @property
    def backward_transfer(self) -> float:
        """
        Property
        Returns the mean of A[t][last] - A[t][t] over the previous tasks.
        """
        return -self.average_forgetting

    @property
    def entries(self) -> Dict[Tuple[int, int], float]:
        """
        Property
        Returns the (task, stage) to accuracy map.
        """
        return self.__accuracy

    @property
    def forgetting(self) -> 'OrderedDict[int, float]':
        """
        Property
        Returns A[t][t] - A[t][last] for every task before the last stage
        whose accuracy right after learning was recorded. The last task's
        forgetting is zero by definition and is not listed.
        """
        last = self.last_stage
        forgetting = OrderedDict()
        for task in self.tasks:
            if task >= last: continue
            if (task, task) not in self.__accuracy or (task, last) not in self.__accuracy: continue
            forgetting[task] = self.__accuracy[(task, task)] - self.__accuracy[(task, last)]
        return forgetting

    @property
    def last_stage(self) -> int:
        """
        Property
        Returns the last recorded stage, None when empty.
        """
        if not self.__accuracy: return None
        return max(stage for _, stage in self.__accuracy)

    @property
    def tasks(self) -> List[int]:
        """
        Property
        Returns the recorded task indices in order.
        """
        return sorted(set(task for task, _ in self.__accuracy))

    def get(self, task: int, stage: int) -> float:
        """
        Returns A[task][stage].
        """
        if (task, stage) not in self.__accuracy: raise ValueError('A[{}][{}] is not defined'.format(task, stage))
        return self.__accuracy[(task, stage)]

    def set(self, task: int, stage: int, accuracy: float):
        """
        Records A[task][stage] rounded to the 6 decimals the CSV carries,
        so a written matrix reads back equal.
        """
        if stage < task: raise ValueError('A[{}][{}] is above the diagonal'.format(task, stage))
        if not 0.0 <= accuracy <= 1.0: raise ValueError('Accuracy {} outside [0, 1]'.format(accuracy))
        self.__accuracy[(int(task), int(stage))] = round(float(accuracy), 6)

    def summary(self) -> List[str]:
        """
        Returns the summary lines: average accuracy, per-task forgetting
        and average forgetting.
        """
        lines = ['avg_accuracy,{:.6f}'.format(self.avg_accuracy)]
        for task, value in self.forgetting.items():
            lines.append('forgetting_{},{:.6f}'.format(task, value))
        lines.append('avg_forgetting,{:.6f}'.format(self.average_forgetting))
        return lines

    def toCsv(self, path: str):
        """
        Writes one task,stage,accuracy row per defined entry,
        accuracies with 6 decimals.
        """
        with open(path, 'w', newline = '') as stream:
            writer = csv.writer(stream, lineterminator = '\n')
            writer.writerow(self.header)
            for (task, stage), accuracy in sorted(self.__accuracy.items()):
                writer.writerow([task, stage, '{:.6f}'.format(accuracy)])

    @staticmethod
    def fromCsv(path: str) -> 'clMetrics':
        """
        Reads a matrix written by toCsv.
        """
        metrics = clMetrics()
        with open(path, newline = '') as stream:
            reader = csv.reader(stream)
            header = next(reader)
            if header != clMetrics.header: raise ValueError('Unexpected metrics header {}'.format(header))
            for task, stage, accuracy in reader:
                metrics.set(int(task), int(stage), float(accuracy))
        return metrics

# end class
