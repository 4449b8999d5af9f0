import copy
import json
import logging
import os

from typing import Dict, List, NamedTuple, Optional

from .clData import clData
from .clDistill import clDistill
from .clImportance import clImportance
from .clSequence import clSequence, methodConfig
from .clSparse import clSparse
from .clStream import clOnlineLearner, streamConfig
from .clValid import clValid

logger = logging.getLogger(__name__)

class clConfigError(ValueError):
    """
    Raised for any configuration problem: unreadable file, unknown key,
    type mismatch or missing required field.
    """
    pass

# Marks a field without a default.

REQUIRED = '<required>'

class clConfig:
    """
    clConfig parses JSON experiment configurations into validated
    method and stream settings. Every key has an entry in the defaults
    table; unknown keys are refused with their dotted path.
    """

    modes = ('sequence', 'stream', 'joint', 'gradcheck')
    datasets = ('permuted_mnist', 'split_mnist', 'sphere')

    # The full default table. Nested sections are dictionaries; rep_reg
    # and distill are off (null) unless given, and then filled from
    # their own tables below.

    defaults = \
    {
        'mode': REQUIRED,
        'seeds': [0],
        'output': 'runs',
        'dataset':
        {
            'kind': None,
            'data_dir': None,
            'tasks': 5,
            'groups': [[0, 1], [2, 3], [4, 5], [6, 7], [8, 9]],
            'train_subset': None,
            'test_subset': None,
            'quadrants': ['q1', 'q2'],
            'train_size': 1000,
            'test_size': 500,
            'stream_batches': 200,
            'stream_batch_size': 10,
        },
        'network':
        {
            'hidden': [128, 128],
            'activation': 'relu',
        },
        'method':
        {
            'importance': 'mas',
            'lam': 10.0,
            'epochs': 10,
            'lr': 0.01,
            'batch_size': 100,
            'shared_head': False,
            'omega_rule': 'cma',
            'importance_samples': None,
            'rep_reg': None,
            'distill': None,
        },
        'stream':
        {
            'variant': 'continual',
            'capacity': 30,
            'lam': 0.5,
            'delta_mu': 0.5,
            'delta_sigma': 0.1,
            'window': 5,
            'steps': 5,
            'lr': 0.01,
            'omega_estimator': 'mas',
            'omega_rule': 'cma',
            'eval_every': 10,
        },
    }

    repRegDefaults = \
    {
        'kind': REQUIRED,
        'lam': 1e-4,
        'sigma_scale': 1.0 / 6.0,
    }

    # Defaults that differ by dataset kind, applied under the document.

    kindDefaults = \
    {
        'sphere':
        {
            'dataset': {'stream_batches': 300},
            'network': {'hidden': [64, 8]},
            'stream': {'capacity': 10, 'lam': 10.0, 'lr': 0.05},
        },
    }

    distillDefaults = \
    {
        'mode': 'ebll',
        'temperature': 2.0,
        'alpha': 1.0,
        'beta': 1e-3,
        'code_size': 32,
        'ae_epochs': 20,
        'ae_lr': 0.01,
        'reconstruction': 'norm',
    }

    # Defines a resolved experiment. echo is the fully defaulted
    # document, enough to rerun the experiment on its own.

    experiment = \
        NamedTuple(
        'experiment',
        [
            ('mode', str),
            ('dataset', Dict[str, object]),
            ('network', Dict[str, object]),
            ('method', Optional[methodConfig]),
            ('stream', Optional[streamConfig]),
            ('seeds', List[int]),
            ('output', str),
            ('echo', Dict[str, object])
        ])

    __clData = clData()
    __clDistill = clDistill()
    __clSequence = clSequence()
    __clSparse = clSparse()
    __clValid = clValid()

    def __init__(self):
        """
        clConfig Constructor
        """
        pass

    def __validators(self) -> Dict[str, object]:
        """
        Returns the coercion function of every leaf, by dotted path.
        Each returns None for an unacceptable value.
        """
        valid = self.__clValid
        kinds = self.__clSparse.kinds()
        return \
        {
            'mode': lambda value: valid.choice(value, self.modes),
            'seeds': valid.seeds,
            'output': valid.text,
            'dataset.kind': lambda value: valid.choice(value, self.datasets),
            'dataset.data_dir': valid.text,
            'dataset.tasks': lambda value: valid.count(value, 1),
            'dataset.groups': self.__groups,
            'dataset.train_subset': lambda value: valid.count(value, 1),
            'dataset.test_subset': lambda value: valid.count(value, 1),
            'dataset.quadrants': self.__quadrants,
            'dataset.train_size': lambda value: valid.count(value, 1),
            'dataset.test_size': lambda value: valid.count(value, 1),
            'dataset.stream_batches': lambda value: valid.count(value, 1),
            'dataset.stream_batch_size': lambda value: valid.count(value, 1),
            'network.hidden': self.__hidden,
            'network.activation': lambda value: valid.choice(value, ('relu', 'sigmoid')),
            'method.importance': lambda value: valid.choice(value, clSequence.importances),
            'method.lam': valid.nonnegative,
            'method.epochs': lambda value: valid.count(value, 0),
            'method.lr': valid.positive,
            'method.batch_size': lambda value: valid.count(value, 1),
            'method.shared_head': valid.boolean,
            'method.omega_rule': lambda value: valid.choice(value, clImportance.rules),
            'method.importance_samples': lambda value: valid.count(value, 1),
            'method.rep_reg.kind': lambda value: valid.choice(value, kinds),
            'method.rep_reg.lam': valid.nonnegative,
            'method.rep_reg.sigma_scale': valid.positive,
            'method.distill.mode': lambda value: valid.choice(value, clDistill.modes),
            'method.distill.temperature': valid.positive,
            'method.distill.alpha': self.__alpha,
            'method.distill.beta': valid.nonnegative,
            'method.distill.code_size': lambda value: valid.count(value, 1),
            'method.distill.ae_epochs': lambda value: valid.count(value, 0),
            'method.distill.ae_lr': valid.positive,
            'method.distill.reconstruction': lambda value: valid.choice(value, clDistill.reconstructions),
            'stream.variant': lambda value: valid.choice(value, clOnlineLearner.variants),
            'stream.capacity': lambda value: valid.count(value, 0),
            'stream.lam': valid.nonnegative,
            'stream.delta_mu': valid.positive,
            'stream.delta_sigma': valid.positive,
            'stream.window': lambda value: valid.count(value, 1),
            'stream.steps': lambda value: valid.count(value, 1),
            'stream.lr': valid.positive,
            'stream.omega_estimator': lambda value: valid.choice(value, clOnlineLearner.estimators),
            'stream.omega_rule': lambda value: valid.choice(value, clImportance.rules),
            'stream.eval_every': lambda value: valid.count(value, 1),
        }

    def __groups(self, value):
        if type(value) != list or not value: return None
        groups = [self.__clValid.counts(group) for group in value]
        if None in groups or not all(groups): return None
        if any(label > 9 for group in groups for label in group): return None
        return groups

    def __hidden(self, value):
        value = self.__clValid.counts(value, 1)
        if not value: return None
        return value

    def __quadrants(self, value):
        if type(value) != list or not value: return None
        value = [self.__clValid.choice(quadrant, clData.quadrants) for quadrant in value]
        if None in value: return None
        return value

    def __alpha(self, value):
        if type(value) != dict: return self.__clValid.nonnegative(value)
        alphas = {}
        for task, weight in value.items():
            task = self.__clValid.count(int(task) if type(task) == str and task.isdigit() else task)
            weight = self.__clValid.nonnegative(weight)
            if task is None or weight is None: return None
            alphas[task] = weight
        return alphas

    def __merge(self, document: dict, table: dict, prefix: str, validators: dict) -> dict:
        """
        Returns the table filled with the document's values, rejecting
        unknown keys and coercing every leaf.
        """
        if type(document) != dict: raise clConfigError('Section {} must be an object'.format(prefix or '<root>'))
        unknown = sorted(set(document) - set(table))
        if unknown: raise clConfigError('Unknown key {}'.format(', '.join(prefix + key for key in unknown)))
        resolved = {}
        for key, default in table.items():
            path = prefix + key
            if isinstance(default, dict):
                resolved[key] = self.__merge(document.get(key, {}), default, path + '.', validators)
                continue
            if key in ('rep_reg', 'distill') and prefix == 'method.':
                section = document.get(key)
                if section is None: resolved[key] = None
                else: resolved[key] = self.__merge(section, self.repRegDefaults if key == 'rep_reg' else self.distillDefaults,
                                                   path + '.', validators)
                continue
            if key not in document:
                if default is REQUIRED: raise clConfigError('Missing required field {}'.format(path))
                resolved[key] = copy.deepcopy(default)
                continue
            value = document[key]
            if value is None and default is None:
                resolved[key] = None
                continue
            coerced = validators[path](value)
            if coerced is None:
                raise clConfigError('Invalid value {!r} for {}'.format(value, path))
            resolved[key] = coerced
        return resolved

    def __checkData(self, dataset: dict):
        """
        Checks that the files a dataset refers to exist.
        """
        if dataset['kind'] not in ('permuted_mnist', 'split_mnist'): return
        directory = dataset['data_dir'] or os.environ.get('CL_DATA_DIR')
        if not directory: raise clConfigError('dataset.data_dir is not set and CL_DATA_DIR is empty')
        for images, labels in clData.MNIST_FILES.values():
            for name in (images, labels):
                if not os.path.isfile(os.path.join(directory, name)):
                    raise clConfigError('Missing data file {}'.format(os.path.join(directory, name)))

    def tableFor(self, document: dict) -> dict:
        """
        Returns the default table for the document's dataset kind.
        """
        table = copy.deepcopy(self.defaults)
        dataset = document.get('dataset') if type(document) == dict else None
        kind = str(dataset.get('kind')).lower() if type(dataset) == dict else None
        for section, values in self.kindDefaults.get(kind, {}).items():
            table[section].update(copy.deepcopy(values))
        return table

    def method(self, resolved: dict, seed: int = 0) -> methodConfig:
        """
        Returns the method settings of a resolved document for one seed.
        """
        section = resolved['method']
        repReg = None
        if section['rep_reg'] is not None:
            reg = section['rep_reg']
            repReg = self.__clSparse.config(reg['kind'], reg['lam'], reg['sigma_scale'])
        distill = None
        if section['distill'] is not None:
            dist = section['distill']
            distill = self.__clDistill.config(dist['mode'], dist['temperature'], dist['alpha'], dist['beta'],
                                              dist['code_size'], dist['ae_epochs'], dist['ae_lr'],
                                              dist['reconstruction'])
        return methodConfig(section['importance'], section['lam'], repReg, distill, section['epochs'],
                            section['lr'], section['batch_size'], seed, section['shared_head'],
                            section['omega_rule'], section['importance_samples'])

    def stream(self, resolved: dict, seed: int = 0) -> streamConfig:
        """
        Returns the stream settings of a resolved document for one seed.
        """
        section = resolved['stream']
        return streamConfig(section['variant'], section['capacity'], section['lam'], section['delta_mu'],
                            section['delta_sigma'], section['window'], section['steps'], section['lr'],
                            section['omega_estimator'], section['omega_rule'], section['eval_every'], seed)

    def resolve(self, document: dict) -> experiment:
        """
        Returns the experiment described by an already loaded document.
        """
        resolved = self.__merge(document, self.tableFor(document), '', self.__validators())
        mode = resolved['mode']
        dataset = resolved['dataset']
        if mode != 'gradcheck':
            if dataset['kind'] is None: raise clConfigError('Missing required field dataset.kind')
            self.__checkData(dataset)
        if mode == 'stream' and dataset['kind'] == 'split_mnist':
            raise clConfigError('Stream mode supports the permuted_mnist and sphere datasets')
        method = None
        stream = None
        try:
            if mode in ('sequence', 'joint'):
                method = self.__clSequence.validate(self.method(resolved, resolved['seeds'][0]))
                if mode == 'joint' and method.distill is not None:
                    raise ValueError('Joint training does not distill')
            if mode == 'stream': stream = self.stream(resolved, resolved['seeds'][0])
        except clConfigError:
            raise
        except ValueError as error:
            raise clConfigError(str(error))
        return self.experiment(mode, dataset, resolved['network'], method, stream, resolved['seeds'],
                               resolved['output'], resolved)

    def parse(self, path: str) -> experiment:
        """
        Reads and validates a JSON experiment file.
        """
        try:
            with open(path) as stream: document = json.load(stream)
        except OSError as error:
            raise clConfigError('Cannot read config {}: {}'.format(path, error))
        except json.JSONDecodeError as error:
            raise clConfigError('Config {} is not valid JSON: {}'.format(path, error))
        experiment = self.resolve(document)
        logger.debug('Resolved config %s', path)
        return experiment

    def echo(self, experiment: experiment) -> str:
        """
        Returns the resolved document as indented JSON.
        """
        return json.dumps(experiment.echo, indent = 2, sort_keys = True)

# end class
