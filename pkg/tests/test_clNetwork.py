import math

import numpy
import pytest

from clLearn.clLayer import clLayer
from clLearn.clNetwork import clNetwork, addGradients
from conftest import linearNet

class TestBuild:
    """Network construction."""

    def test_same_seed_is_bit_identical(self):
        first = clNetwork.build([4, 10, 10], 'relu', {0: 2}, seed = 7)
        second = clNetwork.build([4, 10, 10], 'relu', {0: 2}, seed = 7)
        for (name, value), (otherName, other) in zip(first.parameters([0]).items(), second.parameters([0]).items()):
            assert name == otherName
            numpy.testing.assert_array_equal(value, other)

    def test_needs_a_hidden_layer(self):
        with pytest.raises(ValueError):
            clNetwork.build([4])

    def test_permuted_mnist_shape(self):
        net = clNetwork.build([784, 128, 128], 'relu', {task: 10 for task in range(5)})
        assert list(net.heads) == [0, 1, 2, 3, 4]
        assert net.input_width == 784 and net.features_width == 128
        assert all(head.shape == (10, 128) for head in net.heads.values())

    def test_added_head_matches_built_head(self):
        built = clNetwork.build([4, 6], 'relu', {0: 3, 1: 3}, seed = 2)
        grown = clNetwork.build([4, 6], 'relu', {0: 3}, seed = 2)
        grown.addHead(1, 3)
        numpy.testing.assert_array_equal(built.head(1).weights, grown.head(1).weights)
        with pytest.raises(ValueError):
            grown.addHead(1, 3)

    def test_parameter_names(self, smallNet):
        assert list(smallNet.parameters([1])) == \
            ['trunk.0.weights', 'trunk.0.bias', 'trunk.1.weights', 'trunk.1.bias', 'head.1.weights', 'head.1.bias']
        with pytest.raises(ValueError):
            smallNet.head(9)

    def test_copy_and_snapshot_are_independent(self, smallNet):
        other = smallNet.copy()
        snapshot = smallNet.snapshot([0])
        smallNet.parameters([0])['head.0.weights'][0, 0] += 1.0
        assert other.head(0).weights[0, 0] != smallNet.head(0).weights[0, 0]
        assert snapshot['head.0.weights'][0, 0] != smallNet.head(0).weights[0, 0]

class TestForward:
    """Forward pass."""

    def test_zero_network_gives_zero_logits(self):
        net = clNetwork([clLayer(numpy.zeros((3, 4)))], {0: clLayer(numpy.zeros((2, 3)), None, 'identity')})
        logits, _ = net.forward(0, numpy.ones((5, 4)))
        numpy.testing.assert_array_equal(logits, numpy.zeros((5, 2)))

    def test_identity_network_returns_inputs(self, rng):
        net = linearNet(numpy.eye(3))
        inputs = rng.normal(size = (4, 3))
        logits, trace = net.forward(0, inputs)
        numpy.testing.assert_array_equal(logits, inputs)
        assert trace.head == 0

    def test_recomputation(self, smallNet, rng):
        inputs = rng.normal(size = (3, 4))
        first, _ = smallNet.forward(1, inputs)
        second, _ = smallNet.forward(1, inputs)
        assert first.shape == (3, 3)
        numpy.testing.assert_array_equal(first, second)

    def test_rejects_wrong_width(self, smallNet):
        with pytest.raises(ValueError):
            smallNet.forward(0, numpy.ones((2, 5)))

class TestLoss:
    """Data losses and back-propagation."""

    def test_uniform_logits_cost_ln2(self):
        value, _ = clNetwork.dataLoss(numpy.zeros((4, 2)), [0, 1, 0, 1])
        assert value == pytest.approx(math.log(2.0))

    def test_mse_at_target_is_zero(self, smallNet, rng):
        inputs = rng.normal(size = (5, 4))
        logits, _ = smallNet.forward(0, inputs)
        value, grads = smallNet.lossAndBackward(0, inputs, logits.copy(), 'mse')
        assert value == 0.0
        for grad in grads.params.values():
            numpy.testing.assert_array_equal(grad, numpy.zeros_like(grad))

    def test_rejects_class_outside_head(self):
        with pytest.raises(ValueError):
            clNetwork.dataLoss(numpy.zeros((2, 3)), [0, 3])

    def test_central_difference(self, sigmoidNet, rng):
        inputs = rng.normal(size = (6, 3))
        labels = rng.integers(0, 3, size = 6)
        _, grads = sigmoidNet.lossAndBackward(0, inputs, labels)
        epsilon = 1e-5
        for name, param in sigmoidNet.parameters([0]).items():
            original = param[0, 0] if param.ndim == 2 else param[0]
            index = (0, 0) if param.ndim == 2 else (0,)
            param[index] = original + epsilon
            plus, _ = sigmoidNet.lossAndBackward(0, inputs, labels)
            param[index] = original - epsilon
            minus, _ = sigmoidNet.lossAndBackward(0, inputs, labels)
            param[index] = original
            numeric = (plus - minus) / (2.0 * epsilon)
            analytic = grads.params[name][index]
            assert abs(numeric - analytic) <= 1e-4 * max(abs(numeric), abs(analytic), 1e-4)

    def test_activation_gradients_are_added(self, smallNet, rng):
        inputs = rng.normal(size = (5, 4))
        labels = rng.integers(0, 3, size = 5)
        _, plain = smallNet.lossAndBackward(0, inputs, labels)
        _, extra = smallNet.lossAndBackward(0, inputs, labels, 'softmax_xent', {1: numpy.ones((5, 5))})
        numpy.testing.assert_array_equal(plain.params['head.0.weights'], extra.params['head.0.weights'])
        assert not numpy.allclose(plain.params['trunk.1.weights'], extra.params['trunk.1.weights'])
        with pytest.raises(ValueError):
            smallNet.lossAndBackward(0, inputs, labels, 'softmax_xent', {1: numpy.ones((5, 4))})

    @pytest.mark.parametrize('reduce', ['abs', 'square'])
    def test_reductions_match_per_sample_loop(self, smallNet, rng, reduce):
        inputs = rng.normal(size = (6, 4))
        upstream = rng.normal(size = (6, 3))
        logits, trace = smallNet.forward(0, inputs)
        reduced = smallNet.backward(trace, {0: upstream}, None, reduce).params
        expected = {}
        for row in range(6):
            _, single = smallNet.forward(0, inputs[row:row + 1])
            grads = smallNet.backward(single, {0: upstream[row:row + 1]}).params
            for name, grad in grads.items():
                term = numpy.abs(grad) if reduce == 'abs' else grad ** 2
                expected[name] = expected.get(name, 0.0) + term
        for name, value in expected.items():
            numpy.testing.assert_allclose(reduced[name], value, atol = 1e-12)

class TestSgd:
    """Parameter updates."""

    def test_arithmetic(self):
        net = linearNet([[1.0]])
        net.sgdStep({'trunk.0.weights': numpy.array([[2.0]])}, 0.1)
        assert net.trunk[0].weights[0, 0] == pytest.approx(0.8)

    def test_zero_gradients_leave_network_unchanged(self, smallNet):
        before = smallNet.snapshot([0])
        smallNet.sgdStep({name: numpy.zeros_like(value) for name, value in before.items()}, 0.5)
        for name, value in smallNet.parameters([0]).items():
            numpy.testing.assert_array_equal(value, before[name])

    def test_two_steps_differ_from_one_summed_step(self, sigmoidNet, rng):
        inputs = rng.normal(size = (8, 3))
        labels = rng.integers(0, 3, size = 8)
        other = sigmoidNet.copy()
        _, first = sigmoidNet.lossAndBackward(0, inputs, labels)
        sigmoidNet.sgdStep(first, 0.5)
        _, second = sigmoidNet.lossAndBackward(0, inputs, labels)
        sigmoidNet.sgdStep(second, 0.5)
        other.sgdStep(addGradients(dict(first.params), first.params), 0.5)
        assert not numpy.allclose(sigmoidNet.trunk[0].weights, other.trunk[0].weights)

    def test_rejects_bad_steps(self, smallNet):
        with pytest.raises(ValueError):
            smallNet.sgdStep({}, 0.0)
        with pytest.raises(ValueError):
            smallNet.sgdStep({'trunk.7.weights': numpy.zeros(1)}, 0.1)
        with pytest.raises(ValueError):
            smallNet.sgdStep({'trunk.0.bias': numpy.full(6, numpy.nan)}, 0.1)

class TestAddGradients:
    """Gradient map arithmetic."""

    def test_adds_and_creates(self):
        target = {'a': numpy.ones(2)}
        addGradients(target, {'a': numpy.ones(2), 'b': numpy.ones(1)}, 2.0)
        numpy.testing.assert_array_equal(target['a'], [3.0, 3.0])
        numpy.testing.assert_array_equal(target['b'], [2.0])
