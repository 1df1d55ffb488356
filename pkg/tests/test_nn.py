"""Tests for MLP init/forward, SGD with momentum, and the EMA teacher update."""

import numpy as np
import pytest

import simdistill.tensor as T
from simdistill.errors import ContractError, ShapeError
from simdistill.nn import (MlpParams, MlpSpec, ModelPair, SgdState, default_encoder_spec,
                           default_predictor_spec, ema_update, init_params, mlp_forward,
                           sgd_step)
from simdistill.tensor import Tensor


class TestInitParams:
    def test_same_seed_is_bitwise_identical(self):
        spec = MlpSpec((4, 8, 2))
        a, b = init_params(spec, 42), init_params(spec, 42)
        for pa, pb in zip(a.parameters(), b.parameters()):
            assert np.array_equal(pa.data, pb.data)

    def test_shape_contract(self):
        p = init_params(MlpSpec((4, 8, 2)), 0)
        assert [w.data.shape for w in p.weights] == [(4, 8), (8, 2)]
        assert [b.data.shape for b in p.biases] == [(8,), (2,)]

    def test_biases_start_at_zero(self):
        p = init_params(MlpSpec((3, 5, 2)), 1)
        for b in p.biases:
            assert not b.data.any()

    def test_uniform_stddev(self):
        """A [1000,1000] layer has stddev (1/sqrt(1000))/sqrt(3) within 5%."""
        p = init_params(MlpSpec((1000, 1000)), 7)
        expected = (1.0 / np.sqrt(1000)) / np.sqrt(3)
        assert p.weights[0].data.std() == pytest.approx(expected, rel=0.05)

    def test_spec_validation(self):
        with pytest.raises(ContractError):
            MlpSpec((4,))
        with pytest.raises(ContractError):
            MlpSpec((4, 0, 2))
        with pytest.raises(ContractError):
            MlpSpec((4, 8, 1))


class TestMlpForward:
    def test_zero_weights_give_zero_output(self):
        spec = MlpSpec((3, 4, 2))
        p = init_params(spec, 0)
        for w in p.weights:
            w.data[...] = 0.0
        out = mlp_forward(p, Tensor(np.ones((5, 3))))
        assert not out.data.any()

    def test_single_layer_equals_affine(self):
        p = init_params(MlpSpec((4, 3)), 3)
        x = np.random.default_rng(4).standard_normal((6, 4))
        out = mlp_forward(p, Tensor(x))
        assert np.array_equal(out.data, x @ p.weights[0].data + p.biases[0].data)

    def test_against_independent_forward_oracle(self):
        """Random net matches a separately coded forward pass to 1e-12."""
        spec = MlpSpec((5, 7, 4, 3), final_normalize=True)
        p = init_params(spec, 5)
        x = np.random.default_rng(6).standard_normal((8, 5))

        h = x
        layers = list(zip(p.weights, p.biases))
        for i, (w, b) in enumerate(layers):
            h = h @ w.data + b.data
            if i != len(layers) - 1:
                h = np.maximum(h, 0.0)
        h = h / np.maximum(np.linalg.norm(h, axis=1, keepdims=True), 1e-12)

        out = mlp_forward(p, Tensor(x))
        assert np.abs(out.data - h).max() < 1e-12

    def test_final_normalize_rows_unit(self):
        # hidden width 16 keeps every row clear of total relu die-off
        p = init_params(MlpSpec((4, 16, 3), final_normalize=True), 8)
        out = mlp_forward(p, Tensor(np.random.default_rng(9).standard_normal((10, 4))))
        assert np.abs(np.linalg.norm(out.data, axis=1) - 1.0).max() < 1e-10

    def test_width_mismatch(self):
        p = init_params(MlpSpec((4, 3)), 0)
        with pytest.raises(ShapeError):
            mlp_forward(p, Tensor(np.zeros((2, 5))))

    def test_no_graph_for_frozen_params(self):
        p = init_params(MlpSpec((3, 4, 2)), 1).copy(trainable=False)
        out = mlp_forward(p, Tensor(np.ones((2, 3))))
        assert not out.requires_grad


class TestSgd:
    def _param(self, values):
        return Tensor.parameter(np.asarray(values, dtype=np.float64))

    def test_zero_grad_leaves_params_unchanged(self):
        p = self._param([1.0, -2.0])
        state = SgdState.for_params([p], lr=0.1, weight_decay=0.0)
        sgd_step([p], [np.zeros(2)], state)
        assert np.array_equal(p.data, [1.0, -2.0])

    def test_first_step_closed_form(self):
        p = self._param([1.0, 2.0])
        g = np.array([0.5, -0.25])
        state = SgdState.for_params([p], lr=0.1, weight_decay=0.0)
        sgd_step([p], [g], state)
        assert np.allclose(p.data, [1.0, 2.0] - 0.1 * g, atol=1e-15)

    def test_two_steps_unrolled_by_hand(self):
        """Constant gradient g for two steps gives theta - lr*g*(1 + 1.9)."""
        p = self._param([3.0])
        g = np.array([2.0])
        state = SgdState.for_params([p], lr=0.1, weight_decay=0.0)
        sgd_step([p], [g], state)
        sgd_step([p], [g], state)
        assert p.data[0] == pytest.approx(3.0 - 0.1 * 2.0 * (1.0 + 1.9), abs=1e-15)

    def test_weight_decay_enters_velocity(self):
        p = self._param([2.0])
        state = SgdState.for_params([p], lr=0.1, momentum=0.9, weight_decay=0.01)
        sgd_step([p], [np.zeros(1)], state)
        assert p.data[0] == pytest.approx(2.0 - 0.1 * (0.01 * 2.0))

    def test_teacher_parameter_rejected(self):
        frozen = Tensor.frozen([1.0, 2.0])
        state = SgdState.for_params([frozen], lr=0.1)
        with pytest.raises(ContractError):
            sgd_step([frozen], [np.zeros(2)], state)

    def test_shape_mismatch(self):
        p = self._param([1.0, 2.0])
        state = SgdState.for_params([p], lr=0.1)
        with pytest.raises(ShapeError):
            sgd_step([p], [np.zeros(3)], state)


def make_pair(momentum, seed=0):
    enc = MlpSpec((3, 4, 2), final_normalize=True)
    return ModelPair.create(enc, default_predictor_spec(2, hidden=3), momentum, seed)


class TestEmaUpdate:
    def test_momentum_one_is_bitwise_identity(self):
        pair = make_pair(1.0)
        before = [t.data.copy() for t in pair.teacher_encoder.parameters()]
        for _ in range(100):
            ema_update(pair)
            for s in pair.student_encoder.parameters():
                s.data += 0.37
        for t, b in zip(pair.teacher_encoder.parameters(), before):
            assert np.array_equal(t.data, b)

    def test_momentum_zero_copies_student(self):
        pair = make_pair(0.0)
        for s in pair.student_encoder.parameters():
            s.data += 1.25
        ema_update(pair)
        for t, s in zip(pair.teacher_encoder.parameters(), pair.student_encoder.parameters()):
            assert np.array_equal(t.data, s.data)

    def test_scalar_closed_form(self):
        """theta_t=0, theta_s=1, m=0.999 gives 0.001 to 1e-15."""
        pair = make_pair(0.999)
        t0 = pair.teacher_encoder.weights[0]
        s0 = pair.student_encoder.weights[0]
        t0.data[...] = 0.0
        s0.data[...] = 1.0
        ema_update(pair)
        assert np.abs(t0.data - 0.001).max() < 1e-15

    def test_student_untouched(self):
        pair = make_pair(0.5)
        for s in pair.student_encoder.parameters():
            s.data += 2.0
        before = [s.data.copy() for s in pair.student_encoder.parameters()]
        ema_update(pair)
        for s, b in zip(pair.student_encoder.parameters(), before):
            assert np.array_equal(s.data, b)

    def test_gap_recurrence_and_displacement_bound(self):
        """Scalar toy run: the gap obeys gap_k = m*(gap_{k-1} - delta_k), so it
        never exceeds the sum of past student displacements."""
        rng = np.random.default_rng(5)
        m = 0.9
        teacher, student = 1.0, 1.0
        gap, total_displacement = 0.0, 0.0
        for _ in range(200):
            delta = rng.normal(0.0, 0.1)
            student += delta
            teacher = m * teacher + (1.0 - m) * student
            expected_gap = m * (gap - delta)
            gap = teacher - student
            total_displacement += abs(delta)
            assert gap == pytest.approx(expected_gap, abs=1e-12)
            assert abs(gap) <= total_displacement + 1e-12


class TestModelPair:
    def test_teacher_starts_as_exact_copy(self):
        pair = make_pair(0.99)
        for t, s in zip(pair.teacher_encoder.parameters(), pair.student_encoder.parameters()):
            assert np.array_equal(t.data, s.data)
            assert not t.requires_grad and s.requires_grad

    def test_momentum_range_checked(self):
        with pytest.raises(ContractError):
            make_pair(1.5)

    def test_teacher_must_be_frozen(self):
        enc = init_params(MlpSpec((3, 4, 2), final_normalize=True), 0)
        pred = init_params(default_predictor_spec(2, hidden=3), 1)
        with pytest.raises(ContractError):
            ModelPair(enc, pred, enc.copy(trainable=True), 0.9)

    def test_default_specs(self):
        enc = default_encoder_spec(17)
        assert enc.layer_widths == (17, 256, 128, 64) and enc.final_normalize
        pred = default_predictor_spec(64)
        assert pred.layer_widths == (64, 64, 64) and not pred.final_normalize

    def test_teacher_receives_no_gradient_through_forward(self):
        pair = make_pair(0.99)
        x = Tensor(np.random.default_rng(3).standard_normal((4, 3)))
        out = mlp_forward(pair.teacher_encoder, x)
        assert not out.requires_grad
        loss = T.tensor_sum(mlp_forward(pair.student_encoder, x))
        T.backward(loss)
        for t in pair.teacher_encoder.parameters():
            assert not t.grad.any()
