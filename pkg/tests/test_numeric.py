import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mhmr_ita import numeric as nd
from mhmr_ita.errors import ContractError, DomainError, TrainingError
from mhmr_ita.numeric import (
    AdamState,
    GruParams,
    LstmParams,
    ParamSet,
    Tensor,
    adam_update,
    backward,
    check_gradients,
    dense,
    gru_step,
    layer_norm,
    leaky_relu,
    lstm_step,
    scaled_dot_attention,
)

from oracles import ref_gru_step, ref_lstm_step, ref_softmax

rng = np.random.default_rng(20240917)


class TestDense:
    def test_identity_weights_zero_bias(self):
        x = rng.normal(size=(3, 4))
        out = dense(Tensor(x), Tensor(np.eye(4)), Tensor(np.zeros(4)))
        np.testing.assert_array_equal(out.data, x)

    def test_hand_example(self):
        out = dense(Tensor([[1.0, 2.0]]), Tensor([[1.0, 0.0], [0.0, 1.0]]), Tensor([1.0, 1.0]))
        np.testing.assert_array_equal(out.data, [[2.0, 3.0]])

    def test_zero_input_gives_bias(self):
        b = rng.normal(size=5)
        out = dense(Tensor(np.zeros((2, 3))), Tensor(rng.normal(size=(3, 5))), Tensor(b))
        np.testing.assert_allclose(out.data, np.broadcast_to(b, (2, 5)))

    def test_shape_mismatch(self):
        with pytest.raises(ContractError):
            dense(Tensor(np.zeros((2, 3))), Tensor(np.zeros((4, 5))), Tensor(np.zeros(5)))


class TestLeakyRelu:
    def test_values(self):
        out = leaky_relu(Tensor([2.0, -1.0, 0.0]))
        np.testing.assert_allclose(out.data, [2.0, -0.01, 0.0])

    def test_slope_domain(self):
        with pytest.raises(DomainError):
            leaky_relu(Tensor([1.0]), slope=1.5)


class TestLstmStep:
    def _zero_params(self, m, d):
        return LstmParams(Tensor(np.zeros((m, 4 * d)), requires=True),
                          Tensor(np.zeros((d, 4 * d)), requires=True),
                          Tensor(np.zeros(4 * d), requires=True))

    def test_all_zero_params_halve_cell(self):
        d = 3
        c_prev = rng.normal(size=d)
        h, c = lstm_step(self._zero_params(2, d), Tensor(np.zeros(d)), Tensor(c_prev), Tensor(np.zeros(2)))
        np.testing.assert_allclose(c.data, 0.5 * c_prev)
        np.testing.assert_allclose(h.data, 0.5 * np.tanh(0.5 * c_prev))

    def test_zero_inputs_reduce_to_biases(self):
        d, m = 3, 2
        b = rng.normal(size=4 * d)
        params = LstmParams(Tensor(rng.normal(size=(m, 4 * d))), Tensor(rng.normal(size=(d, 4 * d))), Tensor(b))
        h, c = lstm_step(params, Tensor(np.zeros(d)), Tensor(np.zeros(d)), Tensor(np.zeros(m)))
        sig = lambda z: 1 / (1 + np.exp(-z))
        np.testing.assert_allclose(c.data, sig(b[0:d]) * np.tanh(b[2 * d : 3 * d]))

    def test_output_shapes(self):
        d, m = 4, 3
        params = LstmParams(Tensor(rng.normal(size=(m, 4 * d))), Tensor(rng.normal(size=(d, 4 * d))), Tensor(rng.normal(size=4 * d)))
        h, c = lstm_step(params, Tensor(np.zeros(d)), Tensor(np.zeros(d)), Tensor(np.zeros(m)))
        assert h.data.shape == (d,) and c.data.shape == (d,)

    def test_matches_reference(self):
        d, m = 4, 3
        w_x, w_h, b = rng.normal(size=(m, 4 * d)), rng.normal(size=(d, 4 * d)), rng.normal(size=4 * d)
        h0, c0, x = rng.normal(size=d), rng.normal(size=d), rng.normal(size=m)
        h, c = lstm_step(LstmParams(Tensor(w_x), Tensor(w_h), Tensor(b)), Tensor(h0), Tensor(c0), Tensor(x))
        rh, rc = ref_lstm_step(w_x, w_h, b, h0, c0, x)
        np.testing.assert_allclose(h.data, rh, rtol=1e-14)
        np.testing.assert_allclose(c.data, rc, rtol=1e-14)

    def test_shape_mismatch(self):
        with pytest.raises(ContractError):
            lstm_step(self._zero_params(2, 3), Tensor(np.zeros(4)), Tensor(np.zeros(4)), Tensor(np.zeros(2)))


class TestGruStep:
    def test_zero_params_halve_hidden(self):
        g, m = 3, 2
        h_prev = rng.normal(size=g)
        params = GruParams(Tensor(np.zeros((m, 3 * g))), Tensor(np.zeros((g, 3 * g))), Tensor(np.zeros(3 * g)))
        h = gru_step(params, Tensor(h_prev), Tensor(np.zeros(m)))
        np.testing.assert_allclose(h.data, 0.5 * h_prev)

    def test_zero_hidden_zero_params(self):
        g, m = 3, 2
        params = GruParams(Tensor(np.zeros((m, 3 * g))), Tensor(np.zeros((g, 3 * g))), Tensor(np.zeros(3 * g)))
        h = gru_step(params, Tensor(np.zeros(g)), Tensor(rng.normal(size=m) * 0))
        np.testing.assert_array_equal(h.data, np.zeros(g))

    def test_matches_reference(self):
        g, m = 4, 5
        w_x, w_h, b = rng.normal(size=(m, 3 * g)), rng.normal(size=(g, 3 * g)), rng.normal(size=3 * g)
        h0, x = rng.normal(size=g), rng.normal(size=m)
        h = gru_step(GruParams(Tensor(w_x), Tensor(w_h), Tensor(b)), Tensor(h0), Tensor(x))
        np.testing.assert_allclose(h.data, ref_gru_step(w_x, w_h, b, h0, x), rtol=1e-14)


class TestAttention:
    def test_identical_keys_average_values(self):
        q = Tensor(rng.normal(size=(3, 2)))
        k = Tensor(np.tile(rng.normal(size=(1, 2)), (5, 1)))
        v = Tensor(rng.normal(size=(5, 4)))
        out = scaled_dot_attention(q, k, v)
        np.testing.assert_allclose(out.data, np.tile(v.data.mean(axis=0), (3, 1)))

    def test_single_row(self):
        v = rng.normal(size=(1, 3))
        out = scaled_dot_attention(Tensor(rng.normal(size=(4, 2))), Tensor(rng.normal(size=(1, 2))), Tensor(v))
        np.testing.assert_allclose(out.data, np.tile(v, (4, 1)))

    def test_hand_softmax_example(self):
        q = Tensor([[1.0, 0.0]])
        k = Tensor([[1.0, 0.0], [0.0, 1.0]])
        v = Tensor([[1.0, 0.0], [0.0, 1.0]])
        out, w = scaled_dot_attention(q, k, v, return_weights=True)
        expected = ref_softmax(np.array([1.0 / np.sqrt(2.0), 0.0]))
        np.testing.assert_allclose(w.data[0], expected, atol=1e-12)
        np.testing.assert_allclose(out.data[0], expected, atol=1e-12)
        np.testing.assert_allclose(out.data[0], [0.6698, 0.3302], atol=5e-5)

    def test_empty_keys_rejected(self):
        with pytest.raises(DomainError):
            scaled_dot_attention(Tensor(np.zeros((1, 2))), Tensor(np.zeros((0, 2))), Tensor(np.zeros((0, 3))))

    @given(st.integers(1, 5), st.integers(1, 6), st.integers(1, 4), st.integers(0, 2**32 - 1))
    @settings(max_examples=40, deadline=None)
    def test_rows_sum_to_one(self, n, m, width, seed):
        r = np.random.default_rng(seed)
        _, w = scaled_dot_attention(
            Tensor(r.normal(size=(n, width))), Tensor(r.normal(size=(m, width))),
            Tensor(r.normal(size=(m, 2))), return_weights=True,
        )
        np.testing.assert_allclose(w.data.sum(axis=1), np.ones(n), atol=1e-9)

    @given(st.integers(2, 6), st.integers(0, 2**32 - 1))
    @settings(max_examples=25, deadline=None)
    def test_permutation_equivariance(self, m, seed):
        r = np.random.default_rng(seed)
        q = r.normal(size=(3, 4))
        k = r.normal(size=(m, 4))
        v = r.normal(size=(m, 5))
        perm = r.permutation(m)
        out = scaled_dot_attention(Tensor(q), Tensor(k), Tensor(v))
        out_p = scaled_dot_attention(Tensor(q), Tensor(k[perm]), Tensor(v[perm]))
        np.testing.assert_allclose(out.data, out_p.data, atol=1e-12)


class TestLayerNorm:
    def test_constant_row_zeroed(self):
        out = layer_norm(Tensor(np.full((2, 4), 3.5)), Tensor(np.ones(4)), Tensor(np.zeros(4)))
        np.testing.assert_allclose(out.data, 0.0, atol=1e-12)

    def test_unit_variance_row(self):
        out = layer_norm(Tensor([[1.0, -1.0]]), Tensor(np.ones(2)), Tensor(np.zeros(2)))
        np.testing.assert_allclose(out.data, [[1.0, -1.0]], atol=1e-5)

    def test_shift_on_constant_rows(self):
        shift = rng.normal(size=4)
        out = layer_norm(Tensor(np.full((3, 4), 2.0)), Tensor(np.ones(4)), Tensor(shift))
        np.testing.assert_allclose(out.data, np.tile(shift, (3, 1)), atol=1e-12)

    def test_rejects_single_column(self):
        with pytest.raises(ContractError):
            layer_norm(Tensor(np.zeros((3, 1))), Tensor(np.ones(1)), Tensor(np.zeros(1)))


class TestBackward:
    def test_sum_of_parameter_gives_ones(self):
        p = Tensor(rng.normal(size=(3, 2)), requires=True)
        backward(p.sum())
        np.testing.assert_array_equal(p.grad, np.ones((3, 2)))

    def test_square_at_three(self):
        x = Tensor(np.array(3.0), requires=True)
        backward(nd.mul(x, x))
        np.testing.assert_allclose(x.grad, 6.0)

    def test_detached_node_rejected(self):
        with pytest.raises(ContractError):
            backward(Tensor(np.array(1.0), requires=True))

    def test_non_scalar_rejected(self):
        p = Tensor(rng.normal(size=3), requires=True)
        with pytest.raises(ContractError):
            backward(nd.mul(p, 2.0))

    def test_gradients_accumulate_until_reset(self):
        p = Tensor(rng.normal(size=3), requires=True)
        backward(p.sum())
        backward(p.sum())
        np.testing.assert_array_equal(p.grad, 2 * np.ones(3))

    def test_dense_leaky_chain_matches_finite_differences(self):
        def builder(x, w, b):
            return leaky_relu(dense(x, w, b)).sum()

        err = check_gradients(builder, [rng.normal(size=(2, 3)), rng.normal(size=(3, 4)), rng.normal(size=4)])
        assert err <= 1e-6


class TestCheckGradients:
    def test_dense_layer(self):
        def builder(x, w, b):
            return dense(x, w, b).sum()

        assert check_gradients(builder, [rng.normal(size=(2, 3)), rng.normal(size=(3, 2)), rng.normal(size=2)]) <= 1e-5

    def test_lstm(self):
        d, m = 3, 2

        def builder(wx, wh, b, h, c, x):
            h2, c2 = lstm_step(LstmParams(wx, wh, b), h, c, x)
            return nd.add(h2.sum(), c2.sum())

        point = [rng.normal(size=(m, 4 * d)), rng.normal(size=(d, 4 * d)), rng.normal(size=4 * d),
                 rng.normal(size=d), rng.normal(size=d), rng.normal(size=m)]
        assert check_gradients(builder, point) <= 1e-5


class TestAdam:
    def _params(self):
        ps = ParamSet()
        ps.add("w", rng.normal(size=(2, 2)))
        return ps

    def test_zero_grads_leave_params_unchanged(self):
        ps = self._params()
        before = ps["w"].data.copy()
        ps["w"].grad = np.zeros((2, 2))
        adam_update(ps, AdamState.for_params(ps), lr=0.1)
        np.testing.assert_array_equal(ps["w"].data, before)

    def test_first_step_is_signed_lr(self):
        ps = self._params()
        before = ps["w"].data.copy()
        g = rng.normal(size=(2, 2))
        ps["w"].grad = g.copy()
        adam_update(ps, AdamState.for_params(ps), lr=0.01)
        delta = ps["w"].data - before
        np.testing.assert_allclose(delta, -0.01 * np.sign(g), rtol=1e-6)

    def test_step_counter_increments(self):
        ps = self._params()
        state = AdamState.for_params(ps)
        ps["w"].grad = np.zeros((2, 2))
        adam_update(ps, state)
        assert state.step == 1
        adam_update(ps, state)
        assert state.step == 2

    def test_non_finite_gradient_names_parameter(self):
        ps = self._params()
        ps["w"].grad = np.full((2, 2), np.nan)
        with pytest.raises(TrainingError, match="'w'"):
            adam_update(ps, AdamState.for_params(ps))


class TestParamSet:
    def test_duplicate_names_rejected(self):
        ps = ParamSet()
        ps.add("a", np.zeros(2))
        with pytest.raises(ContractError):
            ps.add("a", np.zeros(2))

    def test_load_validates_shapes(self):
        ps = ParamSet()
        ps.add("a", np.zeros((2, 3)))
        with pytest.raises(ContractError):
            ps.load_arrays({"a": np.zeros((3, 2))})
        with pytest.raises(ContractError):
            ps.load_arrays({"b": np.zeros((2, 3))})


class TestForwardDeterminism:
    def test_repeat_forward_identical(self):
        x = rng.normal(size=(3, 4))
        w = rng.normal(size=(4, 4))
        b = rng.normal(size=4)
        a1 = leaky_relu(dense(Tensor(x), Tensor(w), Tensor(b))).data
        a2 = leaky_relu(dense(Tensor(x), Tensor(w), Tensor(b))).data
        np.testing.assert_array_equal(a1, a2)
