import numpy as np
import pytest

from ecdiff.numerics import (
    AdamState,
    NumericsError,
    SeededRng,
    Tensor,
    adam_step,
    backward,
    concat,
    embedding_lookup,
    finite_diff_check,
    gelu,
    layernorm,
    matmul,
    no_grad,
    relu,
    reshape,
    softmax,
    tabs,
    take,
    texp,
    tmax,
    tmean,
    tmin,
    tsqrt,
    tsum,
    transpose,
    zero_grad,
)


class TestOps:
    def test_matmul_identity(self):
        out = matmul(Tensor([[1.0, 0.0], [0.0, 1.0]]), Tensor([[2.0], [3.0]]))
        np.testing.assert_array_equal(out.array, [[2.0], [3.0]])

    def test_softmax_symmetry(self):
        out = softmax(Tensor([0.0, 0.0]))
        np.testing.assert_allclose(out.array, [0.5, 0.5], atol=1e-15)

    def test_layernorm_two_points(self):
        # mean 2, population std 1
        out = layernorm(Tensor([1.0, 3.0]))
        np.testing.assert_allclose(out.array, [-1.0, 1.0], atol=1e-9)

    def test_softmax_rows_sum_to_one(self):
        rng = SeededRng(7)
        x = Tensor(rng.normal((20, 13)) * 5.0)
        sums = softmax(x, axis=-1).array.sum(axis=-1)
        np.testing.assert_allclose(sums, 1.0, atol=1e-12)

    def test_layernorm_rows_zero_mean(self):
        rng = SeededRng(8)
        x = Tensor(rng.normal((50, 9)) * 3.0 + 1.0)
        means = layernorm(x).array.mean(axis=-1)
        assert np.abs(means).max() < 1e-10

    def test_shape_mismatch_raises(self):
        with pytest.raises(NumericsError):
            matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))

    def test_non_finite_raises(self):
        with pytest.raises(NumericsError):
            Tensor([np.nan])
        with pytest.raises(NumericsError):
            texp(Tensor([1e400 if False else 1000.0]))  # exp(1000) overflows


class TestBackward:
    def test_square(self):
        x = Tensor([3.0], requires_grad=True)
        backward(tsum(x * x))
        np.testing.assert_allclose(x.grad, [6.0])

    def test_abs_negative_and_kink(self):
        x = Tensor([-2.0, 0.0], requires_grad=True)
        backward(tsum(tabs(x)))
        np.testing.assert_array_equal(x.grad, [-1.0, 0.0])

    def test_product_rule(self):
        x = Tensor([2.0], requires_grad=True)
        y = Tensor([5.0], requires_grad=True)
        backward(tsum(x * y))
        np.testing.assert_allclose(x.grad, [5.0])
        np.testing.assert_allclose(y.grad, [2.0])

    def test_accumulation_scales_with_uses(self):
        x = Tensor([1.5, -0.5], requires_grad=True)
        backward(tsum(x + x + x))
        np.testing.assert_allclose(x.grad, [3.0, 3.0])

    def test_grad_accumulates_across_backwards(self):
        x = Tensor([2.0], requires_grad=True)
        backward(tsum(x * x))
        backward(tsum(x * x))
        np.testing.assert_allclose(x.grad, [8.0])

    def test_non_scalar_raises(self):
        x = Tensor([1.0, 2.0], requires_grad=True)
        with pytest.raises(NumericsError):
            backward(x * x)

    def test_no_grad_suppresses_tape(self):
        x = Tensor([1.0], requires_grad=True)
        with no_grad():
            y = x * x
        assert not y.requires_grad
        with pytest.raises(NumericsError):
            backward(tsum(y))


class TestGradientsAgainstFiniteDifferences:
    """Every differentiable op, randomized inputs, >= 100 cases total."""

    def _check(self, build, n_inputs, shapes, seed, cases, tol=1e-4):
        rng = SeededRng(seed)
        worst = 0.0
        for _ in range(cases):
            params = [Tensor(rng.normal(s) * 0.8 + 0.1, requires_grad=True) for s in shapes[:n_inputs]]
            report = finite_diff_check(lambda: build(*params), params, epsilon=1e-6, tolerance=tol)
            worst = max(worst, report.max_rel_error)
        assert worst < tol, f"max rel err {worst}"

    def test_arithmetic_ops(self):
        self._check(lambda a, b: tsum(a * b + a - b), 2, [(3, 4), (3, 4)], 11, 15)

    def test_matmul(self):
        self._check(lambda a, b: tsum(matmul(a, b) * matmul(a, b)), 2, [(3, 4), (4, 2)], 12, 10)

    def test_batched_matmul(self):
        self._check(lambda a, b: tsum(matmul(a, b)), 2, [(2, 3, 4), (2, 4, 2)], 13, 10)

    def test_matmul_broadcast_weight(self):
        self._check(lambda a, b: tsum(tabs(matmul(a, b))), 2, [(2, 3, 4), (4, 5)], 14, 10)

    def test_softmax(self):
        self._check(lambda a: tsum(softmax(a, axis=-1) * softmax(a, axis=-1)), 1, [(4, 5)], 15, 10)

    def test_layernorm(self):
        self._check(lambda a: tsum(tabs(layernorm(a))), 1, [(3, 7)], 16, 10)

    def test_nonlinearities(self):
        self._check(lambda a: tsum(gelu(a) + relu(a) * 0.5), 1, [(5, 5)], 17, 10)

    def test_exp_sqrt(self):
        rng = SeededRng(18)
        for _ in range(10):
            p = Tensor(rng.uniform((4, 3)) * 2.0 + 0.5, requires_grad=True)
            report = finite_diff_check(lambda: tsum(tsqrt(p) + texp(p * 0.3)), [p])
            assert report.ok

    def test_reductions_and_shapes(self):
        self._check(
            lambda a: tsum(tmean(reshape(a, (6, 2)), axis=0) * 2.0)
            + tsum(transpose(a, (1, 0))[1:, :]),
            1, [(3, 4)], 19, 10,
        )

    def test_min_max(self):
        self._check(lambda a: tsum(tmin(a, axis=1)) + tsum(tmax(a, axis=0)), 1, [(4, 5)], 20, 10)

    def test_concat_take_lookup(self):
        def build(a, b):
            joined = concat([a, b], axis=0)
            rows = take(joined, np.array([0, 2, 2, 5]), axis=0)
            emb = embedding_lookup(joined, np.array([1, 1, 4]))
            return tsum(rows) + tsum(emb * emb)

        self._check(build, 2, [(3, 4), (3, 4)], 21, 10)

    def test_slicing(self):
        self._check(lambda a: tsum(a[1:3, ::2] * 3.0), 1, [(4, 6)], 22, 5)


class TestAdam:
    def test_first_step_magnitude(self):
        p = Tensor(np.zeros(3), requires_grad=True)
        state = AdamState.for_params([p], lr=1e-3, eps=1e-12)
        adam_step([p], [np.ones(3)], state)
        # bias-corrected first step: m_hat = g, v_hat = g^2 -> update = lr * sign(g)
        np.testing.assert_allclose(p.array, -1e-3 * np.ones(3), rtol=1e-6)
        assert state.step_count == 1

    def test_zero_grad_no_motion(self):
        p = Tensor([1.0, -2.0], requires_grad=True)
        state = AdamState.for_params([p], lr=0.1)
        adam_step([p], [np.zeros(2)], state)
        np.testing.assert_array_equal(p.array, [1.0, -2.0])

    def test_deterministic(self):
        def run():
            rng = SeededRng(5)
            p = Tensor(rng.normal(4), requires_grad=True)
            state = AdamState.for_params([p], lr=1e-2)
            for _ in range(5):
                adam_step([p], [rng.normal(4)], state)
            return p.array.copy()

        np.testing.assert_array_equal(run(), run())

    def test_shape_mismatch(self):
        p = Tensor([1.0], requires_grad=True)
        state = AdamState.for_params([p])
        with pytest.raises(NumericsError):
            adam_step([p], [np.zeros(3)], state)


class TestFiniteDiffCheck:
    def test_quadratic_exact(self):
        x = Tensor([1.0, 2.0], requires_grad=True)
        report = finite_diff_check(lambda: tsum(x * x), [x], epsilon=1e-6)
        assert report.max_rel_error < 1e-6

    def test_constant_function(self):
        x = Tensor([1.0, 2.0], requires_grad=True)
        c = Tensor([4.0])
        report = finite_diff_check(lambda: tsum(c + x * 0.0), [x])
        assert report.max_rel_error < 1e-9

    def test_nondeterministic_rejected(self):
        x = Tensor([1.0], requires_grad=True)
        stream = SeededRng(0)

        def f():
            return tsum(x * stream.uniform())

        with pytest.raises(NumericsError):
            finite_diff_check(f, [x])

    def test_epsilon_bounds(self):
        x = Tensor([1.0], requires_grad=True)
        with pytest.raises(NumericsError):
            finite_diff_check(lambda: tsum(x), [x], epsilon=1e-2)


class TestSeededRng:
    def test_bit_identical_streams(self):
        a, b = SeededRng(123), SeededRng(123)
        np.testing.assert_array_equal(a.normal(1000), b.normal(1000))
        np.testing.assert_array_equal(a.uniform(1000), b.uniform(1000))

    def test_stream_depends_on_seed(self):
        assert not np.array_equal(SeededRng(1).normal(100), SeededRng(2).normal(100))

    def test_normal_moments(self):
        z = SeededRng(99).normal(200_000)
        assert abs(z.mean()) < 3.0 / np.sqrt(z.size)
        assert abs(z.var() - 1.0) < 3.0 * np.sqrt(2.0 / z.size)

    def test_uniform_range(self):
        u = SeededRng(3).uniform(100_000)
        assert u.min() >= 0.0 and u.max() < 1.0
        assert abs(u.mean() - 0.5) < 0.005

    def test_integers_cover_range(self):
        r = SeededRng(17)
        draws = r.integers(0, 5, 10_000)
        assert set(np.unique(draws)) == {0, 1, 2, 3, 4}

    def test_permutation_is_permutation(self):
        r = SeededRng(6)
        for n in [1, 2, 5, 12]:
            assert sorted(r.permutation(n).tolist()) == list(range(n))

    def test_spawn_independent(self):
        root = SeededRng(55)
        a, b = root.spawn(0), root.spawn(1)
        assert a.seed != b.seed
        assert not np.array_equal(a.normal(50), b.normal(50))
        # spawning does not consume from the parent stream
        np.testing.assert_array_equal(root.normal(4), SeededRng(55).normal(4))

    def test_counter_advances_identically_for_odd_draws(self):
        a, b = SeededRng(9), SeededRng(9)
        a.normal(3)
        b.normal(3)
        np.testing.assert_array_equal(a.normal(4), b.normal(4))


def test_zero_grad_clears():
    x = Tensor([1.0], requires_grad=True)
    backward(tsum(x * x))
    assert x.grad is not None
    zero_grad([x])
    assert x.grad is None
