"""Tensor helpers, SplitMix64 stream and gradient checking"""

import numpy as np
import pytest

from layers.dist_neuron import dist_neuron_forward, dist_neuron_grad, tie_mask
from layers.neuron_mode import Exact, LogSumExp
from numcore.grad_check import grad_check
from numcore.rng import GAMMA, MASK64, Rng, rng_uniform
from numcore.tensor import as_batch, as_tensor, check_finite, flat_offset
from utils.errors import InvalidRangeError, NumericError, ParameterError, ShapeError


class TestTensor:

    def test_row_major_offsets_match_counting_tensor(self):
        counting = np.arange(12, dtype=np.float64).reshape(3, 4)
        flat = counting.ravel()
        for i in range(3):
            for j in range(4):
                offset = flat_offset((3, 4), (i, j))
                assert offset == i * 4 + j
                assert flat[offset] == counting[i, j]

    def test_offset_out_of_bounds(self):
        with pytest.raises(ShapeError):
            flat_offset((3, 4), (3, 0))
        with pytest.raises(ShapeError):
            flat_offset((3, 4), (1,))

    def test_as_tensor_checks_shape(self):
        assert as_tensor([[1, 2]]).dtype == np.float64
        with pytest.raises(ShapeError):
            as_tensor([1.0, 2.0], shape=(3,))

    def test_check_finite_names_location(self):
        bad = np.array([[0.0, 1.0], [np.nan, 2.0]])
        with pytest.raises(NumericError) as exc:
            check_finite(bad, "weights")
        assert exc.value.location == ("weights", (1, 0))

    def test_as_batch(self):
        batch, single = as_batch([1.0, 2.0], width=2)
        assert single and batch.shape == (1, 2)
        with pytest.raises(ShapeError):
            as_batch([[1.0, 2.0]], width=3)


class TestRng:

    def test_degenerate_range(self):
        assert rng_uniform(Rng(1), 0.0, 0.0) == 0.0

    def test_inverted_range(self):
        with pytest.raises(InvalidRangeError):
            rng_uniform(Rng(1), 1.0, 0.0)

    def test_seeded_draws_repeat(self):
        rng = Rng(42)
        first = [rng_uniform(rng, 0.0, 1.0), rng_uniform(rng, 0.0, 1.0)]
        assert first[0] != first[1]
        rng = Rng(42)
        assert [rng_uniform(rng, 0.0, 1.0), rng_uniform(rng, 0.0, 1.0)] == first

    def test_uniform_advances_one_step(self):
        rng = Rng(9)
        value = rng.uniform(2.0, 3.0)
        assert 2.0 <= value < 3.0
        assert rng.state == (9 + GAMMA) & MASK64

    def test_mean_of_ten_thousand_draws(self):
        rng = Rng(42)
        draws = [rng_uniform(rng, 0.0, 1.0) for _ in range(10 ** 4)]
        assert abs(np.mean(draws) - 0.5) <= 0.02

    def test_equal_seeds_give_equal_prefixes(self):
        a = Rng(123456789).next_u64_array(10 ** 6)
        b = Rng(123456789).next_u64_array(10 ** 6)
        np.testing.assert_array_equal(a, b)

    def test_scalar_and_vector_paths_agree(self):
        scalar = Rng(3)
        values = np.array([scalar.next_u64() for _ in range(200)], dtype=np.uint64)
        np.testing.assert_array_equal(values, Rng(3).next_u64_array(200))

        scalar = Rng(5)
        floats = [scalar.uniform(-1.0, 1.0) for _ in range(50)]
        np.testing.assert_array_equal(floats, Rng(5).uniform_array(50, -1.0, 1.0))

    def test_spawn_xors_stream_index(self):
        assert Rng(0b1010).spawn(0b0110).seed == 0b1100

    def test_permutation(self):
        perm = Rng(4).permutation(100)
        assert sorted(perm.tolist()) == list(range(100))

    def test_randint_range(self):
        rng = Rng(8)
        values = {rng.randint(3) for _ in range(200)}
        assert values == {0, 1, 2}
        with pytest.raises(ParameterError):
            rng.randint(0)


class TestGradCheck:

    def test_quadratic(self):
        report = grad_check(lambda x: float(np.sum(x ** 2)), lambda x: 2.0 * x, [1.0, 2.0], h=1e-5)
        assert report.passed
        assert report.checked == 2
        assert report.max_rel_err <= 1e-8

    def test_lse_neuron(self):
        w = np.array([0.0, 0.1, -0.05, 0.2])
        z = np.array([0.3, -0.2, 0.25, 0.1])
        mode = LogSumExp(20)
        report = grad_check(lambda v: dist_neuron_forward(v, w, 0.3, mode),
                            lambda v: dist_neuron_grad(v, w, 0.3, mode)[0], z, h=1e-6, tol=1e-4)
        assert report.passed
        assert report.checked == 4

    def test_exact_tie_is_flagged_and_skipped(self):
        z = np.array([1.0, -1.0, 0.2])
        w = np.zeros(3)
        report = grad_check(lambda v: dist_neuron_forward(v, w, 0.0, Exact()),
                            lambda v: dist_neuron_grad(v, w, 0.0, Exact())[0], z,
                            ties=lambda v: tie_mask(v - w))
        assert report.ties == [0, 1]
        assert report.skipped == [0, 1]
        assert report.near_zero == [2]
        assert report.checked == 1
        assert report.passed

    def test_wrong_gradient_fails(self):
        report = grad_check(lambda x: float(np.sum(x ** 2)), lambda x: 3.0 * x, [1.0, 2.0])
        assert not report.passed
        assert report.max_rel_err == pytest.approx(1.0 / 3.0, rel=1e-6)

    def test_large_offset_does_not_hide_wrong_gradient(self):
        def f(x):
            return 1e6 + float(np.sum(x))

        wrong = grad_check(f, lambda x: np.full(2, 2.0), [0.3, 0.7], h=1e-6, tol=1e-4)
        assert wrong.checked == 2
        assert wrong.skipped == []
        assert not wrong.passed
        right = grad_check(f, lambda x: np.ones(2), [0.3, 0.7], h=1e-6, tol=1e-4)
        assert right.checked == 2
        assert right.passed

    def test_zero_gradient_against_nonzero_fails(self):
        report = grad_check(lambda x: float(np.sum(x ** 2)), lambda x: np.zeros(2), [1.0, 2.0])
        assert report.checked == 2
        assert not report.passed

    def test_non_finite_value_names_coordinate(self):
        def f(x):
            return float(np.sum(x)) if x[1] <= 1.0 else np.inf

        with pytest.raises(NumericError) as exc:
            grad_check(f, lambda x: np.ones(2), [0.5, 1.0])
        assert exc.value.location == 1

    def test_step_must_be_positive(self):
        with pytest.raises(ParameterError):
            grad_check(lambda x: 0.0, lambda x: np.zeros(1), [0.0], h=0.0)
