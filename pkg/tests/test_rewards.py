"""Reward engine: fast paths vs dense oracles, invariance, FIM recursion."""

import numpy as np
import pytest

from submodcur.objectives import Selection
from submodcur.rewards import (
    FIM_DIM_GUARD,
    GradientMatrix,
    HessianApprox,
    arm_reward,
    batchwise_gain,
    exact_utility,
    fim_update,
    pairwise_gain,
    samplewise_gain,
)

IDENTITY = HessianApprox(kind="identity")


def dense_samplewise_oracle(columns, val_grad, h_mat, lr):
    """Literal dense-matrix form of the sample-wise expected gain:
    lr * gbar . g_val - lr^2 * gbar^T (I - (1/m) * ones(d, m) G^T) H gbar."""
    d, m = columns.shape
    gbar = columns.mean(axis=1)
    middle = np.eye(d) - (1.0 / m) * np.ones((d, m)) @ columns.T
    return lr * gbar @ val_grad - lr**2 * gbar @ middle @ h_mat @ gbar


def dense_batchwise_oracle(batch_means, val_grad, h_mat, lr):
    """Cross terms over distinct batch pairs, written as an explicit loop."""
    d, k = batch_means.shape
    term1 = lr * batch_means.sum(axis=1) @ val_grad
    term2 = 0.0
    for i in range(k):
        for j in range(k):
            if i != j:
                term2 += batch_means[:, i] @ h_mat @ batch_means[:, j]
    return term1 - lr**2 * term2


class TestExactUtility:
    def test_reduction(self):
        assert exact_utility(0.9, 0.7) == pytest.approx(0.2)

    def test_no_change(self):
        assert exact_utility(1.3, 1.3) == 0.0

    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError):
            exact_utility(float("nan"), 0.0)


class TestSamplewiseGain:
    def test_zero_gradients(self):
        grads = GradientMatrix(np.zeros((3, 4)))
        assert samplewise_gain(grads, np.ones(3), IDENTITY, 0.1) == 0.0

    def test_zero_lr(self, rng):
        grads = GradientMatrix(rng.standard_normal((3, 4)))
        assert samplewise_gain(grads, rng.standard_normal(3), IDENTITY, 0.0) \
            == 0.0

    def test_reference_instance(self):
        grads = GradientMatrix(np.array([[1.0, 0.0], [0.0, 1.0]]))
        got = samplewise_gain(grads, np.ones(2), IDENTITY, 0.1)
        expected = dense_samplewise_oracle(grads.columns, np.ones(2),
                                           np.eye(2), 0.1)
        assert got == pytest.approx(expected, rel=1e-12)

    def test_dense_oracle_identity(self, rng):
        for _ in range(60):
            d, m = int(rng.integers(1, 16)), int(rng.integers(1, 16))
            columns = rng.standard_normal((d, m))
            val = rng.standard_normal(d)
            lr = float(rng.random()) * 0.5 + 1e-3
            got = samplewise_gain(GradientMatrix(columns), val, IDENTITY, lr)
            want = dense_samplewise_oracle(columns, val, np.eye(d), lr)
            assert got == pytest.approx(want, rel=1e-10, abs=1e-12)

    def test_dense_oracle_fim(self, rng):
        for _ in range(30):
            d, m = int(rng.integers(1, 10)), int(rng.integers(1, 10))
            columns = rng.standard_normal((d, m))
            val = rng.standard_normal(d)
            g = rng.standard_normal((d, d))
            h_mat = g @ g.T
            hessian = HessianApprox(kind="fim-ema", fim_state=h_mat)
            got = samplewise_gain(GradientMatrix(columns), val, hessian, 0.05)
            want = dense_samplewise_oracle(columns, val, h_mat, 0.05)
            assert got == pytest.approx(want, rel=1e-10, abs=1e-12)

    def test_dimension_mismatch(self, rng):
        grads = GradientMatrix(rng.standard_normal((3, 2)))
        with pytest.raises(ValueError):
            samplewise_gain(grads, np.ones(4), IDENTITY, 0.1)

    def test_bit_identical_permutation_invariance(self, rng):
        columns = rng.standard_normal((8, 16))
        val = rng.standard_normal(8)
        base = samplewise_gain(GradientMatrix(columns), val, IDENTITY, 0.1)
        for _ in range(200):
            perm = rng.permutation(16)
            shuffled = samplewise_gain(GradientMatrix(columns[:, perm]), val,
                                       IDENTITY, 0.1)
            assert shuffled == base  # exact equality, not approx

    def test_first_order_limit(self, rng):
        columns = rng.standard_normal((5, 7))
        gbar = columns.mean(axis=1)
        val = rng.standard_normal(5)
        for lr in (1e-4, 1e-6, 1e-8):
            ratio = samplewise_gain(GradientMatrix(columns), val,
                                    IDENTITY, lr) / lr
            assert ratio == pytest.approx(float(gbar @ val), abs=1e-3 * lr / 1e-8)


class TestPairwiseGain:
    def test_orthogonal(self):
        gain, t1, t2 = pairwise_gain(np.array([1.0, 0.0]), np.array([0.0, 1.0]),
                                     np.array([0.0, 1.0]), IDENTITY, 0.1)
        assert gain == 0.0 and t1 == 0.0 and t2 == 0.0

    def test_unit_vector_arithmetic(self):
        e1 = np.array([1.0, 0.0])
        gain, t1, t2 = pairwise_gain(e1, e1, e1, IDENTITY, 0.1)
        assert t1 == pytest.approx(0.1)
        assert t2 == pytest.approx(0.01)
        assert gain == pytest.approx(0.09)

    def test_first_order_limit(self, rng):
        g_i = rng.standard_normal(4)
        g_val = rng.standard_normal(4)
        prefix = rng.standard_normal(4)
        for lr in (1e-5, 1e-7):
            gain, _, _ = pairwise_gain(g_i, g_val, prefix, IDENTITY, lr)
            assert gain / lr == pytest.approx(float(g_i @ g_val), abs=1e-4)


class TestArmReward:
    def test_single_val_full_selection_equals_samplewise(self, rng):
        columns = rng.standard_normal((4, 6))
        val = rng.standard_normal((4, 1))
        est = arm_reward(0, Selection(list(range(6)), 0.0, [], 6),
                         GradientMatrix(columns), GradientMatrix(val),
                         IDENTITY, 0.1)
        direct = samplewise_gain(GradientMatrix(columns), val[:, 0],
                                 IDENTITY, 0.1)
        assert est.value == pytest.approx(direct, rel=1e-12)

    def test_duplicate_validation_columns(self, rng):
        columns = rng.standard_normal((4, 5))
        v = rng.standard_normal(4)
        one = arm_reward(0, [0, 2], GradientMatrix(columns),
                         GradientMatrix(v[:, None]), IDENTITY, 0.1)
        dup = arm_reward(0, [0, 2], GradientMatrix(columns),
                         GradientMatrix(np.column_stack([v, v])), IDENTITY, 0.1)
        assert dup.value == pytest.approx(one.value, rel=1e-12)

    def test_nested_loop_oracle(self, rng):
        # mean over validation columns of the dense sample-wise oracle on
        # the selected columns
        columns = rng.standard_normal((3, 4))
        vals = rng.standard_normal((3, 3))
        chosen = [1, 3]
        est = arm_reward(2, chosen, GradientMatrix(columns),
                         GradientMatrix(vals), IDENTITY, 0.2)
        expected = np.mean([
            dense_samplewise_oracle(columns[:, chosen], vals[:, j],
                                    np.eye(3), 0.2)
            for j in range(3)
        ])
        assert est.arm == 2
        assert est.value == pytest.approx(expected, rel=1e-10)

    def test_decomposition_identity_is_exact(self, rng):
        columns = rng.standard_normal((5, 8))
        vals = rng.standard_normal((5, 2))
        est = arm_reward(0, [0, 4, 6], GradientMatrix(columns),
                         GradientMatrix(vals), IDENTITY, 0.3)
        assert est.value == est.term1 - est.term2  # bit-exact per invariant

    def test_empty_selection_rejected(self, rng):
        with pytest.raises(ValueError, match="empty"):
            arm_reward(0, [], GradientMatrix(rng.standard_normal((3, 3))),
                       GradientMatrix(rng.standard_normal((3, 1))),
                       IDENTITY, 0.1)


class TestBatchwiseGain:
    def test_single_batch_second_term_vanishes(self, rng):
        means = rng.standard_normal((4, 1))
        val = rng.standard_normal(4)
        got = batchwise_gain(means, val, IDENTITY, 0.1)
        assert got == pytest.approx(0.1 * float(means[:, 0] @ val), rel=1e-12)

    def test_zero_means(self):
        assert batchwise_gain(np.zeros((3, 4)), np.ones(3), IDENTITY, 0.1) == 0.0

    def test_dense_oracle(self, rng):
        for _ in range(40):
            d, k = int(rng.integers(1, 8)), int(rng.integers(1, 8))
            means = rng.standard_normal((d, k))
            val = rng.standard_normal(d)
            g = rng.standard_normal((d, d))
            h_mat = g @ g.T
            hessian = HessianApprox(kind="fim-ema", fim_state=h_mat)
            got = batchwise_gain(means, val, hessian, 0.07)
            want = dense_batchwise_oracle(means, val, h_mat, 0.07)
            assert got == pytest.approx(want, rel=1e-10, abs=1e-12)


class TestFim:
    def test_base_case_outer_product(self):
        g = np.array([[1.0], [2.0]])
        state = fim_update(HessianApprox(kind="fim-ema", momentum=0.3),
                           GradientMatrix(g))
        np.testing.assert_allclose(state.fim_state, g @ g.T)

    def test_full_replacement_at_alpha_one(self, rng):
        cols = rng.standard_normal((3, 4))
        state = HessianApprox(kind="fim-ema", momentum=1.0,
                              fim_state=np.eye(3) * 7.0)
        new = fim_update(state, GradientMatrix(cols))
        np.testing.assert_allclose(new.fim_state, cols @ cols.T / 4.0)

    def test_two_step_hand_unrolled(self):
        g1 = np.array([[1.0, 0.0], [0.0, 2.0]])   # two columns
        g2 = np.array([[1.0], [1.0]])
        state = HessianApprox(kind="fim-ema", momentum=0.5)
        state = fim_update(state, GradientMatrix(g1))
        h0 = (np.outer(g1[:, 0], g1[:, 0]) + np.outer(g1[:, 1], g1[:, 1])) / 2.0
        np.testing.assert_allclose(state.fim_state, h0)
        state = fim_update(state, GradientMatrix(g2))
        h1 = 0.5 * h0 + 0.5 * np.outer(g2[:, 0], g2[:, 0])
        np.testing.assert_allclose(state.fim_state, h1)

    def test_stays_symmetric_psd(self, rng):
        state = HessianApprox(kind="fim-ema", momentum=0.2)
        for _ in range(20):
            cols = rng.standard_normal((5, int(rng.integers(1, 6))))
            state = fim_update(state, GradientMatrix(cols))
            np.testing.assert_array_equal(state.fim_state, state.fim_state.T)
            eigs = np.linalg.eigvalsh(state.fim_state)
            assert eigs.min() >= -1e-8

    def test_dimension_mismatch(self, rng):
        state = fim_update(HessianApprox(kind="fim-ema"),
                           GradientMatrix(rng.standard_normal((3, 2))))
        with pytest.raises(ValueError, match="dimension"):
            fim_update(state, GradientMatrix(rng.standard_normal((4, 2))))

    def test_dimension_guard(self):
        d = FIM_DIM_GUARD + 1
        grads = GradientMatrix(np.ones((d, 1)))
        with pytest.raises(ValueError, match="fim-ema"):
            samplewise_gain(grads, np.ones(d),
                            HessianApprox(kind="fim-ema"), 0.1)

    def test_momentum_validation(self):
        with pytest.raises(ValueError, match="momentum"):
            HessianApprox(kind="fim-ema", momentum=0.0)


class TestTaylorConsistency:
    def test_quadratic_loss_error_is_second_order(self, rng):
        # per-sample loss 0.5 * ||theta - c_z||^2: exact one-step utility is
        # lr * gbar . g_val - 0.5 * lr^2 * ||gbar||^2; the estimator's error
        # against it must shrink like lr^2 (bounded ratio, shrinking error)
        for _ in range(25):
            d, m = 6, 5
            theta = rng.standard_normal(d)
            centers = rng.standard_normal((m, d))
            c_val = rng.standard_normal(d)
            columns = (theta[:, None] - centers.T)
            g_val = theta - c_val
            errors, ratios = [], []
            for lr in (1e-2, 1e-3, 1e-4):
                gbar = columns.mean(axis=1)
                theta_next = theta - lr * gbar
                exact = exact_utility(0.5 * np.sum((theta - c_val) ** 2),
                                      0.5 * np.sum((theta_next - c_val) ** 2))
                approx = samplewise_gain(GradientMatrix(columns), g_val,
                                         IDENTITY, lr)
                errors.append(abs(exact - approx))
                ratios.append(abs(exact - approx) / lr**2)
            assert errors[0] > errors[1] > errors[2]
            assert max(ratios) < 1e3
            # the ratio stays bounded as lr shrinks (error truly O(lr^2))
            assert ratios[2] <= ratios[0] * (1.0 + 1e-6)
