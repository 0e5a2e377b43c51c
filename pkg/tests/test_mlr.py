import mpmath
import numpy as np
import pytest
from numpy.testing import assert_allclose

from ctxal.mlr import (
    TEACHER_MODES,
    MlrModel,
    TeacherConfig,
    classify,
    classify_batch,
    fit,
    gradient,
    incremental_update,
    loss,
    softmax_rows,
    weak_teacher,
    zero_model,
)


def softmax_mpmath(row):
    mpmath.mp.dps = 50
    vals = [mpmath.exp(mpmath.mpf(float(v))) for v in row]
    total = sum(vals)
    return np.array([float(v / total) for v in vals])


class TestSoftmax:
    def test_matches_high_precision(self):
        rng = np.random.default_rng(0)
        z = rng.normal(scale=5.0, size=(6, 4))
        out = softmax_rows(z)
        for i in range(6):
            assert_allclose(out[i], softmax_mpmath(z[i]), rtol=1e-12)

    def test_rows_normalized_under_extreme_logits(self):
        z = np.array([[1000.0, 0.0, -1000.0], [-800.0, -800.0, -800.0]])
        out = softmax_rows(z)
        assert_allclose(out.sum(axis=1), [1.0, 1.0], atol=1e-12)
        assert np.all(np.isfinite(out))

    def test_classify_batch_agrees_with_single(self):
        rng = np.random.default_rng(1)
        model = MlrModel(theta=rng.normal(size=(3, 5)))
        X = rng.normal(size=(4, 5))
        batch = classify_batch(model, X)
        for i in range(4):
            assert_allclose(batch[i], classify(model, X[i]), atol=1e-14)


class TestLossAndGradient:
    def test_loss_value_manual(self):
        theta = np.zeros((2, 2))
        model = MlrModel(theta=theta, weight_decay=0.0)
        X = np.array([[1.0, 0.0]])
        y = np.array([0])
        # uniform prediction over two classes
        assert_allclose(loss(model, X, y), np.log(2.0), atol=1e-12)

    def test_ridge_term(self):
        theta = np.array([[1.0, 2.0], [0.0, -1.0]])
        m0 = MlrModel(theta=theta, weight_decay=0.0)
        m1 = MlrModel(theta=theta, weight_decay=0.5)
        X = np.array([[0.5, -0.2]])
        y = np.array([1])
        expected = loss(m0, X, y) + 0.25 * np.sum(theta ** 2)
        assert_allclose(loss(m1, X, y), expected, atol=1e-12)

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(2)
        for trial in range(10):
            q, d, m = 3, 4, 6
            model = MlrModel(theta=rng.normal(scale=0.5, size=(q, d)),
                             weight_decay=1e-3)
            X = rng.normal(size=(m, d))
            y = rng.integers(0, q, size=m)
            g = gradient(model, X, y)
            eps = 1e-6
            for _ in range(8):
                i = rng.integers(0, q)
                j = rng.integers(0, d)
                tp = model.theta.copy()
                tp[i, j] += eps
                tm = model.theta.copy()
                tm[i, j] -= eps
                fp = loss(MlrModel(theta=tp, weight_decay=1e-3), X, y)
                fm = loss(MlrModel(theta=tm, weight_decay=1e-3), X, y)
                fd = (fp - fm) / (2 * eps)
                denom = max(abs(fd), abs(g[i, j]), 1e-8)
                assert abs(fd - g[i, j]) / denom < 1e-5

    def test_objective_is_convex_along_segments(self):
        rng = np.random.default_rng(3)
        q, d, m = 4, 3, 10
        X = rng.normal(size=(m, d))
        y = rng.integers(0, q, size=m)
        for _ in range(50):
            ta = rng.normal(scale=2.0, size=(q, d))
            tb = rng.normal(scale=2.0, size=(q, d))
            fa = loss(MlrModel(theta=ta, weight_decay=1e-3), X, y)
            fb = loss(MlrModel(theta=tb, weight_decay=1e-3), X, y)
            fm = loss(MlrModel(theta=0.5 * (ta + tb), weight_decay=1e-3), X, y)
            assert fm <= 0.5 * (fa + fb) + 1e-10

    def test_fit_reduces_loss(self):
        rng = np.random.default_rng(4)
        q, d, m = 3, 4, 60
        theta_true = rng.normal(scale=2.0, size=(q, d))
        X = rng.normal(size=(m, d))
        y = np.argmax(X @ theta_true.T, axis=1)
        model = zero_model(q, d)
        before = loss(model, X, y)
        fitted = fit(model, X, y, epochs=300)
        after = loss(fitted, X, y)
        assert after < before * 0.5
        preds = np.argmax(classify_batch(fitted, X), axis=1)
        assert np.mean(preds == y) > 0.9


class TestIncrementalUpdates:
    def test_buffer_holds_until_capacity(self):
        model = zero_model(2, 2, buffer_capacity=4)
        X = np.array([[1.0, 0.0]])
        y = np.array([0])
        m1 = incremental_update(model, X, y)
        assert_allclose(m1.theta, model.theta)
        assert len(m1.buffer_y) == 1
        assert m1.update_rounds == 0

    def test_flush_trains_and_clears(self):
        rng = np.random.default_rng(5)
        model = zero_model(2, 3, buffer_capacity=4)
        lr0 = model.learning_rate
        X = rng.normal(size=(4, 3))
        y = np.array([0, 1, 0, 1])
        m1 = incremental_update(model, X, y)
        assert m1.update_rounds == 1
        assert len(m1.buffer_y) == 0
        assert not np.allclose(m1.theta, 0.0)
        # learning rate decays once per flush
        assert m1.learning_rate == pytest.approx(lr0 * model.lr_decay)

    def test_flush_threshold_counts_existing_buffer(self):
        rng = np.random.default_rng(6)
        model = zero_model(2, 2, buffer_capacity=3)
        m1 = incremental_update(model, rng.normal(size=(2, 2)), np.array([0, 1]))
        assert m1.update_rounds == 0
        m2 = incremental_update(m1, rng.normal(size=(1, 2)), np.array([0]))
        assert m2.update_rounds == 1
        assert len(m2.buffer_y) == 0

    def test_updates_apply_in_place(self):
        model = zero_model(2, 2, buffer_capacity=2)
        out = incremental_update(model, np.eye(2), np.array([0, 1]))
        assert out is model
        assert model.update_rounds == 1


class TestWeakTeacher:
    def test_strict_threshold(self):
        marg = {
            "a": np.array([0.95, 0.05]),
            "b": np.array([0.9, 0.1]),
            "c": np.array([0.2, 0.8]),
        }
        out = weak_teacher(marg, delta=0.9)
        assert out == {"a": 0}

    def test_exclusion(self):
        marg = {"a": np.array([0.99, 0.01]), "b": np.array([0.99, 0.01])}
        out = weak_teacher(marg, delta=0.5, exclude={"a"})
        assert out == {"b": 0}

    def test_invalid_delta(self):
        with pytest.raises(ValueError):
            weak_teacher({}, delta=0.0)
        with pytest.raises(ValueError):
            weak_teacher({}, delta=1.5)


class TestTeacherConfig:
    def test_modes_enumerated(self):
        assert set(TEACHER_MODES) == {
            "strong_only", "weak_only", "strong_plus_weak", "all_instances"}

    def test_budget_variants(self):
        assert TeacherConfig(mode="all_instances").batch_budget(40) == 40
        assert TeacherConfig(mode="weak_only").batch_budget(40) == 0
        assert TeacherConfig(k_absolute=5).batch_budget(40) == 5
        assert TeacherConfig(k_absolute=50).batch_budget(40) == 40
        assert TeacherConfig(k_fraction=0.4).batch_budget(50) == 20
        assert TeacherConfig(k_fraction=0.01).batch_budget(10) == 1
        assert TeacherConfig().batch_budget(40) == 10  # default quarter
        assert TeacherConfig().batch_budget(0) == 0

    def test_teacher_composition_flags(self):
        assert TeacherConfig(mode="strong_only").uses_strong
        assert not TeacherConfig(mode="strong_only").uses_weak
        assert TeacherConfig(mode="weak_only").uses_weak
        assert not TeacherConfig(mode="weak_only").uses_strong
        both = TeacherConfig(mode="strong_plus_weak")
        assert both.uses_strong and both.uses_weak

    def test_validation(self):
        with pytest.raises(ValueError):
            TeacherConfig(mode="nonsense")
        with pytest.raises(ValueError):
            TeacherConfig(delta=0.0)
        with pytest.raises(ValueError):
            TeacherConfig(k_absolute=0)
        with pytest.raises(ValueError):
            TeacherConfig(k_fraction=1.5)
