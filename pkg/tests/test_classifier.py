import numpy as np
import pytest

from cfv import classifier as clf
from cfv.errors import ValidationError

TIGHT = clf.TrainConfig(C=1.0, max_epochs=5000, tolerance=1e-10)


def toy(rng, n=20):
    pos = np.column_stack([2 + rng.random(n), rng.standard_normal(n)])
    neg = np.column_stack([-2 - rng.random(n), rng.standard_normal(n)])
    return np.vstack([pos, neg]), ["a"] * n + ["b"] * n


class TestTrain:
    def test_separable_two_points(self):
        x = np.array([[2.0, 0.0], [-2.0, 0.0]])
        model = clf.train_ova(x, [1, 0], TIGHT)
        # hard-margin solution with a regularised bias: w = (0.5, 0), b = 0
        np.testing.assert_allclose(model.weights[1], [0.5, 0.0], atol=1e-8)
        assert abs(model.biases[1]) < 1e-8
        assert clf.predict(model, x) == [1, 0]

    def test_toy_training_accuracy(self, rng):
        x, y = toy(rng)
        model = clf.train_ova(x, y)
        assert clf.evaluate(model, x, y).accuracy == 1.0
        a = model.classes.index("a")
        assert model.weights[a, 0] > 0 and abs(model.weights[a, 0]) > abs(model.weights[a, 1])

    def test_duplicated_dataset(self, rng):
        x, y = toy(rng, 10)
        m1 = clf.train_ova(x, y, TIGHT)
        m2 = clf.train_ova(np.vstack([x, x]), y + y, TIGHT)
        probe = rng.standard_normal((30, 2)) * 3
        np.testing.assert_allclose(m1.decision_function(probe), m2.decision_function(probe),
                                   atol=1e-6)

    def test_label_flip_negates(self, rng):
        x = rng.standard_normal((40, 3))
        y = np.where(x[:, 0] + 0.3 * rng.standard_normal(40) > 0, 1, 0)
        m = clf.train_ova(x, y.tolist(), TIGHT)
        flipped = clf.train_ova(x, (1 - y).tolist(), TIGHT)
        np.testing.assert_allclose(flipped.weights[1], -m.weights[1], atol=1e-6)
        np.testing.assert_allclose(flipped.biases[1], -m.biases[1], atol=1e-6)

    def test_dual_objective_non_increasing(self, rng):
        x = rng.standard_normal((60, 4))
        y = rng.integers(0, 3, 60).tolist()
        _, fits = clf.train_ova(x, y, clf.TrainConfig(max_epochs=50), return_fits=True)
        for f in fits:
            assert np.all(np.diff(f.dual_objectives) <= 1e-8)

    def test_scaling_keeps_predictions(self, rng):
        x, y = toy(rng)
        s = 3.0
        base = clf.train_ova(x, y, TIGHT)
        scaled = clf.train_ova(x * s, y, clf.TrainConfig(C=1 / s**2, max_epochs=5000,
                                                         tolerance=1e-10))
        assert clf.predict(base, x) == clf.predict(scaled, s * x)

    def test_deterministic(self, rng):
        x = rng.standard_normal((30, 3))
        y = rng.integers(0, 3, 30).tolist()
        a = clf.train_ova(x, y, clf.TrainConfig(seed=7))
        b = clf.train_ova(x, y, clf.TrainConfig(seed=7))
        assert a.weights.tobytes() == b.weights.tobytes()

    def test_multiclass(self, rng):
        centers = np.array([[0, 5], [5, 0], [-5, -5]])
        x = np.vstack([rng.standard_normal((15, 2)) * 0.5 + c for c in centers])
        y = [0] * 15 + [1] * 15 + [2] * 15
        assert clf.evaluate(clf.train_ova(x, y), x, y).accuracy == 1.0

    @pytest.mark.parametrize("x,y", [
        (np.zeros((3, 2)), [0, 0, 0]),
        (np.zeros((1, 2)), [0]),
        (np.zeros((3, 2)), [0, 1]),
        (np.array([[np.nan, 0.0], [1.0, 0.0]]), [0, 1]),
    ])
    def test_errors(self, x, y):
        with pytest.raises(ValidationError):
            clf.train_ova(x, y)

    def test_bad_config(self):
        with pytest.raises(ValidationError):
            clf.TrainConfig(C=0.0)


class TestPredict:
    def test_single_class_model(self):
        m = clf.LinearSvmModel(("only",), np.array([[1.0, -1.0]]), np.array([0.0]))
        assert clf.predict(m, np.random.default_rng(0).standard_normal((5, 2))) == ["only"] * 5

    def test_tie_goes_to_lowest(self):
        m = clf.LinearSvmModel((0, 1), np.array([[1.0, 0.0], [-1.0, 0.0]]), np.zeros(2))
        assert clf.predict(m, [[0.0, 3.0]]) == [0]

    def test_constant_shift_invariance(self, rng):
        m = clf.LinearSvmModel((0, 1, 2), rng.standard_normal((3, 4)), rng.standard_normal(3))
        shifted = clf.LinearSvmModel(m.classes, m.weights, m.biases + 5.0)
        x = rng.standard_normal((20, 4))
        assert clf.predict(m, x) == clf.predict(shifted, x)

    def test_dimension_mismatch(self):
        m = clf.LinearSvmModel((0, 1), np.zeros((2, 3)), np.zeros(2))
        with pytest.raises(ValidationError):
            clf.predict(m, np.zeros((1, 4)))


class TestEvaluate:
    def test_perfect(self, rng):
        x, y = toy(rng)
        m = clf.train_ova(x, y)
        ev = clf.evaluate(m, x, y)
        assert ev.accuracy == 1.0
        np.testing.assert_array_equal(ev.per_class_accuracy, [1.0, 1.0])

    def test_chance_level(self):
        r = np.random.default_rng(10)
        labels = r.permutation(np.repeat(np.arange(10), 30)).tolist()
        const = clf.LinearSvmModel(tuple(range(10)), np.zeros((10, 2)), np.zeros(10))
        ev = clf.evaluate(const, r.standard_normal((300, 2)), labels)
        assert ev.accuracy == pytest.approx(0.1)

    def test_confusion_rows(self, rng):
        x = rng.standard_normal((50, 3))
        y = rng.integers(0, 4, 50).tolist()
        m = clf.train_ova(x, y)
        ev = clf.evaluate(m, x, y)
        np.testing.assert_array_equal(ev.confusion.sum(1), np.bincount(y, minlength=4))
        assert ev.accuracy == pytest.approx(np.trace(ev.confusion) / 50)

    def test_length_mismatch(self):
        m = clf.LinearSvmModel((0, 1), np.zeros((2, 2)), np.zeros(2))
        with pytest.raises(ValidationError):
            clf.evaluate(m, np.zeros((3, 2)), [0, 1])
