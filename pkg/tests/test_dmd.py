import unittest

import numpy as np
from numpy.testing import assert_allclose

from RECODE.dmd import SnapshotSet, fit_dmd, predict_dmd, reconstruct_dmd
from RECODE.errors import InsufficientData, InvalidInput, InvalidRank
from RECODE.numkernel import match_eigenvalues


def stable_system(rng, n, radius=0.9):
    a = rng.normal(size=(n, n))
    return radius*a/np.max(np.abs(np.linalg.eigvals(a)))


def trajectory(a, x0, steps):
    states = [np.asarray(x0, dtype=float)]
    for _ in range(steps - 1):
        states.append(a @ states[-1])
    return np.column_stack(states)


class TestSnapshotSet(unittest.TestCase):
    def test_from_trajectory(self):
        states = np.arange(12.0).reshape(3, 4)
        s = SnapshotSet.from_trajectory(states, controls=np.ones(4))
        self.assertEqual((s.state_dim, s.n_pairs, s.control_dim), (3, 3, 1))
        assert_allclose(s.x_prime[:, 0], states[:, 1])

    def test_mismatched_shapes(self):
        with self.assertRaises(InvalidInput):
            SnapshotSet(x=np.ones((2, 3)), x_prime=np.ones((2, 4)))
        with self.assertRaises(InvalidInput):
            SnapshotSet.from_trajectory(np.ones((2, 5)), controls=np.ones((1, 3)))
        with self.assertRaises(InsufficientData):
            SnapshotSet.from_trajectory(np.ones((2, 1)))


class TestFitDmd(unittest.TestCase):
    def setUp(self):
        rng      = np.random.default_rng(0)
        self.a   = stable_system(rng, 4)
        self.x   = trajectory(self.a, rng.normal(size=4), 50)
        self.model = fit_dmd(SnapshotSet.from_trajectory(self.x))

    def test_recovers_eigenvalues(self):
        m = match_eigenvalues(np.linalg.eigvals(self.a), self.model.eigenvalues)
        self.assertEqual(self.model.rank_used, 4)
        self.assertLess(m.max_distance, 1e-7)
        assert_allclose(self.model.a_operator, self.a, atol=1e-7)

    def test_predict(self):
        assert_allclose(predict_dmd(self.model, 1), self.x[:, 0], atol=1e-10)
        assert_allclose(predict_dmd(self.model, 6), self.x[:, 5], atol=1e-8)
        x, imag = predict_dmd(self.model, 3, return_residual=True)
        self.assertLess(imag, 1e-8)

    def test_reconstruct_from_state(self):
        rec = reconstruct_dmd(self.model, 5, initial_state=self.x[:, 10])
        self.assertEqual(rec.shape, (4, 5))
        assert_allclose(rec, self.x[:, 10:15], atol=1e-8)

    def test_bad_arguments(self):
        with self.assertRaises(InvalidInput):
            predict_dmd(self.model, 0)
        with self.assertRaises(InvalidInput):
            reconstruct_dmd(self.model, 0)
        with self.assertRaises(InvalidInput):
            predict_dmd(self.model, 2, initial_state=np.ones(3))

    def test_rank(self):
        snaps = SnapshotSet.from_trajectory(self.x)
        self.assertEqual(fit_dmd(snaps, rank=2).rank_used, 2)
        for rank in (0, 5):
            with self.assertRaises(InvalidRank):
                fit_dmd(snaps, rank=rank)

    def test_too_few_snapshots(self):
        with self.assertRaises(InsufficientData):
            fit_dmd(SnapshotSet.from_trajectory(self.x[:, :2]))

    def test_prediction_applies_operator_powers(self):
        x1 = self.x[:, 0]
        assert_allclose(predict_dmd(self.model, 3), self.a @ self.a @ x1, atol=1e-8)
        assert_allclose(predict_dmd(self.model, 3, initial_state=x1), np.linalg.matrix_power(self.a, 2) @ x1, atol=1e-8)

    def test_prediction_is_linear_in_initial_state(self):
        rng  = np.random.default_rng(8)
        y, z = rng.normal(size=4), rng.normal(size=4)
        for k in (1, 4, 9):
            combined = predict_dmd(self.model, k, initial_state=2.0*y - 0.5*z)
            assert_allclose(combined, 2.0*predict_dmd(self.model, k, initial_state=y)
                            - 0.5*predict_dmd(self.model, k, initial_state=z), atol=1e-9)

    def test_zero_initial_state(self):
        assert_allclose(reconstruct_dmd(self.model, 6, initial_state=np.zeros(4)), np.zeros((4, 6)), atol=1e-15)


class TestRotation(unittest.TestCase):
    def test_eigenvalues_on_unit_circle(self):
        c, s  = np.cos(0.1), np.sin(0.1)
        model = fit_dmd(SnapshotSet.from_trajectory(trajectory(np.array([[c, -s], [s, c]]), [1.0, 0.0], 30)))
        assert_allclose(model.eigenvalues, [np.exp(0.1j), np.exp(-0.1j)], atol=1e-10)
        assert_allclose(np.abs(model.eigenvalues), 1.0, atol=1e-10)


class TestPersistence(unittest.TestCase):
    def test_constant_trajectory_persists(self):
        c = np.array([1.5, 2.0, 2.5])
        model = fit_dmd(SnapshotSet.from_trajectory(np.tile(c[:, None], 6)))
        self.assertEqual(model.rank_used, 1)
        assert_allclose(model.eigenvalues, [1.0], atol=1e-12)
        assert_allclose(predict_dmd(model, 10), c, atol=1e-12)


if __name__ == "__main__":
    unittest.main()
