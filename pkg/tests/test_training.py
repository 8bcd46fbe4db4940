"""Ridge readout training, signed-weight splitting, metrics, cross-validation."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from combrc.training import (
    CVResult,
    ReadoutWeights,
    RidgeConfig,
    cross_validate,
    nmse,
    ridge_fit,
    ridge_fit_path,
    ser,
    split_signed_weights,
)


def _normal_equations_oracle(features, targets, lam):
    """Independent dense solve of the centered regularized normal equations."""
    mu = features.mean(axis=0)
    ym = targets.mean()
    phi = features - mu
    w = np.linalg.solve(phi.T @ phi + lam * np.eye(features.shape[1]), phi.T @ (targets - ym))
    return w, ym - mu @ w


class TestRidge:
    def test_zero_targets(self):
        rng = np.random.default_rng(0)
        w, b = ridge_fit(rng.standard_normal((40, 5)), np.zeros(40), 0.1)
        assert np.abs(w).max() < 1e-12
        assert abs(b) < 1e-12

    def test_orthonormal_columns_small_lambda(self):
        # orthonormal zero-mean columns: the centered ridge limit is plain
        # least squares, w -> Phi^T y
        raw = np.random.default_rng(1).standard_normal((60, 4))
        q, _ = np.linalg.qr(raw - raw.mean(axis=0))
        q -= q.mean(axis=0)
        q, _ = np.linalg.qr(q)
        y = np.random.default_rng(2).standard_normal(60)
        w, _ = ridge_fit(q, y, 1e-12)
        assert np.allclose(w, q.T @ (y - y.mean()), atol=1e-9)

    @pytest.mark.parametrize("lam", [1e-6, 1e-3, 1e-1])
    def test_matches_normal_equations_oracle(self, lam):
        rng = np.random.default_rng(42)
        features = rng.standard_normal((50, 5)) * [1, 2, 0.5, 3, 1]
        targets = rng.standard_normal(50) + features @ rng.standard_normal(5)
        w, b = ridge_fit(features, targets, lam)
        w_ref, b_ref = _normal_equations_oracle(features, targets, lam)
        assert np.linalg.norm(w - w_ref) / np.linalg.norm(w_ref) < 1e-10
        assert b == pytest.approx(b_ref, rel=1e-10, abs=1e-12)

    def test_residual_satisfies_normal_equations(self):
        rng = np.random.default_rng(3)
        features = rng.standard_normal((80, 6))
        targets = rng.standard_normal(80)
        lam = 1e-3
        w, _ = ridge_fit(features, targets, lam)
        phi = features - features.mean(axis=0)
        yc = targets - targets.mean()
        lhs = (phi.T @ phi + lam * np.eye(6)) @ w
        rhs = phi.T @ yc
        assert np.linalg.norm(lhs - rhs) / np.linalg.norm(rhs) < 1e-8

    def test_training_mse_nondecreasing_in_lambda(self):
        rng = np.random.default_rng(4)
        features = rng.standard_normal((100, 8))
        targets = features @ rng.standard_normal(8) + 0.1 * rng.standard_normal(100)
        grid = [1e-9, 1e-6, 1e-3, 1e-1, 1.0, 10.0]
        mses = []
        for w, b in ridge_fit_path(features, targets, grid):
            mses.append(np.mean((features @ w + b - targets) ** 2))
        assert all(m2 >= m1 - 1e-12 for m1, m2 in zip(mses, mses[1:]))

    def test_underdetermined_warns(self):
        rng = np.random.default_rng(5)
        with pytest.warns(UserWarning):
            ridge_fit(rng.standard_normal((4, 6)), rng.standard_normal(4), 0.1)

    def test_nonpositive_lambda_rejected(self):
        rng = np.random.default_rng(6)
        with pytest.raises(ValueError):
            ridge_fit(rng.standard_normal((10, 2)), rng.standard_normal(10), 0.0)


class TestSignedSplit:
    def test_simple_split(self):
        out = split_signed_weights(np.array([4.0, -9.0]))
        assert np.allclose(out.w_plus, [2.0, 0.0])
        assert np.allclose(out.w_minus, [0.0, 3.0])

    def test_zero(self):
        out = split_signed_weights(np.zeros(3))
        assert np.all(out.w_plus == 0) and np.all(out.w_minus == 0)

    def test_exact_reconstruction(self):
        # sqrt-then-square is correct to one rounding of the last bit
        rng = np.random.default_rng(7)
        w = rng.standard_normal(30)
        out = split_signed_weights(w)
        recon = out.w_plus**2 - out.w_minus**2
        assert np.allclose(recon, w, rtol=4e-16, atol=0)

    def test_roundtrip_matches_linear_prediction(self):
        rng = np.random.default_rng(8)
        intensities = np.abs(rng.standard_normal((50, 10)))
        w = rng.standard_normal(10)
        b = 0.37
        readout = split_signed_weights(w, bias=b)
        assert np.abs(readout.predict(intensities) - (intensities @ w + b)).max() < 1e-12

    def test_disjoint_support_enforced(self):
        with pytest.raises(ValueError):
            ReadoutWeights(w_plus=np.array([1.0, 1.0]), w_minus=np.array([0.0, 2.0]))

    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError):
            split_signed_weights(np.array([1.0, np.nan]))


class TestMetrics:
    def test_nmse_perfect(self):
        t = np.array([1.0, 2.0, 3.0])
        assert nmse(t, t) == 0.0

    def test_nmse_mean_predictor_is_one(self):
        t = np.array([0.0, 1.0, 4.0, -3.0])
        p = np.full(4, t.mean())
        assert nmse(p, t) == pytest.approx(1.0)

    def test_nmse_hand_case(self):
        # MSE = 1, variance = 1
        assert nmse(np.array([1.0, 1.0]), np.array([0.0, 2.0])) == pytest.approx(1.0)

    def test_nmse_zero_variance_rejected(self):
        with pytest.raises(ValueError):
            nmse(np.array([1.0, 2.0]), np.array([3.0, 3.0]))

    def test_ser_identical(self):
        s = np.array([1, -1, 3, -3])
        assert ser(s, s) == 0.0

    def test_ser_all_wrong(self):
        assert ser(np.array([1, 1]), np.array([-1, 3])) == 1.0

    def test_ser_counting(self):
        assert ser(np.array([1, -1, 3, -3]), np.array([1, -1, 3, 1])) == 0.25

    def test_ser_relabeling_invariance(self):
        rng = np.random.default_rng(9)
        a = rng.choice([-3, -1, 1, 3], 100)
        b = rng.choice([-3, -1, 1, 3], 100)
        relabel = {-3: 7, -1: 11, 1: 13, 3: 17}
        ra = np.vectorize(relabel.get)(a)
        rb = np.vectorize(relabel.get)(b)
        assert ser(a, b) == ser(ra, rb)

    def test_ser_length_mismatch(self):
        with pytest.raises(ValueError):
            ser(np.array([1]), np.array([1, 2]))


class TestCrossValidate:
    def _toy(self, t=400, f=6, seed=10):
        rng = np.random.default_rng(seed)
        features = np.abs(rng.standard_normal((t, f)))
        w = rng.standard_normal(f)
        targets = features @ w + 0.5
        return features, targets

    def test_single_fold_reproducible(self):
        features, targets = self._toy()
        cfg = RidgeConfig(washout=20, seed=5, n_folds=1)
        a = cross_validate(features, targets, cfg, "nmse", 200, 100)
        b = cross_validate(features, targets, cfg, "nmse", 200, 100)
        assert a.mean == b.mean
        assert a.std == 0.0

    def test_perfect_linear_target(self):
        features, targets = self._toy()
        cfg = RidgeConfig(lambda_grid=(1e-9,), washout=10, seed=1, n_folds=5)
        out = cross_validate(features, targets, cfg, "nmse", 200, 100)
        assert out.mean < 1e-10

    def test_bit_reproducible_across_calls(self):
        features, targets = self._toy(seed=11)
        cfg = RidgeConfig(washout=0, seed=123, n_folds=8)
        a = cross_validate(features, targets, cfg, "nmse", 250, 100)
        b = cross_validate(features, targets, cfg, "nmse", 250, 100)
        assert np.array_equal(a.scores, b.scores)

    def test_seed_changes_partitions(self):
        features, targets = self._toy(seed=12)
        noisy = targets + 0.3 * np.random.default_rng(0).standard_normal(len(targets))
        a = cross_validate(features, noisy, RidgeConfig(washout=0, seed=1, n_folds=3), "nmse", 250, 100)
        b = cross_validate(features, noisy, RidgeConfig(washout=0, seed=2, n_folds=3), "nmse", 250, 100)
        assert not np.array_equal(a.scores, b.scores)

    def test_washout_excluded(self):
        features, targets = self._toy(t=300)
        # poison the washout rows; they must never be selected
        features[:50] = 1e9
        cfg = RidgeConfig(lambda_grid=(1e-9,), washout=50, seed=3, n_folds=4)
        out = cross_validate(features, targets, cfg, "nmse", 150, 80)
        assert out.mean < 1e-8

    def test_insufficient_data(self):
        features, targets = self._toy(t=100)
        with pytest.raises(ValueError):
            cross_validate(features, targets, RidgeConfig(washout=50), "nmse", 100, 50)

    def test_ser_metric_quantizes(self):
        rng = np.random.default_rng(13)
        symbols = rng.choice([-3.0, -1.0, 1.0, 3.0], 500)
        features = np.column_stack([symbols + 0.01 * rng.standard_normal(500),
                                    np.abs(rng.standard_normal(500))])
        cfg = RidgeConfig(washout=0, seed=7, n_folds=3)
        out = cross_validate(features, symbols, cfg, "ser", 300, 150)
        assert out.mean < 0.01


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-50, 50), min_size=1, max_size=20))
def test_signed_split_reconstruction_property(values):
    w = np.array(values)
    out = split_signed_weights(w)
    assert np.allclose(out.w_plus**2 - out.w_minus**2, w, rtol=4e-16, atol=0)
    assert np.all(out.w_plus * out.w_minus == 0)
