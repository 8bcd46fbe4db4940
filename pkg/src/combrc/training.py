"""Readout training: ridge regression on intensity features, signed-weight
splitting into the physical positive/negative diagonal pair, and NMSE/SER
metrics with randomized cross-validation."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

DEFAULT_LAMBDA_GRID = tuple(10.0**e for e in range(-9, 0))

# Fraction of the training portion used for fitting during lambda selection.
_INNER_FIT_FRACTION = 0.8


@dataclass
class ReadoutWeights:
    """Physical readout: disjoint non-negative diagonals plus a constant offset."""

    w_plus: np.ndarray
    w_minus: np.ndarray
    bias: float = 0.0

    def __post_init__(self):
        self.w_plus = np.asarray(self.w_plus, dtype=float)
        self.w_minus = np.asarray(self.w_minus, dtype=float)
        if self.w_plus.shape != self.w_minus.shape or self.w_plus.ndim != 1:
            raise ValueError("w_plus and w_minus must be vectors of equal length")
        if np.any(self.w_plus < 0) or np.any(self.w_minus < 0):
            raise ValueError("readout diagonals must be non-negative")
        if np.any((self.w_plus > 0) & (self.w_minus > 0)):
            raise ValueError("w_plus and w_minus must have disjoint supports")

    def predict(self, intensities: np.ndarray) -> np.ndarray:
        """Signed quadratic readout applied to a T x F intensity matrix."""
        return intensities @ (self.w_plus**2 - self.w_minus**2) + self.bias


@dataclass
class RidgeConfig:
    """Cross-validated ridge training settings."""

    lambda_grid: tuple = DEFAULT_LAMBDA_GRID
    washout: int = 0
    seed: int = 0
    n_folds: int = 100

    def __post_init__(self):
        self.lambda_grid = tuple(float(l) for l in self.lambda_grid)
        if not self.lambda_grid or any(l <= 0 for l in self.lambda_grid):
            raise ValueError("lambda_grid must be non-empty and strictly positive")
        if self.washout < 0:
            raise ValueError(f"washout must be >= 0, got {self.washout}")
        if self.n_folds < 1:
            raise ValueError(f"n_folds must be >= 1, got {self.n_folds}")


def ridge_fit_path(
    features: np.ndarray, targets: np.ndarray, lambdas
) -> list[tuple[np.ndarray, float]]:
    """Ridge solutions (weights, bias) for every regularizer in one SVD pass.

    The bias is unpenalized: data are centered, the weights solve the
    regularized normal equations on the centered system, and the bias
    restores the means.
    """
    features = np.asarray(features, dtype=float)
    targets = np.asarray(targets, dtype=float)
    t, f = features.shape
    if targets.shape != (t,):
        raise ValueError(f"targets shape {targets.shape} does not match {t} rows")
    if t <= f:
        warnings.warn(f"underdetermined fit: {t} rows for {f} features", stacklevel=2)
    mu = features.mean(axis=0)
    ym = targets.mean()
    u, s, vt = np.linalg.svd(features - mu, full_matrices=False)
    uty = u.T @ (targets - ym)
    out = []
    for lam in lambdas:
        if lam <= 0:
            raise ValueError(f"lambda must be > 0, got {lam}")
        w = vt.T @ (s / (s**2 + lam) * uty)
        out.append((w, float(ym - mu @ w)))
    return out


def ridge_fit(features: np.ndarray, targets: np.ndarray, lam: float) -> tuple[np.ndarray, float]:
    """Ridge regression with unpenalized bias; returns (weights, bias)."""
    return ridge_fit_path(features, targets, [lam])[0]


def split_signed_weights(w: np.ndarray, bias: float = 0.0) -> ReadoutWeights:
    """Split a signed weight vector into the positive/negative physical diagonals.

    The signed weights act on intensities, so the physical attenuations are
    their square roots: w_plus^2 - w_minus^2 reconstructs w exactly.
    """
    w = np.asarray(w, dtype=float)
    if not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite")
    return ReadoutWeights(
        w_plus=np.sqrt(np.maximum(w, 0.0)),
        w_minus=np.sqrt(np.maximum(-w, 0.0)),
        bias=bias,
    )


def nmse(predicted: np.ndarray, target: np.ndarray) -> float:
    """Mean squared error normalized by the target variance."""
    predicted = np.asarray(predicted, dtype=float)
    target = np.asarray(target, dtype=float)
    if predicted.shape != target.shape or len(target) < 2:
        raise ValueError("predicted and target must be equal-length vectors of length >= 2")
    var = target.var()
    if var == 0:
        raise ValueError("target has zero variance")
    return float(np.mean((predicted - target) ** 2) / var)


def ser(predicted_symbols: np.ndarray, target_symbols: np.ndarray) -> float:
    """Fraction of wrongly reconstructed symbols."""
    predicted_symbols = np.asarray(predicted_symbols)
    target_symbols = np.asarray(target_symbols)
    if predicted_symbols.shape != target_symbols.shape or predicted_symbols.ndim != 1:
        raise ValueError("symbol vectors must be equal-length")
    if len(target_symbols) < 1:
        raise ValueError("need at least one symbol")
    return float(np.mean(predicted_symbols != target_symbols))


@dataclass
class CVResult:
    """Cross-validation outcome: per-fold scores and their aggregates."""

    mean: float
    std: float
    scores: np.ndarray
    lambdas: np.ndarray = field(default_factory=lambda: np.empty(0))


def _score(metric: str, predicted: np.ndarray, target: np.ndarray) -> float:
    if metric == "nmse":
        return nmse(predicted, target)
    if metric == "ser":
        from .tasks import quantize_symbols

        return ser(quantize_symbols(predicted), target)
    raise ValueError(f"unknown metric {metric!r}")


def cross_validate(
    features: np.ndarray,
    targets: np.ndarray,
    cfg: RidgeConfig,
    metric: str,
    train_len: int,
    test_len: int,
) -> CVResult:
    """Randomized-split cross-validation of the trained readout.

    For each fold, post-washout timesteps are randomly partitioned into
    train/test sets of the given sizes, the regularizer is selected on an
    internal split of the training portion, and the metric is evaluated on
    the test portion.  Folds are seeded from (cfg.seed, fold) so results are
    bit-reproducible and fold order is irrelevant.
    """
    features = np.asarray(features, dtype=float)
    targets = np.asarray(targets, dtype=float)
    t = features.shape[0]
    if targets.shape != (t,):
        raise ValueError("targets must match the feature rows")
    if cfg.washout >= t:
        raise ValueError(f"washout {cfg.washout} leaves no data out of {t} steps")
    pool = np.arange(cfg.washout, t)
    if train_len + test_len > len(pool):
        raise ValueError(
            f"need {train_len + test_len} post-washout steps, have {len(pool)}"
        )

    scores = np.empty(cfg.n_folds)
    lambdas = np.empty(cfg.n_folds)
    for fold in range(cfg.n_folds):
        rng = np.random.default_rng([cfg.seed & (2**63 - 1), fold])
        perm = rng.permutation(pool)
        train = perm[:train_len]
        test = perm[train_len : train_len + test_len]
        lam = _select_lambda(features, targets, train, cfg.lambda_grid, metric)
        w, b = ridge_fit(features[train], targets[train], lam)
        scores[fold] = _score(metric, features[test] @ w + b, targets[test])
        lambdas[fold] = lam

    std = float(np.std(scores, ddof=1)) if cfg.n_folds > 1 else 0.0
    return CVResult(mean=float(np.mean(scores)), std=std, scores=scores, lambdas=lambdas)


def _select_lambda(features, targets, train_idx, grid, metric) -> float:
    """Pick the regularizer by score on a held-out tail of the training portion."""
    if len(grid) == 1:
        return grid[0]
    n_fit = int(_INNER_FIT_FRACTION * len(train_idx))
    # train_idx is already a random permutation, so a prefix is a random subset
    fit_idx, val_idx = train_idx[:n_fit], train_idx[n_fit:]
    sols = ridge_fit_path(features[fit_idx], targets[fit_idx], grid)
    best_lam, best_score = grid[0], np.inf
    for lam, (w, b) in zip(grid, sols):
        s = _score(metric, features[val_idx] @ w + b, targets[val_idx])
        if s < best_score:
            best_lam, best_score = lam, s
    return best_lam
