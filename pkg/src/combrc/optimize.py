"""Inter-layer weight optimization: uniform attenuation sweep over a dB grid
and CMA-ES over all per-line attenuations."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .reservoir import (
    DivergenceError,
    InterlayerWeights,
    ReservoirParams,
    SignalScaler,
    Trace,
    concat_deep_state,
    run_deep,
)
from .training import RidgeConfig, cross_validate

# Sentinel scores returned when a candidate makes the cascade diverge:
# worse than any attainable value of the metric, by a margin.
DIVERGENCE_PENALTY = {"ser": 1.5, "nmse": 1e6}


@dataclass
class AttenuationSweepConfig:
    """Uniform-attenuation search grid, in dB of power attenuation."""

    min_db: float = -20.0
    max_db: float = 0.0
    n_points: int = 21

    def __post_init__(self):
        if self.min_db >= self.max_db:
            raise ValueError(f"min_db must be < max_db, got [{self.min_db}, {self.max_db}]")
        if self.n_points < 1:
            raise ValueError(f"n_points must be >= 1, got {self.n_points}")


@dataclass
class CmaesConfig:
    """CMA-ES settings; population_size=None uses the standard 4 + floor(3 ln n)."""

    population_size: int | None = None
    sigma0: float = 3.0
    max_evals: int = 400
    seed: int = 0
    bounds_db: tuple[float, float] = (-20.0, 0.0)

    def __post_init__(self):
        if self.population_size is not None and self.population_size < 4:
            raise ValueError(f"population_size must be >= 4, got {self.population_size}")
        if self.sigma0 <= 0:
            raise ValueError(f"sigma0 must be > 0, got {self.sigma0}")
        if self.bounds_db[0] >= self.bounds_db[1]:
            raise ValueError(f"bounds_db must be increasing, got {self.bounds_db}")


def db_to_amplitude(att_db: float) -> float:
    """Amplitude factor alpha whose power alpha^2 equals the given dB value."""
    return 10.0 ** (np.asarray(att_db, dtype=float) / 20.0)


@dataclass
class SweepResult:
    best_weights: InterlayerWeights
    best_db: float
    best_score: float
    curve: np.ndarray  # (n_points, 2): attenuation dB, score (NaN where failed)
    failures: list = field(default_factory=list)


def attenuation_sweep(eval_fn, cfg: AttenuationSweepConfig, n: int) -> SweepResult:
    """Evaluate uniform per-line attenuations on a dB grid and return the argmin.

    Per-point objective failures are recorded in ``failures`` and skipped; only
    if every point fails is the sweep an error.
    """
    grid = np.linspace(cfg.min_db, cfg.max_db, cfg.n_points)
    curve = np.column_stack([grid, np.full(cfg.n_points, np.nan)])
    failures = []
    for i, db in enumerate(grid):
        weights = InterlayerWeights(np.full(n, db_to_amplitude(db)))
        try:
            curve[i, 1] = eval_fn(weights)
        except Exception as exc:  # objective failures are per-point data, not fatal
            failures.append((float(db), f"{type(exc).__name__}: {exc}"))
    if np.all(np.isnan(curve[:, 1])):
        raise RuntimeError(f"every sweep point failed; first: {failures[0][1]}")
    best = int(np.nanargmin(curve[:, 1]))
    best_db = float(curve[best, 0])
    return SweepResult(
        best_weights=InterlayerWeights(np.full(n, db_to_amplitude(best_db))),
        best_db=best_db,
        best_score=float(curve[best, 1]),
        curve=curve,
        failures=failures,
    )


@dataclass
class CmaesResult:
    best_x: np.ndarray
    best_score: float
    gen_best: np.ndarray  # best score within each generation
    evaluations: np.ndarray  # rows: eval_index, generation, score, x...
    n_evals: int
    restarted: bool = False


def cmaes_minimize(eval_fn, cfg: CmaesConfig, n: int, x0: np.ndarray | None = None) -> CmaesResult:
    """Minimize with a standard (mu/mu_w, lambda) CMA-ES inside box constraints.

    Candidates outside the box are resampled (a bounded number of times, then
    clipped), so selection stays purely rank-based.  A degenerate covariance
    triggers one restart with doubled initial step size; the evaluation budget
    is shared across restarts and the best-ever candidate is always returned.
    """
    lo, hi = cfg.bounds_db
    lam = cfg.population_size or 4 + int(3 * math.log(n))
    lam = max(lam, 4)
    if cfg.max_evals < lam:
        raise ValueError(f"max_evals {cfg.max_evals} below one generation ({lam})")
    if x0 is None:
        x0 = np.full(n, 0.5 * (lo + hi))
    x0 = np.asarray(x0, dtype=float)

    mu = lam // 2
    w = np.log(lam / 2 + 0.5) - np.log(np.arange(1, mu + 1))
    w /= w.sum()
    mueff = 1.0 / np.sum(w**2)
    cc = (4 + mueff / n) / (n + 4 + 2 * mueff / n)
    cs = (mueff + 2) / (n + mueff + 5)
    c1 = 2 / ((n + 1.3) ** 2 + mueff)
    cmu = min(1 - c1, 2 * (mueff - 2 + 1 / mueff) / ((n + 2) ** 2 + mueff))
    damps = 1 + 2 * max(0.0, math.sqrt((mueff - 1) / (n + 1)) - 1) + cs
    chi_n = math.sqrt(n) * (1 - 1 / (4 * n) + 1 / (21 * n**2))

    rng = np.random.default_rng(cfg.seed & (2**63 - 1))
    best_x, best_score = None, np.inf
    gen_best: list[float] = []
    evals_log: list[np.ndarray] = []
    n_evals = 0
    gen = 0
    restarted = False

    sigma0 = cfg.sigma0
    while True:  # at most two passes: initial run plus one restart
        mean = x0.copy()
        sigma = sigma0
        cov = np.eye(n)
        pc = np.zeros(n)
        ps = np.zeros(n)
        degenerate = False

        while n_evals + lam <= cfg.max_evals:
            if not np.all(np.isfinite(cov)):
                degenerate = True
                break
            eigvals, basis = np.linalg.eigh(0.5 * (cov + cov.T))
            if (
                not np.all(np.isfinite(eigvals))
                or eigvals[0] <= 0
                or eigvals[-1] / eigvals[0] > 1e14
                or not math.isfinite(sigma)
                or sigma <= 0
            ):
                degenerate = True
                break
            scales = np.sqrt(eigvals)
            inv_sqrt = basis @ np.diag(1.0 / scales) @ basis.T

            xs = np.empty((lam, n))
            ys = np.empty((lam, n))
            for k in range(lam):
                for _ in range(100):
                    y = basis @ (scales * rng.standard_normal(n))
                    x = mean + sigma * y
                    if np.all((x >= lo) & (x <= hi)):
                        break
                else:
                    x = np.clip(x, lo, hi)
                    y = (x - mean) / sigma
                xs[k], ys[k] = x, y

            scores = np.array([eval_fn(xs[k]) for k in range(lam)])
            order = np.argsort(scores, kind="stable")
            for k in range(lam):
                evals_log.append(np.concatenate(([n_evals + k, gen, scores[k]], xs[k])))
            n_evals += lam
            gen += 1
            gen_best.append(float(scores[order[0]]))
            if scores[order[0]] < best_score:
                best_score = float(scores[order[0]])
                best_x = xs[order[0]].copy()

            y_sel = ys[order[:mu]]
            y_mean = w @ y_sel
            mean = mean + sigma * y_mean

            ps = (1 - cs) * ps + math.sqrt(cs * (2 - cs) * mueff) * (inv_sqrt @ y_mean)
            hsig = float(
                np.sum(ps**2) / (1 - (1 - cs) ** (2 * n_evals / lam)) / n < 2 + 4 / (n + 1)
            )
            pc = (1 - cc) * pc + hsig * math.sqrt(cc * (2 - cc) * mueff) * y_mean

            c1a = c1 * (1 - (1 - hsig**2) * cc * (2 - cc))
            cov = (
                (1 - c1a - cmu) * cov
                + c1 * np.outer(pc, pc)
                + cmu * (y_sel.T * w) @ y_sel
            )
            sigma *= math.exp((cs / damps) * (np.linalg.norm(ps) / chi_n - 1))

        if degenerate and not restarted and n_evals + lam <= cfg.max_evals:
            restarted = True
            sigma0 = 2 * cfg.sigma0
            continue
        break

    if best_x is None:
        raise RuntimeError("CMA-ES evaluated no candidates")
    return CmaesResult(
        best_x=best_x,
        best_score=best_score,
        gen_best=np.array(gen_best),
        evaluations=np.array(evals_log),
        n_evals=n_evals,
        restarted=restarted,
    )


@dataclass
class ObjectiveContext:
    """Frozen experiment context for inter-layer weight objectives.

    Holds the fixed physics, the drive signal, targets and the single
    train/validation split configuration; precomputes the first layer's trace
    once since it cannot depend on the inter-layer weights.
    """

    layer_params: list[ReservoirParams]
    u_drive: np.ndarray
    targets: np.ndarray
    washout: int
    train_len: int
    test_len: int
    metric: str
    lambda_grid: tuple
    seed: int
    scaler: SignalScaler = field(default_factory=SignalScaler)
    delay: int = 0
    first_trace: Trace | None = None

    def __post_init__(self):
        if self.metric not in DIVERGENCE_PENALTY:
            raise ValueError(f"unknown metric {self.metric!r}")
        if self.first_trace is None:
            from .reservoir import run_sequence

            self.first_trace = run_sequence(self.u_drive, self.layer_params[0])

    @property
    def n(self) -> int:
        return self.layer_params[0].n


def objective_from_pipeline(weights_db: np.ndarray, context: ObjectiveContext) -> float:
    """Deep-RC validation score of one inter-layer weight vector, in dB space.

    Runs the cascade with the decoded amplitudes, trains the total readout on
    a single fixed train split and scores the fixed validation split.
    Divergent candidates return the documented penalty sentinel.
    """
    amps = db_to_amplitude(np.asarray(weights_db, dtype=float))
    weights = InterlayerWeights(np.broadcast_to(amps, (context.n,)).copy())
    return objective_from_weights(weights, context)


def objective_from_weights(weights: InterlayerWeights, context: ObjectiveContext) -> float:
    """Same objective, taking the amplitudes directly (used by the sweep)."""
    try:
        traces = run_deep(
            context.u_drive,
            context.layer_params,
            [weights] * (len(context.layer_params) - 1),
            context.scaler,
            delay=context.delay,
            _first_trace=context.first_trace,
        )
    except DivergenceError:
        return DIVERGENCE_PENALTY[context.metric]
    features = concat_deep_state(traces).intensities
    cfg = RidgeConfig(
        lambda_grid=context.lambda_grid, washout=context.washout,
        seed=context.seed, n_folds=1,
    )
    return cross_validate(
        features, context.targets, cfg, context.metric, context.train_len, context.test_len
    ).mean
