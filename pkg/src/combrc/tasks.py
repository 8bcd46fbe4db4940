"""Benchmark tasks: chaotic time-series shift/prediction and nonlinear channel
equalization with configurable SNR."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

SYMBOLS = np.array([-3.0, -1.0, 1.0, 3.0])

# FIR taps of the simulated channel, as (offset, coefficient): output n sums
# coefficient * d(n + offset).
CHANNEL_TAPS = (
    (2, 0.08),
    (1, -0.12),
    (0, 1.0),
    (-1, 0.18),
    (-2, -0.1),
    (-3, 0.091),
    (-4, -0.05),
    (-5, 0.04),
    (-6, 0.03),
    (-7, 0.01),
)
# Boundary samples consumed by the filter support: output index i of
# channel_distort corresponds to symbol index i + CHANNEL_PRE.
CHANNEL_PRE = 7
CHANNEL_POST = 2


@dataclass
class ShiftTaskSpec:
    """Chaotic-series shift task: reproduce the input shifted by tau steps."""

    tau: int = 1
    train_len: int = 6000
    test_len: int = 2500
    washout: int = 500

    def __post_init__(self):
        if abs(self.tau) > 5:
            raise ValueError(f"|tau| must be <= 5, got {self.tau}")
        if self.train_len < 1 or self.test_len < 1:
            raise ValueError("train_len and test_len must be positive")
        if self.washout < 0:
            raise ValueError("washout must be >= 0")

    @property
    def total_len(self) -> int:
        return self.train_len + self.test_len + self.washout


@dataclass
class ChannelTaskSpec:
    """Nonlinear channel equalization task at a given signal-to-noise ratio."""

    snr_db: float = 20.0
    train_len: int = 14000
    test_len: int = 30000
    washout: int = 1000
    seed: int = 0

    def __post_init__(self):
        if not 8.0 <= self.snr_db <= 32.0:
            raise ValueError(f"snr_db must be in [8, 32], got {self.snr_db}")
        if self.train_len < 1 or self.test_len < 1:
            raise ValueError("train_len and test_len must be positive")
        if self.washout < 0:
            raise ValueError("washout must be >= 0")

    @property
    def total_len(self) -> int:
        return self.train_len + self.test_len + self.washout


def load_series(path, min_length: int | None = None) -> np.ndarray:
    """Load a one-sample-per-line text series, standardized to zero mean, unit variance."""
    text = Path(path).read_text(encoding="utf-8")
    values = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped:
            continue
        try:
            values.append(float(stripped))
        except ValueError:
            raise ValueError(f"{path}: cannot parse line {lineno}: {stripped!r}") from None
    series = np.array(values)
    if min_length is not None and len(series) < min_length:
        raise ValueError(f"{path}: need at least {min_length} samples, found {len(series)}")
    if len(series) < 2 or series.std() == 0:
        raise ValueError(f"{path}: series is degenerate (constant or too short)")
    return (series - series.mean()) / series.std()


def chaotic_surrogate(
    length: int, seed: int, dt: float = 0.01, stride: int = 9, discard: int = 1000
) -> np.ndarray:
    """Seed-reproducible chaotic series standing in for the laser dataset.

    Integrates the Lorenz-63 system with RK4 from a seeded initial condition,
    samples the first coordinate every ``stride`` steps after a transient, and
    standardizes.  The stride is chosen so consecutive samples decorrelate
    about as fast as the laser data's oscillations.
    """
    if length < 1:
        raise ValueError("length must be >= 1")
    rng = np.random.default_rng(seed & (2**63 - 1))
    state = np.array([1.0, 1.0, 1.0]) + 0.1 * rng.standard_normal(3)

    def deriv(s):
        x, y, z = s
        return np.array([10.0 * (y - x), x * (28.0 - z) - y, x * y - 8.0 / 3.0 * z])

    def rk4(s):
        k1 = deriv(s)
        k2 = deriv(s + 0.5 * dt * k1)
        k3 = deriv(s + 0.5 * dt * k2)
        k4 = deriv(s + dt * k3)
        return s + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)

    for _ in range(discard):
        state = rk4(state)
    out = np.empty(length)
    for i in range(length):
        for _ in range(stride):
            state = rk4(state)
        out[i] = state[0]
    return (out - out.mean()) / out.std()


def make_shift_target(u: np.ndarray, tau: int) -> tuple[np.ndarray, np.ndarray]:
    """Aligned (input, target) pair for the shift task.

    Positive tau makes the target lead the input (prediction); negative tau
    makes it lag (recall).  Boundary samples are trimmed so both vectors are
    fully defined and equal-length.
    """
    u = np.asarray(u, dtype=float)
    if abs(tau) >= len(u):
        raise ValueError(f"|tau|={abs(tau)} out of range for series of length {len(u)}")
    if tau >= 0:
        return u[: len(u) - tau], u[tau:]
    return u[-tau:], u[: len(u) + tau]


def gen_symbols(length: int, seed: int) -> np.ndarray:
    """I.i.d. uniform symbols from the four-level alphabet, deterministic per seed."""
    if length < 1:
        raise ValueError("length must be >= 1")
    rng = np.random.default_rng(seed & (2**63 - 1))
    return rng.choice(SYMBOLS, size=length)


def channel_distort(d: np.ndarray, snr_db: float, seed: int) -> np.ndarray:
    """Push a symbol sequence through the noisy nonlinear channel.

    Applies the 10-tap FIR filter, the memoryless polynomial distortion
    q + 0.036 q^2 - 0.011 q^3, and white Gaussian noise sized so the requested
    SNR holds against the noiseless output power.  Boundary samples are
    trimmed: output i corresponds to input symbol i + CHANNEL_PRE.
    """
    d = np.asarray(d, dtype=float)
    if len(d) < CHANNEL_PRE + CHANNEL_POST + 2:
        raise ValueError(f"need at least {CHANNEL_PRE + CHANNEL_POST + 2} symbols, got {len(d)}")
    n_out = len(d) - CHANNEL_PRE - CHANNEL_POST
    q = np.zeros(n_out)
    for offset, coeff in CHANNEL_TAPS:
        q += coeff * d[CHANNEL_PRE + offset : CHANNEL_PRE + offset + n_out]
    clean = q + 0.036 * q**2 - 0.011 * q**3
    if math.isinf(snr_db):
        return clean
    noise_power = np.mean(clean**2) / 10.0 ** (snr_db / 10.0)
    rng = np.random.default_rng(seed & (2**63 - 1))
    return clean + math.sqrt(noise_power) * rng.standard_normal(n_out)


def channel_dataset(n_samples: int, snr_db: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Generate an aligned (channel output, transmitted symbols) pair of n_samples."""
    d = gen_symbols(n_samples + CHANNEL_PRE + CHANNEL_POST, seed)
    u = channel_distort(d, snr_db, seed + 1)
    return u, d[CHANNEL_PRE : CHANNEL_PRE + n_samples]


def quantize_symbols(y: np.ndarray) -> np.ndarray:
    """Nearest symbol of the four-level alphabet, ties toward the smaller symbol."""
    return SYMBOLS[np.digitize(np.asarray(y, dtype=float), [-2.0, 0.0, 2.0], right=True)]


def quantize_symbol(y: float) -> float:
    if not math.isfinite(y):
        raise ValueError(f"cannot quantize {y}")
    return float(quantize_symbols(np.array([y]))[0])


def scale_to_drive(
    u: np.ndarray, gamma: float, lo_drive: float = 0.45, hi_drive: float = math.pi / 2
) -> np.ndarray:
    """Affinely map a task signal so the modulator drive gamma*u spans [lo, hi].

    The default interval sits on the rising flank of the sine transfer
    function with a nonzero floor: the resulting static field circulating in
    the loop acts as a carrier that intensity cross-terms beat against, which
    is what lets a readout that is linear in intensities recover
    sign information from the input.
    """
    u = np.asarray(u, dtype=float)
    lo, hi = float(u.min()), float(u.max())
    if hi - lo < 1e-30:
        return np.zeros_like(u)
    return (lo_drive + (u - lo) / (hi - lo) * (hi_drive - lo_drive)) / gamma
