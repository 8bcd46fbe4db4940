"""Fiber-loop comb physics.

Neurons live on the lines of a frequency comb.  A phase modulator driven at
the line spacing couples line k to line l with Bessel weight J_{k-l}(m), fiber
dispersion adds a quadratic spectral phase per line, and the loop coupler and
amplifier set an overall gain.  One roundtrip of that chain, truncated to the
usable central lines, is the reservoir's internal matrix; the shape of the
input comb is its input vector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Supported range of the Bessel evaluator.
MAX_BESSEL_ORDER = 200
MAX_BESSEL_ARG = 50.0

# Cap on the extended (guard-padded) simulation band.
MAX_TOTAL_LINES = 512

_TWO_PI = 2.0 * math.pi


@dataclass
class CombSpec:
    """Comb geometry: which spectral lines carry neurons.

    ``guard_lines`` extra lines are simulated on each side of the usable band
    so that truncation to the central ``n_lines`` block converges.
    """

    center_wavelength_nm: float = 1550.2
    line_spacing_ghz: float = 17.0
    n_lines: int = 20
    guard_lines: int = 24

    def __post_init__(self):
        if self.n_lines < 1:
            raise ValueError(f"n_lines must be >= 1, got {self.n_lines}")
        if self.line_spacing_ghz <= 0:
            raise ValueError(f"line_spacing_ghz must be > 0, got {self.line_spacing_ghz}")
        if self.guard_lines < 0:
            raise ValueError(f"guard_lines must be >= 0, got {self.guard_lines}")

    @property
    def total_lines(self) -> int:
        return self.n_lines + 2 * self.guard_lines


@dataclass
class ModulatorParams:
    """Phase-modulator drive: modulation depth (set by RF power) and RF carrier phase."""

    modulation_index: float = 1.0
    rf_phase: float = 0.0

    def __post_init__(self):
        if self.modulation_index < 0:
            raise ValueError(f"modulation_index must be >= 0, got {self.modulation_index}")
        # rf_phase is only ever used inside exp(i k phase); normalize to [0, 2pi)
        self.rf_phase = self.rf_phase % _TWO_PI


@dataclass
class LoopParams:
    """One-roundtrip loop parameters: coupler transmission, amplifier gain, dispersion."""

    feedback_coupling: float = 0.837
    gain: float = 1.0
    dispersion_coeff: float = 0.6
    spectral_radius_target: float | None = None

    def __post_init__(self):
        if not 0.0 <= self.feedback_coupling <= 1.0:
            raise ValueError(f"feedback_coupling must be in [0, 1], got {self.feedback_coupling}")
        if self.gain < 0:
            raise ValueError(f"gain must be >= 0, got {self.gain}")
        if self.spectral_radius_target is not None and not (0.0 < self.spectral_radius_target <= 1.5):
            raise ValueError(
                f"spectral_radius_target must be in (0, 1.5], got {self.spectral_radius_target}"
            )


@dataclass
class MZMParams:
    """Intensity-modulator transfer function parameters: field scale and drive strength."""

    e0: float = 1.0
    gamma: float = 1.0

    def __post_init__(self):
        if self.e0 <= 0:
            raise ValueError(f"e0 must be > 0, got {self.e0}")
        if self.gamma <= 0:
            raise ValueError(f"gamma must be > 0, got {self.gamma}")


def line_offsets(m_total: int) -> np.ndarray:
    """Integer line indices measured from the comb center for a band of m_total lines."""
    return np.arange(m_total) - m_total // 2


def central_slice(m_total: int, n: int) -> slice:
    """Slice selecting the central n lines of a band of m_total lines.

    Uses the same center convention as :func:`line_offsets`, so the sliced
    entries carry offsets ``arange(n) - n // 2``.
    """
    if n > m_total:
        raise ValueError(f"cannot take {n} central lines out of {m_total}")
    start = m_total // 2 - n // 2
    return slice(start, start + n)


def _bessel_row(n_max: int, x: float) -> np.ndarray:
    """J_0(x) .. J_{n_max}(x) by downward (Miller) recurrence with sum normalization.

    Stable for the order/argument range used here; absolute error is well
    below 1e-12.  Orders far beyond the recurrence start underflow to zero.
    """
    if not math.isfinite(x) or x < 0:
        raise ValueError(f"argument must be finite and >= 0, got {x}")
    out = np.zeros(n_max + 1)
    if x == 0.0:
        out[0] = 1.0
        return out
    if x < 1e-10:
        # leading power-series terms; higher orders are below double precision
        out[0] = 1.0 - 0.25 * x * x
        if n_max >= 1:
            out[1] = 0.5 * x
        if n_max >= 2:
            out[2] = 0.125 * x * x
        return out

    # start far enough above both the target order and the turning point that
    # the arbitrary seed has decayed below double precision by n_max
    start = max(n_max, int(math.ceil(x))) + int(math.sqrt(40.0 * (n_max + 1))) + 60
    if start % 2:
        start += 1

    jp = 0.0  # J_{k+1}, un-normalized
    j = 1e-30  # J_k, un-normalized
    norm = 0.0  # accumulates J_0 + 2 * sum_{k even} J_k
    for k in range(start, 0, -1):
        if k <= n_max:
            out[k] = j
        if k % 2 == 0:
            norm += 2.0 * j
        jm = (2.0 * k / x) * j - jp
        jp, j = j, jm
        if abs(j) > 1e250:
            # rescale before the downward growth overflows
            jp *= 1e-250
            j *= 1e-250
            norm *= 1e-250
            out *= 1e-250
    out[0] = j
    norm += j
    out /= norm
    return out


def bessel_j(order: int, argument: float) -> float:
    """Bessel function of the first kind J_order(argument).

    Supports |order| <= 200 and 0 <= argument <= 50; negative orders use
    J_{-k}(x) = (-1)^k J_k(x).
    """
    if abs(order) > MAX_BESSEL_ORDER:
        raise ValueError(f"|order| must be <= {MAX_BESSEL_ORDER}, got {order}")
    if not (0.0 <= argument <= MAX_BESSEL_ARG):
        raise ValueError(f"argument must be in [0, {MAX_BESSEL_ARG}], got {argument}")
    k = abs(order)
    val = _bessel_row(k, argument)[k]
    if order < 0 and k % 2:
        val = -val
    return float(val)


def pm_coupling_matrix(spec: CombSpec, pm: ModulatorParams) -> np.ndarray:
    """Line-coupling operator of one phase-modulator pass over the extended band.

    Entry (k, l) is J_{k-l}(m) * exp(i (k-l) rf_phase).  The infinite-band
    operator is unitary; the returned block is a contraction whose central
    rows and columns approach unit power as guard_lines grows.
    """
    m_total = spec.total_lines
    if m_total > MAX_TOTAL_LINES:
        raise ValueError(f"total simulated band {m_total} exceeds cap {MAX_TOTAL_LINES}")
    row = _bessel_row(m_total - 1, pm.modulation_index)
    orders = np.arange(-(m_total - 1), m_total)
    vals = row[np.abs(orders)] * np.where((orders < 0) & (orders % 2 != 0), -1.0, 1.0)
    vals = vals * np.exp(1j * orders * pm.rf_phase)
    diff = np.arange(m_total)[:, None] - np.arange(m_total)[None, :]
    return vals[diff + (m_total - 1)]


def dispersion_phases(spec: CombSpec, loop: LoopParams) -> np.ndarray:
    """Diagonal of the one-roundtrip dispersion operator: exp(i theta2 k^2) per line."""
    k = line_offsets(spec.total_lines)
    return np.exp(1j * loop.dispersion_coeff * k.astype(float) ** 2)


def spectral_radius(w: np.ndarray) -> float:
    """Largest eigenvalue magnitude."""
    return float(np.max(np.abs(np.linalg.eigvals(w))))


def build_internal_matrix(spec: CombSpec, pm: ModulatorParams, loop: LoopParams) -> np.ndarray:
    """Internal reservoir matrix: one loop roundtrip truncated to the usable lines.

    Composes coupler transmission, amplifier gain, dispersion and
    phase-modulation at the guard-extended size, then keeps the central
    n_lines block.  If ``loop.spectral_radius_target`` is set, the truncated
    matrix is rescaled so its spectral radius matches the target.
    """
    p = pm_coupling_matrix(spec, pm)
    d = dispersion_phases(spec, loop)
    full = (loop.feedback_coupling * loop.gain) * (d[:, None] * p)
    sl = central_slice(spec.total_lines, spec.n_lines)
    w = np.ascontiguousarray(full[sl, sl])
    if loop.spectral_radius_target is not None:
        rho = spectral_radius(w)
        if not (math.isfinite(rho) and rho > 0):
            raise ArithmeticError(f"cannot rescale: spectral radius is {rho}")
        w *= loop.spectral_radius_target / rho
    return w


def build_input_vector(spec: CombSpec, pm_input: ModulatorParams) -> np.ndarray:
    """Input-to-reservoir weights: the central n_lines amplitudes of the input comb.

    Line k (center-indexed) carries J_k(m_input) * exp(i k rf_phase); the
    squared norm of the full comb is 1, so the truncated vector has norm <= 1.
    """
    offs = line_offsets(spec.total_lines)[central_slice(spec.total_lines, spec.n_lines)]
    row = _bessel_row(int(np.max(np.abs(offs))), pm_input.modulation_index)
    vals = row[np.abs(offs)] * np.where((offs < 0) & (offs % 2 != 0), -1.0, 1.0)
    return vals * np.exp(1j * offs * pm_input.rf_phase)
