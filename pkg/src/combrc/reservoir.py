"""Discrete-time reservoir dynamics and the analog deep cascade.

The reservoir itself is linear in the comb field: x_n = W x_{n-1} + W_in f(u_n),
with the input nonlinearity f given by the sine transfer function of an
intensity modulator.  Readouts and inter-layer connections act on line
intensities |x_k|^2, which is where the nonlinearity of the computation lives.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .comb import MZMParams

# Any line amplitude beyond this aborts a run as divergent.
DIVERGENCE_LIMIT = 1e6


class DivergenceError(RuntimeError):
    """A run blew past the amplitude limit; carries the first offending timestep."""

    def __init__(self, timestep: int, amplitude: float):
        super().__init__(
            f"state diverged at timestep {timestep}: |x| reached {amplitude:.3e} "
            f"(limit {DIVERGENCE_LIMIT:.0e})"
        )
        self.timestep = timestep


@dataclass
class ReservoirParams:
    """One layer's fixed weights: internal matrix, input vector, input modulator."""

    w: np.ndarray
    w_in: np.ndarray
    mzm: MZMParams = field(default_factory=MZMParams)

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=complex)
        self.w_in = np.asarray(self.w_in, dtype=complex)
        if self.w.ndim != 2 or self.w.shape[0] != self.w.shape[1]:
            raise ValueError(f"w must be square, got shape {self.w.shape}")
        if self.w_in.shape != (self.w.shape[0],):
            raise ValueError(
                f"w_in shape {self.w_in.shape} does not match w shape {self.w.shape}"
            )
        if not (np.all(np.isfinite(self.w.view(float))) and np.all(np.isfinite(self.w_in.view(float)))):
            raise ValueError("weights must be finite")

    @property
    def n(self) -> int:
        return self.w.shape[0]


@dataclass
class LayerState:
    """Complex comb-line amplitudes of one layer at one timestep."""

    x: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=complex)
        if self.x.ndim != 1:
            raise ValueError(f"state must be a vector, got shape {self.x.shape}")
        if not np.all(np.isfinite(self.x.view(float))):
            raise ValueError("state must be finite")


@dataclass
class Trace:
    """Time-indexed record of a run: per-step line intensities, optionally states."""

    intensities: np.ndarray
    states: np.ndarray | None = None

    def __post_init__(self):
        self.intensities = np.asarray(self.intensities, dtype=float)
        if self.intensities.ndim != 2:
            raise ValueError(f"intensities must be T x N, got shape {self.intensities.shape}")
        if np.any(self.intensities < 0):
            raise ValueError("intensities must be non-negative")

    @property
    def n_steps(self) -> int:
        return self.intensities.shape[0]


@dataclass
class InterlayerWeights:
    """Non-negative per-line attenuations connecting one layer to the next."""

    diag: np.ndarray

    def __post_init__(self):
        self.diag = np.asarray(self.diag, dtype=float)
        if self.diag.ndim != 1:
            raise ValueError(f"diag must be a vector, got shape {self.diag.shape}")
        if np.any(self.diag < 0):
            raise ValueError("inter-layer weights must be non-negative")


@dataclass
class DeepState:
    """States of every layer of a deep stack at one timestep."""

    layers: list[LayerState]

    def __post_init__(self):
        if len(self.layers) < 1:
            raise ValueError("need at least one layer")
        n = len(self.layers[0].x)
        if any(len(s.x) != n for s in self.layers):
            raise ValueError("all layers must have the same size")

    def concatenated(self) -> np.ndarray:
        return np.concatenate([s.x for s in self.layers])


def input_nonlinearity(u, mzm: MZMParams):
    """Modulator transfer function e0 * sin(gamma * u); accepts scalars or arrays."""
    return mzm.e0 * np.sin(mzm.gamma * np.asarray(u))


def step(state: LayerState, u: float, params: ReservoirParams) -> LayerState:
    """One reservoir update: x -> W x + W_in f(u)."""
    if len(state.x) != params.n:
        raise ValueError(f"state size {len(state.x)} does not match reservoir size {params.n}")
    return LayerState(params.w @ state.x + params.w_in * float(input_nonlinearity(u, params.mzm)))


def run_sequence(
    u_seq: np.ndarray,
    params: ReservoirParams,
    x0: LayerState | None = None,
    record_states: bool = False,
    noise_std: float = 0.0,
    rng: np.random.Generator | None = None,
) -> Trace:
    """Drive the reservoir through a full input sequence and record intensities.

    Optionally adds complex Gaussian measurement noise to the field before
    intensity detection (``noise_std`` per quadrature, default off).  Raises
    :class:`DivergenceError` naming the first timestep whose amplitude exceeds
    the limit.
    """
    u_seq = np.asarray(u_seq, dtype=float)
    if u_seq.ndim != 1 or len(u_seq) < 1:
        raise ValueError("u_seq must be a non-empty 1-D sequence")
    n = params.n
    x = np.zeros(n, dtype=complex) if x0 is None else x0.x.astype(complex)
    if len(x) != n:
        raise ValueError(f"x0 size {len(x)} does not match reservoir size {n}")

    drive = np.asarray(input_nonlinearity(u_seq, params.mzm), dtype=float)
    w, w_in = params.w, params.w_in
    t_total = len(u_seq)
    intensities = np.empty((t_total, n))
    # the noisy measurement is |x + nu|^2, so noise needs the fields too
    keep_states = record_states or noise_std > 0.0
    states = np.empty((t_total, n), dtype=complex) if keep_states else None

    for t in range(t_total):
        x = w @ x + w_in * drive[t]
        ax = np.abs(x)
        peak = ax.max()
        if not peak < DIVERGENCE_LIMIT:
            raise DivergenceError(t, float(peak))
        if states is not None:
            states[t] = x
        intensities[t] = ax * ax

    if noise_std > 0.0:
        if rng is None:
            rng = np.random.default_rng()
        nu = noise_std * (
            rng.standard_normal(states.shape) + 1j * rng.standard_normal(states.shape)
        )
        noisy = np.abs(states + nu)
        intensities = noisy * noisy

    return Trace(intensities=intensities, states=states if record_states else None)


def quadratic_readout(state: LayerState, w_plus: np.ndarray, w_minus: np.ndarray) -> float:
    """Signed photodiode readout |W+ x|^2 - |W- x|^2 for one state."""
    w_plus = np.asarray(w_plus, dtype=float)
    w_minus = np.asarray(w_minus, dtype=float)
    if w_plus.shape != state.x.shape or w_minus.shape != state.x.shape:
        raise ValueError("readout diagonals must match the state size")
    if np.any(w_plus < 0) or np.any(w_minus < 0):
        raise ValueError("readout diagonals must be non-negative")
    intensity = np.abs(state.x) ** 2
    return float((w_plus**2 - w_minus**2) @ intensity)


def interlayer_signal(state: LayerState, weights: InterlayerWeights) -> float:
    """Photodiode signal |W_out x|^2 feeding the next layer; always >= 0."""
    if weights.diag.shape != state.x.shape:
        raise ValueError("inter-layer weights must match the state size")
    return float(weights.diag**2 @ (np.abs(state.x) ** 2))


@dataclass
class SignalScaler:
    """Affine map from the inter-layer photodiode signal to the next modulator's drive.

    With ``gain`` unset, the map is calibrated on the first ``calib_len``
    samples of the signal so the receiving drive gamma*u reaches target_span
    at the observed maximum, then frozen.  The calibrated map is a pure gain
    (no offset): the photodiode signal is non-negative and attenuating it must
    proportionally compress the drive range, as it does in hardware.  Set
    ``gain`` (and ``offset``) explicitly for a fixed, calibration-free map.
    """

    target_span: float = math.pi / 2
    calib_len: int = 500
    gain: float | None = None
    offset: float = 0.0

    def frozen(self, samples: np.ndarray, receiver_gamma: float) -> "SignalScaler":
        """Return a copy with fixed coefficients; calibrates if needed."""
        if self.gain is not None:
            return SignalScaler(self.target_span, self.calib_len, self.gain, self.offset)
        samples = np.asarray(samples, dtype=float)
        hi = float(samples.max())
        if hi < 1e-30:
            return SignalScaler(self.target_span, self.calib_len, 0.0, 0.0)
        gain = self.target_span / (receiver_gamma * hi)
        return SignalScaler(self.target_span, self.calib_len, gain, 0.0)

    def apply(self, signal):
        if self.gain is None:
            raise RuntimeError("scaler must be frozen before use")
        return self.gain * np.asarray(signal, dtype=float) + self.offset


def run_deep(
    u_seq: np.ndarray,
    layer_params: list[ReservoirParams],
    interlayer: list[InterlayerWeights],
    signal_scaler: SignalScaler | None = None,
    delay: int = 0,
    record_states: bool = False,
    noise_std: float = 0.0,
    seed: int | None = None,
    _first_trace: Trace | None = None,
) -> list[Trace]:
    """Run the serial deep cascade: layer 1 on the input, each next layer on the
    scaled photodiode signal of the previous one.

    With ``delay=0`` layer i's state at step n feeds layer i+1's update at the
    same step; ``delay=1`` inserts one step of latency (signal at step -1 taken
    as zero).  ``_first_trace`` lets callers reuse a precomputed layer-1 trace,
    which cannot depend on the inter-layer weights.
    """
    if len(interlayer) != len(layer_params) - 1:
        raise ValueError(
            f"need {len(layer_params) - 1} inter-layer weights for "
            f"{len(layer_params)} layers, got {len(interlayer)}"
        )
    if delay not in (0, 1):
        raise ValueError(f"delay must be 0 or 1, got {delay}")
    if signal_scaler is None:
        signal_scaler = SignalScaler()

    traces: list[Trace] = []
    drive = np.asarray(u_seq, dtype=float)
    for i, params in enumerate(layer_params):
        if i == 0 and _first_trace is not None:
            trace = _first_trace
        else:
            rng = np.random.default_rng([_unsigned(seed), i]) if noise_std > 0.0 else None
            trace = run_sequence(
                drive, params, record_states=record_states, noise_std=noise_std, rng=rng
            )
        traces.append(trace)
        if i + 1 < len(layer_params):
            sig = trace.intensities @ interlayer[i].diag ** 2
            if delay:
                sig = np.concatenate(([0.0], sig[:-1]))
            frozen = signal_scaler.frozen(
                sig[: min(signal_scaler.calib_len, len(sig))],
                layer_params[i + 1].mzm.gamma,
            )
            drive = frozen.apply(sig)
    return traces


def concat_deep_state(traces: list[Trace]) -> Trace:
    """Column-wise concatenation of per-layer traces into total-readout features."""
    if len(traces) < 1:
        raise ValueError("need at least one trace")
    t0 = traces[0].n_steps
    if any(tr.n_steps != t0 for tr in traces):
        raise ValueError("all traces must cover the same number of steps")
    intensities = np.hstack([tr.intensities for tr in traces])
    states = None
    if all(tr.states is not None for tr in traces):
        states = np.hstack([tr.states for tr in traces])
    return Trace(intensities=intensities, states=states)


def _unsigned(seed: int | None) -> int:
    if seed is None:
        return 0
    return seed & (2**63 - 1)
