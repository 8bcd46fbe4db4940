"""combrc: simulator and benchmark harness for frequency-multiplexed photonic
deep reservoir computers."""

__version__ = "0.1.0"

from .comb import (
    CombSpec,
    LoopParams,
    ModulatorParams,
    MZMParams,
    bessel_j,
    build_input_vector,
    build_internal_matrix,
    dispersion_phases,
    pm_coupling_matrix,
)
from .reservoir import (
    DivergenceError,
    InterlayerWeights,
    LayerState,
    ReservoirParams,
    SignalScaler,
    Trace,
    concat_deep_state,
    input_nonlinearity,
    interlayer_signal,
    quadratic_readout,
    run_deep,
    run_sequence,
    step,
)
from .training import (
    CVResult,
    ReadoutWeights,
    RidgeConfig,
    cross_validate,
    nmse,
    ridge_fit,
    ser,
    split_signed_weights,
)

__all__ = [
    "CombSpec",
    "LoopParams",
    "ModulatorParams",
    "MZMParams",
    "bessel_j",
    "build_input_vector",
    "build_internal_matrix",
    "dispersion_phases",
    "pm_coupling_matrix",
    "DivergenceError",
    "InterlayerWeights",
    "LayerState",
    "ReservoirParams",
    "SignalScaler",
    "Trace",
    "concat_deep_state",
    "input_nonlinearity",
    "interlayer_signal",
    "quadratic_readout",
    "run_deep",
    "run_sequence",
    "step",
    "CVResult",
    "ReadoutWeights",
    "RidgeConfig",
    "cross_validate",
    "nmse",
    "ridge_fit",
    "ser",
    "split_signed_weights",
]
