"""NV ground-state spin electrometry toolkit.

Models the spin-1 ground-state Hamiltonian under magnetic, electric and
strain fields, predicts ODMR observables and pulse-sequence signals with
photon shot noise, and inverts measured polar patterns into vector electric
fields.
"""

from .core import (
    EffectiveField,
    EigenSystem,
    ElectricField,
    MagneticField,
    NVParams,
    StrainField,
    build_hamiltonian,
    convert_units,
    effective_field,
    eigensolve,
    spin_operators,
    transition_frequencies,
)
from .response import (
    DecoherenceParams,
    RegimeError,
    TransitionShift,
    ZeroFieldStates,
    axial_decay_scan,
    delta_omega_exact,
    delta_omega_perturbative,
    f_function,
    mixing_kappa,
    polar_scan,
    t2star_model,
    zero_field_eigenstates,
)
from .protocols import (
    PulseSequence,
    SignalModel,
    Waveform,
    cw_odmr_spectrum,
    field_sensitivity,
    min_detectable_field,
    optimal_tau,
    phase_fid,
    phase_hahn,
    point_charge_field,
    sensitivity_curve,
    signal_intensity,
    simulate_readout,
)
from .calibration import (
    AlignmentScan,
    FitResult,
    HyperfineSystem,
    align_axial_field,
    canonicalize_angles,
    fit_polar_pattern,
    hyperfine_hamiltonian,
    hyperfine_lines,
    infer_sigma_perp,
    polar_pattern_model,
)

__version__ = "0.1.0"
