"""Compatibility degrees, witnesses and random-matrix checks for quantum measurements."""
from .core import (
    DichotomicObservable,
    MeasurementSet,
    Povm,
    apply_white_noise,
    basis_measurement,
    dichotomic,
    fourier_matrix,
    measurement_set,
    noisy_set,
    observable_of,
    pauli_basis,
    povm_of,
    validate_povm,
)
from .sampling import SeededRng
from .sdp import TauBracket, joint_feasible, tau_dichotomic, tau_general, witness_search

__version__ = "0.1.0"
