"""chiralpb: few-photon scattering and photon blockade in chiral
waveguide-cavity QED arrays.

The package computes photon scattering amplitudes and equal-time photon
correlations g^(n)(0) for arrays of cavity-atom cells (or bare atoms)
chirally coupled to a waveguide, maps out perfect-photon-blockade zeros in
the (detuning, chirality) plane, studies their robustness to frequency
disorder, and cross-validates everything against an independent Lindblad
master-equation / quantum-trajectory solver.
"""
from chiralpb.model import (
    CouplingKind,
    Direction,
    DriveFrame,
    ExcitationBasis,
    OperatorBlock,
    SystemSpec,
    build_collapse,
    build_h_eff,
    enumerate_basis,
    sample_disorder,
    validate_spec,
)

__version__ = "0.1.0"

__all__ = [
    "CouplingKind",
    "Direction",
    "DriveFrame",
    "ExcitationBasis",
    "OperatorBlock",
    "SystemSpec",
    "build_collapse",
    "build_h_eff",
    "enumerate_basis",
    "sample_disorder",
    "validate_spec",
    "__version__",
]
