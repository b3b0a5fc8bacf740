"""Shared fixtures and spec factories for the test suite.

Everything here builds parameter sets in units of the total waveguide rate
kappa = kappa_l + kappa_r (kappa = 1), the convention used throughout the
package docs: a chirality alpha = kappa_l/kappa_r then fixes the split via
kappa_r = 1/(1+alpha).
"""
from __future__ import annotations

import pytest

from chiralpb.model import CouplingKind, SystemSpec


def make_spec(
    n_cells: int = 1,
    alpha: float = 0.0,
    g: float = 0.8,
    kappa: float = 1.0,
    gamma_e: float = 0.0,
    kappa_ext: float = 0.0,
    phi: float = 0.0,
    kind: CouplingKind = CouplingKind.SIDE_CAVITY_ATOM,
) -> SystemSpec:
    """Uniform array with total waveguide rate `kappa` and chirality `alpha`."""
    kappa_r = kappa / (1.0 + alpha)
    return SystemSpec(
        n_cells=n_cells,
        coupling_g=g,
        kappa_r=kappa_r,
        kappa_l=kappa - kappa_r,
        hop_phase=phi,
        atom_loss=gamma_e,
        cavity_loss=kappa_ext,
        kind=kind,
    )


@pytest.fixture
def spec_factory():
    return make_spec
