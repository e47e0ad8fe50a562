"""Objective bookkeeping and the thresholding potential.

Two energies are tracked per design chi with temperature T:

    J      = compliance + gamma * perimeter
    J_tau  = J + (xi/2) * integral kappa(chi) |grad T|^2

where compliance pairs the smoothed source with T through the lumped
load weights (so it equals the stiffness quadratic form at the discrete
solution), and the perimeter is the kernel-based interface estimate.

The potential Phi drives thresholding:

    Phi = (q1 - q2) G*(T - T*)
        + gamma sqrt(pi/tau) G*(1 - 2 chi)
        + (kappa1 - kappa2) G*((xi/2)|grad T|^2 + grad T . grad T*)

Constant fields are fixed points of the kernel, so G*(1 - 2 chi) is
computed as 1 - 2 G*chi and the transform of chi can be shared with the
material blend.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .convolution import KernelParams, _blend_from_conv, _convolve_values
from .fem import Triangulation, gradient_product_field
from .fields import IndicatorField, ScalarField

__all__ = ["EnergyParams", "EnergyBreakdown", "evaluate_energy", "compute_phi"]


@dataclass(frozen=True)
class EnergyParams:
    """Material pair, objective weights and kernel for one problem."""

    kappa1: float
    kappa2: float
    q1: float
    q2: float
    gamma: float
    xi: float
    kernel: KernelParams

    def __post_init__(self):
        if self.kappa1 <= 0.0 or self.kappa2 <= 0.0:
            raise ValueError("conductivities must be positive")
        if self.gamma < 0.0:
            raise ValueError("perimeter weight gamma must be non-negative")
        if self.xi < 0.0:
            raise ValueError("penalty weight xi must be non-negative")


@dataclass(frozen=True)
class EnergyBreakdown:
    """Objective components; J = compliance + perimeter_term, J_tau = J + dirichlet_energy.

    perimeter_term already carries the weight gamma.
    """

    compliance: float
    perimeter_term: float
    dirichlet_energy: float
    J: float
    J_tau: float


def _check_grids(tri, *fields_):
    for f in fields_:
        if f.grid != tri.grid:
            raise ValueError("field grid does not match triangulation grid")


def evaluate_energy(chi: IndicatorField, T: ScalarField, tri: Triangulation,
                    params: EnergyParams, conv_chi: np.ndarray | None = None) -> EnergyBreakdown:
    """Energy components of (chi, T); conv_chi may pass a precomputed G*chi."""
    _check_grids(tri, chi, T)
    grid = tri.grid
    if conv_chi is None:
        conv_chi = _convolve_values(chi.values.astype(np.float64), grid, params.kernel)
    kappa, q = _blend_from_conv(conv_chi, params.kappa1, params.kappa2, params.q1, params.q2)

    compliance = float(np.dot(q * tri.lumped_node_volume, T.values))

    mask = chi.values.astype(bool)
    perimeter = float(
        np.sqrt(np.pi / params.kernel.tau)
        * np.sum(1.0 - conv_chi[mask])
        * grid.cell_volume
    )

    kappa_e = kappa[tri.elements].mean(axis=1)
    gT = tri.element_gradients(T.values)
    dirichlet_energy = float(
        0.5 * params.xi * tri.element_volume * np.dot(kappa_e, np.einsum("ed,ed->e", gT, gT))
    )

    perimeter_term = params.gamma * perimeter
    J = compliance + perimeter_term
    return EnergyBreakdown(
        compliance=compliance,
        perimeter_term=perimeter_term,
        dirichlet_energy=dirichlet_energy,
        J=J,
        J_tau=J + dirichlet_energy,
    )


def compute_phi(chi: IndicatorField, T: ScalarField, T_star: ScalarField,
                tri: Triangulation, params: EnergyParams,
                conv_chi: np.ndarray | None = None) -> ScalarField:
    """Thresholding potential Phi at the current iterate."""
    _check_grids(tri, chi, T, T_star)
    grid = tri.grid
    kernel = params.kernel
    if conv_chi is None:
        conv_chi = _convolve_values(chi.values.astype(np.float64), grid, kernel)

    conv_dT = _convolve_values(T.values - T_star.values, grid, kernel)
    g = gradient_product_field(tri, T, T_star, params.xi)
    conv_g = _convolve_values(g.values, grid, kernel)

    phi = (
        (params.q1 - params.q2) * conv_dT
        + params.gamma * np.sqrt(np.pi / kernel.tau) * (1.0 - 2.0 * conv_chi)
        + (params.kappa1 - params.kappa2) * conv_g
    )
    return ScalarField(grid, phi)
