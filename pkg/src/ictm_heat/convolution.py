"""Heat-kernel convolution by FFT with mirror or periodic extension.

The Gauss kernel G_tau(x) = (4 pi tau)^(-d/2) exp(-|x|^2 / (4 tau)) is
applied spectrally with the exact symbol exp(-tau |omega|^2), so repeated
applications satisfy the semigroup property to rounding.

Extensions:

* ``mirror``: half-sample even reflection, every axis doubled to
  2(m+1) samples. Self-adjoint w.r.t. the uniform nodal inner product,
  preserves the nodal mean exactly, and models zero-flux behavior at the
  box faces.
* ``periodic``: the m+1 nodal samples are treated as one period of a
  torus with period L + h per axis.

The discrete max principle (output within [min u, max u]) holds up to
spectral ringing; the ringing is below 1e-12 once tau resolves the grid
(roughly tau >= h^2) and grows for under-resolved kernels.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import fft as sfft

from .fields import GridSpec, IndicatorField, ScalarField

__all__ = ["KernelParams", "convolve", "perimeter_estimate", "blend_materials"]

_EXTENSIONS = ("mirror", "periodic")


@dataclass(frozen=True)
class KernelParams:
    """Kernel width tau (> 0) and boundary extension mode."""

    tau: float
    extension: str = "mirror"

    def __post_init__(self):
        if not (np.isfinite(self.tau) and self.tau > 0.0):
            raise ValueError(f"kernel tau must be positive, got {self.tau}")
        if self.extension not in _EXTENSIONS:
            raise ValueError(
                f"kernel extension must be one of {_EXTENSIONS}, got {self.extension!r}"
            )


@lru_cache(maxsize=64)
def _multiplier(ext_shape: tuple, spacings: tuple, tau: float) -> np.ndarray:
    """rfftn multiplier exp(-tau |omega|^2) for an extended array shape.

    ext_shape/spacings are ordered like the ndarray axes (z, y, x).
    """
    freqs = []
    last = len(ext_shape) - 1
    for ax, (n, h) in enumerate(zip(ext_shape, spacings)):
        if ax == last:
            w = 2.0 * np.pi * np.fft.rfftfreq(n, d=h)
        else:
            w = 2.0 * np.pi * np.fft.fftfreq(n, d=h)
        freqs.append(w)
    w2 = np.zeros(tuple(f.size for f in freqs))
    for ax, w in enumerate(freqs):
        shape = [1] * len(freqs)
        shape[ax] = w.size
        w2 = w2 + (w**2).reshape(shape)
    mult = np.exp(-tau * w2)
    mult.flags.writeable = False
    return mult


def _convolve_values(values: np.ndarray, grid: GridSpec, params: KernelParams) -> np.ndarray:
    arr = values.reshape(grid.shape[::-1]).astype(np.float64)
    spacings = grid.spacing[::-1]
    if params.extension == "mirror":
        for ax in range(arr.ndim):
            arr = np.concatenate([arr, np.flip(arr, axis=ax)], axis=ax)
    ext_shape = arr.shape
    mult = _multiplier(ext_shape, spacings, params.tau)
    out = sfft.irfftn(sfft.rfftn(arr) * mult, s=ext_shape)
    if params.extension == "mirror":
        out = out[tuple(slice(0, n) for n in grid.shape[::-1])]
    return np.ascontiguousarray(out).reshape(-1)


def convolve(u, params: KernelParams) -> ScalarField:
    """G_tau * u for a scalar or indicator field."""
    if isinstance(u, IndicatorField):
        values = u.values.astype(np.float64)
    elif isinstance(u, ScalarField):
        values = u.values
    else:
        raise TypeError(f"convolve expects a field, got {type(u).__name__}")
    return ScalarField(u.grid, _convolve_values(values, u.grid, params))


def perimeter_estimate(chi: IndicatorField, params: KernelParams) -> float:
    """Interface measure sqrt(pi/tau) * sum chi (1 - G_tau * chi) * cell_volume."""
    if not isinstance(chi, IndicatorField):
        raise TypeError("perimeter_estimate expects an indicator field")
    conv = _convolve_values(chi.values.astype(np.float64), chi.grid, params)
    mask = chi.values.astype(bool)
    acc = float(np.sum(1.0 - conv[mask]))
    return np.sqrt(np.pi / params.tau) * acc * chi.grid.cell_volume


def _blend_from_conv(conv: np.ndarray, kappa1, kappa2, q1, q2):
    # the exact operator maps {0,1} data into [0,1]; spectral ringing on
    # under-resolved kernels can leave that band, so the blend clips back
    # to keep the coefficients inside the physical material range
    conv = np.clip(conv, 0.0, 1.0)
    kappa = kappa2 + (kappa1 - kappa2) * conv
    q = q2 + (q1 - q2) * conv
    return kappa, q


def blend_materials(
    chi: IndicatorField,
    kappa1: float,
    kappa2: float,
    q1: float,
    q2: float,
    params: KernelParams,
):
    """Smoothed two-material coefficients.

    kappa = kappa2 + (kappa1 - kappa2) G_tau*chi and the same blend for
    the source q; one transform is shared by both fields.
    """
    if kappa1 <= 0.0 or kappa2 <= 0.0:
        raise ValueError(f"conductivities must be positive, got {kappa1}, {kappa2}")
    conv = _convolve_values(chi.values.astype(np.float64), chi.grid, params)
    kappa, q = _blend_from_conv(conv, kappa1, kappa2, q1, q2)
    return ScalarField(chi.grid, kappa), ScalarField(chi.grid, q)
