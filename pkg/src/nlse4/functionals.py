"""Pointwise evaluation of the homogeneous functionals.

This is the canonical "bare" evaluation path: composite terms are formed
innermost-first (build the inner scalar field, then differentiate it
spectrally) with no algebraic expansion.  It is exact for effectively
nodeless states; for strongly localized states the evolution module uses
density-weighted composites instead (see :mod:`nlse4.hydro`).
"""

from __future__ import annotations

import numpy as np

from .coeffs import CoeffSet, CoeffError, VARIANT_LENGTHS
from .hydro import HydroView, hydro_decompose
from .spectral import Grid, gradient, laplacian


def _inner_scalars(hv: HydroView) -> list:
    """The five inner scalars I1..I5 in frozen term order."""
    i3 = sum(v * v for v in hv.grad_log_rho)
    i4 = sum(v * s for v, s in zip(hv.grad_log_rho, hv.grad_s))
    i5 = sum(s * s for s in hv.grad_s)
    return [hv.lap_s, hv.lap_rho_over_rho, i3, i4, i5]


def eval_functional(x, variant: str, hv: HydroView) -> np.ndarray:
    """Sum_i x_i F_i for one coefficient half, masked points zeroed.

    Index order is the table in :mod:`nlse4.coeffs`.  Derivatives of inner
    scalars are computed lazily, so zero coefficients cost nothing.
    """
    x = tuple(float(v) for v in x)
    want = VARIANT_LENGTHS.get(variant)
    if want is None:
        raise CoeffError(f"unknown variant {variant!r}")
    if len(x) != want:
        raise CoeffError(f"variant {variant!r} needs {want} coefficients, got {len(x)}")

    grid = hv.grid
    inner = _inner_scalars(hv)
    out = np.zeros(grid.shape)

    if variant == "dg":
        order = [inner[0], inner[3], inner[1], inner[2], inner[4]]
        for xi, term in zip(x, order):
            if xi != 0.0:
                out = out + xi * term
        return hv.zero_masked(out)

    # ext: lazy per-inner gradients / Laplacians
    lap_cache: dict = {}
    grad_cache: dict = {}

    def lap_of(j):
        if j not in lap_cache:
            lap_cache[j] = laplacian(grid, inner[j])
        return lap_cache[j]

    def grad_of(j):
        if j not in grad_cache:
            grad_cache[j] = gradient(grid, inner[j])
        return grad_cache[j]

    for j in range(5):  # terms 1..5: Lap I_j
        if x[j] != 0.0:
            out = out + x[j] * lap_of(j)
    for j in range(5):  # terms 6..10: (grad rho/rho) . grad I_j
        if x[5 + j] != 0.0:
            out = out + x[5 + j] * hv.dot_grad_log_rho(grad_of(j))
    # terms 11..13: grad S . grad I_j for j = I1, I3, I2
    for pos, j in ((10, 0), (11, 2), (12, 1)):
        if x[pos] != 0.0:
            out = out + x[pos] * hv.dot_grad_s(grad_of(j))
    return hv.zero_masked(out)


def functional_pair(coeffs: CoeffSet, hv: HydroView) -> tuple:
    """(F_a, F_b) fields for a full coefficient set, including the optional
    separability-breaking probe x14 (Lap S)^2 in the Hermitian half."""
    fa = eval_functional(coeffs.a, coeffs.variant, hv)
    fb = eval_functional(coeffs.b, coeffs.variant, hv)
    if coeffs.x14 != 0.0:
        fb = fb + forbidden_term(hv, coeffs.x14)
    return fa, fb


def forbidden_term(hv: HydroView, x14: float) -> np.ndarray:
    """x14 (Lap S)^2: homogeneous of degree zero but not additively
    separable over product states; used only as a negative control."""
    if x14 == 0.0:
        return np.zeros(hv.grid.shape)
    return hv.zero_masked(x14 * hv.lap_s**2)


def homogeneity_check(coeffs: CoeffSet, grid: Grid, psi: np.ndarray, lam: complex) -> float:
    """max |F[lam psi] - F[psi]| over both halves at unmasked points."""
    if lam == 0:
        raise ValueError("lam must be nonzero")
    hv = hydro_decompose(grid, psi)
    hv_l = hydro_decompose(grid, lam * psi)
    dev = 0.0
    for half in ("a", "b"):
        f = eval_functional(getattr(coeffs, half), coeffs.variant, hv)
        f_l = eval_functional(getattr(coeffs, half), coeffs.variant, hv_l)
        keep = ~(hv.mask | hv_l.mask)
        if keep.any():
            dev = max(dev, float(np.abs(np.where(keep, f_l - f, 0.0)).max()))
    return dev
