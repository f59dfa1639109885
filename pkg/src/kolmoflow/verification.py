"""Independent checks on constructed stationary states."""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np

from .spectral import (
    DomainSpec,
    SpectralField,
    advect,
    apply_multiplier,
    grid_transform,
    inner_product,
    norm,
    padded_physical,
)
from .stationary import QuinticNonlinearity, cos_mode

GEVREY_FLOOR = 1e-13


def stationarity_residual(Psi: SpectralField) -> tuple[float, float]:
    """(L², L^∞) norms of ∇^⊥Ψ·∇ΔΨ."""
    r = advect(Psi, apply_multiplier(Psi, "laplacian"))
    return norm(r), float(np.max(np.abs(r.to_physical())))


def gradient_laplacian_norm(Psi: SpectralField) -> float:
    """‖∇ΔΨ‖_{L²}, the natural scale for stationarity_residual."""
    return norm(apply_multiplier(Psi, "laplacian"), "Hdot_s", s=1)


def _coefficients(F) -> list[float]:
    if isinstance(F, tuple) and len(F) == 2 and isinstance(F[0], QuinticNonlinearity):
        return F[0].full_coefficients(F[1])
    coeffs = list(map(float, F))
    if len(coeffs) > 6:
        raise ValueError("F must have degree at most 5")
    return coeffs


def equation_residual(Psi: SpectralField, F) -> float:
    """‖ΔΨ - F(Ψ)‖_{L²} for a polynomial F of degree ≤ 5.

    F is a sequence of monomial coefficients [c0..c5] or a pair
    (QuinticNonlinearity, ε) meaning F_ε(s) = -s + ε f(A, B; s).  F(Ψ) is
    evaluated on a 3x grid so no product is aliased; its modes beyond Ψ's
    resolution count towards the residual.
    """
    c = _coefficients(F)
    vals = padded_physical(Psi, 3)
    Fv = np.zeros_like(vals)
    for p in reversed(c):
        Fv = Fv * vals + p
    big = Psi.domain.with_resolution(*vals.shape)
    lhs = padded_physical(apply_multiplier(Psi, "laplacian"), 3)
    return norm(grid_transform(lhs - Fv, "to_spectral", big))


def catseye_projection(Psi: SpectralField) -> float:
    """⟨Ψ, cos x cos 4y⟩."""
    d = Psi.domain
    if d.kind != "torus" or d.delta != 1.0:
        raise ValueError("catseye_projection needs the square torus")
    return inner_product(Psi, cos_mode(d, 1, 4))


def gevrey_radius_fit(
    field: SpectralField,
    floor: float = GEVREY_FLOOR,
    x_modes: Sequence[int] = (0, 1),
) -> tuple[float, float]:
    """Exponential decay rate of the Fourier coefficients.

    Uses the modes with |k| in ``x_modes`` (one representative per ± pair)
    whose amplitude exceeds ``floor`` times the largest such amplitude, fits
    log|c| = a - λ|κ| by least squares and returns (λ, rms residual).
    The floor is relative so the result does not depend on the field's scale.
    """
    d = field.domain
    kx, ky = d.kx_int, d.ky_int
    KX, KY = d.wavenumbers()
    kabs = np.sqrt(KX**2 + KY**2)
    sel = np.isin(np.abs(kx), list(x_modes))[:, None] & (kx >= 0)[:, None] & (ky >= 0)[None, :]
    amps = np.abs(field.coeffs)[sel]
    ks = kabs[sel]
    if amps.size == 0 or amps.max() == 0:
        raise ValueError("field vanishes on the fitted modes")
    use = amps > floor * amps.max()
    if use.sum() < 4:
        raise ValueError(f"only {int(use.sum())} modes above the floor; need at least 4")
    x, y = ks[use], np.log(amps[use])
    M = np.column_stack([np.ones_like(x), x])
    coef, *_ = np.linalg.lstsq(M, y, rcond=None)
    resid = y - M @ coef
    return float(-coef[1]), float(np.sqrt(np.mean(resid**2)))


def sin_cos_mode(domain, k: int, l: int) -> SpectralField:
    """sin(kx)cos(ly), k >= 1, l >= 0."""
    a = 0.25 if l else 0.5
    modes = {}
    for sl in {l, -l}:
        modes[(k, sl)] = -1j * a
        modes[(-k, sl)] = 1j * a
    return SpectralField.from_modes(domain, modes)


def obstruction_bracket(a: float, ell: int = 2, n: int = 32) -> tuple[SpectralField, float]:
    """u*·∇ω* for ω* = a(sin(ℓy) + cos x), u* = ∇^⊥Δ⁻¹ω*.

    Analytically u*·∇ω* = a²(ℓ - 1/ℓ) sin x cos(ℓy); the second value returned
    is the measured coefficient of sin x cos(ℓy).
    """
    if ell < 2:
        raise ValueError("ell must be at least 2")
    d = DomainSpec.square(n)
    omega = SpectralField.from_modes(
        d, {(0, ell): -0.5j * a, (0, -ell): 0.5j * a, (1, 0): 0.5 * a, (-1, 0): 0.5 * a}
    )
    psi = apply_multiplier(omega, "inv_laplacian")
    out = advect(psi, omega)
    b = sin_cos_mode(d, 1, ell)
    return out, inner_product(out, b) / inner_product(b, b)
