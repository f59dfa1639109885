"""
Fourier-spectral fields on rectangular tori and on the periodic channel.

Torus T²_δ = [0, 2πδ] × [0, 2π]
    Coefficients are stored in numpy FFT order, shape (nx, ny); entry [i, j]
    is the analytic Fourier coefficient of exp(i(k x/δ + l y)) with
    k = fftfreq(nx)·nx [i], l = fftfreq(ny)·ny [j].  So cos(y) has
    coefficients 1/2 at (0, ±1).

Channel T × [-1, 1]
    x is Fourier (period 2π, FFT order along axis 0), y is expanded in the
    Dirichlet sine basis s_l(y) = sin(lπ(y+1)/2), l = 1..ny (axis 1, index
    l-1).  Collocation uses the ny interior points y_j = -1 + 2j/(ny+1).

All operations are pure: inputs are never modified.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np
import scipy.fft as sfft

TORUS = "torus"
CHANNEL = "channel"


@dataclass(frozen=True)
class DomainSpec:
    kind: Literal["torus", "channel"] = TORUS
    delta: float = 1.0
    nx: int = 64
    ny: int = 64

    def __post_init__(self):
        if self.kind not in (TORUS, CHANNEL):
            raise ValueError(f"unknown domain kind {self.kind!r}")
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        for name in ("nx", "ny"):
            n = getattr(self, name)
            if n < 8 or n % 2:
                raise ValueError(f"{name} must be an even integer >= 8, got {n}")

    @classmethod
    def square(cls, n: int = 64) -> "DomainSpec":
        return cls(TORUS, 1.0, n, n)

    @classmethod
    def channel(cls, nx: int = 32, ny: int = 32) -> "DomainSpec":
        return cls(CHANNEL, 1.0, nx, ny)

    def with_resolution(self, nx: int, ny: int | None = None) -> "DomainSpec":
        return DomainSpec(self.kind, self.delta, nx, nx if ny is None else ny)

    @property
    def area(self) -> float:
        if self.kind == TORUS:
            return 4 * np.pi**2 * self.delta
        return 4 * np.pi

    @property
    def plancherel(self) -> float:
        """‖f‖² = plancherel · Σ|coeff|² (sine basis has unit norm on [-1, 1])."""
        return self.area if self.kind == TORUS else 2 * np.pi

    @property
    def kx_int(self) -> np.ndarray:
        """Integer x-wavenumbers in FFT order."""
        return np.fft.fftfreq(self.nx, 1.0 / self.nx)

    @property
    def ky_int(self) -> np.ndarray:
        if self.kind == TORUS:
            return np.fft.fftfreq(self.ny, 1.0 / self.ny)
        return np.arange(1, self.ny + 1, dtype=float)

    @property
    def kx(self) -> np.ndarray:
        """Physical x-wavenumbers (k/δ on the torus)."""
        return self.kx_int / self.delta if self.kind == TORUS else self.kx_int

    @property
    def ky(self) -> np.ndarray:
        if self.kind == TORUS:
            return self.ky_int
        return self.ky_int * np.pi / 2

    def wavenumbers(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.kx, self.ky, indexing="ij")

    def ksq(self) -> np.ndarray:
        """|k|² = k²/δ² + l² (torus) or k² + (lπ/2)² (channel)."""
        KX, KY = self.wavenumbers()
        return KX**2 + KY**2

    def grid(self) -> tuple[np.ndarray, np.ndarray]:
        """Collocation points, each of shape (nx, ny)."""
        if self.kind == TORUS:
            x = 2 * np.pi * self.delta * np.arange(self.nx) / self.nx
            y = 2 * np.pi * np.arange(self.ny) / self.ny
        else:
            x = 2 * np.pi * np.arange(self.nx) / self.nx
            y = -1 + 2 * np.arange(1, self.ny + 1) / (self.ny + 1)
        return np.meshgrid(x, y, indexing="ij")

    @property
    def kernel_collision(self) -> bool:
        """True if some mode with k != 0 lies on the circle k²/δ² + l² = 1."""
        if self.kind != TORUS:
            return False
        return bool(helmholtz_kernel_modes(self.delta, self.nx, self.ny))


def helmholtz_kernel_modes(delta: float, nx: int, ny: int, include_shear: bool = False):
    """All integer (k, l) inside the resolution with k²/δ² + l² = 1."""
    out = []
    for k in range(-nx // 2 + 1, nx // 2 + 1):
        if k == 0 and not include_shear:
            continue
        for l in range(-ny // 2 + 1, ny // 2 + 1):
            if abs(k * k / delta**2 + l * l - 1.0) < 1e-12:
                out.append((k, l))
    return out


@dataclass(frozen=True, eq=False)
class SpectralField:
    domain: DomainSpec
    coeffs: np.ndarray
    real: bool = True

    def __post_init__(self):
        shape = (self.domain.nx, self.domain.ny)
        if self.coeffs.shape != shape:
            raise ValueError(f"coefficient shape {self.coeffs.shape} does not match domain {shape}")

    # -- construction -------------------------------------------------------
    @classmethod
    def zeros(cls, domain: DomainSpec) -> "SpectralField":
        return cls(domain, np.zeros((domain.nx, domain.ny), dtype=complex))

    @classmethod
    def from_physical(cls, domain: DomainSpec, values: np.ndarray) -> "SpectralField":
        return grid_transform(values, "to_spectral", domain)

    @classmethod
    def from_function(cls, domain: DomainSpec, func: Callable) -> "SpectralField":
        X, Y = domain.grid()
        return cls.from_physical(domain, func(X, Y))

    @classmethod
    def from_modes(cls, domain: DomainSpec, modes: dict) -> "SpectralField":
        """Build a field from {(k, l): coefficient} with integer wavenumbers."""
        c = np.zeros((domain.nx, domain.ny), dtype=complex)
        for (k, l), v in modes.items():
            c[_index(domain, k, l)] = v
        return cls(domain, c)

    # -- access -------------------------------------------------------------
    def coeff(self, k: int, l: int) -> complex:
        return complex(self.coeffs[_index(self.domain, k, l)])

    def to_physical(self) -> np.ndarray:
        return grid_transform(self, "to_physical")

    def copy(self) -> "SpectralField":
        return SpectralField(self.domain, self.coeffs.copy(), self.real)

    # -- arithmetic ---------------------------------------------------------
    def _check(self, other):
        if not isinstance(other, SpectralField):
            return NotImplemented
        if other.domain != self.domain:
            raise ValueError("domain mismatch")
        return other

    def __add__(self, other):
        other = self._check(other)
        if other is NotImplemented:
            return other
        return SpectralField(self.domain, self.coeffs + other.coeffs, self.real and other.real)

    def __sub__(self, other):
        other = self._check(other)
        if other is NotImplemented:
            return other
        return SpectralField(self.domain, self.coeffs - other.coeffs, self.real and other.real)

    def __mul__(self, s):
        if isinstance(s, SpectralField):
            return NotImplemented
        return SpectralField(self.domain, self.coeffs * s, self.real and np.isrealobj(s))

    __rmul__ = __mul__

    def __truediv__(self, s):
        return self * (1.0 / s)

    def __neg__(self):
        return SpectralField(self.domain, -self.coeffs, self.real)


def _index(domain: DomainSpec, k: int, l: int) -> tuple[int, int]:
    if domain.kind == TORUS:
        return k % domain.nx, l % domain.ny
    if not 1 <= l <= domain.ny:
        raise IndexError(f"channel sine index must be in 1..{domain.ny}, got {l}")
    return k % domain.nx, l - 1


# ---------------------------------------------------------------------------
# transforms


def grid_transform(field, direction: str, domain: DomainSpec | None = None):
    """Map between coefficient space and collocation values.

    ``to_spectral`` takes a physical array plus ``domain`` and returns a
    SpectralField; ``to_physical`` takes a SpectralField and returns the real
    (or complex, for non-real fields) collocation array.
    """
    if direction == "to_spectral":
        values = np.asarray(field)
        if domain is None:
            raise ValueError("to_spectral needs a domain")
        if values.shape != (domain.nx, domain.ny):
            raise ValueError(f"resolution mismatch: {values.shape} vs {(domain.nx, domain.ny)}")
        real = np.isrealobj(values)
        if domain.kind == TORUS:
            c = sfft.fft2(values) / (domain.nx * domain.ny)
        else:
            cx = sfft.fft(values, axis=0) / domain.nx
            c = _dst(cx) / (domain.ny + 1)
        return SpectralField(domain, np.asarray(c, dtype=complex), real)
    if direction == "to_physical":
        if not isinstance(field, SpectralField):
            raise TypeError("to_physical expects a SpectralField")
        d = field.domain
        if domain is not None and domain != d:
            raise ValueError("resolution mismatch")
        if d.kind == TORUS:
            v = sfft.ifft2(field.coeffs) * (d.nx * d.ny)
        else:
            v = sfft.ifft(_dst(field.coeffs) / 2, axis=0) * d.nx
        return v.real if field.real else v
    raise ValueError(f"unknown direction {direction!r}")


def _dst(a: np.ndarray) -> np.ndarray:
    # DST-I along axis 1 for complex input: y_k = 2 Σ x_n sin(π(k+1)(n+1)/(N+1))
    if np.iscomplexobj(a):
        return sfft.dst(a.real, type=1, axis=1) + 1j * sfft.dst(a.imag, type=1, axis=1)
    return sfft.dst(a, type=1, axis=1)


def resample(f: SpectralField, nx: int, ny: int | None = None) -> SpectralField:
    """Zero-pad or truncate a field to a new resolution (Nyquist modes dropped)."""
    ny = nx if ny is None else ny
    d = f.domain
    new = d.with_resolution(nx, ny)
    out = np.zeros((nx, ny), dtype=complex)
    kx = d.kx_int
    keep_x = np.abs(kx) < min(d.nx, nx) / 2
    src_x = np.nonzero(keep_x)[0]
    dst_x = kx[keep_x].astype(int) % nx
    if d.kind == TORUS:
        ky = d.ky_int
        keep_y = np.abs(ky) < min(d.ny, ny) / 2
        src_y = np.nonzero(keep_y)[0]
        dst_y = ky[keep_y].astype(int) % ny
    else:
        m = min(d.ny, ny)
        src_y = dst_y = np.arange(m)
    out[np.ix_(dst_x, dst_y)] = f.coeffs[np.ix_(src_x, src_y)]
    return SpectralField(new, out, f.real)


def padded_physical(f: SpectralField, factor: float) -> np.ndarray:
    """Physical values on a grid refined by ``factor`` (for dealiased products)."""
    d = f.domain
    nx = int(2 * np.ceil(factor * d.nx / 2))
    ny = int(2 * np.ceil(factor * d.ny / 2))
    return resample(f, nx, ny).to_physical()


def from_padded_physical(values: np.ndarray, domain: DomainSpec) -> SpectralField:
    """Transform values on a refined grid and truncate back to ``domain``."""
    big = domain.with_resolution(*values.shape)
    g = grid_transform(values, "to_spectral", big)
    return resample(g, domain.nx, domain.ny)


# ---------------------------------------------------------------------------
# linear operators


def apply_multiplier(f: SpectralField, op: str, return_residual: bool = False):
    """Diagonal Fourier multipliers: ``laplacian``, ``inv_laplacian``,
    ``helmholtz_inverse`` (1+Δ)⁻¹.

    The Helmholtz inverse silently removes the kernel modes k²/δ²+l² = 1; with
    ``return_residual=True`` the L² norm of what was removed is returned too.
    """
    d = f.domain
    ksq = d.ksq()
    residual = 0.0
    if op == "laplacian":
        c = -ksq * f.coeffs
    elif op == "inv_laplacian":
        if d.kind == TORUS:
            mean = abs(f.coeffs[0, 0])
            if mean > 1e-12 * norm(f):
                raise ValueError(f"inv_laplacian needs a mean-free field (mean = {mean:.3e})")
        with np.errstate(divide="ignore", invalid="ignore"):
            m = np.where(ksq > 0, -1.0 / np.where(ksq > 0, ksq, 1.0), 0.0)
        c = m * f.coeffs
    elif op == "helmholtz_inverse":
        ker = np.abs(ksq - 1.0) < 1e-12
        removed = np.where(ker, f.coeffs, 0)
        residual = float(np.sqrt(d.plancherel * np.sum(np.abs(removed) ** 2)))
        with np.errstate(divide="ignore", invalid="ignore"):
            m = np.where(ker, 0.0, 1.0 / np.where(ker, 1.0, 1.0 - ksq))
        c = m * f.coeffs
    else:
        raise ValueError(f"unknown multiplier {op!r}")
    out = SpectralField(d, c, f.real)
    return (out, residual) if return_residual else out


def _torus_only(f: SpectralField, what: str):
    if f.domain.kind != TORUS:
        raise ValueError(f"{what} is only defined on the torus")


def _deriv_wavenumbers(d: DomainSpec):
    KX, KY = d.wavenumbers()
    # odd derivatives of the Nyquist modes are not representable
    KX = np.where(np.abs(d.kx_int)[:, None] == d.nx // 2, 0.0, KX)
    KY = np.where(np.abs(d.ky_int)[None, :] == d.ny // 2, 0.0, KY)
    return KX, KY


def ddx(f: SpectralField) -> SpectralField:
    _torus_only(f, "ddx")
    KX, _ = _deriv_wavenumbers(f.domain)
    return SpectralField(f.domain, 1j * KX * f.coeffs, f.real)


def ddy(f: SpectralField) -> SpectralField:
    _torus_only(f, "ddy")
    _, KY = _deriv_wavenumbers(f.domain)
    return SpectralField(f.domain, 1j * KY * f.coeffs, f.real)


def perp_gradient(psi: SpectralField) -> tuple[SpectralField, SpectralField]:
    """u = ∇^⊥ψ = (-∂_y ψ, ∂_x ψ)."""
    return -ddy(psi), ddx(psi)


def dealias_mask(d: DomainSpec) -> np.ndarray:
    """2/3-rule mask: keep |k| <= (n-1)//3 in each direction."""
    mx = np.abs(d.kx_int) <= (d.nx - 1) // 3
    my = np.abs(d.ky_int) <= (d.ny - 1) // 3
    return mx[:, None] & my[None, :]


def advect_coeffs(psi_hat: np.ndarray, omega_hat: np.ndarray, d: DomainSpec, mask=None) -> np.ndarray:
    """Coefficient-level u·∇ω with u = ∇^⊥ψ; 2/3 truncation on inputs and output."""
    if mask is None:
        mask = dealias_mask(d)
    KX, KY = d.wavenumbers()
    p = psi_hat * mask
    w = omega_hat * mask
    scale = d.nx * d.ny
    u1 = sfft.ifft2(-1j * KY * p).real * scale
    u2 = sfft.ifft2(1j * KX * p).real * scale
    wx = sfft.ifft2(1j * KX * w).real * scale
    wy = sfft.ifft2(1j * KY * w).real * scale
    return sfft.fft2(u1 * wx + u2 * wy) / scale * mask


def advect(psi: SpectralField, omega: SpectralField) -> SpectralField:
    """Pseudo-spectral u·∇ω with u = ∇^⊥ψ and 2/3-rule dealiasing."""
    _torus_only(psi, "advect")
    if psi.domain != omega.domain:
        raise ValueError("domain mismatch")
    c = advect_coeffs(psi.coeffs, omega.coeffs, psi.domain)
    c[0, 0] = 0.0
    return SpectralField(psi.domain, c)


# ---------------------------------------------------------------------------
# norms and pairings


def _weighted_sum(f: SpectralField, w) -> float:
    return float(f.domain.plancherel * np.sum(w * np.abs(f.coeffs) ** 2))


def norm(f: SpectralField, kind: str = "L2", s: float | None = None, lam: float | None = None) -> float:
    """Plancherel norms: ``L2``, ``Hs`` (weight (1+|k|²)^s), ``Hdot_s``
    (|k|^{2s}) and ``Gevrey`` (e^{2λ|k|}).  Gevrey overflow returns +inf."""
    ksq = f.domain.ksq()
    if kind == "L2":
        return np.sqrt(_weighted_sum(f, 1.0))
    if kind == "Hs":
        return np.sqrt(_weighted_sum(f, (1 + ksq) ** s))
    if kind == "Hdot_s":
        with np.errstate(divide="ignore"):
            w = np.where(ksq > 0, ksq ** s, 0.0) if s < 0 else ksq**s
        return np.sqrt(_weighted_sum(f, w))
    if kind == "Gevrey":
        a = np.abs(f.coeffs).ravel()
        nz = a > 0
        if not nz.any():
            return 0.0
        logs = 2 * lam * np.sqrt(ksq).ravel()[nz] + 2 * np.log(a[nz])
        top = logs.max()
        total = top + np.log(np.sum(np.exp(logs - top))) + np.log(f.domain.plancherel)
        if total / 2 > np.log(np.finfo(float).max):
            return float("inf")
        return float(np.exp(total / 2))
    raise ValueError(f"unknown norm {kind!r}")


def h2(f: SpectralField) -> float:
    return norm(f, "Hs", s=2)


def inner_product(f: SpectralField, g: SpectralField) -> float:
    if f.domain != g.domain:
        raise ValueError("domain mismatch")
    return float(f.domain.plancherel * np.real(np.sum(f.coeffs * np.conj(g.coeffs))))


# ---------------------------------------------------------------------------
# kernels and symmetries


@dataclass(frozen=True)
class KernelSpec:
    """ker L_K (shears plus Helmholtz-circle modes with k != 0) and ker(1+Δ)."""

    domain: DomainSpec
    members: np.ndarray = field(repr=False)
    helmholtz: np.ndarray = field(repr=False)

    @classmethod
    def of(cls, domain: DomainSpec) -> "KernelSpec":
        if domain.kind != TORUS:
            raise ValueError("kernel projections are defined on the torus only")
        ksq = domain.ksq()
        circle = np.abs(ksq - 1.0) < 1e-12
        shear = (domain.kx_int == 0)[:, None] & np.ones(domain.ny, bool)[None, :]
        return cls(domain, shear | circle, circle)

    def mode_set(self, which: str = "P_K") -> set[tuple[int, int]]:
        m = self.members if which == "P_K" else self.helmholtz
        d = self.domain
        ii, jj = np.nonzero(m)
        return {(int(d.kx_int[i]), int(d.ky_int[j])) for i, j in zip(ii, jj)}


def project_kernel(f: SpectralField, which: str = "P_K") -> SpectralField:
    _torus_only(f, "project_kernel")
    ks = KernelSpec.of(f.domain)
    if which == "P_K":
        m = ks.members
    elif which == "P_D":
        m = ~ks.members
    elif which == "P_helmholtz_kernel":
        m = ks.helmholtz
    else:
        raise ValueError(f"unknown projection {which!r}")
    return SpectralField(f.domain, np.where(m, f.coeffs, 0), f.real)


def _reflect(c: np.ndarray, axis: int) -> np.ndarray:
    # coefficient at -k, in FFT order
    return np.roll(np.flip(c, axis=axis), 1, axis=axis)


def symmetrize_even_even(f: SpectralField) -> SpectralField:
    """Keep only the cos(kx)cos(ly) content of a real field."""
    _torus_only(f, "symmetrize_even_even")
    c = f.coeffs
    c = 0.5 * (c + _reflect(c, 0))
    c = 0.5 * (c + _reflect(c, 1))
    return SpectralField(f.domain, c.real.astype(complex), True)


def hermitian_defect(f: SpectralField) -> float:
    c = f.coeffs
    return float(np.max(np.abs(c - np.conj(_reflect(_reflect(c, 0), 1)))))


# ---------------------------------------------------------------------------
# channel evaluation


def evaluate_channel(f: SpectralField, y: np.ndarray, dx: int = 0, dy: int = 0, nx: int | None = None) -> np.ndarray:
    """Exact values of ∂_x^dx ∂_y^dy f on a uniform x grid times arbitrary y.

    Returns an array of shape (nx, len(y)); ``nx`` defaults to the field's
    resolution and may be larger (exact trigonometric interpolation).
    """
    d = f.domain
    if d.kind != CHANNEL:
        raise ValueError("evaluate_channel needs a channel field")
    nx = d.nx if nx is None else nx
    c = resample(f, nx, d.ny).coeffs if nx != d.nx else f.coeffs
    kx = np.fft.fftfreq(nx, 1.0 / nx)
    if dx:
        kk = np.where(np.abs(kx) == nx // 2, 0.0, kx) if dx % 2 else kx
        c = c * ((1j * kk) ** dx)[:, None]
    lw = d.ky  # lπ/2
    theta = np.outer(lw, np.asarray(y) + 1.0) + dy * np.pi / 2
    S = (lw**dy)[:, None] * np.sin(theta)
    g = c @ S
    v = sfft.ifft(g, axis=0) * nx
    return v.real if f.real else v
