"""
Rigidity ingredients.

On T²_δ: the lower bound |1 - (k²/δ² + l²)⁻¹| over non-shear modes and the
identity ∫ ∂_y(sin y f) cos y f = ½ ∫ f².

In the channel T × [-1, 1] near Poiseuille flow V = y²: the quadratic form

    A_V(ω) = ⟨V' ∂_x L_V ω, ∂_y ω⟩ + ⟨V' ∂_y L_V ω, ∂_x ω⟩,
    L_V = V ∂_x - V'' Δ⁻¹ ∂_x,

and the inequalities sandwiching it.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np

from .spectral import (
    DomainSpec,
    SpectralField,
    evaluate_channel,
    norm,
    padded_physical,
)

PROFILE_EPS1 = 0.5  # largest admissible W^{4,∞} distance from Poiseuille
LOWER_FACTOR = 1 / 16
OMEGA_DECAY = 0.25  # random ω coefficients ~ e^{-|k|/4}


class InadmissibleProfile(ValueError):
    pass


# ---------------------------------------------------------------------------
# torus part


def coercivity_constant(delta: float, kmax: int = 32) -> tuple[float, tuple[int, int]]:
    """min |1 - 1/(k²/δ² + l²)| over 1 <= |k| <= kmax, |l| <= kmax.

    Evaluated in exact rational arithmetic (δ is converted exactly).  Modes
    outside the box have multiplier >= 1 - max(δ²/kmax², 1/kmax²), which is
    checked not to undercut the returned value.  A vanishing multiplier
    (δ with a kernel mode on the circle) gives c_δ = 0 and that mode.
    """
    if kmax < 16:
        raise ValueError("kmax must be at least 16")
    if not delta > 0:
        raise ValueError("delta must be positive")
    d2 = Fraction(delta) ** 2
    best, arg = None, None
    for k in range(1, kmax + 1):
        for l in range(0, kmax + 1):
            v = abs(1 - 1 / (k * k / d2 + l * l))
            if best is None or v < best:
                best, arg = v, (k, l)
    tail = 1 - max(d2 / kmax**2, Fraction(1, kmax**2))
    if tail < best:
        raise ValueError(f"kmax={kmax} too small to bound the tail for delta={delta}")
    return float(best), arg


def coercivity_constant_exact(delta: float, kmax: int = 32) -> Fraction:
    c, (k, l) = coercivity_constant(delta, kmax)
    return abs(1 - 1 / (k * k / Fraction(delta) ** 2 + l * l))


def sin_identity_check(f: SpectralField) -> tuple[float, float]:
    """(∫ ∂_y(sin y f) cos y f, ½‖f‖²) on T²_δ, evaluated alias-free."""
    d = f.domain
    if d.kind != "torus":
        raise ValueError("sin_identity_check needs a torus field")
    KX, KY = d.wavenumbers()
    fy = SpectralField(d, 1j * KY * np.where(np.abs(d.ky_int)[None, :] == d.ny // 2, 0, 1) * f.coeffs, f.real)
    v = padded_physical(f, 3)
    vy = padded_physical(fy, 3)
    ny = v.shape[1]
    y = 2 * np.pi * np.arange(ny) / ny
    s, c = np.sin(y)[None, :], np.cos(y)[None, :]
    lhs = d.area * np.mean((c * v + s * vy) * c * v)
    return float(np.real(lhs)), 0.5 * norm(f) ** 2


# ---------------------------------------------------------------------------
# channel part


@dataclass(frozen=True)
class ShearProfile:
    """V(y) = y² + η sin(κy + φ), with its derivatives known in closed form."""

    eta: float = 0.0
    kappa: float = 1.0
    phi: float = 0.0

    @classmethod
    def poiseuille(cls) -> "ShearProfile":
        return cls()

    def derivative(self, y, m: int = 0):
        y = np.asarray(y, dtype=float)
        pert = self.eta * self.kappa**m * np.sin(self.kappa * y + self.phi + m * np.pi / 2)
        base = {0: y**2, 1: 2 * y, 2: 2.0 + 0 * y}.get(m, 0 * y)
        return base + pert

    def sample(self, y) -> dict[str, np.ndarray]:
        return {name: self.derivative(y, m) for m, name in enumerate(("V", "V1", "V2", "V3", "V4", "V5"))}

    def closeness(self, y=None) -> float:
        """Grid max of |V'-2y|, |V''-2|, |V'''|, |V''''|, |V'''''|."""
        if y is None:
            y = np.linspace(-1, 1, 401)
        if self.eta == 0:
            return 0.0
        return float(max(np.max(np.abs(self.eta * self.kappa**m * np.sin(self.kappa * y + self.phi + m * np.pi / 2))) for m in range(1, 6)))

    def check_admissible(self, y=None, eps1: float = PROFILE_EPS1):
        if y is None:
            y = np.linspace(-1, 1, 401)
        if self.closeness(y) >= eps1:
            raise InadmissibleProfile(f"profile is {self.closeness(y):.3g} away from Poiseuille (limit {eps1})")
        if np.min(self.derivative(y, 2)) < 1:
            raise InadmissibleProfile("V'' drops below 1")


def channel_poisson_solve(omega: SpectralField) -> SpectralField:
    """ψ with Δψ = ω, ψ(x, ±1) = 0 and zero x-average."""
    d = omega.domain
    if d.kind != "channel":
        raise ValueError("channel_poisson_solve needs a channel field")
    zero_mode = np.abs(omega.coeffs[0]).max()
    if zero_mode > 1e-14 * max(1.0, np.abs(omega.coeffs).max()):
        raise ValueError(f"omega has x-average content (max |coeff| at k=0: {zero_mode:.3e})")
    c = -omega.coeffs / d.ksq()
    c[0] = 0
    return SpectralField(d, c, omega.real)


@dataclass
class CoercivityReport:
    A_V: float
    lower: float
    upper_pairing: float
    upper_constant: float
    norm_V1_omega_x_sq: float
    norm_psi_xx_sq: float
    norm_psi_xy_sq: float
    c_delta: float | None = None
    attaining_mode: tuple[int, int] | None = None
    lower_ok: bool = True
    upper_ok: bool = True
    intermediate_ok: bool = True

    @property
    def passes(self) -> bool:
        return self.lower_ok and self.upper_ok and self.intermediate_ok

    @property
    def c1_ratio(self) -> float:
        """(‖∂_x∇ψ‖² + ‖V'∂_xω‖²) / (‖L_Vω‖_{Ḣ¹}‖ω‖_{Ḣ¹})."""
        if self.upper_pairing == 0:
            return float("nan")
        return (self.norm_psi_xx_sq + self.norm_psi_xy_sq + self.norm_V1_omega_x_sq) / self.upper_pairing

    @property
    def measured_upper_constant(self) -> float:
        return self.A_V / self.upper_pairing if self.upper_pairing else 0.0

    def to_dict(self) -> dict:
        d = asdict(self)
        d.update(passes=self.passes, c1_ratio=self.c1_ratio, measured_upper_constant=self.measured_upper_constant)
        return d


def _quadrature(d: DomainSpec, nq: int | None = None):
    # Gauss-Legendre in y resolves products of the highest sine modes
    nq = nq or 2 * d.ny + 64
    y, w = np.polynomial.legendre.leggauss(nq)
    nx = 3 * d.nx
    return y, w, nx


def channel_fields(omega: SpectralField, V: ShearProfile, nq: int | None = None) -> dict:
    """Pointwise samples of everything A_V and its bounds need."""
    d = omega.domain
    psi = channel_poisson_solve(omega)
    y, w, nx = _quadrature(d, nq)
    ev = lambda f, a, b: evaluate_channel(f, y, dx=a, dy=b, nx=nx)  # noqa: E731
    P = V.sample(y)
    wx, wy, wxx, wxy = ev(omega, 1, 0), ev(omega, 0, 1), ev(omega, 2, 0), ev(omega, 1, 1)
    px, pxx, pxy = ev(psi, 1, 0), ev(psi, 2, 0), ev(psi, 1, 1)
    V0, V1, V2, V3 = (P[k][None, :] for k in ("V", "V1", "V2", "V3"))
    Lx = V0 * wxx - V2 * pxx  # ∂_x L_V ω
    Ly = V1 * wx + V0 * wxy - V3 * px - V2 * pxy  # ∂_y L_V ω
    weight = (2 * np.pi / nx) * w[None, :]
    return dict(wx=wx, wy=wy, pxx=pxx, pxy=pxy, Lx=Lx, Ly=Ly, V1=V1, weight=weight)


def A_V(omega: SpectralField, V: ShearProfile, check: bool = True, nq: int | None = None) -> CoercivityReport:
    """Evaluate A_V(ω) and the quantities bounding it from both sides."""
    if check:
        V.check_admissible()
    F = channel_fields(omega, V, nq)
    W = F["weight"]
    integ = lambda g: float(np.sum(W * g))  # noqa: E731
    V1 = F["V1"]
    a = integ(V1 * F["Lx"] * F["wy"]) + integ(V1 * F["Ly"] * F["wx"])
    v1wx = integ((V1 * F["wx"]) ** 2)
    pxx, pxy = integ(F["pxx"] ** 2), integ(F["pxy"] ** 2)
    lower = LOWER_FACTOR * (v1wx + pxx + pxy)
    L_h1 = math.sqrt(integ(F["Lx"] ** 2) + integ(F["Ly"] ** 2))
    w_h1 = math.sqrt(integ(F["wx"] ** 2) + integ(F["wy"] ** 2))
    upper = L_h1 * w_h1
    C = float(np.max(np.abs(V1)))
    slack = 1e-12 * max(1.0, abs(a), upper)
    return CoercivityReport(
        A_V=a,
        lower=lower,
        upper_pairing=upper,
        upper_constant=C,
        norm_V1_omega_x_sq=v1wx,
        norm_psi_xx_sq=pxx,
        norm_psi_xy_sq=pxy,
        lower_ok=a >= lower - slack,
        upper_ok=a <= C * upper + slack,
        intermediate_ok=pxx <= 4 * pxy + v1wx + slack,
    )


def random_channel_vorticity(
    rng: np.random.Generator, nx: int = 16, ny: int = 24, kmax: int = 5, lmax: int = 16, decay: float = OMEGA_DECAY
) -> SpectralField:
    """Real random ω with k != 0 content only; coefficients ~ N(0,1) e^{-decay(|k|+l)}."""
    d = DomainSpec.channel(nx, ny)
    c = np.zeros((nx, ny), dtype=complex)
    for k in range(1, kmax + 1):
        for l in range(1, lmax + 1):
            z = (rng.standard_normal() + 1j * rng.standard_normal()) * math.exp(-decay * (k + l))
            c[k, l - 1] = z
            c[-k, l - 1] = np.conj(z)
    return SpectralField(d, c, True)


def random_profile(rng: np.random.Generator, epsilon: float) -> ShearProfile:
    """Profile with W^{4,∞} distance below epsilon (Poiseuille when epsilon = 0)."""
    if epsilon <= 0:
        return ShearProfile.poiseuille()
    kappa = rng.uniform(0.5, 2.0)
    eta = 0.9 * epsilon * rng.uniform(0.1, 1.0) / max(kappa, kappa**5)
    return ShearProfile(eta=eta, kappa=kappa, phi=rng.uniform(0, 2 * np.pi))


@dataclass
class CoercivitySummary:
    samples: int
    epsilon: float
    seed: int
    lower_violations: int
    upper_violations: int
    intermediate_violations: int
    empirical_c1: float
    max_measured_upper_constant: float
    rows: list[dict] = field(default_factory=list, repr=False)

    @property
    def passes(self) -> bool:
        return self.lower_violations == self.upper_violations == self.intermediate_violations == 0

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("rows")
        d["passes"] = self.passes
        return d


CSV_COLUMNS = (
    "sample", "A_V", "lower", "upper_pairing", "upper_constant", "V1_omega_x_sq",
    "psi_xx_sq", "psi_xy_sq", "c1_ratio", "lower_ok", "upper_ok", "intermediate_ok",
)


def _one_sample(seed_seq: np.random.SeedSequence, epsilon: float) -> dict:
    rng = np.random.default_rng(seed_seq)
    V = random_profile(rng, epsilon)
    omega = random_channel_vorticity(rng)
    r = A_V(omega, V)
    return {
        "A_V": r.A_V,
        "lower": r.lower,
        "upper_pairing": r.upper_pairing,
        "upper_constant": r.upper_constant,
        "V1_omega_x_sq": r.norm_V1_omega_x_sq,
        "psi_xx_sq": r.norm_psi_xx_sq,
        "psi_xy_sq": r.norm_psi_xy_sq,
        "c1_ratio": r.c1_ratio,
        "lower_ok": r.lower_ok,
        "upper_ok": r.upper_ok,
        "intermediate_ok": r.intermediate_ok,
        "measured_upper_constant": r.measured_upper_constant,
    }


def coercivity_test(samples: int = 100, epsilon: float = 0.0, seed: int = 0) -> CoercivitySummary:
    """Sample random (ω, V) and check lower <= A_V <= C·‖L_Vω‖_{Ḣ¹}‖ω‖_{Ḣ¹}.

    Each sample owns a child of one SeedSequence, so results do not depend
    on evaluation order.
    """
    if samples < 10:
        raise ValueError("samples must be at least 10")
    if epsilon < 0 or epsilon >= PROFILE_EPS1:
        raise ValueError(f"epsilon must lie in [0, {PROFILE_EPS1})")
    children = np.random.SeedSequence(seed).spawn(samples)
    rows = []
    for i, ss in enumerate(children):
        row = _one_sample(ss, epsilon)
        row["sample"] = i
        rows.append(row)
    return CoercivitySummary(
        samples=samples,
        epsilon=epsilon,
        seed=seed,
        lower_violations=sum(not r["lower_ok"] for r in rows),
        upper_violations=sum(not r["upper_ok"] for r in rows),
        intermediate_violations=sum(not r["intermediate_ok"] for r in rows),
        empirical_c1=min(r["c1_ratio"] for r in rows),
        max_measured_upper_constant=max(r["measured_upper_constant"] for r in rows),
        rows=rows,
    )
