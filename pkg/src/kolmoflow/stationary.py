"""
Analytic stationary states near the Kolmogorov flow cos(y) on the square torus.

We look for Ψ = cos y + ε cos x + ε ψ with ΔΨ = -Ψ + ε f(Ψ), where
f(A, B; s) = A s + B s³ + s⁵/5.  The perturbation ψ is the fixed point of

    K_ε(ψ) = (1+Δ)⁻¹ f(A(ψ), B(ψ); cos y + ε cos x + ε ψ),

with (A, B) chosen so that f(...) has no cos x / cos y content (otherwise
(1+Δ) cannot be inverted).  ψ is kept even in x and y and orthogonal to
cos x, cos y.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .spectral import (
    DomainSpec,
    SpectralField,
    apply_multiplier,
    from_padded_physical,
    grid_transform,
    h2,
    inner_product,
    norm,
    padded_physical,
    resample,
    symmetrize_even_even,
)

log = logging.getLogger(__name__)

EPS0 = 0.05  # largest ε accepted by construct_fixed_point
EPS1 = 0.1  # largest ε accepted by solve_AB / apply_K
PAD = 3  # degree-5 products need a 3x grid to be alias free
TWO_PI2 = 2 * np.pi**2

X_H2_MAX = 10.0
X_IP_MAX = 1e-2
X_DEFECT_MAX = 1e-10


class ConvergenceError(RuntimeError):
    pass


class DegeneracyError(ValueError):
    """The two compatibility conditions became (nearly) parallel."""


class XMembershipError(ValueError):
    pass


@dataclass(frozen=True)
class QuinticNonlinearity:
    A: float
    B: float
    c5: float = 0.2

    def __call__(self, s):
        return self.A * s + self.B * s**3 + self.c5 * s**5

    def full_coefficients(self, epsilon: float) -> list[float]:
        """Monomial coefficients [s⁰..s⁵] of F_ε(s) = -s + ε f(A, B; s)."""
        return [0.0, -1.0 + epsilon * self.A, 0.0, epsilon * self.B, 0.0, epsilon * self.c5]


@dataclass
class XCertificate:
    h2_norm: float
    ip_cc2: float
    ip_cc4: float
    symmetry_defect: float
    kernel_orthogonality_defect: float

    def passes(self, slack: float = 1.0) -> bool:
        return (
            self.h2_norm <= slack * X_H2_MAX
            and abs(self.ip_cc2) + abs(self.ip_cc4) <= slack * X_IP_MAX
            and self.symmetry_defect <= slack * X_DEFECT_MAX
            and self.kernel_orthogonality_defect <= slack * X_DEFECT_MAX
        )


@dataclass
class IterateRecord:
    index: int
    h2_difference: float
    certificate: XCertificate
    A: float
    B: float
    compat_residual: float


@dataclass
class FixedPointReport:
    epsilon: float
    tol: float
    iterates: list[IterateRecord] = field(default_factory=list)
    contraction_estimates: list[float] = field(default_factory=list)
    A: float = float("nan")
    B: float = float("nan")
    converged: bool = False
    equation_residual: float = float("nan")
    psi: SpectralField | None = field(default=None, repr=False)

    @property
    def compat_residuals(self) -> list[float]:
        return [it.compat_residual for it in self.iterates]

    @property
    def contraction_factor(self) -> float:
        return max(self.contraction_estimates, default=0.0)

    def to_dict(self) -> dict:
        d = {
            "epsilon": self.epsilon,
            "tol": self.tol,
            "converged": self.converged,
            "A": self.A,
            "B": self.B,
            "equation_residual": self.equation_residual,
            "contraction_factor": self.contraction_factor,
            "contraction_estimates": list(self.contraction_estimates),
            "compat_residuals": self.compat_residuals,
            "iterates": [
                {
                    "index": it.index,
                    "h2_difference": it.h2_difference,
                    "A": it.A,
                    "B": it.B,
                    "compat_residual": it.compat_residual,
                    "certificate": asdict(it.certificate),
                }
                for it in self.iterates
            ],
        }
        return d


@dataclass
class SeriesCoefficients:
    a: list[float]
    b: list[float]

    def evaluate(self, epsilon: float, order: int | None = None) -> tuple[float, float]:
        """Partial sums Σ_{j<=order} (a_j, b_j) ε^j."""
        J = len(self.a) - 1 if order is None else order
        p = epsilon ** np.arange(J + 1)
        return float(np.dot(self.a[: J + 1], p)), float(np.dot(self.b[: J + 1], p))

    def growth_constant(self) -> float:
        """Smallest M >= 1 with |b_j| <= M^j for all stored j >= 1."""
        M = 1.0
        for j, bj in enumerate(self.b[1:], start=1):
            if bj != 0:
                M = max(M, abs(bj) ** (1.0 / j))
        return M


# ---------------------------------------------------------------------------
# fixed trigonometric test functions


def _basis(domain: DomainSpec) -> dict[str, SpectralField]:
    c = lambda k, l, a: {(k, l): a, (-k, l): a, (k, -l): a, (-k, -l): a}  # noqa: E731
    q = 0.25
    modes = {
        "cos_x": {(1, 0): 0.5, (-1, 0): 0.5},
        "cos_y": {(0, 1): 0.5, (0, -1): 0.5},
        # cos³y = (3 cos y + cos 3y)/4
        "cos3": {(0, 1): 3 / 8, (0, -1): 3 / 8, (0, 3): 1 / 8, (0, -3): 1 / 8},
        # cos⁵y = (10 cos y + 5 cos 3y + cos 5y)/16
        "cos5": {(0, 1): 10 / 32, (0, -1): 10 / 32, (0, 3): 5 / 32, (0, -3): 5 / 32, (0, 5): 1 / 32, (0, -5): 1 / 32},
        # cos²y cos x = (cos x + cos x cos 2y)/2
        "cc2": {(1, 0): 0.25, (-1, 0): 0.25, **c(1, 2, q / 2)},
        # cos⁴y cos x = (3 cos x + 4 cos x cos 2y + cos x cos 4y)/8
        "cc4": {(1, 0): 3 / 16, (-1, 0): 3 / 16, **c(1, 2, q / 2), **c(1, 4, q / 8)},
    }
    return {k: SpectralField.from_modes(domain, v) for k, v in modes.items()}


def cos_mode(domain: DomainSpec, k: int, l: int) -> SpectralField:
    """cos(kx)cos(ly) with k, l >= 0."""
    a = (1.0 if k == 0 else 0.5) * (1.0 if l == 0 else 0.5)
    return SpectralField.from_modes(domain, {(sk, sl): a for sk in {k, -k} for sl in {l, -l}})


def cos_amplitude(psi: SpectralField, k: int, l: int) -> float:
    """Coefficient a of a·cos(kx)cos(ly) in ψ."""
    b = cos_mode(psi.domain, k, l)
    return inner_product(psi, b) / inner_product(b, b)


def _check_square(psi: SpectralField):
    d = psi.domain
    if d.kind != "torus" or d.delta != 1.0:
        raise ValueError("the stationary construction lives on the square torus")


# ---------------------------------------------------------------------------
# operations


def compose_argument(psi: SpectralField, epsilon: float) -> SpectralField:
    """G = cos y + ε cos x + ε ψ."""
    b = _basis(psi.domain)
    return b["cos_y"] + epsilon * b["cos_x"] + epsilon * psi


def x_certificate(psi: SpectralField) -> XCertificate:
    b = _basis(psi.domain)
    return XCertificate(
        h2_norm=h2(psi),
        ip_cc2=inner_product(psi, b["cc2"]),
        ip_cc4=inner_product(psi, b["cc4"]),
        symmetry_defect=norm(psi - symmetrize_even_even(psi)),
        kernel_orthogonality_defect=abs(inner_product(psi, b["cos_x"])) + abs(inner_product(psi, b["cos_y"])),
    )


def _remainder_parts(psi: SpectralField, epsilon: float):
    """Padded-grid arrays (R₀, R₁) with R = ε (R₀ + B R₁), split by powers of ε.

    Returns lists T[m], U[m] (m = 2..5) so that
    R₀ = Σ ε^{m-1} T[m] and R₁ = Σ ε^{m-1} U[m].
    """
    h = padded_physical(psi, PAD)
    nx, ny = h.shape
    x = 2 * np.pi * np.arange(nx) / nx
    y = 2 * np.pi * np.arange(ny) / ny
    cx = np.cos(x)[:, None]
    c = np.cos(y)[None, :]
    h = h + cx
    h2_, h3 = h * h, h * h * h
    T = {2: 2 * h2_ * c**3, 3: 2 * h3 * c**2, 4: h3 * h * c, 5: h3 * h2_ / 5}
    U = {2: 3 * h2_ * c, 3: h3}
    return T, U, cx, c


def remainder_R(B: float, psi: SpectralField, epsilon: float) -> SpectralField:
    """R(B, ψ, ε) = ε²h²(3B cos y + 2cos³y) + ε³h³(B + 2cos²y) + ε⁴h⁴ cos y + ε⁵h⁵/5,
    h = ψ + cos x, evaluated alias-free and truncated to ψ's resolution."""
    T, U, _, _ = _remainder_parts(psi, epsilon)
    vals = sum(epsilon**m * T[m] for m in T) + B * sum(epsilon**m * U[m] for m in U)
    return from_padded_physical(vals, psi.domain)


def _pairings(psi: SpectralField, epsilon: float):
    """All scalar pairings entering the compatibility conditions."""
    b = _basis(psi.domain)
    T, U, cx, c = _remainder_parts(psi, epsilon)
    area = psi.domain.area

    def pair(vals, g):
        return float(area * np.mean(vals * g))

    return {
        "P3": inner_product(psi, b["cos3"]),
        "P5": inner_product(psi, b["cos5"]),
        "Q2": inner_product(psi, b["cc2"]),
        "Q4": inner_product(psi, b["cc4"]),
        # ⟨R, cos x⟩/ε = Σ ε^{m-1}(p_m + B q_m);  ⟨R, cos y⟩ = Σ ε^m (s_m + B t_m)
        "p": {m: pair(T[m], cx) for m in T},
        "q": {m: pair(U[m], cx) for m in U},
        "s": {m: pair(T[m], c) for m in T},
        "t": {m: pair(U[m], c) for m in U},
    }


def _denominator(Q2: float) -> float:
    D = 0.75 + 3 * Q2 / TWO_PI2
    if abs(D) < 0.075:
        raise DegeneracyError(f"compatibility vectors nearly parallel (⟨ψ, cos²y cos x⟩ = {Q2:.4g})")
    return D


def _check_x(psi: SpectralField, where: str):
    cert = x_certificate(psi)
    if not cert.passes(slack=2.0):
        raise XMembershipError(f"{where}: ψ is outside X ({cert})")
    if not cert.passes():
        warnings.warn(f"{where}: ψ violates the X bounds by less than a factor 2 ({cert})", stacklevel=3)


def solve_AB(psi: SpectralField, epsilon: float, max_iter: int = 100, return_info: bool = False):
    """Coefficients (A, B) making f(A, B; G) orthogonal to cos x and cos y.

    Iterates the closed form for B (difference of the two conditions) and the
    cos y condition for A, starting from (1/8, -1/3).  The map is affine in B
    with slope O(ε), so it converges geometrically.
    """
    _check_square(psi)
    if not 0 <= epsilon < EPS1:
        raise ValueError(f"epsilon must lie in [0, {EPS1}), got {epsilon}")
    _check_x(psi, "solve_AB")
    P = _pairings(psi, epsilon)
    D = _denominator(P["Q2"])
    e = epsilon

    def R_x_over_eps(B):
        return sum(e ** (m - 1) * P["p"][m] for m in P["p"]) + B * sum(e ** (m - 1) * P["q"][m] for m in P["q"])

    def R_y(B):
        return sum(e**m * P["s"][m] for m in P["s"]) + B * sum(e**m * P["t"][m] for m in P["t"])

    A, B = 1 / 8, -1 / 3
    history = []
    for it in range(1, max_iter + 1):
        rhs = -(0.25 + P["Q4"] / TWO_PI2) + (-R_x_over_eps(B) + 3 * e * B * P["P3"] + e * P["P5"] + R_y(B)) / TWO_PI2
        B_new = rhs / D
        A_new = -0.125 - 0.75 * B_new - (3 * e * B_new * P["P3"] + e * P["P5"] + R_y(B_new)) / TWO_PI2
        step = abs(B_new - B) + abs(A_new - A)
        history.append(step)
        A, B = A_new, B_new
        if step <= 4 * np.finfo(float).eps * (1 + abs(A) + abs(B)):
            break
    else:
        raise ConvergenceError(f"(A, B) iteration did not converge in {max_iter} steps (last step {step:.3e})")
    if return_info:
        return A, B, {"iterations": it, "steps": history}
    return A, B


def compatibility_pairings(psi: SpectralField, epsilon: float, A: float, B: float) -> tuple[float, float]:
    """(⟨f(A,B;G), cos x⟩, ⟨f(A,B;G), cos y⟩) by direct alias-free quadrature."""
    G = padded_physical(compose_argument(psi, epsilon), PAD)
    nx, ny = G.shape
    x = 2 * np.pi * np.arange(nx) / nx
    y = 2 * np.pi * np.arange(ny) / ny
    fG = A * G + B * G**3 + G**5 / 5
    area = psi.domain.area
    return (
        float(area * np.mean(fG * np.cos(x)[:, None])),
        float(area * np.mean(fG * np.cos(y)[None, :])),
    )


def ab_series(psi: SpectralField, jmax: int) -> SeriesCoefficients:
    """Power-series coefficients a_j, b_j of A(ψ; ε), B(ψ; ε) in ε.

    Comparing powers of ε in the closed form for B gives
    D b_j = λ_j + Σ_{i=1..3} κ_i b_{j-i}; then a_j follows from the cos y
    condition.
    """
    _check_square(psi)
    _check_x(psi, "ab_series")
    # the ε-split pairings do not depend on ε; evaluate them once
    P = _pairings(psi, 1.0)
    D = _denominator(P["Q2"])
    n = jmax + 6
    lam = np.zeros(n)
    kap = np.zeros(n)
    lam[0] = -(0.25 + P["Q4"] / TWO_PI2)
    lam[1] += P["P5"] / TWO_PI2
    kap[1] += 3 * P["P3"] / TWO_PI2
    for m in P["p"]:
        lam[m - 1] -= P["p"][m] / TWO_PI2
        lam[m] += P["s"][m] / TWO_PI2
    for m in P["q"]:
        kap[m - 1] -= P["q"][m] / TWO_PI2
        kap[m] += P["t"][m] / TWO_PI2
    b = np.zeros(jmax + 1)
    for j in range(jmax + 1):
        acc = lam[j] + sum(kap[i] * b[j - i] for i in range(1, j + 1))
        b[j] = acc / D
    a = np.zeros(jmax + 1)
    for j in range(jmax + 1):
        v = -0.75 * b[j]
        if j == 0:
            v -= 0.125
        if j >= 1:
            v -= 3 * P["P3"] * b[j - 1] / TWO_PI2
        if j == 1:
            v -= P["P5"] / TWO_PI2
        v -= P["s"].get(j, 0.0) / TWO_PI2
        v -= sum(P["t"][m] * b[j - m] for m in P["t"] if j - m >= 0) / TWO_PI2
        a[j] = v
    return SeriesCoefficients(list(map(float, a)), list(map(float, b)))


def apply_K(psi: SpectralField, epsilon: float):
    """One application of K_ε; returns (K_ε ψ, A, B, compat_residual).

    compat_residual is the L² size of the cos x / cos y content of f(A,B;G)
    that had to be projected away before inverting 1+Δ.
    """
    A, B = solve_AB(psi, epsilon)
    G = padded_physical(compose_argument(psi, epsilon), PAD)
    fG = from_padded_physical(A * G + B * G**3 + G**5 / 5, psi.domain)
    out, residual = apply_multiplier(fG, "helmholtz_inverse", return_residual=True)
    out = symmetrize_even_even(out)
    return out, A, B, residual


def construct_fixed_point(
    epsilon: float,
    tol: float = 1e-12,
    max_iter: int = 200,
    n: int = 64,
    eps0: float = EPS0,
):
    """Iterate ψ_{n+1} = K_ε(ψ_n) from ψ_0 = 0 until the H² step is below tol.

    Returns (Ψ_ε, F, report) with Ψ_ε = cos y + ε cos x + ε ψ_ε and
    F_ε(s) = -s + ε f(A, B; s) described by ``F`` (see
    QuinticNonlinearity.full_coefficients).  The fixed point ψ_ε itself is
    kept in ``report.psi``.
    """
    if not 0 <= epsilon <= eps0:
        raise ValueError(f"epsilon must lie in [0, {eps0}], got {epsilon}")
    domain = DomainSpec.square(n)
    psi = SpectralField.zeros(domain)
    report = FixedPointReport(epsilon=epsilon, tol=tol)
    prev_diff = None
    A = B = float("nan")
    for it in range(1, max_iter + 1):
        new, A, B, res = apply_K(psi, epsilon)
        diff = h2(new - psi)
        cert = x_certificate(new)
        report.iterates.append(IterateRecord(it, diff, cert, A, B, res))
        if prev_diff is not None and prev_diff > 1e3 * tol:
            report.contraction_estimates.append(diff / prev_diff)
        log.debug("eps=%g it=%d dH2=%.3e A=%.15f B=%.15f", epsilon, it, diff, A, B)
        psi, prev_diff = new, diff
        if not cert.passes(slack=2.0):
            raise XMembershipError(f"iterate {it} left X: {cert}")
        if not cert.passes():
            warnings.warn(f"iterate {it} violates the X bounds mildly: {cert}", stacklevel=2)
        if diff < tol:
            report.converged = True
            break
    else:
        raise ConvergenceError(f"no convergence in {max_iter} iterations (last H² step {diff:.3e})")
    # (A, B) consistent with the final ψ
    A, B = solve_AB(psi, epsilon)
    report.A, report.B, report.psi = A, B, psi
    report.equation_residual = equation_residual_psi(psi, epsilon, A, B)
    b = _basis(domain)
    Psi = b["cos_y"] + epsilon * b["cos_x"] + epsilon * psi
    return Psi, QuinticNonlinearity(A, B), report


def equation_residual_psi(psi: SpectralField, epsilon: float, A: float, B: float) -> float:
    """‖(Δ+1)ψ - f(A,B;G)‖_{L²}, with f(A,B;G) evaluated alias-free."""
    G = padded_physical(compose_argument(psi, epsilon), PAD)
    fG = A * G + B * G**3 + G**5 / 5
    n = G.shape[0]
    big = psi.domain.with_resolution(n)
    lhs = apply_multiplier(psi, "laplacian") + psi
    diff = grid_transform(fG, "to_spectral", big) - resample(lhs, n)
    return norm(diff)


def random_x_member(n: int = 64, seed: int | None = None, h2_size: float = 1.0, decay: float = 0.5) -> SpectralField:
    """A random element of X: even-even, orthogonal to cos x and cos y,
    ‖ψ‖_{H²} = h2_size, and small pairings with cos²y cos x, cos⁴y cos x."""
    rng = np.random.default_rng(seed)
    d = DomainSpec.square(n)
    kmax = n // 3
    modes = {}
    for k in range(kmax + 1):
        for l in range(kmax + 1):
            if (k, l) in ((0, 0), (1, 0), (0, 1)):
                continue
            a = rng.standard_normal() * np.exp(-decay * (k + l))
            for sk in {k, -k}:
                for sl in {l, -l}:
                    modes[(sk, sl)] = a / ((1 if k == 0 else 2) * (1 if l == 0 else 2))
    psi = SpectralField.from_modes(d, modes)
    psi = psi * (h2_size / h2(psi))
    # shrink the (1,2) and (1,4) content so the X pairings stay small
    cert = x_certificate(psi)
    total = abs(cert.ip_cc2) + abs(cert.ip_cc4)
    if total > 0.25 * X_IP_MAX:
        c = psi.coeffs.copy()
        f = 0.25 * X_IP_MAX / total
        for k in (1, -1):
            for l in (2, -2, 4, -4):
                c[k % n, l % n] *= f
        psi = SpectralField(d, c)
    return psi


# ---------------------------------------------------------------------------
# expansion fit


@dataclass
class ExpansionFit:
    c0: float
    c1: float
    c2: float
    c3: float
    c4: float
    b1: float
    residuals: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return asdict(self)


def _richardson(eps: np.ndarray, vals: np.ndarray, deriv: int = 0) -> tuple[float, float]:
    """Value (or first derivative) at ε=0 of the interpolating polynomial,
    plus the change when the highest-order term is dropped (error estimate)."""
    n = len(eps)
    V = np.vander(eps, n, increasing=True)
    if np.linalg.cond(V) > 1e14:
        raise np.linalg.LinAlgError("ill-conditioned extrapolation")
    coef = np.linalg.solve(V, vals)
    lower = np.linalg.lstsq(np.vander(eps, n - 1, increasing=True), vals, rcond=None)[0]
    return float(coef[deriv]), float(abs(coef[deriv] - lower[deriv]))


def extrapolate_expansion(epsilons, psis) -> ExpansionFit:
    """Fit the ε⁰ and ε¹ structure of ψ_ε from a sweep of fixed points.

    Sign conventions follow
        ψ_ε = c0 cos3y - c1 cos5y
              + ε[-c2 cos x cos4y - (b1/32) cos3y - c3 cos7y + c4 cos9y] + O(ε²),
    so the cos 7y coefficient at order ε is reported as -c3.
    """
    eps = np.asarray(epsilons, dtype=float)
    if len(set(eps.tolist())) < 3 or len(eps) != len(psis):
        raise ValueError("need at least three distinct epsilons, one ψ each")
    order = np.argsort(eps)
    eps = eps[order]
    psis = [psis[i] for i in order]
    amp = lambda k, l: np.array([cos_amplitude(p, k, l) for p in psis])  # noqa: E731
    a3, a5 = amp(0, 3), amp(0, 5)
    c0, r0 = _richardson(eps, a3)
    slope3, rs3 = _richardson(eps, a3, deriv=1)
    mc1, r1 = _richardson(eps, a5)
    pos = eps > 0
    if pos.sum() < 3:
        raise ValueError("need at least three positive epsilons for the first-order terms")
    e1 = eps[pos]
    first = {}
    for name, (k, l) in {"c2": (1, 4), "c3": (0, 7), "c4": (0, 9)}.items():
        first[name] = _richardson(e1, amp(k, l)[pos] / e1)
    return ExpansionFit(
        c0=c0,
        c1=-mc1,
        c2=-first["c2"][0],
        c3=-first["c3"][0],
        c4=first["c4"][0],
        b1=-32 * slope3,
        residuals={"c0": r0, "c1": r1, "c2": first["c2"][1], "c3": first["c3"][1], "c4": first["c4"][1], "b1": 32 * rs3},
    )
