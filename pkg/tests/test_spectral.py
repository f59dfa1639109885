import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kolmoflow.spectral import (
    DomainSpec,
    KernelSpec,
    SpectralField,
    advect,
    apply_multiplier,
    ddx,
    ddy,
    evaluate_channel,
    grid_transform,
    hermitian_defect,
    inner_product,
    norm,
    perp_gradient,
    project_kernel,
    symmetrize_even_even,
)

SQ = DomainSpec.square(32)
RECT = DomainSpec("torus", 0.5, 32, 32)


def fn(d, f):
    return SpectralField.from_function(d, f)


def random_field(d, seed, decay=0.3, mean_free=False):
    rng = np.random.default_rng(seed)
    X, Y = d.grid()
    out = np.zeros_like(X)
    for k in range(0, 6):
        for l in range(0, 6):
            a, b, c, e = rng.normal(size=4) * np.exp(-decay * (k + l))
            kx = k / d.delta
            out += a * np.cos(kx * X) * np.cos(l * Y) + b * np.sin(kx * X) * np.cos(l * Y)
            out += c * np.cos(kx * X) * np.sin(l * Y) + e * np.sin(kx * X) * np.sin(l * Y)
    f = SpectralField.from_physical(d, out)
    if mean_free:
        f.coeffs[0, 0] = 0
    return f


def assert_field_close(f, g, tol=1e-13):
    scale = max(norm(g), 1.0)
    assert norm(f - g) <= tol * scale


# -- transforms ------------------------------------------------------------


def test_cos_y_coefficients():
    f = fn(SQ, lambda x, y: np.cos(y))
    assert f.coeff(0, 1) == pytest.approx(0.5, abs=1e-15)
    assert f.coeff(0, -1) == pytest.approx(0.5, abs=1e-15)
    rest = f.coeffs.copy()
    rest[0, 1] = rest[0, -1] = 0
    assert np.abs(rest).max() < 1e-15


def test_product_coefficients():
    f = fn(SQ, lambda x, y: np.cos(x) * np.cos(4 * y))
    for k in (1, -1):
        for l in (4, -4):
            assert f.coeff(k, l) == pytest.approx(0.25, abs=1e-15)


@pytest.mark.parametrize("d", [SQ, RECT, DomainSpec.channel(16, 24)])
def test_round_trip(d):
    rng = np.random.default_rng(3)
    if d.kind == "torus":
        vals = rng.normal(size=(d.nx, d.ny))
    else:
        f = SpectralField(d, rng.normal(size=(d.nx, d.ny)) + 0j)
        vals = f.to_physical().real
    back = grid_transform(grid_transform(vals, "to_spectral", d), "to_physical")
    assert np.abs(back - vals).max() <= 1e-13 * np.abs(vals).max()


def test_resolution_mismatch_rejected():
    with pytest.raises(ValueError):
        grid_transform(np.zeros((8, 10)), "to_spectral", SQ)


def test_domain_validation():
    with pytest.raises(ValueError):
        DomainSpec("torus", 1.0, 6, 8)
    with pytest.raises(ValueError):
        DomainSpec("torus", -1.0, 8, 8)
    with pytest.raises(ValueError):
        DomainSpec("sphere", 1.0, 8, 8)


def test_kernel_collision_flag():
    assert DomainSpec("torus", 0.5, 16, 16).kernel_collision is False
    assert DomainSpec("torus", 1.5, 16, 16).kernel_collision is False
    # delta = 1: (1, 0) sits on the unit circle
    assert DomainSpec("torus", 1.0, 16, 16).kernel_collision is True


# -- multipliers -----------------------------------------------------------


def test_laplacian_eigenfunction():
    f = fn(SQ, lambda x, y: np.cos(y))
    assert_field_close(apply_multiplier(f, "laplacian"), -f)


def test_inv_laplacian_eigenvalue():
    f = fn(SQ, lambda x, y: np.cos(x) * np.cos(4 * y))
    assert_field_close(apply_multiplier(f, "inv_laplacian"), f / -17.0)


def test_helmholtz_inverse_cos3y():
    f = fn(SQ, lambda x, y: np.cos(3 * y))
    assert_field_close(apply_multiplier(f, "helmholtz_inverse"), f * (-1 / 8))


def test_helmholtz_inverse_reports_removed_kernel_content():
    f = fn(SQ, lambda x, y: np.cos(3 * y) + 2 * np.cos(x))
    out, removed = apply_multiplier(f, "helmholtz_inverse", return_residual=True)
    assert removed == pytest.approx(norm(fn(SQ, lambda x, y: 2 * np.cos(x))), rel=1e-13)
    assert abs(out.coeff(1, 0)) == 0


def test_inv_laplacian_rejects_mean():
    f = fn(SQ, lambda x, y: 1 + np.cos(y))
    with pytest.raises(ValueError):
        apply_multiplier(f, "inv_laplacian")


def test_rectangular_wavenumber_scaling():
    # sin(2x) on T²_{1/2} has x-wavenumber k=1, |k|² = 1/δ² = 4
    f = fn(RECT, lambda x, y: np.sin(2 * x))
    assert_field_close(apply_multiplier(f, "laplacian"), f * -4.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31))
def test_inverse_laplacian_inverts_laplacian(seed):
    f = random_field(RECT, seed, mean_free=True)
    back = apply_multiplier(apply_multiplier(f, "laplacian"), "inv_laplacian")
    assert_field_close(back, f, 1e-14)


# -- velocity and transport ------------------------------------------------


def test_perp_gradient_examples():
    u1, u2 = perp_gradient(fn(SQ, lambda x, y: np.cos(y)))
    assert_field_close(u1, fn(SQ, lambda x, y: np.sin(y)))
    assert norm(u2) < 1e-14
    u1, u2 = perp_gradient(fn(SQ, lambda x, y: np.cos(x)))
    assert norm(u1) < 1e-14
    assert_field_close(u2, fn(SQ, lambda x, y: -np.sin(x)))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31))
def test_velocity_is_divergence_free(seed):
    u1, u2 = perp_gradient(random_field(RECT, seed))
    assert np.abs((ddx(u1) + ddy(u2)).coeffs).max() < 1e-13


def test_shear_does_not_advect_itself():
    out = advect(fn(SQ, lambda x, y: np.cos(y)), fn(SQ, lambda x, y: -np.cos(y)))
    assert np.abs(out.coeffs).max() < 1e-15


def test_bracket_resonant_coefficient():
    a = 0.1
    omega = fn(SQ, lambda x, y: a * (np.sin(2 * y) + np.cos(x)))
    psi = apply_multiplier(omega, "inv_laplacian")
    out = advect(psi, omega)
    basis = fn(SQ, lambda x, y: np.sin(x) * np.cos(2 * y))
    coef = inner_product(out, basis) / inner_product(basis, basis)
    assert coef == pytest.approx(1.5 * a**2, abs=1e-14)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31))
def test_transport_energy_identities(seed):
    psi = random_field(SQ, seed)
    omega = random_field(SQ, seed + 1)
    out = advect(psi, omega)
    # the dealiased product is skew only after the same truncation is applied to omega
    n = SQ.nx
    keep = (np.abs(SQ.kx_int)[:, None] < n / 3) & (np.abs(SQ.ky_int)[None, :] < n / 3)
    w = SpectralField(SQ, np.where(keep, omega.coeffs, 0))
    scale = norm(out) * norm(w)
    assert abs(inner_product(out, w)) <= 1e-12 * scale
    assert abs(out.coeff(0, 0)) < 1e-13 * max(1.0, np.abs(out.coeffs).max())
    # u·∇ψ = 0 pointwise
    assert norm(advect(psi, psi)) <= 1e-12 * norm(psi) ** 2


# -- norms and pairings ----------------------------------------------------


def test_norm_examples():
    cy = fn(SQ, lambda x, y: np.cos(y))
    assert norm(cy) == pytest.approx(np.pi * np.sqrt(2), rel=1e-14)
    lam = 0.7
    assert norm(cy, "Gevrey", lam=lam) == pytest.approx(np.exp(lam) * np.pi * np.sqrt(2), rel=1e-14)
    c3 = fn(SQ, lambda x, y: np.cos(3 * y))
    assert norm(c3, "Hdot_s", s=2) == pytest.approx(9 * np.pi * np.sqrt(2), rel=1e-14)
    assert norm(c3, "Hs", s=1) == pytest.approx(np.sqrt(10) * np.pi * np.sqrt(2), rel=1e-14)


def test_gevrey_overflow_is_infinite():
    f = fn(SQ, lambda x, y: np.cos(10 * y))
    assert norm(f, "Gevrey", lam=200.0) == float("inf")


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31))
def test_plancherel(seed):
    for d in (SQ, RECT):
        f = random_field(d, seed)
        quad = np.sum(f.to_physical().real ** 2) * d.area / (d.nx * d.ny)
        assert norm(f) ** 2 == pytest.approx(quad, rel=1e-12)


def test_inner_product_examples():
    cy = fn(SQ, lambda x, y: np.cos(y))
    assert inner_product(cy, cy) == pytest.approx(2 * np.pi**2, rel=1e-14)
    c4 = fn(SQ, lambda x, y: np.cos(y) ** 4)
    one = fn(SQ, lambda x, y: np.ones_like(x))
    assert inner_product(c4, one) / (2 * np.pi) == pytest.approx(3 * np.pi / 4, rel=1e-14)
    assert abs(inner_product(fn(SQ, lambda x, y: np.cos(x)), fn(SQ, lambda x, y: np.cos(2 * y)))) < 1e-14


# -- kernels and symmetry --------------------------------------------------


def test_kernel_membership():
    ks = KernelSpec.of(SQ)
    assert ks.mode_set("P_helmholtz_kernel") == {(1, 0), (-1, 0), (0, 1), (0, -1)}
    assert {(1, 0), (-1, 0)} <= ks.mode_set("P_K")
    assert all(k == 0 for k, _ in KernelSpec.of(RECT).mode_set("P_K"))


def test_project_kernel_examples():
    f = fn(SQ, lambda x, y: np.cos(x) + np.sin(x) * np.cos(2 * y))
    assert_field_close(project_kernel(f, "P_K"), fn(SQ, lambda x, y: np.cos(x)))
    assert norm(project_kernel(fn(RECT, lambda x, y: np.cos(2 * x)), "P_K")) < 1e-14
    g = fn(SQ, lambda x, y: np.cos(3 * y) + np.sin(y) ** 3)
    assert norm(project_kernel(g, "P_D")) < 1e-14


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.sampled_from([SQ, RECT]))
def test_projections_complementary_and_orthogonal(seed, d):
    f = random_field(d, seed)
    pk, pd = project_kernel(f, "P_K"), project_kernel(f, "P_D")
    assert inner_product(pk, pd) == 0.0
    assert_field_close(pk + pd, f, 0)


def test_symmetrize_examples():
    assert norm(symmetrize_even_even(fn(SQ, lambda x, y: np.sin(x)))) < 1e-15
    f = fn(SQ, lambda x, y: np.cos(x) * np.cos(4 * y))
    assert_field_close(symmetrize_even_even(f), f)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31))
def test_symmetrize_idempotent(seed):
    once = symmetrize_even_even(random_field(SQ, seed))
    assert_field_close(symmetrize_even_even(once), once, 0)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31))
def test_real_fields_are_hermitian(seed):
    f = random_field(RECT, seed)
    assert hermitian_defect(f) < 1e-15 * max(1, np.abs(f.coeffs).max())


# -- channel ---------------------------------------------------------------


def test_channel_sine_basis_and_dirichlet():
    d = DomainSpec.channel(16, 16)
    f = SpectralField.from_modes(d, {(1, 2): 0.5, (-1, 2): 0.5})
    y = np.array([-1.0, -0.3, 0.25, 1.0])
    vals = evaluate_channel(f, y, nx=16)
    x = 2 * np.pi * np.arange(16) / 16
    expect = np.cos(x)[:, None] * np.sin(2 * np.pi * (y + 1) / 2)[None, :]
    assert np.abs(vals - expect).max() < 1e-14
    assert np.abs(vals[:, [0, -1]]).max() < 1e-14


def test_channel_derivatives():
    d = DomainSpec.channel(16, 16)
    f = SpectralField.from_modes(d, {(1, 3): 0.5, (-1, 3): 0.5})
    y = np.linspace(-1, 1, 7)
    x = 2 * np.pi * np.arange(16) / 16
    q = 3 * np.pi / 2
    expect = -np.sin(x)[:, None] * q * np.cos(q * (y + 1))[None, :]
    assert np.abs(evaluate_channel(f, y, dx=1, dy=1) - expect).max() < 1e-13
