import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kolmoflow.spectral import DomainSpec, SpectralField, h2, inner_product, norm, padded_physical
from kolmoflow.stationary import (
    ConvergenceError,
    DegeneracyError,
    QuinticNonlinearity,
    XMembershipError,
    ab_series,
    apply_K,
    compatibility_pairings,
    compose_argument,
    construct_fixed_point,
    cos_amplitude,
    cos_mode,
    extrapolate_expansion,
    random_x_member,
    remainder_R,
    solve_AB,
    x_certificate,
)

D = DomainSpec.square(32)


def fn(f, d=D):
    return SpectralField.from_function(d, f)


@pytest.fixture(scope="module")
def sweep():
    eps = [0.0, 0.0025, 0.005, 0.01, 0.02]
    return {e: construct_fixed_point(e) for e in eps}


# -- composition and remainder ---------------------------------------------


def test_compose_argument_examples():
    zero = SpectralField.zeros(D)
    assert norm(compose_argument(zero, 0) - fn(lambda x, y: np.cos(y))) < 1e-14
    assert norm(compose_argument(zero, 0.1) - fn(lambda x, y: np.cos(y) + 0.1 * np.cos(x))) < 1e-14
    got = compose_argument(fn(lambda x, y: np.cos(3 * y)), 0.01)
    expect = fn(lambda x, y: np.cos(y) + 0.01 * np.cos(x) + 0.01 * np.cos(3 * y))
    assert norm(got - expect) < 1e-14


def test_remainder_vanishes_at_zero_epsilon():
    psi = random_x_member(32, seed=1)
    assert np.abs(remainder_R(-1 / 3, psi, 0.0).coeffs).max() == 0


def _taylor_remainder_oracle(B, psi, eps, A=0.3):
    # f(c + εh) - f(c) - ε h f'(c) on a fine grid, A drops out
    vals = padded_physical(psi, 4)
    n = vals.shape[0]
    x = 2 * np.pi * np.arange(n) / n
    X, Y = np.meshgrid(x, x, indexing="ij")
    c, h = np.cos(Y), vals + np.cos(X)
    f = lambda s: A * s + B * s**3 + s**5 / 5  # noqa: E731
    df = A + 3 * B * c**2 + c**4
    return X, Y, f(c + eps * h) - f(c) - eps * h * df


def test_remainder_matches_taylor_oracle_at_zero_psi():
    B, eps = -1 / 3, 0.1
    R = remainder_R(B, SpectralField.zeros(D), eps)
    X, Y, vals = _taylor_remainder_oracle(B, SpectralField.zeros(D), eps)
    oracle_cy = np.mean(vals * np.cos(Y)) * 4 * np.pi**2
    assert inner_product(R, fn(lambda x, y: np.cos(y))) == pytest.approx(oracle_cy, rel=1e-12)
    # leading term ε² cos²x (3B cos y + 2cos³y) has cos y coefficient ε²(1/2)(3B + 3/2)
    assert cos_amplitude(R, 0, 1) == pytest.approx(eps**2 * 0.5 * (3 * B + 1.5), rel=5e-2)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**31))
def test_remainder_matches_taylor_oracle(seed):
    psi = random_x_member(32, seed=seed)
    B, eps = -0.3, 0.05
    R = remainder_R(B, psi, eps)
    X, Y, vals = _taylor_remainder_oracle(B, psi, eps)
    for k, l in [(0, 1), (1, 0), (2, 3), (1, 4)]:
        g = np.cos(k * X) * np.cos(l * Y)
        oracle = np.mean(vals * g) * 4 * np.pi**2
        assert inner_product(R, cos_mode(D, k, l)) == pytest.approx(oracle, abs=1e-14)


def test_remainder_is_second_order():
    psi = random_x_member(32, seed=4)
    ratios = [norm(remainder_R(-1 / 3, psi, e)) / e**2 for e in (1e-3, 1e-2, 1e-1)]
    assert max(ratios) / min(ratios) < 2.0
    assert max(ratios) < 50


# -- coefficient solver ----------------------------------------------------


def test_solve_AB_at_shear():
    A, B = solve_AB(SpectralField.zeros(D), 0.0)
    assert A == pytest.approx(1 / 8, abs=1e-15)
    assert B == pytest.approx(-1 / 3, abs=1e-15)
    A, B = solve_AB(SpectralField.zeros(D), 1e-9)
    assert abs(A - 1 / 8) < 1e-12 and abs(B + 1 / 3) < 1e-12


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31))
def test_solve_AB_satisfies_both_conditions(seed):
    psi = random_x_member(32, seed=seed)
    eps = 1e-3
    A, B = solve_AB(psi, eps)
    px, py = compatibility_pairings(psi, eps, A, B)
    assert abs(px) < 1e-13 and abs(py) < 1e-13
    assert abs(A) <= 1 and abs(B) <= 1


def test_solve_AB_degeneracy():
    # pairing with cos²y cos x pushes the closed-form denominator through zero
    psi = cos_mode(D, 1, 2) * (-0.75 * 2 * np.pi**2 / 3 / (np.pi**2 / 4) * 4 / 4)
    assert abs(x_certificate(psi).ip_cc2) > 1
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        with pytest.raises((DegeneracyError, XMembershipError)):
            solve_AB(psi, 1e-3)


def test_solve_AB_rejects_large_epsilon():
    with pytest.raises(ValueError):
        solve_AB(SpectralField.zeros(D), 0.5)


def test_solve_AB_iteration_cap():
    psi = random_x_member(32, seed=2)
    with pytest.raises(ConvergenceError):
        solve_AB(psi, 0.05, max_iter=1)


def test_ab_series_shear_values():
    s = ab_series(SpectralField.zeros(D), 3)
    assert s.a[0] == pytest.approx(1 / 8, abs=1e-15)
    assert s.b[0] == pytest.approx(-1 / 3, abs=1e-15)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**31))
def test_ab_series_leading_relation(seed):
    s = ab_series(random_x_member(32, seed=seed), 2)
    assert s.a[0] == pytest.approx(-0.75 * s.b[0] - 0.125, abs=1e-14)


@pytest.mark.parametrize("J", [0, 1, 2, 3])
def test_ab_series_convergence_order(J):
    psi = random_x_member(32, seed=7)
    s = ab_series(psi, J)
    eps = np.array([1e-2, 5e-3, 2.5e-3])
    errs = []
    for e in eps:
        A, _ = solve_AB(psi, e)
        errs.append(abs(s.evaluate(e)[0] - A))
    slope = np.polyfit(np.log(eps), np.log(errs), 1)[0]
    assert abs(slope - (J + 1)) < 0.3


def test_ab_series_growth_bound():
    s = ab_series(random_x_member(32, seed=3), 8)
    M = s.growth_constant()
    assert all(abs(bj) <= M**j * (1 + 1e-12) for j, bj in enumerate(s.b) if j > 0)


# -- the contraction map -----------------------------------------------------


def test_apply_K_at_zero_epsilon():
    out, A, B, res = apply_K(SpectralField.zeros(D), 0.0)
    expect = cos_mode(D, 0, 3) * (1 / 384) - cos_mode(D, 0, 5) * (1 / 1920)
    assert norm(out - expect) < 1e-16
    assert (A, B) == pytest.approx((1 / 8, -1 / 3), abs=1e-15)
    assert res < 1e-12
    # the output is a pure shear, so it is mapped to itself
    again, *_ = apply_K(out, 0.0)
    assert norm(again - out) < 1e-16


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**31))
def test_apply_K_maps_into_ball(seed):
    psi = random_x_member(32, seed=seed, h2_size=9.0)
    out, _, _, res = apply_K(psi, 1e-3)
    assert h2(out) <= 10
    assert res < 1e-12


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**31), st.floats(0.1, 5.0))
def test_apply_K_contracts(seed, size):
    p1 = random_x_member(32, seed=seed, h2_size=size)
    p2 = random_x_member(32, seed=seed + 1, h2_size=size)
    k1 = apply_K(p1, 1e-3)[0]
    k2 = apply_K(p2, 1e-3)[0]
    assert h2(k1 - k2) / h2(p1 - p2) <= 0.8


def test_random_x_member_in_X():
    for seed in range(5):
        assert x_certificate(random_x_member(32, seed=seed)).passes()


# -- the fixed point ---------------------------------------------------------


def test_fixed_point_at_zero_epsilon(sweep):
    Psi, F, rep = sweep[0.0]
    expect = cos_mode(Psi.domain, 0, 3) * (1 / 384) - cos_mode(Psi.domain, 0, 5) * (1 / 1920)
    assert norm(rep.psi - expect) < 1e-16
    assert norm(Psi - cos_mode(Psi.domain, 0, 1)) < 1e-15
    assert rep.converged and len(rep.iterates) == 2


def test_fixed_point_quality(sweep):
    for e, (Psi, F, rep) in sweep.items():
        assert rep.converged
        assert rep.iterates[-1].h2_difference < rep.tol
        assert rep.equation_residual < 1e-10
        assert rep.contraction_factor <= 0.8
        assert abs(F.A) <= 1 and abs(F.B) <= 1
        assert all(it.certificate.passes() for it in rep.iterates)
        psi = rep.psi
        assert abs(cos_amplitude(psi, 0, 1)) < 1e-12 and abs(cos_amplitude(psi, 1, 0)) < 1e-12


def test_catseye_projection(sweep):
    for e in (0.005, 0.01, 0.02):
        Psi = sweep[e][0]
        ratio = inner_product(Psi, cos_mode(Psi.domain, 1, 4)) / (-(e**2) * np.pi**2 / 128)
        assert 0.95 <= ratio <= 1.05


def test_distance_to_shear_is_first_order(sweep):
    r = [h2(sweep[e][0] - cos_mode(sweep[e][0].domain, 0, 1)) / e for e in (0.005, 0.01, 0.02)]
    assert max(r) / min(r) < 1.1


def test_nonlinearity_coefficients():
    F = QuinticNonlinearity(0.125, -1 / 3)
    assert F.full_coefficients(0.01) == pytest.approx([0, -1 + 0.00125, 0, -0.01 / 3, 0, 0.002])
    assert F(2.0) == pytest.approx(0.25 - 8 / 3 + 32 / 5)


def test_construct_rejects_large_epsilon():
    with pytest.raises(ValueError):
        construct_fixed_point(0.2)


def test_construct_iteration_cap():
    with pytest.raises(ConvergenceError):
        construct_fixed_point(0.02, max_iter=2)


def test_report_serializes(sweep):
    d = sweep[0.01][2].to_dict()
    assert d["converged"] is True and len(d["iterates"]) == len(sweep[0.01][2].iterates)


def test_extrapolation(sweep):
    eps = sorted(sweep)
    fit = extrapolate_expansion(eps, [sweep[e][2].psi for e in eps])
    assert fit.c0 == pytest.approx(1 / 384, rel=1e-3)
    assert fit.c1 == pytest.approx(1 / 1920, rel=1e-3)
    assert fit.c2 == pytest.approx(1 / 128, rel=1e-2)
    assert fit.b1 == pytest.approx(-7 / 7680, rel=1e-2)


def test_extrapolation_needs_three_points(sweep):
    with pytest.raises(ValueError):
        extrapolate_expansion([0.0, 0.01], [sweep[0.0][2].psi, sweep[0.01][2].psi])
