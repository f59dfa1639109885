"""
Vorticity-form Navier-Stokes on T²_δ:

    ∂_t ω + u·∇ω = ν Δω,   u = ∇^⊥ Δ⁻¹ ω,

and the linearisation around the bar state e^{-νt} cos y,

    ∂_t f + e^{-νt} sin(y) (1 + Δ⁻¹) ∂_x f = ν Δf.

Both are advanced with integrating-factor RK4; diffusion enters only through
the exact multiplier exp(-ν|k|² dt/2).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .spectral import (
    DomainSpec,
    SpectralField,
    advect_coeffs,
    apply_multiplier,
    dealias_mask,
    inner_product,
    norm,
    project_kernel,
    resample,
)
from .stationary import construct_fixed_point, cos_mode

log = logging.getLogger(__name__)

MODES = ("nonlinear", "linear_bar", "heat")


class NumericalError(FloatingPointError):
    pass


@dataclass
class SimConfig:
    nu: float
    dt: float
    t_end: float
    domain: DomainSpec
    mode: str = "nonlinear"
    record_every: int = 1
    # normalises β, γ, δ in the mode amplitudes; 0 disables them
    epsilon: float = 0.0
    # c0, c1 of the cos 3y / cos 5y terms used by γ, δ
    c0: float = 1 / 384
    c1: float = 1 / 1920

    def validate(self, omega0: SpectralField | None = None):
        if self.nu < 0:
            raise ValueError("nu must be nonnegative")
        if self.dt <= 0 or self.t_end <= 0:
            raise ValueError("dt and t_end must be positive")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.record_every < 1:
            raise ValueError("record_every must be a positive integer")
        if omega0 is not None and self.mode != "heat":
            hx = 2 * np.pi * self.domain.delta / self.domain.nx
            if self.mode == "nonlinear":
                h, umax = min(hx, 2 * np.pi / self.domain.ny), max_velocity(omega0)
            else:
                # the bar (e^{-νt} sin y, 0) advects along x only
                h, umax = hx, 1.0
            if umax > 0 and self.dt > 0.5 * h / umax:
                raise ValueError(f"dt={self.dt} violates the CFL bound {0.5 * h / umax:.4g}")


@dataclass
class SimulationRecord:
    times: list[float] = field(default_factory=list)
    l2_PD: list[float] = field(default_factory=list)
    l2_PK: list[float] = field(default_factory=list)
    heat_deviation: list[float] = field(default_factory=list)
    mode_amps: list[tuple[float, float, float, float]] = field(default_factory=list)
    probe_modes: list[tuple[float, float]] = field(default_factory=list)
    final: SpectralField | None = field(default=None, repr=False)

    CSV_COLUMNS = ("t", "l2_PD", "l2_PK", "heat_dev", "alpha", "beta", "gamma", "delta", "probe13", "probe15")

    def rows(self):
        for i, t in enumerate(self.times):
            yield (t, self.l2_PD[i], self.l2_PK[i], self.heat_deviation[i], *self.mode_amps[i], *self.probe_modes[i])

    def l2_total(self) -> np.ndarray:
        return np.hypot(self.l2_PD, self.l2_PK)


# ---------------------------------------------------------------------------
# building blocks on raw coefficient arrays


def _inv_lap_multiplier(d: DomainSpec) -> np.ndarray:
    ksq = d.ksq()
    out = np.zeros_like(ksq)
    np.divide(-1.0, ksq, out=out, where=ksq > 0)
    return out


def max_velocity(omega: SpectralField) -> float:
    d = omega.domain
    p = omega.coeffs * _inv_lap_multiplier(d)
    KX, KY = d.wavenumbers()
    scale = d.nx * d.ny
    u1 = np.fft.ifft2(-1j * KY * p).real * scale
    u2 = np.fft.ifft2(1j * KX * p).real * scale
    return float(np.sqrt(np.max(u1**2 + u2**2)))


def heat_flow(omega0: SpectralField, t: float, nu: float) -> SpectralField:
    """e^{νtΔ} ω0, exactly."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    return SpectralField(omega0.domain, omega0.coeffs * np.exp(-nu * t * omega0.domain.ksq()), omega0.real)


def _if_rk4(w: np.ndarray, dt: float, E: np.ndarray, N, t: float) -> np.ndarray:
    h = dt / 2
    k1 = N(w, t)
    k2 = N(E * (w + h * k1), t + h)
    k3 = N(E * w + h * k2, t + h)
    k4 = N(E * E * w + dt * E * k3, t + dt)
    out = E * E * w + dt / 6 * (E * E * k1 + 2 * E * (k2 + k3) + k4)
    if not np.all(np.isfinite(out)):
        raise NumericalError(f"non-finite values at t={t + dt:.6g}")
    return out


class _Nonlinear:
    def __init__(self, d: DomainSpec):
        self.d = d
        self.inv = _inv_lap_multiplier(d)
        self.mask = dealias_mask(d)

    def __call__(self, w, t):
        out = -advect_coeffs(self.inv * w, w, self.d, self.mask)
        out[0, 0] = 0.0
        return out


class _LinearBar:
    """-e^{-νt} sin(y) (1+Δ⁻¹) ∂_x f, computed spectrally (sin y shifts l by ±1)."""

    def __init__(self, d: DomainSpec, nu: float):
        ksq = d.ksq()
        KX, _ = d.wavenumbers()
        m = np.zeros_like(ksq)
        np.divide(1.0, ksq, out=m, where=ksq > 0)
        self.op = 1j * KX * (1 - m)
        self.nyq = d.ny // 2
        self.nu = nu

    def __call__(self, f, t):
        g = self.op * f
        g[:, self.nyq] = 0
        s = (np.roll(g, 1, axis=1) - np.roll(g, -1, axis=1)) / 2j
        s[:, self.nyq] = 0
        return -np.exp(-self.nu * t) * s


def step_nonlinear(omega: SpectralField, dt: float, nu: float) -> SpectralField:
    d = omega.domain
    E = np.exp(-nu * d.ksq() * dt / 2)
    return SpectralField(d, _if_rk4(omega.coeffs, dt, E, _Nonlinear(d), 0.0))


def step_linear_bar(f: SpectralField, t: float, dt: float, nu: float) -> SpectralField:
    d = f.domain
    E = np.exp(-nu * d.ksq() * dt / 2)
    return SpectralField(d, _if_rk4(f.coeffs, dt, E, _LinearBar(d, nu), t))


# ---------------------------------------------------------------------------
# diagnostics


def _sin_sin(d: DomainSpec, k: int, l: int) -> SpectralField:
    return SpectralField.from_modes(d, {(k, l): -0.25, (-k, -l): -0.25, (k, -l): 0.25, (-k, l): 0.25})


class _Diagnostics:
    def __init__(self, omega0: SpectralField, cfg: SimConfig):
        d = omega0.domain
        self.cfg = cfg
        self.omega0 = omega0
        self.square = d.kind == "torus" and d.delta == 1.0
        self.cy = cos_mode(d, 0, 1)
        self.cx = cos_mode(d, 1, 0)
        self.c3 = cos_mode(d, 0, 3)
        self.c5 = cos_mode(d, 0, 5)
        self.p13 = _sin_sin(d, 1, 3)
        self.p15 = _sin_sin(d, 1, 5)

    def _amp(self, w, b):
        return inner_product(w, b) / inner_product(b, b)

    def record(self, rec: SimulationRecord, w: SpectralField, t: float):
        cfg, nu, eps = self.cfg, self.cfg.nu, self.cfg.epsilon
        rec.times.append(t)
        rec.l2_PD.append(norm(project_kernel(w, "P_D")))
        rec.l2_PK.append(norm(project_kernel(w, "P_K")))
        rec.heat_deviation.append(norm(w - heat_flow(self.omega0, t, nu)))
        alpha = -self._amp(w, self.cy) * np.exp(nu * t)
        if eps > 0:
            beta = -self._amp(w, self.cx) * np.exp(nu * t) / eps
            gamma = -self._amp(w, self.c3) * np.exp(9 * nu * t) / (9 * cfg.c0 * eps)
            delta = self._amp(w, self.c5) * np.exp(25 * nu * t) / (25 * cfg.c1 * eps)
        else:
            beta = gamma = delta = float("nan")
        rec.mode_amps.append((alpha, beta, gamma, delta))
        rec.probe_modes.append((inner_product(w, self.p13), inner_product(w, self.p15)))


def run(omega0: SpectralField, config: SimConfig, checkpoint_every: int = 0, on_checkpoint=None) -> SimulationRecord:
    """Integrate from omega0 to t_end, recording every ``record_every`` steps.

    ``on_checkpoint(step, t, field)`` is called every ``checkpoint_every``
    steps when both are given.
    """
    config.validate(omega0)
    d = omega0.domain
    nsteps = int(round(config.t_end / config.dt))
    if abs(nsteps * config.dt - config.t_end) > 1e-9 * config.t_end:
        raise ValueError("t_end must be an integer multiple of dt")
    E = np.exp(-config.nu * d.ksq() * config.dt / 2)
    if config.mode == "nonlinear":
        N = _Nonlinear(d)
    elif config.mode == "linear_bar":
        N = _LinearBar(d, config.nu)
    diag = _Diagnostics(omega0, config)
    rec = SimulationRecord()
    w = omega0.coeffs.copy()
    diag.record(rec, omega0, 0.0)
    for n in range(1, nsteps + 1):
        t0 = (n - 1) * config.dt
        if config.mode == "heat":
            w = E * E * w
        else:
            w = _if_rk4(w, config.dt, E, N, t0)
        if n % config.record_every == 0 or n == nsteps:
            diag.record(rec, SpectralField(d, w), n * config.dt)
        if on_checkpoint is not None and checkpoint_every and n % checkpoint_every == 0:
            on_checkpoint(n, n * config.dt, SpectralField(d, w.copy()))
    rec.final = SpectralField(d, w)
    return rec


# ---------------------------------------------------------------------------
# experiments


@dataclass
class NoDecayResult:
    record: SimulationRecord
    min_ratio: float
    epsilon: float
    nu: float
    max_heat_deviation: float
    probe_max_over_eps2: float
    control_record: SimulationRecord | None = None
    control_min_ratio: float | None = None

    def summary(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "nu": self.nu,
            "min_ratio": self.min_ratio,
            "control_min_ratio": self.control_min_ratio,
            "max_heat_deviation": self.max_heat_deviation,
            "heat_deviation_bound": self.epsilon / 100,
            "probe_max_over_eps2": self.probe_max_over_eps2,
            "pd_rate_over_nu": window_rate(self.record, self.nu) / self.nu,
            "control_pd_rate_over_nu": (
                window_rate(self.control_record, self.nu) / self.nu if self.control_record is not None else None
            ),
        }


def window_min_ratio(rec: SimulationRecord, nu: float) -> float:
    """min over t ∈ [1/(2ν), 1/ν] of ‖P_D ω(t)‖ / ‖P_D ω(0)‖."""
    t = np.asarray(rec.times)
    pd = np.asarray(rec.l2_PD)
    sel = (t >= 0.5 / nu - 1e-9) & (t <= 1 / nu + 1e-9)
    return float(np.min(pd[sel]) / pd[0])


def window_rate(rec: SimulationRecord, nu: float) -> float:
    """Fitted exponential decay rate of ‖P_D ω‖ over t ∈ [1/(2ν), 1/ν]."""
    t = np.asarray(rec.times)
    pd = np.asarray(rec.l2_PD)
    sel = (t >= 0.5 / nu - 1e-9) & (t <= 1 / nu + 1e-9) & (pd > 0)
    return float(-np.polyfit(t[sel], np.log(pd[sel]), 1)[0])


def no_decay_experiment(
    epsilon: float,
    nu: float,
    resolution: int = 128,
    dt: float = 0.02,
    control: bool = True,
    record_every: int = 25,
) -> NoDecayResult:
    """Navier-Stokes from Ω_ε = ΔΨ_ε over [0, 1/ν], ε capped at ν/10.

    The control run starts from -cos y - ε sin x sin y, which has the same
    bar part and a generic perturbation of the same size.
    """
    eps = min(epsilon, nu / 10)
    Psi, _, _ = construct_fixed_point(eps, n=64)
    Psi = resample(Psi, resolution)
    omega0 = apply_multiplier(Psi, "laplacian")
    d = omega0.domain
    cfg = SimConfig(nu=nu, dt=dt, t_end=1 / nu, domain=d, record_every=record_every, epsilon=eps)
    rec = run(omega0, cfg)
    probes = np.abs(np.asarray(rec.probe_modes))
    result = NoDecayResult(
        record=rec,
        min_ratio=window_min_ratio(rec, nu),
        epsilon=eps,
        nu=nu,
        max_heat_deviation=float(np.max(rec.heat_deviation)),
        probe_max_over_eps2=float(probes.max() / eps**2),
    )
    if control:
        w_ctrl = cos_mode(d, 0, 1) * -1.0 - _sin_sin(d, 1, 1) * eps
        ctrl_cfg = SimConfig(nu=nu, dt=dt, t_end=1 / nu, domain=d, record_every=record_every, epsilon=eps)
        result.control_record = run(w_ctrl, ctrl_cfg)
        result.control_min_ratio = window_min_ratio(result.control_record, nu)
    return result


def decay_rate(rec: SimulationRecord, nu: float, use: str = "P_D", tau: float = 1.0) -> float:
    """Mean exponential decay rate of ‖P_D f‖ (or of the full norm with
    ``use="total"``) from a least-squares fit of log‖·‖ over t ∈ [ν^{-1/2}, τ/ν]."""
    t = np.asarray(rec.times)
    y = np.asarray(rec.l2_PD if use == "P_D" else rec.l2_total())
    sel = (t >= nu**-0.5 - 1e-9) & (t <= tau / nu + 1e-9) & (y > 0)
    if sel.sum() < 3:
        raise ValueError("record does not cover the window [nu^-1/2, tau/nu]")
    ly = np.log(y[sel])
    if np.any(np.diff(ly) > 1e-8 * np.abs(ly[:-1]).max()):
        log.warning("non-monotone decay inside the fitting window (nu=%g)", nu)
    slope = np.polyfit(t[sel], ly, 1)[0]
    return float(-slope)


def decay_rate_fit(records: list[SimulationRecord], nus, use: str = "P_D", tau: float = 1.0) -> tuple[float, float]:
    """Fit rate(ν) = c ν^p over runs at several viscosities; returns (p, c)."""
    nus = np.asarray(nus, dtype=float)
    if len(nus) < 3 or len(records) != len(nus):
        raise ValueError("need one record per viscosity, at least three")
    rates = np.array([decay_rate(r, nu, use, tau) for r, nu in zip(records, nus)])
    p, logc = np.polyfit(np.log(nus), np.log(rates), 1)
    return float(p), float(np.exp(logc))


def linear_bar_run(nu: float, delta: float = 0.5, initial: str = "sinsin", ny: int = 256, nx: int = 8, t_end=None, dt=None, amplitude: float = 1.0):
    """One linear_bar run on T²_δ used by the rate fit.

    ``initial`` is ``sinsin`` (sin(x/δ) sin y, outside the kernel) or
    ``shear`` (cos y, inside it).  The x resolution can stay small because
    the linear operator never changes the x wavenumber.
    """
    d = DomainSpec(kind="torus", delta=delta, nx=nx, ny=ny)
    if initial == "sinsin":
        f0 = _sin_sin(d, 1, 1) * amplitude
    elif initial == "shear":
        f0 = cos_mode(d, 0, 1) * amplitude
    else:
        raise ValueError(f"unknown initial data {initial!r}")
    if dt is None:
        # shears are steady under the bar operator, so only diffusion acts
        dt = 0.1 if initial == "shear" else 0.4 * 2 * np.pi / ny
    if t_end is None:
        t_end = 1.0 / nu
    nsteps = int(np.ceil(t_end / dt))
    cfg = SimConfig(nu=nu, dt=t_end / nsteps, t_end=t_end, domain=d, mode="linear_bar", record_every=max(1, nsteps // 400))
    return run(f0, cfg)
