"""Classical single-particle limit of the driven domain.

    H(x, k, t) = h cos(2 pi x / M) + 2 g(t) cos k,   g(t) = g0 + g1 cos(omega t)

The fixed point (x, k) = (M, 0) oscillates at Omega0 = sqrt(8 pi^2 h g0) / M
and goes parametrically unstable near m omega = 2 Omega0.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .errors import NumericalToleranceError, ValidationError
from .model import ModelParams

MONODROMY_STEPS = 4096


@dataclass(frozen=True)
class PhasePoint:
    x: float
    k: float

    def wrapped(self, M: int) -> "PhasePoint":
        return PhasePoint(*wrap(self.x, self.k, M))


def wrap(x, k, M):
    """Map x into [M/2, 3M/2) and k into (-pi, pi]."""
    x = np.asarray(x, dtype=float)
    k = np.asarray(k, dtype=float)
    xw = M / 2 + np.mod(x - M / 2, M)
    kw = np.pi - np.mod(np.pi - k, 2 * np.pi)
    return xw, kw


def coupling(t, params: ModelParams):
    return params.g0 + params.g1 * np.cos(params.omega * t)


def energy(x, k, t, params: ModelParams):
    return params.h * np.cos(2 * np.pi * x / params.M) + 2 * coupling(t, params) * np.cos(k)


def flow(p: PhasePoint, t: float, params: ModelParams) -> tuple[float, float]:
    """Hamilton's equations (dx/dt, dk/dt) = (dH/dk, -dH/dx)."""
    return _rhs(t, np.array([p.x, p.k]), params)


def _rhs(t, y, params):
    x, k = y[0], y[1]
    q = 2 * np.pi / params.M
    dx = -2 * coupling(t, params) * np.sin(k)
    dk = params.h * q * np.sin(q * x)
    return np.array([dx, dk])


def omega0(params: ModelParams) -> float:
    """Small-oscillation frequency about (M, 0)."""
    for key in ("h", "g0"):
        if getattr(params, key) <= 0:
            raise ValidationError(key, f"Omega0 needs {key} > 0, got {getattr(params, key)}")
    return float(np.sqrt(8 * np.pi**2 * params.h * params.g0) / params.M)


def integrate(p0: PhasePoint, t0: float, t1: float, params: ModelParams, tol: float = 1e-10, t_eval=None):
    sol = solve_ivp(
        _rhs,
        (t0, t1),
        [p0.x, p0.k],
        method="DOP853",
        rtol=tol,
        atol=tol * 1e-2,
        t_eval=t_eval,
        args=(params,),
    )
    if not sol.success:
        raise NumericalToleranceError(f"integration from {p0} failed: {sol.message}")
    return sol


def poincare_section(
    initial_points, n_periods: int, params: ModelParams, tol: float = 1e-10, wrapped: bool = True
) -> list[np.ndarray]:
    """Stroboscopic samples at t = nT, n = 0..n_periods, one array per orbit.

    Each array has columns (x, k); ``wrapped`` folds them into the output
    window centred on the fixed point.
    """
    if n_periods < 1:
        raise ValidationError("n_periods", f"must be >= 1, got {n_periods}")
    T = params.period
    times = T * np.arange(n_periods + 1)
    orbits = []
    for p in initial_points:
        p = p if isinstance(p, PhasePoint) else PhasePoint(*p)
        try:
            sol = integrate(p, 0.0, times[-1], params, tol, t_eval=times)
        except NumericalToleranceError as exc:
            raise NumericalToleranceError(f"Poincare orbit starting at {p}: {exc}") from exc
        x, k = sol.y
        if wrapped:
            x, k = wrap(x, k, params.M)
        orbits.append(np.column_stack([x, k]))
    return orbits


def _step_matrices(g, kappa, dt):
    # exp(dt * [[0, -2g], [kappa, 0]]); the generator squares to -w2 * I
    w2 = 2 * g * kappa
    arg = np.sqrt(np.abs(w2)) * dt
    pos = w2 >= 0
    c = np.where(pos, np.cos(arg), np.cosh(arg))
    with np.errstate(invalid="ignore", divide="ignore"):
        s_over = np.where(
            arg == 0,
            dt,
            np.where(pos, np.sin(arg), np.sinh(arg)) * dt / np.where(arg == 0, 1.0, arg),
        )
    return c, -2 * g * s_over, kappa * s_over


def monodromy(omega, g1, params: ModelParams, steps: int = MONODROMY_STEPS) -> np.ndarray:
    """One-period fundamental matrix of the linearized flow about (M, 0).

    delta x' = -2 g(t) delta k, delta k' = (4 pi^2 h / M^2) delta x, integrated
    with ``steps`` exponential-midpoint substeps. ``omega`` and ``g1`` may be
    broadcastable arrays; the result has shape broadcast + (2, 2).
    """
    omega, g1 = np.broadcast_arrays(np.asarray(omega, dtype=float), np.asarray(g1, dtype=float))
    kappa = 4 * np.pi**2 * params.h / params.M**2
    dt = 2 * np.pi / omega / steps
    a = np.ones(omega.shape)
    b = np.zeros(omega.shape)
    c = np.zeros(omega.shape)
    d = np.ones(omega.shape)
    for n in range(steps):
        g = params.g0 + g1 * np.cos(omega * (n + 0.5) * dt)
        e11, e12, e21 = _step_matrices(g, kappa, dt)
        # E = [[e11, e12], [e21, e11]]; Phi <- E @ Phi
        a, b, c, d = (
            e11 * a + e12 * c,
            e11 * b + e12 * d,
            e21 * a + e11 * c,
            e21 * b + e11 * d,
        )
    return np.stack([np.stack([a, b], -1), np.stack([c, d], -1)], -2)


@dataclass(frozen=True)
class StabilityGrid:
    omega_axis: np.ndarray
    g1_axis: np.ndarray
    trace: np.ndarray  # shape (len(g1_axis), len(omega_axis))
    det: np.ndarray

    @property
    def stable(self) -> np.ndarray:
        return np.abs(self.trace) <= 2.0


def stability_chart(
    omega_range=(0.5, 6.0),
    g1_range=(0.0, 1.0),
    params: ModelParams | None = None,
    n_omega: int = 300,
    n_g1: int = 200,
    steps: int = MONODROMY_STEPS,
) -> StabilityGrid:
    """Monodromy trace over an (omega, g1) grid, in units of g0."""
    params = params or ModelParams()
    if not (omega_range[0] > 0 and omega_range[1] > omega_range[0]):
        raise ValidationError("omega_range", f"need 0 < lo < hi, got {omega_range}")
    if not (g1_range[0] >= 0 and g1_range[1] >= g1_range[0]):
        raise ValidationError("g1_range", f"need 0 <= lo <= hi, got {g1_range}")
    omegas = np.linspace(*omega_range, n_omega)
    g1s = np.linspace(*g1_range, n_g1)
    Om, G1 = np.meshgrid(omegas, g1s)
    phi = monodromy(Om, G1, params, steps)
    trace = phi[..., 0, 0] + phi[..., 1, 1]
    det = phi[..., 0, 0] * phi[..., 1, 1] - phi[..., 0, 1] * phi[..., 1, 0]
    return StabilityGrid(omega_axis=omegas, g1_axis=g1s, trace=trace, det=det)


def is_stable(omega: float, g1: float, params: ModelParams | None = None, steps: int = MONODROMY_STEPS) -> bool:
    params = params or ModelParams()
    phi = monodromy(omega, g1, params, steps)
    return bool(abs(phi[..., 0, 0] + phi[..., 1, 1]) <= 2.0)
