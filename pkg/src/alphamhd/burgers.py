"""1D Burgers testbeds: Leray-alpha Burgers, viscous Burgers, entropy reference.

Leray-alpha Burgers transports ``v`` with the smoothed velocity ``u``.  ``v``
develops fronts whose width shrinks exponentially in time, so ``v`` is advanced
with a first-order upwind transport (SSP-RK3 in time) that is a convex
combination per stage: the maximum principle holds discretely.  The smoothed
velocity comes from an FFT solve of the three-point discrete Helmholtz
operator, and interface velocities are centred averages; with that pairing
``sum_i u_{i+1/2} (v_{i+1} - v_i)`` telescopes to zero, so ``sum v`` is conserved
to rounding as well.

Viscous Burgers stays smooth and is solved pseudospectrally with an
integrating factor for the diffusion.  The entropy reference is a first-order
Godunov finite-volume solve.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft
from scipy.optimize import brentq

from .timestepper import if_rk4_step


@dataclass
class Burgers1DState:
    t: float
    v: np.ndarray
    length: float = 2.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.v = np.asarray(self.v, dtype=float)
        if self.v.ndim != 1 or self.v.size < 16:
            raise ValueError("Burgers state needs a 1D grid with at least 16 points")
        if not np.all(np.isfinite(self.v)):
            raise FloatingPointError(f"blow-up at t={self.t!r}")

    @property
    def n(self) -> int:
        return self.v.size

    @property
    def dx(self) -> float:
        return self.length / self.n

    @property
    def x(self) -> np.ndarray:
        return self.dx * np.arange(self.n)

    def energy(self) -> float:
        return 0.5 * float(np.sum(self.v ** 2)) * self.dx

    def mass(self) -> float:
        return float(np.sum(self.v)) * self.dx


def sine_ic(n: int, length: float = 2.0, amplitude: float = 1.0) -> Burgers1DState:
    """``v0 = sin(2 pi x / L)``; with ``L = 2`` the shock forms at ``x = 1``, ``t = 1/pi``."""
    x = length * np.arange(n) / n
    return Burgers1DState(0.0, amplitude * np.sin(2 * np.pi * x / length), length)


def riemann_ic(n: int, length: float = 2.0, u_left: float = 1.0, u_right: float = 0.0,
               x0: float | None = None) -> Burgers1DState:
    x = length * (np.arange(n) + 0.5) / n
    x0 = 0.5 * length if x0 is None else x0
    return Burgers1DState(0.0, np.where(x < x0, u_left, u_right), length, {"x0": x0})


# -- Leray-alpha Burgers -------------------------------------------------------------------

def smoothed_velocity(v: np.ndarray, alpha: float, dx: float) -> np.ndarray:
    """Solve ``u - alpha^2 D2 u = v`` with the three-point ``D2``, diagonal under the FFT."""
    n = v.size
    theta = 2 * np.pi * np.arange(n // 2 + 1) / n
    symbol = 1.0 + alpha * alpha * (2.0 - 2.0 * np.cos(theta)) / (dx * dx)
    return sfft.irfft(sfft.rfft(v) / symbol, n)


def _transport_euler(v: np.ndarray, alpha: float, dx: float, dt: float) -> np.ndarray:
    u = smoothed_velocity(v, alpha, dx)
    a = 0.5 * (u + np.roll(u, -1))       # velocity at interface i+1/2
    jump = np.roll(v, -1) - v            # v_{i+1} - v_i
    flux_in = np.maximum(a, 0.0) * jump  # jump entering cell i+1 from the left
    flux_back = np.minimum(a, 0.0) * jump
    return v - dt / dx * (np.roll(flux_in, 1) + flux_back)


def burgers_alpha_max_dt(state: Burgers1DState, alpha: float, cfl: float = 0.8) -> float:
    u = smoothed_velocity(state.v, alpha, state.dx)
    return cfl * state.dx / max(float(np.max(np.abs(u))), 1e-12)


def step_burgers_alpha(state: Burgers1DState, alpha: float, dt: float) -> Burgers1DState:
    """One SSP-RK3 step of ``v_t + u v_x = 0``, ``v = u - alpha^2 u_xx``."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    v0 = state.v
    dx = state.dx
    v1 = _transport_euler(v0, alpha, dx, dt)
    v2 = 0.75 * v0 + 0.25 * _transport_euler(v1, alpha, dx, dt)
    v3 = v0 / 3.0 + 2.0 / 3.0 * _transport_euler(v2, alpha, dx, dt)
    return Burgers1DState(state.t + dt, v3, state.length, state.meta)


def run_burgers_alpha(state: Burgers1DState, alpha: float, t_end: float, cfl: float = 0.8,
                      on_step=None) -> Burgers1DState:
    while state.t < t_end - 1e-12:
        dt = min(burgers_alpha_max_dt(state, alpha, cfl), t_end - state.t)
        state = step_burgers_alpha(state, alpha, dt)
        if on_step:
            on_step(state)
    return state


# -- viscous Burgers -------------------------------------------------------------------------

class _ViscousOps:
    def __init__(self, n: int, length: float, epsilon: float, advect: bool):
        k = 2 * np.pi * np.fft.rfftfreq(n, length / n)
        self.n = n
        self.ik = 1j * k
        self.symbol = epsilon * epsilon * k * k
        self.mask = np.arange(k.size) <= (n - 1) // 3
        self.advect = advect
        self._cache = {}

    def factors(self, dt):
        f = self._cache.get(dt)
        if f is None:
            f = (np.exp(-self.symbol * dt), np.exp(-0.5 * self.symbol * dt))
            self._cache[dt] = f
        return f

    def nonlinear(self, vh):
        if not self.advect:
            return np.zeros_like(vh)
        v = sfft.irfft(vh, self.n)
        vx = sfft.irfft(self.ik * vh, self.n)
        return -sfft.rfft(v * vx) * self.mask


def step_burgers_viscous(state: Burgers1DState, epsilon: float, dt: float, advect: bool = True,
                         _ops: _ViscousOps | None = None) -> Burgers1DState:
    """Integrating-factor RK4 step of ``v_t - eps^2 v_xx + v v_x = 0`` (dealiased)."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    ops = _ops or _ViscousOps(state.n, state.length, epsilon, advect)
    e_full, e_half = ops.factors(dt)
    vh = sfft.rfft(state.v)
    if advect:
        vh = vh * ops.mask
    vh = if_rk4_step(vh, ops.nonlinear, e_full, e_half, dt)
    return Burgers1DState(state.t + dt, sfft.irfft(vh, state.n), state.length, state.meta)


def run_burgers_viscous(state: Burgers1DState, epsilon: float, t_end: float, dt: float,
                        advect: bool = True, on_step=None) -> Burgers1DState:
    ops = _ViscousOps(state.n, state.length, epsilon, advect)
    while state.t < t_end - 1e-12:
        h = min(dt, t_end - state.t)
        state = step_burgers_viscous(state, epsilon, h, advect, _ops=ops)
        if on_step:
            on_step(state)
    return state


# -- entropy reference -------------------------------------------------------------------------

def godunov_flux(ul: np.ndarray, ur: np.ndarray) -> np.ndarray:
    """Exact Riemann-solver flux for ``f(u) = u^2 / 2``."""
    fl, fr = 0.5 * ul * ul, 0.5 * ur * ur
    rarefaction = np.where((ul < 0) & (ur > 0), 0.0, np.minimum(fl, fr))
    return np.where(ul <= ur, rarefaction, np.maximum(fl, fr))


def entropy_reference(ic: str | np.ndarray, t: float, n_fine: int = 8192, length: float = 2.0,
                      boundary: str = "periodic", cfl: float = 0.45) -> tuple[np.ndarray, np.ndarray]:
    """First-order Godunov solution of inviscid Burgers; returns ``(cell centres, values)``.

    ``ic`` is ``"sine"`` (cell averages of ``sin(2 pi x / L)``), ``"riemann"``
    (1 for ``x < L/2``, else 0) or an array of initial cell averages.
    ``boundary`` is ``periodic`` or ``outflow``.
    """
    if n_fine < 4096:
        raise ValueError("the reference needs n_fine >= 4096")
    dx = length / n_fine
    edges = dx * np.arange(n_fine + 1)
    centres = 0.5 * (edges[1:] + edges[:-1])
    if isinstance(ic, str):
        if ic == "sine":
            c = 2 * np.pi / length
            u = (np.cos(c * edges[:-1]) - np.cos(c * edges[1:])) / (c * dx)
        elif ic == "riemann":
            u = np.where(centres < 0.5 * length, 1.0, 0.0)
        else:
            raise ValueError(f"unknown initial condition {ic!r}")
    else:
        u = np.asarray(ic, dtype=float).copy()
        if u.size != n_fine:
            raise ValueError("initial array must have n_fine entries")
    time = 0.0
    while time < t - 1e-14:
        dt = min(cfl * dx / max(float(np.max(np.abs(u))), 1e-12), t - time)
        if boundary == "periodic":
            flux = godunov_flux(u, np.roll(u, -1))          # interface i+1/2
            u = u - dt / dx * (flux - np.roll(flux, 1))
        elif boundary == "outflow":
            ext = np.concatenate([[u[0]], u, [u[-1]]])
            flux = godunov_flux(ext[:-1], ext[1:])          # n+1 interfaces
            u = u - dt / dx * (flux[1:] - flux[:-1])
        else:
            raise ValueError(f"unknown boundary {boundary!r}")
        time += dt
    return centres, u


def characteristics_solution(x: np.ndarray, t: float, length: float = 2.0) -> np.ndarray:
    """Pre-shock sine solution ``v = sin(c (x - v t))`` by root finding per point."""
    c = 2 * np.pi / length
    if t * c >= 1:
        raise ValueError("characteristics cross at t = L / (2 pi); no classical solution")
    out = np.empty_like(x, dtype=float)
    for i, xi in enumerate(x):
        out[i] = brentq(lambda v: v - np.sin(c * (xi - v * t)), -1.0 - 1e-12, 1.0 + 1e-12,
                        xtol=1e-15)
    return out


def shock_position(x: np.ndarray, u: np.ndarray, level: float = 0.5) -> float:
    """First location where ``u`` drops through ``level`` (linear interpolation)."""
    idx = np.nonzero((u[:-1] >= level) & (u[1:] < level))[0]
    if idx.size == 0:
        raise ValueError("no downward crossing found")
    i = idx[0]
    return float(x[i] + (u[i] - level) / (u[i] - u[i + 1]) * (x[i + 1] - x[i]))


def sample_periodic(x_ref: np.ndarray, v_ref: np.ndarray, x: np.ndarray, length: float) -> np.ndarray:
    return np.interp(x, x_ref, v_ref, period=length)


def l1_distance(state: Burgers1DState, x_ref: np.ndarray, v_ref: np.ndarray) -> float:
    ref = sample_periodic(x_ref, v_ref, state.x, state.length)
    return float(np.sum(np.abs(state.v - ref)) * state.dx)
