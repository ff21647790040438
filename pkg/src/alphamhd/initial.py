"""Bundled initial conditions.

* ``taylor_green_mhd`` (3D): velocity ``(sin x cos y cos z, -cos x sin y cos z, 0)``
  scaled by ``u0``, plus a seeded random solenoidal magnetic field supported on
  integer wavevectors with ``|n| <= 3`` whose energy is ``b_ratio`` times the kinetic
  energy of the velocity.
* ``orszag_tang`` (2D): ``u = (-sin y, sin x)``, ``B = (-sin y, sin 2x)``.
* ``random`` (2D/3D): seeded random solenoidal ``u`` and ``B`` on ``|n| <= 4``.

Coordinates are scaled by the fundamental wavenumber, so the formulas hold on
any box length.  These are conventional test profiles.
"""

from __future__ import annotations

import numpy as np

from .models import SolverState, make_state
from .spectral import PeriodicGrid, random_solenoidal

IC_NAMES = ("taylor_green_mhd", "orszag_tang", "random")


def _scaled_coords(grid: PeriodicGrid):
    return [x * k for x, k in zip(grid.coordinates(), grid.fundamental)]


def taylor_green_mhd(grid: PeriodicGrid, seed: int = 0, u0: float = 1.0,
                     b_ratio: float = 0.5) -> SolverState:
    if grid.dim != 3:
        raise ValueError("taylor_green_mhd needs a 3D grid")
    x, y, z = _scaled_coords(grid)
    u = u0 * np.stack([np.sin(x) * np.cos(y) * np.cos(z), -np.cos(x) * np.sin(y) * np.cos(z),
                       np.zeros_like(x)])
    u_hat = grid.forward(u)
    rng = np.random.default_rng(seed)
    b_hat = random_solenoidal(grid, rng, nmax=3.0)
    eu = grid.norm2(grid.dealias(u_hat))
    eb = grid.norm2(b_hat)
    if eb > 0:
        b_hat = b_hat * np.sqrt(b_ratio * eu / eb)
    return make_state(grid, u_hat, b_hat)


def orszag_tang(grid: PeriodicGrid) -> SolverState:
    if grid.dim != 2:
        raise ValueError("orszag_tang needs a 2D grid")
    x, y = _scaled_coords(grid)
    u = np.stack([-np.sin(y), np.sin(x)])
    b = np.stack([-np.sin(y), np.sin(2 * x)])
    return make_state(grid, grid.forward(u), grid.forward(b))


def random_state(grid: PeriodicGrid, seed: int = 0, kmax: float = 4.0) -> SolverState:
    rng = np.random.default_rng(seed)
    return make_state(grid, random_solenoidal(grid, rng, nmax=kmax),
                      random_solenoidal(grid, rng, nmax=kmax))


def make_initial(name: str, grid: PeriodicGrid, seed: int = 0) -> SolverState:
    if name == "taylor_green_mhd":
        return taylor_green_mhd(grid, seed)
    if name == "orszag_tang":
        return orszag_tang(grid)
    if name == "random":
        return random_state(grid, seed)
    raise ValueError(f"unknown initial condition {name!r}; expected one of {IC_NAMES}")
