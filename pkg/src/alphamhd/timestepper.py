"""Time integration of the stiff-diagonal + nonlinear split, and checkpoints.

Two schemes are available:

``if-rk4``
    Integrating-factor classical RK4; the diagonal linear part is integrated
    exactly through ``exp(-symbol * dt)`` factors.
``imex-cnab2``
    Crank-Nicolson on the linear part, second-order Adams-Bashforth on the
    nonlinear part (forward Euler on the first step).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__
from .models import BlowUpError, Model, ModelSpec, SolverState
from .spectral import DFT_CONVENTION, PeriodicGrid

SCHEMES = ("if-rk4", "imex-cnab2")
CHECKPOINT_MAGIC = "alphamhd-checkpoint"


@dataclass(frozen=True)
class StepperConfig:
    scheme: str = "if-rk4"
    dt: float = 1e-3
    t_end: float = 1.0
    cfl_safety: float = 0.5
    adaptive: bool = False
    nonlinear: bool = True

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not 0 < self.cfl_safety <= 1:
            raise ValueError("cfl_safety must lie in (0, 1]")

    def to_dict(self) -> dict:
        return {"scheme": self.scheme, "dt": self.dt, "t_end": self.t_end,
                "cfl_safety": self.cfl_safety, "adaptive": self.adaptive,
                "nonlinear": self.nonlinear}


def if_rk4_step(x: np.ndarray, nonlinear: Callable[[np.ndarray], np.ndarray], e_full: np.ndarray,
                e_half: np.ndarray, dt: float) -> np.ndarray:
    """One integrating-factor RK4 step of ``dx/dt = N(x) - L x``.

    ``e_full = exp(-L dt)`` and ``e_half = exp(-L dt / 2)``.
    """
    k1 = nonlinear(x)
    k2 = nonlinear(e_half * (x + 0.5 * dt * k1))
    k3 = nonlinear(e_half * x + 0.5 * dt * k2)
    k4 = nonlinear(e_full * x + dt * (e_half * k3))
    return e_full * x + (dt / 6.0) * (e_full * k1 + 2.0 * e_half * (k2 + k3) + k4)


class Stepper:
    """Advances one trajectory; owns the scheme history and factor caches."""

    def __init__(self, spec: ModelSpec, grid: PeriodicGrid, cfg: StepperConfig):
        self.spec = spec
        self.grid = grid
        self.cfg = cfg
        self.model = Model(spec, grid)
        self._factors: dict[float, tuple] = {}
        self.prev_nonlinear: tuple[np.ndarray, np.ndarray] | None = None
        self._origin = (Ellipsis,) + (0,) * grid.dim

    def _nonlinear(self, u_hat, b_hat):
        if not self.cfg.nonlinear:
            return np.zeros_like(u_hat), np.zeros_like(b_hat)
        return self.model.nonlinear(u_hat, b_hat)

    def factors(self, dt: float):
        f = self._factors.get(dt)
        if f is None:
            lu, lb = self.model.linear_u, self.model.linear_b
            if self.cfg.scheme == "if-rk4":
                f = (np.exp(-lu * dt), np.exp(-0.5 * lu * dt), np.exp(-lb * dt), np.exp(-0.5 * lb * dt))
            else:
                f = ((1 - 0.5 * dt * lu) / (1 + 0.5 * dt * lu), 1 / (1 + 0.5 * dt * lu),
                     (1 - 0.5 * dt * lb) / (1 + 0.5 * dt * lb), 1 / (1 + 0.5 * dt * lb))
            f = tuple(a.astype(self.grid.real_dtype) for a in f)
            self._factors[dt] = f
        return f

    def stable_dt(self, state: SolverState) -> float:
        """Advective CFL estimate ``safety * dx / max(|u|_inf, |b|_inf, eps)``."""
        g = self.grid
        speed = max(float(np.max(np.abs(g.inverse(state.u_hat)))),
                    float(np.max(np.abs(g.inverse(state.b_hat)))), 1e-12)
        return self.cfg.cfl_safety * g.dx / speed

    def step(self, state: SolverState, dt: float | None = None) -> SolverState:
        dt = self.cfg.dt if dt is None else dt
        g = self.grid
        if self.cfg.scheme == "if-rk4":
            eu, ehu, eb, ehb = self.factors(dt)
            e_full = np.stack([eu[None], eb[None]])
            e_half = np.stack([ehu[None], ehb[None]])

            def nl(y):
                a, b = self._nonlinear(y[0], y[1])
                return np.stack([a, b])

            x = if_rk4_step(np.stack([state.u_hat, state.b_hat]), nl, e_full, e_half, dt)
            u_new, b_new = x[0], x[1]
        else:
            au, bu, ab, bb = self.factors(dt)
            nu, nb = self._nonlinear(state.u_hat, state.b_hat)
            if self.prev_nonlinear is None:
                eu, eb = nu, nb
            else:
                eu = 1.5 * nu - 0.5 * self.prev_nonlinear[0]
                eb = 1.5 * nb - 0.5 * self.prev_nonlinear[1]
            self.prev_nonlinear = (nu, nb)
            u_new = au * state.u_hat + dt * bu * eu
            b_new = ab * state.b_hat + dt * bb * eb
        u_new = g.project(g.dealias(u_new))
        b_new = g.project(g.dealias(b_new))
        u_new[self._origin] = 0
        b_new[self._origin] = 0
        t_new = state.t + dt
        if not (np.all(np.isfinite(u_new)) and np.all(np.isfinite(b_new))):
            raise BlowUpError(t_new, f"non-finite coefficients after step from t={state.t!r}")
        return SolverState(g, t_new, u_new.astype(g.complex_dtype), b_new.astype(g.complex_dtype),
                           state.step + 1, state.meta)


def step(spec: ModelSpec, state: SolverState, cfg: StepperConfig) -> SolverState:
    """Single step from a fresh stepper (CNAB2 therefore starts with Euler)."""
    return Stepper(spec, state.grid, cfg).step(state)


# -- trajectories --------------------------------------------------------------------

@dataclass
class Hooks:
    diagnostics_every: int = 1
    checkpoint_every: int | None = None
    checkpoint_dir: str | Path | None = None
    csv_path: str | Path | None = None
    on_sample: Callable | None = None


@dataclass
class Trajectory:
    spec: ModelSpec
    cfg: StepperConfig
    state: SolverState
    records: list = field(default_factory=list)
    checkpoints: list = field(default_factory=list)
    n_steps: int = 0
    prev_nonlinear: tuple | None = None


def integrate(spec: ModelSpec, state0: SolverState, cfg: StepperConfig, hooks: Hooks | None = None,
              prev_nonlinear=None) -> Trajectory:
    """Advance ``state0`` to ``cfg.t_end`` with diagnostics and checkpoint hooks.

    Fixed-dt runs take ``round((t_end - t0) / dt)`` full steps when that is
    consistent with the interval, otherwise the last step is shortened.
    """
    from .diagnostics import invariants, write_csv

    hooks = hooks or Hooks()
    stepper = Stepper(spec, state0.grid, cfg)
    stepper.prev_nonlinear = prev_nonlinear
    state = state0
    traj = Trajectory(spec, cfg, state)
    traj.records.append(invariants(spec, state))
    if hooks.on_sample:
        hooks.on_sample(state, traj.records[-1])
    tol = 1e-9 * cfg.dt
    n = 0
    try:
        while state.t < cfg.t_end - tol:
            dt = cfg.dt
            if cfg.adaptive:
                dt = min(dt, stepper.stable_dt(state))
            remaining = cfg.t_end - state.t
            if remaining < dt * (1 - 1e-6):
                dt = remaining
            state = stepper.step(state, dt)
            n += 1
            if n % hooks.diagnostics_every == 0 or state.t >= cfg.t_end - tol:
                rec = invariants(spec, state)
                traj.records.append(rec)
                if hooks.on_sample:
                    hooks.on_sample(state, rec)
            if hooks.checkpoint_every and n % hooks.checkpoint_every == 0:
                path = Path(hooks.checkpoint_dir or ".") / f"checkpoint_{state.step:08d}.ckpt"
                save_checkpoint(path, spec, state, cfg, dt, stepper.prev_nonlinear)
                traj.checkpoints.append(path)
    except BlowUpError as exc:
        traj.state = state
        traj.n_steps = n
        exc.trajectory = traj
        if hooks.csv_path:
            write_csv(hooks.csv_path, traj.records, spec, state.grid)
        raise
    traj.state = state
    traj.n_steps = n
    traj.prev_nonlinear = stepper.prev_nonlinear
    if hooks.csv_path:
        write_csv(hooks.csv_path, traj.records, spec, state.grid)
    return traj


# -- checkpoints ------------------------------------------------------------------------
# Layout: one line of UTF-8 JSON (header) terminated by '\n', then the arrays
# listed in header["arrays"], in order, as little-endian complex128 (each value
# two IEEE-754 float64: real, imag), C order over (component, *spectral_shape).
# The spectral shape is the rfftn half spectrum: axes in grid order, all but the
# last in FFT order (0, 1, ..., N/2-1, -N/2, ..., -1), last axis 0..N/2.

def save_checkpoint(path, spec: ModelSpec, state: SolverState, cfg: StepperConfig,
                    dt: float | None = None, prev_nonlinear=None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    arrays = [("u_hat", state.u_hat), ("b_hat", state.b_hat)]
    if prev_nonlinear is not None:
        arrays += [("prev_nonlinear_u", prev_nonlinear[0]), ("prev_nonlinear_b", prev_nonlinear[1])]
    header = {
        "format": CHECKPOINT_MAGIC,
        "code_version": __version__,
        "dft_convention": DFT_CONVENTION,
        "grid": state.grid.to_dict(),
        "spec": spec.to_dict(),
        "t": state.t,
        "step": state.step,
        "dt": cfg.dt if dt is None else dt,
        "scheme": cfg.scheme,
        "stepper": cfg.to_dict(),
        "byte_order": "little",
        "arrays": [{"name": name, "shape": list(a.shape), "dtype": "<c16"} for name, a in arrays],
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        for _, a in arrays:
            fh.write(np.ascontiguousarray(a, dtype="<c16").tobytes())
    return path


def load_checkpoint(path) -> tuple[ModelSpec, SolverState, dict]:
    """Return ``(spec, state, header)``; the header also carries any CNAB2 history."""
    with open(path, "rb") as fh:
        line = fh.readline()
        header = json.loads(line.decode())
        if header.get("format") != CHECKPOINT_MAGIC:
            raise ValueError(f"{path} is not a checkpoint file")
        arrays = {}
        for entry in header["arrays"]:
            count = int(np.prod(entry["shape"]))
            buf = fh.read(16 * count)
            if len(buf) != 16 * count:
                raise ValueError(f"truncated checkpoint {path}")
            arrays[entry["name"]] = np.frombuffer(buf, dtype="<c16").reshape(entry["shape"])
    grid = PeriodicGrid.from_dict(header["grid"])
    spec = ModelSpec.from_dict(header["spec"])
    cast = grid.complex_dtype
    state = SolverState(grid, float(header["t"]), arrays["u_hat"].astype(cast),
                        arrays["b_hat"].astype(cast), int(header["step"]))
    if "prev_nonlinear_u" in arrays:
        header["prev_nonlinear"] = (arrays["prev_nonlinear_u"].astype(cast),
                                    arrays["prev_nonlinear_b"].astype(cast))
    return spec, state, header

