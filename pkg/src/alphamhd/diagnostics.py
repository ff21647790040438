"""Invariants, dissipation functionals, energy balance and field-health metrics.

Integrals are evaluated as spectral sums with the Parseval weights of
:class:`~alphamhd.spectral.PeriodicGrid`; :func:`physical_quadrature` gives the
same quantities by grid quadrature for cross-checking.

Norms follow the usual conventions: ``||f||`` is the L2 norm over the box,
``||f||_V = ||grad f||`` and ``A = -Lap`` on solenoidal fields.  The record
keeps the raw squared norms ``grad_u_sq``, ``Au_sq``, ``grad_B_sq`` so every
term of the energy balance can be rebuilt.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np
from scipy.integrate import cumulative_simpson, cumulative_trapezoid

from .models import ModelSpec, SolverState
from .spectral import PeriodicGrid, SpectralField

NA = "NA"


@dataclass
class DiagnosticsRecord:
    t: float
    E_alpha: float
    H_C: float
    H_M: float | None
    H_M_s: float | None
    A_msq: float | None
    diss_u: float
    diss_B: float
    grad_u_sq: float
    Au_sq: float
    grad_B_sq: float
    div_u_max: float
    div_B_max: float
    mean_u: float
    mean_B: float
    enstrophy_q: float

    def finite(self) -> bool:
        return all(v is None or math.isfinite(v) for v in asdict(self).values())


COLUMNS = tuple(f.name for f in fields(DiagnosticsRecord))
UNITS = {
    "t": "time", "E_alpha": "energy", "H_C": "energy", "H_M": "length*energy",
    "H_M_s": "length*energy", "A_msq": "length^2*energy", "diss_u": "energy/time",
    "diss_B": "energy/time", "grad_u_sq": "energy/length^2", "Au_sq": "energy/length^4",
    "grad_B_sq": "energy/length^2", "div_u_max": "relative", "div_B_max": "relative",
    "mean_u": "relative", "mean_B": "relative", "enstrophy_q": "energy/length^2",
}


def _vector_potential(grid: PeriodicGrid, b_hat: np.ndarray) -> np.ndarray:
    return grid.curl(b_hat) * grid.inv_k2


def vector_potential(b: SpectralField, tol: float = 1e-10) -> SpectralField:
    """Coulomb-gauge, zero-mean ``A`` with ``curl A = B``: ``A_k = i k x B_k / |k|^2``."""
    grid = b.grid
    if grid.dim != 3 or b.kind != "vector":
        raise ValueError("vector_potential expects a 3D vector field")
    if grid.max_divergence(b.coeffs) > tol:
        raise ValueError("B is not solenoidal; vector potential undefined")
    return SpectralField(grid, _vector_potential(grid, b.coeffs))


def magnetic_potential(b: SpectralField) -> SpectralField:
    """Zero-mean ``psi`` with ``B = perp-grad psi = (-d_y psi, d_x psi)`` (2D)."""
    grid = b.grid
    if grid.dim != 2 or b.kind != "vector":
        raise ValueError("magnetic_potential expects a 2D vector field")
    return SpectralField(grid, -grid.curl(b.coeffs) * grid.inv_k2)


def invariants(spec: ModelSpec, state: SolverState) -> DiagnosticsRecord:
    g = state.grid
    w = g.weights
    k2 = g.k2
    u2 = np.sum(np.abs(state.u_hat) ** 2, axis=0)
    b2 = np.sum(np.abs(state.b_hat) ** 2, axis=0)
    hu = g.helmholtz_symbol(spec.alpha)
    hb = g.helmholtz_symbol(spec.alpha_m)
    ub = np.sum(np.real(np.conj(state.u_hat) * state.b_hat), axis=0)

    def s(a):
        return float(np.sum(w * a))

    grad_u_sq = s(k2 * u2)
    Au_sq = s(k2 * k2 * u2)
    if spec.model == "lamhd_alpha":
        b_full2 = hb * hb * b2
        grad_B_sq = s(k2 * b_full2)
        E = 0.5 * (s(hu * u2) + s(hb * b2))
        diss_u = spec.nu * (grad_u_sq + spec.alpha ** 2 * Au_sq)
    elif spec.model == "leray_alpha_mhd_3d":
        grad_B_sq = s(k2 * b2)
        E = 0.5 * (s(hu * hu * u2) + s(b2))
        diss_u = spec.nu * s(k2 * hu * hu * u2)
    else:
        grad_B_sq = s(k2 * b2)
        E = 0.5 * (s(hu * u2) + s(b2))
        diss_u = spec.nu * (grad_u_sq + spec.alpha ** 2 * Au_sq)
    # H_C pairs v with the evolved magnetic field (B_s for lamhd_alpha)
    H_C = 0.5 * s(hu * ub)

    H_M = H_M_s = A_msq = None
    if g.dim == 3:
        b_full = state.b_hat * hb
        a_full = _vector_potential(g, b_full)
        H_M = 0.5 * g.inner(a_full, b_full)
        if spec.model == "lamhd_alpha":
            H_M_s = 0.5 * g.inner(_vector_potential(g, state.b_hat), state.b_hat)
        enstrophy = s(k2 * hu * hu * u2)
    else:
        psi = -g.curl(state.b_hat * hb) * g.inv_k2
        A_msq = 0.5 * g.norm2(psi)
        enstrophy = s(k2 * hu * hu * u2)

    def rel_mean(a):
        peak = float(np.max(np.abs(a)))
        return 0.0 if peak == 0 else float(np.max(np.abs(g.zero_mode(a)))) / peak

    return DiagnosticsRecord(
        t=float(state.t), E_alpha=E, H_C=H_C, H_M=H_M, H_M_s=H_M_s, A_msq=A_msq,
        diss_u=diss_u, diss_B=spec.eta * grad_B_sq, grad_u_sq=grad_u_sq, Au_sq=Au_sq,
        grad_B_sq=grad_B_sq, div_u_max=g.max_divergence(state.u_hat),
        div_B_max=g.max_divergence(state.b_hat), mean_u=rel_mean(state.u_hat),
        mean_B=rel_mean(state.b_hat), enstrophy_q=enstrophy,
    )


def physical_quadrature(spec: ModelSpec, state: SolverState) -> dict[str, float]:
    """E^alpha, H_C and (2D) the mean-square potential by grid quadrature."""
    g = state.grid
    dv = g.volume / g.n_total
    u = g.inverse(state.u_hat)
    v = g.inverse(state.u_hat * g.helmholtz_symbol(spec.alpha))
    b_evolved = g.inverse(state.b_hat)
    b = g.inverse(state.b_hat * g.helmholtz_symbol(spec.alpha_m))
    if spec.model == "leray_alpha_mhd_3d":
        kinetic = np.sum(v * v)
    else:
        kinetic = np.sum(v * u)
    out = {
        "E_alpha": 0.5 * dv * float(kinetic + np.sum(b * b_evolved)),
        "H_C": 0.5 * dv * float(np.sum(v * b_evolved)),
    }
    if g.dim == 2:
        psi = g.inverse(-g.curl(state.b_hat * g.helmholtz_symbol(spec.alpha_m)) * g.inv_k2)
        out["A_msq"] = 0.5 * dv * float(np.sum(psi * psi))
    return out


# -- energy balance -----------------------------------------------------------------

@dataclass
class EnergyBalance:
    t: np.ndarray
    residual: np.ndarray
    quadrature: str

    @property
    def max_abs(self) -> float:
        return float(np.max(np.abs(self.residual)))


def energy_balance_residual(series, quadrature: str = "auto") -> EnergyBalance:
    """Relative residual of ``E(t) + int_{t0}^t (diss_u + diss_B) ds - E(t0)``.

    For viscous models this vanishes (equality); for baseline MHD weak
    solutions only ``<= 0`` is guaranteed, so the sign is kept.  ``auto`` uses
    composite Simpson with three or more samples and the trapezoid otherwise.
    """
    t = np.array([r.t for r in series], dtype=float)
    if t.size == 0:
        raise ValueError("empty series")
    if t.size > 2:
        h = np.diff(t)
        if np.max(np.abs(h - h[0])) > 1e-9 * max(abs(h[0]), 1e-300):
            raise ValueError("energy balance needs uniformly sampled diagnostics")
    energy = np.array([r.E_alpha for r in series], dtype=float)
    diss = np.array([r.diss_u + r.diss_B for r in series], dtype=float)
    if quadrature == "auto":
        quadrature = "simpson" if t.size >= 3 else "trapezoid"
    if t.size == 1:
        integral = np.zeros(1)
    elif quadrature == "simpson":
        integral = np.concatenate([[0.0], cumulative_simpson(diss, x=t)])
    elif quadrature == "trapezoid":
        integral = cumulative_trapezoid(diss, t, initial=0.0)
    else:
        raise ValueError(f"unknown quadrature {quadrature!r}")
    e0 = energy[0]
    if e0 == 0:
        raise ValueError("initial energy is zero; relative residual undefined")
    return EnergyBalance(t, (energy + integral - e0) / e0, quadrature)


def relative_drift(series, name: str) -> float:
    """``max_t |q(t) - q(0)| / |q(0)|`` for one recorded quantity."""
    vals = np.array([getattr(r, name) for r in series], dtype=float)
    ref = abs(vals[0]) if vals[0] != 0 else float(np.max(np.abs(vals)))
    if ref == 0:
        return 0.0
    return float(np.max(np.abs(vals - vals[0])) / ref)


# -- spectra ------------------------------------------------------------------------

def energy_spectrum(spec: ModelSpec, state: SolverState) -> tuple[np.ndarray, np.ndarray]:
    """Kinetic and magnetic energy binned into shells ``|k| / k_min in [n, n+1)``.

    Shell sums add up to the total energy as reported by :func:`invariants`.
    """
    g = state.grid
    w = g.weights
    hu = g.helmholtz_symbol(spec.alpha)
    hb = g.helmholtz_symbol(spec.alpha_m)
    u2 = np.sum(np.abs(state.u_hat) ** 2, axis=0)
    b2 = np.sum(np.abs(state.b_hat) ** 2, axis=0)
    if spec.model == "leray_alpha_mhd_3d":
        ek = 0.5 * w * hu * hu * u2
    else:
        ek = 0.5 * w * hu * u2
    eb = 0.5 * w * hb * b2
    shell = np.floor(np.sqrt(g.k2) / min(g.fundamental) + 1e-9).astype(int)
    nbins = int(shell.max()) + 1
    return (np.bincount(shell.ravel(), ek.ravel(), nbins),
            np.bincount(shell.ravel(), eb.ravel(), nbins))


# -- CSV ------------------------------------------------------------------------------

def _fmt(v) -> str:
    if v is None:
        return NA
    return repr(float(v))


def csv_text(records, spec: ModelSpec, grid: PeriodicGrid) -> str:
    buf = io.StringIO()
    meta = dict(spec.to_dict())
    meta.update(n="x".join(map(str, grid.n)), length="x".join(repr(v) for v in grid.length),
                precision=grid.precision, conserved="|".join(spec.conserved),
                mode="ideal-diagnostic" if spec.ideal else "viscous",
                scope="cubic-box" if grid.is_cubic else "anisotropic-box-extension")
    buf.write("# " + " ".join(f"{k}={v}" for k, v in meta.items()) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([f"{c} [{UNITS[c]}]" for c in COLUMNS])
    for r in records:
        writer.writerow([_fmt(getattr(r, c)) for c in COLUMNS])
    return buf.getvalue()


def write_csv(path, records, spec: ModelSpec, grid: PeriodicGrid) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(csv_text(records, spec, grid))
    return path


def read_csv(path) -> list[DiagnosticsRecord]:
    lines = [ln for ln in Path(path).read_text().splitlines() if not ln.startswith("#")]
    reader = csv.reader(lines)
    header = next(reader)
    names = [h.split(" [")[0] for h in header]
    out = []
    for row in reader:
        vals = {n: (None if x == NA else float(x)) for n, x in zip(names, row)}
        out.append(DiagnosticsRecord(**vals))
    return out
