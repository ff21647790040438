"""Bilinear forms and right-hand sides of the alpha-regularized MHD family.

All models are evolved in terms of the filtered velocity ``u`` and the magnetic
field ``b`` (the filtered field ``B_s`` for ``lamhd_alpha``).  The velocity
equations are written for ``v = (1 - alpha^2 Lap) u`` and inverted mode-wise,
so the stiff part of every model is a diagonal Fourier symbol.

Every nonlinear term is computed pseudospectrally: fields are taken to physical
space, multiplied pointwise, transformed back, dealiased once and Leray
projected.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from .spectral import PeriodicGrid, SpectralField

MODELS = ("mhd", "mhd_alpha", "lamhd_alpha", "leray_alpha_mhd_3d", "leray_alpha_mhd_2d",
          "ml_alpha_mhd")

# Ideal invariants each model conserves.  For lamhd_alpha the cross and magnetic
# helicities are evaluated against the filtered field B_s (see diagnostics).
CONSERVED = {
    "mhd": ("E_alpha", "H_C", "H_M"),
    "mhd_alpha": ("E_alpha", "H_C", "H_M"),
    "lamhd_alpha": ("E_alpha", "H_C", "H_M_s"),
    "leray_alpha_mhd_3d": ("E_alpha", "H_C"),
    "leray_alpha_mhd_2d": ("E_alpha", "A_msq"),
    "ml_alpha_mhd": ("E_alpha", "H_M"),
}


class BlowUpError(FloatingPointError):
    """Raised when a state or step produces non-finite values."""

    def __init__(self, t: float, detail: str = ""):
        msg = f"blow-up at t={t!r}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)
        self.t = t
        self.trajectory = None


@dataclass(frozen=True)
class ModelSpec:
    model: str
    nu: float = 0.0
    eta: float = 0.0
    alpha: float = 0.0
    alpha_m: float = 0.0
    dim: int = 3

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"unknown model {self.model!r}; expected one of {MODELS}")
        for name in ("nu", "eta", "alpha", "alpha_m"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be finite and >= 0, got {v}")
        if self.alpha_m > 0 and self.model != "lamhd_alpha":
            raise ValueError("alpha_m > 0 is only meaningful for lamhd_alpha")
        if self.model == "leray_alpha_mhd_2d":
            if self.dim != 2:
                raise ValueError("leray_alpha_mhd_2d requires dim=2")
        elif self.dim != 3:
            raise ValueError(f"{self.model} requires dim=3")
        if self.model == "mhd" and self.alpha != 0:
            raise ValueError("baseline mhd requires alpha=0")

    @property
    def ideal(self) -> bool:
        """True in ideal diagnostic mode (nu = eta = 0)."""
        return self.nu == 0 and self.eta == 0

    @property
    def conserved(self) -> tuple[str, ...]:
        return CONSERVED[self.model]

    def to_dict(self) -> dict:
        return {"model": self.model, "nu": self.nu, "eta": self.eta, "alpha": self.alpha,
                "alpha_m": self.alpha_m, "dim": self.dim}

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        return cls(d["model"], float(d["nu"]), float(d["eta"]), float(d["alpha"]),
                   float(d.get("alpha_m", 0.0)), int(d.get("dim", 3)))

    def with_(self, **kw) -> "ModelSpec":
        return replace(self, **kw)


@dataclass
class SolverState:
    """Time plus spectral coefficients of ``u`` and ``b`` on a shared grid."""

    grid: PeriodicGrid
    t: float
    u_hat: np.ndarray
    b_hat: np.ndarray
    step: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def u(self) -> SpectralField:
        return SpectralField(self.grid, self.u_hat)

    @property
    def b(self) -> SpectralField:
        return SpectralField(self.grid, self.b_hat)

    def copy(self) -> "SolverState":
        return SolverState(self.grid, self.t, self.u_hat.copy(), self.b_hat.copy(), self.step,
                           dict(self.meta))

    def v_hat(self, alpha: float) -> np.ndarray:
        return self.u_hat * self.grid.helmholtz_symbol(alpha)


def make_state(grid: PeriodicGrid, u_hat: np.ndarray, b_hat: np.ndarray, t: float = 0.0) -> SolverState:
    """Build a healthy state: dealiased, projected, zero-mean, in grid precision."""
    origin = (Ellipsis,) + (0,) * grid.dim
    fields = []
    for a in (u_hat, b_hat):
        a = grid.project(grid.dealias(np.asarray(a, dtype=grid.complex_dtype)))
        a[origin] = 0
        fields.append(a.astype(grid.complex_dtype))
    return SolverState(grid, float(t), fields[0], fields[1])


# -- pseudospectral products -------------------------------------------------------

def _advect(grid: PeriodicGrid, a_hat: np.ndarray, b_hat: np.ndarray, a_phys=None,
            project: bool = True) -> np.ndarray:
    """Dealiased ``(a . grad) b`` (Leray projected unless ``project`` is False)."""
    if a_phys is None:
        a_phys = grid.inverse(a_hat)
    out = np.empty_like(b_hat)
    for j in range(b_hat.shape[0]):
        grad = grid.inverse(grid.gradient(b_hat[j]))
        out[j] = grid.forward(np.sum(a_phys * grad, axis=0))
    out = grid.dealias(out)
    return grid.project(out) if project else out


def _cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.stack([
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ])


def _rotational(grid: PeriodicGrid, a_hat: np.ndarray, b_hat: np.ndarray, project: bool = True):
    """Dealiased ``(curl b) x a``."""
    if grid.dim != 3:
        raise ValueError("rotational form is defined for 3D fields only")
    w = grid.inverse(grid.curl(b_hat))
    a = grid.inverse(a_hat)
    out = grid.dealias(grid.forward(_cross(w, a)))
    return grid.project(out) if project else out


def _mean_free(grid: PeriodicGrid, a: np.ndarray) -> np.ndarray:
    """The evolved fields have zero mean, so the k=0 part of a product is discarded."""
    a[(Ellipsis,) + (0,) * grid.dim] = 0
    return a


def _check_pair(u: SpectralField, v: SpectralField) -> None:
    if u.grid != v.grid:
        raise ValueError("fields live on different grids")
    if u.kind != "vector" or v.kind != "vector":
        raise ValueError("bilinear forms expect vector fields")


def advective_bilinear(u: SpectralField, v: SpectralField) -> SpectralField:
    """``B(u, v) = P[(u . grad) v]``."""
    _check_pair(u, v)
    return SpectralField(u.grid, _mean_free(u.grid, _advect(u.grid, u.coeffs, v.coeffs)))


def rotational_bilinear(u: SpectralField, v: SpectralField) -> SpectralField:
    """``B~(u, v) = P[(curl v) x u]`` (3D only)."""
    _check_pair(u, v)
    if u.grid.dim != 3:
        raise ValueError("rotational_bilinear is 3D only; use the advective form in 2D")
    return SpectralField(u.grid, _mean_free(u.grid, _rotational(u.grid, u.coeffs, v.coeffs)))


def vector_identity_terms(a: SpectralField, b: SpectralField) -> dict[str, np.ndarray]:
    """Dealiased, unprojected terms of ``(b.grad)a + sum_j a_j grad b_j = -b x curl a + grad(a.b)``."""
    _check_pair(a, b)
    grid = a.grid
    if grid.dim != 3:
        raise ValueError("vector identity check is 3D only")
    b_phys = grid.inverse(b.coeffs)
    a_phys = grid.inverse(a.coeffs)
    adv = _advect(grid, b.coeffs, a.coeffs, a_phys=b_phys, project=False)
    acc = np.zeros((3,) + grid.physical_shape)
    for j in range(3):
        acc += a_phys[j] * grid.inverse(grid.gradient(b.coeffs[j]))
    grad_sum = grid.dealias(grid.forward(acc))
    curl_a = grid.inverse(grid.curl(a.coeffs))
    cross = grid.dealias(grid.forward(_cross(b_phys, curl_a)))
    dot = grid.dealias(grid.forward(np.sum(a_phys * b_phys, axis=0)))
    return {"advective": adv, "transposed": grad_sum, "b_cross_curl_a": cross,
            "grad_dot": grid.gradient(dot)}


# -- model right-hand sides --------------------------------------------------------

class RhsSplit(NamedTuple):
    """Nonlinear parts and diagonal stiff symbols: ``d/dt x = N - symbol * x``."""

    nonlinear_u: np.ndarray
    nonlinear_b: np.ndarray
    linear_u: np.ndarray
    linear_b: np.ndarray

    def total(self, state: SolverState) -> tuple[np.ndarray, np.ndarray]:
        return (self.nonlinear_u - self.linear_u * state.u_hat,
                self.nonlinear_b - self.linear_b * state.b_hat)


class Model:
    """Precomputed symbols plus the nonlinear evaluator for one (spec, grid) pair."""

    def __init__(self, spec: ModelSpec, grid: PeriodicGrid):
        if grid.dim != spec.dim:
            raise ValueError(f"grid dim {grid.dim} does not match model dim {spec.dim}")
        self.spec = spec
        self.grid = grid
        k2 = grid.k2
        self.helm_u = grid.helmholtz_symbol(spec.alpha)
        self.inv_helm_u = (1.0 / self.helm_u).astype(grid.real_dtype)
        self.helm_b = grid.helmholtz_symbol(spec.alpha_m)
        self.linear_u = (spec.nu * k2).astype(grid.real_dtype)
        self.linear_b = (spec.eta * k2 * self.helm_b).astype(grid.real_dtype)
        self._nonlinear = getattr(self, "_n_" + spec.model)

    def nonlinear(self, u_hat: np.ndarray, b_hat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        nu, nb = self._nonlinear(u_hat, b_hat)
        g = self.grid
        return _mean_free(g, g.project(g.dealias(nu))), _mean_free(g, g.project(g.dealias(nb)))

    def rhs(self, state: SolverState) -> RhsSplit:
        if not (np.all(np.isfinite(state.u_hat)) and np.all(np.isfinite(state.b_hat))):
            raise BlowUpError(state.t, "non-finite state passed to rhs")
        nu, nb = self.nonlinear(state.u_hat, state.b_hat)
        return RhsSplit(nu, nb, self.linear_u, self.linear_b)

    # shared pieces
    def _induction(self, u_phys, b_phys):
        """``curl(u x b) = -B(u,b) + B(b,u)`` for solenoidal u, b (3D)."""
        g = self.grid
        return g.curl(g.dealias(g.forward(_cross(u_phys, b_phys))))

    def _lorentz(self, b_hat, b_phys, partner_phys=None):
        """``P[(curl b) x partner]``; ``B(B,B)`` when partner is b itself."""
        g = self.grid
        j = g.inverse(g.curl(b_hat))
        partner = b_phys if partner_phys is None else partner_phys
        return g.forward(_cross(j, partner))

    def _n_mhd(self, u_hat, b_hat):
        g = self.grid
        u = g.inverse(u_hat)
        b = g.inverse(b_hat)
        w = g.inverse(g.curl(u_hat))
        nu = g.forward(_cross(u, w)) + self._lorentz(b_hat, b)
        return nu, self._induction(u, b)

    def _n_mhd_alpha(self, u_hat, b_hat):
        g = self.grid
        u = g.inverse(u_hat)
        b = g.inverse(b_hat)
        q = g.inverse(g.curl(u_hat * self.helm_u))
        nu = g.forward(_cross(u, q)) + self._lorentz(b_hat, b)
        return self.inv_helm_u * g.project(g.dealias(nu)), self._induction(u, b)

    def _n_lamhd_alpha(self, u_hat, bs_hat):
        g = self.grid
        u = g.inverse(u_hat)
        bs = g.inverse(bs_hat)
        q = g.inverse(g.curl(u_hat * self.helm_u))
        # (B_s . grad) B - sum_j (B_s)_j grad B_j = (curl B) x B_s
        nu = g.forward(_cross(u, q)) + self._lorentz(bs_hat * self.helm_b, None, partner_phys=bs)
        return self.inv_helm_u * g.project(g.dealias(nu)), self._induction(u, bs)

    def _n_leray_alpha_mhd_3d(self, u_hat, b_hat):
        g = self.grid
        u = g.inverse(u_hat)
        b = g.inverse(b_hat)
        v_hat = u_hat * self.helm_u
        nu = -_advect(g, u_hat, v_hat, a_phys=u, project=False) + g.dealias(self._lorentz(b_hat, b))
        nb = (-_advect(g, u_hat, b_hat, a_phys=u, project=False)
              + _advect(g, b_hat, v_hat, a_phys=b, project=False))
        return self.inv_helm_u * g.project(nu), nb

    def _n_leray_alpha_mhd_2d(self, u_hat, b_hat):
        g = self.grid
        u = g.inverse(u_hat)
        b = g.inverse(b_hat)
        v_hat = u_hat * self.helm_u
        nu = (-_advect(g, u_hat, v_hat, a_phys=u, project=False)
              + _advect(g, b_hat, b_hat, a_phys=b, project=False))
        nb = (-_advect(g, u_hat, b_hat, a_phys=u, project=False)
              + _advect(g, b_hat, u_hat, a_phys=b, project=False))
        return self.inv_helm_u * g.project(nu), nb

    def _n_ml_alpha_mhd(self, u_hat, b_hat):
        g = self.grid
        u = g.inverse(u_hat)
        b = g.inverse(b_hat)
        v_hat = u_hat * self.helm_u
        nu = -_advect(g, v_hat, u_hat, project=False) + g.dealias(self._lorentz(b_hat, b))
        return self.inv_helm_u * g.project(nu), self._induction(u, b)


def rhs(spec: ModelSpec, state: SolverState) -> RhsSplit:
    """Nonlinear part and stiff diagonal symbols of the model's u-form equations."""
    return Model(spec, state.grid).rhs(state)
