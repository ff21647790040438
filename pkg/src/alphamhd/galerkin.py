"""Dense Galerkin truncation: the brute-force oracle for the pseudospectral kernel.

The mode set is every nonzero integer wavevector with ``|n_i| <= m`` on each
axis.  States are Fourier-series coefficients (not DFT-scaled) of shape
``(dim, M)``.  Products are explicit double sums over the ordered pairs
``(p, q)`` with ``p + q`` in the mode set; nothing here uses an FFT.

The nonlinear terms are written in the form the equations are stated in
(e.g. ``(B_s . grad) B - sum_j (B_s)_j grad B_j`` for LAMHD-alpha rather than a
curl identity), so agreement with :mod:`alphamhd.models` is a real check.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .models import ModelSpec, SolverState, make_state
from .spectral import PeriodicGrid

DEFAULT_MAX_PAIRS = 100_000


class BudgetExceeded(ValueError):
    pass


def grid_for(m: int, dim: int, length=2 * np.pi) -> PeriodicGrid:
    """Smallest even grid whose two-thirds cutoff retains ``|n_i| <= m``."""
    n = 3 * m + 1
    n += n % 2
    return PeriodicGrid(max(n, 4), length, dim=dim)


@dataclass
class GalerkinSystem:
    m: int
    spec: ModelSpec
    length: tuple
    modes: np.ndarray                 # (M, dim) integer wavevectors
    k: np.ndarray                     # (dim, M) physical wavenumbers
    pairs: tuple = field(repr=False)  # (ip, iq, ik) index arrays

    @property
    def dim(self) -> int:
        return self.modes.shape[1]

    @property
    def size(self) -> int:
        return self.modes.shape[0]

    @property
    def volume(self) -> float:
        return float(np.prod(self.length))

    @property
    def k2(self) -> np.ndarray:
        return np.sum(self.k ** 2, axis=0)

    # -- linear algebra on the span ---------------------------------------------
    def project(self, x: np.ndarray) -> np.ndarray:
        """Leray projector per mode (the Galerkin ``P_m`` for vector inputs)."""
        return x - self.k * (np.sum(self.k * x, axis=0) / self.k2)

    def inner(self, x: np.ndarray, y: np.ndarray) -> float:
        return float(self.volume * np.sum(np.real(np.conj(x) * y)))

    def helmholtz(self, alpha: float) -> np.ndarray:
        return 1.0 + alpha * alpha * self.k2

    # -- convolutions -----------------------------------------------------------------
    def _scatter(self, contrib: np.ndarray, ik: np.ndarray) -> np.ndarray:
        out = np.zeros((contrib.shape[0], self.size), dtype=complex)
        for c in range(contrib.shape[0]):
            out[c] = (np.bincount(ik, contrib[c].real, self.size)
                      + 1j * np.bincount(ik, contrib[c].imag, self.size))
        return out

    def advect(self, a: np.ndarray, b: np.ndarray, project: bool = True) -> np.ndarray:
        """``(a . grad) b`` summed over ``p + q = k``: ``i (a_p . q) b_q``."""
        ip, iq, ik = self.pairs
        coef = 1j * np.sum(a[:, ip] * self.k[:, iq], axis=0)
        out = self._scatter(coef * b[:, iq], ik)
        return self.project(out) if project else out

    def transposed(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """``sum_j a_j grad b_j`` (unprojected): ``i q (a_p . b_q)``."""
        ip, iq, ik = self.pairs
        dot = np.sum(a[:, ip] * b[:, iq], axis=0)
        return self._scatter(1j * self.k[:, iq] * dot, ik)

    def curl(self, x: np.ndarray) -> np.ndarray:
        k = self.k
        return 1j * np.stack([k[1] * x[2] - k[2] * x[1], k[2] * x[0] - k[0] * x[2],
                              k[0] * x[1] - k[1] * x[0]])

    def cross(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Convolution of the pointwise cross product ``a x b``."""
        ip, iq, ik = self.pairs
        ap, bq = a[:, ip], b[:, iq]
        prod = np.stack([ap[1] * bq[2] - ap[2] * bq[1], ap[2] * bq[0] - ap[0] * bq[2],
                         ap[0] * bq[1] - ap[1] * bq[0]])
        return self._scatter(prod, ik)

    def dot(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        ip, iq, ik = self.pairs
        return self._scatter(np.sum(a[:, ip] * b[:, iq], axis=0)[None], ik)[0]

    def bilinear(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        """``P_m B(u, v)``."""
        return self.advect(u, v)

    def rotational(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        """``P_m B~(u, v) = P_m[(curl v) x u]``."""
        if self.dim != 3:
            raise ValueError("rotational form is 3D only")
        return self.project(self.cross(self.curl(v), u))

    # -- conversions ---------------------------------------------------------------------
    def from_grid(self, grid: PeriodicGrid, spec_array: np.ndarray) -> np.ndarray:
        return grid.gather_modes(spec_array, self.modes)

    def to_grid(self, grid: PeriodicGrid, coeffs: np.ndarray) -> np.ndarray:
        return grid.scatter_modes(coeffs, self.modes)

    def support_leak(self, grid: PeriodicGrid, spec_array: np.ndarray) -> float:
        """Largest coefficient of ``spec_array`` outside the mode set (series scaling)."""
        back = self.to_grid(grid, self.from_grid(grid, spec_array))
        return float(np.max(np.abs(spec_array - back), initial=0.0)) / grid.n_total


def assemble(m: int, spec: ModelSpec, length=2 * np.pi,
             max_pairs: int = DEFAULT_MAX_PAIRS) -> GalerkinSystem:
    """Enumerate the mode set and every interacting pair ``(p, q, p + q)``."""
    if m < 1:
        raise ValueError("m must be >= 1")
    dim = spec.dim
    length = (float(length),) * dim if np.isscalar(length) else tuple(float(v) for v in length)
    side = 2 * m + 1
    axes = np.meshgrid(*([np.arange(-m, m + 1)] * dim), indexing="ij")
    box = np.stack([a.ravel() for a in axes], axis=1)
    nonzero = np.any(box != 0, axis=1)
    modes = box[nonzero]
    count = len(modes)
    lookup = -np.ones(side ** dim, dtype=np.int64)
    flat = np.ravel_multi_index(tuple((modes + m).T), (side,) * dim)
    lookup[flat] = np.arange(count)

    # per-axis admissible pairs, then their product set
    per_axis = sum(side - abs(d) for d in range(-m, m + 1))
    estimate = per_axis ** dim
    if estimate > max_pairs:
        raise BudgetExceeded(f"mode set m={m}, dim={dim} needs about {estimate} interacting pairs "
                             f"(budget {max_pairs}); pass max_pairs>={estimate} to proceed")
    ip_all, iq_all = np.meshgrid(np.arange(count), np.arange(count), indexing="ij")
    ip_all, iq_all = ip_all.ravel(), iq_all.ravel()
    s = modes[ip_all] + modes[iq_all]
    inside = np.all(np.abs(s) <= m, axis=1) & np.any(s != 0, axis=1)
    ip, iq, s = ip_all[inside], iq_all[inside], s[inside]
    ik = lookup[np.ravel_multi_index(tuple((s + m).T), (side,) * dim)]
    kf = np.array([2 * np.pi / L for L in length])
    k = (modes * kf).T.astype(float)
    return GalerkinSystem(m, spec, length, modes, k, (ip, iq, ik))


def _check_support(sys: GalerkinSystem, u: np.ndarray, b: np.ndarray) -> None:
    for x in (u, b):
        if x.shape != (sys.dim, sys.size):
            raise ValueError(f"state of shape {x.shape} is not supported on the mode set "
                             f"({sys.dim}, {sys.size})")


def oracle_nonlinear(sys: GalerkinSystem, u: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Nonlinear parts of ``du/dt`` and ``db/dt`` by dense convolution."""
    _check_support(sys, u, b)
    spec = sys.spec
    hu = sys.helmholtz(spec.alpha)
    v = u * hu
    model = spec.model
    if model == "mhd":
        fu = -sys.bilinear(u, u) + sys.bilinear(b, b)
        fb = -sys.bilinear(u, b) + sys.bilinear(b, u)
    elif model == "mhd_alpha":
        fu = -sys.rotational(u, v) + sys.bilinear(b, b)
        fb = -sys.bilinear(u, b) + sys.bilinear(b, u)
    elif model == "lamhd_alpha":
        bf = b * sys.helmholtz(spec.alpha_m)
        lorentz = sys.project(sys.advect(b, bf, project=False) - sys.transposed(b, bf))
        fu = -sys.rotational(u, v) + lorentz
        fb = -sys.bilinear(u, b) + sys.bilinear(b, u)
    elif model == "leray_alpha_mhd_3d":
        fu = -sys.bilinear(u, v) + sys.bilinear(b, b)
        fb = -sys.bilinear(u, b) + sys.bilinear(b, v)
    elif model == "leray_alpha_mhd_2d":
        fu = -sys.bilinear(u, v) + sys.bilinear(b, b)
        fb = -sys.bilinear(u, b) + sys.bilinear(b, u)
    elif model == "ml_alpha_mhd":
        fu = -sys.bilinear(v, u) + sys.bilinear(b, b)
        fb = -sys.bilinear(u, b) + sys.bilinear(b, u)
    else:  # pragma: no cover - ModelSpec validates names
        raise ValueError(model)
    return fu / hu, fb


def oracle_linear(sys: GalerkinSystem) -> tuple[np.ndarray, np.ndarray]:
    spec = sys.spec
    return spec.nu * sys.k2, spec.eta * sys.k2 * sys.helmholtz(spec.alpha_m)


def oracle_rhs(sys: GalerkinSystem, u: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Full time derivative of the truncated system."""
    fu, fb = oracle_nonlinear(sys, u, b)
    lu, lb = oracle_linear(sys)
    return fu - lu * u, fb - lb * b


def integrate_oracle(sys: GalerkinSystem, u0: np.ndarray, b0: np.ndarray, t_end: float,
                     rtol: float = 1e-13, atol: float = 1e-15, t_eval=None):
    """Dense high-order (DOP853) solve of the Galerkin ODE; returns ``(u, b)`` at ``t_end``."""
    shape = u0.shape

    def f(_t, y):
        z = y.view(complex)
        u = z[: u0.size].reshape(shape)
        b = z[u0.size:].reshape(shape)
        du, db = oracle_rhs(sys, u, b)
        return np.concatenate([du.ravel(), db.ravel()]).view(float)

    y0 = np.concatenate([u0.ravel(), b0.ravel()]).astype(complex).view(float)
    sol = solve_ivp(f, (0.0, t_end), y0, method="DOP853", rtol=rtol, atol=atol, t_eval=t_eval)
    if not sol.success:
        raise RuntimeError(f"oracle integration failed: {sol.message}")
    z = sol.y[:, -1].copy().view(complex)
    return z[: u0.size].reshape(shape), z[u0.size:].reshape(shape)


# -- identity suite -----------------------------------------------------------------------

# advective_skew           (B(u,v), w) = -(B(u,w), v)
# advective_self           (B(u,v), v) = 0
# rotational_vs_advective  (B~(u,v), w) = (B(u,v), w) - (B(w,v), u)
# rotational_self          (B~(u,v), u) = 0
# vector_identity          (b.grad)a + sum_j a_j grad b_j = -b x curl a + grad(a.b)
IDENTITIES = ("advective_skew", "advective_self", "rotational_vs_advective", "rotational_self",
              "vector_identity")


@dataclass
class IdentityReport:
    backend: str
    trials: int
    seed: int
    max_residual: dict
    tolerance: float
    bound_ratios: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(v <= self.tolerance for v in self.max_residual.values())

    def to_text(self) -> str:
        lines = [f"identity suite ({self.backend}), trials={self.trials}, seed={self.seed}, "
                 f"tolerance={self.tolerance:.1e}"]
        for name, r in self.max_residual.items():
            lines.append(f"  {name:<26} max residual {r:.3e}  {'PASS' if r <= self.tolerance else 'FAIL'}")
        for name, r in self.bound_ratios.items():
            lines.append(f"  {name:<26} max bound ratio {r:.3e}  (informational)")
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["identity", "backend", "trials", "max_residual"])
        for name, r in self.max_residual.items():
            w.writerow([name, self.backend, self.trials, repr(r)])
        return buf.getvalue()


class _OracleOps:
    def __init__(self, sys: GalerkinSystem):
        self.s = sys

    def B(self, u, v):
        return self.s.bilinear(u, v)

    def Bt(self, u, v):
        return self.s.rotational(u, v)

    def inner(self, x, y):
        return self.s.inner(x, y)

    def rms(self, x):
        return np.sqrt(self.inner(x, x) / self.s.volume)

    def grad_rms(self, x):
        return np.sqrt(np.sum(self.s.k2 * np.abs(x) ** 2))

    def identity_terms(self, a, b):
        s = self.s
        adv = s.advect(b, a, project=False)
        trans = s.transposed(a, b)
        cross = s.cross(b, s.curl(a))
        grad = 1j * s.k * s.dot(a, b)[None]
        return adv, trans, cross, grad

    def norm(self, x):
        return np.sqrt(self.inner(x, x))

    def random(self, rng, grid):
        from .spectral import random_solenoidal
        return self.s.from_grid(grid, random_solenoidal(grid, rng))


class _SpectralOps:
    def __init__(self, grid: PeriodicGrid):
        self.g = grid

    def B(self, u, v):
        from .models import _advect
        return _advect(self.g, u, v)

    def Bt(self, u, v):
        from .models import _rotational
        return _rotational(self.g, u, v)

    def inner(self, x, y):
        return self.g.inner(x, y)

    def rms(self, x):
        return np.sqrt(self.inner(x, x) / self.g.volume)

    def grad_rms(self, x):
        return np.sqrt(float(np.sum(self.g.weights * self.g.k2 * np.abs(x) ** 2)) / self.g.volume)

    def identity_terms(self, a, b):
        from .models import vector_identity_terms
        from .spectral import SpectralField
        t = vector_identity_terms(SpectralField(self.g, a), SpectralField(self.g, b))
        return t["advective"], t["transposed"], t["b_cross_curl_a"], t["grad_dot"]

    def norm(self, x):
        return np.sqrt(self.inner(x, x))

    def random(self, rng, grid):
        from .spectral import random_solenoidal
        return random_solenoidal(self.g, rng)


def identity_suite(sys: GalerkinSystem | None = None, trials: int = 100, seed: int = 0,
                   backend: str = "oracle", grid: PeriodicGrid | None = None,
                   tolerance: float = 1e-12) -> IdentityReport:
    """Check the trilinear identities of ``B`` and ``B~`` on seeded random fields.

    Trilinear residuals are normalized by ``|Omega| rms(u) rms(grad v) rms(w)``,
    the natural size of each term.  The vector identity is checked before
    projection, relative to the sum of the L2 norms of its four terms.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if backend == "oracle":
        if sys is None:
            raise ValueError("oracle backend needs an assembled system")
        grid = grid_for(sys.m, sys.dim, sys.length)
        ops = _OracleOps(sys)
        volume = sys.volume
        dim = sys.dim
    elif backend == "pseudospectral":
        if grid is None:
            raise ValueError("pseudospectral backend needs a grid")
        ops = _SpectralOps(grid)
        volume = grid.volume
        dim = grid.dim
    else:
        raise ValueError(f"unknown backend {backend!r}")
    rng = np.random.default_rng(seed)
    worst = {name: 0.0 for name in IDENTITIES if dim == 3 or name.startswith("advective")}
    ratios = {"advective_trilinear_bound": 0.0}
    for _ in range(trials):
        u, v, w = (ops.random(rng, grid) for _ in range(3))
        scale_uvw = volume * ops.rms(u) * ops.grad_rms(v) * ops.rms(w)
        scale_wvu = volume * ops.rms(w) * ops.grad_rms(v) * ops.rms(u)
        scale_uwv = volume * ops.rms(u) * ops.grad_rms(w) * ops.rms(v)
        buv = ops.B(u, v)
        r1 = abs(ops.inner(buv, w) + ops.inner(ops.B(u, w), v)) / max(scale_uvw, scale_uwv)
        r2 = abs(ops.inner(buv, v)) / (volume * ops.rms(u) * ops.grad_rms(v) * ops.rms(v))
        worst["advective_skew"] = max(worst["advective_skew"], r1)
        worst["advective_self"] = max(worst["advective_self"], r2)
        # informational: |(B(u,v),w)| / (|u|^1/2 |u|_V^1/2 |v|_V |w|_V)
        nu_, gu = ops.norm(u), ops.grad_rms(u) * np.sqrt(volume)
        gv, gw = ops.grad_rms(v) * np.sqrt(volume), ops.grad_rms(w) * np.sqrt(volume)
        ratios["advective_trilinear_bound"] = max(ratios["advective_trilinear_bound"], abs(ops.inner(buv, w)) / (np.sqrt(nu_ * gu) * gv * gw))
        if dim == 3:
            btuv = ops.Bt(u, v)
            r3 = abs(ops.inner(btuv, w) - ops.inner(buv, w) + ops.inner(ops.B(w, v), u))
            r3 /= max(scale_uvw, scale_wvu)
            r4 = abs(ops.inner(btuv, u)) / (volume * ops.rms(u) * ops.grad_rms(v) * ops.rms(u))
            adv, trans, cross, grad = ops.identity_terms(u, v)
            res = adv + trans + cross - grad
            size = sum(ops.norm(t) for t in (adv, trans, cross, grad))
            r5 = ops.norm(res) / size
            worst["rotational_vs_advective"] = max(worst["rotational_vs_advective"], r3)
            worst["rotational_self"] = max(worst["rotational_self"], r4)
            worst["vector_identity"] = max(worst["vector_identity"], r5)
    return IdentityReport(backend, trials, seed, worst, tolerance, ratios)


# -- helpers for cross-checks ------------------------------------------------------------

def state_to_oracle(sys: GalerkinSystem, state: SolverState) -> tuple[np.ndarray, np.ndarray]:
    leak = max(sys.support_leak(state.grid, state.u_hat), sys.support_leak(state.grid, state.b_hat))
    scale = max(float(np.max(np.abs(state.u_hat))), float(np.max(np.abs(state.b_hat))), 1e-300)
    if leak > 1e-14 * scale / state.grid.n_total:
        raise ValueError("state has support outside the Galerkin mode set")
    return sys.from_grid(state.grid, state.u_hat), sys.from_grid(state.grid, state.b_hat)


def oracle_to_state(sys: GalerkinSystem, grid: PeriodicGrid, u: np.ndarray, b: np.ndarray,
                    t: float = 0.0) -> SolverState:
    return make_state(grid, sys.to_grid(grid, u), sys.to_grid(grid, b), t)
