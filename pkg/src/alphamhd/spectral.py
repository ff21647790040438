"""Periodic-box Fourier representation and exact spectral operators.

Conventions
-----------
* Forward transform is the unnormalized real-to-complex DFT (``rfftn``), the
  inverse divides by the total number of grid points.  Coefficients are
  therefore ``N_tot`` times the Fourier-series coefficients.
* Only the half spectrum along the last axis is stored; the other half is the
  complex conjugate (Hermitian symmetry of real fields).
* Vector fields carry their components on axis 0: shape ``(dim, *spectral_shape)``.
* Dealiasing keeps modes with ``|n_i| <= (N_i - 1) // 3`` on every axis, which is
  the largest cutoff ``K`` with ``3K < N`` (exact truncated convolution).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
import scipy.fft as sfft

DFT_CONVENTION = "forward=unnormalized rfftn, inverse=irfftn/N_tot, half spectrum on last axis"

_PRECISIONS = {
    "f64": (np.float64, np.complex128),
    "f32": (np.float32, np.complex64),
}


class PeriodicGrid:
    """Uniform grid on the box ``[0, L_1) x ... x [0, L_dim)``.

    Wavenumber, projector and weight arrays are computed lazily and cached;
    the grid itself is immutable.
    """

    def __init__(self, n: int | Sequence[int], length: float | Sequence[float] = 2 * np.pi,
                 dim: int | None = None, precision: str = "f64"):
        if np.isscalar(n):
            if dim is None:
                raise ValueError("dim is required when n is a scalar")
            n = (int(n),) * dim
        n = tuple(int(v) for v in n)
        dim = len(n)
        if dim not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2 or 3, got {dim}")
        if np.isscalar(length):
            length = (float(length),) * dim
        length = tuple(float(v) for v in length)
        if len(length) != dim:
            raise ValueError("length must have one entry per axis")
        for v in n:
            if v < 4 or v % 2:
                raise ValueError(f"points per axis must be even and >= 4, got {v}")
        for v in length:
            if not v > 0:
                raise ValueError(f"box length must be positive, got {v}")
        if precision not in _PRECISIONS:
            raise ValueError(f"precision must be one of {sorted(_PRECISIONS)}")
        self._n = n
        self._length = length
        self._precision = precision

    # -- identity -----------------------------------------------------------
    @property
    def n(self) -> tuple[int, ...]:
        return self._n

    @property
    def length(self) -> tuple[float, ...]:
        return self._length

    @property
    def dim(self) -> int:
        return len(self._n)

    @property
    def precision(self) -> str:
        return self._precision

    @property
    def real_dtype(self):
        return _PRECISIONS[self._precision][0]

    @property
    def complex_dtype(self):
        return _PRECISIONS[self._precision][1]

    def __eq__(self, other):
        if not isinstance(other, PeriodicGrid):
            return NotImplemented
        return (self._n, self._length, self._precision) == (other._n, other._length, other._precision)

    def __hash__(self):
        return hash((self._n, self._length, self._precision))

    def __repr__(self):
        return f"PeriodicGrid(n={self._n}, length={self._length}, precision={self._precision!r})"

    def to_dict(self) -> dict:
        return {"n": list(self._n), "length": list(self._length), "precision": self._precision}

    @classmethod
    def from_dict(cls, d: dict) -> "PeriodicGrid":
        return cls(tuple(d["n"]), tuple(d["length"]), precision=d.get("precision", "f64"))

    def with_resolution(self, n: int | Sequence[int]) -> "PeriodicGrid":
        return PeriodicGrid(n if not np.isscalar(n) else (int(n),) * self.dim,
                            self._length, precision=self._precision)

    # -- geometry -----------------------------------------------------------
    @property
    def volume(self) -> float:
        return float(np.prod(self._length))

    @property
    def n_total(self) -> int:
        return int(np.prod(self._n))

    @property
    def is_cubic(self) -> bool:
        return len(set(self._length)) == 1 and len(set(self._n)) == 1

    @property
    def fundamental(self) -> tuple[float, ...]:
        return tuple(2 * np.pi / v for v in self._length)

    @property
    def lambda1(self) -> float:
        """First Stokes eigenvalue, min over axes of ``(2 pi / L)^2``."""
        return min(k * k for k in self.fundamental)

    @property
    def dx(self) -> float:
        return min(L / n for L, n in zip(self._length, self._n))

    @property
    def physical_shape(self) -> tuple[int, ...]:
        return self._n

    @property
    def spectral_shape(self) -> tuple[int, ...]:
        return self._n[:-1] + (self._n[-1] // 2 + 1,)

    @property
    def cutoff(self) -> tuple[int, ...]:
        return tuple((v - 1) // 3 for v in self._n)

    def coordinates(self) -> list[np.ndarray]:
        axes = [L * np.arange(n) / n for L, n in zip(self._length, self._n)]
        return np.meshgrid(*axes, indexing="ij")

    # -- cached spectral arrays ----------------------------------------------
    @cached_property
    def mode_index(self) -> np.ndarray:
        """Integer wavevector ``n`` per stored mode, shape ``(dim, *spectral_shape)``."""
        idx = []
        for ax, n in enumerate(self._n):
            if ax == self.dim - 1:
                f = np.arange(n // 2 + 1)
            else:
                f = np.fft.fftfreq(n, 1.0 / n).astype(int)
            shape = [1] * self.dim
            shape[ax] = f.size
            idx.append(np.broadcast_to(f.reshape(shape), self.spectral_shape))
        return np.stack(idx).astype(int)

    @cached_property
    def k(self) -> np.ndarray:
        kf = np.array(self.fundamental).reshape((self.dim,) + (1,) * self.dim)
        return (self.mode_index * kf).astype(self.real_dtype)

    @cached_property
    def k2(self) -> np.ndarray:
        return np.sum(self.k.astype(np.float64) ** 2, axis=0).astype(self.real_dtype)

    @cached_property
    def inv_k2(self) -> np.ndarray:
        k2 = self.k2
        out = np.zeros_like(k2)
        np.divide(1.0, k2, out=out, where=k2 > 0)
        return out

    @cached_property
    def k_over_k2(self) -> np.ndarray:
        return self.k * self.inv_k2

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        keep = np.ones(self.spectral_shape, dtype=bool)
        for ax in range(self.dim):
            keep &= np.abs(self.mode_index[ax]) <= self.cutoff[ax]
        return keep

    @cached_property
    def weights(self) -> np.ndarray:
        """Parseval weights: ``sum(w * conj(f) g)`` is the physical integral of ``f g``."""
        nl = self._n[-1]
        last = self.mode_index[-1]
        mult = np.where((last == 0) | (last == nl // 2), 1.0, 2.0)
        return mult * self.volume / float(self.n_total) ** 2

    # -- array-level kernels ----------------------------------------------------
    @property
    def _axes(self) -> tuple[int, ...]:
        return tuple(range(-self.dim, 0))

    def forward(self, phys: np.ndarray) -> np.ndarray:
        return sfft.rfftn(np.asarray(phys, dtype=self.real_dtype), axes=self._axes)

    def inverse(self, spec: np.ndarray) -> np.ndarray:
        return sfft.irfftn(spec, s=self._n, axes=self._axes)

    def dealias(self, spec: np.ndarray) -> np.ndarray:
        return spec * self.dealias_mask

    def project(self, spec: np.ndarray) -> np.ndarray:
        """Apply ``I - k k^T / |k|^2`` per mode; the k=0 mode is left untouched."""
        kdot = np.sum(self.k * spec, axis=0)
        return spec - self.k_over_k2 * kdot

    def divergence(self, spec: np.ndarray) -> np.ndarray:
        return 1j * np.sum(self.k * spec, axis=0)

    def gradient(self, spec: np.ndarray) -> np.ndarray:
        return 1j * self.k * spec

    def curl(self, spec: np.ndarray) -> np.ndarray:
        """3D vector -> vector, 2D vector -> scalar, 2D scalar -> perp-gradient."""
        k = self.k
        if self.dim == 3 and spec.ndim == 4:
            return 1j * np.stack([
                k[1] * spec[2] - k[2] * spec[1],
                k[2] * spec[0] - k[0] * spec[2],
                k[0] * spec[1] - k[1] * spec[0],
            ])
        if self.dim == 2 and spec.ndim == 3:
            return 1j * (k[0] * spec[1] - k[1] * spec[0])
        if self.dim == 2 and spec.ndim == 2:
            return 1j * np.stack([-k[1] * spec, k[0] * spec])
        raise ValueError(f"curl undefined for dim={self.dim} with array of rank {spec.ndim}")

    def helmholtz_symbol(self, alpha: float) -> np.ndarray:
        return (1.0 + alpha * alpha * self.k2).astype(self.real_dtype)

    def max_divergence(self, spec: np.ndarray) -> float:
        """``max_k |k . f_k| / max_k |f_k|`` (0 for a zero field)."""
        peak = float(np.max(np.abs(spec)))
        if peak == 0.0:
            return 0.0
        return float(np.max(np.abs(np.sum(self.k * spec, axis=0)))) / peak

    def zero_mode(self, spec: np.ndarray) -> np.ndarray:
        return spec[(Ellipsis,) + (0,) * self.dim]

    def _mode_positions(self, modes: np.ndarray):
        modes = np.asarray(modes, dtype=int)
        for ax in range(self.dim):
            lim = self.n[ax] // 2
            if np.any(np.abs(modes[:, ax]) >= lim) and ax < self.dim - 1:
                raise ValueError("mode outside the grid's resolved range")
            if ax == self.dim - 1 and np.any(np.abs(modes[:, ax]) > lim):
                raise ValueError("mode outside the grid's resolved range")
        return tuple(modes[:, ax] % self.n[ax] for ax in range(self.dim - 1)), modes[:, -1]

    def gather_modes(self, spec: np.ndarray, modes: np.ndarray) -> np.ndarray:
        """Fourier-series coefficients (DFT / N_tot) at integer wavevectors, shape ``(..., M)``."""
        modes = np.asarray(modes, dtype=int)
        flip = modes[:, -1] < 0
        src = np.where(flip[:, None], -modes, modes)
        lead, last = self._mode_positions(src)
        vals = spec[(Ellipsis,) + lead + (last,)] / self.n_total
        return np.where(flip, np.conj(vals), vals)

    def scatter_modes(self, coeffs: np.ndarray, modes: np.ndarray) -> np.ndarray:
        """Inverse of :meth:`gather_modes` for a mode set closed under negation."""
        modes = np.asarray(modes, dtype=int)
        keep = modes[:, -1] >= 0
        lead, last = self._mode_positions(modes[keep])
        out = np.zeros(coeffs.shape[:-1] + self.spectral_shape, dtype=self.complex_dtype)
        out[(Ellipsis,) + lead + (last,)] = coeffs[..., keep] * self.n_total
        return out

    def inner(self, f: np.ndarray, g: np.ndarray) -> float:
        """Physical-space L2 inner product of two real fields from their coefficients."""
        return float(np.sum(self.weights * np.real(np.conj(f) * g)))

    def norm2(self, f: np.ndarray) -> float:
        return float(np.sum(self.weights * np.abs(f) ** 2))


@dataclass
class PhysicalField:
    grid: PeriodicGrid
    values: np.ndarray

    @property
    def kind(self) -> str:
        return "vector" if self.values.ndim == self.grid.dim + 1 else "scalar"


@dataclass
class SpectralField:
    """Half-spectrum DFT coefficients of a real scalar or vector field."""

    grid: PeriodicGrid
    coeffs: np.ndarray
    zero_mean: bool = True

    def __post_init__(self):
        shape = self.grid.spectral_shape
        c = self.coeffs
        if c.shape != shape and not (c.ndim == len(shape) + 1 and c.shape[1:] == shape):
            raise ValueError(f"coefficient shape {c.shape} does not match grid {shape}")
        if self.zero_mean and np.any(self.grid.zero_mode(c) != 0):
            raise ValueError("zero_mean field has a nonzero k=0 coefficient")

    @property
    def kind(self) -> str:
        return "vector" if self.coeffs.ndim == self.grid.dim + 1 else "scalar"

    def _new(self, coeffs: np.ndarray) -> "SpectralField":
        return SpectralField(self.grid, coeffs, self.zero_mean)

    def norm(self) -> float:
        return float(np.sqrt(self.grid.norm2(self.coeffs)))


def _check_finite(a: np.ndarray) -> None:
    if not np.all(np.isfinite(a)):
        raise ValueError("non-finite values in input field")


def transform(field: PhysicalField | SpectralField, direction: str,
              zero_mean: bool = False) -> SpectralField | PhysicalField:
    """Forward (physical -> spectral) or inverse transform.

    ``zero_mean`` only applies to forward transforms and pins the k=0 mode.
    """
    if direction == "forward":
        if not isinstance(field, PhysicalField):
            raise TypeError("forward transform expects a PhysicalField")
        if field.values.shape[-field.grid.dim:] != field.grid.physical_shape:
            raise ValueError("field shape does not match grid")
        _check_finite(field.values)
        coeffs = field.grid.forward(field.values)
        if zero_mean:
            coeffs[(Ellipsis,) + (0,) * field.grid.dim] = 0
        return SpectralField(field.grid, coeffs, zero_mean)
    if direction == "inverse":
        if not isinstance(field, SpectralField):
            raise TypeError("inverse transform expects a SpectralField")
        _check_finite(field.coeffs)
        return PhysicalField(field.grid, field.grid.inverse(field.coeffs))
    raise ValueError(f"direction must be 'forward' or 'inverse', got {direction!r}")


def derivative(field: SpectralField, kind: str) -> SpectralField:
    grid = field.grid
    if kind == "laplacian":
        return field._new(-grid.k2 * field.coeffs)
    if kind == "gradient":
        if field.kind != "scalar":
            raise ValueError("gradient expects a scalar field")
        return field._new(grid.gradient(field.coeffs))
    if kind == "divergence":
        if field.kind != "vector":
            raise ValueError("divergence expects a vector field")
        return field._new(grid.divergence(field.coeffs))
    if kind == "curl":
        if grid.dim == 1:
            raise ValueError("curl is undefined in 1D")
        if grid.dim == 3 and field.kind != "vector":
            raise ValueError("3D curl expects a vector field")
        return field._new(grid.curl(field.coeffs))
    raise ValueError(f"unknown derivative kind {kind!r}")


def leray_project(field: SpectralField) -> SpectralField:
    if field.kind != "vector":
        raise ValueError("Leray projection expects a vector field")
    return field._new(field.grid.project(field.coeffs))


def helmholtz(field: SpectralField, alpha: float, direction: str = "apply") -> SpectralField:
    """Multiply (``apply``) or divide (``invert``) by ``1 + alpha^2 |k|^2``."""
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    if alpha == 0:
        return field._new(field.coeffs.copy())
    sym = field.grid.helmholtz_symbol(alpha)
    if direction == "apply":
        return field._new(field.coeffs * sym)
    if direction == "invert":
        return field._new(field.coeffs / sym)
    raise ValueError(f"direction must be 'apply' or 'invert', got {direction!r}")


def dealias(field: SpectralField) -> SpectralField:
    return field._new(field.grid.dealias(field.coeffs))


def hermitian_defect(field: SpectralField) -> float:
    """Largest violation of ``c(-k) = conj(c(k))`` on the self-conjugate planes.

    Only the planes with last-axis index 0 (and Nyquist) store both ``k`` and
    ``-k``; elsewhere the symmetry is implicit in the half-spectrum storage.
    """
    grid = field.grid
    c = field.coeffs
    worst = 0.0
    nl = grid.n[-1]
    for j in (0, nl // 2):
        plane = c[..., j]
        flipped = plane
        for ax in range(grid.dim - 1):
            axis = ax + (plane.ndim - (grid.dim - 1))
            flipped = np.roll(np.flip(flipped, axis=axis), 1, axis=axis)
        worst = max(worst, float(np.max(np.abs(plane - np.conj(flipped)), initial=0.0)))
    return worst


def integer_modes(dim: int, radius: float) -> np.ndarray:
    """Nonzero integer wavevectors with Euclidean length <= radius, lexicographic order."""
    r = int(np.floor(radius))
    axes = np.meshgrid(*([np.arange(-r, r + 1)] * dim), indexing="ij")
    modes = np.stack([a.ravel() for a in axes], axis=1)
    norm2 = np.sum(modes ** 2, axis=1)
    return modes[(norm2 > 0) & (norm2 <= radius * radius + 1e-9)]


def random_solenoidal(grid: PeriodicGrid, rng: np.random.Generator, nmax: float | None = None,
                      rms: float = 1.0) -> np.ndarray:
    """Random real, zero-mean, divergence-free, dealiased vector field (coefficients).

    With ``nmax=None`` every dealiased mode is excited (white noise drawn in
    physical space).  Otherwise the field lives on integer wavevectors with
    ``|n| <= nmax`` and is drawn mode by mode, so the same seed gives the same
    field on any grid that resolves those modes.  ``rms`` is the target
    root-mean-square amplitude over the box.
    """
    if nmax is None:
        phys = rng.standard_normal((grid.dim,) + grid.physical_shape)
        spec = grid.dealias(grid.forward(phys))
    else:
        modes = integer_modes(grid.dim, nmax)
        c = rng.standard_normal((grid.dim, len(modes))) + 1j * rng.standard_normal((grid.dim, len(modes)))
        # c(-n) = conj(c(n)): average each mode with its reflected partner
        lookup = {tuple(m): i for i, m in enumerate(modes)}
        partner = np.array([lookup[tuple(-m)] for m in modes])
        c = 0.5 * (c + np.conj(c[:, partner]))
        if np.any(np.abs(modes) > np.array(grid.cutoff)):
            raise ValueError("grid does not resolve the requested modes")
        spec = grid.scatter_modes(c, modes)
    spec[(Ellipsis,) + (0,) * grid.dim] = 0
    spec = grid.project(spec)
    norm = np.sqrt(grid.norm2(spec) / grid.volume)
    if norm > 0:
        spec = spec * (rms / norm)
    return spec.astype(grid.complex_dtype)


def resample(spec: np.ndarray, src: PeriodicGrid, dst: PeriodicGrid) -> np.ndarray:
    """Map dealiased coefficients of ``src`` onto ``dst`` (zero padding or truncation).

    Both grids must describe the same box.  Only modes inside both dealias
    cutoffs are carried over.
    """
    if not np.allclose(src.length, dst.length):
        raise ValueError("grids describe different boxes")
    ranges = [np.arange(-c, c + 1) for c in np.minimum(src.cutoff, dst.cutoff)]
    axes = np.meshgrid(*ranges, indexing="ij")
    modes = np.stack([a.ravel() for a in axes], axis=1)
    modes = modes[np.any(modes != 0, axis=1)]
    return dst.scatter_modes(src.gather_modes(spec, modes), modes)
