"""Periodic uniform grids, fields, and Fourier-multiplier operators.

All operators act on physical-space sample arrays. Transforms use the
real-to-complex FFT along the last axis; the layout is internal.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class GridMismatchError(ValueError):
    """Raised when fields living on different grids are combined."""


@dataclass(frozen=True)
class Grid:
    """Periodic box [-L/2, L/2)^d sampled with n points per axis.

    Sample j sits at x_j = (j - n/2)·h, so index n/2 is the box center.
    """

    dimension: int
    points_per_axis: int
    side_length: float

    def __post_init__(self) -> None:
        if self.dimension not in (1, 2):
            raise ValueError(f"dimension must be 1 or 2, got {self.dimension}")
        n = self.points_per_axis
        if not isinstance(n, (int, np.integer)) or n < 16 or n & (n - 1):
            raise ValueError(f"points_per_axis must be a power of two >= 16, got {n}")
        if not np.isfinite(self.side_length) or self.side_length <= 0:
            raise ValueError(f"side_length must be positive, got {self.side_length}")
        object.__setattr__(self, "points_per_axis", int(n))
        object.__setattr__(self, "side_length", float(self.side_length))

    @property
    def spacing(self) -> float:
        return self.side_length / self.points_per_axis

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points_per_axis,) * self.dimension

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.dimension

    def axis(self) -> np.ndarray:
        """1D coordinates measured from the box center."""
        n = self.points_per_axis
        return (np.arange(n) - n // 2) * self.spacing

    def coordinates(self) -> tuple[np.ndarray, ...]:
        x = self.axis()
        if self.dimension == 1:
            return (x,)
        return tuple(np.meshgrid(x, x, indexing="ij"))

    def radius_squared(self) -> np.ndarray:
        return sum(c**2 for c in self.coordinates())

    def radius(self) -> np.ndarray:
        return np.sqrt(self.radius_squared())

    def frequencies(self) -> np.ndarray:
        """Angular frequencies 2πk/L in FFT order."""
        n = self.points_per_axis
        return 2.0 * np.pi * np.fft.fftfreq(n, d=self.spacing)

    def rescaled(self, factor: float) -> "Grid":
        """Same samples on a box whose side is multiplied by ``factor``."""
        return Grid(self.dimension, self.points_per_axis, self.side_length * factor)


def _check_values(grid: Grid, values: np.ndarray) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.shape != grid.shape:
        if arr.size == grid.points_per_axis**grid.dimension:
            arr = arr.reshape(grid.shape)
        else:
            raise ValueError(f"expected {grid.shape} samples, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("field values must be finite")
    return arr


@dataclass(frozen=True)
class Field:
    """Real samples on a grid with a time stamp."""

    grid: Grid
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", _check_values(self.grid, self.values))
        object.__setattr__(self, "time", float(self.time))

    def with_values(self, values: np.ndarray, time: float | None = None) -> "Field":
        return Field(self.grid, values, self.time if time is None else time)

    def __add__(self, other: "Field") -> "Field":
        require_same_grid(self, other)
        return self.with_values(self.values + other.values)

    def __sub__(self, other: "Field") -> "Field":
        require_same_grid(self, other)
        return self.with_values(self.values - other.values)

    def __mul__(self, scalar: float) -> "Field":
        return self.with_values(self.values * float(scalar))

    __rmul__ = __mul__


@dataclass(frozen=True)
class VectorField:
    """d component arrays on a grid."""

    grid: Grid
    components: tuple[np.ndarray, ...]
    time: float = 0.0

    def __post_init__(self) -> None:
        comps = tuple(_check_values(self.grid, c) for c in self.components)
        if len(comps) != self.grid.dimension:
            raise ValueError(
                f"expected {self.grid.dimension} components, got {len(comps)}"
            )
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "time", float(self.time))


def require_same_grid(*fields: Field | VectorField) -> Grid:
    grid = fields[0].grid
    for f in fields[1:]:
        if f.grid != grid:
            raise GridMismatchError(f"grid mismatch: {grid} vs {f.grid}")
    return grid


def constant_field(grid: Grid, value: float, time: float = 0.0) -> Field:
    return Field(grid, np.full(grid.shape, float(value)), time)


def from_function(grid: Grid, func, time: float = 0.0) -> Field:
    """Sample ``func(*coordinates)`` on the grid."""
    return Field(grid, np.broadcast_to(func(*grid.coordinates()), grid.shape).copy(), time)


@dataclass(frozen=True)
class _Spectral:
    """Cached wavenumber arrays in rfftn layout."""

    k: tuple[np.ndarray, ...]
    ik: tuple[np.ndarray, ...] = field(repr=False)
    k2: np.ndarray = field(repr=False)


@functools.lru_cache(maxsize=32)
def spectral_data(grid: Grid) -> _Spectral:
    n = grid.points_per_axis
    full = grid.frequencies()
    half = 2.0 * np.pi * np.fft.rfftfreq(n, d=grid.spacing)
    if grid.dimension == 1:
        ks = (half,)
    else:
        ks = (full[:, None], half[None, :])
    iks = []
    for k in ks:
        ik = 1j * k.copy()
        # Odd derivatives drop the Nyquist mode so outputs stay real.
        ik[np.isclose(np.abs(k), np.pi / grid.spacing)] = 0.0
        iks.append(ik)
    k2 = sum(k**2 for k in ks)
    k2 = np.broadcast_to(k2, _rshape(grid)).copy()
    return _Spectral(ks, tuple(iks), k2)


def _rshape(grid: Grid) -> tuple[int, ...]:
    n = grid.points_per_axis
    return (n // 2 + 1,) if grid.dimension == 1 else (n, n // 2 + 1)


def forward(values: np.ndarray) -> np.ndarray:
    return np.fft.rfftn(values)


def inverse(coeffs: np.ndarray, grid: Grid) -> np.ndarray:
    return np.fft.irfftn(coeffs, s=grid.shape, axes=tuple(range(grid.dimension)))


def power_symbol(grid: Grid, sigma: float) -> np.ndarray:
    """|ξ|^{2σ} with the zero mode set to 0 (any sign of σ)."""
    k2 = spectral_data(grid).k2
    out = np.zeros_like(k2)
    nz = k2 > 0
    out[nz] = k2[nz] ** sigma
    return out


def apply_symbol(values: np.ndarray, grid: Grid, symbol: np.ndarray) -> np.ndarray:
    return inverse(forward(values) * symbol, grid)


def apply_fractional_power(f: Field, sigma: float) -> Field:
    """Multiply Fourier coefficients by |ξ|^{2σ}; the mean is removed."""
    if not 0.0 < sigma <= 2.0:
        raise ValueError(f"sigma must lie in (0, 2], got {sigma}")
    return f.with_values(apply_symbol(f.values, f.grid, power_symbol(f.grid, sigma)))


def apply_inverse_power(f: Field, sigma: float) -> Field:
    """Multiply nonzero Fourier modes by |ξ|^{-2σ}; the zero mode is dropped."""
    if not 0.0 < sigma < 1.0:
        raise ValueError(f"sigma must lie in (0, 1), got {sigma}")
    return f.with_values(apply_symbol(f.values, f.grid, power_symbol(f.grid, -sigma)))


def riesz_gradient(f: Field, s: float) -> VectorField:
    """Components with multipliers i ξ_j |ξ|^s."""
    if not 0.0 < s < 1.0:
        raise ValueError(f"s must lie in (0, 1), got {s}")
    spec = spectral_data(f.grid)
    fh = forward(f.values) * power_symbol(f.grid, s / 2.0)
    comps = tuple(inverse(fh * ik, f.grid) for ik in spec.ik)
    return VectorField(f.grid, comps, f.time)


def gradient_values(values: np.ndarray, grid: Grid) -> tuple[np.ndarray, ...]:
    fh = forward(values)
    return tuple(inverse(fh * ik, grid) for ik in spectral_data(grid).ik)


def divergence_values(components: Sequence[np.ndarray], grid: Grid) -> np.ndarray:
    spec = spectral_data(grid)
    acc = sum(forward(c) * ik for c, ik in zip(components, spec.ik))
    return inverse(acc, grid)


def gradient(f: Field) -> VectorField:
    return VectorField(f.grid, gradient_values(f.values, f.grid), f.time)


def divergence(v: VectorField) -> Field:
    return Field(v.grid, divergence_values(v.components, v.grid), v.time)


def laplacian(f: Field) -> Field:
    """Spectral Laplacian with symbol -|ξ|²."""
    return f.with_values(apply_symbol(f.values, f.grid, -spectral_data(f.grid).k2))


def dealias(f: Field) -> Field:
    """Zero all modes with |k_j| > n/3 on any axis (2/3 rule)."""
    grid = f.grid
    kmax = (np.pi / grid.spacing) * 2.0 / 3.0
    mask = np.ones(_rshape(grid), dtype=bool)
    for k in spectral_data(grid).k:
        mask &= np.broadcast_to(np.abs(k) <= kmax, mask.shape)
    return f.with_values(inverse(forward(f.values) * mask, grid))


def inner_product(f: Field, g: Field) -> float:
    """⟨f, g⟩ = h^d Σ f g."""
    grid = require_same_grid(f, g)
    return float(np.vdot(f.values, g.values).real * grid.cell_volume)


def fourier_inner_product(f: Field, g: Field) -> float:
    """⟨f, g⟩ evaluated from rfft coefficients (Plancherel)."""
    grid = require_same_grid(f, g)
    return _fourier_pairing(forward(f.values), forward(g.values), grid)


def _fourier_pairing(fh: np.ndarray, gh: np.ndarray, grid: Grid) -> float:
    n = grid.points_per_axis
    w = np.full(fh.shape[-1], 2.0)
    w[0] = 1.0
    if n % 2 == 0:
        w[-1] = 1.0
    total = np.sum((fh * np.conj(gh)).real * w)
    return float(total * grid.cell_volume / n**grid.dimension)


def seminorm_squared(f: Field, sigma: float) -> float:
    """Σ |ξ|^{2σ}|f̂|², i.e. ∫|𝓛_{σ/2} f|² on the torus."""
    fh = forward(f.values)
    return _fourier_pairing(fh * power_symbol(f.grid, sigma), fh, f.grid)


def l2_norm(f: Field) -> float:
    return float(np.sqrt(inner_product(f, f)))
