"""Whole-space fractional operators for compactly supported grid data.

The periodic symbol |ξ|^{2s} acts on the periodic extension of a field. For a
field supported inside the box, the free-space operator differs from the
periodic one by the interaction with the periodic images. That difference is
a convolution with a kernel that is smooth on the box, evaluated here by Ewald
summation and applied as a zero-padded linear convolution.

    𝓛ₛ^free f = 𝓛ₛ^per f + C(d,s) h^d (f ⋆ K_img),
        K_img(z) = Σ_{k≠0} |z − kL|^{−d−2s},
    (−Δ)^{−s}_free f = (−Δ)^{−s}_per f − h^d (f ⋆ H),
        H(z) = G_per(z) − c'(d,s)|z|^{2s−d},

with G_per the zero-mean periodic Riesz kernel and c' the Riesz constant.
"""

from __future__ import annotations

import functools
import itertools
import math

import numpy as np
from scipy import special

from .grid_spectral import (
    Field,
    Grid,
    apply_symbol,
    power_symbol,
    spectral_data,
)

# Ewald splitting: real-space terms decay like exp(-_EWALD_C |z - kL|²/L²),
# reciprocal terms like exp(-π² m² / _EWALD_C).
_EWALD_C = 36.0
_EWALD_MMAX = 12


def kernel_constant(d: int, s: float) -> float:
    """C(d,s) = 4^s Γ(d/2+s) / (π^{d/2} |Γ(−s)|)."""
    if not 0.0 < s < 1.0:
        raise ValueError(f"s must lie in (0, 1), got {s}")
    return 4.0**s * math.gamma(d / 2 + s) / (math.pi ** (d / 2) * abs(math.gamma(-s)))


def riesz_constant(d: int, s: float) -> float:
    """c'(d,s) = Γ(d/2−s) / (4^s π^{d/2} Γ(s)), kernel of (−Δ)^{−s}."""
    if not (0.0 < s < 1.0 and d > 2 * s):
        raise ValueError(f"Riesz potential needs 0 < s < 1 and d > 2s (d={d}, s={s})")
    return math.gamma(d / 2 - s) / (4.0**s * math.pi ** (d / 2) * math.gamma(s))


def _quadrant(grid: Grid) -> tuple[np.ndarray, ...]:
    """Offsets z ∈ [0, L]^d on the grid spacing, as broadcastable arrays."""
    n = grid.points_per_axis
    z = np.arange(n + 1) * grid.spacing
    if grid.dimension == 1:
        return (z,)
    return (z[:, None], z[None, :])


def _reciprocal_sum(grid: Grid, weights) -> np.ndarray:
    """Σ_m F(|ξ_m|²) cos(ξ_m·z) over |m_i| ≤ MMAX, on the quadrant offsets."""
    d, L = grid.dimension, grid.side_length
    m = np.arange(-_EWALD_MMAX, _EWALD_MMAX + 1)
    xi = 2.0 * np.pi * m / L
    z = np.arange(grid.points_per_axis + 1) * grid.spacing
    E = np.cos(np.outer(z, xi))
    if d == 1:
        return E @ weights(xi**2)
    xi2 = xi[:, None] ** 2 + xi[None, :] ** 2
    return E @ weights(xi2) @ E.T


def _real_space_sum(grid: Grid, term, origin_term) -> np.ndarray:
    d, L = grid.dimension, grid.side_length
    zs = _quadrant(grid)
    out = np.zeros(grid.points_per_axis + 1 if d == 1 else (grid.points_per_axis + 1,) * 2)
    for k in itertools.product((-1, 0, 1), repeat=d):
        r2 = sum((zi - ki * L) ** 2 for zi, ki in zip(zs, k))
        r2 = np.broadcast_to(r2, out.shape)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = out + (origin_term(r2) if not any(k) else term(r2))
    return out


def image_kernel_quadrant(grid: Grid, s: float) -> np.ndarray:
    """K_img(z) = Σ_{k≠0}|z − kL|^{−d−2s} for z ∈ [0, L]^d (non-finite at the images)."""
    d, L = grid.dimension, grid.side_length
    nu = (d + 2 * s) / 2.0
    eta = _EWALD_C / L**2

    def term(r2):
        t = special.gammaincc(nu, eta * r2) * r2 ** (-nu)
        return np.where(r2 > 0, t, np.inf)

    def origin_term(r2):
        t = -special.gammainc(nu, eta * r2) * r2 ** (-nu)
        return np.where(r2 > 0, t, -(eta**nu) / special.gamma(nu + 1))

    def weights(xi2):
        x = xi2 / (4 * eta)
        with np.errstate(divide="ignore", invalid="ignore"):
            # Γ(−s, x) from Γ(1−s, x) by the recurrence Γ(a+1,x) = aΓ(a,x) + x^a e^{−x}.
            g = (special.gamma(1 - s) * special.gammaincc(1 - s, x) - x ** (-s) * np.exp(-x)) / (-s)
            w = (xi2 / 4) ** s * g
        w = np.where(xi2 > 0, w, eta**s / s)
        return w * math.pi ** (d / 2) / (special.gamma(nu) * L**d)

    return _real_space_sum(grid, term, origin_term) + _reciprocal_sum(grid, weights)


def riesz_remainder_quadrant(grid: Grid, s: float) -> np.ndarray:
    """H(z) = G_per(z) − c'|z|^{2s−d} for z ∈ [0, L]^d (non-finite at the images)."""
    d, L = grid.dimension, grid.side_length
    a = d / 2.0 - s
    cp = riesz_constant(d, s)
    eta = L**2 / (4 * _EWALD_C)

    def term(r2):
        t = cp * r2 ** (s - d / 2) * special.gammaincc(a, r2 / (4 * eta))
        return np.where(r2 > 0, t, np.inf)

    def origin_term(r2):
        t = -cp * r2 ** (s - d / 2) * special.gammainc(a, r2 / (4 * eta))
        return np.where(r2 > 0, t, -cp * (4 * eta) ** (-a) / special.gamma(a + 1))

    def weights(xi2):
        with np.errstate(divide="ignore", invalid="ignore"):
            w = xi2 ** (-s) * special.gammaincc(s, eta * xi2)
        return np.where(xi2 > 0, w, 0.0) / L**d

    shift = eta**s / (special.gamma(s + 1) * L**d)
    return _real_space_sum(grid, term, origin_term) + _reciprocal_sum(grid, weights) - shift


def _padded_kernel_transform(grid: Grid, quadrant: np.ndarray, scale: float) -> np.ndarray:
    """rfftn of the even kernel laid out for a 2n-periodic linear convolution."""
    n = grid.points_per_axis
    idx = np.arange(2 * n)
    idx = np.minimum(idx, 2 * n - idx)
    table = np.where(np.isfinite(quadrant), quadrant, 0.0)
    # Offsets of magnitude L never occur between two box samples.
    if grid.dimension == 1:
        table[n] = 0.0
        full = table[idx]
    else:
        table[n, :] = 0.0
        table[:, n] = 0.0
        full = table[np.ix_(idx, idx)]
    return np.fft.rfftn(full * scale)


def _linear_convolve(values: np.ndarray, kernel_hat: np.ndarray, grid: Grid) -> np.ndarray:
    n = grid.points_per_axis
    padded_shape = (2 * n,) * grid.dimension
    padded = np.zeros(padded_shape)
    box = (slice(0, n),) * grid.dimension
    padded[box] = values
    out = np.fft.irfftn(np.fft.rfftn(padded) * kernel_hat, s=padded_shape, axes=tuple(range(grid.dimension)))
    return out[box]


class WholeSpaceOperator:
    """𝓛ₛ and (−Δ)^{−s} for fields supported inside the box, treated as fields on ℝᵈ."""

    def __init__(self, grid: Grid, s: float):
        if not 0.0 < s < 1.0:
            raise ValueError(f"s must lie in (0, 1), got {s}")
        self.grid = grid
        self.s = float(s)
        self.symbol = power_symbol(grid, s)
        scale = kernel_constant(grid.dimension, s) * grid.cell_volume
        self._image_hat = _padded_kernel_transform(grid, image_kernel_quadrant(grid, s), scale)
        self._riesz_hat: np.ndarray | None = None

    def fractional_laplacian(self, values: np.ndarray) -> np.ndarray:
        periodic = apply_symbol(values, self.grid, self.symbol)
        return periodic + _linear_convolve(values, self._image_hat, self.grid)

    def riesz_potential(self, values: np.ndarray) -> np.ndarray:
        if self._riesz_hat is None:
            quad = riesz_remainder_quadrant(self.grid, self.s)
            self._riesz_hat = _padded_kernel_transform(self.grid, quad, -self.grid.cell_volume)
        periodic = apply_symbol(values, self.grid, power_symbol(self.grid, -self.s))
        return periodic + _linear_convolve(values, self._riesz_hat, self.grid)

    def quadratic_form(self, values: np.ndarray) -> float:
        """∫ f 𝓛ₛ f."""
        return float(np.vdot(values, self.fractional_laplacian(values)).real * self.grid.cell_volume)


@functools.lru_cache(maxsize=16)
def whole_space_operator(grid: Grid, s: float) -> WholeSpaceOperator:
    return WholeSpaceOperator(grid, float(s))


def fractional_laplacian(f: Field, s: float, whole_space: bool = True) -> Field:
    """𝓛ₛ f, treating f as compactly supported in ℝᵈ (default) or as periodic."""
    if whole_space:
        return f.with_values(whole_space_operator(f.grid, s).fractional_laplacian(f.values))
    if not 0.0 < s < 1.0:
        raise ValueError(f"s must lie in (0, 1), got {s}")
    return f.with_values(apply_symbol(f.values, f.grid, power_symbol(f.grid, s)))


def riesz_potential(f: Field, s: float, whole_space: bool = True) -> Field:
    """(−Δ)^{−s} f; the periodic variant drops the zero mode."""
    d = f.grid.dimension
    if not (0.0 < s < 1.0 and d > 2 * s):
        raise ValueError(f"inverse power needs 0 < s < 1 and d > 2s (d={d}, s={s})")
    if whole_space:
        return f.with_values(whole_space_operator(f.grid, s).riesz_potential(f.values))
    return f.with_values(apply_symbol(f.values, f.grid, power_symbol(f.grid, -s)))


def boundary_fraction(f: Field) -> float:
    """max |f| on the outer quarter of the box relative to max |f|."""
    scale = float(np.max(np.abs(f.values)))
    if scale == 0.0:
        return 0.0
    L = f.grid.side_length
    outer = np.zeros(f.grid.shape, dtype=bool)
    for c in f.grid.coordinates():
        outer |= np.abs(c) >= L / 4
    return float(np.max(np.abs(f.values[outer])) / scale)


__all__ = [
    "WholeSpaceOperator",
    "boundary_fraction",
    "fractional_laplacian",
    "image_kernel_quadrant",
    "kernel_constant",
    "riesz_constant",
    "riesz_potential",
    "riesz_remainder_quadrant",
    "spectral_data",
    "whole_space_operator",
]
