"""Projected-gradient solver for the fractional obstacle problem.

    minimise 𝓔(v) = ½∫ v 𝓛ₛv + ∫((β/2)|y|² − c) v   over v ≥ 0.

The minimiser is characterised by the complementarity conditions v ≥ 0,
g := 𝓛ₛv + (β/2)|y|² − c ≥ 0 and v·g = 0, measured by max |min(v, g)|.
𝓛ₛ is the whole-space operator by default, so the discrete problem is a
strictly convex quadratic on the box samples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid_spectral import Field, Grid, apply_symbol, power_symbol
from .whole_space import whole_space_operator


class InvalidInputError(ValueError):
    """Negative entries in a field that must be nonnegative."""


class ObstacleNonconvergenceError(RuntimeError):
    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class StepCollapseError(ArithmeticError):
    """Line search shrank the step below resolution."""


@dataclass(frozen=True)
class ObstacleProblem:
    grid: Grid
    s: float
    beta: float
    confinement_constant: float = 1.0
    whole_space: bool = True

    def __post_init__(self) -> None:
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if not 0.0 < self.s < 1.0:
            raise ValueError(f"s must lie in (0, 1), got {self.s}")
        if not self.confinement_constant > 0:
            raise ValueError("confinement_constant must be positive")
        radius = self.implied_radius()
        if not self.grid.side_length > 2 * radius:
            raise ValueError(
                f"box side {self.grid.side_length:.6g} must exceed twice the support radius {radius:.6g}"
            )

    def implied_radius(self) -> float:
        """R = √(2γc/β) with γ = 1 + 2s/d, the support radius of the minimiser."""
        gam = 1 + 2 * self.s / self.grid.dimension
        return math.sqrt(2 * gam * self.confinement_constant / self.beta)

    def potential(self) -> np.ndarray:
        return 0.5 * self.beta * self.grid.radius_squared() - self.confinement_constant

    def apply_operator(self, values: np.ndarray) -> np.ndarray:
        if self.whole_space:
            return whole_space_operator(self.grid, self.s).fractional_laplacian(values)
        return apply_symbol(values, self.grid, power_symbol(self.grid, self.s))


@dataclass(frozen=True)
class ObstacleSolution:
    v: Field
    energy: float
    kkt_residual: float
    iterations: int
    support_radius_estimate: float
    energy_history: tuple[float, ...] = ()


def _check_nonnegative(v: Field) -> None:
    lo = float(v.values.min())
    if lo < -1e-14:
        raise InvalidInputError(f"field must be nonnegative, minimum is {lo:.3e}")


def energy(v: Field, prob: ObstacleProblem) -> float:
    _check_nonnegative(v)
    vals = v.values
    h = prob.grid.cell_volume
    return float(h * (0.5 * np.vdot(vals, prob.apply_operator(vals)) + np.vdot(prob.potential(), vals)))


def energy_gradient(v: Field, prob: ObstacleProblem) -> Field:
    """𝓛ₛv + (β/2)|y|² − c (the L² gradient, not scaled by the cell volume)."""
    return v.with_values(prob.apply_operator(v.values) + prob.potential())


def kkt_residual(v: Field, prob: ObstacleProblem) -> float:
    return float(np.max(np.abs(np.minimum(v.values, energy_gradient(v, prob).values))))


def support_radius_estimate(v: Field, rel_threshold: float = 1e-10) -> float:
    """Radius of the largest centered ball on which v > rel_threshold·max v."""
    vals = v.values
    vmax = float(vals.max())
    if vmax <= 0:
        return 0.0
    r = v.grid.radius()
    outside = vals <= rel_threshold * vmax
    if not outside.any():
        return float(r.max())
    return float(r[outside].min())


def default_initial(prob: ObstacleProblem) -> Field:
    """(c − (β/2)|y|²)₊, a feasible point with the right support scale."""
    return Field(prob.grid, np.maximum(-prob.potential(), 0.0))


def solve(
    prob: ObstacleProblem,
    tol: float = 1e-6,
    max_iters: int = 20000,
    initial: Field | None = None,
    window: int = 5,
) -> ObstacleSolution:
    """Spectral projected gradient with Barzilai–Borwein steps.

    The nonmonotone acceptance test compares with the largest energy of the
    last `window` iterates. Along each search direction the energy is an
    exact quadratic, so the backtracking needs no extra operator calls.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    v = (default_initial(prob) if initial is None else initial).values.copy()
    if initial is not None and initial.grid != prob.grid:
        raise ValueError("initial field lives on a different grid")
    v = np.maximum(v, 0.0)
    h = prob.grid.cell_volume
    phi = prob.potential()
    Lv = prob.apply_operator(v)
    g = Lv + phi
    E = float(h * (0.5 * np.vdot(v, Lv) + np.vdot(phi, v)))
    hist = [E]
    # Cauchy step for the first iteration; BB afterwards.
    Lg = prob.apply_operator(g)
    gLg = float(np.vdot(g, Lg))
    step = float(np.vdot(g, g)) / gLg if gLg > 0 else 1.0
    for k in range(max_iters + 1):
        res = float(np.max(np.abs(np.minimum(v, g))))
        if res <= tol:
            field = Field(prob.grid, v)
            return ObstacleSolution(field, hist[-1], res, k, support_radius_estimate(field), tuple(hist))
        if k == max_iters:
            break
        d = np.maximum(v - step * g, 0.0) - v
        Ld = prob.apply_operator(d)
        gd = float(np.vdot(g, d))
        dLd = float(np.vdot(d, Ld))
        ref = max(hist[-window:])
        lam = 1.0
        while hist[-1] + h * (lam * gd + 0.5 * lam * lam * dLd) > ref + 1e-4 * h * lam * gd:
            lam *= 0.5
            if lam < 1e-14:
                raise StepCollapseError(f"line search collapsed at iteration {k}")
        v = v + lam * d
        np.maximum(v, 0.0, out=v)
        g_new = g + lam * Ld
        sv = lam * d
        yv = g_new - g
        sy = float(np.vdot(sv, yv))
        step = float(np.vdot(sv, sv)) / sy if sy > 0 else 1e3
        g = g_new
        hist.append(hist[-1] + h * (lam * gd + 0.5 * lam * lam * dLd))
    raise ObstacleNonconvergenceError(
        f"obstacle solve did not reach tol {tol:g} in {max_iters} iterations (residual {res:.3e})",
        res,
        max_iters,
    )


def radial_monotonicity_violation(v: Field) -> float:
    """Largest increase of v moving outward along the axis rays from the center."""
    vals = v.values
    c = v.grid.points_per_axis // 2
    worst = 0.0
    rays = []
    if v.grid.dimension == 1:
        rays = [vals[c:], vals[c::-1]]
    else:
        rays = [vals[c:, c], vals[c::-1, c], vals[c, c:], vals[c, c::-1], np.diag(vals)[c:], np.diag(vals)[c::-1]]
    for ray in rays:
        worst = max(worst, float(np.max(np.diff(ray), initial=0.0)))
    return worst


__all__ = [
    "InvalidInputError",
    "ObstacleNonconvergenceError",
    "ObstacleProblem",
    "ObstacleSolution",
    "StepCollapseError",
    "default_initial",
    "energy",
    "energy_gradient",
    "kkt_residual",
    "radial_monotonicity_violation",
    "solve",
    "support_radius_estimate",
]
