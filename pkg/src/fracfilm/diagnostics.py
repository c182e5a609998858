"""Functionals and identity residuals for grid fields.

Quadratic forms use the whole-space operator, the same discrete operator the
stepper uses, so the discrete dissipation identities hold exactly.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .constants_profiles import ConstantSet
from .grid_spectral import Field, VectorField, gradient_values, require_same_grid
from .whole_space import whole_space_operator


@dataclass(frozen=True)
class DiagnosticsRecord:
    time: float
    mass: float
    min_value: float
    first_moment: float
    centroid: tuple[float, ...]
    second_moment: float
    entropy_ulogu: float
    entropy_feps: float
    hs_energy: float
    h1s_dissipation: float
    pohozaev_lhs: float
    pohozaev_rhs: float
    rescaled_E: float
    fp_energy: float
    l1_to_target: float | None
    picard_iters: int

    def to_dict(self) -> dict:
        out = asdict(self)
        out["centroid"] = list(self.centroid)
        return out


def mass(f: Field) -> float:
    return float(f.values.sum() * f.grid.cell_volume)


def moment(f: Field, k: int) -> float:
    """∫|x|^k f for k ∈ {1, 2}, x measured from the box center."""
    if k not in (1, 2):
        raise ValueError(f"moment order must be 1 or 2, got {k}")
    r2 = f.grid.radius_squared()
    weight = np.sqrt(r2) if k == 1 else r2
    return float(np.sum(weight * f.values) * f.grid.cell_volume)


def centroid(f: Field) -> tuple[float, ...]:
    """∫x f / ∫f (zeros for a field of zero mass)."""
    m = mass(f)
    if m == 0.0:
        return (0.0,) * f.grid.dimension
    h = f.grid.cell_volume
    return tuple(float(np.sum(c * f.values) * h / m) for c in f.grid.coordinates())


def entropy_ulogu(f: Field) -> float:
    """∫ f log f with 0 log 0 = 0; negative samples contribute nothing."""
    y = np.maximum(f.values, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        integrand = np.where(y > 0, y * np.log(np.where(y > 0, y, 1.0)), 0.0)
    return float(integrand.sum() * f.grid.cell_volume)


def feps_pointwise(y, epsilon: float) -> np.ndarray:
    """f_ε with f_ε'' = 1/(y⁺ + ε) and f_ε(1) = f_ε'(1) = 0."""
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    y = np.asarray(y, dtype=float)
    e = epsilon
    l1e = math.log1p(e)
    yp = np.maximum(y, 0.0)
    pos = (yp + e) * np.log(yp + e) - (yp + e) - (1 + e) * l1e + (1 + e) - (yp - 1) * l1e
    f0 = e * math.log(e) - e - (1 + e) * l1e + (1 + e) + l1e
    neg = f0 + math.log(e / (1 + e)) * y + y * y / (2 * e)
    return np.where(y >= 0, pos, neg)


def entropy_feps(f: Field, epsilon: float) -> float:
    return float(feps_pointwise(f.values, epsilon).sum() * f.grid.cell_volume)


def hs_energy(f: Field, s: float) -> float:
    """½∫|𝓛_{s/2} f|² = ½∫ f 𝓛ₛf."""
    return 0.5 * whole_space_operator(f.grid, s).quadratic_form(f.values)


def _forward_difference(values: np.ndarray, axis: int, h: float) -> np.ndarray:
    return (np.roll(values, -1, axis=axis) - values) / h


def h1s_dissipation(f: Field, s: float) -> float:
    """∫|𝓛_{s/2}∇f|² with the staggered difference gradient."""
    op = whole_space_operator(f.grid, s)
    h = f.grid.spacing
    return float(sum(op.quadratic_form(_forward_difference(f.values, a, h)) for a in range(f.grid.dimension)))


def _dilation(f: Field) -> np.ndarray:
    """x·∇f with the spectral gradient."""
    grads = gradient_values(f.values, f.grid)
    return sum(c * g for c, g in zip(f.grid.coordinates(), grads))


def pohozaev_residual(f: Field, s: float) -> tuple[float, float]:
    """(((d−2s)/2)∫|𝓛_{s/2}f|², −∫(𝓛ₛf)(x·∇f))."""
    d = f.grid.dimension
    op = whole_space_operator(f.grid, s)
    p = op.fractional_laplacian(f.values)
    h = f.grid.cell_volume
    lhs = 0.5 * (d - 2 * s) * float(np.vdot(f.values, p)) * h
    rhs = -float(np.vdot(p, _dilation(f))) * h
    return lhs, rhs


def pm_pohozaev_residual(f: Field, s: float) -> tuple[float, float]:
    """(((d−2s)/2)∫|(−Δ)^{−s/2}f|², −∫f(x·∇p)) with p = (−Δ)^{−s}f on ℝᵈ."""
    d = f.grid.dimension
    if not d > 2 * s:
        raise ValueError(f"inverse power needs d > 2s (d={d}, s={s})")
    op = whole_space_operator(f.grid, s)
    p = op.riesz_potential(f.values)
    h = f.grid.cell_volume
    lhs = 0.5 * (d - 2 * s) * float(np.vdot(f.values, p)) * h
    rhs = -float(np.vdot(f.values, _dilation(f.with_values(p)))) * h
    return lhs, rhs


def rescaled_energy_E(f: Field, t: float, cset: ConstantSet) -> float:
    """((1+t)^{1−2β}/2)∫|𝓛_{s/2}f|² + (β(1+t)^{−2β}/2)∫|x|²f."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    b = cset.beta
    T = 1.0 + t
    return T ** (1 - 2 * b) * hs_energy(f, cset.s) + 0.5 * b * T ** (-2 * b) * moment(f, 2)


def fp_energy(v: Field, cset: ConstantSet) -> float:
    """𝓔(v) = ½∫ v𝓛ₛv + ∫((β/2)|y|² − 1)v.

    Same functional as the obstacle energy, but slightly negative samples of
    an ε-regularised run are accepted.
    """
    h = v.grid.cell_volume
    phi = 0.5 * cset.beta * v.grid.radius_squared() - 1.0
    return hs_energy(v, cset.s) + float(np.vdot(phi, v.values) * h)


def dissipation_density(
    u: Field,
    cset: ConstantSet,
    threshold: float | None = None,
    fokker_planck: bool = False,
) -> tuple[VectorField, float]:
    """u^{1/2}∇q on edges with both ends above threshold, zero elsewhere.

    q = 𝓛ₛu, plus (β/2)|y|² in Fokker–Planck mode. The density lives on the
    staggered points x + h/2 (stored at index i, as the stepper's flux is):
    component a is ((u_i + u_{i+e_a})/2)^{1/2} D₊q, with β y exact at the
    midpoints. The second output is the mass fraction on {u > threshold},
    whose default is 1e-8·max u.
    """
    vals = u.values
    if threshold is None:
        threshold = 1e-8 * float(vals.max())
    if not threshold > 0:
        raise ValueError("threshold must be positive")
    grid = u.grid
    q = whole_space_operator(grid, cset.s).fractional_laplacian(vals)
    h = grid.spacing
    inside = vals > threshold
    comps = []
    for a, c in enumerate(grid.coordinates()):
        nxt = np.roll(vals, -1, axis=a)
        edge = inside & (nxt > threshold)
        dq = (np.roll(q, -1, axis=a) - q) / h
        if fokker_planck:
            dq = dq + cset.beta * (c + h / 2)
        root = np.sqrt(np.where(edge, 0.5 * (vals + nxt), 0.0))
        comps.append(np.where(edge, root * dq, 0.0))
    total = float(vals.sum())
    covered = float(vals[inside].sum()) / total if total != 0 else 1.0
    return VectorField(grid, tuple(comps), u.time), covered


def density_l2(xi: VectorField) -> float:
    h = xi.grid.cell_volume
    return float(math.sqrt(sum(float(np.sum(c * c)) for c in xi.components) * h))


def l1_distance(f: Field, g: Field) -> float:
    grid = require_same_grid(f, g)
    return float(np.abs(f.values - g.values).sum() * grid.cell_volume)


def second_moment_balance(trajectory, d: int | None = None, s: float | None = None) -> float:
    """max over interior samples of |d/dt ½∫|x|²u − (d+2s)·½∫|𝓛_{s/2}u|²| / |right side|.

    The derivative is the central difference of the sampled second moments, so
    the samples must be uniformly spaced in time. d and s default to the
    trajectory metadata.
    """
    meta = getattr(trajectory, "metadata", {})
    d = meta.get("d") if d is None else d
    s = meta.get("s") if s is None else s
    if d is None or s is None:
        raise ValueError("dimension and s are required")
    recs = [r[1] if isinstance(r, tuple) else r for r in trajectory]
    if len(recs) < 3:
        raise ValueError("second-moment balance needs at least 3 samples")
    t = np.array([r.time for r in recs])
    dts = np.diff(t)
    if np.max(np.abs(dts - dts.mean())) > 1e-9 * max(1.0, abs(dts.mean())):
        raise ValueError("samples must be uniformly spaced in time")
    half_m2 = 0.5 * np.array([r.second_moment for r in recs])
    energy = np.array([r.hs_energy for r in recs])
    lhs = (half_m2[2:] - half_m2[:-2]) / (t[2:] - t[:-2])
    rhs = (d + 2 * s) * energy[1:-1]
    worst = 0.0
    for a, b in zip(lhs, rhs):
        if b == 0.0:
            if a != 0.0:
                worst = max(worst, math.inf)
            continue
        worst = max(worst, abs(a - b) / abs(b))
    return worst


def make_record(state, mp, sc, cset: ConstantSet, target: Field | None = None) -> DiagnosticsRecord:
    """All diagnostics of an evolution state."""
    from .evolution import Mode

    u = state.u
    s = cset.s
    lhs, rhs = pohozaev_residual(u, s)
    e_time = state.t if sc.mode is Mode.CAUCHY else 0.0
    return DiagnosticsRecord(
        time=float(state.t),
        mass=mass(u),
        min_value=float(u.values.min()),
        first_moment=moment(u, 1),
        centroid=centroid(u),
        second_moment=moment(u, 2),
        entropy_ulogu=entropy_ulogu(u),
        entropy_feps=entropy_feps(u, mp.epsilon),
        hs_energy=hs_energy(u, s),
        h1s_dissipation=h1s_dissipation(u, s),
        pohozaev_lhs=lhs,
        pohozaev_rhs=rhs,
        rescaled_E=rescaled_energy_E(u, max(e_time, 0.0), cset),
        fp_energy=fp_energy(u, cset),
        l1_to_target=None if target is None else l1_distance(u, target),
        picard_iters=int(state.last_picard_iters),
    )
