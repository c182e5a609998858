"""Identity residual suites shared by the `verify` command and the tests.

Each suite returns Check rows: a measured residual against its tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constants_profiles import (
    Family,
    dyda_radial,
    getoor_radial,
    higher_order_laplacian_split,
    model_constants,
    profile_dyda,
    profile_higher_order,
)
from .diagnostics import hs_energy, pm_pohozaev_residual, pohozaev_residual
from .grid_spectral import Grid, from_function
from .singular_quadrature import frac_laplacian_direct
from .whole_space import whole_space_operator

SUITES = ("constants", "dyda", "getoor", "pohozaev", "higher")


@dataclass(frozen=True)
class Check:
    suite: str
    name: str
    value: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(math.isfinite(self.value) and self.value <= self.tolerance)


def constant_checks() -> list[Check]:
    """Closed-form constants at the endpoints s = 0 and s = 1 (d = 1)."""
    rel = lambda a, b: abs(a - b) / abs(b)
    return [
        Check("constants", "C2(d=1, s=0) = 1/6", rel(model_constants(1, 0.0).C2, 1 / 6), 1e-12),
        Check("constants", "C2^2(d=1, s=1) = 1/120", rel(model_constants(1, 1.0).C2 ** 2, 1 / 120), 1e-12),
        Check(
            "constants",
            "a^2(d=1, s=0) = 1/120",
            rel(model_constants(1, 0.0, Family.FOURTH).a ** 2, 1 / 120),
            1e-12,
        ),
    ]


def _spectral_grid(d: int) -> Grid:
    return Grid(d, 4096 if d == 1 else 1024, 16.0)


def dyda_checks(d: int, s: float, radii: int = 20, oracle: bool = True) -> list[Check]:
    """𝓛ₛv_D = 1 − (β/2)|y|² on |y| ≤ 0.8 R_D, spectrally and by direct quadrature."""
    cset = model_constants(d, s)
    grid = _spectral_grid(d)
    v = profile_dyda(grid, cset)
    r2 = grid.radius_squared()
    Lv = whole_space_operator(grid, s).fractional_laplacian(v.values)
    inside = r2 <= (0.8 * cset.radius_RD) ** 2
    err = float(np.max(np.abs(Lv - (1 - 0.5 * cset.beta * r2))[inside]))
    out = [Check("dyda", f"spectral d={d} s={s} n={grid.points_per_axis}", err, 5e-3)]
    if oracle:
        rs = np.linspace(0.0, 0.8 * cset.radius_RD, radii)
        vals = np.array(frac_laplacian_direct(dyda_radial(cset), d, s, rs))
        err = float(np.max(np.abs(vals - (1 - 0.5 * cset.beta * rs**2))))
        out.append(Check("dyda", f"quadrature d={d} s={s} at {radii} radii", err, 1e-4))
    return out


def getoor_checks(d: int, s: float, radii: int = 20) -> list[Check]:
    """𝓛ₛ of the normalised Getoor profile equals 1 in B_{0.8}."""
    rs = np.linspace(0.0, 0.8, radii)
    vals = np.array(frac_laplacian_direct(getoor_radial(d, s), d, s, rs))
    return [Check("getoor", f"quadrature d={d} s={s} at {radii} radii", float(np.max(np.abs(vals - 1))), 1e-4)]


def _gaussian_grid(d: int) -> Grid:
    return Grid(d, 1024 if d == 1 else 256, 16.0)


def pohozaev_checks(d: int, s: float) -> list[Check]:
    """Pohozaev identities on e^{−|x|²} (the inverse-power one also on an odd field)."""
    grid = _gaussian_grid(d)
    gauss = from_function(grid, lambda *x: np.exp(-sum(c * c for c in x)))
    lhs, rhs = pohozaev_residual(gauss, s)
    if d == 2 * s:
        scale = 2 * hs_energy(gauss, s)
        out = [Check("pohozaev", f"d=2s: |rhs|/|f|^2 (s={s})", abs(rhs) / scale, 1e-6)]
    else:
        out = [Check("pohozaev", f"gaussian d={d} s={s}", abs(lhs - rhs) / abs(lhs), 1e-8)]
    if d > 2 * s:
        odd = from_function(grid, lambda *x: x[0] * np.exp(-sum(c * c for c in x)))
        for label, f in (("gaussian", gauss), ("odd", odd)):
            lhs, rhs = pm_pohozaev_residual(f, s)
            out.append(Check("pohozaev", f"inverse-power {label} d={d} s={s}", abs(lhs - rhs) / abs(lhs), 1e-6))
    return out


def higher_order_checks(d: int, s: float) -> list[Check]:
    """𝓛ₛ(−Δ)V = C − (β/2)|y|² inside 0.8× the support (support radius 4)."""
    if d != 1:
        raise ValueError("the higher-order suite is defined for d = 1")
    cset = model_constants(d, s, Family.FOURTH)
    grid = Grid(1, 4096, 16.0)
    K = (4.0 * cset.lam) ** 2
    prof = profile_higher_order(grid, cset, K)
    F1, F2 = higher_order_laplacian_split(grid, cset, prof.A)
    Lw = whole_space_operator(grid, s).fractional_laplacian(F1 + F2)
    r2 = grid.radius_squared()
    inside = r2 <= (0.8 * prof.support_radius) ** 2
    err = float(np.max(np.abs(Lw - (prof.C - 0.5 * cset.beta * r2))[inside]))
    const = abs(prof.C - cset.c_sd * prof.A) / abs(prof.C)
    return [
        Check("higher", f"spectral d=1 s={s}", err, 5e-3),
        Check("higher", f"C = c_sd*A d=1 s={s}", const, 1e-12),
    ]


def run_suite(suite: str, d: int, s: float) -> list[Check]:
    if suite == "constants":
        return constant_checks()
    if suite == "dyda":
        return dyda_checks(d, s)
    if suite == "getoor":
        return getoor_checks(d, s)
    if suite == "pohozaev":
        return pohozaev_checks(d, s)
    if suite == "higher":
        return higher_order_checks(d, s)
    if suite == "all":
        out: list[Check] = []
        for name in SUITES:
            if name == "higher" and d != 1:
                continue
            out.extend(run_suite(name, d, s))
        return out
    raise ValueError(f"unknown suite {suite!r}")


def format_table(checks: list[Check]) -> str:
    rows = [("suite", "check", "residual", "tolerance", "status")]
    rows += [(c.suite, c.name, f"{c.value:.3e}", f"{c.tolerance:.0e}", "PASS" if c.passed else "FAIL") for c in checks]
    widths = [max(len(r[i]) for r in rows) for i in range(5)]
    return "\n".join("  ".join(col.ljust(w) for col, w in zip(r, widths)).rstrip() for r in rows)
