"""Structural constants and closed-form profiles.

Second family (order 2+2s): u_t = div(u ∇𝓛ₛu). Fourth family (order 4+2s):
u_t = div(u ∇𝓛ₛ(−Δu)). Self-similar solutions u(x,t) = (1+t)^{−α} v(x/(1+t)^β)
have compactly supported profiles given in closed form here.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from enum import Enum

import numpy as np

from .grid_spectral import Field, Grid
from .singular_quadrature import RadialProfile


class Family(str, Enum):
    SECOND = "second"
    FOURTH = "fourth"


@dataclass(frozen=True)
class ConstantSet:
    """Constants for given (d, s, family).

    kappa is κ = 4^s Γ(s+2)Γ(s+d/2)/Γ(d/2); the Getoor normalisation
    kappa_getoor = κ/(1+s) makes 𝓛ₛ[(1−|y|²)₊^s/kappa_getoor] = 1 in the unit ball.
    """

    d: int
    s: float
    family: Family
    alpha: float
    beta: float
    kappa: float
    kappa_getoor: float
    gamma: float
    lam: float
    radius_RD: float
    C2: float
    mass_M1: float
    mu: float | None = None
    a: float | None = None
    c_sd: float | None = None
    c_sd_printed: float | None = None

    def to_dict(self) -> dict:
        out = asdict(self)
        out["family"] = self.family.value
        return out


def kappa(d: int, s: float) -> float:
    return 4.0**s * math.gamma(s + 2) * math.gamma(s + d / 2) / math.gamma(d / 2)


def model_constants(d: int, s: float, family: Family | str = Family.SECOND) -> ConstantSet:
    """All constants; s ∈ [0, 1] (the endpoints only make sense here)."""
    family = Family(family)
    if d not in (1, 2):
        raise ValueError(f"d must be 1 or 2, got {d}")
    if not 0.0 <= s <= 1.0:
        raise ValueError(f"s must lie in [0, 1], got {s}")
    order = 1 + s if family is Family.SECOND else 2 + s
    beta = 1.0 / (d + 2 * order)
    alpha = d * beta
    kap = kappa(d, s)
    gam = 1 + 2 * s / d
    lam = math.sqrt(beta / (2 * gam))
    C2 = (lam**2 / kap) ** (1 / (1 + s))
    # ∫(1−λ²|y|²)₊^{1+s} dy = π^{d/2} Γ(2+s) / (Γ(2+s+d/2) λ^d)
    M1 = math.pi ** (d / 2) * math.gamma(2 + s) / (math.gamma(2 + s + d / 2) * lam**d)
    M1 /= lam ** (2 * s) * kap
    extra: dict = {}
    if family is Family.FOURTH:
        mu = 2 * d + 4 * (1 + s)
        a = (2 * (2 + s) * (d + 4 + 2 * s) * gam * mu * kap) ** (-1 / (2 + s))
        extra = dict(
            mu=mu,
            a=a,
            c_sd=beta / (2 * a * gam) * (1 - 4 / mu),
            c_sd_printed=beta / (2 * a * gam) * (1 - 4 * (1 + s) / (kap * mu)),
        )
    return ConstantSet(
        d=d,
        s=float(s),
        family=family,
        alpha=alpha,
        beta=beta,
        kappa=kap,
        kappa_getoor=kap / (1 + s),
        gamma=gam,
        lam=lam,
        radius_RD=1 / lam,
        C2=C2,
        mass_M1=M1,
        **extra,
    )


def _require_open_s(s: float) -> None:
    if not 0.0 < s < 1.0:
        raise ValueError(f"profiles need s in (0, 1), got {s}")


def _require_fits(grid: Grid, radius: float, what: str) -> None:
    if not 2 * radius < grid.side_length:
        raise ValueError(
            f"{what} support radius {radius:.6g} does not fit in a box of side {grid.side_length:.6g}"
        )


def dyda_radial(cset: ConstantSet) -> RadialProfile:
    """v_D(r) = (1 − λ²r²)₊^{1+s} / (λ^{2s} κ)."""
    lam, s = cset.lam, cset.s
    amp = 1 / (lam ** (2 * s) * cset.kappa)

    def ev(r):
        return amp * np.maximum(1 - (lam * np.asarray(r, dtype=float)) ** 2, 0.0) ** (1 + s)

    return RadialProfile(ev, cset.radius_RD, 1 + s)


def profile_dyda(grid: Grid, cset: ConstantSet) -> Field:
    _require_open_s(cset.s)
    _require_fits(grid, cset.radius_RD, "Dyda profile")
    return Field(grid, dyda_radial(cset).evaluator(grid.radius()))


def getoor_radial(d: int, s: float, radius: float = 1.0) -> RadialProfile:
    """(1 − r²/R²)₊^s / κ_G; its 𝓛ₛ equals R^{−2s} inside the ball."""
    _require_open_s(s)
    kg = kappa(d, s) / (1 + s)

    def ev(r):
        return np.maximum(1 - (np.asarray(r, dtype=float) / radius) ** 2, 0.0) ** s / kg

    return RadialProfile(ev, radius, s)


def profile_getoor(grid: Grid, d: int, s: float, radius: float = 1.0) -> tuple[Field, float]:
    """Getoor profile on B_radius and the interior value of its 𝓛ₛ."""
    if grid.dimension != d:
        raise ValueError("grid dimension does not match d")
    _require_fits(grid, radius, "Getoor profile")
    prof = getoor_radial(d, s, radius)
    return Field(grid, prof.evaluator(grid.radius())), radius ** (-2 * s)


def rescaled_radial(cset: ConstantSet, C: float) -> RadialProfile:
    """v_C(r) = C^{1+s} v_D(C^{−1/2} r)."""
    if C <= 0:
        raise ValueError(f"C must be positive, got {C}")
    base = dyda_radial(cset)
    s = cset.s

    def ev(r):
        return C ** (1 + s) * base.evaluator(np.asarray(r, dtype=float) / math.sqrt(C))

    return RadialProfile(ev, math.sqrt(C) * cset.radius_RD, 1 + s)


def profile_for_constant(grid: Grid, cset: ConstantSet, C: float) -> Field:
    _require_open_s(cset.s)
    prof = rescaled_radial(cset, C)
    _require_fits(grid, prof.support_radius, "rescaled profile")
    return Field(grid, prof.evaluator(grid.radius()))


def barenblatt_coefficients(cset: ConstantSet, C: float) -> tuple[float, float]:
    """(C₁, C₂) with v_C(y) = (C₁ − C₂|y|²)₊^{1+s}."""
    return C * cset.C2 / cset.lam**2, cset.C2


def constant_for_mass(cset: ConstantSet, M: float, M1: float | None = None) -> float:
    """C = (M/M₁)^{1/(1+s+d/2)}."""
    M1 = cset.mass_M1 if M1 is None else M1
    if M <= 0 or M1 <= 0:
        raise ValueError("masses must be positive")
    return (M / M1) ** (1 / (1 + cset.s + cset.d / 2))


def dyda_mass_quadrature(d: int, s: float) -> float:
    """Grid quadrature of v_D on n=4096 (d=1) or 2048² (d=2), L = 4 R_D."""
    cset = model_constants(d, s)
    n = 4096 if d == 1 else 2048
    grid = Grid(d, n, 4 * cset.radius_RD)
    return float(profile_dyda(grid, cset).values.sum() * grid.cell_volume)


@dataclass(frozen=True)
class HigherOrderProfile:
    """V = (A − a|y|²)₊^{2+s} and the constants of 𝓛ₛ(−Δ)V = C − (β/2)|y|²."""

    field: Field
    A: float
    K: float
    K2: float
    C: float
    support_radius: float


def _require_fourth(cset: ConstantSet) -> None:
    if cset.family is not Family.FOURTH:
        raise ValueError("higher-order profile needs the fourth-family constant set")


def profile_higher_order(grid: Grid, cset: ConstantSet, K: float) -> HigherOrderProfile:
    """Sample V with A = K a/λ².

    −ΔV = F₁ + F₂ with F₁ = (2+s)μa Z^{1+s}, F₂ = −4(1+s)(2+s)aA Z^s, Z = (A − a r²)₊.
    𝓛ₛF₁ = K − (β/2)r², and 𝓛ₛF₂ = K₂ = −4(2+s)κ a^{1+s} A through the Getoor
    identity, so C = K + K₂ = c_sd·A.
    """
    _require_fourth(cset)
    _require_open_s(cset.s)
    if K <= 0:
        raise ValueError(f"K must be positive, got {K}")
    A = K * cset.a / cset.lam**2
    radius = math.sqrt(A / cset.a)
    _require_fits(grid, radius, "higher-order profile")
    V = np.maximum(A - cset.a * grid.radius_squared(), 0.0) ** (2 + cset.s)
    K2 = -4 * (2 + cset.s) * cset.kappa * cset.a ** (1 + cset.s) * A
    return HigherOrderProfile(Field(grid, V), A, K, K2, K + K2, radius)


def higher_order_laplacian_split(
    grid: Grid, cset: ConstantSet, A: float
) -> tuple[np.ndarray, np.ndarray]:
    """F₁, F₂ with −ΔV = F₁ + F₂."""
    _require_fourth(cset)
    s, a = cset.s, cset.a
    Z = np.maximum(A - a * grid.radius_squared(), 0.0)
    F1 = (2 + s) * cset.mu * a * Z ** (1 + s)
    F2 = -4 * (1 + s) * (2 + s) * a * A * Z**s
    return F1, F2


def selfsimilar_value(x, t: float, C: float, cset: ConstantSet):
    """u_C(x,t) = (1+t)^{−α} v_C(x/(1+t)^β); x is a point or an array of points (last axis d)."""
    if t <= -1:
        raise ValueError("t must exceed -1")
    pts = np.asarray(x, dtype=float)
    r = np.abs(pts) if cset.d == 1 and pts.ndim <= 1 else np.linalg.norm(pts, axis=-1)
    T = 1 + t
    return T ** (-cset.alpha) * rescaled_radial(cset, C).evaluator(r / T**cset.beta)


def selfsimilar_field(grid: Grid, t: float, C: float, cset: ConstantSet) -> Field:
    if t <= -1:
        raise ValueError("t must exceed -1")
    T = 1 + t
    prof = rescaled_radial(cset, C)
    _require_fits(grid, prof.support_radius * T**cset.beta, "self-similar solution")
    vals = T ** (-cset.alpha) * prof.evaluator(grid.radius() / T**cset.beta)
    return Field(grid, vals, t)
