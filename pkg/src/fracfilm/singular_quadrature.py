"""Direct principal-value quadrature of 𝓛ₛ for radial, compactly supported profiles.

    𝓛ₛv(x) = C(d,s) p.v.∫ (v(x) − v(y)) |x − y|^{−d−2s} dy

The ball |x − y| < δ is handled with the symmetric second difference and an
analytic second-order Taylor term; the complement uses the exact tail
v(x)·|S^{d−1}|δ^{−2s}/(2s) minus the integral of v over the support. This is
an independent check of the spectral operators and is not meant to be fast.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from .kernels import angular_kernel
from .whole_space import kernel_constant

_GL_THETA = np.polynomial.legendre.leggauss(48)


class QuadratureDomainError(ValueError):
    """Evaluation point outside the open support."""


class RegularityError(ValueError):
    """Profile too rough for 𝓛ₛ to be finite.

    The Hölder exponent describes the behaviour at the support boundary; the
    profile is assumed smooth at interior evaluation points.
    """


def normalization_constant(d: int, s: float) -> float:
    """C(d,s) matching the symbol |ξ|^{2s}."""
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    return kernel_constant(d, s)


@dataclass(frozen=True)
class RadialProfile:
    """Radial function r ↦ g(r), zero for r ≥ support_radius."""

    evaluator: Callable[[np.ndarray], np.ndarray]
    support_radius: float
    holder_exponent: float

    def __post_init__(self) -> None:
        if not self.support_radius > 0:
            raise ValueError("support_radius must be positive")
        if not 0.0 < self.holder_exponent < 2.0:
            raise ValueError("holder_exponent must lie in (0, 2)")

    def __call__(self, r) -> np.ndarray:
        return np.asarray(self.evaluator(np.asarray(r, dtype=float)), dtype=float)

    def scalar(self, r: float) -> float:
        return float(self(np.array([abs(r)]))[0])


def _quad(f, a: float, b: float, points: Sequence[float] = (), tol: float = 1e-11) -> float:
    if b <= a:
        return 0.0
    pts = sorted(p for p in points if a < p < b)
    # Roundoff near the cancelling Taylor remainder triggers spurious warnings at this tolerance.
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, _ = integrate.quad(f, a, b, points=pts or None, epsabs=tol, epsrel=tol, limit=400)
    return float(val)


def _second_derivative(g: Callable[[float], float], x: float, h: float) -> float:
    return (-g(x + 2 * h) + 16 * g(x + h) - 30 * g(x) + 16 * g(x - h) - g(x - 2 * h)) / (12 * h * h)


def _direct_1d(p: RadialProfile, s: float, x: float, delta: float) -> float:
    R = p.support_radius
    v = lambda y: p.scalar(y)
    v0 = v(x)
    v2 = _second_derivative(v, x, delta / 8)
    e = 1 + 2 * s

    def remainder(z):
        if z == 0.0:
            return 0.0
        return (2 * v0 - v(x + z) - v(x - z) + v2 * z * z) / z**e

    inner = _quad(remainder, 0.0, delta) - v2 * delta ** (2 - 2 * s) / (2 - 2 * s)
    far = lambda y: v(y) / abs(x - y) ** e
    outer = 2 * v0 * delta ** (-2 * s) / (2 * s)
    outer -= _quad(far, x + delta, R) + _quad(far, -R, x - delta, points=(0.0,))
    return inner + outer


def _direct_2d(p: RadialProfile, s: float, r0: float, delta: float) -> float:
    R = p.support_radius
    g = p.scalar
    v0 = g(r0)
    hs = delta / 8
    vx = lambda t: g(math.hypot(r0 + t, 0.0))
    vy = lambda t: g(math.hypot(r0, t))
    lap = _second_derivative(vx, 0.0, hs) + _second_derivative(vy, 0.0, hs)
    t_nodes, t_weights = _GL_THETA
    theta = 0.5 * math.pi * (t_nodes + 1)
    wts = 0.5 * math.pi * t_weights
    ct = np.cos(theta)

    def ring(rho: float) -> float:
        # ∫_0^π [2v(x) − v(x+z) − v(x−z)] dθ with |z| = ρ
        rp = np.sqrt(np.maximum(r0 * r0 + rho * rho + 2 * r0 * rho * ct, 0.0))
        rm = np.sqrt(np.maximum(r0 * r0 + rho * rho - 2 * r0 * rho * ct, 0.0))
        return float(np.dot(wts, 2 * v0 - p(rp) - p(rm)))

    def remainder(rho):
        if rho == 0.0:
            return 0.0
        return (ring(rho) + 0.5 * math.pi * lap * rho * rho) / rho ** (1 + 2 * s)

    inner = _quad(remainder, 0.0, delta) - 0.5 * math.pi * lap * delta ** (2 - 2 * s) / (2 - 2 * s)

    def far(rho):
        if rho <= 0.0:
            return 0.0
        k = angular_kernel(r0, np.array([rho]), delta, s, 1e-10)[0]
        return g(rho) * rho * k

    outer = 2 * math.pi * v0 * delta ** (-2 * s) / (2 * s)
    outer -= _quad(far, 0.0, R, points=(r0 - delta, r0, r0 + delta))
    return inner + outer


def frac_laplacian_direct(p: RadialProfile, d: int, s: float, eval_points: Sequence[float]) -> list[float]:
    """𝓛ₛ of the radial extension of p at the given radii."""
    if d not in (1, 2):
        raise ValueError(f"d must be 1 or 2, got {d}")
    if not 0.0 < s < 1.0:
        raise ValueError(f"s must lie in (0, 1), got {s}")
    C = normalization_constant(d, s)
    R = p.support_radius
    out = []
    for r in eval_points:
        r = abs(float(r))
        if r >= R:
            raise QuadratureDomainError(f"radius {r} is not inside the support radius {R}")
        delta = min(0.1, (R - r) / 4)
        val = _direct_1d(p, s, r, delta) if d == 1 else _direct_2d(p, s, r, delta)
        if not math.isfinite(val):
            raise RegularityError(f"non-finite principal value at r={r}: profile too rough there")
        out.append(C * val)
    return out
