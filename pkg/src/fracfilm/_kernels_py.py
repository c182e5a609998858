"""Pure-Python reference of the compiled kernels (used when the extension is absent)."""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate


def angular_kernel(r0: float, rho: np.ndarray, delta: float, s: float, tol: float = 1e-10) -> np.ndarray:
    """K(ρ) = ∫ over {θ : |x − y| > δ} of |x − y|^{−2−2s} dθ, |x| = r0, |y| = ρ."""
    rho = np.ascontiguousarray(rho, dtype=float)
    out = np.zeros(rho.shape[0])
    e = -1.0 - s
    for i, p in enumerate(rho):
        if p <= 0.0:
            continue
        if r0 == 0.0:
            if p > delta:
                out[i] = 2.0 * math.pi * p ** (2 * e)
            continue
        A = r0 * r0 + p * p
        B = 2.0 * r0 * p
        num = A - delta * delta
        if num <= -B:
            continue
        th0 = 0.0 if num >= B else math.acos(num / B)
        scale = (A - B * math.cos(th0)) ** e * (math.pi - th0)
        val, _ = integrate.quad(
            lambda t: (A - B * math.cos(t)) ** e, th0, math.pi, epsabs=tol * scale, epsrel=tol, limit=200
        )
        out[i] = 2.0 * val
    return out
