# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled angular kernel for the radial singular-integral oracle."""

import numpy as np

from libc.math cimport acos, cos, fabs, pow, sqrt, M_PI

cdef double XGK[8]
cdef double WGK[8]
cdef double WG[4]

XGK[:] = [0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
          0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
          0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
          0.207784955007898467600689403773245, 0.000000000000000000000000000000000]
WGK[:] = [0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
          0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
          0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
          0.204432940075298892414161999234649, 0.209482141084727828012999174891714]
WG[:] = [0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
         0.381830050505118944950369775488975, 0.417959183673469387755102040816327]


cdef inline double _integrand(double th, double A, double B, double e) nogil:
    return pow(A - B * cos(th), e)


cdef double _gk15(double a, double b, double A, double B, double e, double* err) nogil:
    cdef double c = 0.5 * (a + b)
    cdef double h = 0.5 * (b - a)
    cdef double fc = _integrand(c, A, B, e)
    cdef double resk = fc * WGK[7]
    cdef double resg = fc * WG[3]
    cdef double f1, f2
    cdef int j
    for j in range(7):
        f1 = _integrand(c - h * XGK[j], A, B, e)
        f2 = _integrand(c + h * XGK[j], A, B, e)
        resk += WGK[j] * (f1 + f2)
        if j % 2 == 1:
            resg += WG[j // 2] * (f1 + f2)
    err[0] = fabs((resk - resg) * h)
    return resk * h


cdef double _adapt(double a, double b, double A, double B, double e,
                   double tol, double whole, int depth) nogil:
    cdef double err
    cdef double val = _gk15(a, b, A, B, e, &err)
    if err <= tol or depth >= 40:
        return val
    cdef double m = 0.5 * (a + b)
    return (_adapt(a, m, A, B, e, 0.5 * tol, whole, depth + 1)
            + _adapt(m, b, A, B, e, 0.5 * tol, whole, depth + 1))


def angular_kernel(double r0, double[::1] rho, double delta, double s, double tol=1e-10):
    """K(ρ) = ∫ over {θ : |x − y| > δ} of |x − y|^{−2−2s} dθ, |x| = r0, |y| = ρ."""
    cdef Py_ssize_t n = rho.shape[0]
    out = np.zeros(n)
    cdef double[::1] res = out
    cdef Py_ssize_t i
    cdef double p, A, B, c, th0, e = -1.0 - s, scale
    for i in range(n):
        p = rho[i]
        if p <= 0.0:
            continue
        if r0 == 0.0:
            if p > delta:
                res[i] = 2.0 * M_PI * pow(p, 2.0 * e)
            continue
        A = r0 * r0 + p * p
        B = 2.0 * r0 * p
        c = A - delta * delta
        if c <= -B:
            continue
        th0 = 0.0 if c >= B else acos(c / B)
        # Relative target: the integrand is largest at th0.
        scale = pow(A - B * cos(th0), e) * (M_PI - th0)
        res[i] = 2.0 * _adapt(th0, M_PI, A, B, e, tol * scale, scale, 0)
    return out
