"""Implicit time stepping for the thin-film type equations.

    second family:  u_t = div(m(u) ∇p),  p = 𝓛ₛu
    fourth family:  u_t = div(m(u) ∇p),  p = 𝓛ₛ(−Δu)
    Fokker–Planck:  v_τ = div(m(v) ∇(p + β|y|²/2))

Space: the flux lives on the staggered grid, J = −m_{i+½} D₊(p + Φ), and
u_t = −D₊ᵀJ, so the mean is preserved exactly. 𝓛ₛ is the whole-space
operator, which is symmetric positive definite on box data. The edge mobility
m_{i+½} = δu / δf'_ε(u) makes the discrete chain rule exact for the ε-entropy,
so the entropy and energy estimates hold step by step.

Time: backward Euler. Each Picard sweep freezes the mobility at the current
iterate and solves the linear problem

    𝓐u + dt 𝓐D₊ᵀ(m D₊𝓐u) = 𝓐uⁿ − dt 𝓐D₊ᵀ(m D₊Φ)

by preconditioned CG on mean-zero fields, with 𝓐 = 𝓛ₛ or Σ D_iᵀ𝓛ₛD_i.
Anderson mixing accelerates the Picard sweeps, which otherwise cycle near a
free boundary at large dt.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable

import numpy as np

from .constants_profiles import ConstantSet, Family
from .grid_spectral import Field, Grid, spectral_data
from .whole_space import whole_space_operator


class Mode(str, Enum):
    CAUCHY = "cauchy"
    FOKKER_PLANCK = "fokker_planck"


class NonconvergenceError(RuntimeError):
    """Picard iteration did not reach its tolerance."""

    def __init__(self, message: str, residual: float, trace: list[float]):
        super().__init__(message)
        self.residual = residual
        self.trace = trace


class LinearSolverError(RuntimeError):
    """CG breakdown or iteration cap; trace holds relative residuals."""

    def __init__(self, message: str, trace: list[float]):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True)
class MobilityParams:
    epsilon: float = 1e-6
    cap: float = 1e6

    def __post_init__(self) -> None:
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if not self.cap >= self.epsilon:
            raise ValueError(f"cap must be at least epsilon, got {self.cap}")


@dataclass(frozen=True)
class StepperConfig:
    dt: float
    picard_tol: float = 1e-10
    picard_max_iters: int = 50
    linear_tol: float = 1e-11
    linear_max_iters: int = 20000
    mode: Mode = Mode.CAUCHY
    family: Family = Family.SECOND
    anderson_depth: int = 5
    anderson_damping: float = 0.5
    anderson_restart: float = 10.0
    max_step_splits: int = 3

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", Mode(self.mode))
        object.__setattr__(self, "family", Family(self.family))
        for name in ("dt", "picard_tol", "linear_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("picard_max_iters", "linear_max_iters"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1, got {getattr(self, name)}")
        if self.anderson_depth < 0:
            raise ValueError("anderson_depth must be nonnegative")
        if not 0.0 < self.anderson_damping <= 1.0:
            raise ValueError("anderson_damping must lie in (0, 1]")
        if not self.anderson_restart > 1.0:
            raise ValueError("anderson_restart must exceed 1")
        if self.max_step_splits < 0:
            raise ValueError("max_step_splits must be nonnegative")


@dataclass(frozen=True)
class EvolutionState:
    u: Field
    t: float
    step_count: int = 0
    last_picard_iters: int = 0
    last_picard_residual: float = 0.0
    last_linear_iters: int = 0
    previous: Field | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if not np.all(np.isfinite(self.u.values)):
            raise ValueError("state contains non-finite values")


def run_metadata(sc: StepperConfig) -> dict:
    """Labels attached to every run's output."""
    return {
        "family": sc.family.value,
        "mode": sc.mode.value,
        "experimental": sc.family is Family.FOURTH,
        "trajectory_selection": "one weak solution; uniqueness is not known",
    }


def mobility(u: Field, params: MobilityParams) -> Field:
    """min(M, u⁺ + ε)."""
    return u.with_values(np.minimum(params.cap, np.maximum(u.values, 0.0) + params.epsilon))


def entropy_derivative(y: np.ndarray, epsilon: float) -> np.ndarray:
    """f'_ε(y): log((y+ε)/(1+ε)) for y ≥ 0, extended linearly with slope 1/ε below 0."""
    y = np.asarray(y, dtype=float)
    yp = np.maximum(y, 0.0)
    return np.where(
        y >= 0, np.log((yp + epsilon) / (1 + epsilon)), math.log(epsilon / (1 + epsilon)) + y / epsilon
    )


def _entropy_derivative_difference(a: np.ndarray, b: np.ndarray, epsilon: float) -> np.ndarray:
    """f'_ε(b) − f'_ε(a) without cancellation between nearby samples."""

    def g(y):  # f'_ε(y) − f'_ε(0)
        return np.where(y >= 0, np.log1p(np.maximum(y, 0.0) / epsilon), y / epsilon)

    both_pos = (a >= 0) & (b >= 0)
    both_neg = (a < 0) & (b < 0)
    with np.errstate(invalid="ignore"):
        pos = np.log1p((b - a) / (np.maximum(a, 0.0) + epsilon))
    return np.where(both_pos, pos, np.where(both_neg, (b - a) / epsilon, g(b) - g(a)))


def edge_mobility(u: np.ndarray, axis: int, params: MobilityParams) -> np.ndarray:
    """m_{i+½} = (u_{i+1} − u_i)/(f'_ε(u_{i+1}) − f'_ε(u_i)), capped at M."""
    eps = params.epsilon
    up = np.roll(u, -1, axis=axis)
    du = up - u
    df = _entropy_derivative_difference(u, up, eps)
    point = np.maximum(u, 0.0) + eps
    small = np.abs(du) <= 1e-12 * (np.abs(u) + eps)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(small, point, du / np.where(small, 1.0, df))
    return np.minimum(params.cap, ratio)


class _Discretization:
    """Staggered differences, the pressure operator 𝓐 and its symbol."""

    def __init__(self, grid: Grid, s: float, family: Family):
        self.grid = grid
        self.s = s
        self.family = family
        self.h = grid.spacing
        self.axes = tuple(range(grid.dimension))
        self.ws = whole_space_operator(grid, s)
        spec = spectral_data(grid)
        k2 = spec.k2
        self.sigma = sum(
            np.broadcast_to((2.0 / self.h * np.sin(k * self.h / 2)) ** 2, k2.shape) for k in spec.k
        )
        frac = np.where(k2 > 0, k2, 1.0) ** s * (k2 > 0)
        self.a_symbol = frac * (self.sigma if family is Family.FOURTH else 1.0)

    def dp(self, u: np.ndarray, axis: int) -> np.ndarray:
        return (np.roll(u, -1, axis=axis) - u) / self.h

    def dpt(self, J: np.ndarray, axis: int) -> np.ndarray:
        return (np.roll(J, 1, axis=axis) - J) / self.h

    def pressure(self, u: np.ndarray) -> np.ndarray:
        L = self.ws.fractional_laplacian
        if self.family is Family.SECOND:
            return L(u)
        return sum(self.dpt(L(self.dp(u, a)), a) for a in self.axes)

    def flux_divergence(self, m: tuple[np.ndarray, ...], p: np.ndarray) -> np.ndarray:
        """D₊ᵀ(m D₊p) summed over axes (= −div(m∇p))."""
        return sum(self.dpt(m[a] * self.dp(p, a), a) for a in self.axes)


def _potential_gradient(grid: Grid, beta: float) -> tuple[np.ndarray, ...]:
    """D₊(β|y|²/2) = β(y + h/2) at the staggered points; the wrap edge carries no flux."""
    h = grid.spacing
    coords = grid.coordinates()
    return tuple(np.broadcast_to(beta * (c + h / 2), grid.shape).copy() for c in coords)


def _wall_masks(grid: Grid) -> tuple[np.ndarray, ...]:
    """Zero on the periodic wrap edge of each axis, one elsewhere.

    The confining potential is not periodic, so the Fokker–Planck box is
    closed by no-flux walls. Without them the drift across the wrap edge
    drains the corner samples at rate ~εβL/h.
    """
    masks = []
    for a in range(grid.dimension):
        shape = [1] * grid.dimension
        shape[a] = grid.points_per_axis
        m = np.ones(grid.points_per_axis)
        m[-1] = 0.0
        masks.append(np.broadcast_to(m.reshape(shape), grid.shape).copy())
    return tuple(masks)


def _preconditioner(disc: _Discretization, m: tuple[np.ndarray, ...], dt: float, levels: int = 4):
    """Partition of unity in log m, each piece with a constant-mobility symbol.

    P⁻¹r = Σ_j √χ_j F⁻¹[F[√χ_j r] / (A(k)(1 + dt m_j σ(k) A(k)))].
    """
    grid = disc.grid
    mm = sum(m) / len(m)
    lm = np.log(np.maximum(mm, 1e-300))
    hi = float(lm.max())
    lo = max(float(lm.min()), hi + math.log(1e-6))
    A = disc.a_symbol
    zero = A == 0
    if hi - lo < 1e-12:
        level_values = [hi]
        roots = [np.ones(grid.shape)]
    else:
        level_values = list(np.linspace(lo, hi, levels))
        t = (np.clip(lm, lo, hi) - lo) / (hi - lo) * (levels - 1)
        roots = [np.sqrt(np.clip(1.0 - np.abs(t - j), 0.0, None)) for j in range(levels)]
    inv_symbols = []
    for lv in level_values:
        P = A * (1.0 + dt * math.exp(lv) * disc.sigma * A)
        inv_symbols.append(np.where(zero, 0.0, 1.0 / np.where(zero, 1.0, P)))

    def apply(r: np.ndarray) -> np.ndarray:
        out = np.zeros_like(r)
        for q, S in zip(roots, inv_symbols):
            if q.any():
                out += q * np.fft.irfftn(np.fft.rfftn(q * r) * S, s=grid.shape, axes=disc.axes)
        return out - out.mean()

    return apply


def _pcg(apply_S, rhs, x0, precond, tol, max_iters):
    """CG on mean-zero fields. Returns (x, iterations)."""
    nrhs = float(np.linalg.norm(rhs))
    if nrhs == 0.0:
        return np.zeros_like(rhs), 0
    x = x0.copy()
    r = rhs - _mean_free(apply_S(x))
    z = precond(r)
    p = z.copy()
    rz = float(np.vdot(r, z))
    trace = [float(np.linalg.norm(r)) / nrhs]
    k = 0
    while trace[-1] > tol:
        if k >= max_iters:
            raise LinearSolverError(f"CG did not converge in {max_iters} iterations", trace)
        Sp = _mean_free(apply_S(p))
        pSp = float(np.vdot(p, Sp))
        if not pSp > 0 or not math.isfinite(pSp):
            raise LinearSolverError("CG breakdown: operator not positive on search direction", trace)
        alpha = rz / pSp
        x += alpha * p
        r -= alpha * Sp
        z = precond(r)
        rz_new = float(np.vdot(r, z))
        p = z + (rz_new / rz) * p
        rz = rz_new
        k += 1
        trace.append(float(np.linalg.norm(r)) / nrhs)
    return x, k


def _mean_free(v: np.ndarray) -> np.ndarray:
    return v - v.mean()


class _Stepper:
    """One backward-Euler step for fixed grid, constants and configuration."""

    def __init__(self, grid: Grid, mp: MobilityParams, sc: StepperConfig, cset: ConstantSet):
        if grid.dimension != cset.d:
            raise ValueError("grid dimension does not match the constant set")
        if sc.family is not cset.family:
            raise ValueError("stepper family does not match the constant set")
        self.grid, self.mp, self.sc, self.cset = grid, mp, sc, cset
        self.disc = _Discretization(grid, cset.s, sc.family)
        fp = sc.mode is Mode.FOKKER_PLANCK
        self.grad_phi = _potential_gradient(grid, cset.beta) if fp else None
        self.walls = _wall_masks(grid) if fp else None

    def frozen_solve(self, u: np.ndarray, un: np.ndarray, dt: float) -> tuple[np.ndarray, int]:
        """New iterate with the mobility frozen at u."""
        disc = self.disc
        m = tuple(edge_mobility(u, a, self.mp) for a in disc.axes)
        if self.walls is not None:
            m = tuple(ma * wa for ma, wa in zip(m, self.walls))
        A = disc.pressure

        def apply_S(w):
            Aw = A(w)
            return Aw + dt * A(disc.flux_divergence(m, Aw))

        mean = float(un.mean())
        rhs = A(un) - apply_S(np.full_like(un, mean))
        if self.grad_phi is not None:
            drift = sum(disc.dpt(m[a] * self.grad_phi[a], a) for a in disc.axes)
            rhs = rhs - dt * A(drift)
        rhs = _mean_free(rhs)
        w, its = _pcg(
            apply_S,
            rhs,
            _mean_free(u),
            _preconditioner(disc, m, dt),
            self.sc.linear_tol,
            self.sc.linear_max_iters,
        )
        return mean + _mean_free(w), its

    def step(
        self, un: np.ndarray, dt: float, guess: np.ndarray | None = None
    ) -> tuple[np.ndarray, int, float, int]:
        """Anderson-accelerated Picard. Returns (u, sweeps, residual, CG iterations).

        The history is discarded whenever the residual grows by more than
        anderson_restart over the best one seen; the frozen-mobility map is
        only piecewise smooth near u = 0 and stale secants then mislead.
        """
        sc = self.sc
        omega = sc.anderson_damping
        u = un.copy() if guess is None else guess.copy()
        xs: list[np.ndarray] = []
        fs: list[np.ndarray] = []
        trace: list[float] = []
        best = math.inf
        total = 0
        for it in range(1, sc.picard_max_iters + 1):
            g, its = self.frozen_solve(u, un, dt)
            total += its
            f = g - u
            res = float(np.linalg.norm(f) / max(np.linalg.norm(g), 1e-300))
            trace.append(res)
            if res <= sc.picard_tol:
                return g, it, res, total
            if res > sc.anderson_restart * best:
                xs.clear()
                fs.clear()
            best = min(best, res)
            xs.append(u.ravel().copy())
            fs.append(f.ravel().copy())
            if len(xs) > sc.anderson_depth + 1:
                xs.pop(0)
                fs.pop(0)
            if len(xs) > 1:
                dF = np.stack([fs[i + 1] - fs[i] for i in range(len(fs) - 1)], axis=1)
                dX = np.stack([xs[i + 1] - xs[i] for i in range(len(xs) - 1)], axis=1)
                gam, *_ = np.linalg.lstsq(dF, f.ravel(), rcond=None)
                u = (u.ravel() + omega * f.ravel() - (dX + omega * dF) @ gam).reshape(u.shape)
            else:
                u = u + omega * f
        raise NonconvergenceError(
            f"Picard iteration did not converge in {sc.picard_max_iters} sweeps "
            f"(last residual {trace[-1]:.3e})",
            trace[-1],
            trace,
        )


_STEPPERS: dict = {}


def _stepper(grid: Grid, mp: MobilityParams, sc: StepperConfig, cset: ConstantSet) -> _Stepper:
    key = (grid, mp, replace(sc, dt=1.0), cset)
    st = _STEPPERS.get(key)
    if st is None:
        if len(_STEPPERS) > 8:
            _STEPPERS.clear()
        st = _STEPPERS[key] = _Stepper(grid, mp, sc, cset)
    return st


def implicit_step(
    state: EvolutionState,
    mp: MobilityParams,
    sc: StepperConfig,
    cset: ConstantSet,
    dt: float | None = None,
) -> EvolutionState:
    """Advance by dt (default sc.dt).

    When the state remembers the previous time level, Picard starts from the
    linear extrapolation through both levels. Starting from uⁿ instead can
    trap the iteration near a slightly negative sample ahead of a moving
    front, where frozen edge mobilities almost block the inflow.
    """
    dt = sc.dt if dt is None else dt
    if not dt > 0:
        raise ValueError("dt must be positive")
    st = _stepper(state.u.grid, mp, sc, cset)
    un = state.u.values
    guess = None
    prev = state.previous
    if prev is not None and state.t > prev.time:
        guess = un + (dt / (state.t - prev.time)) * (un - prev.values)
    u, sweeps, res, its = st.step(un, dt, guess)
    t = state.t + dt
    return EvolutionState(
        Field(state.u.grid, u, t),
        t,
        state.step_count + 1,
        sweeps,
        res,
        its,
        previous=state.u.with_values(un, state.t),
    )


@dataclass
class Trajectory:
    """Sampled states with their diagnostics. error is set if a step failed."""

    samples: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)
    error: Exception | None = None

    def __iter__(self):
        return iter(self.samples)

    def __len__(self) -> int:
        return len(self.samples)

    def __getitem__(self, i):
        return self.samples[i]

    @property
    def records(self) -> list:
        return [r for _, r in self.samples]

    @property
    def states(self) -> list:
        return [s for s, _ in self.samples]


def evolve(
    initial: Field,
    mp: MobilityParams,
    sc: StepperConfig,
    cset: ConstantSet,
    t_end: float,
    sample_every: int = 100,
    target: Field | None = None,
    on_step: Callable[[EvolutionState, EvolutionState], None] | None = None,
    on_sample: Callable[[EvolutionState, object], None] | None = None,
    raise_errors: bool = False,
) -> Trajectory:
    """March from initial.time to t_end; record every sample_every steps and at t_end.

    on_step(previous, new) sees every accepted step. A step whose Picard
    iteration fails is retried as two half steps, at most sc.max_step_splits
    levels deep; metadata["split_steps"] counts the retries. A step that still
    fails ends the run, and the partial trajectory keeps the error unless
    raise_errors is set.
    """
    from .diagnostics import make_record

    t0 = initial.time
    if t_end < t0:
        raise ValueError("t_end must not precede the initial time")
    if sample_every < 1:
        raise ValueError("sample_every must be at least 1")
    traj = Trajectory(metadata={**run_metadata(sc), "d": cset.d, "s": cset.s, "split_steps": 0})

    def advance(state: EvolutionState, dt: float, depth: int) -> EvolutionState:
        try:
            new = implicit_step(state, mp, sc, cset, dt)
        except NonconvergenceError:
            if depth >= sc.max_step_splits:
                raise
            traj.metadata["split_steps"] += 1
            half = advance(state, 0.5 * dt, depth + 1)
            return advance(half, 0.5 * dt, depth + 1)
        if on_step is not None:
            on_step(state, new)
        return new

    def sample(state: EvolutionState) -> None:
        rec = make_record(state, mp, sc, cset, target)
        traj.samples.append((state, rec))
        if on_sample is not None:
            on_sample(state, rec)

    state = EvolutionState(initial, t0)
    sample(state)
    n_full = int(math.floor((t_end - t0) / sc.dt + 1e-9))
    remainder = (t_end - t0) - n_full * sc.dt
    steps = [sc.dt] * n_full
    if remainder > 1e-9 * sc.dt:
        steps.append(remainder)
    for i, dt in enumerate(steps, start=1):
        try:
            state = advance(state, dt, 0)
        except (NonconvergenceError, LinearSolverError) as exc:
            traj.error = exc
            if raise_errors:
                raise
            return traj
        if i % sample_every == 0 or i == len(steps):
            sample(state)
    return traj


def to_rescaled(u: Field, t: float, cset: ConstantSet) -> Field:
    """v(y, τ) = (1+t)^α u(y(1+t)^β, t), τ = log(1+t); samples are reused."""
    if t <= -1:
        raise ValueError("t must exceed -1")
    T = 1.0 + t
    grid = u.grid.rescaled(T ** (-cset.beta))
    return Field(grid, u.values * T**cset.alpha, math.log(T))


def from_rescaled(v: Field, tau: float, cset: ConstantSet) -> Field:
    """u(x, t) = e^{−ατ} v(x e^{−βτ}, τ), t = e^τ − 1."""
    grid = v.grid.rescaled(math.exp(cset.beta * tau))
    return Field(grid, v.values * math.exp(-cset.alpha * tau), math.expm1(tau))


__all__ = [
    "EvolutionState",
    "LinearSolverError",
    "MobilityParams",
    "Mode",
    "NonconvergenceError",
    "StepperConfig",
    "Trajectory",
    "edge_mobility",
    "entropy_derivative",
    "evolve",
    "from_rescaled",
    "implicit_step",
    "mobility",
    "run_metadata",
    "to_rescaled",
]
