"""Configuration, persistence and the command-line front end.

Exit codes: 0 success, 2 solver nonconvergence, 64 usage, 65 bad data.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import struct
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .constants_profiles import (
    ConstantSet,
    Family,
    barenblatt_coefficients,
    constant_for_mass,
    model_constants,
    profile_dyda,
    profile_for_constant,
    profile_higher_order,
    rescaled_radial,
    selfsimilar_field,
)
from .diagnostics import mass
from .evolution import (
    EvolutionState,
    LinearSolverError,
    MobilityParams,
    Mode,
    NonconvergenceError,
    StepperConfig,
    evolve,
    run_metadata,
)
from .grid_spectral import Field, Grid
from .obstacle import ObstacleNonconvergenceError, ObstacleProblem, StepCollapseError
from .obstacle import solve as obstacle_solve
from .verification import SUITES, format_table, run_suite

EXIT_OK = 0
EXIT_NONCONVERGENCE = 2
EXIT_USAGE = 64
EXIT_DATA = 65

MAGIC = b"FTF1"
VERSION = 1


class ConfigError(ValueError):
    """Invalid configuration; the message starts with the offending key path."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


class SnapshotFormatError(ValueError):
    pass


# ---------------------------------------------------------------- config


INITIAL_KINDS = ("dyda", "rescaled_C", "higher_order", "gaussian", "bump_sum", "snapshot_file")

_INITIAL_PARAMS = {
    "dyda": {"scale", "shift"},
    "rescaled_C": {"C", "mass", "time"},
    "higher_order": {"K"},
    "gaussian": {"amplitude", "width", "center"},
    "bump_sum": {"centers", "widths", "amplitudes", "count"},
    "snapshot_file": {"path"},
}

_SOLVER_KEYS = {
    "picard_tol",
    "picard_max_iters",
    "linear_tol",
    "linear_max_iters",
    "anderson_depth",
    "anderson_damping",
    "max_step_splits",
}


@dataclass(frozen=True)
class InitialSpec:
    kind: str
    parameters: dict = field(default_factory=dict)


@dataclass(frozen=True)
class SimConfig:
    dimension: int
    s: float
    family: str
    mode: str
    n: int
    L: float
    dt: float
    t_end: float
    initial: InitialSpec
    epsilon: float = 1e-6
    cap: float = 1e6
    sample_every: int = 100
    output_dir: str = "out"
    seed: int = 0
    start_time: float = 0.0
    solver: dict = field(default_factory=dict)

    def grid(self) -> Grid:
        return Grid(self.dimension, self.n, self.L)

    def constants(self) -> ConstantSet:
        return model_constants(self.dimension, self.s, self.family)

    def mobility(self) -> MobilityParams:
        return MobilityParams(self.epsilon, self.cap)

    def stepper(self) -> StepperConfig:
        return StepperConfig(self.dt, mode=Mode(self.mode), family=Family(self.family), **self.solver)


def _reject_duplicates(pairs):
    out = {}
    for k, v in pairs:
        if k in out:
            raise ConfigError(k, "duplicate key")
        out[k] = v
    return out


def _load_json(text: str) -> Any:
    try:
        return json.loads(text, object_pairs_hook=_reject_duplicates)
    except json.JSONDecodeError as exc:
        raise ConfigError("$", f"malformed JSON ({exc.msg} at line {exc.lineno} column {exc.colno})") from None


def _check_keys(obj: Any, path: str, required: set, optional: set) -> None:
    if not isinstance(obj, dict):
        raise ConfigError(path, "expected an object")
    for k in obj:
        if k not in required and k not in optional:
            raise ConfigError(f"{path}.{k}", "unknown key")
    for k in sorted(required):
        if k not in obj:
            raise ConfigError(f"{path}.{k}", "missing required key")


def _number(obj: dict, key: str, path: str, lo=None, hi=None, lo_open=False, hi_open=False, default=None):
    if key not in obj:
        if default is None:
            raise ConfigError(f"{path}.{key}", "missing required key")
        return default
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(float(v)):
        raise ConfigError(f"{path}.{key}", f"expected a finite number, got {v!r}")
    v = float(v)
    if lo is not None and (v < lo or (lo_open and v == lo)):
        raise ConfigError(f"{path}.{key}", f"value {v!r} out of range")
    if hi is not None and (v > hi or (hi_open and v == hi)):
        raise ConfigError(f"{path}.{key}", f"value {v!r} out of range")
    return v


def _integer(obj: dict, key: str, path: str, lo=None, default=None):
    if key not in obj:
        if default is None:
            raise ConfigError(f"{path}.{key}", "missing required key")
        return default
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{path}.{key}", f"expected an integer, got {v!r}")
    if lo is not None and v < lo:
        raise ConfigError(f"{path}.{key}", f"value {v!r} out of range")
    return v


def _choice(obj: dict, key: str, path: str, options: Sequence[str]) -> str:
    if key not in obj:
        raise ConfigError(f"{path}.{key}", "missing required key")
    v = obj[key]
    if v not in options:
        raise ConfigError(f"{path}.{key}", f"expected one of {', '.join(options)}, got {v!r}")
    return v


def _parse_grid(obj: Any, path: str) -> tuple[int, float]:
    _check_keys(obj, path, {"n", "L"}, set())
    n = _integer(obj, "n", path, lo=16)
    if n & (n - 1):
        raise ConfigError(f"{path}.n", f"must be a power of two, got {n}")
    return n, _number(obj, "L", path, lo=0.0, lo_open=True)


def _parse_initial(obj: Any, path: str) -> InitialSpec:
    _check_keys(obj, path, {"kind"}, {"parameters"})
    kind = _choice(obj, "kind", path, INITIAL_KINDS)
    params = obj.get("parameters", {})
    ppath = f"{path}.parameters"
    if not isinstance(params, dict):
        raise ConfigError(ppath, "expected an object")
    for k in params:
        if k not in _INITIAL_PARAMS[kind]:
            raise ConfigError(f"{ppath}.{k}", f"unknown parameter for kind {kind!r}")
    if kind == "rescaled_C" and ("C" in params) == ("mass" in params):
        raise ConfigError(ppath, "give exactly one of C or mass")
    if kind == "rescaled_C":
        key = "C" if "C" in params else "mass"
        _number(params, key, ppath, lo=0.0, lo_open=True)
        if "time" in params:
            _number(params, "time", ppath, lo=-1.0, lo_open=True)
    if kind == "higher_order":
        _number(params, "K", ppath, lo=0.0, lo_open=True)
    if kind == "snapshot_file" and not isinstance(params.get("path"), str):
        raise ConfigError(f"{ppath}.path", "expected a file path string")
    if kind == "bump_sum" and "count" not in params and "centers" not in params:
        raise ConfigError(ppath, "give centers or count")
    return InitialSpec(kind, dict(params))


def _parse_solver(obj: Any, path: str) -> dict:
    _check_keys(obj, path, set(), _SOLVER_KEYS)
    out = {}
    for k, v in obj.items():
        if k in ("picard_max_iters", "linear_max_iters", "anderson_depth", "max_step_splits"):
            out[k] = _integer(obj, k, path, lo=0 if k in ("anderson_depth", "max_step_splits") else 1)
        elif k == "anderson_damping":
            out[k] = _number(obj, k, path, lo=0.0, hi=1.0, lo_open=True)
        else:
            out[k] = _number(obj, k, path, lo=0.0, lo_open=True)
    return out


_CONFIG_REQUIRED = {"dimension", "s", "family", "mode", "grid", "dt", "t_end", "initial"}
_CONFIG_OPTIONAL = {"epsilon", "cap", "sample_every", "output_dir", "seed", "start_time", "solver"}


def parse_config(text: str) -> SimConfig:
    """Strictly validated SimConfig from JSON text."""
    obj = _load_json(text)
    p = "config"
    _check_keys(obj, p, _CONFIG_REQUIRED, _CONFIG_OPTIONAL)
    dim = _integer(obj, "dimension", p)
    if dim not in (1, 2):
        raise ConfigError(f"{p}.dimension", f"must be 1 or 2, got {dim}")
    s = _number(obj, "s", p, lo=0.0, hi=1.0, lo_open=True, hi_open=True)
    family = _choice(obj, "family", p, [f.value for f in Family])
    mode = _choice(obj, "mode", p, [m.value for m in Mode])
    n, L = _parse_grid(obj["grid"], f"{p}.grid")
    dt = _number(obj, "dt", p, lo=0.0, lo_open=True)
    start = _number(obj, "start_time", p, lo=-1.0, lo_open=True, default=0.0)
    t_end = _number(obj, "t_end", p)
    if t_end < start:
        raise ConfigError(f"{p}.t_end", "must not precede start_time")
    eps = _number(obj, "epsilon", p, lo=0.0, lo_open=True, default=1e-6)
    cap = _number(obj, "cap", p, lo=eps, default=1e6)
    sample_every = _integer(obj, "sample_every", p, lo=1, default=100)
    out_dir = obj.get("output_dir", "out")
    if not isinstance(out_dir, str) or not out_dir:
        raise ConfigError(f"{p}.output_dir", "expected a nonempty path string")
    seed = _integer(obj, "seed", p, lo=0, default=0)
    solver = _parse_solver(obj.get("solver", {}), f"{p}.solver")
    initial = _parse_initial(obj["initial"], f"{p}.initial")
    return SimConfig(
        dimension=dim,
        s=s,
        family=family,
        mode=mode,
        n=n,
        L=L,
        dt=dt,
        t_end=t_end,
        initial=initial,
        epsilon=eps,
        cap=cap,
        sample_every=sample_every,
        output_dir=out_dir,
        seed=seed,
        start_time=start,
        solver=solver,
    )


def config_to_dict(cfg: SimConfig) -> dict:
    d = asdict(cfg)
    d["grid"] = {"n": d.pop("n"), "L": d.pop("L")}
    d["initial"] = {"kind": cfg.initial.kind, "parameters": dict(cfg.initial.parameters)}
    return d


def serialize_config(cfg: SimConfig) -> str:
    return json.dumps(config_to_dict(cfg), indent=2, sort_keys=True)


@dataclass(frozen=True)
class ObstacleConfig:
    dimension: int
    s: float
    n: int
    L: float
    beta: float | None = None
    confinement_constant: float = 1.0
    tol: float = 1e-6
    max_iters: int = 20000
    initial: InitialSpec | None = None
    output_dir: str = "out"
    seed: int = 0


def parse_obstacle_config(text: str) -> ObstacleConfig:
    obj = _load_json(text)
    p = "config"
    _check_keys(
        obj,
        p,
        {"dimension", "s", "grid"},
        {"beta", "confinement_constant", "tol", "max_iters", "initial", "output_dir", "seed"},
    )
    dim = _integer(obj, "dimension", p)
    if dim not in (1, 2):
        raise ConfigError(f"{p}.dimension", f"must be 1 or 2, got {dim}")
    s = _number(obj, "s", p, lo=0.0, hi=1.0, lo_open=True, hi_open=True)
    n, L = _parse_grid(obj["grid"], f"{p}.grid")
    beta = None
    if "beta" in obj:
        beta = _number(obj, "beta", p, lo=0.0, lo_open=True)
    out_dir = obj.get("output_dir", "out")
    if not isinstance(out_dir, str) or not out_dir:
        raise ConfigError(f"{p}.output_dir", "expected a nonempty path string")
    return ObstacleConfig(
        dimension=dim,
        s=s,
        n=n,
        L=L,
        beta=beta,
        confinement_constant=_number(obj, "confinement_constant", p, lo=0.0, lo_open=True, default=1.0),
        tol=_number(obj, "tol", p, lo=0.0, lo_open=True, default=1e-6),
        max_iters=_integer(obj, "max_iters", p, lo=1, default=20000),
        initial=_parse_initial(obj["initial"], f"{p}.initial") if "initial" in obj else None,
        output_dir=out_dir,
        seed=_integer(obj, "seed", p, lo=0, default=0),
    )


# ---------------------------------------------------------------- initial data


def _as_points(value, d: int, path: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if d == 1 and arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim == 1 and arr.shape[0] == d:
        return arr
    raise ConfigError(path, f"expected a point with {d} coordinates")


def _bump(grid: Grid, center: np.ndarray, width: float, amplitude: float) -> np.ndarray:
    r2 = sum((c - x0) ** 2 for c, x0 in zip(grid.coordinates(), center))
    return amplitude * np.maximum(1 - r2 / width**2, 0.0) ** 2


def build_initial(spec: InitialSpec, grid: Grid, cset: ConstantSet, seed: int = 0, time: float = 0.0) -> Field:
    """Sample the initial datum; the result is checked to be nonnegative."""
    p = spec.parameters
    path = "config.initial.parameters"
    d = grid.dimension
    if cset.family is not Family.SECOND and spec.kind in ("dyda", "rescaled_C"):
        cset = model_constants(cset.d, cset.s, Family.SECOND)
    if spec.kind == "dyda":
        shift = _as_points(p.get("shift", [0.0] * d), d, f"{path}.shift")
        base = rescaled_radial(cset, 1.0)
        r = np.sqrt(sum((c - x0) ** 2 for c, x0 in zip(grid.coordinates(), shift)))
        vals = float(p.get("scale", 1.0)) * base.evaluator(r)
    elif spec.kind == "rescaled_C":
        C = float(p["C"]) if "C" in p else constant_for_mass(cset, float(p["mass"]))
        if "time" in p:
            vals = selfsimilar_field(grid, float(p["time"]), C, cset).values
        else:
            vals = profile_for_constant(grid, cset, C).values
    elif spec.kind == "higher_order":
        fourth = cset if cset.family is Family.FOURTH else model_constants(cset.d, cset.s, Family.FOURTH)
        vals = profile_higher_order(grid, fourth, float(p["K"])).field.values
    elif spec.kind == "gaussian":
        center = _as_points(p.get("center", [0.0] * d), d, f"{path}.center")
        w = float(p.get("width", 1.0))
        r2 = sum((c - x0) ** 2 for c, x0 in zip(grid.coordinates(), center))
        vals = float(p.get("amplitude", 1.0)) * np.exp(-r2 / w**2)
    elif spec.kind == "bump_sum":
        if "centers" in p:
            centers = [_as_points(c, d, f"{path}.centers") for c in p["centers"]]
            k = len(centers)
            widths = list(p.get("widths", [1.0] * k))
            amps = list(p.get("amplitudes", [1.0] * k))
            if len(widths) != k or len(amps) != k:
                raise ConfigError(path, "centers, widths and amplitudes must have equal lengths")
        else:
            k = int(p["count"])
            rng = np.random.default_rng(seed)
            half = grid.side_length / 8
            centers = [rng.uniform(-half, half, size=d) for _ in range(k)]
            widths = list(rng.uniform(0.5, 1.5, size=k))
            amps = list(rng.uniform(0.2, 1.0, size=k))
        vals = sum(_bump(grid, c, float(w), float(a)) for c, w, a in zip(centers, widths, amps))
        vals = np.broadcast_to(vals, grid.shape).astype(float)
    elif spec.kind == "snapshot_file":
        f = read_snapshot(p["path"], expected_dimension=d)
        if f.grid != grid:
            raise SnapshotFormatError("snapshot grid does not match the configured grid")
        vals = f.values
        time = f.time
    else:
        raise ConfigError("config.initial.kind", f"unknown kind {spec.kind!r}")
    vals = np.asarray(vals, dtype=float)
    if vals.min() < 0:
        raise ConfigError("config.initial", "initial datum must be nonnegative")
    return Field(grid, vals.copy(), time)


# ---------------------------------------------------------------- snapshots


@dataclass(frozen=True)
class Snapshot:
    field: Field
    s: float


def write_snapshot(f: Field, path, s: float = 0.0) -> None:
    g = f.grid
    head = struct.pack("<4sIB", MAGIC, VERSION, g.dimension)
    head += struct.pack("<" + "Q" * g.dimension, *g.shape)
    head += struct.pack("<ddd", g.side_length, float(s), float(f.time))
    payload = np.ascontiguousarray(f.values, dtype="<f8").tobytes(order="C")
    Path(path).write_bytes(head + payload)


def load_snapshot(path, expected_dimension: int | None = None) -> Snapshot:
    data = Path(path).read_bytes()
    if len(data) < 9 or data[:4] != MAGIC:
        raise SnapshotFormatError(f"{path}: bad magic, not an FTF1 snapshot")
    version, dim = struct.unpack_from("<IB", data, 4)
    if version != VERSION:
        raise SnapshotFormatError(f"{path}: unsupported version {version}")
    if dim not in (1, 2):
        raise SnapshotFormatError(f"{path}: invalid dimension {dim}")
    if expected_dimension is not None and dim != expected_dimension:
        raise SnapshotFormatError(f"{path}: dimension {dim} does not match expected {expected_dimension}")
    off = 9
    need = off + 8 * dim + 24
    if len(data) < need:
        raise SnapshotFormatError(f"{path}: truncated header")
    counts = struct.unpack_from("<" + "Q" * dim, data, off)
    off += 8 * dim
    L, s, t = struct.unpack_from("<ddd", data, off)
    off += 24
    if len(set(counts)) != 1:
        raise SnapshotFormatError(f"{path}: unequal axis counts {counts}")
    total = int(np.prod(counts))
    if len(data) - off != 8 * total:
        raise SnapshotFormatError(f"{path}: payload has {len(data) - off} bytes, expected {8 * total}")
    values = np.frombuffer(data, dtype="<f8", count=total, offset=off).astype(float).reshape(counts)
    try:
        grid = Grid(dim, int(counts[0]), L)
        field_ = Field(grid, values, t)
    except ValueError as exc:
        raise SnapshotFormatError(f"{path}: {exc}") from None
    return Snapshot(field_, s)


def read_snapshot(path, expected_dimension: int | None = None) -> Field:
    return load_snapshot(path, expected_dimension).field


# ---------------------------------------------------------------- NDJSON


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"not serializable: {type(obj).__name__}")


def ndjson_line(record) -> str:
    data = record.to_dict() if hasattr(record, "to_dict") else dict(record)
    return json.dumps(data, sort_keys=True, default=_json_default, allow_nan=False)


def read_ndjson(path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


# ---------------------------------------------------------------- commands


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse exits with 2 by default
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _read_text(path: str) -> str:
    return Path(path).read_text(encoding="utf-8")


def _run_evolution(cfg: SimConfig, out: Path, target: Field | None = None, curve: Path | None = None) -> int:
    out.mkdir(parents=True, exist_ok=True)
    grid = cfg.grid()
    cset = cfg.constants()
    sc = cfg.stepper()
    mp = cfg.mobility()
    u0 = build_initial(cfg.initial, grid, cset, cfg.seed, cfg.start_time)
    if cfg.initial.kind != "snapshot_file":
        u0 = Field(grid, u0.values, cfg.start_time)
    count = [0]
    diag = open(out / "diagnostics.ndjson", "w", encoding="utf-8")
    writer = None
    curve_fh = None
    if curve is not None:
        curve_fh = open(curve, "w", newline="", encoding="utf-8")
        writer = csv.writer(curve_fh)
        writer.writerow(["tau", "l1_distance", "fp_energy", "min_value"])

    def on_sample(state: EvolutionState, rec) -> None:
        write_snapshot(state.u, out / f"snapshot_{count[0]:05d}.ftf1", cfg.s)
        count[0] += 1
        diag.write(ndjson_line(rec) + "\n")
        diag.flush()
        if writer is not None:
            writer.writerow([repr(rec.time), repr(rec.l1_to_target), repr(rec.fp_energy), repr(rec.min_value)])

    try:
        traj = evolve(u0, mp, sc, cset, cfg.t_end, cfg.sample_every, target=target, on_sample=on_sample)
    finally:
        diag.close()
        if curve_fh is not None:
            curve_fh.close()
    meta = dict(traj.metadata)
    meta["config"] = config_to_dict(cfg)
    meta["samples"] = len(traj)
    meta["status"] = "ok" if traj.error is None else f"nonconvergence: {traj.error}"
    (out / "run.json").write_text(json.dumps(meta, indent=2, sort_keys=True, default=_json_default))
    if traj.error is not None:
        print(f"solver failure: {traj.error}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    last = traj.records[-1]
    print(f"completed t={last.time:.6g} samples={len(traj)} mass={last.mass:.12g} min={last.min_value:.3e}")
    return EXIT_OK


def cmd_evolve(args) -> int:
    cfg = parse_config(_read_text(args.config))
    out = Path(args.output_dir or cfg.output_dir)
    if args.epsilon_continuation == 0:
        return _run_evolution(cfg, out)
    status = EXIT_OK
    for j in range(args.epsilon_continuation + 1):
        cfg_j = SimConfig(**{**cfg.__dict__, "epsilon": cfg.epsilon / 2**j, "cap": max(cfg.cap, cfg.epsilon)})
        print(f"run {j}: epsilon={cfg_j.epsilon:.3e}")
        status = max(status, _run_evolution(cfg_j, out / f"eps_{j}"))
    return status


def cmd_longtime(args) -> int:
    cfg = parse_config(_read_text(args.config))
    if cfg.family != Family.SECOND.value:
        raise ConfigError("config.family", "the long-time target is defined for the second family")
    if cfg.mode != Mode.FOKKER_PLANCK.value:
        cfg = SimConfig(**{**cfg.__dict__, "mode": Mode.FOKKER_PLANCK.value})
    out = Path(args.output_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    grid = cfg.grid()
    cset = cfg.constants()
    u0 = build_initial(cfg.initial, grid, cset, cfg.seed)
    C = constant_for_mass(cset, mass(u0))
    target = profile_for_constant(grid, cset, C)
    (out / "target.json").write_text(json.dumps({"C": C, "mass": mass(u0)}, indent=2))
    return _run_evolution(cfg, out, target=target, curve=out / "convergence.csv")


def cmd_profile(args) -> int:
    family = Family(args.family)
    cset = model_constants(args.d, args.s, family)
    info: dict = {"constants": cset.to_dict()}
    if family is Family.SECOND:
        if (args.C is None) == (args.mass is None):
            raise _UsageError("profile needs exactly one of --C or --mass")
        C = args.C if args.C is not None else constant_for_mass(cset, args.mass)
        radius = math.sqrt(C) * cset.radius_RD
        L = args.L or 4 * radius
        n = args.n or (1024 if args.d == 1 else 256)
        grid = Grid(args.d, n, L)
        f = profile_for_constant(grid, cset, C)
        C1, C2 = barenblatt_coefficients(cset, C)
        info.update(C=C, mass=mass(f), C1=C1, C2=C2, support_radius=radius)
    else:
        K = args.K if args.K is not None else 1.0
        radius = math.sqrt(K) / cset.lam
        L = args.L or 4 * radius
        n = args.n or (1024 if args.d == 1 else 256)
        grid = Grid(args.d, n, L)
        prof = profile_higher_order(grid, cset, K)
        f = prof.field
        info.update(K=K, A=prof.A, K2=prof.K2, C=prof.C, support_radius=prof.support_radius)
    info["grid"] = {"n": grid.points_per_axis, "L": grid.side_length}
    text = json.dumps(info, indent=2, sort_keys=True)
    if args.out:
        prefix = Path(args.out)
        prefix.parent.mkdir(parents=True, exist_ok=True)
        write_snapshot(f, prefix.with_suffix(".ftf1"), args.s)
        prefix.with_suffix(".json").write_text(text + "\n")
    print(text)
    return EXIT_OK


def cmd_verify(args) -> int:
    checks = run_suite(args.suite, args.d, args.s)
    print(format_table(checks))
    ok = all(c.passed for c in checks)
    print("ALL PASS" if ok else "FAILURES PRESENT")
    return EXIT_OK if ok else 1


def cmd_obstacle(args) -> int:
    cfg = parse_obstacle_config(_read_text(args.config))
    out = Path(args.output_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    grid = Grid(cfg.dimension, cfg.n, cfg.L)
    cset = model_constants(cfg.dimension, cfg.s)
    beta = cset.beta if cfg.beta is None else cfg.beta
    prob = ObstacleProblem(grid, cfg.s, beta, cfg.confinement_constant)
    initial = None if cfg.initial is None else build_initial(cfg.initial, grid, cset, cfg.seed)
    try:
        sol = obstacle_solve(prob, cfg.tol, cfg.max_iters, initial)
    except (ObstacleNonconvergenceError, StepCollapseError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    write_snapshot(sol.v, out / "solution.ftf1", cfg.s)
    report = {
        "energy": sol.energy,
        "kkt_residual": sol.kkt_residual,
        "iterations": sol.iterations,
        "support_radius_estimate": sol.support_radius_estimate,
        "implied_radius": prob.implied_radius(),
        "beta": beta,
    }
    if cfg.beta is None and cfg.confinement_constant == 1.0:
        report["linf_to_closed_form"] = float(np.max(np.abs(sol.v.values - profile_dyda(grid, cset).values)))
    (out / "kkt_report.json").write_text(json.dumps(report, indent=2, sort_keys=True))
    print(json.dumps(report, indent=2, sort_keys=True))
    return EXIT_OK


class _UsageError(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fracfilm", description="Fractional thin-film solver and identity checks")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("evolve", help="run an evolution from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--output-dir")
    p.add_argument(
        "--epsilon-continuation",
        type=int,
        default=0,
        metavar="K",
        help="also rerun with epsilon halved K times, one subdirectory per run",
    )
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("profile", help="sample a closed-form profile and dump its constants")
    p.add_argument("--d", type=int, choices=(1, 2), required=True)
    p.add_argument("--s", type=float, required=True)
    p.add_argument("--family", choices=[f.value for f in Family], default="second")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--C", type=float)
    group.add_argument("--mass", type=float)
    p.add_argument("--K", type=float, help="fourth-family profile parameter")
    p.add_argument("--n", type=int)
    p.add_argument("--L", type=float)
    p.add_argument("--out", help="path prefix for the .ftf1 and .json outputs")
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("verify", help="run identity residual suites")
    p.add_argument("--d", type=int, choices=(1, 2), required=True)
    p.add_argument("--s", type=float, required=True)
    p.add_argument("--suite", choices=[*SUITES, "all"], default="all")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("obstacle", help="solve the obstacle problem")
    p.add_argument("--config", required=True)
    p.add_argument("--output-dir")
    p.set_defaults(func=cmd_obstacle)

    p = sub.add_parser("longtime", help="Fokker-Planck run with distance to the mass-matched profile")
    p.add_argument("--config", required=True)
    p.add_argument("--output-dir")
    p.set_defaults(func=cmd_longtime)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except _UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"fracfilm: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, SnapshotFormatError) as exc:
        print(f"fracfilm: invalid data: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"fracfilm: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"fracfilm: invalid value: {exc}", file=sys.stderr)
        return EXIT_DATA


__all__ = [
    "ConfigError",
    "InitialSpec",
    "ObstacleConfig",
    "SimConfig",
    "Snapshot",
    "SnapshotFormatError",
    "build_initial",
    "build_parser",
    "config_to_dict",
    "load_snapshot",
    "main",
    "ndjson_line",
    "parse_config",
    "parse_obstacle_config",
    "read_ndjson",
    "read_snapshot",
    "run_metadata",
    "serialize_config",
    "write_snapshot",
]
