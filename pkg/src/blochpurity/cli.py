"""Command-line front end.

A run is described by a flat key-value config file carrying one
`command` key (model, apogee, simulate, constant, ritz, bangbang), a
model source (either Lindblad vectors l1, l2, ... as lists of
(re, im) pairs, or planar parameters b1, b2, alpha1, alpha2), and
solver options.  Command-line flags override config values.  Results
are printed to stdout and written under --out as CSV/JSON (and PNG
figures unless plotting is disabled); identical inputs produce
byte-identical artifacts.

Exit codes: 0 success, 2 invalid config, 3 solver non-convergence,
4 chimney or feasibility violation.  BLOCH_LOG selects the diagnostic
verbosity on stderr (debug, info, warning, error).
"""

from __future__ import annotations

import argparse
import ast
import json
import logging
import math
import os
import re
import sys
from dataclasses import dataclass, field

import numpy as np

from . import bangbang_synthesis as bb
from . import bloch_model, ritz_solver
from .planar_system import (
    ChimneyViolation,
    PlanarSystem,
    RadiusTurnaround,
    Trajectory,
    integrate,
    piecewise_constant,
)

log = logging.getLogger("blochpurity")

COMMANDS = ("model", "apogee", "simulate", "constant", "ritz", "bangbang")


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------- parsing

def _parse_value(raw: str):
    try:
        return ast.literal_eval(raw)
    except (ValueError, SyntaxError):
        return raw


def parse_config(path: str) -> dict:
    """Flat key = value lines; '#' comments.  Returns key -> (value, line_no)."""
    entries: dict = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for no, line in enumerate(lines, start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{no}: expected 'key = value', got {line.strip()!r}")
        key, raw = stripped.split("=", 1)
        key = key.strip().lower()
        if not key:
            raise ConfigError(f"{path}:{no}: empty key")
        if key in entries:
            raise ConfigError(f"{path}:{no}: duplicate key {key!r}")
        entries[key] = (_parse_value(raw.strip()), no)
    return entries


def _complex_vector(value, where: str) -> tuple:
    if not isinstance(value, (list, tuple)) or len(value) != 3:
        raise ConfigError(f"{where}: a Lindblad vector is a list of three (re, im) pairs")
    comps = []
    for item in value:
        if isinstance(item, (list, tuple)) and len(item) == 2:
            re_, im_ = item
        elif isinstance(item, (int, float)):
            re_, im_ = item, 0.0
        else:
            raise ConfigError(f"{where}: component {item!r} is neither a (re, im) pair nor a real")
        if not (math.isfinite(re_) and math.isfinite(im_)):
            raise ConfigError(f"{where}: non-finite component {item!r}")
        comps.append(complex(re_, im_))
    return tuple(comps)


_PLANAR_KEYS = ("b1", "b2", "alpha1", "alpha2")


def extract_model(entries: dict, path: str):
    """Model source from parsed entries: LindbladSpec or PlanarSystem."""
    l_keys = sorted((k for k in entries if re.fullmatch(r"l\d+", k)), key=lambda k: int(k[1:]))
    planar_present = [k for k in _PLANAR_KEYS if k in entries]
    if l_keys and planar_present:
        raise ConfigError(f"{path}: both Lindblad vectors and planar parameters present; give exactly one model source")
    if l_keys:
        vectors = tuple(
            _complex_vector(entries[k][0], f"{path}:{entries[k][1]} ({k})") for k in l_keys
        )
        return bloch_model.LindbladSpec(lindblad_vectors=vectors)
    if planar_present:
        missing = [k for k in _PLANAR_KEYS if k not in entries]
        if missing:
            raise ConfigError(f"{path}: planar model incomplete, missing {', '.join(missing)}")
        vals = {}
        for k in _PLANAR_KEYS:
            v, no = entries[k]
            if not isinstance(v, (int, float)):
                raise ConfigError(f"{path}:{no}: {k} must be a number, got {v!r}")
            vals[k] = float(v)
        try:
            return PlanarSystem(**vals)
        except ValueError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    raise ConfigError(f"{path}: no model source (give l1, l2, ... or b1, b2, alpha1, alpha2)")


def load_model(path: str):
    """Parse a model file on its own; config keys other than the model are ignored."""
    return extract_model(parse_config(path), path)


_OPTION_SPEC = {
    # key: (python type, validator, message)
    "out": (str, None, None),
    "seed": (int, lambda v: v >= 0, "seed must be a nonnegative integer"),
    "order": (int, lambda v: v >= 1, "order must be >= 1"),
    "restarts": (int, lambda v: v >= 1, "restarts must be >= 1"),
    "dt": (float, lambda v: v > 0, "dt must be positive"),
    "horizon": (float, lambda v: v > 0, "horizon must be positive"),
    "t_min": (float, lambda v: v > 0, "t_min must be positive"),
    "scan_step": (float, lambda v: v > 0, "scan_step must be positive"),
    "eps": (float, lambda v: v > 0, "eps must be positive"),
    "delta": (float, lambda v: v >= 0, "delta must be nonnegative"),
    "max_switches": (int, lambda v: v >= 0, "max_switches must be >= 0"),
    "cubic_variant": (str, lambda v: v in ("printed", "squared"), "cubic_variant must be printed or squared"),
    "initial_sign": (float, lambda v: v in (1.0, -1.0), "initial_sign must be +1 or -1"),
    "control": (str, None, None),
    "q0": (tuple, None, None),
    "plot": (bool, None, None),
}

_TRUTHY = {"true": True, "yes": True, "on": True, "false": False, "no": False, "off": False}


@dataclass
class RunConfig:
    command: str
    model: object
    out: str = "."
    seed: int = 0
    order: int = 7
    restarts: int = 25
    dt: float = 1e-3
    horizon: float = 6.0
    t_min: float = 1e-6
    scan_step: float = 1e-3
    eps: float = 1e-3
    delta: float = 1e-3
    max_switches: int = 16
    cubic_variant: str = "printed"
    initial_sign: float = 1.0
    control: str | None = None
    q0: tuple | None = None
    plot: bool = True
    config_dir: str = "."


def _coerce_option(key, value, where):
    typ, check, msg = _OPTION_SPEC[key]
    if typ is bool and isinstance(value, str):
        if value.lower() not in _TRUTHY:
            raise ConfigError(f"{where}: {key} must be a boolean, got {value!r}")
        value = _TRUTHY[value.lower()]
    if typ is float and isinstance(value, (int, float)):
        value = float(value)
    if typ is int:
        if not isinstance(value, int):
            raise ConfigError(f"{where}: {key} must be an integer, got {value!r}")
    elif typ is tuple:
        if not isinstance(value, (list, tuple)) or not all(isinstance(v, (int, float)) for v in value):
            raise ConfigError(f"{where}: {key} must be a tuple of numbers, got {value!r}")
        value = tuple(float(v) for v in value)
    elif not isinstance(value, typ):
        raise ConfigError(f"{where}: {key} must be {typ.__name__}, got {value!r}")
    if check is not None and not check(value):
        raise ConfigError(f"{where}: {msg}, got {value!r}")
    return value


def build_run_config(path: str, overrides: dict) -> RunConfig:
    entries = parse_config(path)
    model = extract_model(entries, path)

    consumed = {k for k in entries if re.fullmatch(r"l\d+", k)} | set(_PLANAR_KEYS) & set(entries)
    kwargs = {}

    if "command" in entries:
        cmd, no = entries["command"]
        consumed.add("command")
        if cmd not in COMMANDS:
            raise ConfigError(f"{path}:{no}: unknown command {cmd!r}; choose from {', '.join(COMMANDS)}")
        kwargs["command"] = cmd
    for key in _OPTION_SPEC:
        alias = "m" if key == "order" else None
        for k in (key, alias):
            if k is not None and k in entries:
                value, no = entries[k]
                kwargs[key] = _coerce_option(key, value, f"{path}:{no}")
                consumed.add(k)

    unknown = set(entries) - consumed
    if unknown:
        raise ConfigError(f"{path}: unknown keys {', '.join(sorted(unknown))}")

    for key, value in overrides.items():
        if value is None:
            continue
        if key == "command":
            if value not in COMMANDS:
                raise ConfigError(f"unknown command {value!r}")
            kwargs["command"] = value
        else:
            kwargs[key] = _coerce_option(key, value, "command line")

    if "command" not in kwargs:
        raise ConfigError(f"{path}: no command given (config key or positional argument)")
    return RunConfig(model=model, config_dir=os.path.dirname(os.path.abspath(path)), **kwargs)


# ---------------------------------------------------------------- emitting

def _fmt(v: float) -> str:
    return f"{float(v):.9g}"


def write_csv(path: str, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def trajectory_rows(traj: Trajectory, arc=None):
    r = traj.r
    p = traj.purity
    for k in range(traj.t.size):
        row = [traj.t[k], *traj.q[k], *np.atleast_1d(traj.u[k]), r[k], p[k]]
        if arc is not None:
            row.append(arc[k])
        yield row


def trajectory_header(traj: Trajectory, arc: bool = False):
    if traj.q.shape[1] == 2:
        head = ["t", "x", "y", "u", "r", "purity"]
    else:
        head = ["t", "x", "y", "z", "ux", "uy", "uz", "r", "purity"]
    return head + ["arc"] if arc else head


def write_trajectory_csv(traj: Trajectory, path: str, arc=None):
    write_csv(path, trajectory_header(traj, arc is not None), trajectory_rows(traj, arc))


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def write_json(obj, path: str):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(json.dumps(obj, indent=2, default=_jsonable) + "\n")


# ---------------------------------------------------------------- commands

def _planar_system(cfg: RunConfig) -> PlanarSystem:
    if isinstance(cfg.model, PlanarSystem):
        return cfg.model
    m = bloch_model.build_dissipation(cfg.model)
    try:
        system, _ = bloch_model.reduce_to_planar(m)
    except bloch_model.ReductionError as exc:
        raise ConfigError(f"command {cfg.command!r} needs a planar system: {exc}") from exc
    log.info("reduced Lindblad model to planar parameters b=(%g, %g), alpha=(%g, %g)",
             system.b1, system.b2, system.alpha1, system.alpha2)
    return system


def _geometry_model(cfg: RunConfig) -> bloch_model.DissipationModel:
    if isinstance(cfg.model, PlanarSystem):
        return bloch_model.model_from_planar(cfg.model)
    return bloch_model.build_dissipation(cfg.model)


def _initial_state(cfg: RunConfig, system: PlanarSystem) -> np.ndarray:
    if cfg.q0 is not None:
        if len(cfg.q0) != 2:
            raise ConfigError("q0 must have two components for planar commands")
        return np.array(cfg.q0, dtype=float)
    bnorm = math.hypot(system.b1, system.b2)
    if bnorm == 0.0:
        raise ConfigError("b = 0 has no canonical initial state; set q0 in the config")
    return cfg.eps * np.array([system.b1, system.b2]) / bnorm


def cmd_model(cfg: RunConfig) -> int:
    m = _geometry_model(cfg)
    print("b =", np.array2string(m.b, precision=9))
    print("B =", np.array2string(m.B, precision=9).replace("\n", "\n    "))
    if m.A is not None:
        print("A =", np.array2string(m.A, precision=9).replace("\n", "\n    "))
    print("B eigenvalues =", np.array2string(m.B_eigenvalues, precision=9))
    doc = {
        "A": None if m.A is None else m.A,
        "b": m.b,
        "B": m.B,
        "n_lindblad": m.n_lindblad,
        "planar": None,
        "basis": None,
    }
    if m.n_lindblad == 1:
        system, R = bloch_model.reduce_to_planar(m)
        print(f"planar reduction: b1={_fmt(system.b1)} b2={_fmt(system.b2)} "
              f"alpha1={_fmt(system.alpha1)} alpha2={_fmt(system.alpha2)}")
        doc["planar"] = {"b1": system.b1, "b2": system.b2,
                         "alpha1": system.alpha1, "alpha2": system.alpha2}
        doc["basis"] = R
    write_json(doc, os.path.join(cfg.out, "model.json"))
    return 0


def _profile_directions(m: bloch_model.DissipationModel, n: int = 1024):
    thetas = np.linspace(0.0, 2.0 * math.pi, n, endpoint=False)
    if m.dim == 2:
        return thetas, np.stack([np.cos(thetas), np.sin(thetas)], axis=1)
    geo = bloch_model.apogee(m)
    e1 = m.b / np.linalg.norm(m.b)
    v = geo.apogee_direction - (geo.apogee_direction @ e1) * e1
    if np.linalg.norm(v) < 1e-12:
        v = np.eye(3)[int(np.argmin(np.abs(e1)))] - e1[int(np.argmin(np.abs(e1)))] * e1
    e2 = v / np.linalg.norm(v)
    dirs = np.outer(np.cos(thetas), e1) + np.outer(np.sin(thetas), e2)
    return thetas, dirs


def cmd_apogee(cfg: RunConfig) -> int:
    m = _geometry_model(cfg).require_negative_definite()
    geo = bloch_model.apogee(m)
    if geo.degenerate:
        print("apogee degenerate: b = 0, every direction is a root of f")
    else:
        print("q_apogee =", " ".join(_fmt(v) for v in geo.apogee))
        print("radius =", _fmt(geo.apogee_radius))
    thetas, dirs = _profile_directions(m)
    g = bloch_model.chimney_radius(dirs, m)
    write_csv(os.path.join(cfg.out, "apogee_profile.csv"), ["theta", "g"], zip(thetas, g))
    if cfg.plot:
        from . import figures
        figures.apogee_figure(thetas, g, geo, os.path.join(cfg.out, "apogee.png"))
    return 0


def cmd_constant(cfg: RunConfig) -> int:
    system = _planar_system(cfg)
    from .planar_system import cubic_coefficients, root_in_unit_interval

    ca = root_in_unit_interval(cubic_coefficients(system, cfg.cubic_variant))
    print(f"cubic ({ca.variant}): a={_fmt(ca.a)} b={_fmt(ca.b)} c={_fmt(ca.c)} d={_fmt(ca.d)}")
    print("discriminant =", _fmt(ca.discriminant))
    print("condition case:", ca.condition_case if ca.condition_holds else "none")
    print("real roots:", " ".join(_fmt(u) for u in ca.real_roots) or "none")
    print("roots in [-1, 1]:", " ".join(_fmt(u) for u in ca.roots_in_unit_interval) or "none")
    if ca.best_root is not None:
        print("best root =", _fmt(ca.best_root))
    write_json({
        "variant": ca.variant,
        "a": ca.a, "b": ca.b, "c": ca.c, "d": ca.d,
        "discriminant": ca.discriminant,
        "condition_case": ca.condition_case,
        "condition_holds": ca.condition_holds,
        "real_roots": list(ca.real_roots),
        "roots_in_unit_interval": list(ca.roots_in_unit_interval),
        "best_root": ca.best_root,
    }, os.path.join(cfg.out, "cubic.json"))
    return 0


def _load_control_file(path: str, dim: int):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = [ln.strip() for ln in fh]
    except OSError as exc:
        raise ConfigError(f"cannot read control file {path}: {exc}") from exc
    times, values = [], []
    for no, line in enumerate(lines, start=1):
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        try:
            row = [float(p) for p in parts]
        except ValueError:
            if no == 1:
                continue  # header line
            raise ConfigError(f"{path}:{no}: expected numbers, got {line!r}")
        if len(row) != 1 + dim:
            raise ConfigError(f"{path}:{no}: expected t and {dim} control component(s)")
        times.append(row[0])
        values.append(row[1] if dim == 1 else row[1:])
    if not times:
        raise ConfigError(f"{path}: no control samples")
    return np.array(times), np.array(values)


def cmd_simulate(cfg: RunConfig) -> int:
    if cfg.control is None:
        raise ConfigError("simulate needs a control file (config key 'control')")
    control_path = cfg.control
    if not os.path.isabs(control_path):
        control_path = os.path.join(cfg.config_dir, control_path)

    if isinstance(cfg.model, PlanarSystem):
        system = cfg.model
        times, values = _load_control_file(control_path, 1)
        u = piecewise_constant(times, values)
        q0 = _initial_state(cfg, system)
        traj = integrate(q0, u, system, dt=cfg.dt, T=cfg.horizon)
    else:
        m = bloch_model.build_dissipation(cfg.model)
        times, values = _load_control_file(control_path, 3)

        def u(t):
            k = int(np.searchsorted(times, t, side="right")) - 1
            return values[max(k, 0)]

        if cfg.q0 is not None:
            if len(cfg.q0) != 3:
                raise ConfigError("q0 must have three components for a Lindblad model")
            q0 = np.array(cfg.q0, dtype=float)
        else:
            q0, _ = bloch_model.endpoints(m, cfg.eps, cfg.delta)
        system = None
        traj = bloch_model.integrate_bloch(q0, u, m, dt=cfg.dt, T=cfg.horizon)

    print(f"final state: {' '.join(_fmt(v) for v in traj.q[-1])}")
    print(f"final purity = {_fmt(traj.purity[-1])}, radius = {_fmt(traj.r[-1])}")
    write_trajectory_csv(traj, os.path.join(cfg.out, "trajectory.csv"))
    if cfg.plot:
        from . import figures
        figures.trajectory_figure(traj, system, os.path.join(cfg.out, "trajectory.png"))
    return 0


def cmd_ritz(cfg: RunConfig) -> int:
    system = _planar_system(cfg)
    problem = ritz_solver.ritz_problem(system, cfg.order, cfg.eps, cfg.delta)
    result = ritz_solver.solve(problem, restarts=cfg.restarts, seed=cfg.seed)
    best = result.best
    print(f"order {cfg.order}: time = {_fmt(best.travel_time)}, "
          f"energy = {_fmt(best.energy)}, nu = {best.nu:.3e}")
    n_conv = sum(1 for c in result.candidates if c.converged)
    log.info("%d of %d restarts converged", n_conv, len(result.candidates))

    write_json({
        "order": cfg.order,
        "best": {"c": best.c, "time": best.travel_time, "energy": best.energy, "nu": best.nu},
        "candidates": [
            {"restart": c.restart, "c": c.c, "nu": c.nu, "converged": c.converged,
             "feasible": c.feasible, "time": c.travel_time, "energy": c.energy}
            for c in result.candidates
        ],
    }, os.path.join(cfg.out, "ritz_result.json"))
    write_trajectory_csv(best.trajectory, os.path.join(cfg.out, "trajectory.csv"))
    profile = ritz_solver.recover_profile(best.c, problem)
    write_csv(os.path.join(cfg.out, "control_profile.csv"), ["x", "u"], zip(profile.x, profile.u))
    if cfg.plot:
        from . import figures
        figures.ritz_figure(profile, system, os.path.join(cfg.out, "ritz.png"))
    return 0


def cmd_bangbang(cfg: RunConfig) -> int:
    system = _planar_system(cfg)
    q0 = _initial_state(cfg, system)
    result = bb.synthesize(q0, cfg.initial_sign, system, horizon=cfg.horizon,
                           max_switches=cfg.max_switches, dt=cfg.dt,
                           t_min=cfg.t_min, step=cfg.scan_step)
    sched = result.schedule
    if sched.switches:
        times = sched.switch_times
        print("switch times:", " ".join(_fmt(t) for t in times))
        print("gaps:", " ".join(_fmt(g) for g in sched.gaps))
    else:
        print("no switch inside the horizon")

    write_json({
        "initial_sign": int(sched.initial_sign),
        "switches": [{"t": t, "x": q[0], "y": q[1]} for t, q in sched.switches],
        "horizon": sched.horizon,
    }, os.path.join(cfg.out, "schedule.json"))
    write_trajectory_csv(result.trajectory, os.path.join(cfg.out, "bangbang_trajectory.csv"),
                         arc=result.arc_index)
    write_trajectory_csv(result.constant_plus, os.path.join(cfg.out, "constant_plus.csv"),
                         arc=np.zeros(result.constant_plus.t.size, dtype=int))
    write_trajectory_csv(result.constant_minus, os.path.join(cfg.out, "constant_minus.csv"),
                         arc=np.zeros(result.constant_minus.t.size, dtype=int))
    if cfg.plot:
        from . import figures
        figures.bangbang_figure(result, system, os.path.join(cfg.out, "bangbang.png"))
    return 0


_DISPATCH = {
    "model": cmd_model,
    "apogee": cmd_apogee,
    "constant": cmd_constant,
    "simulate": cmd_simulate,
    "ritz": cmd_ritz,
    "bangbang": cmd_bangbang,
}


def run(cfg: RunConfig) -> int:
    os.makedirs(cfg.out, exist_ok=True)
    return _DISPATCH[cfg.command](cfg)


# ---------------------------------------------------------------- entry

def _setup_logging():
    level = os.environ.get("BLOCH_LOG", "warning").strip().lower()
    levels = {"debug": logging.DEBUG, "info": logging.INFO,
              "warning": logging.WARNING, "error": logging.ERROR}
    logging.basicConfig(stream=sys.stderr, level=levels.get(level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="blochpurity",
        description="Time-minimum purity control on the Bloch ball.")
    ap.add_argument("command", nargs="?", choices=COMMANDS,
                    help="overrides the config file's command key")
    ap.add_argument("--config", required=True, help="key-value run description")
    ap.add_argument("--out", help="output directory (default .)")
    ap.add_argument("--seed", type=int, help="RNG seed for the multi-start solver")
    ap.add_argument("--order", "-M", type=int, dest="order", help="trial-curve order")
    ap.add_argument("--restarts", type=int, help="multi-start restarts")
    ap.add_argument("--dt", type=float, help="integrator step")
    ap.add_argument("--horizon", type=float, help="integration horizon")
    ap.add_argument("--initial-sign", choices=["+1", "-1", "1"], dest="initial_sign",
                    help="first bang-bang arc sign")
    ap.add_argument("--cubic-variant", choices=["printed", "squared"], dest="cubic_variant",
                    help="linear-coefficient variant of the constant-control cubic")
    ap.add_argument("--plot", action=argparse.BooleanOptionalAction, default=None,
                    help="render figures next to the CSV/JSON output")
    return ap


def main(argv=None) -> int:
    _setup_logging()
    args = _build_parser().parse_args(argv)
    overrides = {
        "command": args.command,
        "out": args.out,
        "seed": args.seed,
        "order": args.order,
        "restarts": args.restarts,
        "dt": args.dt,
        "horizon": args.horizon,
        "initial_sign": None if args.initial_sign is None else float(args.initial_sign),
        "cubic_variant": args.cubic_variant,
        "plot": args.plot,
    }
    try:
        cfg = build_run_config(args.config, overrides)
        return run(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ritz_solver.SolverFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3
    except (ChimneyViolation, RadiusTurnaround) as exc:
        print(f"feasibility violation: {exc}", file=sys.stderr)
        return 4
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
