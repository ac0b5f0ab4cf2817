"""Command-line experiment runner.

    lrlab <verify-algebra|verify-lemmas|cone|cauchy|growth|radius>
          [--config PATH] [--out DIR] [--threads N] [--tolerance X] [--seed N]

Every flag can also be given through an environment variable with the prefix
``LRLAB_`` (``LRLAB_CONFIG``, ``LRLAB_OUT``, ``LRLAB_THREADS``,
``LRLAB_TOLERANCE``, ``LRLAB_SEED``); explicit flags win. Exit status is 0 when
every checked property holds, 1 when a property fails and 2 for configuration,
precondition or resource-limit errors.

The output directory receives ``manifest.json``, ``summary.json``, one CSV per
table and an SVG line plot.
"""
import argparse
import datetime
import hashlib
import json
import math
import os
import platform
import sys

import jsonschema
import numpy as np

from . import __version__
from . import algebra as alg
from . import lab
from . import lattice
from . import zerochain as zc
from .errors import ConfigError, LabError, PreconditionViolation, ResourceLimitError
from .localization import DecayFunction, decay_sup_check
from .plotting import write_svg_lineplot
from .propagator import largest_feasible_k

SUBCOMMANDS = ("verify-algebra", "verify-lemmas", "cone", "cauchy", "growth", "radius")
ENV_PREFIX = "LRLAB_"

# ------------------------------------------------------------------ schema

_NUM = {"type": "number"}
_DECAY = {
    "type": "object",
    "properties": {"rule": {"enum": ["power_law", "exponential", "constant", "tabulated"]},
                   "nu": _NUM, "b": _NUM, "c": _NUM,
                   "radii": {"type": "array", "items": _NUM},
                   "values": {"type": "array", "items": _NUM}},
    "required": ["rule"],
    "additionalProperties": False,
}
_LATTICE = {
    "type": "object",
    "properties": {"kind": {"enum": ["chain", "grid", "file"]},
                   "length": {"type": "integer", "minimum": 1},
                   "side": {"type": "integer", "minimum": 1},
                   "D": {"type": "integer", "minimum": 1, "maximum": 2},
                   "path": {"type": "string"},
                   "x0": {}},
    "required": ["kind"],
    "additionalProperties": False,
}
_TERM = {
    "type": "object",
    "properties": {"site": {}, "string": {"type": "string", "pattern": "^[IXYZ]+$"},
                   "sites": {"type": "array"},
                   "coeff": {"type": "object",
                             "properties": {"fn": {"enum": ["const", "cos", "sin"]},
                                            "amp": _NUM, "omega": _NUM, "phase": _NUM},
                             "additionalProperties": False}},
    "required": ["site", "string"],
    "additionalProperties": False,
}
_MODEL = {
    "type": "object",
    "properties": {"name": {"enum": ["uniform_tfim", "linear_growth_tfim",
                                     "time_modulated_tfim", "zero", "terms"]},
                   "J": _NUM, "h": _NUM, "omega": _NUM,
                   "slope": {"type": "number", "minimum": 0},
                   "terms": {"type": "array", "items": _TERM}},
    "required": ["name"],
    "additionalProperties": False,
}
_INTEGRATOR = {
    "type": "object",
    "properties": {"method": {"enum": ["auto", "exact_static", "magnus2", "magnus4"]},
                   "step_size": {"type": "number", "exclusiveMinimum": 0},
                   "tolerance": {"type": "number", "exclusiveMinimum": 0},
                   "engine": {"enum": ["auto", "dense", "gaussian"]}},
    "additionalProperties": False,
}
_GRID = {
    "oneOf": [
        {"type": "array", "items": _NUM, "minItems": 1},
        {"type": "object",
         "properties": {"start": _NUM, "stop": _NUM, "num": {"type": "integer", "minimum": 1}},
         "required": ["start", "stop", "num"], "additionalProperties": False},
    ]
}
_OBSERVABLE = {
    "type": "object",
    "properties": {"pauli": {"type": "object",
                             "additionalProperties": {"enum": ["I", "X", "Y", "Z"]}}},
    "required": ["pauli"],
    "additionalProperties": False,
}
_COMMON = {
    "lattice": _LATTICE,
    "model": _MODEL,
    "G": _DECAY,
    "integrator": _INTEGRATOR,
    "dim_cap": {"type": "integer", "minimum": 1},
    "observable": _OBSERVABLE,
    "s": _NUM,
    "threads": {"type": "integer", "minimum": 1},
    "seed": {"type": "integer", "minimum": 0},
    "description": {"type": "string"},
}


def _schema(extra, required):
    props = dict(_COMMON)
    props.update(extra)
    return {"type": "object", "properties": props, "required": required,
            "additionalProperties": False}


SCHEMAS = {
    "verify-algebra": _schema({
        "spin_sites": {"type": "integer", "minimum": 2},
        "fermion_sites": {"type": "integer", "minimum": 1},
        "flavors": {"type": "integer", "minimum": 1},
        "samples": {"type": "integer", "minimum": 1},
        "tolerance": {"type": "number", "exclusiveMinimum": 0},
    }, []),
    "verify-lemmas": _schema({
        "epsilon": {"type": "number", "exclusiveMinimum": 0},
        "r_max": {"type": "number", "exclusiveMinimum": 0},
        "F": _DECAY,
        "nu": {"type": "number", "minimum": 0},
        "k_max": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
        "m_grid_density": {"type": "number", "exclusiveMinimum": 0},
        "relative_change": {"type": "number", "exclusiveMinimum": 0},
    }, []),
    "cone": _schema({
        "probe": {"enum": ["X", "Y", "Z"]},
        "t_grid": _GRID,
        "k": {"type": ["number", "null"], "minimum": 0},
        "delta": {"type": "number", "exclusiveMinimum": 0},
        "radius": {"enum": ["lattice", "interpolated"]},
    }, ["lattice", "model", "observable", "probe", "t_grid"]),
    "cauchy": _schema({
        "k_list": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
        "l_ref": {"type": ["number", "null"], "minimum": 0},
        "t": _NUM,
        "nu": {"type": "number", "exclusiveMinimum": 0},
        "F": _DECAY,
        "tau": {"type": "number", "exclusiveMinimum": 0},
        "c_lr": {"type": "number", "exclusiveMinimum": 0},
    }, ["lattice", "model", "observable", "k_list", "t", "nu", "G"]),
    "growth": _schema({
        "t_grid": _GRID,
        "nu": {"type": "number", "exclusiveMinimum": 0},
        "F": _DECAY,
        "k": {"type": ["number", "null"], "minimum": 0},
        "residual_limit": {"type": "number", "exclusiveMinimum": 0},
    }, ["lattice", "model", "observable", "t_grid", "nu", "G"]),
    "radius": _schema({
        "t_grid": _GRID,
        "delta": {"type": "number", "exclusiveMinimum": 0},
        "k": {"type": ["number", "null"], "minimum": 0},
        "radius": {"enum": ["lattice", "interpolated"]},
        "expect": {"enum": ["linear", "superlinear", "none"]},
    }, ["lattice", "model", "observable", "t_grid"]),
}


def _line_of(text, path):
    """Best-effort line number for a JSON path: the line of the last key that names it."""
    keys = [p for p in path if isinstance(p, str)]
    for key in reversed(keys):
        needle = json.dumps(key) + ":"
        for n, line in enumerate(text.splitlines(), 1):
            if needle in line.replace('" :', '":'):
                return n
    return 1


def load_config(subcommand, path):
    """Parse and validate a config file; errors carry a line number."""
    if path is None:
        text = "{}"
    else:
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg}", line=exc.lineno) from None
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object", line=1)
    validator = jsonschema.Draft7Validator(SCHEMAS[subcommand])
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        path_ = list(err.absolute_path)
        if err.validator == "additionalProperties":
            extra = sorted(set(err.instance) - set(err.schema.get("properties", {})))
            path_ = path_ + extra[:1]
            msg = f"unknown key(s) {extra} at {'/'.join(map(str, err.absolute_path)) or 'top level'}"
        else:
            msg = f"{'/'.join(map(str, path_)) or 'config'}: {err.message}"
        raise ConfigError(msg, line=_line_of(text, path_))
    return data


# ----------------------------------------------------------- config -> objects

def _site(value):
    return tuple(value) if isinstance(value, list) else value


def build_graph(cfg):
    lat = cfg["lattice"]
    kind = lat["kind"]
    if kind == "chain":
        if "length" not in lat:
            raise ConfigError("lattice/length is required for a chain")
        g = lattice.make_chain(lat["length"])
    elif kind == "grid":
        if "side" not in lat or "D" not in lat:
            raise ConfigError("lattice/side and lattice/D are required for a grid")
        g = lattice.make_grid(lat["side"], lat["D"])
    else:
        if "path" not in lat:
            raise ConfigError("lattice/path is required for a graph file")
        g = lattice.load_graph(lat["path"])
    if "x0" in lat:
        g = lattice.with_center(g, _site(lat["x0"]))
    return g


def build_context(cfg, graph):
    return alg.AlgebraContext.spin(graph, dim_cap=cfg.get("dim_cap", alg.DEFAULT_DIM_CAP))


def build_chain(cfg, ctx):
    m = cfg["model"]
    name = m["name"]
    J, h = m.get("J", 1.0), m.get("h", 1.0)
    G = DecayFunction.from_config(cfg["G"]) if "G" in cfg else None
    if name == "uniform_tfim":
        chain = zc.model_uniform_tfim(ctx, J, h, G)
    elif name == "linear_growth_tfim":
        base = zc.model_uniform_tfim(ctx, J, h, G)
        chain = zc.model_linear_growth(ctx, base, ctx.graph.x0, m.get("slope", 1.0))
    elif name == "time_modulated_tfim":
        chain = zc.model_time_modulated_tfim(ctx, J, h, m.get("omega", 1.0), G)
    elif name == "zero":
        chain = zc.model_zero(ctx)
    else:
        terms = [dict(t, site=_site(t["site"])) for t in m.get("terms", [])]
        chain = zc.model_from_terms(ctx, terms, G=G)
    return chain


def build_observable(cfg, ctx):
    factors = {}
    for key, label in cfg["observable"]["pauli"].items():
        site = json.loads(key) if key.strip().startswith("[") else int(key) \
            if key.lstrip("-").isdigit() else key
        factors[_site(site)] = label
    return alg.pauli(ctx, factors)


def build_grid(spec):
    if isinstance(spec, list):
        return np.asarray(spec, dtype=float)
    return np.linspace(spec["start"], spec["stop"], spec["num"])


def integrator_kwargs(cfg, tolerance=None):
    it = cfg.get("integrator", {})
    return {"integrator": it.get("method", "auto"), "step_size": it.get("step_size", 0.05),
            "tolerance": tolerance if tolerance is not None else it.get("tolerance", 1e-8),
            "engine": it.get("engine", "auto")}


# ---------------------------------------------------------------- outputs

def _fmt(v):
    if isinstance(v, str):
        return v
    return format(float(v), ".15e")


def write_csv(path, header, rows):
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    return path


def sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        h.update(fh.read())
    return h.hexdigest()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if hasattr(obj, "to_dict"):
        return _jsonable(obj.to_dict())
    return obj


def write_json(path, data):
    with open(path, "w") as fh:
        json.dump(_jsonable(data), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


# --------------------------------------------------------------- commands

def cmd_verify_algebra(cfg, opts):
    from .checks import algebra_suite

    rng = np.random.default_rng(opts.seed)
    results = algebra_suite(rng, spin_sites=cfg.get("spin_sites", 6),
                            fermion_sites=cfg.get("fermion_sites", 3),
                            flavors=cfg.get("flavors", 1), samples=cfg.get("samples", 100),
                            tol=opts.tolerance or cfg.get("tolerance", 1e-10))
    rows = [(r["property"], r["max_error"], r["tolerance"], str(r["passed"]).lower())
            for r in results]
    csv = write_csv(os.path.join(opts.out, "algebra.csv"),
                    ["property", "max_error", "tolerance", "passed"], rows)
    summary = {"properties": results, "all_passed": all(r["passed"] for r in results)}
    return summary, [csv], summary["all_passed"]


def cmd_verify_lemmas(cfg, opts):
    from .checks import summability_check

    eps = cfg.get("epsilon", 1.0)
    summ = summability_check(eps, cfg.get("r_max", 1e6))
    F = DecayFunction.from_config(cfg.get("F", {"rule": "power_law", "nu": 6}))
    nu = cfg.get("nu", 4.0)
    kmaxes = cfg.get("k_max", [100, 200])
    density = cfg.get("m_grid_density", 8.0)
    sups = [decay_sup_check(F, nu, k, density) for k in kmaxes]
    limit = cfg.get("relative_change", 0.01)
    rel = [abs(b.value - a.value) / a.value for a, b in zip(sups, sups[1:])]
    sup_ok = all(r < limit for r in rel) and not any(s.boundary_flag for s in sups)
    rows = [(s.k_max, s.value, s.k_at, s.m_at) for s in sups]
    csv1 = write_csv(os.path.join(opts.out, "sup_check.csv"), ["k_max", "value", "k_at", "m_at"],
                     rows)
    csv2 = write_csv(os.path.join(opts.out, "summability.csv"), ["r", "partial_sum"],
                     zip(summ["radii"], summ["partial_sums"]))
    summary = {"summability": {k: v for k, v in summ.items() if k not in ("radii", "partial_sums")},
               "sup_check": {"F": F.to_config(), "nu": nu,
                             "values": [s.__dict__ for s in sups], "relative_changes": rel,
                             "passed": sup_ok}}
    summary["all_passed"] = bool(summ["passed"] and sup_ok)
    return summary, [csv1, csv2], summary["all_passed"]


def _setup(cfg, opts):
    graph = build_graph(cfg)
    ctx = build_context(cfg, graph)
    chain = build_chain(cfg, ctx)
    A = build_observable(cfg, ctx)
    try:
        opts.feasible_k = largest_feasible_k(chain, A=A)
    except PreconditionViolation:
        opts.feasible_k = None
    return graph, ctx, chain, A


def cmd_cone(cfg, opts):
    graph, ctx, chain, A = _setup(cfg, opts)
    res = lab.cone_scan(chain, A, cfg["probe"], build_grid(cfg["t_grid"]), s=cfg.get("s", 0.0),
                        k=cfg.get("k"), delta=cfg.get("delta", lab.DEFAULT_DELTA),
                        workers=opts.threads, interpolate=cfg.get("radius") == "interpolated",
                        **integrator_kwargs(cfg, opts.tolerance))
    csv = write_csv(os.path.join(opts.out, "cone.csv"), ["t", "r", "value"], res.rows())
    csv2 = write_csv(os.path.join(opts.out, "cone_radius.csv"), ["t", "r_star"],
                     zip(res.times, res.r_star))
    svg = write_svg_lineplot(os.path.join(opts.out, "cone_radius.svg"),
                             [("r*(t)", res.times, res.r_star)], "t", "r*", "threshold radius")
    ok = bool(np.all(res.table >= 0) and np.all(res.table <= 2 * A.norm() * 1.0 + 1e-9))
    summary = {"velocity": res.velocity, "linear": res.linear, "exponential": res.exponential,
               "r_star": res.r_star, "delta": res.delta, "k": res.k, "notes": res.notes,
               "entries_within_operator_bound": ok}
    return summary, [csv, csv2, svg], ok


def _C_phi(chain, G):
    return zc.growth_coefficient(chain, G, chain.x0, [0.0]).C_phi


def cmd_cauchy(cfg, opts):
    graph, ctx, chain, A = _setup(cfg, opts)
    G = DecayFunction.from_config(cfg["G"])
    C_phi = _C_phi(chain, G)
    s, t, nu = cfg.get("s", 0.0), cfg["t"], cfg["nu"]
    if "tau" in cfg:
        tau = cfg["tau"]
    elif "c_lr" in cfg:
        tau = lab.tau_of(cfg["c_lr"], C_phi)
    else:
        raise ConfigError("cauchy needs either 'tau' or 'c_lr'")
    _check_nu(cfg, graph, G, nu)
    l_ref = cfg.get("l_ref")
    if l_ref is None:
        l_ref = zc.covering_k(chain)
    res = lab.cauchy_scan(chain, A, cfg["k_list"], l_ref, s, t, nu, tau=tau,
                          workers=opts.threads, **integrator_kwargs(cfg, opts.tolerance))
    csv = write_csv(os.path.join(opts.out, "cauchy.csv"), ["t", "k", "value"], res.rows())
    pos = res.differences > 0
    svg = write_svg_lineplot(os.path.join(opts.out, "cauchy.svg"),
                             [("ln diff", np.log1p(res.k_list[pos]), np.log(res.differences[pos]))],
                             "ln(1+k)", "ln ||difference||", "Cauchy scan")
    slope_ok = res.fit is not None and res.fit.slope <= -nu + 0.5
    summary = {"tau": tau, "C_phi": C_phi, "l_ref": l_ref, "differences": res.differences,
               "k_list": res.k_list, "monotone": res.monotone, "fit": res.fit,
               "exact_zero_k": res.exact_zero_k, "a_nu_norm": res.a_nu_norm,
               "slope_within_bound": slope_ok, "notes": res.notes}
    return summary, [csv, svg], bool(res.monotone and slope_ok)


def _check_nu(cfg, graph, G, nu):
    F = DecayFunction.from_config(cfg["F"]) if "F" in cfg else G
    mu = lab.mu_of(F.declared_nu, G.declared_nu, graph.dimension)
    if not 0 < nu < mu:
        raise PreconditionViolation(f"nu = {nu} must lie in (0, mu = {mu})")
    return mu


def cmd_growth(cfg, opts):
    graph, ctx, chain, A = _setup(cfg, opts)
    G = DecayFunction.from_config(cfg["G"])
    nu = cfg["nu"]
    mu = _check_nu(cfg, graph, G, nu)
    C_phi = _C_phi(chain, G)
    res = lab.nu_norm_growth_scan(chain, A, nu, build_grid(cfg["t_grid"]), C_phi, mu=mu,
                                  k=cfg.get("k"), workers=opts.threads,
                                  **integrator_kwargs(cfg, opts.tolerance))
    csv = write_csv(os.path.join(opts.out, "growth.csv"), ["t", "nu", "value"], res.rows())
    series = [("ln N(t)", res.times, res.log_norms)]
    if res.fit is not None:
        series.append(("envelope", res.times, res.envelope()))
    svg = write_svg_lineplot(os.path.join(opts.out, "growth.svg"), series, "t",
                             "ln ||alpha_t A||_nu", "nu-norm growth")
    limit = cfg.get("residual_limit", 0.1)
    anchor = abs(res.norms[0] - res.initial_norm) <= 1e-10
    ok = bool(anchor and res.fit is not None and res.relative_residual <= limit)
    summary = {"C_phi": C_phi, "mu": mu, "fit": res.fit, "relative_residual": res.relative_residual,
               "envelope_shift": res.envelope_shift, "initial_norm": res.initial_norm,
               "anchor_ok": anchor, "k": res.k}
    return summary, [csv, svg], ok


def cmd_radius(cfg, opts):
    graph, ctx, chain, A = _setup(cfg, opts)
    delta = cfg.get("delta", lab.DEFAULT_DELTA)
    times = build_grid(cfg["t_grid"])
    res = lab.support_radius_scan(chain, A, delta, times, k=cfg.get("k"), workers=opts.threads,
                                  interpolate=cfg.get("radius") == "interpolated",
                                  **integrator_kwargs(cfg, opts.tolerance))
    csv = write_csv(os.path.join(opts.out, "radius.csv"), ["t", "delta", "value"], res.rows())
    svg = write_svg_lineplot(os.path.join(opts.out, "radius.svg"),
                             [("r(t)", res.times, res.radii)], "t", "r", "support radius")
    expect = cfg.get("expect", "none")
    ok = True
    if expect == "linear":
        ok = res.better_model == "linear"
    elif expect == "superlinear":
        sel = ~res.saturated
        ok = lab.ratio_increasing(res.times[sel], res.radii[sel])
    summary = {"radii": res.radii, "saturated": res.saturated, "linear": res.linear,
               "exponential": res.exponential, "better_model": res.better_model,
               "degenerate": res.degenerate, "expect": expect, "notes": res.notes}
    return summary, [csv, svg], bool(ok)


COMMANDS = {
    "verify-algebra": cmd_verify_algebra,
    "verify-lemmas": cmd_verify_lemmas,
    "cone": cmd_cone,
    "cauchy": cmd_cauchy,
    "growth": cmd_growth,
    "radius": cmd_radius,
}


# ------------------------------------------------------------------- main

def build_parser():
    p = argparse.ArgumentParser(prog="lrlab", description=__doc__.split("\n\n")[0])
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--config", default=None, help="JSON config file")
    p.add_argument("--out", default=None, help="output directory (default: ./lrlab-out)")
    p.add_argument("--threads", type=int, default=None, help="worker threads for scans")
    p.add_argument("--tolerance", type=float, default=None,
                   help="integrator tolerance (overrides the config)")
    p.add_argument("--seed", type=int, default=None, help="seed for random-operator suites")
    return p


def _env_default(opts, name, cast, fallback):
    value = getattr(opts, name)
    if value is None:
        env = os.environ.get(ENV_PREFIX + name.upper())
        value = cast(env) if env not in (None, "") else fallback
    setattr(opts, name, value)


def run(argv=None):
    opts = build_parser().parse_args(argv)
    try:
        _env_default(opts, "config", str, None)
        _env_default(opts, "out", str, "lrlab-out")
        _env_default(opts, "tolerance", float, None)
        cfg = load_config(opts.subcommand, opts.config)
        _env_default(opts, "threads", int, cfg.get("threads", 1))
        _env_default(opts, "seed", int, cfg.get("seed", 0))
        if opts.threads < 1:
            raise ConfigError("--threads must be at least 1")
        if opts.tolerance is not None and not opts.tolerance > 0:
            raise ConfigError("--tolerance must be positive")
        os.makedirs(opts.out, exist_ok=True)
        summary, files, passed = COMMANDS[opts.subcommand](cfg, opts)
    except (ConfigError, PreconditionViolation, ResourceLimitError, LabError) as exc:
        print(f"lrlab {opts.subcommand}: error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"lrlab {opts.subcommand}: error: {exc}", file=sys.stderr)
        return 2
    summary["passed"] = bool(passed)
    files = [write_json(os.path.join(opts.out, "summary.json"), summary)] + list(files)
    manifest = {
        "subcommand": opts.subcommand,
        "config": cfg,
        "config_path": opts.config,
        "version": __version__,
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "threads": opts.threads,
        "seed": opts.seed,
        "integrator": integrator_kwargs(cfg, opts.tolerance),
        "largest_feasible_k": getattr(opts, "feasible_k", None),
        "files": {os.path.basename(f): sha256(f) for f in files},
        "passed": bool(passed),
    }
    write_json(os.path.join(opts.out, "manifest.json"), manifest)
    print(f"lrlab {opts.subcommand}: {'pass' if passed else 'FAIL'} -> {opts.out}")
    return 0 if passed else 1


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
