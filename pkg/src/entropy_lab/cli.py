"""Command-line batch front-end.

Every subcommand writes a table of flat rows (CSV with a header, or a JSON array)
to ``--output`` (``-`` for stdout). Parameters come from flags or from a flat
``key = value`` config file named by ``--config``; flags win.

Exit status: 0 success, 1 some rows flagged, 2 invalid configuration.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field
from typing import Any, Callable

from . import __version__, closedform, minimizer, nash, radial, sphere
from .closedform import DomainError, Params

COMMANDS = ("constants", "deficit", "nash-scan", "limit-trace", "bubble-fit", "b-search", "minimize", "b-trace")
FLAGGED_STATUS = {"nonfinite", "bound_violation", "not_converged", "grid_concentrated"}
DEFICIT_FLOOR = -1e-7

# flag name -> (type, default); the config file uses the same names
OPTIONS: dict[str, tuple[Callable[[str], Any], Any]] = {
    "n": (int, 3),
    "p": (float, 2.0),
    "q": (float, None),
    "q-grid": (str, None),
    "eps-grid": (str, None),
    "delta": (float, sphere.DEFAULT_DELTA),
    "observable": (str, "mass,energy,entropy"),
    "family": (str, None),
    "profile": (str, "extremal"),
    "count": (int, 20),
    "restarts": (int, nash.Budget().restarts),
    "evals": (int, nash.Budget().evals),
    "seed": (int, 0),
    "C": (float, 1.0),
    "nodes": (int, 201),
    "iterations": (int, 5000),
    "workers": (int, 0),
    "output": (str, "-"),
    "format": (str, "csv"),
}


HELP = {
    "n": "dimension",
    "p": "gradient exponent, 1 < p <= 2 and p < n",
    "q": "Nash exponent for single-q commands",
    "q-grid": "comma-separated increasing q values",
    "eps-grid": "comma-separated bubble scales",
    "delta": "bubble cutoff radius",
    "observable": "bubble observables to fit",
    "family": "search family name",
    "profile": "extremal, gaussian, random or a CSV path",
    "count": "number of random profiles",
    "restarts": "multi-start restarts",
    "evals": "function evaluations per restart",
    "seed": "master seed",
    "C": "penalty weight of the minimized functional",
    "nodes": "mesh nodes on the colatitude interval",
    "iterations": "descent iteration budget",
    "workers": "worker processes for q-grid scans",
    "output": "output path, - for stdout",
    "format": "csv or json",
}

COMMAND_HELP = {
    "constants": "closed-form constants and moments",
    "deficit": "entropy deficit of radial profiles",
    "nash-scan": "Nash quotient lower bounds along a q-grid",
    "limit-trace": "q -> p limit of the norm-ratio quotient",
    "bubble-fit": "small-scale expansion fits of sphere bubbles",
    "b-search": "second-constant lower bound over zonal families",
    "minimize": "minimize the penalized Nash functional on a sphere",
    "b-trace": "second Nash constant estimates as q -> p",
}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    params: dict[str, Any] = field(default_factory=dict)

    def __getitem__(self, key):
        return self.params[key]

    @property
    def budget(self) -> nash.Budget:
        return nash.Budget(self["restarts"], self["evals"])

    def floats(self, key: str) -> list[float] | None:
        raw = self[key]
        if raw is None:
            return None
        try:
            return [float(x) for x in str(raw).replace(",", " ").split()]
        except ValueError as exc:
            raise ConfigError(f"{key}: expected a list of numbers, got {raw!r}") from exc


def read_config_file(path: str) -> dict[str, str]:
    parser = configparser.ConfigParser(interpolation=None, delimiters=("=",), comment_prefixes=("#",))
    parser.optionxform = str
    try:
        with open(path) as fh:
            parser.read_string("[run]\n" + fh.read())
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    return {k.replace("_", "-"): v.strip() for k, v in parser["run"].items()}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="entropy-lab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        cmd = sub.add_parser(name, help=COMMAND_HELP[name])
        cmd.add_argument("--config", help="flat key = value file; flags override it")
        for opt in OPTIONS:
            # values stay strings here so that file and flag go through one parser
            cmd.add_argument(f"--{opt}", dest=opt, default=None, help=HELP[opt])
    return parser


def make_config(argv: list[str]) -> RunConfig:
    args = build_parser().parse_args(argv)
    raw = read_config_file(args.config) if args.config else {}
    unknown = set(raw) - set(OPTIONS) - {"command"}
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    params = {}
    for opt, (kind, default) in OPTIONS.items():
        value = getattr(args, opt)
        if value is None:
            value = raw.get(opt)
        if value is None or value == "":
            params[opt] = default
            continue
        try:
            params[opt] = kind(value)
        except ValueError as exc:
            raise ConfigError(f"--{opt}: cannot parse {value!r}") from exc
    if params["format"] not in ("csv", "json"):
        raise ConfigError("--format must be csv or json")
    config = RunConfig(args.command, params)
    validate(config)
    return config


def validate(config: RunConfig) -> None:
    """Check the module preconditions before any work starts."""
    n, p = config["n"], config["p"]
    Params(n, p)
    for q in config.floats("q-grid") or ([config["q"]] if config["q"] is not None else []):
        Params(n, p, q)
    if config.command in ("minimize",) and config["q"] is None:
        raise ConfigError("minimize needs --q")
    if config["restarts"] < 1 or config["evals"] < 1:
        raise ConfigError("--restarts and --evals must be positive")


# -- commands -----------------------------------------------------------------


def _clean(value):
    if isinstance(value, float) and not math.isfinite(value):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return " ".join(repr(float(x)) for x in value)
    return value


def _cmd_constants(cfg: RunConfig) -> list[dict]:
    n, p = cfg["n"], cfg["p"]
    ext = closedform.extremal_spec(n, p)
    m = closedform.moments(n, p)
    table = [
        ("A0", closedform.a0_constant(n, p)),
        ("extremal_a", ext.a),
        ("extremal_b", ext.b),
        ("extremal_s", ext.s),
        ("displayed_prefactor", closedform.displayed_prefactor(n, p)),
        ("surface_area", closedform.surface_area(n)),
        *((name, getattr(m, name)) for name in ("I1", "I2", "J1", "J2", "J3")),
    ]
    if cfg["q"] is not None:
        table += [("theta", closedform.theta(n, p, cfg["q"])), ("nash_exponent", nash.nash_exponent(n, p, cfg["q"]))]
    return [{"quantity": k, "value": v} for k, v in table]


def _load_profile(cfg: RunConfig):
    name = cfg["profile"]
    if name == "extremal":
        return radial.extremal_profile(cfg["n"], cfg["p"])
    if name == "gaussian":
        return radial.ParametricProfile("stretched_exp", (1.0, 1.0, 2.0))
    try:
        return radial.RadialProfile.from_csv(name)
    except OSError as exc:
        raise ConfigError(f"--profile: {name!r} is not extremal, gaussian, random or a readable CSV") from exc


def _cmd_deficit(cfg: RunConfig) -> list[dict]:
    n, p = cfg["n"], cfg["p"]
    if cfg["profile"] == "random":
        import numpy as np

        rng = np.random.default_rng(cfg["seed"])
        profiles = [radial.random_profile(rng, cfg["family"]) for _ in range(cfg["count"])]
    else:
        profiles = [_load_profile(cfg)]
    rows = []
    for i, prof in enumerate(profiles):
        rep = radial.report(prof.normalized(n, p), n, p)
        desc = prof.describe() if hasattr(prof, "describe") else prof.descriptor
        rows.append({"index": i, "profile": json.dumps(desc, sort_keys=True), "lp_mass": rep.lp_mass,
                     "entropy": rep.entropy, "dirichlet": rep.dirichlet, "deficit": rep.deficit,
                     "flagged": rep.deficit < DEFICIT_FLOOR})
    return rows


def _nash_family(cfg: RunConfig) -> nash.SearchFamily:
    return nash.family(cfg["family"]) if cfg["family"] else nash.DEFAULT_FAMILY


def _cmd_nash_scan(cfg: RunConfig) -> list[dict]:
    q_grid = cfg.floats("q-grid") or [1.0, 1.5, 1.8, 1.95, 1.99]
    rows = nash.monotonicity_scan(cfg["n"], cfg["p"], q_grid, _nash_family(cfg), cfg.budget, cfg["seed"],
                                  workers=cfg["workers"] or None)
    monotone = nash.is_monotone(rows)
    out = []
    for r in rows:
        rec = r.as_record()
        rec["ratio_to_A0"] = r.N_hat / r.A0
        rec["monotone"] = monotone
        rec["flagged"] = r.status in FLAGGED_STATUS or not monotone
        out.append(rec)
    return out


def _cmd_limit_trace(cfg: RunConfig) -> list[dict]:
    n, p = cfg["n"], cfg["p"]
    prof = _load_profile(cfg)
    q_seq = cfg.floats("q-grid") or [p - 10.0 ** (-k) for k in range(1, 8)]
    trace = nash.entropy_limit_trace(prof.normalized(n, p), n, p, q_seq)
    return [{**rec, "rate_constant": trace.rate_constant, "order": trace.order, "converged": trace.converged}
            for rec in trace.as_records()]


def _cmd_bubble_fit(cfg: RunConfig) -> list[dict]:
    eps = cfg.floats("eps-grid") or list(sphere.DEFAULT_EPS_GRID)
    rows = []
    for obs in sorted(o.strip() for o in cfg["observable"].split(",") if o.strip()):
        fit = sphere.expansion_fit(cfg["n"], cfg["p"], eps, obs, cfg["delta"])
        rec = fit.as_record()
        rec["eps_grid"] = " ".join(repr(e) for e in fit.eps_grid)
        rows.append(rec)
    return rows


def _cmd_b_search(cfg: RunConfig) -> list[dict]:
    fam = sphere.zonal_family(cfg["family"] or "constant")
    res = sphere.b_search(cfg["n"], cfg["p"], family=fam, budget=cfg.budget, seed=cfg["seed"])
    return [res.as_record()]


def _cmd_minimize(cfg: RunConfig) -> list[dict]:
    mesh = minimizer.ZonalMesh.uniform(cfg["n"], cfg["nodes"])
    res = minimizer.minimize_j(cfg["n"], cfg["p"], cfg["q"], cfg["C"], budget=cfg["iterations"], mesh=mesh)
    rec = res.as_record()
    rec["constant_J"] = minimizer.constant_j(cfg["n"], cfg["p"], cfg["C"])
    rec["nu_reference"] = 1.0 / closedform.a0_constant(cfg["n"], cfg["p"])
    return [rec]


def _cmd_b_trace(cfg: RunConfig) -> list[dict]:
    q_grid = cfg.floats("q-grid") or [1.5, 1.8, 1.9, 1.95, 1.99]
    fam = sphere.zonal_family(cfg["family"] or "constant")
    mesh = minimizer.ZonalMesh.uniform(cfg["n"], cfg["nodes"])
    trace = minimizer.b_lower_trace(cfg["n"], cfg["p"], q_grid, fam, cfg.budget, cfg["seed"], mesh=mesh)
    stable = trace.stabilized()
    return [{**row, "stabilized": stable} for row in trace.rows]


DISPATCH = {
    "constants": _cmd_constants,
    "deficit": _cmd_deficit,
    "nash-scan": _cmd_nash_scan,
    "limit-trace": _cmd_limit_trace,
    "bubble-fit": _cmd_bubble_fit,
    "b-search": _cmd_b_search,
    "minimize": _cmd_minimize,
    "b-trace": _cmd_b_trace,
}


def is_flagged(row: dict) -> bool:
    if row.get("flagged") is True:
        return True
    return row.get("status") in FLAGGED_STATUS


def run(config: RunConfig) -> tuple[list[dict], int]:
    """Execute ``config``; returns the emitted rows and the exit status."""
    rows = DISPATCH[config.command](config)
    meta = {"command": config.command, "n": config["n"], "p": config["p"], "seed": config["seed"],
            "tool_version": __version__}
    out = []
    for row in rows:
        rec = {**meta, "q": row.get("q", config["q"] if config["q"] is not None else ""), **row}
        out.append({k: _clean(v) for k, v in rec.items()})
    status = 1 if any(is_flagged(r) for r in rows) else 0
    return out, status


def format_rows(rows: list[dict], fmt: str) -> str:
    if fmt == "json":
        return json.dumps(rows, indent=1) + "\n"
    fields: list[str] = []
    for row in rows:
        fields += [k for k in row if k not in fields]
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    return buf.getvalue()


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        config = make_config(argv)
        rows, status = run(config)
    except (ConfigError, DomainError, radial.NormalizationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    text = format_rows(rows, config["format"])
    if config["output"] == "-":
        sys.stdout.write(text)
    else:
        with open(config["output"], "w") as fh:
            fh.write(text)
    if config.command == "constants":
        a0 = next(r["value"] for r in rows if r["quantity"] == "A0")
        print(f"A0({config['n']}, {config['p']}) = {a0:.6f}", file=sys.stderr)
    return status
