"""Command-line front end: run checks and experiments from a JSON config.

Exit codes: 0 for pass or vacuous verdicts, 1 for fail, 2 for configuration
or runtime errors. Reports are JSON; sequence data is also written as CSV.
"""

from __future__ import annotations

import argparse
import json
import subprocess
import sys
import time
from dataclasses import asdict, dataclass, field, fields
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Optional

import numpy as np

from . import __version__
from .convexity import (
    check_classical_ellipticity,
    check_g_rank_one_convex,
    check_rank_one_affine,
    check_sl2_system,
)
from .derivatives import ORDERS, FDScheme
from .energy import ProbeFamily, energy, quasiconvexity_probe
from .fields import laminate_field, load_field, perturbation_field, save_field
from .groups import GroupSpec, conjugate_potential, group, sample_group_elements
from .lsc import GENERATORS, SequenceSpec, build_sequence, lsc_experiment
from .potentials import (
    BUILTINS,
    GAUGES,
    DomainError,
    Potential,
    builtin,
    constant,
    gauge,
    involution,
    iso_family,
    sl2_affine_family,
)
from .report import to_jsonable

COMMANDS = ("check-rankone", "check-affine", "check-ellipticity", "sl2-system", "probe-qc",
            "lsc", "transform")
TIMESTAMP_KEYS = ("timestamp", "wall_time_s")

DEFAULT_TOL = {
    "check-rankone": 1e-7,
    "check-affine": 1e-7,
    "check-ellipticity": 1e-7,
    "sl2-system": 1e-6,
    "probe-qc": 1e-7,
    "lsc": None,          # 1e-6 (1 + |limit energy|)
    "transform": 1e-10,
}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    group: str = "gl"
    n: int = 2
    potential: Any = "neg_log_abs_det"
    samples: int = 1000
    seed: int = 0
    tol: Optional[float] = None
    spread: float = 0.5
    out: Optional[str] = None
    dump_witnesses: bool = False
    dump_field: Optional[str] = None
    fd_step: Optional[float] = None
    fd_order: str = "central4"
    richardson: bool = False
    options: dict = field(default_factory=dict)

    def validate(self) -> "RunConfig":
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}; choose from {list(COMMANDS)}")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool) or not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if not isinstance(self.samples, int) or self.samples <= 0:
            raise ConfigError("samples must be a positive integer")
        if self.fd_order not in ORDERS:
            raise ConfigError(f"fd_order must be one of {list(ORDERS)}")
        try:
            group(self.group, self.n)
            self.scheme()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        resolve_potential(self.potential)
        if self.tol is None:
            self.tol = DEFAULT_TOL[self.command]
        return self

    def group_spec(self) -> GroupSpec:
        return group(self.group, self.n)

    def scheme(self) -> FDScheme:
        return FDScheme(self.fd_step, self.fd_order, self.richardson)


# --- potential specs ---------------------------------------------------------

def resolve_potential(spec) -> Potential:
    """Build a potential from a string or dict spec.

    Strings: a built-in name, ``iso:<gauge>[:key=value,...]``,
    ``sl2:k,b,c,e,f``, ``const:c``, ``inv:<spec>``, ``neg:<spec>``.
    Dicts: ``{"builtin": name}``, ``{"iso": gauge, "params": {...}}``,
    ``{"sl2": [k, b, c, e, f]}``, ``{"const": c}``, ``{"involution": spec}``,
    ``{"negate": spec}``.
    """
    try:
        return _resolve(spec)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"unresolvable potential {spec!r}: {exc}") from exc


def _resolve(spec) -> Potential:
    if isinstance(spec, dict):
        if len(spec) != 1 and not ("iso" in spec and set(spec) <= {"iso", "params"}):
            raise ValueError("expected exactly one key")
        if "builtin" in spec:
            return builtin(spec["builtin"])
        if "iso" in spec:
            return iso_family(gauge(spec["iso"], **spec.get("params", {})))
        if "sl2" in spec:
            return sl2_affine_family(*map(float, spec["sl2"]))
        if "const" in spec:
            return constant(float(spec["const"]))
        if "involution" in spec:
            return involution(_resolve(spec["involution"]))
        if "negate" in spec:
            return -_resolve(spec["negate"])
        raise KeyError(f"unknown key {next(iter(spec))!r}")
    if not isinstance(spec, str):
        raise TypeError("potential spec must be a string or an object")
    head, _, rest = spec.partition(":")
    if head == "inv":
        return involution(_resolve(rest))
    if head == "neg":
        return -_resolve(rest)
    if head == "iso":
        name, _, params = rest.partition(":")
        kw = {}
        for item in filter(None, params.split(",")):
            key, _, val = item.partition("=")
            kw[key] = float(val)
        if name not in GAUGES:
            raise KeyError(f"unknown gauge {name!r}; choose from {sorted(GAUGES)}")
        return iso_family(gauge(name, **kw))
    if head == "sl2":
        vals = [float(v) for v in rest.split(",")]
        if len(vals) != 5:
            raise ValueError("sl2 needs five coefficients k,b,c,e,f")
        return sl2_affine_family(*vals)
    if head == "const":
        return constant(float(rest))
    if spec not in BUILTINS:
        raise KeyError(f"unknown potential {spec!r}; built-ins are {sorted(BUILTINS)}")
    return builtin(spec)


# --- commands ----------------------------------------------------------------

def _matrix_option(cfg: RunConfig, key: str, default="identity"):
    val = cfg.options.get(key, default)
    if isinstance(val, str):
        if val == "identity":
            return np.eye(cfg.n)
        if val == "sampled":
            return None
        raise ConfigError(f"option {key!r} must be a matrix, 'identity' or 'sampled'")
    M = np.asarray(val, float)
    if M.shape != (cfg.n, cfg.n):
        raise ConfigError(f"option {key!r} must be {cfg.n}x{cfg.n}")
    return M


def _cmd_check_rankone(cfg, w, G):
    curve = cfg.options.get("curve", "line")
    r = check_g_rank_one_convex(w, G, cfg.samples, cfg.tol, cfg.seed, cfg.scheme(), cfg.spread,
                                curve=curve)
    return r.verdict, r.to_dict(cfg.dump_witnesses)


def _cmd_check_affine(cfg, w, G):
    r = check_rank_one_affine(w, G, cfg.samples, cfg.tol, cfg.seed, cfg.spread)
    return r.verdict, r.to_dict(cfg.dump_witnesses)


def _cmd_check_ellipticity(cfg, w, G):
    r = check_classical_ellipticity(w, cfg.n, cfg.samples, cfg.tol, cfg.seed, cfg.scheme())
    return r.verdict, r.to_dict(cfg.dump_witnesses)


def _cmd_sl2_system(cfg, w, G):
    if w.chart is None:
        raise ConfigError("sl2-system needs a potential with an SL(2) chart (e.g. 'sl2:1,0,0,0,0')")
    rng = np.random.default_rng(cfg.seed)
    lo, hi = cfg.options.get("x_range", [0.2, 3.0])
    X = rng.uniform(lo, hi, cfg.samples) * rng.choice([-1.0, 1.0], cfg.samples)
    Y, Z = rng.uniform(-2.0, 2.0, (2, cfg.samples))
    r = check_sl2_system(w, X, Y, Z, cfg.tol, cfg.scheme())
    return r.verdict, r.to_dict(cfg.dump_witnesses)


def _rebuild_probe_field(G, fam, wit):
    if wit["kind"] == "laminate":
        return laminate_field(G, np.asarray(wit["a"]), np.asarray(wit["b"]), wit["slopes"],
                              wit["fractions"], wit["h"], fam.delta, fam.shape, fam.resolution)
    return perturbation_field(G, wit["amplitude"], wit["seed"], fam.resolution, fam.shape,
                              max_halvings=1)


def _cmd_probe_qc(cfg, w, G):
    F = _matrix_option(cfg, "F")
    if "field" in cfg.options:
        fld = load_field(cfg.options["field"])
        base = np.eye(cfg.n) if F is None else F
        gap = energy(w, base, fld) - fld.domain.measure * float(w(base))
        verdict = "pass" if gap >= -cfg.tol else "fail"
        return verdict, {"verdict": verdict, "gap": gap, "field": cfg.options["field"],
                         "F": base}
    known = {f.name for f in fields(ProbeFamily)}
    fam_opts = {k: tuple(v) if isinstance(v, list) else v
                for k, v in cfg.options.get("family", {}).items()}
    unknown = set(fam_opts) - known
    if unknown:
        raise ConfigError(f"unknown probe family keys {sorted(unknown)}")
    fam = ProbeFamily(**{"spread": cfg.spread, **fam_opts})
    r = quasiconvexity_probe(w, G, F, fam, cfg.samples, cfg.seed, cfg.tol)
    if cfg.dump_field and r.all_witnesses:
        worst = min(r.all_witnesses, key=lambda wt: wt["gap"])
        save_field(_rebuild_probe_field(G, fam, worst), cfg.dump_field)
    return r.verdict, r.to_dict(cfg.dump_witnesses)


def _cmd_lsc(cfg, w, G):
    opts = dict(cfg.options.get("sequence", {}))
    if opts.get("generator", "laminate_scaling") not in GENERATORS:
        raise ConfigError(f"generator must be one of {list(GENERATORS)}")
    known = {f.name for f in fields(SequenceSpec)} - {"limit_map"}
    unknown = set(opts) - known
    if unknown:
        raise ConfigError(f"unknown sequence keys {sorted(unknown)}")
    for key in ("a", "b"):
        opts.setdefault(key, [1.0] + [0.0] * (cfg.n - 1) if key == "a" else [0.0] * (cfg.n - 1) + [1.0])
    spec = SequenceSpec(**{k: tuple(v) if isinstance(v, list) else v for k, v in opts.items()})
    F0 = _matrix_option(cfg, "F0")
    if F0 is None:
        F0 = sample_group_elements(G, cfg.spread, np.random.default_rng(cfg.seed), None)
    rep = lsc_experiment(w, F0, spec, G, cfg.tol)
    if cfg.out:
        rep.write_csv(Path(cfg.out).with_suffix(".csv"))
    if cfg.dump_field:
        save_field(build_sequence(SequenceSpec(**{**asdict(spec), "scales": spec.scales[-1:]}), G)[0],
                   cfg.dump_field)
    return rep.verdict, rep.to_dict()


def _cmd_transform(cfg, w, G):
    kind = cfg.options.get("kind", "involution")
    rng = np.random.default_rng(cfg.seed)
    F = sample_group_elements(G, cfg.spread, rng, cfg.samples)
    if kind == "involution":
        t = involution(w)
        back = involution(t)
        base = w(F)
        err = np.abs(back(F) - base) / (1.0 + np.abs(base))
        values = t(F)
    elif kind == "conjugate":
        U = _matrix_option(cfg, "U")
        t = conjugate_potential(w, U, G, seed=cfg.seed)
        values = t(F)
        Uinv = np.linalg.inv(U)
        back = conjugate_potential(t, Uinv)
        base = w(F)
        err = np.abs(back(F) - base) / (1.0 + np.abs(base))
    else:
        raise ConfigError("transform kind must be 'involution' or 'conjugate'")
    verdict = "pass" if float(err.max()) <= cfg.tol else "fail"
    points = cfg.options.get("points")
    out = {"verdict": verdict, "kind": kind, "transformed": t.name,
           "max_roundtrip_error": float(err.max()), "samples_run": int(len(F))}
    if points is not None:
        P = np.asarray(points, float)
        out["points"] = P
        out["values"] = t(P)
    if cfg.dump_witnesses:
        out["sample_values"] = values
    return verdict, out


HANDLERS = {
    "check-rankone": _cmd_check_rankone,
    "check-affine": _cmd_check_affine,
    "check-ellipticity": _cmd_check_ellipticity,
    "sl2-system": _cmd_sl2_system,
    "probe-qc": _cmd_probe_qc,
    "lsc": _cmd_lsc,
    "transform": _cmd_transform,
}


def version_string() -> str:
    """Package version plus the short commit hash when run from a git checkout."""
    try:
        sha = subprocess.run(["git", "rev-parse", "--short", "HEAD"], capture_output=True,
                             text=True, cwd=Path(__file__).parent, timeout=5).stdout.strip()
    except (OSError, subprocess.SubprocessError):
        sha = ""
    return f"gquasi {__version__}" + (f"+g{sha}" if sha else "")


def run(cfg: RunConfig) -> tuple[int, dict]:
    """Execute a validated config; returns the exit code and the report."""
    start = time.perf_counter()
    stamp = datetime.now(timezone.utc).isoformat()
    cfg.validate()
    w = resolve_potential(cfg.potential)
    G = cfg.group_spec()
    verdict, result = HANDLERS[cfg.command](cfg, w, G)
    echo = asdict(cfg)
    echo["potential_name"] = w.name
    default_step = "c (1+|F|) / (1+|H|), c = 1e-4 (first) or 1e-3 (second derivatives)"
    echo["fd_scheme"] = {"step": cfg.fd_step if cfg.fd_step is not None else default_step,
                         "order": cfg.fd_order, "richardson": cfg.richardson}
    report = {
        "command": cfg.command,
        "verdict": verdict,
        "config": echo,
        "version": version_string(),
        "result": result,
        "timestamp": stamp,
        "wall_time_s": time.perf_counter() - start,
    }
    code = 1 if verdict == "fail" else 0
    return code, to_jsonable(report)


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    return data


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gquasi", description=__doc__.splitlines()[0])
    p.add_argument("command", nargs="?", choices=COMMANDS,
                   help="command to run (may instead be given in the config)")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--group", help="gl, gl+, sl, so, co or sp")
    p.add_argument("--n", type=int, help="matrix dimension (2..4)")
    p.add_argument("--potential", help="potential spec, e.g. neg_log_abs_det, iso:log_sum_inv, sl2:1,0,0,0,0")
    p.add_argument("--seed", type=int)
    p.add_argument("--samples", type=int, help="sampling budget")
    p.add_argument("--tol", type=float)
    p.add_argument("--out", help="report path (JSON); lsc also writes <out>.csv")
    p.add_argument("--dump-witnesses", action="store_true", default=None,
                   help="include every violating sample in the report")
    p.add_argument("--dump-field", help="write a field JSON (worst probe field / finest lsc field)")
    p.add_argument("--fd-step", type=float)
    p.add_argument("--fd-order", choices=ORDERS)
    p.add_argument("--richardson", action="store_true", default=None)
    return p


def config_from_args(args) -> RunConfig:
    data = load_config(args.config) if args.config else {}
    overrides = {
        "command": args.command, "group": args.group, "n": args.n, "potential": args.potential,
        "seed": args.seed, "samples": args.samples, "tol": args.tol, "out": args.out,
        "dump_witnesses": args.dump_witnesses, "dump_field": args.dump_field,
        "fd_step": args.fd_step, "fd_order": args.fd_order, "richardson": args.richardson,
    }
    data.update({k: v for k, v in overrides.items() if v is not None})
    if "command" not in data:
        raise ConfigError("no command given (positional argument or 'command' in the config)")
    known = {f.name for f in fields(RunConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    return RunConfig(**data)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
        code, report = run(cfg)
    except (ConfigError, DomainError, ValueError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if cfg.out:
        Path(cfg.out).write_text(text)
        print(f"{cfg.command}: {report['verdict']} -> {cfg.out}")
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
