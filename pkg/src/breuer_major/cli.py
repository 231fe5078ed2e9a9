"""Command-line front end: ``breuer-major {bound,distance,rates,verify-chaos,simulate-dump}``.

Configs are JSON files.  Every run echoes the fully resolved config (all
defaults filled in) to stderr so it can be replayed exactly.
"""
from __future__ import annotations

import argparse
import copy
import json
import math
import os
import sys
from pathlib import Path

import jsonschema
import numpy as np

from . import bounds, chaos, covariance, hermite, montecarlo, simulate
from .errors import BreuerMajorError, ConfigError
from .serialize import render, to_json_safe

EXIT_OK, EXIT_CONFIG, EXIT_VERIFY, EXIT_NUMERIC = 0, 2, 3, 4

DEFAULTS = {
    "function": {"name": "hermite", "params": {"q": 2}},
    "n": [100],
    "N_max": None,
    "J_max": covariance.DEFAULT_MAX_LAG,
    "max_order": 20,
    "mode": "auto",
    "kinds": list(bounds.BOUND_KINDS),
    "distances": ["KOL", "W"],
    "tests": ["cos"],
    "C": 1.0,
    "R": 10000,
    "N": None,
    "seed": 0,
    "threads": 1,
    "out": None,
    "format": "csv",
    "rates": {"source": "bound", "kind": "C2", "predicted": None},
    "sweep": {"count": 200, "max_order": 3, "max_dim": 3, "hursts": [0.5, 0.6, 0.75], "n_max": 16},
    "tolerances": {"equality": 1e-9, "rate": 0.05},
}

_num = {"type": "number"}
_pos_int = {"type": "integer", "minimum": 1}
CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "model": {
            "type": "object",
            "required": ["kind"],
            "properties": {"kind": {"enum": ["fgn", "poly_decay", "table"]}, "d": _pos_int, "params": {"type": "object"}},
        },
        "function": {
            "type": "object",
            "required": ["name"],
            "properties": {"name": {"type": "string"}, "params": {"type": "object"}},
        },
        "n": {"type": "array", "items": _pos_int, "minItems": 1},
        "N_max": {"type": ["integer", "null"], "minimum": 1},
        "J_max": _pos_int,
        "max_order": _pos_int,
        "mode": {"enum": ["auto", "theorem", "hermite"]},
        "kinds": {"type": "array", "items": {"enum": list(bounds.BOUND_KINDS)}},
        "distances": {"type": "array", "items": {"enum": ["KOL", "W", "C", "H"]}},
        "tests": {"type": "array", "items": {"type": "string"}},
        "C": {"type": "number", "exclusiveMinimum": 0},
        "R": _pos_int,
        "N": {"type": ["integer", "null"], "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "threads": _pos_int,
        "out": {"type": ["string", "null"]},
        "format": {"enum": ["csv", "json"]},
        "rates": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "source": {"enum": ["bound", "empirical"]},
                "kind": {"enum": list(bounds.BOUND_KINDS) + ["KOL", "W"]},
                "predicted": {"type": ["number", "null"]},
            },
        },
        "sweep": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "count": _pos_int,
                "max_order": _pos_int,
                "max_dim": _pos_int,
                "hursts": {"type": "array", "items": _num},
                "n_max": _pos_int,
            },
        },
        "tolerances": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"equality": _num, "rate": _num},
        },
    },
}


class VerificationFailed(Exception):
    """Some verdict failed; the rows are still written."""


_REPLACED_WHOLE = ("model", "function")


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        nested = isinstance(v, dict) and isinstance(out.get(k), dict) and k not in _REPLACED_WHOLE
        out[k] = _merge(out[k], v) if nested else copy.deepcopy(v)
    return out


def resolve_config(raw: dict, args: argparse.Namespace | None = None, env=None) -> dict:
    """Validate ``raw`` and fill in defaults and command-line overrides."""
    env = os.environ if env is None else env
    try:
        jsonschema.validate(raw, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {where}: {exc.message}") from None
    cfg = _merge(DEFAULTS, raw)
    if args is not None:
        if args.seed is not None:
            cfg["seed"] = args.seed
        if args.threads is not None:
            cfg["threads"] = args.threads
        elif env.get("BM_THREADS"):
            try:
                cfg["threads"] = int(env["BM_THREADS"])
            except ValueError:
                raise ConfigError(f"BM_THREADS must be an integer, got {env['BM_THREADS']!r}") from None
        if args.out is not None:
            cfg["out"] = args.out
        if args.format is not None:
            cfg["format"] = args.format
    if cfg["threads"] < 1:
        raise ConfigError("threads must be >= 1")
    if not 0 <= cfg["seed"] < 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    return cfg


def _model(cfg):
    if "model" not in cfg:
        raise ConfigError("config needs a 'model' entry")
    return covariance.from_dict(cfg["model"])


def _expansion(cfg, model):
    exp = hermite.builtin(cfg["function"], d=model.d, max_order=cfg["max_order"])
    if cfg["N_max"] is None:
        cfg["N_max"] = exp.max_order
    return exp


def _pure_hermite(cfg, model):
    fn = cfg["function"]
    return model.d == 1 and fn["name"] == "hermite" and "q" in fn.get("params", {})


def _reports(cfg, model, exp, ns=None):
    ns = ns or cfg["n"]
    mode = cfg["mode"]
    if mode == "auto":
        mode = "hermite" if _pure_hermite(cfg, model) else "theorem"
        cfg["mode"] = mode
    model.check_summability(exp.rank)
    if mode == "hermite":
        if not _pure_hermite(cfg, model):
            raise ConfigError("mode 'hermite' needs d = 1 and function hermite(q)")
        return bounds.bound_series(model, None, ns, q=exp.rank, max_lag=cfg["J_max"])
    return bounds.bound_series(model, exp, ns, N_max=cfg["N_max"], max_lag=cfg["J_max"])


def cmd_bound(cfg: dict) -> list[dict]:
    model = _model(cfg)
    exp = _expansion(cfg, model)
    rows = []
    for rep in _reports(cfg, model, exp):
        base = rep.csv_row()
        for kind in cfg["kinds"]:
            rows.append({**base, "bound_kind": kind, "bound": rep.bound(kind), "diagnostics": "; ".join(rep.diagnostics)})
    return rows


def _distance_bound(kind, rep, test=None, C=1.0):
    if kind == "KOL":
        return rep.bound_kolmogorov
    if kind == "W":
        return rep.bound_lipschitz
    if kind == "C":
        return C * rep.bound_C2
    if test.name.startswith("indicator("):
        return rep.bound_kolmogorov
    cands = []
    if test.d2 is not None:
        cands.append(test.d2 * rep.bound_C2)
    if test.d1 is not None:
        cands.append(test.d1 * rep.bound_lipschitz)
    return min(cands) if cands else math.inf


def cmd_distance(cfg: dict) -> list[dict]:
    model = _model(cfg)
    exp = _expansion(cfg, model)
    reports = _reports(cfg, model, exp)
    rows, failed = [], False
    seed, R, threads = cfg["seed"], cfg["R"], cfg["threads"]
    for rep in reports:
        n = rep.n
        sigma = math.sqrt(rep.sigma2) if rep.sigma2 > 0 else 0.0
        x = simulate.partial_sums(model, exp, n, R, seed, threads=threads)
        ests = []
        for kind in cfg["distances"]:
            if kind == "KOL":
                ests.append((montecarlo.estimate_kolmogorov(model, exp, n, sigma, R, seed, samples=x), None))
            elif kind == "W":
                ests.append((montecarlo.estimate_wasserstein(model, exp, n, sigma, R, seed, samples=x), None))
            elif kind == "C":
                ests.append((montecarlo.estimate_dC(model, exp, n, sigma, R, seed, C=cfg["C"], samples=x), None))
            else:
                for name in cfg["tests"]:
                    h = montecarlo.test_function(name)
                    ests.append((montecarlo.estimate_testfn(model, exp, n, sigma, h, R, seed, samples=x), h))
        for est, h in ests:
            est.compare(_distance_bound(est.kind, rep, h, cfg["C"]))
            failed |= est.verdict is False
            rows.append(est.to_row(experiment="distance"))
    if failed:
        raise VerificationFailed(rows)
    return rows


def _predicted(cfg, model, exp):
    if cfg["rates"]["predicted"] is not None:
        return cfg["rates"]["predicted"]
    if not _pure_hermite(cfg, model):
        return None
    q = exp.rank
    if model.kind == covariance.FGN and q >= 2:
        return bounds.predict_rate_fgn(model.params["hurst"], q).exponent
    if model.kind == covariance.POLY_DECAY:
        return bounds.predict_rate(model.params["exponent"], q).exponent
    return None


def cmd_rates(cfg: dict) -> list[dict]:
    model = _model(cfg)
    exp = _expansion(cfg, model)
    spec = cfg["rates"]
    ns = cfg["n"]
    if spec["source"] == "bound":
        kind = spec["kind"] if spec["kind"] in bounds.BOUND_KINDS else bounds.C2
        spec["kind"] = kind
        values = [rep.bound(kind) for rep in _reports(cfg, model, exp)]
    else:
        kind = spec["kind"] if spec["kind"] in ("KOL", "W") else "W"
        spec["kind"] = kind
        sigma = math.sqrt(covariance.sigma2_total(model, exp, cfg["N_max"], cfg["J_max"]).sigma2_total)
        est = montecarlo.estimate_kolmogorov if kind == "KOL" else montecarlo.estimate_wasserstein
        values = [est(model, exp, n, sigma, cfg["R"], cfg["seed"], threads=cfg["threads"]).estimate for n in ns]
    fit = montecarlo.fit_rate(ns, values, _predicted(cfg, model, exp), cfg["tolerances"]["rate"])
    row = {"experiment": "rates", "source": spec["source"], "kind": kind, **fit.to_row()}
    if fit.verdict is False:
        raise VerificationFailed([row])
    return [row]


def cmd_verify_chaos(cfg: dict) -> list[dict]:
    sw = cfg["sweep"]
    rep = chaos.verify_sweep(
        seed=cfg["seed"],
        count=sw["count"],
        max_order=sw["max_order"],
        max_dim=sw["max_dim"],
        hursts=tuple(sw["hursts"]),
        n_max=sw["n_max"],
    )
    ok = rep.passed(cfg["tolerances"]["equality"])
    row = {"experiment": "verify-chaos", **to_json_safe(rep.__dict__), "verdict": ok}
    if not ok:
        raise VerificationFailed([row])
    return [row]


def cmd_simulate_dump(cfg: dict) -> list[dict]:
    model = _model(cfg)
    exp = _expansion(cfg, model)
    rows = []
    N = cfg["N"]
    for n in cfg["n"]:
        vals = simulate.partial_sums(model, exp, n, cfg["R"], cfg["seed"], N=N, threads=cfg["threads"])
        for i, v in enumerate(vals):
            rows.append({"replication": i, "n": n, "N": "inf" if N is None else N, "value": float(v), "seed": cfg["seed"], "stream": i})
    return rows


COMMANDS = {
    "bound": cmd_bound,
    "distance": cmd_distance,
    "rates": cmd_rates,
    "verify-chaos": cmd_verify_chaos,
    "simulate-dump": cmd_simulate_dump,
}

HELP = {
    "bound": "explicit distance bounds for each n",
    "distance": "Monte Carlo distance estimates compared with the bounds",
    "rates": "log-log slope of bounds or estimates against n",
    "verify-chaos": "seeded checks of the chaos identities and kernel bounds",
    "simulate-dump": "raw partial-sum replications as CSV",
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON experiment config")
    common.add_argument("--seed", type=int, help="master seed (overrides config)")
    common.add_argument("--threads", type=int, help="worker threads (default: $BM_THREADS or 1)")
    common.add_argument("--out", help="output path (default: stdout)")
    common.add_argument("--format", choices=["csv", "json"], help="output format")
    parser = argparse.ArgumentParser(prog="breuer-major", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=HELP[name])
    return parser


def _load(path: Path | None) -> dict:
    if path is None:
        return {}
    try:
        return json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None


def _emit(rows, cfg, stdout):
    text = render(rows, cfg["format"], config=cfg)
    if cfg["out"]:
        Path(cfg["out"]).write_text(text)
    else:
        stdout.write(text)


def main(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(_load(args.config), args)
        code = EXIT_OK
        try:
            rows = COMMANDS[args.command](cfg)
        except VerificationFailed as exc:
            rows, code = exc.args[0], EXIT_VERIFY
        stderr.write("resolved config: " + json.dumps(to_json_safe(cfg), sort_keys=True) + "\n")
        _emit(rows, cfg, stdout)
        if code:
            stderr.write("verification failed\n")
        return code
    except BreuerMajorError as exc:
        stderr.write(f"error: {exc}\n")
        return exc.exit_code
    except (np.linalg.LinAlgError, FloatingPointError, OverflowError) as exc:
        stderr.write(f"numerical error: {exc}\n")
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
