"""Command-line entry point: ``lpcb {design,label,eval,simulate,complexity,validate}``.

Parameters resolve as built-in defaults, then the ``--config`` JSON file,
then explicit flags (flags win). Every output file embeds the resolved
configuration. Exit codes: 0 success, 2 validation error, 3 runtime error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys


from . import codebook as cbmod
from .codebook import CodebookFormatError
from .complexity import ComplexityParams, crr
from .labeling import label_codebooks
from .metrics import metric_report, noise_level
from .optimizer import run_design
from .simulator import CSV_COLUMNS, DECODERS, ber_by_iteration, ber_sweep

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 2, 3


class ConfigError(ValueError):
    pass


DEFAULTS = {
    "design": {"M": 4, "T": 2, "overload": 150, "kappa": 20.0, "ebn0": "16", "seed": 0,
               "restarts": 20, "max_iters": None, "Q": 400, "t_max": 5, "out": "."},
    "label": {"codebook": None, "kappa": 20.0, "ebn0": "16", "seed": 0, "restarts": 10,
              "max_iters": 20, "out": "."},
    "eval": {"codebook": None, "kappa": 20.0, "ebn0": "16", "mode": "auto", "Q": 10000,
             "t_max": 20, "seed": 0, "out": "."},
    "simulate": {"codebook": None, "kappa": "inf", "ebn0": "0:12:2", "frames": 10000,
                 "decoder": "lp-mpa", "max_iters": 10, "tol": 1e-5, "damping": 0.0, "seed": 0,
                 "threads": 1, "profile": False, "out": "."},
    "complexity": {"codebook": None, "T": None, "d_f": None, "N": None, "J": None, "it": None,
                   "baseline_T": None, "baseline_it": None, "out": "."},
    "validate": {"codebook": None},
}


def parse_kappa(s) -> float:
    if isinstance(s, (int, float)):
        v = float(s)
    elif str(s).strip().lower() in ("inf", "infinity"):
        v = math.inf
    else:
        try:
            v = float(s)
        except ValueError:
            raise ConfigError(f"kappa must be a number or 'inf', got {s!r}") from None
    if not v >= 0:
        raise ConfigError(f"kappa must be >= 0, got {s!r}")
    return v


def parse_kappas(s) -> list[float]:
    if isinstance(s, list):
        return [parse_kappa(v) for v in s]
    return [parse_kappa(v) for v in str(s).split(",")]


def parse_grid(s) -> list[float]:
    """``"a:b:step"`` (inclusive of ``b``), a single value, or a list."""
    if isinstance(s, list):
        return [float(v) for v in s]
    if isinstance(s, (int, float)):
        return [float(s)]
    parts = str(s).split(":")
    try:
        if len(parts) == 1:
            return [float(parts[0])]
        if len(parts) != 3:
            raise ValueError
        a, b, st = map(float, parts)
    except ValueError:
        raise ConfigError(f"Eb/N0 grid must look like 'a:b:step', got {s!r}") from None
    if st <= 0 or b < a:
        raise ConfigError(f"Eb/N0 grid needs step > 0 and b >= a, got {s!r}")
    n = int(math.floor((b - a) / st + 1e-9)) + 1
    return [round(a + i * st, 10) for i in range(n)]


def _single(grid, name="ebn0"):
    g = parse_grid(grid)
    if len(g) != 1:
        raise ConfigError(f"{name} must be a single value for this command")
    return g[0]


def _jsonable(v):
    if isinstance(v, float) and math.isinf(v):
        return "inf"
    return v


def dump_json(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True, default=_jsonable) + "\n"


def _write(out_dir, name, text):
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, name)
    with open(path, "w", newline="") as fh:
        fh.write(text)
    return path


def _load_codebook(cfg):
    path = cfg.get("codebook")
    if not path:
        raise ConfigError("a codebook file is required")
    if path in cbmod.FIXTURES:
        return cbmod.load_fixture(path)
    if not os.path.exists(path):
        raise ConfigError(f"codebook file not found: {path}")
    return cbmod.load(path)


# ---------------------------------------------------------------------------
# commands

def cmd_design(cfg):
    kappa = parse_kappa(cfg["kappa"])
    eb = _single(cfg["ebn0"])
    d = run_design(int(cfg["M"]), int(cfg["T"]), int(cfg["overload"]), kappa, eb, int(cfg["seed"]),
                   restarts=int(cfg["restarts"]), max_iters=cfg["max_iters"], Q=int(cfg["Q"]),
                   t_max=int(cfg["t_max"]))
    d.codebook.meta["config"] = _clean(cfg)
    p1 = _write(cfg["out"], "codebook.json", cbmod.serialize(d.codebook).decode())
    trace = {"config": _clean(cfg), "problem": d.problem.to_dict(), "result": d.result.to_dict()}
    p2 = _write(cfg["out"], "design.json", dump_json(trace))
    return [p1, p2]


def cmd_label(cfg):
    cbs = _load_codebook(cfg)
    kappa = parse_kappa(cfg["kappa"])
    n0 = noise_level(cbs, _single(cfg["ebn0"]))
    out = label_codebooks(cbs, kappa, n0, int(cfg["max_iters"]), int(cfg["restarts"]), int(cfg["seed"]))
    out.meta["label_config"] = _clean(cfg)
    return [_write(cfg["out"], "codebook_labeled.json", cbmod.serialize(out).decode())]


def cmd_eval(cfg):
    cbs = _load_codebook(cfg)
    rep = metric_report(cbs, parse_kappa(cfg["kappa"]), _single(cfg["ebn0"]), cfg["mode"],
                        int(cfg["Q"]), int(cfg["t_max"]), int(cfg["seed"]))
    rep["config"] = _clean(cfg)
    return [_write(cfg["out"], "metrics.json", dump_json(rep))]


def _fmt(v):
    return repr(v) if isinstance(v, float) else str(v)


def cmd_simulate(cfg):
    cbs = _load_codebook(cfg)
    if cfg["decoder"] not in DECODERS:
        raise ConfigError(f"decoder must be one of {sorted(DECODERS)}")
    grid = parse_grid(cfg["ebn0"])
    kappas = parse_kappas(cfg["kappa"])
    frames, iters, seed = int(cfg["frames"]), int(cfg["max_iters"]), int(cfg["seed"])
    if frames < 1 or iters < 1:
        raise ConfigError("frames and max_iters must be >= 1")
    rows = ber_sweep(cbs, grid, kappas, frames, iters, seed, cfg["decoder"], float(cfg["tol"]),
                     float(cfg["damping"]), int(cfg["threads"]))
    buf = io.StringIO()
    buf.write("# " + json.dumps(_clean(cfg), sort_keys=True, default=_jsonable) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in CSV_COLUMNS])
    paths = [_write(cfg["out"], "ber.csv", buf.getvalue())]
    if cfg.get("profile"):
        buf = io.StringIO()
        buf.write("# " + json.dumps(_clean(cfg), sort_keys=True, default=_jsonable) + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["ebn0_db", "kappa", "iteration", "ber"])
        for kappa in kappas:
            for eb in grid:
                prof = ber_by_iteration(cbs, eb, kappa, frames, iters, seed, cfg["decoder"],
                                        int(cfg["threads"]))
                for i, b in enumerate(prof, 1):
                    w.writerow([_fmt(float(eb)), "inf" if math.isinf(kappa) else _fmt(kappa), i, _fmt(float(b))])
        paths.append(_write(cfg["out"], "convergence.csv", buf.getvalue()))
    return paths


def cmd_complexity(cfg):
    par = dict(cfg)
    if cfg.get("codebook"):
        cbs = _load_codebook(cfg)
        derived = {"T": int(cbs.projection_numbers().max()), "d_f": cbs.fg.d_f, "N": cbs.N,
                   "J": cbs.J, "baseline_T": cbs.M}
        for k, v in derived.items():
            if par.get(k) is None:
                par[k] = v
    keys = ("T", "d_f", "N", "J", "it", "baseline_T", "baseline_it")
    missing = [k for k in keys if par.get(k) is None]
    if missing:
        raise ConfigError(f"missing complexity parameters: {', '.join(missing)}")
    lp = ComplexityParams(int(par["T"]), int(par["d_f"]), int(par["N"]), int(par["J"]), int(par["it"]))
    base = ComplexityParams(int(par["baseline_T"]), lp.d_f, lp.N, lp.J, int(par["baseline_it"]))
    rep = crr(lp, base).to_dict()
    rep["config"] = _clean(par)
    return [_write(cfg["out"], "complexity.json", dump_json(rep))]


def cmd_validate(cfg):
    cbs = _load_codebook(cfg)
    pn = cbs.projection_numbers()
    print(f"ok: J={cbs.J} K={cbs.K} M={cbs.M} N={cbs.N} overload={cbs.fg.overload} "
          f"projection numbers={sorted(set(pn[pn > 0].tolist()))}")
    return []


COMMANDS = {"design": cmd_design, "label": cmd_label, "eval": cmd_eval,
            "simulate": cmd_simulate, "complexity": cmd_complexity, "validate": cmd_validate}


def _clean(cfg):
    return {k: _jsonable(v) for k, v in sorted(cfg.items()) if k not in ("config", "command")}


# ---------------------------------------------------------------------------
# argument handling

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lpcb", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out=True):
        sp.add_argument("--config", help="JSON file with parameters (flags override)")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--threads", type=int)
        if out:
            sp.add_argument("--out", help="output directory")
        return sp

    sp = common(sub.add_parser("design", help="construct an LP codebook"))
    sp.add_argument("--M", type=int)
    sp.add_argument("--T", type=int)
    sp.add_argument("--overload", type=int, choices=(150, 200))
    sp.add_argument("--kappa")
    sp.add_argument("--ebn0")
    sp.add_argument("--restarts", type=int)
    sp.add_argument("--max-iters", dest="max_iters", type=int)
    sp.add_argument("--Q", type=int)
    sp.add_argument("--t-max", dest="t_max", type=int)

    sp = common(sub.add_parser("label", help="bit labeling of a codebook file"))
    sp.add_argument("codebook", nargs="?")
    sp.add_argument("--kappa")
    sp.add_argument("--ebn0")
    sp.add_argument("--restarts", type=int)
    sp.add_argument("--max-iters", dest="max_iters", type=int)

    sp = common(sub.add_parser("eval", help="distance metrics of a codebook file"))
    sp.add_argument("codebook", nargs="?")
    sp.add_argument("--kappa")
    sp.add_argument("--ebn0")
    sp.add_argument("--mode", choices=("auto", "exact", "montecarlo"))
    sp.add_argument("--Q", type=int)
    sp.add_argument("--t-max", dest="t_max", type=int)

    sp = common(sub.add_parser("simulate", help="uncoded BER sweep"))
    sp.add_argument("codebook", nargs="?")
    sp.add_argument("--kappa", help="value, 'inf', or comma list")
    sp.add_argument("--ebn0", help="a:b:step")
    sp.add_argument("--frames", type=int)
    sp.add_argument("--decoder", choices=sorted(DECODERS))
    sp.add_argument("--max-iters", dest="max_iters", type=int)
    sp.add_argument("--tol", type=float)
    sp.add_argument("--damping", type=float)
    sp.add_argument("--profile", action="store_true", default=None,
                    help="also write BER per iteration")

    sp = common(sub.add_parser("complexity", help="operation counts and CRR"))
    sp.add_argument("codebook", nargs="?")
    sp.add_argument("--T", type=int)
    sp.add_argument("--d-f", dest="d_f", type=int)
    sp.add_argument("--N", type=int)
    sp.add_argument("--J", type=int)
    sp.add_argument("--it", type=int, help="LP decoder iterations")
    sp.add_argument("--baseline-T", dest="baseline_T", type=int)
    sp.add_argument("--baseline-it", dest="baseline_it", type=int)

    sp = common(sub.add_parser("validate", help="check a codebook file"), out=False)
    sp.add_argument("codebook", nargs="?")
    return p


def resolve_config(args: argparse.Namespace) -> dict:
    cmd = args.command
    cfg = dict(DEFAULTS[cmd])
    if args.config:
        try:
            with open(args.config) as fh:
                file_cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(file_cfg, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = set(file_cfg) - set(cfg) - {"threads"}
        if unknown:
            raise ConfigError(f"unknown config keys for {cmd}: {sorted(unknown)}")
        cfg.update(file_cfg)
    for k, v in vars(args).items():
        if k in ("command", "config") or v is None:
            continue
        cfg[k] = v
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        paths = COMMANDS[args.command](cfg)
    except (ConfigError, CodebookFormatError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # numerical or I/O failure during the run
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    for p in paths:
        print(p)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
