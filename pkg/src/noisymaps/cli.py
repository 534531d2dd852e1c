"""``noisymaps`` command line.

Exit codes: 0 success, 1 usage error, 2 domain / parse error, 3 resource cap.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

from . import meanfield, oracle
from .engine import DEFAULT_CAP, ProductInit, couple_run, run
from .errors import DomainError, NotFoundError, ResourceError, SpecParseError
from .intervals import as_fraction
from .maps import (
    BINARY,
    PAIR,
    Maj,
    LayeredMaj,
    OpenSetSpec,
    build_F,
    build_M,
    build_M_IE,
    densify,
    dumps,
    load,
    load_gdelta,
    phi,
    phi_inv,
    schedule_for_open_set,
    schedule_for_target,
)
from .maps.serialize import to_dict
from .scan import ScanConfig, parse_grid, scan

EXIT_OK, EXIT_USAGE, EXIT_DOMAIN, EXIT_RESOURCE = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


# ---------------------------------------------------------------------------
# helpers


def _emit(text: str, path=None):
    if path:
        Path(path).write_text(text if text.endswith("\n") else text + "\n")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _json(obj) -> str:
    return json.dumps(obj, indent=2, default=str)


def _cells(text: str) -> list[int]:
    """``"0,4,7"`` or ``"0:8"`` (half open) or a mix."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if ":" in part:
            a, b = part.split(":")
            out.extend(range(int(a), int(b)))
        else:
            out.append(int(part))
    if not out:
        raise DomainError("empty cell list")
    return out


def _open_set(text: str) -> OpenSetSpec:
    """``"a:b,c:d"`` with rational endpoints."""
    pairs = []
    for part in text.split(","):
        if part.strip():
            a, b = part.split(":")
            pairs.append((as_fraction(a), as_fraction(b)))
    return OpenSetSpec(tuple(pairs))


def _load_config(path):
    if not path:
        return {}
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SpecParseError(exc.msg, line=exc.lineno, column=exc.colno) from None


def _merge(args, cfg, names):
    """Flags override config-file values; returns the resolved dict."""
    out = {}
    for n in names:
        v = getattr(args, n, None)
        out[n] = v if v is not None else cfg.get(n)
    return out


def _require(conf, *names):
    missing = [n for n in names if conf.get(n) is None]
    if missing:
        raise UsageError("missing required setting(s): " + ", ".join("--" + m.replace("_", "-") for m in missing))


# ---------------------------------------------------------------------------
# mf


def cmd_mf(args):
    if args.what == "roots":
        _require(vars(args), "n", "eps")
        fps = meanfield.find_fixed_points(args.n, args.eps)
        out = {
            "n": args.n,
            "eps": args.eps,
            "roots": [{"value": p.value, "stable": p.stable, "degenerate": p.degenerate} for p in fps.points],
        }
    elif args.what == "threshold":
        _require(vars(args), "n")
        out = {"n": args.n, "threshold": meanfield.mf_threshold(args.n)}
    else:
        _require(vars(args), "n", "eps", "t")
        if args.p is None:
            seq = meanfield.marginal_recursion(args.n, args.eps, args.alpha0, args.t)
        else:
            seq = meanfield.layered_recursion(args.n, args.eps, args.p, args.alpha0, args.t)
        out = {"n": args.n, "eps": args.eps, "alpha0": args.alpha0, "p": args.p, "values": list(seq.values)}
    _emit(_json(out), args.out)


# ---------------------------------------------------------------------------
# map


def _build_map(args):
    kind = args.type
    if kind == "maj":
        _require(vars(args), "n")
        return Maj(args.n, PAIR if args.alphabet == "pair" else BINARY)
    if kind == "layered":
        _require(vars(args), "n")
        if (args.eps0 is None) == (args.open_set is None):
            raise UsageError("layered maps need exactly one of --eps0 or --open-set")
        if args.eps0 is not None:
            return LayeredMaj(args.n, schedule_for_target(as_fraction(args.eps0)))
        return LayeredMaj(args.n, schedule_for_open_set(_open_set(args.open_set), args.n))
    if kind == "M":
        return build_M(args.rows)
    if kind == "M_IE":
        _require(vars(args), "open_set")
        return build_M_IE(_open_set(args.open_set), args.rows)
    if kind in ("F", "gdelta"):
        _require(vars(args), "spec")
        return build_F(load_gdelta(args.spec), args.rows)
    if kind == "densify":
        _require(vars(args), "base", "target", "n")
        return densify(load(args.base), load(args.target), args.n)
    raise UsageError(f"unknown map type {kind!r}")


def _describe_rows(m, cells):
    rows = []
    for c in cells:
        r = m.rule(c)
        rec = {"cell": c, "kind": r.kind, "truncated": r.truncated}
        if r.inputs is not None:
            rec["inputs"] = [r.inputs.start, r.inputs.step, r.inputs.count]
        if r.gate_cells is not None:
            rec["gate"] = [r.gate_cells.start, r.gate_cells.step, r.gate_cells.count]
            rec["intervals"] = [[str(a), str(b)] for a, b in r.gate_intervals]
        rows.append(rec)
    return rows


def cmd_map(args):
    if args.what == "phi":
        _cmd_phi(args)
        return
    if args.what == "emit":
        _emit(dumps(_build_map(args)), args.out)
        return
    _require(vars(args), "map")
    m = load(args.map)
    rows = _describe_rows(m, _cells(args.cells))
    buf = io.StringIO()
    for rec in rows:
        parts = [f"cell {rec['cell']}", rec["kind"]]
        if "inputs" in rec:
            s, h, n = rec["inputs"]
            parts.append(f"inputs {s}+{h}k (k<{n})")
        if "gate" in rec:
            s, h, n = rec["gate"]
            parts.append(f"gate {s}+{h}k (k<{n}) in " + " u ".join(f"[{a},{b}]" for a, b in rec["intervals"]))
        if rec["truncated"]:
            parts.append("(truncated row)")
        buf.write("  ".join(parts) + "\n")
    _emit(_json({"map": args.map, "cells": rows}) if args.json else buf.getvalue(), args.out)


def _cmd_phi(args):
    if args.k is not None:
        i, j = phi_inv(args.k)
        _emit(f"({i},{j})")
    elif args.i is not None and args.j is not None:
        _emit(str(phi(args.i, args.j)))
    else:
        raise UsageError("phi needs --k, or both --i and --j")


# ---------------------------------------------------------------------------
# sim / couple


_RUN_KEYS = ["map", "eps", "t", "targets", "samples", "seed", "shortcut", "cap", "threads"]


def _resolve_run(args, couple):
    cfg = _load_config(args.config)
    keys = _RUN_KEYS + (["init_a_first", "init_a_second", "init_b_first", "init_b_second"] if couple else ["init_first", "init_second"])
    conf = _merge(args, cfg, keys)
    if isinstance(cfg.get("init"), dict) and not couple:
        conf["init_first"] = conf["init_first"] if args.init_first is not None else cfg["init"].get("first")
        conf["init_second"] = conf["init_second"] if args.init_second is not None else cfg["init"].get("second")
    _require(conf, "map", "eps", "t", "targets", "samples", "seed")
    if isinstance(conf["targets"], str):
        conf["targets"] = _cells(conf["targets"])
    conf["eps"] = float(as_fraction(conf["eps"]))
    conf["shortcut"] = bool(conf["shortcut"])
    conf["cap"] = int(conf["cap"] or DEFAULT_CAP)
    for k in keys:
        if k.startswith("init") and conf[k] is None:
            conf[k] = 1.0 if k == "init_b_first" else 0.0
    m = load(conf["map"])
    return conf, m


def _records_csv(conf, records) -> str:
    buf = io.StringIO()
    buf.write("# config: " + json.dumps(conf, sort_keys=True, default=str) + "\n")
    if records:
        w = csv.DictWriter(buf, fieldnames=list(records[0]), lineterminator="\n")
        w.writeheader()
        for r in records:
            w.writerow({k: ("%.17g" % v if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()


def _write_results(args, conf, records):
    conf_out = dict(conf)
    doc = _json({"config": conf_out, "results": records})
    if args.json_out:
        _emit(doc, args.json_out)
    if args.csv_out:
        _emit(_records_csv(conf_out, records), args.csv_out)
    if not args.json_out and not args.csv_out:
        _emit(doc)


def cmd_sim(args):
    couple = args.what == "couple"
    conf, m = _resolve_run(args, couple)
    kw = dict(shortcut=conf["shortcut"], cap=conf["cap"], threads=conf["threads"])
    if couple:
        res = couple_run(
            m,
            ProductInit(conf["init_a_first"], conf["init_a_second"]),
            ProductInit(conf["init_b_first"], conf["init_b_second"]),
            conf["eps"],
            conf["t"],
            conf["targets"],
            conf["samples"],
            conf["seed"],
            **kw,
        )
    else:
        res = run(
            m,
            ProductInit(conf["init_first"], conf["init_second"]),
            conf["eps"],
            conf["t"],
            conf["targets"],
            conf["samples"],
            conf["seed"],
            **kw,
        )
    conf["map_descriptor"] = to_dict(m)
    _write_results(args, conf, res.to_records())


def cmd_couple(args):
    args.what = "couple"
    cmd_sim(args)


# ---------------------------------------------------------------------------
# scan


def cmd_scan(args):
    cfg = _load_config(args.config)
    conf = _merge(args, cfg, ["map", "grid", "t", "samples", "seed", "witness", "g_star", "delta", "second", "cap", "threads"])
    _require(conf, "map", "grid", "t", "samples", "seed")
    grid = parse_grid(conf["grid"]) if isinstance(conf["grid"], str) else [as_fraction(tuple(g) if isinstance(g, list) else g) for g in conf["grid"]]
    wit = conf["witness"]
    if isinstance(wit, str):
        wit = _cells(wit)
    sc = ScanConfig(
        load(conf["map"]),
        grid,
        int(conf["t"]),
        int(conf["samples"]),
        int(conf["seed"]),
        witnesses=wit,
        g_star=0.1 if conf["g_star"] is None else float(conf["g_star"]),
        delta=0.05 if conf["delta"] is None else float(conf["delta"]),
        second=0.0 if conf["second"] is None else float(conf["second"]),
        shortcut=True if args.shortcut else None,
        cap=int(conf["cap"] or DEFAULT_CAP),
        threads=conf["threads"],
        map_ref=str(conf["map"]),
    )
    res = scan(sc)
    res.write(args.csv, args.json, args.svg)
    if not args.csv:
        _emit(res.to_csv())


# ---------------------------------------------------------------------------
# oracle


def cmd_oracle(args):
    if args.what == "gap":
        _require(vars(args), "n", "eps")
        out = {"n": args.n, "eps": args.eps, "gap_lower_bound": oracle.gap_lower_bound(args.n, args.eps)}
        if args.t is not None:
            out["t"] = args.t
            out["exact_gap"] = oracle.exact_gap(args.n, args.eps, args.t)
    elif args.what == "marginals":
        _require(vars(args), "map", "eps", "t")
        m = load(args.map)
        cells = _cells(args.cells)
        vals = oracle.exact_marginals(m, args.eps, ProductInit(args.init_first, args.init_second), args.t, cells)
        out = {
            "config": {"map": args.map, "eps": args.eps, "t": args.t, "init_first": args.init_first, "init_second": args.init_second},
            "marginals": [{"cell": c, "first": float(v)} for c, v in zip(cells, vals)],
        }
    else:
        _require(vars(args), "map", "eps")
        m = load(args.map)
        if args.cells:
            chain = oracle.finite_chain(m, _cells(args.cells), args.eps, args.state_cap)
        elif hasattr(m, "radius"):
            chain = oracle.densify_block(m, args.eps, args.state_cap)
        else:
            raise UsageError("--cells is required unless the map is densified")
        st = oracle.exact_finite_markov(chain)
        out = {
            "config": {"map": args.map, "eps": args.eps, "cells": chain.cells.tolist()},
            "states": chain.n_states,
            "stationary": [
                {
                    "residual": s.residual,
                    "first_layer_marginals": [float(chain.marginal(s.distribution, c)[1::2].sum()) for c in chain.cells.tolist()],
                }
                for s in st
            ],
        }
    _emit(_json(out), args.out)


# ---------------------------------------------------------------------------
# parser


def _add_run_flags(p, couple):
    p.add_argument("--config", help="run configuration JSON (flags override its fields)")
    p.add_argument("--map", help="map descriptor JSON file")
    p.add_argument("--eps", help="noise rate (decimal or rational a/b)")
    p.add_argument("--t", type=int, help="number of steps")
    p.add_argument("--targets", help="target cells, e.g. 0,3,7 or 0:8")
    p.add_argument("--samples", type=int, help="number of independent samples")
    p.add_argument("--seed", type=int, help="master seed (required, here or in --config)")
    if couple:
        for leg, default in (("a", 0.0), ("b", 1.0)):
            p.add_argument(f"--init-{leg}-first", type=float, help=f"leg {leg}: P(first layer = 1), default {default}")
            p.add_argument(f"--init-{leg}-second", type=float, help=f"leg {leg}: P(second layer = 1), default 0")
    else:
        p.add_argument("--init-first", type=float, help="P(first layer = 1) per cell at time 0 (default 0)")
        p.add_argument("--init-second", type=float, help="P(second layer = 1) per cell at time 0 (default 0)")
    p.add_argument("--shortcut", action="store_true", default=None, help="draw layered gates directly (layered maps only)")
    p.add_argument("--cap", type=int, help=f"maximum cone size in cells (default {DEFAULT_CAP})")
    p.add_argument("--threads", type=int, help="worker threads (default: NOISYMAPS_THREADS or 1)")
    p.add_argument("--json-out", help="write results JSON here")
    p.add_argument("--csv-out", help="write results CSV here")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="noisymaps", description="Perturbed majority maps: mean field, construction, simulation, scanning.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("mf", help="mean-field fixed points, thresholds and recursions")
    p.add_argument("what", choices=["roots", "threshold", "recurse"])
    p.add_argument("--n", type=int, help="vote over 2n+1 cells")
    p.add_argument("--eps", type=float, help="noise rate")
    p.add_argument("--t", type=int, help="recursion length")
    p.add_argument("--alpha0", type=float, default=0.0, help="initial marginal (default 0)")
    p.add_argument("--p", type=float, help="gate probability: iterate the layered recursion")
    p.add_argument("--out", help="output file (default stdout)")
    p.set_defaults(func=cmd_mf)

    p = sub.add_parser("map", help="emit, describe or index maps")
    p.add_argument("what", choices=["emit", "describe", "phi"])
    p.add_argument("--type", choices=["maj", "layered", "M", "M_IE", "F", "gdelta", "densify"], default="maj", help="map family to emit (default maj)")
    p.add_argument("--n", type=int, help="majority half-width (2n+1 voters) or densify block width")
    p.add_argument("--alphabet", choices=["binary", "pair"], default="binary", help="plain majorities: binary or pair symbols")
    p.add_argument("--eps0", help="target noise rate of a layered map")
    p.add_argument("--open-set", help="open set as a:b,c:d")
    p.add_argument("--spec", help="G-delta spec JSON file")
    p.add_argument("--rows", type=int, default=8, help="interleave truncation depth (default 8)")
    p.add_argument("--base", help="descriptor file of the densify base")
    p.add_argument("--target", help="descriptor file of the densify target")
    p.add_argument("--map", help="descriptor file to describe")
    p.add_argument("--cells", default="0:8", help="cells to describe (default 0:8)")
    p.add_argument("--json", action="store_true", help="describe as JSON")
    p.add_argument("--k", type=int, help="phi: packed index to unpack")
    p.add_argument("--i", type=int, help="phi: column")
    p.add_argument("--j", type=int, help="phi: row")
    p.add_argument("--out", help="output file (default stdout)")
    p.set_defaults(func=cmd_map)

    p = sub.add_parser("phi", help="row packing: --k K -> (i,j), or --i I --j J -> k")
    p.add_argument("--k", type=int, help="packed index to unpack")
    p.add_argument("--i", type=int, help="column")
    p.add_argument("--j", type=int, help="row")
    p.set_defaults(func=lambda a: _cmd_phi(a))

    p = sub.add_parser("sim", help="Monte Carlo runs and couplings")
    p.add_argument("what", choices=["run", "couple"])
    _add_run_flags(p, couple=True)
    p.add_argument("--init-first", type=float, help="run: P(first layer = 1) at time 0 (default 0)")
    p.add_argument("--init-second", type=float, help="run: P(second layer = 1) at time 0 (default 0)")
    p.set_defaults(func=cmd_sim)

    p = sub.add_parser("couple", help="grand coupling of two initial measures")
    _add_run_flags(p, couple=True)
    p.set_defaults(func=cmd_couple)

    p = sub.add_parser("scan", help="sweep eps and label bistability evidence")
    p.add_argument("--config", help="scan configuration JSON (flags override its fields)")
    p.add_argument("--map", help="map descriptor JSON file")
    p.add_argument("--grid", help="eps grid: start:stop:step or a comma list")
    p.add_argument("--t", type=int, help="horizon")
    p.add_argument("--samples", type=int, help="samples per eps and per leg")
    p.add_argument("--seed", type=int, help="master seed (required)")
    p.add_argument("--witness", help="witness cells (default: chosen per map and eps)")
    p.add_argument("--g-star", type=float, help="gap threshold (default 0.1)")
    p.add_argument("--delta", type=float, help="agreement slack (default 0.05)")
    p.add_argument("--second", type=float, help="P(second layer = 1) at time 0 (default 0)")
    p.add_argument("--shortcut", action="store_true", help="force direct gate draws (default: on for layered maps)")
    p.add_argument("--cap", type=int, help="maximum cone size in cells")
    p.add_argument("--threads", type=int, help="worker threads")
    p.add_argument("--csv", help="write CSV here (default stdout)")
    p.add_argument("--json", help="write the JSON mirror here")
    p.add_argument("--svg", help="write an SVG plot here")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("oracle", help="exact gaps, marginals and finite chains")
    p.add_argument("what", choices=["gap", "marginals", "markov"])
    p.add_argument("--n", type=int, help="gap: vote over 2n+1 cells")
    p.add_argument("--eps", type=float, help="noise rate")
    p.add_argument("--t", type=int, help="horizon (gap: also report the exact gap after t steps)")
    p.add_argument("--map", help="descriptor file")
    p.add_argument("--cells", help="cells (marginals: default 0; markov: finite support)")
    p.add_argument("--init-first", type=float, default=0.0, help="marginals: P(first layer = 1) at time 0 (default 0)")
    p.add_argument("--init-second", type=float, default=0.0, help="marginals: P(second layer = 1) at time 0 (default 0)")
    p.add_argument("--state-cap", type=int, default=oracle.STATE_CAP, help=f"markov: maximum number of chain states (default {oracle.STATE_CAP})")
    p.add_argument("--out", help="output file (default stdout)")
    p.set_defaults(func=cmd_oracle)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "what", None) == "marginals" and args.cells is None:
            args.cells = "0"
        args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except SpecParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except ResourceError as exc:
        print(f"resource error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (DomainError, NotFoundError, ValueError) as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
