"""Command-line entry point: `horolab <subcommand> [options]`."""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import chainprox as cp
from . import cover
from . import graph as gr
from . import lipschitz as lp
from . import moebius as mb
from . import slack as sl
from .errors import BudgetExceeded, BudgetMismatch, ConfigurationInvalid, HorolabError, NotLipschitz
from .io import ExperimentConfig, dumps, error_payload, write_artifacts

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_BUDGET = 3
EXIT_CONFIG = 4


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, (ConfigurationInvalid, NotLipschitz)):
        return EXIT_CONFIG
    if isinstance(exc, (BudgetExceeded, BudgetMismatch)):
        return EXIT_BUDGET
    return EXIT_VALIDATION


def _bundle(cfg):
    path = cfg.section("inputs").get("bundle") or None
    spec = cover.load_spec(path) if path else cover.load_shipped_bundle()
    return spec, cover.build_vertices(spec)


def _graph(cfg, path):
    path = path or cfg.section("inputs").get("graph")
    if not path:
        spec, vs = _bundle(cfg)
        cands, _ = cover.enumerate_connectors(spec, vs, int(cfg.budget("max_len")), float(cfg.budget("slack_cap")))
        return gr.graph_from_json(cover.connector_graph_json(vs, cands))
    return gr.graph_from_json(json.loads(Path(path).read_text()))


def _model(args) -> dict:
    m = {"kind": args.model}
    if args.alpha is not None:
        m["alpha"] = args.alpha
    if args.lengths:
        m["lengths"] = json.loads(args.lengths)
    if args.permutation:
        m["permutation"] = json.loads(args.permutation)
    if args.components is not None:
        m["components"] = args.components
    return m


# --- subcommands --------------------------------------------------------------


def cmd_bruhat(args, cfg):
    m = mb.normalize(np.array(json.loads(args.matrix), dtype=float))
    dec = mb.bruhat_nau(m)
    res = {"matrix": list(m.as_tuple()), "n": dec.n_param, "t": dec.t, "u": dec.u_param, "log_delta": mb.log_delta(m)}
    return res, ("n", "t", "u", "log_delta"), [(dec.n_param, dec.t, dec.u_param, res["log_delta"])]


def cmd_connectors(args, cfg):
    spec, vs = _bundle(cfg)
    report = cover.validate_group(spec)
    cands, skipped = cover.enumerate_connectors(spec, vs, int(cfg.budget("max_len")), float(cfg.budget("slack_cap")), int(cfg.budget("cap")))
    res = {
        "validation": report,
        "vertices": [v.to_json() for v in vs],
        "connectors": [c.to_json() for c in cands],
        "skipped_words": skipped,
        "graph": cover.connector_graph_json(vs, cands),
    }
    rows = [(c.target_vertex, c.source_vertex, c.source_sheet, cover.format_word(c.word), c.raw_slack) for c in cands]
    return res, ("target", "source", "sheet", "word", "slack"), rows


def cmd_slack(args, cfg):
    spec, vs = _bundle(cfg)
    by = {v.name: v for v in vs}
    target, source = by[args.target or vs[0].name], by[args.source or vs[0].name]
    word = cover.parse_word(args.word)
    m = spec.evaluate(word)
    val = cover.connector_slack(spec, target, source, word, m)
    res = {"word": cover.format_word(word), "target": target.name, "source": source.name, "bruhat": val}
    if args.geometric:
        src_minus = m(source.axis.xi_minus)
        cand = cover.ConnectorCandidate(source.name, target.name, spec.degree(word) % source.degree, word, m, mb.GeodesicLine(src_minus, target.axis.xi_plus), val)
        res["geometric"] = sl.connector_geometric_slack(spec, target, source, cand).value
    return res, ("word", "bruhat", "geometric"), [(res["word"], val, res.get("geometric", float("nan")))]


def cmd_twist(args, cfg):
    fam = sl.model_family(args.x, args.y, args.c, args.base, (0, args.k_max))
    return fam.to_json(), ("k", "slack", "residual"), fam.csv_rows()


def cmd_zset(args, cfg):
    G = _graph(cfg, args.graph)
    B = args.budget if args.budget is not None else float(cfg.budget("B"))
    z = gr.enumerate_path_slacks(G, args.source, args.target, B, cap=int(cfg.budget("cap")))
    return z.to_json(), ("slack", "min_edges"), z.csv_rows()


def cmd_depth(args, cfg):
    G = _graph(cfg, args.graph)
    B = args.budget if args.budget is not None else float(cfg.budget("B"))
    src = args.source or G.vertex_ids[0]
    dst = args.target or src
    reports = gr.h_sweep(G, dst, src, B, args.h, args.levels)
    z = gr.enumerate_path_slacks(G, src, dst, B, cap=int(cfg.budget("cap")))
    levels = gr.hom_levels(z, args.levels, B - B / 10)
    res = {
        "sweep": [r.to_json() for r in reports],
        "stable": gr.sweep_stable(reports),
        "hom_level_minima": [float(v.min()) if len(v) else None for v in levels],
    }
    rows = [(i + 1, len(v), float(v.min()) if len(v) else float("nan")) for i, v in enumerate(levels)]
    return res, ("level", "size", "min"), rows


def cmd_census(args, cfg):
    G = _graph(cfg, args.graph)
    B = args.budget if args.budget is not None else float(cfg.budget("B"))
    rep = gr.census(G, B)
    res = rep.to_json()
    res["zsets"] = {f"{a}|{b}": z.to_json() for (a, b), z in sorted(rep.zsets.items())}
    rows = [(a, b, v, z.ray_start) for (a, b), z in sorted(rep.zsets.items()) for v in z.slacks.tolist()]
    return res, ("x_i", "x_j", "slack", "ray_start"), rows


def cmd_chainprox(args, cfg):
    sys_ = cp.discretize(_model(args), args.n)
    M = args.M if args.M is not None else int(cfg.budget("M"))
    if args.x is not None and args.y is not None and not args.classify:
        cost, cert = cp.interception_cost(sys_, args.x, args.y, M)
        res = {"system": sys_.to_json(), "cost": cost, "certificate": cert.to_json()}
        return res, ("x", "y", "cost"), [(args.x, args.y, cost)]
    eps = args.eps_class if args.eps_class is not None else cfg.tol("class_threshold")
    part = cp.classify(sys_, eps, M)
    res = {"system": sys_.to_json(), "partition": part.to_json(), "max_cost": part.max_cost}
    rows = [(int(i), k) for k, cl in enumerate(part.classes) for i in cl]
    return res, ("point", "class"), rows


def cmd_chainrec(args, cfg):
    sys_ = cp.discretize(_model(args), args.n)
    found, chain = cp.chain_recurrent(sys_, args.x, args.b, args.eps)
    res = {"system": sys_.to_json(), "found": found, "chain": chain}
    return res, ("start", "end", "jump"), chain or []


def cmd_mcshane(args, cfg):
    data = json.loads(Path(args.data).read_text())
    pts = np.array([complex(*p) for p in data["points"]])
    f = lp.PartialLipschitzFunction(pts, np.array(data["values"], dtype=float))
    queries = np.array([complex(*q) for q in data.get("queries", [])], dtype=complex)
    vals = lp.mcshane_extend(f, queries)
    res = {"queries": [[q.real, q.imag] for q in queries], "values": vals.tolist()}
    return res, ("re", "im", "value"), [(q.real, q.imag, v) for q, v in zip(queries, vals)]


def cmd_verify_all(args, cfg):
    from .acceptance import CHECKS

    out = Path(args.out or cfg.output_dir) / "acceptance"
    results = []
    only = set(args.only or [])
    for check in CHECKS:
        if only and check.id not in only:
            continue
        r = check.run(cfg)
        print(r.line(), flush=True)
        write_artifacts(out, f"check-{check.id:02d}", "verify-all", cfg, r.to_json())
        results.append(r)
    res = {"checks": [{"id": r.id, "name": r.name, "passed": r.passed} for r in results], "passed": all(r.passed for r in results)}
    rows = [(r.id, r.name, r.passed) for r in results]
    return res, ("id", "name", "passed"), rows, all(r.ok for r in results)


COMMANDS = {
    "bruhat": cmd_bruhat,
    "connectors": cmd_connectors,
    "slack": cmd_slack,
    "twist": cmd_twist,
    "zset": cmd_zset,
    "depth": cmd_depth,
    "census": cmd_census,
    "chainprox": cmd_chainprox,
    "chainrec": cmd_chainrec,
    "mcshane": cmd_mcshane,
    "verify-all": cmd_verify_all,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML experiment config")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config entry")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output directory")

    p = argparse.ArgumentParser(prog="horolab", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("bruhat", parents=[common], help="NAU decomposition of a 2x2 matrix")
    s.add_argument("--matrix", required=True, help='JSON, e.g. "[[1,1],[1,2]]"')

    sub.add_parser("connectors", parents=[common], help="enumerate connectors of the bundle")

    s = sub.add_parser("slack", parents=[common], help="slack of one connector word")
    s.add_argument("--word", required=True)
    s.add_argument("--target")
    s.add_argument("--source")
    s.add_argument("--geometric", action="store_true", help="also compute the polyline slack")

    s = sub.add_parser("twist", parents=[common], help="model twist family")
    s.add_argument("--x", type=float, required=True)
    s.add_argument("--y", type=float, required=True)
    s.add_argument("--c", type=float, required=True)
    s.add_argument("--base", type=float, default=0.0)
    s.add_argument("--k-max", type=int, default=40)

    for name in ("zset", "depth", "census"):
        s = sub.add_parser(name, parents=[common])
        s.add_argument("--graph", help="graph JSON; the bundle connector graph when omitted")
        s.add_argument("--budget", type=float)
        if name != "census":
            s.add_argument("--from", dest="source", required=(name == "zset"))
            s.add_argument("--to", dest="target", required=(name == "zset"))
        if name == "depth":
            s.add_argument("--h", type=float, default=5e-3)
            s.add_argument("--levels", type=int, default=4)

    for name in ("chainprox", "chainrec"):
        s = sub.add_parser(name, parents=[common])
        s.add_argument("--model", required=True, choices=["rotation", "doubling", "iet", "laminar", "absorbing"])
        s.add_argument("--n", type=int, default=1000)
        s.add_argument("--alpha", type=float)
        s.add_argument("--lengths")
        s.add_argument("--permutation")
        s.add_argument("--components", type=int)
        s.add_argument("--x", type=int, required=(name == "chainrec"))
        if name == "chainprox":
            s.add_argument("--y", type=int)
            s.add_argument("--M", type=int)
            s.add_argument("--eps-class", "--eps", dest="eps_class", type=float)
            s.add_argument("--classify", action="store_true", help="partition all sample points")
        else:
            s.add_argument("--b", type=float, default=1.0)
            s.add_argument("--eps", type=float, required=True)

    s = sub.add_parser("mcshane", parents=[common], help="extend 1-Lipschitz samples")
    s.add_argument("--data", required=True, help="JSON with points, values, queries")

    s = sub.add_parser("verify-all", parents=[common], help="run the acceptance suite")
    s.add_argument("--only", type=int, action="append", help="restrict to a check id")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out_dir = None
    try:
        overrides = list(args.set)
        if args.seed is not None:
            overrides.append(f"seed={args.seed}")
        cfg = ExperimentConfig.load(args.config, overrides)
        out_dir = Path(args.out) if args.out else cfg.output_dir
        ret = COMMANDS[args.command](args, cfg)
        ok = True
        if len(ret) == 4:
            res, header, rows, ok = ret
        else:
            res, header, rows = ret
        name = args.command.replace("-", "_")
        paths = write_artifacts(out_dir, name, args.command, cfg, res, header, rows)
        if args.command != "verify-all":
            print(dumps(res))
        print(f"wrote {', '.join(str(p) for p in paths)}", file=sys.stderr)
        return EXIT_OK if ok else EXIT_VALIDATION
    except (HorolabError, ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        code = exit_code_for(exc)
        payload = error_payload(exc, code)
        text = dumps(payload)
        print(text, file=sys.stderr)
        if out_dir is not None:
            try:
                out_dir.mkdir(parents=True, exist_ok=True)
                (out_dir / "error.json").write_text(text + "\n")
            except OSError:
                pass
        return code


if __name__ == "__main__":
    sys.exit(main())
