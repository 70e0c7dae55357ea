"""Command-line entry point: ``satxplain {explain,encode,score,heatmap}``.

Exit codes: 0 ok, 1 configuration, 2 I/O, 3 oracle, 4 solver/timeout.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .dimacs import write_dimacs, write_wcnf
from .encoder import build_pmaxsat, encode_forest, encode_instance
from .errors import ConfigError, DimensionMismatch, InputError, SatxplainError
from .io import (
    atomic_write,
    emit_heatmap,
    explanation_table_csv,
    feature_table_csv,
    ingest_csv,
    read_table_csv,
)
from .pipeline import (
    RunConfig,
    default_jobs,
    explanations_from_report,
    ne_from_dict,
    ne_to_dict,
    report_dict,
    run,
)
from .scoring import KINDS, build_report
from .surrogate import Instance, LabelTable, SubprocessOracle, forest_from_dict, label, sample_neighborhood, train_on_neighborhood

log = logging.getLogger("satxplain")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _grid(text: str) -> tuple[int, int]:
    try:
        w, h = text.lower().split("x")
        return int(w), int(h)
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must look like 28x28, got {text!r}") from None


def _add_run_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", help="CSV dataset with a header row of feature names")
    p.add_argument("--oracle-cmd", help="black-box command: reads CSV instances on stdin, prints 0/1 per line")
    p.add_argument("--labels-col", help="use this CSV column as precomputed black-box labels")
    p.add_argument("--instance", required=True, help="row index into --data, or an inline 0/1 vector")
    p.add_argument("--radius", type=int, default=None, help="Hamming radius of the neighborhood (default: unbounded)")
    p.add_argument("--sampler", choices=("auto", "dataset", "perturb"), default="auto")
    p.add_argument("--samples", type=int, default=200, help="perturbed samples to draw in perturb mode")
    p.add_argument("--trees", type=int, default=10)
    p.add_argument("--depth", type=int, default=24)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--polarity", choices=("neg", "pos"), default="neg")
    p.add_argument("--timeout", type=float, default=600.0, help="seconds per enumeration")
    p.add_argument("--max-explanations", type=int, default=None)
    p.add_argument("--neighbor-cap", type=int, default=50)
    p.add_argument("--forest-file", help="JSON forest to explain instead of training one")
    p.add_argument("--jobs", type=int, default=None, help="worker processes (default: CPU count)")
    p.add_argument("--batch-size", type=int, default=256, help="instances per oracle call")
    p.add_argument("--solver", choices=("auto", "python", "pysat"), default="auto",
                   help="SAT backend: built-in CDCL or python-sat (auto: python-sat when installed)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="satxplain", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("explain", help="enumerate and score sufficient reasons and counterfactuals")
    _add_run_args(p)
    p.add_argument("--out", default="report.json", help="report path; the neighborhood cache goes next to it")
    p.add_argument("--grid", type=_grid, help="also write FI heatmaps with this WxH layout")

    p = sub.add_parser("encode", help="write the forest CNF, the Partial Max-SAT WCNF and the variable map")
    _add_run_args(p)
    p.add_argument("--out", default=".", help="output directory")

    p = sub.add_parser("score", help="recompute score tables from an explain run")
    p.add_argument("report")
    p.add_argument("cache", nargs="?", help="neighborhood cache (default: next to the report)")
    p.add_argument("--out", default=".", help="output directory for CSV tables")

    p = sub.add_parser("heatmap", help="render one feature-score column as a PGM image")
    p.add_argument("table", help="feature score CSV written by 'score'")
    p.add_argument("--column", default="FI", choices=("FI", "FG", "FR"))
    p.add_argument("--grid", type=_grid, required=True)
    p.add_argument("--out", required=True)
    return parser


def _read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON: {exc}") from exc


def _parse_instance(text: str, dataset, n: int | None) -> tuple[int, ...]:
    text = text.strip()
    if dataset is not None and text.isdigit() and (n is None or len(text) != n):
        idx = int(text)
        if not 0 <= idx < len(dataset.rows):
            raise ConfigError(f"row index {idx} out of range 0..{len(dataset.rows) - 1}")
        return dataset.rows[idx].values
    tokens = text.split(",") if "," in text else list(text)
    tokens = [t.strip() for t in tokens]
    if any(t not in ("0", "1") for t in tokens):
        raise ConfigError(f"instance must be a row index or a 0/1 vector, got {text!r}")
    return tuple(int(t) for t in tokens)


def config_from_args(args) -> RunConfig:
    dataset = ingest_csv(args.data, args.labels_col) if args.data else None
    forest = None
    names = None
    if args.forest_file:
        d = _read_json(args.forest_file)
        forest = forest_from_dict(d)
        names = d.get("feature_names")
    n = dataset.n_features if dataset else (forest.n_features if forest else None)
    if dataset is None and forest is None:
        raise ConfigError("need --data or --forest-file")
    oracle = None
    if args.oracle_cmd:
        oracle = SubprocessOracle(args.oracle_cmd, batch_size=args.batch_size)
    elif args.labels_col:
        oracle = LabelTable.from_dataset(dataset)
        oracle.batch_size = args.batch_size
    return RunConfig(
        dataset=dataset,
        instance=_parse_instance(args.instance, dataset, n),
        oracle=oracle,
        forest=forest,
        feature_names=names,
        radius=args.radius,
        sampler=args.sampler,
        samples=args.samples,
        nb_trees=args.trees,
        max_depth=args.depth,
        seed=args.seed,
        polarity=args.polarity,
        timeout=args.timeout,
        max_explanations=args.max_explanations,
        neighbor_cap=args.neighbor_cap,
        jobs=args.jobs if args.jobs is not None else default_jobs(),
        solver=args.solver,
    )


def cache_path(report_path) -> Path:
    p = Path(report_path)
    return p.with_name(p.stem + ".neighborhood.json")


def cmd_explain(args) -> int:
    cfg = config_from_args(args)
    if args.grid and args.grid[0] * args.grid[1] != cfg.n_features:
        w, h = args.grid
        raise DimensionMismatch(f"grid {w}x{h} has {w * h} cells for {cfg.n_features} features")
    res = run(cfg)
    report = report_dict(res)
    names = cfg.names
    atomic_write(cache_path(args.out), json.dumps(ne_to_dict(res.ne, names), indent=1) + "\n")
    atomic_write(args.out, json.dumps(report, indent=1) + "\n")
    if args.grid:
        w, h = args.grid
        out = Path(args.out)
        for kind in KINDS:
            scores = [fs.scores["FI"] for fs in res.report.features[kind]]
            emit_heatmap(scores, w, h, out.with_name(f"{out.stem}.FI_{kind}.pgm"))

    print(f"instance predicted {res.explained.prediction} (polarity {cfg.polarity})")
    if res.fidelity is not None:
        print(f"surrogate fidelity on {len(res.neighborhood)} neighbors: {res.fidelity:.3f}")
    if res.note:
        print(res.note)
    for kind in KINDS:
        block = report["explanations"][kind]
        status = "complete" if block["complete"] else f"incomplete ({block['stopped']})"
        print(f"{kind}: {len(block['list'])} explanation(s), {status}")
        for e in block["list"]:
            print("  " + " AND ".join(f"{it['feature']}={it['value']}" for it in e["items"]))
    print(f"report written to {args.out}")
    return 0


def cmd_encode(args) -> int:
    cfg = config_from_args(args)
    cfg.validate()
    rf = cfg.forest
    if rf is None:
        r = cfg.n_features if cfg.radius is None else cfg.radius
        x = Instance(cfg.instance)
        if cfg.sampler == "perturb" or (cfg.sampler == "auto" and cfg.dataset is None):
            ns = sample_neighborhood(x, r, samples=cfg.samples, seed=cfg.seed)
        else:
            ns = sample_neighborhood(x, r, dataset=cfg.dataset, seed=cfg.seed)
        ns = label(ns, cfg.oracle)
        rf = train_on_neighborhood(ns, nb_trees=cfg.nb_trees, max_depth=cfg.max_depth, seed=cfg.seed)
    cm = encode_forest(rf, cfg.polarity, feature_names=cfg.names)
    pm = build_pmaxsat(cm, encode_instance(cfg.instance, cm.var_map))
    out = Path(args.out)
    atomic_write(out / "forest.cnf", write_dimacs(cm.cnf))
    atomic_write(out / "instance.wcnf", write_wcnf(pm))
    atomic_write(out / "varmap.json", json.dumps(cm.var_map_json(), indent=1) + "\n")
    print(f"{len(cm.cnf)} hard clauses over {cm.cnf.num_vars} variables, {len(pm.soft)} soft unit clauses")
    return 0


def cmd_score(args) -> int:
    report = _read_json(args.report)
    cache_file = Path(args.cache) if args.cache else cache_path(args.report)
    if not cache_file.exists():
        raise InputError(f"missing neighborhood cache {cache_file}")
    cache = _read_json(cache_file)
    names = cache.get("feature_names")
    if not names:
        raise InputError(f"{cache_file}: no feature names")
    ne = ne_from_dict(cache)
    explanations = explanations_from_report(report)
    scored = build_report(len(names), explanations, ne)
    out = Path(args.out)
    for kind in KINDS:
        atomic_write(out / f"features_{kind}.csv", feature_table_csv(names, scored.features[kind]))
        atomic_write(out / f"explanations_{kind}.csv", explanation_table_csv(names, scored.explanations[kind]))
    print(f"score tables written to {out}")
    return 0


def cmd_heatmap(args) -> int:
    try:
        rows = read_table_csv(Path(args.table).read_text())
    except OSError as exc:
        raise InputError(f"cannot read {args.table}: {exc}") from exc
    if rows and args.column not in rows[0]:
        raise InputError(f"{args.table} has no column {args.column}")
    scores = [float(r[args.column]) if r[args.column] else None for r in rows]
    w, h = args.grid
    emit_heatmap(scores, w, h, args.out)
    return 0


COMMANDS = {"explain": cmd_explain, "encode": cmd_encode, "score": cmd_score, "heatmap": cmd_heatmap}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SatxplainError as exc:
        print(f"satxplain: error: {exc}", file=sys.stderr)
        return exc.exit_code
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except SatxplainError as exc:
        print(f"satxplain: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"satxplain: I/O error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
