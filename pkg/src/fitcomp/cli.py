"""Command-line front end.

Subcommands: ingest, fitness, eciplus, compare, equivalence, figure1,
generate, replay. Every run except replay writes a manifest recording input
hashes, the resolved configuration and output hashes; ``replay`` re-executes
a manifest and checks the outputs come out bit-identical.
"""
import argparse
import csv
import hashlib
import io
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, analysis, corpus, eciplus, fitness, trade
from .errors import FitcompError, LabelMismatch, ParseError
from .fitness import AlgoConfig

log = logging.getLogger("fitcomp")

OUT_DIR_ENV = "FITCOMP_OUT_DIR"

_NORM_ALIASES = {"arith": "arithmetic", "arithmetic": "arithmetic", "geom": "geometric", "geometric": "geometric"}
_CONFIG_KEYS = {
    "init": str,
    "normalization": str,
    "iterations": int,
    "rank_stable": None,
    "window": int,
    "check_every": int,
    "max_iterations": int,
    "epsilon_floor": float,
}


class CliError(FitcompError):
    code = "UsageError"


class ReplayMismatch(FitcompError):
    code = "ReplayMismatch"


def _bool(text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def read_config_file(path):
    """Parse ``key = value`` lines (``#`` starts a comment) into AlgoConfig kwargs."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParseError(f"{path}:{lineno}: expected key = value", line=lineno)
            key, value = (s.strip() for s in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in _CONFIG_KEYS:
                raise ParseError(f"{path}:{lineno}: unknown key {key!r}", line=lineno)
            try:
                if key == "rank_stable":
                    out[key] = _bool(value)
                elif key == "normalization":
                    out[key] = _NORM_ALIASES[value]
                else:
                    out[key] = _CONFIG_KEYS[key](value)
            except (KeyError, ValueError):
                raise ParseError(f"{path}:{lineno}: bad value {value!r} for {key}", line=lineno) from None
    return out


def resolve_config(args, base):
    """Merge defaults, an optional config file, and explicit flags (flags win)."""
    kwargs = dict(base)
    if getattr(args, "config", None):
        kwargs.update(read_config_file(args.config))
    if args.init is not None:
        kwargs["init"] = args.init
    if args.norm is not None:
        kwargs["normalization"] = _NORM_ALIASES[args.norm]
    if args.iterations is not None:
        kwargs["iterations"] = args.iterations
        kwargs["rank_stable"] = False
    if args.rank_stable:
        kwargs["rank_stable"] = True
    for key in ("window", "check_every", "max_iterations", "epsilon_floor"):
        if getattr(args, key) is not None:
            kwargs[key] = getattr(args, key)
    return AlgoConfig(**kwargs)


def sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return str(path)


def _dump_json(obj):
    return json.dumps(obj, indent=2, sort_keys=False, allow_nan=False) + "\n"


def _fmt(v):
    return "" if v is None else repr(float(v))


def _table(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([row[0]] + [_fmt(v) for v in row[1:]])
    return buf.getvalue()


def _out_dir(args):
    return Path(args.out_dir or os.environ.get(OUT_DIR_ENV) or ".")


def _load_matrix(path):
    with open(path, encoding="utf-8") as fh:
        return trade.loads_matrix(fh.read())


def _manifest(args, command, inputs, outputs, config=None):
    return {
        "tool": "fitcomp",
        "version": __version__,
        "command": command,
        "args": {k: v for k, v in sorted(vars(args).items()) if k != "func"},
        "inputs": [{"path": p, "sha256": sha256(p)} for p in inputs if p],
        "config": config.to_dict() if config is not None else None,
        "outputs": [{"path": p, "sha256": sha256(p)} for p in outputs],
    }


def _finish(args, command, inputs, outputs, config=None, stem=""):
    path = _out_dir(args) / f"{stem}manifest.json"
    _write(path, _dump_json(_manifest(args, command, inputs, outputs, config)))
    outputs = outputs + [str(path)]
    for p in outputs:
        print(p)
    return outputs


def _safe_z(v):
    try:
        return fitness.standardize(v)
    except FitcompError as exc:
        log.warning("standardization skipped: %s", exc)
        return [None] * len(v)


def cmd_ingest(args):
    if args.format == "baci":
        codes = trade.read_country_codes(args.country_codes) if args.country_codes else None
        records = trade.read_baci_csv(args.csv, args.year, codes)
    else:
        records = trade.read_flows_csv(args.csv)
    raw = trade.ingest_flows(records, unit=args.unit)
    pruned, dc, dp = trade.prune(raw, args.min_country_export, args.min_product_export)
    out = _out_dir(args)
    stem = args.name
    m_path = _write(out / f"{stem}.json", trade.dumps_matrix(pruned))
    report = {
        "countries": len(pruned.countries),
        "products": len(pruned.products),
        "dropped_countries": list(dc),
        "dropped_products": list(dp),
        "min_country_export": args.min_country_export,
        "min_product_export": args.min_product_export,
    }
    r_path = _write(out / f"{stem}.prune.json", _dump_json(report))
    return _finish(args, "ingest", [args.csv, args.country_codes], [m_path, r_path], stem=f"{stem}.")


def cmd_fitness(args):
    config = resolve_config(args, {})
    X = _load_matrix(args.matrix)
    if args.mode == "binarize":
        M = analysis.binary_input(X, args.threshold)
    elif args.mode == "binary":
        try:
            M = trade.BinaryMatrix(X.countries, X.products, X.values)
        except ValueError:
            raise ParseError(f"{args.matrix}: --binary needs a matrix of 0/1 values") from None
    else:
        M = X
    trace = fitness.run(M, config)
    F, Q = trace.fitness, trace.complexity
    out, stem = _out_dir(args), args.prefix
    eps = config.epsilon_floor
    c_rows = zip(M.countries, F, fitness.log_scores(F, eps), _safe_z(F))
    p_rows = zip(M.products, Q, fitness.log_scores(Q, eps), _safe_z(Q))
    outputs = [
        _write(out / f"{stem}countries.csv", _table(("country", "fitness", "log_fitness", "z_fitness"), c_rows)),
        _write(out / f"{stem}products.csv", _table(("product", "complexity", "log_complexity", "z_complexity"), p_rows)),
        _write(out / f"{stem}trace.json", _dump_json(trace.to_json_dict(args.keep_every))),
    ]
    return _finish(args, "fitness", [args.matrix, args.config], outputs, config, stem)


def cmd_eciplus(args):
    config = resolve_config(args, {"normalization": "geometric"})
    X = _load_matrix(args.matrix)
    if args.unit_scale != 1.0:
        X = X.scaled(args.unit_scale)
    res = eciplus.eci_plus(X, config)
    out, stem = _out_dir(args), args.prefix
    c_rows = zip(res.countries, res.xc_inf, res.eci_plus)
    p_rows = zip(res.products, res.product_totals, res.xp_inf, res.pci_plus)
    outputs = [
        _write(out / f"{stem}countries.csv", _table(("country", "xc_inf", "eci_plus"), c_rows)),
        _write(out / f"{stem}products.csv", _table(("product", "xp_raw_total", "xp_inf", "pci_plus"), p_rows)),
        _write(out / f"{stem}trace.json", _dump_json(res.trace.to_json_dict(args.keep_every))),
    ]
    return _finish(args, "eciplus", [args.matrix, args.config], outputs, config, stem)


def read_scores(path, column=None):
    """Return (labels, values, column name) from a score CSV.

    ``column`` defaults to the first column after the label.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or len(header) < 2:
            raise ParseError(f"{path}: expected a label column and at least one score column", line=1)
        column = column or header[1]
        if column not in header[1:]:
            raise ParseError(f"{path}: no column {column!r}; have {header[1:]}", line=1)
        k = header.index(column)
        labels, values = [], []
        for row in reader:
            if not row:
                continue
            try:
                values.append(float(row[k]))
            except (ValueError, IndexError):
                raise ParseError(
                    f"{path}: line {reader.line_num}: missing or non-numeric {column!r}", line=reader.line_num
                ) from None
            labels.append(row[0])
    return labels, np.array(values), column


def cmd_compare(args):
    la, va, col_a = read_scores(args.scores_a, args.col_a)
    lb, vb, col_b = read_scores(args.scores_b, args.col_b)
    if set(la) != set(lb) or len(la) != len(lb):
        only_a, only_b = sorted(set(la) - set(lb)), sorted(set(lb) - set(la))
        raise LabelMismatch(
            "score files have different label sets", only_in_a=only_a, only_in_b=only_b
        )
    order = {lab: i for i, lab in enumerate(lb)}
    vb = vb[[order[lab] for lab in la]]
    report = analysis.rank_correlations(va, vb, labels=la, allow_degenerate=True)
    body = report.to_json_dict()
    body.update({"column_a": col_a, "column_b": col_b})
    out = _out_dir(args)
    outputs = [_write(out / args.output, _dump_json(body))]
    if args.scatter:
        rows = analysis.scatter_table(va, vb, la)
        outputs.append(_write(out / args.scatter, analysis.scatter_to_csv(rows)))
    return _finish(args, "compare", [args.scores_a, args.scores_b], outputs, stem=args.prefix)


def cmd_equivalence(args):
    X = _load_matrix(args.matrix)
    report = analysis.equivalence_check(X, args.iterations, args.tol)
    outputs = [_write(_out_dir(args) / f"{args.prefix}report.json", _dump_json(report.to_json_dict()))]
    return _finish(args, "equivalence", [args.matrix], outputs, stem=args.prefix)


def cmd_figure1(args):
    X = _load_matrix(args.matrix)
    tables, errors = analysis.figure1_tables(X, args.iterations)
    out = _out_dir(args)
    outputs = [
        _write(out / f"{args.prefix}{name}.csv", analysis.scatter_to_csv(rows)) for name, rows in tables.items()
    ]
    if errors:
        outputs.append(_write(out / f"{args.prefix}figure1_errors.json", _dump_json(errors)))
    return _finish(args, "figure1", [args.matrix], outputs, stem=args.prefix)


def cmd_generate(args):
    if args.kind == "nested":
        m = corpus.nested_test_matrix(args.countries, args.products, args.flip, args.seed)
        m = trade.ExportMatrix(m.countries, m.products, m.values)
    else:
        rng = np.random.default_rng(args.seed)
        m = corpus.random_export_matrix(rng, args.countries, args.products, density=args.density)
    path = _write(_out_dir(args) / f"{args.name}.json", trade.dumps_matrix(m))
    return _finish(args, "generate", [], [path], stem=f"{args.name}.")


def cmd_replay(args):
    with open(args.manifest, encoding="utf-8") as fh:
        manifest = json.load(fh)
    for item in manifest["inputs"]:
        if sha256(item["path"]) != item["sha256"]:
            raise ReplayMismatch(f"input {item['path']} changed since the manifest was written", path=item["path"])
    ns = argparse.Namespace(**manifest["args"])
    ns.func = COMMANDS[manifest["command"]]
    ns.func(ns)
    changed = [o["path"] for o in manifest["outputs"] if sha256(o["path"]) != o["sha256"]]
    if changed:
        raise ReplayMismatch("replayed outputs differ", paths=changed)
    print(json.dumps({"replayed": manifest["command"], "identical": True}))


COMMANDS = {
    "ingest": cmd_ingest,
    "fitness": cmd_fitness,
    "eciplus": cmd_eciplus,
    "compare": cmd_compare,
    "equivalence": cmd_equivalence,
    "figure1": cmd_figure1,
    "generate": cmd_generate,
}


class _JsonArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(message)


def _algo_flags(p, default_norm):
    p.add_argument("--config", help="key = value file with AlgoConfig fields")
    p.add_argument("--init", choices=("ones", "degree"))
    stop = p.add_mutually_exclusive_group()
    stop.add_argument("--iterations", type=int, help="fixed number of iterations (default 200)")
    stop.add_argument("--rank-stable", action="store_true", help="stop when the country ranking settles")
    p.add_argument("--window", type=int)
    p.add_argument("--check-every", type=int)
    p.add_argument("--max-iterations", type=int)
    p.add_argument("--epsilon-floor", type=float)
    p.add_argument("--norm", choices=sorted(_NORM_ALIASES), help=f"mean used per step (default {default_norm})")
    p.add_argument("--keep-every", type=int, default=1, help="thin the exported trace")


def build_parser():
    parser = _JsonArgumentParser(prog="fitcomp", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"fitcomp {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_JsonArgumentParser)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--out-dir", help=f"output directory (default ${OUT_DIR_ENV} or .)")
        p.set_defaults(func=func)
        return p

    p = add("ingest", cmd_ingest, "CSV flows -> pruned matrix JSON")
    p.add_argument("csv")
    p.add_argument("--name", default="matrix")
    p.add_argument("--unit", default="USD")
    p.add_argument("--format", choices=("flows", "baci"), default="flows",
                   help="flows: country,product,value; baci: t,i,j,k,v,q summed over importers")
    p.add_argument("--year", type=int, help="BACI only: keep this year")
    p.add_argument("--country-codes", help="BACI only: country-codes CSV mapping codes to ISO3")
    p.add_argument("--min-country-export", type=float, default=0.0)
    p.add_argument("--min-product-export", type=float, default=0.0)

    p = add("fitness", cmd_fitness, "Fitness-Complexity scores")
    p.add_argument("matrix")
    kind = p.add_mutually_exclusive_group()
    kind.add_argument("--binarize", dest="mode", action="store_const", const="binarize",
                      help="run on the RCA-thresholded matrix (default)")
    kind.add_argument("--extensive", dest="mode", action="store_const", const="extensive",
                      help="run on the flow matrix itself")
    kind.add_argument("--binary", dest="mode", action="store_const", const="binary",
                      help="input is already 0/1; use it as is")
    p.set_defaults(mode="binarize")
    p.add_argument("--threshold", type=float, default=1.0)
    p.add_argument("--prefix", default="fitness_")
    _algo_flags(p, "arith")

    p = add("eciplus", cmd_eciplus, "ECI+ / PCI+ scores")
    p.add_argument("matrix")
    p.add_argument("--unit-scale", type=float, default=1.0, help="multiply every flow before running")
    p.add_argument("--prefix", default="eciplus_")
    _algo_flags(p, "geom")

    p = add("compare", cmd_compare, "rank report between two score files")
    p.add_argument("scores_a")
    p.add_argument("scores_b")
    p.add_argument("--col-a")
    p.add_argument("--col-b")
    p.add_argument("--scatter", help="also write label,x,y CSV under this name")
    p.add_argument("--output", default="compare.json")
    p.add_argument("--prefix", default="compare_")

    p = add("equivalence", cmd_equivalence, "check Fitness on X against ECI+ iterate by iterate")
    p.add_argument("matrix")
    p.add_argument("--iterations", type=int, default=20)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--prefix", default="equivalence_")

    p = add("figure1", cmd_figure1, "three ECI+ vs Fitness scatter tables")
    p.add_argument("matrix")
    p.add_argument("--iterations", type=int, default=200)
    p.add_argument("--prefix", default="figure1_")

    p = add("generate", cmd_generate, "write a seeded synthetic matrix")
    p.add_argument("--kind", choices=("nested", "random"), default="nested")
    p.add_argument("--seed", type=int, default=corpus.CANONICAL_SEED)
    p.add_argument("--countries", type=int, default=10)
    p.add_argument("--products", type=int, default=20)
    p.add_argument("--flip", type=float, default=0.15)
    p.add_argument("--density", type=float, default=1.0)
    p.add_argument("--name", default="canonical")

    p = sub.add_parser("replay", help="re-run a manifest and verify identical outputs")
    p.add_argument("manifest")
    p.set_defaults(func=cmd_replay)
    return parser


_PATH_ARGS = ("csv", "matrix", "scores_a", "scores_b", "config", "out_dir", "manifest", "country_codes")


def main(argv=None):
    try:
        parser = build_parser()
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
        for key in _PATH_ARGS:
            if getattr(args, key, None):
                setattr(args, key, os.path.abspath(getattr(args, key)))
        if getattr(args, "out_dir", "unset") is None:
            args.out_dir = os.path.abspath(os.environ.get(OUT_DIR_ENV) or ".")
        args.func(args)
    except FitcompError as exc:
        print(json.dumps(exc.to_dict()), file=sys.stderr)
        return 2
    except OSError as exc:
        print(json.dumps({"error": "IOError", "message": str(exc), "path": exc.filename}), file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
