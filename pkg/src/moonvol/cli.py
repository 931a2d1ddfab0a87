"""``moonvol`` command line.

Subcommands read and write plain files so each stage can be run on its own:
``ingest``, ``score``, ``vol``, ``features``, ``fit``, ``report``,
``simulate`` and ``pipeline`` (all stages in one go).

Exit codes: 0 success, 1 user/data error, 2 internal failure.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import datetime as dt
import hashlib
import io
import json
import shutil
import sys
import tempfile
from pathlib import Path

from . import __version__
from .exceptions import MoonvolError
from .market_data import (
    EXOGENOUS_NAMES,
    TradingCalendar,
    filter_for_sentiment,
    format_float,
    parse_calendar,
    parse_exogenous_csv,
    parse_ohlc_csv,
    parse_tweets_jsonl,
    write_exogenous_csv,
    write_ohlc_csv,
    write_tweets_jsonl,
)
from .regress import MODEL_NAMES, fit_suite, pearson_matrix
from .sentiment import RULE_SET, Lexicon, score_batch
from .signals import (
    AGGREGATORS,
    FeatureConfig,
    build_signal_table,
    normalize_unit_interval,
    read_signal_table,
    write_signal_table,
)
from .synth import ScenarioConfig, simulate_scenario, write_scenario
from .volatility import OUTPUT_COLUMNS, RS_FORMS, iter_daily_variance

CORRELATION_COLUMNS = ("v", "moon1", "moon2", "yolo1", "yolo2")


class StageError(Exception):
    def __init__(self, stage, exc):
        self.stage, self.exc = stage, exc
        super().__init__(f"{stage}: {exc}")


class _Stage:
    """Context manager tagging user-facing errors with the stage that raised them."""

    def __init__(self, name):
        self.name = name

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is not None and isinstance(exc, (MoonvolError, OSError)):
            raise StageError(self.name, exc) from exc
        return False


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _manifest(command, config, inputs) -> str:
    data = {
        "command": command,
        "config": config,
        "inputs": {str(p): _sha256(p) for p in inputs},
        "version": __version__,
        "timestamp": dt.datetime.now(dt.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ"),
    }
    return json.dumps(data, indent=2, sort_keys=True, default=str) + "\n"


class OutputDir:
    """Collect files in a scratch directory and move them into place only on success."""

    def __init__(self, target):
        self.target = Path(target)

    def __enter__(self):
        self.target.parent.mkdir(parents=True, exist_ok=True)
        self.tmp = Path(tempfile.mkdtemp(prefix=".moonvol-", dir=self.target.parent))
        return self

    def path(self, name) -> Path:
        return self.tmp / name

    def write_text(self, name, text):
        self.path(name).write_text(text, encoding="utf-8", newline="")

    def __exit__(self, exc_type, exc, tb):
        try:
            if exc is None:
                self.target.mkdir(parents=True, exist_ok=True)
                for item in sorted(self.tmp.iterdir()):
                    item.replace(self.target / item.name)
        finally:
            shutil.rmtree(self.tmp, ignore_errors=True)
        return False


def _open(path):
    try:
        return open(path, "rb")
    except FileNotFoundError:
        raise MoonvolError(f"file not found: {path}") from None


def _add_input_args(p, tweets=True, exog=True):
    p.add_argument("--inputs", type=Path, help="directory holding ohlc.csv, tweets.jsonl and exog_<name>.csv")
    p.add_argument("--ohlc", type=Path, help="OHLC CSV (date,open,high,low,close)")
    if tweets:
        p.add_argument("--tweets", type=Path, help="tweets JSONL")
    if exog:
        p.add_argument("--exog", action="append", default=[], metavar="NAME=PATH",
                       help=f"exogenous date,value CSV; NAME is one of {', '.join(EXOGENOUS_NAMES)}")
    p.add_argument("--calendar", type=Path, help="trading days, one YYYY-MM-DD per line")


def _add_feature_args(p):
    p.add_argument("--lexicon", type=Path, help="lexicon TSV (default: bundled demo lexicon)")
    p.add_argument("--rs-form", choices=RS_FORMS, default="standard")
    p.add_argument("--include-overnight", action="store_true")
    p.add_argument("--merge-forward", action="store_true",
                   help="attach non-trading days to the next trading day instead of the previous one")
    p.add_argument("--aggregator", choices=AGGREGATORS, default="std")
    p.add_argument("--thresholds", nargs=2, type=float, metavar=("NEG", "POS"), default=[-0.05, 0.05])
    p.add_argument("--log-base", choices=("e", "10"), default="e")


def _input_paths(args):
    paths = {}
    base = getattr(args, "inputs", None)
    if base is not None:
        paths["ohlc"] = base / "ohlc.csv"
        if hasattr(args, "tweets"):
            paths["tweets"] = base / "tweets.jsonl"
        if hasattr(args, "exog"):
            for name in EXOGENOUS_NAMES:
                candidate = base / f"exog_{name.lower()}.csv"
                if candidate.exists():
                    paths[name] = candidate
    if args.ohlc is not None:
        paths["ohlc"] = args.ohlc
    if getattr(args, "tweets", None) is not None:
        paths["tweets"] = args.tweets
    for spec in getattr(args, "exog", []):
        name, sep, path = spec.partition("=")
        if not sep or name.upper() not in EXOGENOUS_NAMES:
            raise MoonvolError(f"--exog expects NAME=PATH with NAME in {', '.join(EXOGENOUS_NAMES)}: {spec!r}")
        paths[name.upper()] = Path(path)
    if "ohlc" not in paths:
        raise MoonvolError("no OHLC input (use --ohlc or --inputs)")
    if hasattr(args, "tweets") and "tweets" not in paths:
        raise MoonvolError("no tweets input (use --tweets or --inputs)")
    if args.calendar is not None:
        paths["calendar"] = args.calendar
    return paths


def _load_inputs(paths):
    with _open(paths["ohlc"]) as fh:
        bars = parse_ohlc_csv(fh)
    if not bars:
        raise MoonvolError(f"no bars in {paths['ohlc']}")
    tweets = None
    if "tweets" in paths:
        with _open(paths["tweets"]) as fh:
            tweets = parse_tweets_jsonl(fh)
    exog = []
    for name in EXOGENOUS_NAMES:
        if name in paths:
            with _open(paths[name]) as fh:
                exog.append(parse_exogenous_csv(fh, name))
    if "calendar" in paths:
        with _open(paths["calendar"]) as fh:
            calendar = parse_calendar(fh)
        missing = [b.date for b in bars if b.date not in calendar]
        if missing:
            raise MoonvolError(f"OHLC date {missing[0]} is not in the trading calendar")
    else:
        calendar = TradingCalendar.from_bars(bars)
    return bars, tweets, exog, calendar


def _feature_config(args) -> FeatureConfig:
    return FeatureConfig(
        include_overnight=args.include_overnight,
        rs_form=args.rs_form,
        merge_forward=args.merge_forward,
        aggregator=args.aggregator,
        log_base=args.log_base,
        thresholds=tuple(args.thresholds),
    )


def _load_lexicon(args) -> Lexicon:
    return Lexicon.load(args.lexicon) if args.lexicon is not None else Lexicon.bundled()


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _fmt(x) -> str:
    return "" if x is None else format_float(x)


def r2_csv(results_by_symbol) -> str:
    rows = [[sym] + [_fmt(res[m].r_squared) for m in MODEL_NAMES] for sym, res in results_by_symbol.items()]
    return _csv_text(("symbol",) + MODEL_NAMES, rows)


def correlations_csv(matrices_by_symbol) -> str:
    """Upper triangle: one row per leading column, cells only right of the diagonal."""
    rows = []
    for sym, mat in matrices_by_symbol.items():
        for i, name in enumerate(CORRELATION_COLUMNS[:-1]):
            cells = [_fmt(mat[i][j]) if j > i else "" for j in range(1, len(CORRELATION_COLUMNS))]
            rows.append([sym, name] + cells)
    return _csv_text(("symbol", "row") + CORRELATION_COLUMNS[1:], rows)


def plotdata_csv(rows) -> str:
    m1 = normalize_unit_interval([r.moon1 for r in rows])
    m2 = normalize_unit_interval([r.moon2 for r in rows])
    out = [[r.date.isoformat(), _fmt(a), _fmt(b), _fmt(r.v)] for r, a, b in zip(rows, m1, m2)]
    return _csv_text(("date", "moon1_norm", "moon2_norm", "v"), out)


def coefficients_json(results_by_symbol) -> str:
    data = {
        sym: {
            name: {"coefficients": res.coefficients, "r_squared": res.r_squared, "n_obs": res.n_obs}
            for name, res in results.items()
        }
        for sym, results in results_by_symbol.items()
    }
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def _drops_text(drops) -> str:
    return "".join(d.format() + "\n" for d in drops)


# --- commands -------------------------------------------------------------


def cmd_ingest(args):
    with _Stage("ingest"):
        paths = _input_paths(args)
        bars, tweets, exog, calendar = _load_inputs(paths)
    with OutputDir(args.out) as out, _Stage("write"):
        with out.path("ohlc.csv").open("w", encoding="utf-8", newline="") as fh:
            write_ohlc_csv(bars, fh)
        with out.path("tweets.jsonl").open("w", encoding="utf-8", newline="") as fh:
            write_tweets_jsonl(tweets, fh)
        for series in exog:
            with out.path(f"exog_{series.name.lower()}.csv").open("w", encoding="utf-8", newline="") as fh:
                write_exogenous_csv(series, fh)
        out.write_text("calendar.txt", "".join(d.isoformat() + "\n" for d in calendar))
        out.write_text("manifest.json", _manifest("ingest", {}, paths.values()))
    print(f"bars={len(bars)} tweets={len(tweets)} text_only={len(filter_for_sentiment(tweets))} "
          f"exogenous={','.join(s.name for s in exog) or '-'} trading_days={len(calendar)}")
    return 0


def cmd_score(args):
    with _Stage("score"):
        lexicon = _load_lexicon(args)
        with _open(args.tweets) as fh:
            tweets = filter_for_sentiment(parse_tweets_jsonl(fh))
        scores = score_batch(tweets, lexicon, tuple(args.thresholds))
    text = _csv_text(("id", "compound", "ternary"), [[i, _fmt(s.compound), s.ternary] for i, s in scores])
    _emit(text, args.out)
    return 0


def cmd_vol(args):
    with _Stage("vol"):
        with _open(args.ohlc) as fh:
            bars = parse_ohlc_csv(fh)
        rows = []
        for bar, res in iter_daily_variance(bars, args.include_overnight, args.rs_form):
            if isinstance(res, MoonvolError):
                rows.append([bar.date.isoformat()] + [""] * len(OUTPUT_COLUMNS))
            else:
                vals = (res.parkinson, res.garman_klass, res.rogers_satchell, res.composite, res.log_vol)
                rows.append([bar.date.isoformat()] + [_fmt(x) for x in vals])
    _emit(_csv_text(("date",) + OUTPUT_COLUMNS, rows), args.out)
    return 0


def _emit(text, out):
    if out is None or str(out) == "-":
        sys.stdout.write(text)
        return
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    tmp = out.with_name(f".{out.name}.tmp")
    tmp.write_text(text, encoding="utf-8", newline="")
    tmp.replace(out)


def _features(args):
    with _Stage("ingest"):
        paths = _input_paths(args)
        bars, tweets, exog, calendar = _load_inputs(paths)
        lexicon = _load_lexicon(args)
        config = _feature_config(args)
    with _Stage("features"):
        rows, drops = build_signal_table(bars, tweets, lexicon, exog, calendar, config)
    inputs = list(paths.values()) + ([args.lexicon] if args.lexicon is not None else [])
    snapshot = config.as_dict() | {"sentiment_rules": list(RULE_SET)}
    return rows, drops, inputs, snapshot


def cmd_features(args):
    rows, drops, inputs, snapshot = _features(args)
    with OutputDir(args.out) as out:
        buf = io.StringIO()
        write_signal_table(rows, buf)
        out.write_text("features.csv", buf.getvalue())
        out.write_text("drops.log", _drops_text(drops))
        out.write_text("manifest.json", _manifest("features", snapshot, inputs))
    print(f"rows={len(rows)} dropped={len(drops)}")
    return 0


def _symbol_tables(specs):
    tables = {}
    for spec in specs:
        sym, sep, path = spec.partition("=")
        if not sep:
            path = spec
            sym = Path(spec).parent.name or Path(spec).stem
        with _open(path) as fh:
            tables[sym] = (Path(path), read_signal_table(fh))
    return tables


def cmd_fit(args):
    with _Stage("fit"):
        tables = _symbol_tables(args.features)
        results = {sym: fit_suite(rows) for sym, (_, rows) in tables.items()}
        corr = {sym: pearson_matrix(rows, CORRELATION_COLUMNS) for sym, (_, rows) in tables.items()}
    with OutputDir(args.out) as out:
        out.write_text("r2.csv", r2_csv(results))
        out.write_text("correlations.csv", correlations_csv(corr))
        if args.coefficients:
            out.write_text("coefficients.json", coefficients_json(results))
        out.write_text("manifest.json", _manifest("fit", {"models": list(MODEL_NAMES)},
                                                  [p for p, _ in tables.values()]))
    for sym, res in results.items():
        print(f"{sym}: " + " ".join(f"{m}={res[m].r_squared:.3f}" for m in MODEL_NAMES))
    return 0


def render_report(r2_text: str, corr_text: str | None = None, decimals: int = 3) -> str:
    """Aligned R^2 table per symbol with the best model(s) flagged by ``*``."""
    reader = csv.DictReader(io.StringIO(r2_text))
    models = [c for c in (reader.fieldnames or []) if c != "symbol"]
    records = list(reader)
    if not records or not models:
        raise MoonvolError("r2.csv has no model rows")
    width = max(8, decimals + 4)
    lines = ["R^2 by model (* = best at displayed precision)"]
    sym_w = max(6, *(len(r["symbol"]) for r in records))
    lines.append(" " * sym_w + "".join(m.rjust(width) for m in models))
    for rec in records:
        shown = {m: f"{float(rec[m]):.{decimals}f}" for m in models if rec[m] != ""}
        if not shown:
            raise MoonvolError(f"no R^2 values for {rec['symbol']}")
        top = max(float(v) for v in shown.values())
        best = [m for m, v in shown.items() if float(v) == top]
        cells = "".join((shown.get(m, "-") + ("*" if m in best else " ")).rjust(width) for m in models)
        note = f"best: {', '.join(best)}" + (" (tie)" if len(best) > 1 else "")
        lines.append(rec["symbol"].ljust(sym_w) + cells + "  " + note)
    if corr_text:
        corr = list(csv.DictReader(io.StringIO(corr_text)))
        cols = [c for c in CORRELATION_COLUMNS[1:]]
        for sym in dict.fromkeys(r["symbol"] for r in corr):
            lines += ["", f"Pearson correlations ({sym})", " " * 8 + "".join(c.rjust(width) for c in cols)]
            for r in (r for r in corr if r["symbol"] == sym):
                cells = "".join((f"{float(r[c]):.{decimals}f}" if r[c] else "").rjust(width) for c in cols)
                lines.append(r["row"].ljust(8) + cells)
    return "\n".join(lines) + "\n"


def cmd_report(args):
    with _Stage("report"):
        r2_text = Path(args.r2).read_text(encoding="utf-8")
        corr_text = Path(args.correlations).read_text(encoding="utf-8")
        text = render_report(r2_text, corr_text)
    sys.stdout.write(text)
    return 0


def cmd_simulate(args):
    with _Stage("simulate"):
        if args.config is not None:
            config = ScenarioConfig.from_json(Path(args.config).read_text(encoding="utf-8"))
        else:
            config = ScenarioConfig.gme() if args.preset == "gme" else ScenarioConfig()
        overrides = {k: v for k, v in (("seed", args.seed), ("n_days", args.n_days)) if v is not None}
        if overrides:
            config = dataclasses.replace(config, **overrides)
        scenario = simulate_scenario(config)
    with OutputDir(args.out) as out:
        write_scenario(scenario, out.tmp, config)
        out.write_text("manifest.json", _manifest("simulate", json.loads(config.to_json()),
                                                  [args.config] if args.config else []))
    print(f"days={len(scenario.bars)} tweets={len(scenario.tweets)}")
    return 0


def cmd_pipeline(args):
    rows, drops, inputs, snapshot = _features(args)
    with _Stage("fit"):
        results = fit_suite(rows)
        corr = pearson_matrix(rows, CORRELATION_COLUMNS)
    with _Stage("plot"):
        plot = plotdata_csv(rows)
    sym = args.symbol
    with OutputDir(args.out) as out:
        buf = io.StringIO()
        write_signal_table(rows, buf)
        out.write_text("features.csv", buf.getvalue())
        out.write_text("drops.log", _drops_text(drops))
        out.write_text("r2.csv", r2_csv({sym: results}))
        out.write_text("correlations.csv", correlations_csv({sym: corr}))
        out.write_text(f"plotdata_{sym}.csv", plot)
        if args.coefficients:
            out.write_text("coefficients.json", coefficients_json({sym: results}))
        out.write_text("manifest.json", _manifest("pipeline", snapshot | {"symbol": sym}, inputs))
    print(render_report(r2_csv({sym: results})), end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="moonvol", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate inputs and write normalized copies")
    _add_input_args(p)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("score", help="score text-only tweets: id,compound,ternary")
    p.add_argument("--tweets", type=Path, required=True)
    p.add_argument("--lexicon", type=Path)
    p.add_argument("--thresholds", nargs=2, type=float, metavar=("NEG", "POS"), default=[-0.05, 0.05])
    p.add_argument("--out", help="output CSV (default stdout)")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("vol", help="per-day range estimators and log volatility")
    p.add_argument("--ohlc", type=Path, required=True)
    p.add_argument("--rs-form", choices=RS_FORMS, default="standard")
    p.add_argument("--include-overnight", action="store_true")
    p.add_argument("--out", help="output CSV (default stdout)")
    p.set_defaults(func=cmd_vol)

    p = sub.add_parser("features", help="build the daily signal table")
    _add_input_args(p)
    _add_feature_args(p)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("fit", help="fit M1-M8 and correlations on one or more signal tables")
    p.add_argument("--features", action="append", required=True, metavar="[SYMBOL=]PATH")
    p.add_argument("--coefficients", action="store_true", help="also write coefficients.json")
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("report", help="print the R^2 and correlation tables")
    p.add_argument("--r2", type=Path, required=True)
    p.add_argument("--correlations", type=Path, required=True)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("simulate", help="write a synthetic scenario in the input formats")
    p.add_argument("--config", type=Path, help="scenario JSON (fields of ScenarioConfig)")
    p.add_argument("--preset", choices=("default", "gme"), default="default")
    p.add_argument("--seed", type=int)
    p.add_argument("--n-days", type=int)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("pipeline", help="features, fit, correlations and plot data in one run")
    _add_input_args(p)
    _add_feature_args(p)
    p.add_argument("--symbol", default="GME")
    p.add_argument("--coefficients", action="store_true")
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_pipeline)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except StageError as err:
        print(f"moonvol {args.command}: {err.stage}: {err.exc}", file=sys.stderr)
        return 1
    except MoonvolError as err:
        print(f"moonvol {args.command}: {err}", file=sys.stderr)
        return 1
    except Exception as err:  # noqa: BLE001
        print(f"moonvol {args.command}: internal error: {type(err).__name__}: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
