"""``energyscen`` command line.

    energyscen ingest   {ev|pv|load|weather} --in FILE
    energyscen analyze  {ev-dists|pv-quartiles|pv-forecast|load-meta|peaks|weather}
    energyscen generate {ev|pv}
    energyscen export   {fanchart|quartiles|table1}

The run config (``--config`` or $ENERGYSCEN_CONFIG) is the source of
truth; flags override single fields.  Every output file starts with a
metadata header carrying tool version, seed and config hash, and contains
no wall-clock data, so identical inputs give byte-identical outputs.
Errors go to stderr as one ``error module=... kind=... msg="..."`` line.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from dataclasses import asdict, replace
from pathlib import Path

from . import ev_scenario, ingest, load_analytics, pv_scenario
from .config import CONFIG_ENV, RunConfig
from .empdist import histogram_table_json

log = logging.getLogger("energyscen")

LOAD_STORE = "load_pool.bin"


class MissingInput(Exception):
    pass


# -- output helpers -------------------------------------------------------------


def _header_lines(meta: dict) -> tuple:
    return (" ".join(f"{k}={v}" for k, v in meta.items()),)


def _write(cfg: RunConfig, name: str, text: str) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    with open(path, "w", newline="\n", encoding="utf-8") as f:
        f.write(text)
    print(path)
    return path


def _csv_text(rows, meta: dict) -> str:
    buf = io.StringIO()
    for line in _header_lines(meta):
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    for row in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def _json_text(doc: dict, meta: dict) -> str:
    return json.dumps({"_meta": meta, **doc}, indent=2, default=_jsonable) + "\n"


def _jsonable(o):
    if hasattr(o, "tolist"):
        return o.tolist()
    raise TypeError(f"not serialisable: {type(o)}")


def _emit_table(cfg: RunConfig, stem: str, rows: list, meta: dict) -> Path:
    if cfg.format == "json":
        header, *body = rows
        doc = {"rows": [dict(zip(header, r)) for r in body]}
        return _write(cfg, f"{stem}.json", _json_text(doc, meta))
    return _write(cfg, f"{stem}.csv", _csv_text(rows, meta))


# -- input resolution -----------------------------------------------------------


def _input(cfg: RunConfig, args, kind: str, canonical: str):
    """Explicit --in, then an ingested canonical file, then the configured raw path."""
    if getattr(args, "input", None):
        return Path(args.input), cfg.schemas[kind]
    canon = Path(cfg.output_dir) / canonical
    if canon.is_file():
        schema = {"ev": ingest.CANONICAL_EV_SCHEMA, "pv": ingest.CANONICAL_PV_SCHEMA,
                  "weather": ingest.WEATHER_SCHEMA}[kind]
        return canon, replace(schema, year=cfg.schemas[kind].year)
    raw = cfg.paths.get(kind)
    if raw and Path(raw).is_file():
        return Path(raw), cfg.schemas[kind]
    raise MissingInput(f"missing input: no {kind} dataset (use --in, run ingest, or set paths.{kind})")


def _ev_sessions(cfg, args):
    path, schema = _input(cfg, args, "ev", "ev_sessions.csv")
    return ingest.load_ev_dataset(path, schema).records


def _pv_records(cfg, args):
    path, schema = _input(cfg, args, "pv", "pv_records.csv")
    return ingest.load_pv_dataset(path, schema).records


def _load_pool(cfg, args):
    if getattr(args, "input", None):
        path = Path(args.input)
    else:
        path = Path(cfg.output_dir) / LOAD_STORE
    if not path.is_file():
        raise MissingInput(f"missing input: no ingested load store at {path} (run 'ingest load')")
    return ingest.read_compact(path)


def _ev_model(cfg, args):
    return ev_scenario.fit_session_model(_ev_sessions(cfg, args), cfg.bins)


def _ev_options(cfg):
    return ev_scenario.GenerationOptions(peak_sampling=cfg.peak_sampling, max_attempts=cfg.max_attempts)


# -- commands -------------------------------------------------------------------


def cmd_ingest(cfg: RunConfig, args):
    kind = args.what
    if not args.input and not cfg.paths.get(kind):
        raise MissingInput(f"missing input: ingest {kind} needs --in")
    path = Path(args.input or cfg.paths[kind])
    schema = cfg.schemas[kind]
    meta = cfg.meta(command=f"ingest-{kind}", source=path.name)
    if kind == "load":
        res = ingest.load_fluvius(path, schema)
        if not res.profiles:
            raise ValueError("no valid consumer profiles")
        out = Path(cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        ingest.compact_store(res.profiles, out / LOAD_STORE, schema.decimals, meta=meta)
        print(out / LOAD_STORE)
        rows = [["consumer_id", "reason"]] + [list(r) for r in res.rejected]
        _write(cfg, "load_rejected.csv", _csv_text(rows, meta))
        return
    loader = {"ev": ingest.load_ev_dataset, "pv": ingest.load_pv_dataset,
              "weather": ingest.load_weather}[kind]
    res = loader(path, schema)
    name = {"ev": "ev_sessions.csv", "pv": "pv_records.csv", "weather": "weather.csv"}[kind]
    _write(cfg, name, ingest.records_to_csv(res.records, _header_lines(meta)))
    _write(cfg, f"{kind}_rejected.csv", ingest.rejections_to_csv(res.rejected, _header_lines(meta)))


def cmd_analyze(cfg: RunConfig, args):
    what = args.what
    meta = cfg.meta(command=f"analyze-{what}")
    if what == "ev-dists":
        m = _ev_model(cfg, args)
        doc = {
            "summary": m.summary(),
            "bins": cfg.bins.to_dict(),
            "arrival": json.loads(histogram_table_json(m.pdf_arrival)),
            "peak_power": json.loads(histogram_table_json(m.pdf_peak_power)),
            "departure_given_arrival": m.cond_departure.counts,
            "energy_given_peak_power": m.cond_energy.counts,
            "charge_time_given_conn_power_energy": [
                {"cell": list(k), "counts": h.counts} for k, h in sorted(m.joint_charge_time.cells.items())],
        }
        _write(cfg, "ev_dists.json", _json_text(doc, meta))
    elif what == "pv-quartiles":
        _pv_quartiles(cfg, args, meta)
    elif what == "pv-forecast":
        rep = pv_scenario.forecast_errors(_pv_records(cfg, args), daylight_only=args.daylight_only)
        _write(cfg, "pv_forecast.json", rep.to_json(meta) + "\n")
    elif what == "load-meta":
        pool = _load_pool(cfg, args)
        md = sorted((load_analytics.consumer_metadata(p) for p in pool), key=lambda m: m.consumer_id)
        _emit_table(cfg, "load_meta", load_analytics.metadata_rows(md), meta)
        _emit_table(cfg, "table1", load_analytics.table_rows(load_analytics.summary_table(md)), meta)
    elif what == "peaks":
        pool = _load_pool(cfg, args)
        kind = "peak" if args.kind == "peak" else "reverse_peak"
        hist = load_analytics.peak_day_distribution(pool, kind)
        week = load_analytics.worst_week(hist, args.window)
        meta.update(kind=kind, window=args.window, worst_start=week.start_day,
                    worst_end=week.end_day, worst_fraction=repr(week.fraction))
        rows = [["day_of_year", "count"]] + [[d + 1, int(c)] for d, c in enumerate(hist.counts)]
        _emit_table(cfg, f"peaks_{kind}", rows, meta)
        _write(cfg, f"worst_week_{kind}.json", _json_text(asdict(week), meta))
    elif what == "weather":
        start, end = _parse_week(args.week)
        path, schema = _input(cfg, args, "weather", "weather.csv")
        recs = ingest.load_weather(path, schema).records
        week = load_analytics.RepresentativeWeek(start, end, 0, 0.0)
        sl = load_analytics.align_weather(recs, week)
        _write(cfg, f"weather_{start}_{end}.csv", ingest.records_to_csv(sl.records, _header_lines(meta)))
        rows = [["day_of_year", "n_records", "mean_temp", "total_rainfall", "daylight_ghi_sum"]]
        rows += [[d.day_of_year, d.n_records, d.mean_temp, d.total_rainfall, d.daylight_ghi_sum]
                 for d in sl.daily]
        _emit_table(cfg, f"weather_{start}_{end}_daily", rows, meta)


def _parse_week(text: str) -> tuple[int, int]:
    try:
        a, b = (int(x) for x in text.split(":"))
    except ValueError:
        raise ValueError(f"--week expects START:END day numbers, got {text!r}") from None
    if not 1 <= a <= b:
        raise ValueError(f"invalid week {text!r}")
    return a, b


def _pv_quartiles(cfg, args, meta):
    series = pv_scenario.normalize_generation(_pv_records(cfg, args), cfg.schemas["pv"].year)
    scope = getattr(args, "scope", "month")
    levels = cfg.quantile_levels
    if scope == "annual":
        q = pv_scenario.monthly_quartiles(series, "annual", levels)
        _emit_table(cfg, "pv_quartiles_annual", q.rows(), meta)
        return
    months = [args.month] if getattr(args, "month", None) else range(1, 13)
    rows = None
    for m in months:
        if len(series.month_pool(m)) == 0:
            continue
        q = pv_scenario.monthly_quartiles(series, m, levels)
        head, *body = q.rows()
        rows = rows or [["month"] + head]
        rows += [[m] + r for r in body]
    if rows is None:
        raise ValueError("no complete PV days in the requested months")
    _emit_table(cfg, "pv_quartiles_month", rows, meta)


def cmd_generate(cfg: RunConfig, args):
    meta = cfg.meta(command=f"generate-{args.what}", n=args.n)
    if args.what == "ev":
        model = _ev_model(cfg, args)
        meta["peak_sampling"] = cfg.peak_sampling
        batch = ev_scenario.generate_batch(model, args.n, cfg.seed, _ev_options(cfg), cfg.threads)
        meta.update(batch.stats)
        if cfg.format == "json":
            _write(cfg, "ev_scenarios.json", ev_scenario.sessions_to_json(batch.sessions, meta) + "\n")
        else:
            _write(cfg, "ev_scenarios.csv", ev_scenario.sessions_to_csv(batch.sessions, _header_lines(meta)))
    else:
        series = pv_scenario.normalize_generation(_pv_records(cfg, args), cfg.schemas["pv"].year)
        dist = pv_scenario.KwpDistribution.parse(args.kwp_dist)
        meta.update(month=args.month, kwp_dist=args.kwp_dist)
        scen = pv_scenario.generate_pv_batch(series, args.month, dist, args.n, cfg.seed)
        _emit_table(cfg, f"pv_scenarios_m{args.month}", pv_scenario.scenario_rows(scen), meta)


def cmd_export(cfg: RunConfig, args):
    meta = cfg.meta(command=f"export-{args.what}")
    if args.what == "fanchart":
        model = _ev_model(cfg, args)
        batch = ev_scenario.generate_batch(model, args.n, cfg.seed, _ev_options(cfg), cfg.threads)
        profiles = [ev_scenario.synthesize_power_profile(s, cfg.resolution_minutes) for s in batch.sessions]
        fan = ev_scenario.fanchart(profiles, cfg.fanchart_levels, fold=True)
        meta.update(n=args.n, resolution=cfg.resolution_minutes)
        _emit_table(cfg, "ev_fanchart", fan.rows(), meta)
    elif args.what == "quartiles":
        args.scope = "annual"
        _pv_quartiles(cfg, args, meta)
        args.scope = "month"
        _pv_quartiles(cfg, args, meta)
    elif args.what == "table1":
        md = [load_analytics.consumer_metadata(p) for p in _load_pool(cfg, args)]
        _emit_table(cfg, "table1", load_analytics.table_rows(load_analytics.summary_table(md)), meta)


# -- parser ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help=f"run config JSON (default: ${CONFIG_ENV})")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", dest="output_dir", help="output directory")
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("--threads", type=int)
    common.add_argument("--in", dest="input", help="input file (overrides config paths)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="energyscen", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    ing = sub.add_parser("ingest", parents=[common], help="validate a source file")
    ing.add_argument("what", choices=("ev", "pv", "load", "weather"))
    ing.set_defaults(func=cmd_ingest)

    an = sub.add_parser("analyze", parents=[common], help="fit distributions / compute statistics")
    an.add_argument("what", choices=("ev-dists", "pv-quartiles", "pv-forecast", "load-meta",
                                     "peaks", "weather"))
    an.add_argument("--scope", choices=("month", "annual"), default="month")
    an.add_argument("--month", type=int, choices=range(1, 13), metavar="M")
    an.add_argument("--daylight-only", action="store_true")
    an.add_argument("--kind", choices=("peak", "reverse"), default="peak")
    an.add_argument("--window", type=int, default=7)
    an.add_argument("--week", default=None, help="START:END day-of-year window")
    an.set_defaults(func=cmd_analyze)

    gen = sub.add_parser("generate", parents=[common], help="generate scenarios")
    gen.add_argument("what", choices=("ev", "pv"))
    gen.add_argument("--n", type=int, default=100)
    gen.add_argument("--peak-sampling", choices=("marginal", "uniform"))
    gen.add_argument("--month", type=int, choices=range(1, 13), metavar="M", default=6)
    gen.add_argument("--kwp-dist", default="tri:2,5,10",
                     help="point:K | tri:MIN,MODE,MAX | discrete:K=W,...")
    gen.set_defaults(func=cmd_generate)

    ex = sub.add_parser("export", parents=[common], help="export tables")
    ex.add_argument("what", choices=("fanchart", "quartiles", "table1"))
    ex.add_argument("--n", type=int, default=1000, help="scenarios behind the fanchart")
    ex.add_argument("--month", type=int, choices=range(1, 13), metavar="M")
    ex.set_defaults(func=cmd_export)
    return p


def _resolve_config(args) -> RunConfig:
    path = args.config or os.environ.get(CONFIG_ENV)
    if path:
        if not Path(path).is_file():
            raise MissingInput(f"missing input: config file {path}")
        cfg = RunConfig.load(path)
    else:
        cfg = RunConfig()
    for name in ("seed", "output_dir", "format", "threads"):
        v = getattr(args, name, None)
        if v is not None:
            setattr(cfg, name, v)
    if getattr(args, "peak_sampling", None):
        cfg.peak_sampling = args.peak_sampling
    return cfg


_MODULES = {cmd_ingest: "ingest", cmd_analyze: "analyze", cmd_generate: "generate", cmd_export: "export"}


def _module_of(exc: BaseException, default: str) -> str:
    tb = exc.__traceback__
    mod = default
    while tb is not None:
        name = tb.tb_frame.f_globals.get("__name__", "")
        if name.startswith("energyscen.") and name != "energyscen.cli":
            mod = name.split(".", 1)[1]
        tb = tb.tb_next
    return mod


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "analyze" and args.what == "weather" and not args.week:
        parser.error("analyze weather requires --week START:END")
    try:
        cfg = _resolve_config(args)
        args.func(cfg, args)
    except MissingInput as e:
        _report("cli", "MissingInput", str(e))
        return 1
    except Exception as e:
        _report(_module_of(e, _MODULES.get(args.func, "cli")), type(e).__name__, str(e))
        if args.verbose:
            raise
        return 1
    return 0


def _report(module: str, kind: str, msg: str) -> None:
    msg = " ".join(msg.split()).replace('"', "'")
    print(f'error module={module} kind={kind} msg="{msg}"', file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
