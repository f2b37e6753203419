"""
Command line of RECODE.

    recode spectrum   singular spectra of site Hankel matrices
    recode fit        fit a window model and save it as JSON
    recode forecast   forecast the nights after a saved model's training window
    recode experiment sliding-window experiment (and method comparison)
    recode synth      write a synthetic site file

Exit codes: 0 success, 1 no scoreable window, 2 usage or data error.
"""
import argparse
import logging
import os
import sys
from dataclasses import replace

import numpy as np
import pandas as pd

from . import __version__
from .errors import _raise, ConfigError, EmptyExperiment, InsufficientData, RecodeError, WindowSkipped
from .conf import (DEFAULTS, SITE_DEFAULTS, PRESETS, SYNTH_KEYS, build_config, load_configfile, resolve_path)
from .dmdc import save_model, load_model, DmdcModel
from .embedding import site_spectrum, write_spectrum, takens_check
from .fluxnet import parse_site_file, extract_nights, seasonal_filter, harmonize_nights, write_site_file
from .outputs import write_report, write_table, FORECAST_SCHEMA, COMPARE_SCHEMA, GENERATOR
from .pipeline import (ExperimentConfig, prepare_nights, fit_window, forecast_window, run_experiment,
                       resolve_mode_count, check_contiguity, compare_methods, method_label,
                       day_control_matrix, daytime_extrapolate)
from .synthetic import SyntheticSpec, generate_synthetic_site

logger = logging.getLogger(__name__)


def _str_list(text):
    return [] if text.strip().lower() == "none" else [t.strip() for t in text.split(",") if t.strip()]


def _int_list(text):
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers but got {text!r}") from None


def _positive_int(text):
    try:
        value = int(text)
    except ValueError:
        value = 0
    if value < 1: raise argparse.ArgumentTypeError(f"expected an integer >= 1 but got {text!r}")
    return value


def _mode_count(text):
    if text.lower() in ("auto", "none"): return text.lower()
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'auto', 'none' or an integer but got {text!r}") from None


def _column(text):
    field, sep, col = text.partition("=")
    if not sep or not field or not col: raise argparse.ArgumentTypeError(f"expected FIELD=COLUMN but got {text!r}")
    return field.strip(), col.strip()


def _d(key):
    v = DEFAULTS[key] if key in DEFAULTS else SITE_DEFAULTS[key]
    if v is None: return "none"
    if isinstance(v, (list, tuple)): return ",".join(str(x) for x in v) or "none"
    return str(v).lower() if isinstance(v, bool) else v


def _add_site_options(p):
    g = p.add_argument_group("site file")
    g.add_argument("--hemisphere", choices=["north", "south"], default=None, help=f"site hemisphere (default: {_d('hemisphere')})")
    g.add_argument("--site-id", dest="site_id", default=None, help="site name (default: from the file name)")
    g.add_argument("--sep", default=None, help=f"column delimiter (default: '{_d('sep')}')")
    g.add_argument("--column", type=_column, action="append", default=None, metavar="FIELD=COLUMN",
                   help="bind a logical field to a file column, repeatable, e.g. tair=TA_F_MDS (default: Fluxnet2015 names)")


def _add_night_options(g):
    g.add_argument("--qc-threshold", dest="qc_threshold", type=int, default=None,
                   help=f"records with NEE qc below this count as good (default: {_d('qc_threshold')})")
    g.add_argument("--min-quality-fraction", dest="min_quality_fraction", type=float, default=None,
                   help=f"fraction of good records a night needs (default: {_d('min_quality_fraction')})")
    g.add_argument("--night-length", dest="night_length", type=int, default=None,
                   help="records per night after trimming (default: shortest accepted night)")
    g.add_argument("--season-months", dest="season_months", type=_int_list, default=None,
                   help="months kept, e.g. 5,6,7 (default: May-Sep north, Jan-Apr south)")


def _add_experiment_options(p):
    g = p.add_argument_group("experiment")
    g.add_argument("--config", default=None, help="key = value configuration file (default: none)")
    g.add_argument("--preset", choices=sorted(PRESETS), default=None,
                   help="protocol preset: table1 M=5 h=1, table2 M=14 h=14 (default: none)")
    g.add_argument("--method", choices=["DMD", "DMDc", "DMDc-TDE"], default=None, help=f"model (default: {_d('method')})")
    g.add_argument("--control", dest="control_drivers", type=_str_list, default=None,
                   help=f"comma-separated control drivers, or none (default: {_d('control_drivers')})")
    g.add_argument("--embed-dim", dest="embed_dim", type=int, default=None,
                   help=f"time-delay embedding dimension N (default: {_d('embed_dim')})")
    g.add_argument("--train-nights", dest="train_nights", type=int, default=None,
                   help=f"training nights M (default: {_d('train_nights')})")
    g.add_argument("--forecast-nights", dest="forecast_nights", type=int, default=None,
                   help=f"forecast horizon h in nights (default: {_d('forecast_nights')})")
    g.add_argument("--window-step", dest="window_step", type=int, default=None,
                   help=f"nights between window starts (default: {_d('window_step')})")
    g.add_argument("--rank-p", dest="rank_p", type=int, default=None, help="input-space truncation p, DMD rank (default: none)")
    g.add_argument("--rank-r", dest="rank_r", type=int, default=None, help="output-space truncation r (default: none)")
    g.add_argument("--mode-count", dest="mode_count", type=_mode_count, default=None,
                   help=f"soft truncation: auto, none or an integer (default: {_d('mode_count')})")
    g.add_argument("--energy-threshold", dest="energy_threshold", type=float, default=None,
                   help=f"spectrum energy fraction for auto mode count (default: {_d('energy_threshold')})")
    g.add_argument("--spectrum-embed-dim", dest="spectrum_embed_dim", type=int, default=None,
                   help=f"embedding dimension of the auto mode-count spectrum (default: {_d('spectrum_embed_dim')})")
    _add_night_options(g)
    g.add_argument("--gap-tolerance", dest="gap_tolerance", type=int, default=None,
                   help=f"rejected nights allowed inside a window (default: {_d('gap_tolerance')})")
    g.add_argument("--control-lag", dest="control_lag", type=int, choices=[0, 1], default=None,
                   help=f"0: night k+1 controls drive x(k)->x(k+1), 1: night k controls (default: {_d('control_lag')})")
    g.add_argument("--no-normalize", dest="normalize_controls", action="store_const", const=False, default=None,
                   help="use raw control drivers (default: min-max normalized)")
    g.add_argument("--n-cpus", dest="n_cpus", type=int, default=None, help=f"worker processes (default: {_d('n_cpus')})")
    g.add_argument("--n-latent", dest="n_latent", type=_positive_int, default=1,
                   help="latent state dimension assumed by the embedding-dimension advisory N >= 2*n_latent+1 (default: 1)")


def build_parser():
    parser = argparse.ArgumentParser(prog="recode", description="Forecast ecosystem respiration from nighttime NEE with DMD/DMDc.")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more output, -vv for debug logging (default: quiet)")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True

    p = sub.add_parser("spectrum", help="singular spectra of night Hankel matrices")
    p.add_argument("site_files", nargs="+", help="site files")
    p.add_argument("--field", action="append", default=None, help="nee or a driver name, repeatable (default: nee)")
    p.add_argument("--embed-dim", dest="embed_dim", type=int, default=6, help="embedding dimension (default: 6)")
    p.add_argument("--energy-threshold", dest="energy_threshold", type=float, default=0.99,
                   help="energy fraction of the dominant modes (default: 0.99)")
    g = p.add_argument_group("nights")
    _add_night_options(g)
    _add_site_options(p)
    p.add_argument("--out-folder", dest="out_folder", default="output", help="output folder (default: output)")

    p = sub.add_parser("fit", help="fit one window and save the model")
    p.add_argument("site_file", help="site file")
    p.add_argument("--start", default=None, help="date of the first training night, YYYY-MM-DD (default: first usable night)")
    p.add_argument("--model", default=os.path.join("output", "model.json"), help="model file to write (default: output/model.json)")
    _add_experiment_options(p)
    _add_site_options(p)

    p = sub.add_parser("forecast", help="forecast the nights after a model's training window")
    p.add_argument("model", help="model file written by fit")
    p.add_argument("site_file", help="site file")
    p.add_argument("--horizon", type=int, default=None, help="nights to forecast (default: the model's forecast_nights)")
    p.add_argument("--daytime", action="store_true", help="also write uncalibrated daytime estimates (default: off)")
    _add_site_options(p)
    p.add_argument("--out-folder", dest="out_folder", default="output", help="output folder (default: output)")

    p = sub.add_parser("experiment", help="sliding-window experiment")
    p.add_argument("site_files", nargs="+", help="site files")
    p.add_argument("--compare", nargs="+", default=None, metavar="SPEC",
                   help="extra methods to compare, e.g. DMD DMDc:tair DMDc-TDE:swc:4 (default: none)")
    p.add_argument("--progress", action="store_true", help="show a progress bar (default: off)")
    _add_experiment_options(p)
    _add_site_options(p)
    p.add_argument("--out-folder", dest="out_folder", default="output", help="output folder (default: output)")

    p = sub.add_parser("synth", help="write a synthetic site file")
    p.add_argument("--config", default=None, help="key = value file of synthetic settings (default: none)")
    p.add_argument("--kind", choices=["lloyd_taylor", "lti"], default=None, help="generator (default: lloyd_taylor)")
    p.add_argument("--site-id", dest="site_id", default=None, help="site name (default: SY-Syn)")
    p.add_argument("--start", default=None, help="first day (default: 2019-05-01)")
    p.add_argument("--n-days", dest="n_days", type=int, default=None, help="number of days (default: 150)")
    p.add_argument("--latitude", type=float, default=None, help="latitude in degrees (default: 50.0)")
    p.add_argument("--hemisphere", choices=["north", "south"], default=None, help="hemisphere (default: north)")
    p.add_argument("--noise-fraction", dest="noise_fraction", type=float, default=None,
                   help="Lloyd-Taylor noise as fraction of the RMS night respiration (default: 0.05)")
    p.add_argument("--seed", type=int, default=0, help="random seed (default: 0)")
    p.add_argument("--out", default=None, help="output file (default: output/FLX_<site>_SYN.csv)")
    return parser


def _site_kwargs(args, site=None, columns=None):
    site    = dict(SITE_DEFAULTS, **(site or {}))
    columns = dict(columns or {})
    for key in SITE_DEFAULTS:
        if getattr(args, key, None) is not None: site[key] = getattr(args, key)
    columns.update(dict(args.column or []))
    return {"hemisphere": site["hemisphere"], "site_id": site["site_id"], "sep": site["sep"], "column_map": columns or None}


def _load_site(path, kwargs, verbose):
    return parse_site_file(resolve_path(path), verbose=verbose, **kwargs)


def _experiment_settings(args):
    file_values = load_configfile(resolve_path(args.config)) if args.config else None
    cli_values  = {k: getattr(args, k) for k in DEFAULTS if getattr(args, k, None) is not None}
    settings    = build_config(args.preset, file_values, cli_values)
    return settings, _site_kwargs(args, settings.site, settings.columns)


def cmd_spectrum(args):
    paths = [resolve_path(f) for f in args.site_files]
    for f in paths:
        if not os.path.exists(f): raise FileNotFoundError(f"site file {f} does not exist")
    fields  = args.field or ["nee"]
    drivers = [f for f in fields if f != "nee"]
    qc_threshold = DEFAULTS["qc_threshold"] if args.qc_threshold is None else args.qc_threshold
    min_fraction = DEFAULTS["min_quality_fraction"] if args.min_quality_fraction is None else args.min_quality_fraction
    kwargs  = _site_kwargs(args)
    for f in paths:
        site   = _load_site(f, kwargs, args.verbose > 0)
        nights = extract_nights(site, qc_threshold=qc_threshold, min_quality_fraction=min_fraction,
                                harmonize=False, drivers=drivers)
        nights = harmonize_nights(seasonal_filter(nights, site.hemisphere, args.season_months), args.night_length)
        if not nights: raise EmptyExperiment(f"{site.site_id}: no usable night", filter_name="season")
        for field in fields:
            spec = site_spectrum(nights, field, args.embed_dim, args.energy_threshold)
            out  = os.path.join(args.out_folder, f"{site.site_id}_{field}_spectrum.txt")
            write_spectrum(spec, out, {"generator": GENERATOR, "site": site.site_id, "field": field,
                                       "embed_dim": min(args.embed_dim, len(nights)), "nights": len(nights)})
            print(f"{site.site_id} {field}: dominant_count {spec.dominant_count}  ({out})")
    return 0


def cmd_fit(args):
    settings, kwargs = _experiment_settings(args)
    config = settings.experiment
    site   = _load_site(args.site_file, kwargs, args.verbose > 0)
    nights = prepare_nights(config, site, verbose=args.verbose > 0).nights
    first  = 0
    if args.start:
        start = pd.Timestamp(args.start).date()
        first = next((i for i, n in enumerate(nights) if n.date >= start), len(nights))
    train = nights[first:first + config.train_nights]
    if len(train) < config.train_nights:
        _raise(InsufficientData, f"{len(train)} usable nights from {args.start or nights[0].date} but M = {config.train_nights} needed")
    gap = check_contiguity(train, config.gap_tolerance)
    if gap: raise WindowSkipped(gap)
    if config.embed_dim > 1: takens_check(config.embed_dim, args.n_latent)

    model = fit_window(config, train, resolve_mode_count(config, nights))
    model.metadata["site"] = site.site_id
    save_model(model, args.model)
    print(f"{method_label(config)} fitted on {site.site_id} nights {train[0].date}..{train[-1].date}, saved to {args.model}")
    return 0


def _forecast_frame(dates, values, column):
    h, n = values.shape
    return pd.DataFrame({"night": np.repeat(np.arange(1, h+1), n), "date": np.repeat([d.isoformat() for d in dates], n),
                         "slot": np.tile(np.arange(n), h), column: values.ravel()})


def cmd_forecast(args):
    model  = load_model(resolve_path(args.model))
    meta   = model.metadata
    if "config" not in meta: _raise(ConfigError, f"{args.model} was not written by 'recode fit'")
    config = ExperimentConfig.from_dict(dict(meta["config"], night_length=meta["night_length"]))
    site   = _load_site(args.site_file, _site_kwargs(args), args.verbose > 0)
    nights = prepare_nights(config, site, verbose=args.verbose > 0).nights
    h      = config.forecast_nights if args.horizon is None else args.horizon
    if h < 1: _raise(ConfigError, f"--horizon must be >= 1 but {h} given")

    end    = pd.Timestamp(meta["train_end"]).date()
    idx    = next((i for i, n in enumerate(nights) if n.date == end), None)
    if idx is None: _raise(InsufficientData, f"training end night {end} is not among the usable nights of {site.site_id}")
    history, future = nights[:idx+1], nights[idx+1:idx+1+h]
    if len(future) < h: _raise(InsufficientData, f"only {len(future)} usable nights after {end} but horizon {h} requested")
    gap = check_contiguity(history[-config.embed_dim:] + future, config.gap_tolerance)
    if gap: raise WindowSkipped(gap)

    forecast = forecast_window(model, history, future)
    header   = {"schema": FORECAST_SCHEMA, "generator": GENERATOR, "site": site.site_id, "method": method_label(config),
                "train_end": end.isoformat(), "h": h}
    out = write_table(os.path.join(args.out_folder, "forecast.tsv"), _forecast_frame([n.date for n in future], forecast, "nee_forecast"), header, float_format="%.12e")
    print(f"forecast of {h} night(s) after {end} written to {out}")

    if args.daytime:
        if not isinstance(model, DmdcModel) or config.embed_dim != 1:
            _raise(ConfigError, "--daytime needs a DMDc model without time-delay embedding")
        n      = meta["night_length"]
        states = np.column_stack([night.nee for night in (history[-1:] + future)[:h]])
        dates  = [night.date for night in future]
        day    = daytime_extrapolate(model, day_control_matrix(site, dates, config.control_drivers, n), states)
        out    = write_table(os.path.join(args.out_folder, "daytime.tsv"), _forecast_frame(dates, day.estimates.T, "reco_day_estimate"),
                             dict(header, flag=day.flag), float_format="%.12e")
        print(f"daytime estimates ({day.flag}) written to {out}")
    return 0


def _compare_config(base, spec):
    parts  = spec.split(":")
    method = parts[0]
    if method not in ("DMD", "DMDc", "DMDc-TDE") or len(parts) > 3:
        _raise(ConfigError, f"bad method spec {spec!r}; expected METHOD[:DRIVERS[:N]], e.g. DMDc-TDE:tair:4")
    drivers = [] if len(parts) < 2 or parts[1].lower() in ("", "none") else parts[1].split("+")
    try:
        n_emb = int(parts[2]) if len(parts) == 3 else 1
    except ValueError:
        raise ConfigError(f"bad embedding dimension in method spec {spec!r}") from None
    return replace(base, method=method, control_drivers=tuple(drivers), embed_dim=n_emb)


def cmd_experiment(args):
    settings, kwargs = _experiment_settings(args)
    config  = settings.experiment
    extra   = [_compare_config(config, s) for s in (args.compare or [])]
    paths   = [resolve_path(f) for f in args.site_files]
    for f in paths:
        if not os.path.exists(f): raise FileNotFoundError(f"site file {f} does not exist")
    if config.embed_dim > 1: takens_check(config.embed_dim, args.n_latent)
    sites   = [_load_site(f, kwargs, args.verbose > 0) for f in paths]
    status  = 0
    for site in sites:
        out = args.out_folder if len(sites) == 1 else os.path.join(args.out_folder, site.site_id)
        try:
            report = run_experiment(config, site, progress=args.progress, verbose=args.verbose > 0)
        except EmptyExperiment as err:
            print(f"recode: {site.site_id}: no scoreable window, removed by filter '{err.filter_name}': {err}", file=sys.stderr)
            status = 1
            continue
        files = write_report(report, out)
        skipped = [w for w in report.windows if not w.scored]
        print(f"{method_label(config)} on {site.site_id}: mean RMSE {report.mean_rmse:.4f}, pooled {report.pooled_rmse:.4f}, "
              f"{report.n_scored} windows, {report.n_skipped} skipped -> {files.summary}")
        for w in skipped: print(f"  skipped window {w.index} ({w.window_start_date}): {w.skipped_reason}")

    if extra:
        table  = compare_methods([config] + extra, sites, progress=args.progress)
        df     = table.reset_index().rename(columns={"index": "method"})
        header = {"schema": COMPARE_SCHEMA, "generator": GENERATOR, "M": config.train_nights, "h": config.forecast_nights}
        out    = write_table(os.path.join(args.out_folder, "comparison.tsv"), df, header)
        print(table.to_string(float_format=lambda v: f"{v:.4f}"))
        print(f"comparison written to {out}")
    return status


def cmd_synth(args):
    values = load_configfile(resolve_path(args.config), allowed=SYNTH_KEYS) if args.config else {}
    values.pop("columns", None)
    for key in ("kind", "site_id", "start", "n_days", "latitude", "hemisphere", "noise_fraction"):
        if getattr(args, key) is not None: values[key] = getattr(args, key)
    spec = SyntheticSpec.from_dict(values)
    site = generate_synthetic_site(spec, seed=args.seed, verbose=args.verbose > 0)
    out  = args.out or os.path.join("output", f"FLX_{spec.site_id}_SYN.csv")
    write_site_file(site, out)
    print(f"synthetic {spec.kind} site written to {out}")
    return 0


COMMANDS = {"spectrum": cmd_spectrum, "fit": cmd_fit, "forecast": cmd_forecast, "experiment": cmd_experiment, "synth": cmd_synth}


def main(argv=None):
    """entry point of the `recode` command; returns the exit code"""
    args = build_parser().parse_args(argv)
    if args.verbose: logging.basicConfig(level=logging.DEBUG if args.verbose > 1 else logging.INFO,
                                         format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except EmptyExperiment as err:
        print(f"recode: no scoreable window, removed by filter '{err.filter_name}': {err}", file=sys.stderr)
        return 1
    except (RecodeError, OSError) as err:
        print(f"recode: error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
