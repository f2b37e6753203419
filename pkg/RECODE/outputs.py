"""
Plain-text result files.

Every file starts with a block of `# key: value` header lines carrying a schema
version, followed by a tab-separated table. Files are written atomically
(temporary file in the target directory, then renamed) and contain nothing that
depends on when or where they were produced, so identical inputs give identical
bytes.
"""
import io
import logging
import os
import tempfile
from types import SimpleNamespace

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

REPORT_SCHEMA   = "recode-report/1"
FORECAST_SCHEMA = "recode-forecast/1"
SPECTRUM_SCHEMA = "recode-spectrum/1"
COMPARE_SCHEMA  = "recode-comparison/1"

with open(os.path.join(os.path.dirname(os.path.abspath(__file__)), "VERSION.dat")) as version_file:
    GENERATOR = f"RECODE {version_file.read().strip()}"

SUMMARY_COLUMNS = ["method", "control", "N", "M", "h", "site", "mean_rmse", "pooled_rmse", "windows", "skipped"]
WINDOW_COLUMNS  = ["window", "start", "train_end", "validation_start", "n_points", "rmse", "rmse_nt", "rmse_dt", "skipped_reason"]


def atomic_write(filename, text):
    """write `text` to `filename` through a temporary file and os.replace"""
    folder = os.path.dirname(os.path.abspath(filename))
    os.makedirs(folder, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=folder, prefix=".tmp_", suffix=os.path.basename(filename))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        os.replace(tmp, filename)
    except BaseException:
        if os.path.exists(tmp): os.remove(tmp)
        raise


def _fmt(v):
    if v is None: return "auto"
    if isinstance(v, bool): return str(v).lower()
    if isinstance(v, (list, tuple)): return ",".join(str(x) for x in v) if len(v) else "none"
    return str(v)


def format_header(items):
    """render a dict as `# key: value` lines"""
    return "".join(f"# {k}: {_fmt(v)}\n" for k, v in items.items())


def parse_header(text):
    header = {}
    for line in text.splitlines():
        if not line.startswith("#"): break
        key, _, value = line[1:].partition(":")
        header[key.strip()] = value.strip()
    return header


def write_table(filename, df, header=None, float_format="%.8f"):
    """
        Write a DataFrame as a tab-separated table below a `# key: value` header.

        Parameters:
        -----------
        filename : str;
            output path.
        df : pandas.DataFrame;
            table to write, written without index.
        header : dict, None;
            header items, written in insertion order.
        float_format : str;
            printf format of float cells. Missing cells are left empty.
    """
    buf = io.StringIO()
    df.to_csv(buf, sep="\t", index=False, float_format=float_format, na_rep="", lineterminator="\n")
    atomic_write(filename, (format_header(header) if header else "") + buf.getvalue())
    return filename


def report_header(config, site_id, hemisphere):
    """configuration echo written at the top of every experiment report file"""
    return {"schema"              : REPORT_SCHEMA,
            "generator"           : GENERATOR,
            "site"                : site_id,
            "hemisphere"          : hemisphere,
            "method"              : config.method,
            "control"             : list(config.control_drivers),
            "N"                   : config.embed_dim,
            "M"                   : config.train_nights,
            "h"                   : config.forecast_nights,
            "window_step"         : config.window_step,
            "rank_p"              : config.rank_p,
            "rank_r"              : config.rank_r,
            "mode_count"          : "none" if config.mode_count is None else config.mode_count,
            "energy_threshold"    : config.energy_threshold,
            "qc_threshold"        : config.qc_threshold,
            "min_quality_fraction": config.min_quality_fraction,
            "night_length"        : config.night_length,
            "season_months"       : "default" if config.season_months is None else list(config.season_months),
            "gap_tolerance"       : config.gap_tolerance,
            "control_lag"         : config.control_lag,
            "normalize_controls"  : config.normalize_controls}


def summary_table(report):
    cfg      = report.config
    control  = "+".join(cfg.control_drivers) if cfg.control_drivers else "none"
    rows     = [[cfg.method, control, cfg.embed_dim, cfg.train_nights, cfg.forecast_nights, report.site_id,
                 report.mean_rmse, report.pooled_rmse, report.n_scored, report.n_skipped]]
    for name, base in report.baselines.items():
        rows.append([name, "-", cfg.embed_dim, cfg.train_nights, cfg.forecast_nights, report.site_id,
                     base.mean_rmse, base.pooled_rmse, report.n_scored, report.n_skipped])
    return pd.DataFrame(rows, columns=SUMMARY_COLUMNS)


def windows_table(report):
    rows = []
    for w in report.windows:
        rows.append([w.index, w.window_start_date.isoformat(), w.train_end.isoformat(), w.validation_start.isoformat(),
                     w.n_validation_points, w.rmse, w.baseline_rmse.get("NT", np.nan), w.baseline_rmse.get("DT", np.nan),
                     w.skipped_reason or ""])
    df = pd.DataFrame(rows, columns=WINDOW_COLUMNS)
    df["window"]   = df["window"].astype("Int64")
    df["n_points"] = df["n_points"].astype("Int64")
    return df


def write_report(report, out_folder="output", verbose=False):
    """
        Write `summary.tsv` and `windows.tsv` of an ExperimentReport into out_folder.

        Returns:
        --------
        SimpleNamespace with the paths of both files.
    """
    header  = report_header(report.config, report.site_id, report.hemisphere)
    summary = write_table(os.path.join(out_folder, "summary.tsv"), summary_table(report), header)
    windows = write_table(os.path.join(out_folder, "windows.tsv"), windows_table(report), header)
    if verbose: print(f"report written to {summary} and {windows}")
    return SimpleNamespace(summary=summary, windows=windows)


def load_report(folder="output"):
    """
        Load the report files of an experiment.

        Returns:
        --------
        SimpleNamespace(header=dict, summary=DataFrame, windows=DataFrame)

        Example:
        --------
        >>> rep = load_report("output")
        >>> rep.summary.set_index("method").loc["DMDc", "mean_rmse"]
    """
    summary_file = os.path.join(folder, "summary.tsv")
    windows_file = os.path.join(folder, "windows.tsv")
    for f in (summary_file, windows_file):
        if not os.path.exists(f): raise FileNotFoundError(f"load_report(): file {f} does not exist")
    with open(summary_file, encoding="utf-8") as f:
        header = parse_header(f.read())
    summary = pd.read_csv(summary_file, sep="\t", comment="#")
    windows = pd.read_csv(windows_file, sep="\t", comment="#", keep_default_na=False,
                          na_values={c: [""] for c in ["n_points", "rmse", "rmse_nt", "rmse_dt"]})
    return SimpleNamespace(header=header, summary=summary, windows=windows)
