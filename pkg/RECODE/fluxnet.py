"""
Ingestion of half-hourly Fluxnet2015-format site files.

A site file is read into a `SiteSeries` (one row per half hour on a regular
30-minute grid), the runs of NIGHT=1 records are cut into `NightRecord`
vectors, nights failing the quality rule are rejected, the rest are gap-filled,
trimmed to a common length and optionally restricted to the growing season.
Control drivers are min-max normalized with parameters fitted on a training
window.
"""
import io
import logging
import os
from dataclasses import dataclass, field, replace
from datetime import date as _date

import numpy as np
import pandas as pd

from .errors import _raise, ConfigError, InsufficientData, InvalidInput, ParseError, SchemaError
from .outputs import atomic_write

logger = logging.getLogger(__name__)

MISSING       = -9999
STEP          = pd.Timedelta(minutes=30)
TS_FORMAT     = "%Y%m%d%H%M"
HEMISPHERES   = ("north", "south")
SEASON_MONTHS = {"north": (5, 6, 7, 8, 9), "south": (1, 2, 3, 4)}

#logical field -> Fluxnet2015 FULLSET column
DEFAULT_COLUMNS = {"timestamp" : "TIMESTAMP_START",
                   "nee"       : "NEE_VUT_REF",
                   "nee_qc"    : "NEE_VUT_REF_QC",
                   "night"     : "NIGHT",
                   "tair"      : "TA_F",
                   "swc"       : "SWC_F_MDS_1",
                   "reco_nt"   : "RECO_NT_VUT_REF",
                   "reco_dt"   : "RECO_DT_VUT_REF"}

BASELINES       = ("reco_nt", "reco_dt")
BASELINE_LABELS = {"reco_nt": "NT", "reco_dt": "DT"}
OPTIONAL_FIELDS = BASELINES + ("reco_true",)
RESERVED        = ("timestamp", "nee", "nee_qc", "night") + OPTIONAL_FIELDS


@dataclass(frozen=True, eq=False)
class SiteSeries:
    """
        Half-hourly records of one site.

        Parameters:
        -----------
        site_id : str;
            site name, e.g. "DE-Hai".
        hemisphere : str;
            "north" or "south".
        records : pandas.DataFrame;
            indexed by TIMESTAMP_START on a regular 30-minute grid with columns
            nee, nee_qc (float, NaN = missing), night (bool), one column per
            driver and the optional baseline columns reco_nt / reco_dt.
        column_map : dict;
            logical field -> file column, used when writing the series back.
    """
    site_id    : str
    hemisphere : str
    records    : pd.DataFrame
    column_map : dict = field(default_factory=lambda: dict(DEFAULT_COLUMNS))

    @property
    def drivers(self):
        return [c for c in self.records.columns if c not in RESERVED]

    @property
    def baselines(self):
        return [c for c in BASELINES if c in self.records.columns]

    def __len__(self):
        return len(self.records)


@dataclass(frozen=True, eq=False)
class NightRecord:
    """
        One accepted night.

        `nee` and every vector in `drivers` are finite (gaps interpolated),
        `observed` marks the NEE records that were measured with qc below the
        threshold, `baselines` keep their missing values as NaN.
    """
    date             : _date
    nee              : np.ndarray
    drivers          : dict
    baselines        : dict
    observed         : np.ndarray
    quality_fraction : float
    timestamps       : pd.DatetimeIndex

    @property
    def length(self):
        return len(self.nee)

    def trimmed(self, start, length):
        sl = slice(start, start+length)
        return replace(self, nee=self.nee[sl], observed=self.observed[sl], timestamps=self.timestamps[sl],
                       drivers={k: v[sl] for k, v in self.drivers.items()},
                       baselines={k: v[sl] for k, v in self.baselines.items()})


@dataclass(frozen=True)
class NormalizationParams:
    driver : str
    min    : float
    max    : float

    def to_dict(self):
        return {"driver": self.driver, "min": self.min, "max": self.max}

    @classmethod
    def from_dict(cls, d):
        return cls(driver=d["driver"], min=float(d["min"]), max=float(d["max"]))


def _column_map(column_map):
    cmap = dict(DEFAULT_COLUMNS)
    cmap.update(column_map or {})
    return {k: v for k, v in cmap.items() if v is not None}


def _numeric(raw, column, lines):
    s    = raw.str.strip()
    vals = pd.to_numeric(s, errors="coerce")
    bad  = (vals.isna() & (s != "")).to_numpy()
    if bad.any():
        logger.warning(f"column {column}: {bad.sum()} non-numeric value(s) treated as missing on line(s) "
                       f"{', '.join(str(i) for i in lines[bad][:10])}{' ...' if bad.sum() > 10 else ''}")
    vals = vals.to_numpy(dtype=float)
    vals[vals == MISSING] = np.nan
    return vals


def _site_name(path_or_buffer):
    if not isinstance(path_or_buffer, (str, os.PathLike)): return "unknown"
    stem = os.path.splitext(os.path.basename(path_or_buffer))[0]
    parts = stem.split("_")
    return parts[1] if parts[0] == "FLX" and len(parts) > 1 else stem


def parse_site_file(path_or_buffer, column_map=None, site_id=None, hemisphere="north", sep=",", verbose=False):
    """
        Read a delimiter-separated half-hourly site file.

        Parameters:
        -----------
        path_or_buffer : str, path, file-like;
            file with a header row; timestamps as YYYYMMDDHHMM; -9999 marks missing values.
        column_map : dict, None;
            logical field -> column name, updating DEFAULT_COLUMNS. Map a field to
            None to ignore it; extra keys add drivers (e.g. {"ts": "TS_F_MDS_1"}).
        site_id : str, None;
            site name. Default is taken from a FLX_<site>_... file name, else the file stem.
        hemisphere : str;
            "north" or "south". Default is "north".
        sep : str;
            column delimiter. Default is ",".
        verbose : bool;
            print a one-line summary.

        Returns:
        --------
        SiteSeries

        Raises:
        -------
        SchemaError if a mapped column is missing (baseline columns are optional),
        ParseError(line) on an unparsable, repeated or off-grid timestamp.
    """
    hemisphere = hemisphere if hemisphere in HEMISPHERES else _raise(ConfigError, f"hemisphere must be one of {HEMISPHERES} but {hemisphere!r} given")
    cmap = _column_map(column_map)
    try:
        raw = pd.read_csv(path_or_buffer, sep=sep, dtype=str, keep_default_na=False)
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as err:
        raise ParseError(f"parse_site_file(): {err}") from err
    raw.columns = [c.strip() for c in raw.columns]

    missing = [f"{k} -> {v}" for k, v in cmap.items() if v not in raw.columns and k not in OPTIONAL_FIELDS]
    if missing: _raise(SchemaError, f"parse_site_file(): mapped column(s) not found in file: {', '.join(missing)}")
    if len(raw) == 0: _raise(InsufficientData, "parse_site_file(): file has no data rows")

    lines  = np.arange(len(raw)) + 2        #header is line 1
    ts_raw = raw[cmap["timestamp"]].str.strip()
    ts     = pd.to_datetime(ts_raw, format=TS_FORMAT, errors="coerce")
    bad    = ts.isna().to_numpy()
    if bad.any():
        i = int(np.argmax(bad))
        raise ParseError(f"unparsable timestamp {ts_raw.iloc[i]!r} in column {cmap['timestamp']}", line=int(lines[i]))
    steps = ts.diff().iloc[1:]
    if (steps <= pd.Timedelta(0)).any():
        i = int(np.argmax((steps <= pd.Timedelta(0)).to_numpy())) + 1
        raise ParseError(f"timestamp {ts_raw.iloc[i]} is not after the previous record", line=int(lines[i]))
    off_grid = ((ts - ts.iloc[0]) % STEP != pd.Timedelta(0)).to_numpy()
    if off_grid.any():
        i = int(np.argmax(off_grid))
        raise ParseError(f"timestamp {ts_raw.iloc[i]} is not on the 30-minute grid", line=int(lines[i]))

    records = pd.DataFrame(index=pd.DatetimeIndex(ts, name="timestamp"))
    for key, col in cmap.items():
        if key == "timestamp": continue
        if col not in raw.columns:
            logger.info(f"optional column {col} ({key}) not in file")
            continue
        records[key] = _numeric(raw[col], col, lines)

    qc_bad = records["nee_qc"].notna() & ~records["nee_qc"].isin([0, 1, 2, 3])
    if qc_bad.any():
        logger.warning(f"{int(qc_bad.sum())} quality flag(s) outside {{0,1,2,3}} treated as missing")
        records.loc[qc_bad, "nee_qc"] = np.nan

    grid = pd.date_range(records.index[0], records.index[-1], freq=STEP, name="timestamp")
    if len(grid) > len(records):
        logger.warning(f"{len(grid)-len(records)} missing half-hour record(s) inserted as gaps")
        records = records.reindex(grid)
    #inserted records take the night flag of their neighbours when both agree
    night  = records["night"]
    fw, bw = night.ffill(), night.bfill()
    night  = night.where(night.notna(), pd.Series(np.where(fw == bw, fw, 0.0), index=night.index))
    records["night"] = night.fillna(0.0).to_numpy() > 0.5

    for key in OPTIONAL_FIELDS:
        if key in records and records[key].isna().all():
            logger.warning(f"column {cmap[key]} ({key}) holds no valid value and is dropped")
            records = records.drop(columns=key)

    site_id = site_id or _site_name(path_or_buffer)
    if verbose: print(f"{site_id}: {len(records)} records from {records.index[0]} to {records.index[-1]}, "
                      f"drivers {[c for c in records.columns if c not in RESERVED]}")
    return SiteSeries(site_id=site_id, hemisphere=hemisphere, records=records, column_map=cmap)


def write_site_file(series, filename, sep=","):
    """
        Write a SiteSeries in the format parse_site_file reads.

        Missing values become -9999 and floats are printed with 10 significant
        digits. A TIMESTAMP_END column is added after TIMESTAMP_START.
    """
    cmap = series.column_map
    rec  = series.records
    out  = pd.DataFrame({cmap.get("timestamp", "TIMESTAMP_START"): rec.index.strftime(TS_FORMAT),
                         "TIMESTAMP_END": (rec.index + STEP).strftime(TS_FORMAT)})
    for key in rec.columns:
        col = cmap.get(key, key.upper())
        if key == "night": out[col] = rec[key].astype(int).to_numpy()
        elif key == "nee_qc": out[col] = pd.array(rec[key].round().to_numpy(), dtype="Int64")
        else: out[col] = rec[key].to_numpy()
    buf = io.StringIO()
    out.to_csv(buf, sep=sep, index=False, na_rep=str(MISSING), float_format="%.10g", lineterminator="\n")
    atomic_write(filename, buf.getvalue())
    return filename


def find_night_runs(series):
    """
        Row ranges (start, stop) of the runs of night records.

        Runs touching the first or last record are cut by the file boundary and are left out.
    """
    night  = series.records["night"].to_numpy(dtype=bool)
    edges  = np.diff(np.concatenate([[0], night.astype(int), [0]]))
    starts = np.flatnonzero(edges == 1)
    stops  = np.flatnonzero(edges == -1)
    return [(int(a), int(b)) for a, b in zip(starts, stops) if a > 0 and b < len(night)]


def _interpolate(values):
    ok = np.isfinite(values)
    if ok.all(): return values.copy()
    if not ok.any(): return None
    idx = np.arange(len(values))
    return np.interp(idx, idx[ok], values[ok])


def extract_nights(series, qc_threshold=2, min_quality_fraction=0.8, night_length=None, harmonize=True,
                   drivers=None, verbose=False):
    """
        Cut a site series into quality-checked night vectors.

        A night is a run of night records, dated by the calendar day it starts.
        It is accepted when the fraction of its records with measured NEE and
        qc < qc_threshold is at least min_quality_fraction. Missing NEE and
        driver values of accepted nights are linearly interpolated within the
        night; a night whose driver is missing throughout is rejected.

        Parameters:
        -----------
        series : SiteSeries;
            parsed site.
        qc_threshold : int;
            records with qc < qc_threshold count as good. Default is 2.
        min_quality_fraction : float;
            acceptance threshold in (0, 1]. Default is 0.8.
        night_length : int, None;
            records per night after harmonization. Default is the shortest accepted night.
        harmonize : bool;
            trim accepted nights to night_length (see harmonize_nights). Default is True.
        drivers : list, None;
            drivers to extract; default all drivers of the series.
        verbose : bool;
            print a summary of accepted and rejected nights.

        Returns:
        --------
        list of NightRecord, in time order.
    """
    if not 0 < min_quality_fraction <= 1:
        _raise(ConfigError, f"extract_nights(): min_quality_fraction must be in (0, 1] but {min_quality_fraction} given")
    drivers = series.drivers if drivers is None else list(drivers)
    absent  = [d for d in drivers if d not in series.drivers]
    if absent: _raise(SchemaError, f"extract_nights(): driver(s) {absent} not in site {series.site_id} (available: {series.drivers})")

    rec    = series.records
    nee    = rec["nee"].to_numpy(dtype=float)
    qc     = np.nan_to_num(rec["nee_qc"].to_numpy(dtype=float), nan=np.inf)
    runs   = find_night_runs(series)
    nights = []
    n_quality, n_driver = 0, 0

    for start, stop in runs:
        good = np.isfinite(nee[start:stop]) & (qc[start:stop] < qc_threshold)
        frac = float(good.mean())
        if frac < min_quality_fraction:
            n_quality += 1
            continue
        drv = {d: _interpolate(rec[d].to_numpy(dtype=float)[start:stop]) for d in drivers}
        if any(v is None for v in drv.values()):
            n_driver += 1
            logger.warning(f"night of {rec.index[start].date()} rejected: driver(s) "
                           f"{[d for d, v in drv.items() if v is None]} missing throughout")
            continue
        nights.append(NightRecord(date=rec.index[start].date(), nee=_interpolate(nee[start:stop]), drivers=drv,
                                  baselines={b: rec[b].to_numpy(dtype=float)[start:stop].copy() for b in series.baselines},
                                  observed=good, quality_fraction=frac, timestamps=rec.index[start:stop]))

    logger.info(f"{series.site_id}: {len(runs)} candidate nights, {len(nights)} accepted, "
                f"{n_quality} rejected by quality, {n_driver} by missing drivers")
    if verbose: print(f"extract_nights(): {len(runs)} candidate nights, {len(nights)} accepted "
                      f"({n_quality} below quality fraction {min_quality_fraction}, {n_driver} with missing drivers)")
    return harmonize_nights(nights, night_length) if harmonize else nights


def harmonize_nights(nights, night_length=None):
    """
        Trim nights to a common length.

        Nights longer than night_length are centre-trimmed (start offset
        (L - night_length)//2), shorter ones are dropped.

        Parameters:
        -----------
        nights : list of NightRecord;
            nights to harmonize.
        night_length : int, None;
            target length. Default is the shortest night.
    """
    if len(nights) == 0: return []
    lengths = [n.length for n in nights]
    if night_length is None: night_length = min(lengths)
    if isinstance(night_length, bool) or not isinstance(night_length, (int, np.integer)) or night_length < 1:
        _raise(ConfigError, f"harmonize_nights(): night_length must be an integer >= 1 but {night_length!r} given")
    if night_length > max(lengths):
        _raise(ConfigError, f"harmonize_nights(): night_length {night_length} is longer than every night (longest has {max(lengths)} records)")

    out = [n.trimmed((n.length - night_length)//2, night_length) for n in nights if n.length >= night_length]
    if len(out) < len(nights):
        logger.warning(f"{len(nights)-len(out)} night(s) shorter than {night_length} records dropped")
    return out


def seasonal_filter(nights, hemisphere, months=None):
    """
        Keep nights whose start date falls in the growing season: May-September
        in the north, January-April in the south, or the given months.
    """
    if hemisphere not in HEMISPHERES: _raise(ConfigError, f"seasonal_filter(): hemisphere must be one of {HEMISPHERES} but {hemisphere!r} given")
    months = SEASON_MONTHS[hemisphere] if months is None else tuple(months)
    return [n for n in nights if n.date.month in months]


def fit_normalization(nights, driver):
    """min and max of a driver over a set of nights"""
    if len(nights) == 0: _raise(InsufficientData, f"fit_normalization(): no nights to fit {driver!r} on")
    absent = [n.date for n in nights if driver not in n.drivers]
    if absent: _raise(InvalidInput, f"fit_normalization(): driver {driver!r} missing in {len(absent)} night(s), first {absent[0]}")
    values = np.concatenate([n.drivers[driver] for n in nights])
    if values.size == 0: _raise(InsufficientData, f"fit_normalization(): no values of {driver!r}")
    return NormalizationParams(driver=driver, min=float(np.min(values)), max=float(np.max(values)))


def apply_normalization(params, values):
    """
        Map values to (v - min)/(max - min). Values outside the fitted range are
        not clipped; a degenerate range (min == max) maps everything to 0.
    """
    values = np.asarray(values, dtype=float)
    span   = params.max - params.min
    return np.zeros_like(values) if span == 0 else (values - params.min)/span


def invert_normalization(params, values):
    return np.asarray(values, dtype=float)*(params.max - params.min) + params.min
