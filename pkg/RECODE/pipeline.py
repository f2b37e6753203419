"""
Sliding-window forecast experiments.

A window trains DMD or DMDc(-TDE) on M consecutive accepted nights and
forecasts the following h nights from the last training night(s), using the
validation-period control drivers normalized with the training-window
parameters. Forecasts are scored by RMSE against the observed NEE of the
validation nights; the NT/DT partitioning products of the site file are scored
on exactly the same half hours.
"""
import logging
from dataclasses import dataclass, field, asdict, fields, replace
from datetime import date as _date
from multiprocessing import Pool
from types import SimpleNamespace

import numpy as np
import pandas as pd
from tqdm import tqdm

from .errors import (_raise, ConfigError, EmptyExperiment, InsufficientData, InvalidInput, InvalidRank,
                     InvalidShape, NumericalFailure, WindowSkipped)
from .numkernel import svd, effective_rank
from .dmd import fit_dmd, reconstruct_dmd, DmdModel
from .dmdc import fit_dmdc, forecast_dmdc, step_dmdc, DmdcModel
from .embedding import build_hankel, embed_snapshots, night_series, site_spectrum
from .fluxnet import (extract_nights, find_night_runs, harmonize_nights, seasonal_filter, fit_normalization,
                      apply_normalization, NormalizationParams, BASELINE_LABELS, RESERVED)
from .synthetic import generate_synthetic_site

logger = logging.getLogger(__name__)

METHODS      = ("DMD", "DMDc", "DMDc-TDE")
UNCALIBRATED = "uncalibrated — no ground truth"


@dataclass(frozen=True)
class ExperimentConfig:
    """
        Settings of a sliding-window experiment.

        Parameters:
        -----------
        method : str;
            "DMD", "DMDc" or "DMDc-TDE". DMDc with embed_dim > 1 is DMDc-TDE.
        control_drivers : tuple of str;
            drivers stacked into the control vector (empty for DMD).
        embed_dim : int;
            time-delay embedding dimension N (1 = no embedding).
        train_nights, forecast_nights : int;
            window sizes M (>= N+1) and h (>= 1).
        window_step : int;
            nights between consecutive window starts.
        rank_p, rank_r : int, None;
            explicit truncations (DMD rank is rank_p). Invalid values skip the window.
        mode_count : "auto", int, None;
            soft truncation clipped to the effective rank of each window; "auto"
            uses the dominant count of the site's NEE Hankel spectrum.
        energy_threshold, spectrum_embed_dim :
            settings of the "auto" spectrum.
        qc_threshold, min_quality_fraction, night_length, season_months :
            night extraction settings (season_months None = hemisphere default).
        gap_tolerance : int;
            rejected nights allowed between two consecutive nights of a window.
        control_lag : int;
            0: x(k) -> x(k+1) is driven by the controls of night k+1;
            1: driven by the controls of night k.
        normalize_controls : bool;
            min-max normalize the drivers with training-window parameters.
        n_cpus : int;
            worker processes for the windows.
    """
    method               : str   = "DMDc"
    control_drivers      : tuple = ("tair",)
    embed_dim            : int   = 1
    train_nights         : int   = 5
    forecast_nights      : int   = 1
    window_step          : int   = 1
    rank_p               : int   = None
    rank_r               : int   = None
    mode_count           : object = "auto"
    energy_threshold     : float = 0.99
    spectrum_embed_dim   : int   = 6
    qc_threshold         : int   = 2
    min_quality_fraction : float = 0.8
    night_length         : int   = None
    season_months        : tuple = None
    gap_tolerance        : int   = 0
    control_lag          : int   = 0
    normalize_controls   : bool  = True
    n_cpus               : int   = 1

    def __post_init__(self):
        drivers = (self.control_drivers,) if isinstance(self.control_drivers, str) else tuple(self.control_drivers or ())
        object.__setattr__(self, "control_drivers", drivers)
        if self.season_months is not None:
            object.__setattr__(self, "season_months", tuple(int(m) for m in self.season_months))
        if self.method == "DMDc" and _is_int(self.embed_dim) and self.embed_dim > 1:
            object.__setattr__(self, "method", "DMDc-TDE")
        self._validate()

    def _validate(self):
        c = self
        if c.method not in METHODS: _raise(ConfigError, f"method must be one of {METHODS} but {c.method!r} given")
        for name in ("embed_dim", "train_nights", "forecast_nights", "window_step", "spectrum_embed_dim", "n_cpus", "qc_threshold"):
            if not _is_int(getattr(c, name)) or getattr(c, name) < 1:
                _raise(ConfigError, f"{name} must be an integer >= 1 but {getattr(c, name)!r} given")
        if c.method == "DMD" and c.control_drivers:
            _raise(ConfigError, f"method DMD takes no control drivers but {list(c.control_drivers)} given")
        if c.method != "DMD" and not c.control_drivers:
            _raise(ConfigError, f"method {c.method} needs at least one control driver")
        if c.method == "DMDc-TDE" and c.embed_dim < 2: _raise(ConfigError, "method DMDc-TDE needs embed_dim >= 2")
        if len(set(c.control_drivers)) != len(c.control_drivers): _raise(ConfigError, f"control_drivers has duplicates: {list(c.control_drivers)}")
        reserved = [d for d in c.control_drivers if d in RESERVED]
        if reserved: _raise(ConfigError, f"{reserved} cannot be used as control driver(s)")
        if c.train_nights < c.embed_dim + 1:
            _raise(ConfigError, f"train_nights (M={c.train_nights}) must be >= embed_dim+1 = {c.embed_dim+1}")
        for name in ("rank_p", "rank_r"):
            v = getattr(c, name)
            if v is not None and (not _is_int(v) or v < 1): _raise(ConfigError, f"{name} must be None or an integer >= 1 but {v!r} given")
        if c.method == "DMD" and c.rank_r is not None: _raise(ConfigError, "rank_r applies to DMDc only; use rank_p for the DMD rank")
        if c.rank_p is not None and c.rank_r is not None and c.rank_r > c.rank_p:
            _raise(ConfigError, f"rank_r ({c.rank_r}) must not exceed rank_p ({c.rank_p})")
        if not (c.mode_count is None or c.mode_count == "auto" or (_is_int(c.mode_count) and c.mode_count >= 1)):
            _raise(ConfigError, f"mode_count must be 'auto', None or an integer >= 1 but {c.mode_count!r} given")
        if not 0 < c.energy_threshold <= 1: _raise(ConfigError, f"energy_threshold must be in (0, 1] but {c.energy_threshold} given")
        if not 0 < c.min_quality_fraction <= 1:
            _raise(ConfigError, f"min_quality_fraction must be in (0, 1] but {c.min_quality_fraction} given")
        if c.night_length is not None and (not _is_int(c.night_length) or c.night_length < 1):
            _raise(ConfigError, f"night_length must be None or an integer >= 1 but {c.night_length!r} given")
        if c.season_months is not None and (len(c.season_months) == 0 or any(not 1 <= m <= 12 for m in c.season_months)):
            _raise(ConfigError, f"season_months must list months in 1..12 but {c.season_months} given")
        if not _is_int(c.gap_tolerance) or c.gap_tolerance < 0:
            _raise(ConfigError, f"gap_tolerance must be an integer >= 0 but {c.gap_tolerance!r} given")
        if c.control_lag not in (0, 1): _raise(ConfigError, f"control_lag must be 0 or 1 but {c.control_lag!r} given")
        if not isinstance(c.normalize_controls, bool): _raise(ConfigError, "normalize_controls must be true or false")

    def to_dict(self):
        d = asdict(self)
        d["control_drivers"] = list(self.control_drivers)
        d["season_months"]   = None if self.season_months is None else list(self.season_months)
        return d

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        extra = sorted(set(d) - known)
        if extra: _raise(ConfigError, f"ExperimentConfig: unknown setting(s) {extra}")
        return cls(**d)


def _is_int(v):
    return isinstance(v, (int, np.integer)) and not isinstance(v, bool)


@dataclass(frozen=True, eq=False)
class WindowResult:
    """
        Outcome of one window. Skipped windows carry `skipped_reason` and no scores.

        `forecast` has shape (h, night_length); `baseline_rmse`/`baseline_sse` are
        keyed by baseline label (NT, DT).
    """
    index               : int
    window_start_date   : _date
    train_end           : _date
    validation_start    : _date
    rmse                : float = np.nan
    n_validation_points : int   = None
    sse                 : float = np.nan
    forecast            : np.ndarray = None
    baseline_rmse       : dict  = field(default_factory=dict)
    baseline_sse        : dict  = field(default_factory=dict)
    skipped_reason      : str   = None

    @property
    def scored(self):
        return self.skipped_reason is None


@dataclass(frozen=True, eq=False)
class ExperimentReport:
    config      : ExperimentConfig
    site_id     : str
    hemisphere  : str
    windows     : list
    mean_rmse   : float
    pooled_rmse : float
    baselines   : dict
    n_scored    : int
    n_skipped   : int
    mode_count  : int = None
    night_length: int = None
    dropped     : dict = field(default_factory=dict)


def method_label(config):
    """row label of a configuration, e.g. 'DMDc-TDE(tair, N=6)'"""
    drivers = "+".join(config.control_drivers)
    if config.method == "DMD": return "DMD" if config.embed_dim == 1 else f"DMD(N={config.embed_dim})"
    if config.method == "DMDc": return f"DMDc({drivers})"
    return f"DMDc-TDE({drivers}, N={config.embed_dim})"


def rmse(predicted, actual):
    """
        Root mean square error over all aligned points.

        Example:
        --------
        >>> rmse([1, 2], [2, 4])
        1.5811388300841898
    """
    p = np.asarray(predicted, dtype=float).ravel()
    a = np.asarray(actual, dtype=float).ravel()
    if p.shape != a.shape: _raise(InvalidInput, f"rmse(): {p.size} predicted but {a.size} actual values")
    if p.size == 0: _raise(InvalidInput, "rmse(): no points to score")
    if not (np.all(np.isfinite(p)) and np.all(np.isfinite(a))): _raise(InvalidInput, "rmse(): non-finite values")
    return float(np.sqrt(np.mean((p - a)**2)))


# ----------------------------------------------------------------------------
# nights

def prepare_nights(config, site, verbose=False):
    """
        Extract, season-filter and harmonize the nights of a site.

        Returns:
        --------
        SimpleNamespace(nights, candidates, dropped, night_length) where `dropped`
        counts the nights removed by the quality, season and night_length steps.

        Raises:
        -------
        EmptyExperiment naming the filter that removed the last nights.
    """
    candidates = len(find_night_runs(site))
    if candidates == 0:
        raise EmptyExperiment(f"site {site.site_id}: no complete run of night records in the file", filter_name="night_flag")

    nights = extract_nights(site, qc_threshold=config.qc_threshold, min_quality_fraction=config.min_quality_fraction,
                            harmonize=False, drivers=config.control_drivers)
    dropped = {"quality": candidates - len(nights)}
    if not nights:
        raise EmptyExperiment(f"site {site.site_id}: all {candidates} nights rejected by the quality rule "
                              f"(qc < {config.qc_threshold} on >= {config.min_quality_fraction:.0%} of records)", filter_name="quality")

    in_season = seasonal_filter(nights, site.hemisphere, config.season_months)
    dropped["season"] = len(nights) - len(in_season)
    if not in_season:
        raise EmptyExperiment(f"site {site.site_id}: none of {len(nights)} accepted nights falls in the season "
                              f"({'default ' + site.hemisphere if config.season_months is None else list(config.season_months)})",
                              filter_name="season")

    harmonized = harmonize_nights(in_season, config.night_length)
    dropped["night_length"] = len(in_season) - len(harmonized)
    night_length = harmonized[0].length if harmonized else config.night_length
    if verbose: print(f"{site.site_id}: {candidates} candidate nights, {len(harmonized)} used "
                      f"(dropped: {', '.join(f'{k} {v}' for k, v in dropped.items())}), {night_length} records per night")
    return SimpleNamespace(nights=harmonized, candidates=candidates, dropped=dropped, night_length=night_length)


def _driver_vectors(nights, drivers, normalization):
    """(len(nights), len(drivers)*n) control vectors, drivers concatenated per night"""
    rows = []
    for night in nights:
        try:
            parts = [night.drivers[d] if normalization is None else apply_normalization(normalization[d], night.drivers[d])
                     for d in drivers]
        except KeyError as err:
            raise InvalidInput(f"night of {night.date} has no driver {err.args[0]!r}") from None
        rows.append(np.concatenate(parts))
    return np.vstack(rows)


def check_contiguity(nights, gap_tolerance):
    """None when no two consecutive nights are further apart than gap_tolerance rejected nights, else the reason"""
    for a, b in zip(nights[:-1], nights[1:]):
        gap = (b.date - a.date).days - 1
        if gap > gap_tolerance:
            return f"gap of {gap} night(s) between {a.date} and {b.date} exceeds tolerance {gap_tolerance}"
    return None


# ----------------------------------------------------------------------------
# fit and forecast

def resolve_mode_count(config, nights):
    """
        Mode count of an experiment: None when rank_p is set, the dominant count
        of the NEE Hankel spectrum of all nights for "auto", else config.mode_count.
    """
    if config.rank_p is not None: return None
    if config.mode_count != "auto": return config.mode_count
    count = site_spectrum(nights, "nee", config.spectrum_embed_dim, config.energy_threshold).dominant_count or None
    logger.info(f"mode count from the NEE Hankel spectrum: {count}")
    return count


def _clip_modes(mode_count, matrix):
    if mode_count is None: return None
    eff = effective_rank(svd(matrix).s)
    return max(1, min(int(mode_count), eff))


def fit_window(config, train_nights, mode_count=None):
    """
        Fit the model of one training window.

        Parameters:
        -----------
        config : ExperimentConfig;
            experiment settings.
        train_nights : list of NightRecord;
            M consecutive harmonized nights.
        mode_count : int, None;
            soft truncation (clipped to the effective rank). Ignored when
            config.rank_p is set.

        Returns:
        --------
        DmdModel or DmdcModel whose metadata holds what forecast_window needs
        (embedding, lag, night length, normalization parameters).
    """
    if len(train_nights) < config.embed_dim + 1:
        _raise(InsufficientData, f"fit_window(): {len(train_nights)} training nights but embed_dim+1 = {config.embed_dim+1} needed")
    states  = night_series(train_nights, "nee")
    drivers = list(config.control_drivers)
    norm    = None
    if drivers and config.normalize_controls:
        norm = {d: fit_normalization(train_nights, d) for d in drivers}

    controls = None
    if drivers:
        d = _driver_vectors(train_nights, drivers, norm)
        controls = np.vstack([d[1:], d[-1:]]) if config.control_lag == 0 else d
    snaps = embed_snapshots(states, controls, config.embed_dim)

    if config.method == "DMD":
        rank  = config.rank_p if config.rank_p is not None else _clip_modes(mode_count, snaps.x)
        model = fit_dmd(snaps, rank=rank)
    else:
        p = config.rank_p if config.rank_p is not None else _clip_modes(mode_count, np.vstack([snaps.x, snaps.control]))
        if config.rank_r is not None and p is not None and config.rank_r > p: p = config.rank_r
        model = fit_dmdc(snaps, p=p, r=config.rank_r)

    model.metadata.update({"method"          : config.method,
                           "control_drivers" : drivers,
                           "embed_dim"       : config.embed_dim,
                           "control_lag"     : config.control_lag,
                           "night_length"    : int(states.shape[1]),
                           "normalization"   : {} if norm is None else {k: v.to_dict() for k, v in norm.items()},
                           "train_start"     : train_nights[0].date.isoformat(),
                           "train_end"       : train_nights[-1].date.isoformat(),
                           "forecast_nights" : config.forecast_nights,
                           "config"          : config.to_dict()})
    return model


def _meta(model):
    meta = model.metadata
    if "embed_dim" not in meta or "night_length" not in meta:
        _raise(InvalidInput, "model carries no window metadata (fit it with fit_window)")
    norm = meta.get("normalization") or {}
    return (meta["embed_dim"], meta["night_length"], meta.get("control_drivers", []), meta.get("control_lag", 0),
            {k: NormalizationParams.from_dict(v) for k, v in norm.items()} or None)


def forecast_window(model, history, future):
    """
        Forecast the nights of `future` from the end of `history`.

        Parameters:
        -----------
        model : DmdModel, DmdcModel;
            model returned by fit_window.
        history : list of NightRecord;
            nights up to the forecast origin; the last embed_dim are used as initial state.
        future : list of NightRecord;
            the h nights to forecast; only their control drivers are read.

        Returns:
        --------
        array (h, night_length)
    """
    n_emb, n, drivers, lag, norm = _meta(model)
    h = len(future)
    if h < 1: _raise(InvalidInput, "forecast_window(): nothing to forecast")
    if len(history) < n_emb:
        _raise(InsufficientData, f"forecast_window(): {len(history)} history nights but the embedding needs {n_emb}")
    for night in list(history[-n_emb:]) + list(future):
        if night.length != n:
            _raise(InvalidShape, f"forecast_window(): night of {night.date} has {night.length} records but the model expects {n}")

    x0 = np.concatenate([night.nee for night in history[-n_emb:]])
    if isinstance(model, DmdModel):
        states = reconstruct_dmd(model, h + 1, initial_state=x0)[:, 1:]
    else:
        nights = list(history) + list(future)
        big_h  = len(history)
        d      = _driver_vectors(nights, drivers, norm)
        c      = d[big_h - n_emb + 1 - lag: big_h + h - lag]
        states = forecast_dmdc(model, x0, build_hankel(c, n_emb).data)
    return states[-n:].T


def run_window(config, nights, mode_count=None, reconstruct=False, index=0):
    """
        Train on the first M nights of `nights` and score the forecast of the next h.

        Parameters:
        -----------
        config : ExperimentConfig;
            experiment settings.
        nights : list of NightRecord;
            M+h consecutive nights (M in reconstruct mode).
        mode_count : int, None;
            soft truncation, see fit_window.
        reconstruct : bool;
            diagnostic mode: forecast training nights N...N+h-1 from the first N
            training nights, so the score is the reconstruction error.
        index : int;
            window number stored in the result.

        Returns:
        --------
        WindowResult

        Raises:
        -------
        WindowSkipped when the nights are not contiguous or the fit fails.
    """
    m, h, n_emb = config.train_nights, config.forecast_nights, config.embed_dim
    if reconstruct and h > m - n_emb:
        _raise(ConfigError, f"run_window(): reconstruct mode needs forecast_nights <= M-N = {m - n_emb}")
    needed = m if reconstruct else m + h
    if len(nights) < needed: raise WindowSkipped(f"{len(nights)} nights given but {needed} needed")
    nights = list(nights[:needed])
    train  = nights[:m]
    if reconstruct: history, valid = train[:n_emb], train[n_emb:n_emb+h]
    else: history, valid = train, nights[m:]

    gap = check_contiguity(nights, config.gap_tolerance)
    if gap: raise WindowSkipped(gap)
    try:
        model    = fit_window(config, train, mode_count)
        forecast = forecast_window(model, history, valid)
    except (NumericalFailure, InvalidRank, InsufficientData) as err:
        raise WindowSkipped(f"{type(err).__name__}: {err}") from err

    actual = night_series(valid, "nee")
    mask   = np.vstack([v.observed for v in valid])
    labels = [b for b in BASELINE_LABELS if all(b in v.baselines for v in valid)]
    base   = {b: np.vstack([v.baselines[b] for v in valid]) for b in labels}
    for b in labels: mask &= np.isfinite(base[b])
    n_pts = int(mask.sum())
    if n_pts == 0: raise WindowSkipped("no observed validation half hour with all baselines present")

    err  = forecast[mask] - actual[mask]
    sse  = float(np.sum(err**2))
    b_sse = {BASELINE_LABELS[b]: float(np.sum((base[b][mask] - actual[mask])**2)) for b in labels}
    return WindowResult(index=index, window_start_date=train[0].date, train_end=train[-1].date,
                        validation_start=valid[0].date, rmse=rmse(forecast[mask], actual[mask]),
                        n_validation_points=n_pts, sse=sse, forecast=forecast,
                        baseline_rmse={k: float(np.sqrt(v/n_pts)) for k, v in b_sse.items()}, baseline_sse=b_sse)


def _window_job(job):
    config, nights, mode_count, index = job
    try:
        return run_window(config, nights, mode_count=mode_count, index=index)
    except WindowSkipped as err:
        m = config.train_nights
        logger.warning(f"window {index} starting {nights[0].date} skipped: {err.reason}")
        return WindowResult(index=index, window_start_date=nights[0].date, train_end=nights[m-1].date,
                            validation_start=nights[m].date, skipped_reason=err.reason)


def run_experiment(config, site, progress=False, verbose=False):
    """
        Slide the window over the nights of a site and aggregate the scores.

        Parameters:
        -----------
        config : ExperimentConfig;
            experiment settings.
        site : SiteSeries;
            parsed site file or synthetic site.
        progress : bool;
            show a progress bar over the windows.
        verbose : bool;
            print the extraction summary and the result.

        Returns:
        --------
        ExperimentReport; mean_rmse is the mean of the per-window RMSEs,
        pooled_rmse the RMSE over all scored half hours.

        Raises:
        -------
        EmptyExperiment when no window can be scored.
    """
    prep   = prepare_nights(config, site, verbose=verbose)
    nights = prep.nights
    span   = config.train_nights + config.forecast_nights
    if len(nights) < span:
        raise EmptyExperiment(f"site {site.site_id}: {len(nights)} usable nights but a window needs M+h = {span}",
                              filter_name="windows")

    mode_count = resolve_mode_count(config, nights)

    jobs = [(config, nights[s:s+span], mode_count, i)
            for i, s in enumerate(range(0, len(nights) - span + 1, config.window_step))]
    if config.n_cpus > 1:
        with Pool(config.n_cpus) as pool:
            windows = pool.map(_window_job, jobs)
    else:
        windows = [_window_job(job) for job in tqdm(jobs, desc=f"{site.site_id} windows", disable=not progress)]

    scored = [w for w in windows if w.scored]
    if not scored:
        raise EmptyExperiment(f"site {site.site_id}: all {len(windows)} windows skipped (first: {windows[0].skipped_reason})",
                              filter_name="windows")
    n_pts     = sum(w.n_validation_points for w in scored)
    baselines = {}
    for label in BASELINE_LABELS.values():
        if all(label in w.baseline_rmse for w in scored):
            baselines[label] = SimpleNamespace(mean_rmse=float(np.mean([w.baseline_rmse[label] for w in scored])),
                                               pooled_rmse=float(np.sqrt(sum(w.baseline_sse[label] for w in scored)/n_pts)))

    report = ExperimentReport(config=config, site_id=site.site_id, hemisphere=site.hemisphere, windows=windows,
                              mean_rmse=float(np.mean([w.rmse for w in scored])),
                              pooled_rmse=float(np.sqrt(sum(w.sse for w in scored)/n_pts)),
                              baselines=baselines, n_scored=len(scored), n_skipped=len(windows) - len(scored),
                              mode_count=mode_count, night_length=prep.night_length, dropped=prep.dropped)
    if verbose:
        print(f"{method_label(config)} on {site.site_id}: mean RMSE {report.mean_rmse:.4f} over {report.n_scored} windows "
              f"({report.n_skipped} skipped)" + "".join(f", {k} {v.mean_rmse:.4f}" for k, v in baselines.items()))
    return report


# ----------------------------------------------------------------------------
# studies

def resample_controls(values, n):
    """linearly resample a series of any length onto n equally spaced points"""
    values = np.asarray(values, dtype=float)
    ok = np.isfinite(values)
    if not ok.any(): _raise(InvalidInput, "resample_controls(): no finite value")
    src = np.linspace(0, 1, len(values))
    return np.interp(np.linspace(0, 1, n), src[ok], values[ok])


def day_control_matrix(series, dates, drivers, n):
    """
        Raw daytime control vectors, one column per date.

        The daytime records (night flag false) of each calendar date are
        resampled to n points per driver and concatenated driver by driver.

        Returns:
        --------
        array (len(drivers)*n, len(dates))
    """
    rec  = series.records
    day  = rec[~rec["night"].to_numpy(dtype=bool)]
    cols = []
    for dt in dates:
        sel = day[day.index.date == dt]
        if len(sel) == 0: _raise(InsufficientData, f"day_control_matrix(): no daytime record on {dt}")
        cols.append(np.concatenate([resample_controls(sel[d].to_numpy(dtype=float), n) for d in drivers]))
    return np.column_stack(cols)


def _normalize_stack(model, controls):
    n_emb, n, drivers, _, norm = _meta(model)
    if norm is None: return controls
    out = controls.reshape(n_emb, len(drivers), n, -1).copy()
    for i, d in enumerate(drivers):
        out[:, i] = apply_normalization(norm[d], out[:, i])
    return out.reshape(controls.shape)


def daytime_extrapolate(model, day_controls, initial_state, normalized=False):
    """
        Apply a night-trained DMDc model with daytime control vectors.

        The night-to-night mapping is used unchanged with the daytime controls
        (resampled to the night block structure, see day_control_matrix) in
        place of the night ones. Nothing validates the result.

        Parameters:
        -----------
        model : DmdcModel;
            fitted model.
        day_controls : array (l, h);
            one control vector per day.
        initial_state : array (n,) or (n, h);
            a single state for a closed-loop run over the h columns, or one
            state per column (e.g. the night before each day) for one step each.
        normalized : bool;
            whether day_controls are already normalized. When False the model's
            normalization parameters are applied.

        Returns:
        --------
        SimpleNamespace(estimates=array (n, h), flag=UNCALIBRATED)
    """
    if not isinstance(model, DmdcModel): _raise(InvalidInput, "daytime_extrapolate(): needs a DmdcModel")
    u = np.asarray(day_controls, dtype=float)
    if u.ndim == 1 and model.control_dim == 1: u = u[None, :]
    if u.ndim != 2 or u.shape[0] != model.control_dim:
        _raise(InvalidShape, f"daytime_extrapolate(): day_controls must have shape ({model.control_dim}, h) but have {u.shape}")
    if not normalized and model.metadata.get("normalization"): u = _normalize_stack(model, u)

    x0 = np.asarray(initial_state, dtype=float)
    if x0.ndim == 2:
        if x0.shape != (model.state_dim, u.shape[1]):
            _raise(InvalidShape, f"daytime_extrapolate(): initial_state must have shape ({model.state_dim}, {u.shape[1]}) but has {x0.shape}")
        est = np.column_stack([step_dmdc(model, x0[:, j], u[:, j]) for j in range(u.shape[1])])
    else:
        est = forecast_dmdc(model, x0, u)
    logger.info(f"daytime extrapolation of {u.shape[1]} day(s): {UNCALIBRATED}")
    return SimpleNamespace(estimates=est, flag=UNCALIBRATED)


def intervene(model, history, future, shifts):
    """
        Forecast with additive offsets on the raw control drivers of the future nights.

        Parameters:
        -----------
        model : DmdcModel;
            model returned by fit_window.
        history, future : list of NightRecord;
            as for forecast_window.
        shifts : dict;
            driver -> offset in driver units, e.g. {"tair": 2.0}.

        Returns:
        --------
        SimpleNamespace(baseline, shifted, difference), arrays (h, night_length).
    """
    if not isinstance(model, DmdcModel): _raise(InvalidInput, "intervene(): needs a DmdcModel")
    drivers = model.metadata.get("control_drivers", [])
    unknown = [d for d in shifts if d not in drivers]
    if unknown: _raise(InvalidInput, f"intervene(): {unknown} not among the model's control drivers {drivers}")
    shifted_future = [replace(night, drivers={k: v + shifts.get(k, 0.0) for k, v in night.drivers.items()}) for night in future]
    base    = forecast_window(model, history, future)
    shifted = forecast_window(model, history, shifted_future)
    return SimpleNamespace(baseline=base, shifted=shifted, difference=shifted - base)


def compare_methods(configs, sites, progress=False):
    """
        Mean RMSE of several configurations on several sites.

        Returns:
        --------
        pandas.DataFrame indexed by method label (plus NT and DT rows when the
        sites carry those columns, scored with the first configuration's
        windows) with one column per site. Sites where a configuration has no
        scoreable window get NaN.
    """
    table = {}
    for site in sites:
        col = {}
        for i, config in enumerate(configs):
            try:
                report = run_experiment(config, site, progress=progress)
            except EmptyExperiment as err:
                logger.warning(f"{method_label(config)} on {site.site_id}: {err}")
                col[method_label(config)] = np.nan
                continue
            col[method_label(config)] = report.mean_rmse
            for label, base in report.baselines.items():
                col.setdefault(label, base.mean_rmse)
        table[site.site_id] = col
    df = pd.DataFrame(table)
    order = [method_label(c) for c in configs] + [b for b in BASELINE_LABELS.values() if b in df.index]
    return df.reindex(order)
