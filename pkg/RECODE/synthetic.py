"""
Synthetic half-hourly sites with a known truth.

Two generators:

* "lti": the night vector of NEE follows x(k+1) = A x(k) + B u(k+1), where
  u(k) is the air temperature over night k, so DMDc can identify it exactly.
* "lloyd_taylor": respiration follows the Lloyd-Taylor temperature law, night
  flags come from a daylight model and daytime NEE subtracts a simple
  light-driven GPP. The noiseless respiration is written as RECO_TRUE.

The output is a SiteSeries in the same shape parse_site_file returns; write it
with fluxnet.write_site_file.
"""
import logging
from dataclasses import dataclass, fields, asdict

import numpy as np
import pandas as pd

from .errors import _raise, ConfigError, InvalidInput
from .fluxnet import SiteSeries, DEFAULT_COLUMNS, HEMISPHERES, STEP

logger = logging.getLogger(__name__)

KINDS = ("lti", "lloyd_taylor")


@dataclass
class SyntheticSpec:
    """
        Description of a synthetic site.

        Parameters:
        -----------
        kind : str;
            "lti" or "lloyd_taylor".
        site_id, start, n_days, latitude, hemisphere :
            site name, first day (00:00), number of days, latitude in degrees and hemisphere.
        a_matrix, b_matrix, x0 :
            LTI system over night vectors of night_records values. b_matrix may be a
            scalar gain or an (n, n) matrix; x0 defaults to 2 everywhere.
        night_start_hour, night_records :
            LTI nights start at this hour and last night_records half hours.
        noise_sigma :
            standard deviation of the LTI observation noise.
        t_mean, t_seasonal_amp, t_diurnal_amp, t_anomaly_sigma, t_anomaly_rho, t_noise_sigma :
            air temperature: mean, seasonal and diurnal amplitudes, AR(1) daily anomaly and white noise (degC).
        r_ref, e0, t_ref, t0 :
            Lloyd-Taylor parameters (t_ref and t0 in degC).
        gpp_max :
            daytime GPP peak.
        noise_fraction :
            Lloyd-Taylor observation noise as a fraction of the RMS night respiration.
        swc_mean, swc_sigma :
            soil water content random walk (percent, daily step sd).
        bad_night_every :
            when > 0, every k-th night gets 30% of its records flagged qc=2.
    """
    kind             : str   = "lloyd_taylor"
    site_id          : str   = "SY-Syn"
    start            : str   = "2019-05-01"
    n_days           : int   = 150
    latitude         : float = 50.0
    hemisphere       : str   = "north"
    a_matrix         : object = None
    b_matrix         : object = 0.1
    x0               : object = None
    night_start_hour : float = 22.0
    night_records    : int   = 8
    noise_sigma      : float = 0.0
    t_mean           : float = 12.0
    t_seasonal_amp   : float = 8.0
    t_diurnal_amp    : float = 5.0
    t_anomaly_sigma  : float = 2.5
    t_anomaly_rho    : float = 0.7
    t_noise_sigma    : float = 0.3
    r_ref            : float = 3.0
    e0               : float = 308.56
    t_ref            : float = 15.0
    t0               : float = -46.02
    gpp_max          : float = 15.0
    noise_fraction   : float = 0.05
    swc_mean         : float = 30.0
    swc_sigma        : float = 0.5
    bad_night_every  : int   = 0

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        extra = sorted(set(d) - known)
        if extra: _raise(ConfigError, f"SyntheticSpec: unknown key(s) {extra}")
        return cls(**d)

    def to_dict(self):
        return asdict(self)


def lloyd_taylor(t, r_ref=1.0, e0=308.56, t_ref=15.0, t0=-46.02):
    """
        Lloyd-Taylor respiration R = r_ref*exp(e0*(1/(t_ref-t0) - 1/(t-t0))).

        Temperatures in degC; t must be above t0. At t = t_ref the result is r_ref.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t <= t0): _raise(InvalidInput, f"lloyd_taylor(): temperatures must be above t0={t0}")
    return r_ref*np.exp(e0*(1.0/(t_ref - t0) - 1.0/(t - t0)))


def _validate(spec):
    if spec.kind not in KINDS: _raise(ConfigError, f"synthetic kind must be one of {KINDS} but {spec.kind!r} given")
    if spec.hemisphere not in HEMISPHERES: _raise(ConfigError, f"hemisphere must be one of {HEMISPHERES} but {spec.hemisphere!r} given")
    if int(spec.n_days) < 2: _raise(ConfigError, f"n_days must be >= 2 but {spec.n_days} given")
    if not abs(spec.latitude) <= 66: _raise(ConfigError, f"latitude must be within +-66 degrees but {spec.latitude} given")
    for name in ("noise_sigma", "noise_fraction", "t_anomaly_sigma", "t_noise_sigma", "swc_sigma"):
        if getattr(spec, name) < 0: _raise(ConfigError, f"{name} must be >= 0 but {getattr(spec, name)} given")
    if not 0 <= spec.t_anomaly_rho < 1: _raise(ConfigError, f"t_anomaly_rho must be in [0, 1) but {spec.t_anomaly_rho} given")
    if spec.bad_night_every < 0: _raise(ConfigError, f"bad_night_every must be >= 0 but {spec.bad_night_every} given")
    try:
        pd.Timestamp(spec.start)
    except ValueError as err:
        raise ConfigError(f"start date {spec.start!r} is not a valid date") from err
    if spec.kind == "lti":
        n = spec.night_records
        if not 1 <= n < 48: _raise(ConfigError, f"night_records must be in [1, 47] but {n} given")
        if not 0 <= spec.night_start_hour < 24 or (2*spec.night_start_hour) % 1:
            _raise(ConfigError, f"night_start_hour must be a half hour in [0, 24) but {spec.night_start_hour} given")
        if spec.a_matrix is None: _raise(ConfigError, "lti spec needs a_matrix")
        _square(spec.a_matrix, n, "a_matrix")
        if np.ndim(spec.b_matrix) != 0: _square(spec.b_matrix, n, "b_matrix")
        if spec.x0 is not None and np.atleast_1d(np.asarray(spec.x0, dtype=float)).shape != (n,):
            _raise(ConfigError, f"x0 must have length {n}")


def _square(m, n, name):
    # config files give matrices as flat row-major lists
    a = np.asarray(m, dtype=float)
    if a.ndim == 1 and a.size == n*n: a = a.reshape(n, n)
    if a.shape != (n, n): _raise(ConfigError, f"{name} must have shape ({n}, {n}) but has {a.shape}")
    return a


def _temperature(spec, index, rng):
    days   = (index - index[0]) / pd.Timedelta(days=1)
    doy    = index.dayofyear.to_numpy()
    hour   = (index.hour + index.minute/60).to_numpy()
    sign   = 1.0 if spec.hemisphere == "north" else -1.0

    n_anom = int(np.ceil(days[-1])) + 2
    anom   = np.zeros(n_anom)
    shocks = rng.normal(0.0, spec.t_anomaly_sigma*np.sqrt(1 - spec.t_anomaly_rho**2), n_anom)
    anom[0] = rng.normal(0.0, spec.t_anomaly_sigma)
    for i in range(1, n_anom):
        anom[i] = spec.t_anomaly_rho*anom[i-1] + shocks[i]

    return (spec.t_mean + sign*spec.t_seasonal_amp*np.sin(2*np.pi*(doy - 105)/365.0)
            + spec.t_diurnal_amp*np.sin(2*np.pi*(hour - 9)/24.0)
            + np.interp(np.asarray(days), np.arange(n_anom) - 0.5, anom)
            + spec.t_noise_sigma*rng.normal(size=len(index)))


def daylight(index, latitude):
    """
        Sunrise and sunset hours (local solar time) for every timestamp.

        Uses the solar declination 23.44*sin(2*pi*(284+doy)/365) and the sunset
        hour angle arccos(-tan(lat)*tan(decl)).
    """
    doy  = index.dayofyear.to_numpy()
    decl = np.radians(23.44)*np.sin(2*np.pi*(284 + doy)/365.0)
    cosw = np.clip(-np.tan(np.radians(latitude))*np.tan(decl), -1.0, 1.0)
    half = np.degrees(np.arccos(cosw))/15.0
    return 12.0 - half, 12.0 + half


def _runs(flags):
    edges = np.diff(np.concatenate([[0], flags.astype(int), [0]]))
    return list(zip(np.flatnonzero(edges == 1), np.flatnonzero(edges == -1)))


def generate_synthetic_site(spec, seed=0, verbose=False):
    """
        Generate a synthetic site.

        Parameters:
        -----------
        spec : SyntheticSpec, dict;
            site description.
        seed : int;
            seed of numpy.random.default_rng; the same spec and seed give identical data.
        verbose : bool;
            print a summary.

        Returns:
        --------
        SiteSeries with columns nee, nee_qc, night, tair, swc, reco_nt, reco_dt, reco_true.
    """
    if isinstance(spec, dict): spec = SyntheticSpec.from_dict(spec)
    _validate(spec)
    rng   = np.random.default_rng(seed)
    start = pd.Timestamp(spec.start).normalize()
    index = pd.date_range(start, periods=48*int(spec.n_days), freq=STEP, name="timestamp")
    n_rec = len(index)
    tair  = _temperature(spec, index, rng)
    swc   = np.clip(spec.swc_mean + np.cumsum(rng.normal(0.0, spec.swc_sigma/np.sqrt(48), n_rec)), 1.0, 99.0)
    truth = np.full(n_rec, np.nan)

    if spec.kind == "lti":
        n     = spec.night_records
        a     = _square(spec.a_matrix, n, "a_matrix")
        b     = float(spec.b_matrix)*np.eye(n) if np.ndim(spec.b_matrix) == 0 else _square(spec.b_matrix, n, "b_matrix")
        x     = np.full(n, 2.0) if spec.x0 is None else np.atleast_1d(np.asarray(spec.x0, dtype=float))
        night = np.zeros(n_rec, dtype=bool)
        nee   = np.full(n_rec, -2.0)
        first = int(2*spec.night_start_hour)
        for d in range(int(spec.n_days)):
            s = d*48 + first
            night[s:s+n] = True
            if s + n > n_rec: break
            if d > 0: x = a @ x + b @ tair[s:s+n]
            truth[s:s+n] = x
        nee[night] = np.nan_to_num(truth[night], nan=0.0) + spec.noise_sigma*rng.normal(size=int(night.sum()))
    else:
        sunrise, sunset = daylight(index, spec.latitude)
        hour   = (index.hour + index.minute/60).to_numpy()
        night  = (hour < sunrise) | (hour >= sunset)
        truth  = lloyd_taylor(tair, spec.r_ref, spec.e0, spec.t_ref, spec.t0)
        gpp    = np.where(night, 0.0, spec.gpp_max*np.clip(np.sin(np.pi*(hour - sunrise)/(sunset - sunrise)), 0, None))
        sigma  = spec.noise_fraction*np.sqrt(np.mean(truth[night]**2))
        nee    = truth - gpp + sigma*rng.normal(size=n_rec)

    qc = np.zeros(n_rec)
    if spec.bad_night_every > 0:
        for k, (s, e) in enumerate(_runs(night)):
            if (k + 1) % spec.bad_night_every == 0:
                qc[s:s + int(np.ceil(0.3*(e - s)))] = 2

    records = pd.DataFrame({"nee"      : nee,
                            "nee_qc"   : qc,
                            "night"    : night,
                            "tair"     : tair,
                            "swc"      : swc,
                            "reco_nt"  : truth*(1 + 0.03*rng.normal(size=n_rec)),
                            "reco_dt"  : truth*(1 + 0.06*rng.normal(size=n_rec)),
                            "reco_true": truth}, index=index)
    cmap = dict(DEFAULT_COLUMNS, reco_true="RECO_TRUE")
    if verbose: print(f"synthetic {spec.kind} site {spec.site_id}: {spec.n_days} days from {start.date()}, "
                      f"{len(_runs(night))} night runs")
    logger.info(f"generated {spec.kind} site {spec.site_id} with seed {seed}")
    return SiteSeries(site_id=spec.site_id, hemisphere=spec.hemisphere, records=records, column_map=cmap)
