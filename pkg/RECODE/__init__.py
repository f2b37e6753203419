__all__ = ["svd", "truncate_svd", "pinv", "eig", "match_eigenvalues",
           "SnapshotSet", "fit_dmd", "predict_dmd", "reconstruct_dmd",
           "fit_dmdc", "step_dmdc", "forecast_dmdc", "save_model", "load_model",
           "build_hankel", "hankel_spectrum", "embed_snapshots", "site_spectrum", "write_spectrum",
           "parse_site_file", "write_site_file", "extract_nights", "seasonal_filter", "fit_normalization",
           "apply_normalization", "SyntheticSpec", "generate_synthetic_site", "lloyd_taylor",
           "ExperimentConfig", "run_window", "run_experiment", "rmse", "daytime_extrapolate", "intervene",
           "compare_methods", "write_report", "load_report", "create_configfile", "load_configfile"]

import logging
from os import path

here = path.abspath(path.dirname(__file__))
with open(path.join(here, 'VERSION.dat')) as version_file:
    __version__ = version_file.read().strip()

logging.getLogger(__name__).addHandler(logging.NullHandler())

from .errors import RecodeError
from .numkernel import svd, truncate_svd, pinv, eig, match_eigenvalues
from .dmd import SnapshotSet, fit_dmd, predict_dmd, reconstruct_dmd
from .dmdc import fit_dmdc, step_dmdc, forecast_dmdc, save_model, load_model
from .embedding import build_hankel, hankel_spectrum, embed_snapshots, site_spectrum, write_spectrum
from .fluxnet import parse_site_file, write_site_file, extract_nights, seasonal_filter, fit_normalization, apply_normalization
from .synthetic import SyntheticSpec, generate_synthetic_site, lloyd_taylor
from .pipeline import ExperimentConfig, run_window, run_experiment, rmse, daytime_extrapolate, intervene, compare_methods
from .outputs import write_report, load_report
from .conf import create_configfile, load_configfile
