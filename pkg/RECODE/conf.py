"""
Experiment defaults, protocol presets and key = value configuration files.

Settings are merged with the precedence DEFAULTS < preset < config file <
explicit command-line flags.
"""
import os
from types import SimpleNamespace

from .errors import _raise, ConfigError
from .pipeline import ExperimentConfig
from .synthetic import SyntheticSpec

DATA_DIR_ENV = "RECODE_DATA_DIR"

#experiment settings with their defaults
DEFAULTS = ExperimentConfig().to_dict()
#site file settings
SITE_DEFAULTS = {"hemisphere": "north", "site_id": None, "sep": ","}

PRESETS = {"table1": {"method": "DMDc", "control_drivers": ["tair"], "embed_dim": 1,
                      "train_nights": 5, "forecast_nights": 1},
           "table2": {"method": "DMDc", "control_drivers": ["tair"], "embed_dim": 1,
                      "train_nights": 14, "forecast_nights": 14}}

_LIST_KEYS  = ("control_drivers", "season_months")
EXPERIMENT_KEYS = tuple(DEFAULTS)
SYNTH_KEYS  = tuple(SyntheticSpec().to_dict())


def _value(text):
    text = text.strip()
    low  = text.lower()
    if low in ("none", "null", ""): return None
    if low in ("true", "yes"): return True
    if low in ("false", "no"): return False
    if "," in text: return [_value(t) for t in text.split(",") if t.strip()]
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    return text


def _fmt(v):
    if v is None: return "none"
    if isinstance(v, bool): return str(v).lower()
    if isinstance(v, (list, tuple)): return ",".join(_fmt(x) for x in v) if len(v) else "none"
    return str(v)


def _normalize(key, value):
    if key == "control_drivers":
        if value is None: return []
        return [value] if isinstance(value, str) else [str(v) for v in value]
    if key == "season_months" and value is not None:
        return [value] if not isinstance(value, list) else value
    if key == "mode_count" and isinstance(value, str) and value.lower() == "none": return None
    return value


def load_configfile(configfile, allowed=None):
    """
        Read a key = value configuration file.

        Parameters:
        -----------
        configfile : str;
            path of the file. `#` starts a comment, blank lines are ignored and
            column bindings use keys `column.<field>`. The delimiter `sep` may
            be quoted ('\t' is a tab).
        allowed : iterable, None;
            accepted keys. Default are the experiment and site settings.

        Returns:
        --------
        dict of settings; column bindings under the key "columns".

        Raises:
        -------
        ConfigError naming the line of a malformed entry or unknown key.
    """
    allowed  = set(EXPERIMENT_KEYS + tuple(SITE_DEFAULTS)) if allowed is None else set(allowed)
    settings = {"columns": {}}
    with open(configfile, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.split("#", 1)[0].strip()
            if not line: continue
            if "=" not in line: _raise(ConfigError, f"{configfile}, line {lineno}: expected 'key = value' but got {line!r}")
            key, _, value = line.partition("=")
            key = key.strip()
            if key.startswith("column."):
                field = key[len("column."):]
                if not field: _raise(ConfigError, f"{configfile}, line {lineno}: column binding without field name")
                settings["columns"][field] = _value(value)
                continue
            if key not in allowed: _raise(ConfigError, f"{configfile}, line {lineno}: unknown key {key!r}")
            if key == "sep":
                settings[key] = value.strip().strip("'\"").replace("\\t", "\t") or ","
                continue
            settings[key] = _normalize(key, _value(value))
    return settings


def create_configfile(config=None, filename="recode_config.dat", column_map=None, site=None):
    """
        Write an experiment configuration file that load_configfile reads back.

        Parameters:
        -----------
        config : ExperimentConfig, None;
            settings to write. Default ExperimentConfig().
        filename : str;
            name of the configuration file to be saved.
        column_map : dict, None;
            column bindings written as `column.<field> = <column>`.
        site : dict, None;
            site settings (hemisphere, site_id, sep).
    """
    config = ExperimentConfig() if config is None else config
    lines  = ["# ========================= RECODE configuration file =========================",
              "# key = value; lists are comma separated; none = unset",
              "# -------------------------------------------------------------------------------"]
    lines += [f"{k:22s} = {_fmt(v)}" for k, v in config.to_dict().items()]
    site = dict(SITE_DEFAULTS, **(site or {}))
    site["sep"] = "'" + site["sep"].replace("\t", "\\t") + "'"
    lines += ["# --- site file ---"] + [f"{k:22s} = {_fmt(v)}" for k, v in site.items()]
    if column_map:
        lines += ["# --- column bindings ---"] + [f"{'column.' + k:22s} = {v}" for k, v in column_map.items()]
    with open(filename, "w") as f:
        f.write("\n".join(lines) + "\n")
    print(f"configuration file saved as {filename}")
    return filename


def build_config(preset=None, file_values=None, cli_values=None):
    """
        Merge settings into an ExperimentConfig.

        Parameters:
        -----------
        preset : str, None;
            "table1" (M=5, h=1) or "table2" (M=14, h=14).
        file_values : dict, None;
            settings from load_configfile.
        cli_values : dict, None;
            explicitly given command-line settings.

        Returns:
        --------
        SimpleNamespace(experiment=ExperimentConfig, site=dict, columns=dict)
    """
    if preset is not None and preset not in PRESETS: _raise(ConfigError, f"unknown preset {preset!r}, choose from {list(PRESETS)}")
    merged  = dict(DEFAULTS)
    site    = dict(SITE_DEFAULTS)
    columns = {}
    for layer in (PRESETS.get(preset, {}), file_values or {}, cli_values or {}):
        layer = dict(layer)
        columns.update(layer.pop("columns", None) or {})
        #a layer selecting plain DMD drops drivers inherited from lower layers
        if layer.get("method") == "DMD" and "control_drivers" not in layer: merged["control_drivers"] = []
        for key, value in layer.items():
            if key in SITE_DEFAULTS: site[key] = value
            elif key in merged: merged[key] = _normalize(key, value)
            else: _raise(ConfigError, f"unknown setting {key!r}")
    return SimpleNamespace(experiment=ExperimentConfig.from_dict(merged), site=site, columns=columns)


def resolve_path(path):
    """
        `path` itself when it exists, else `path` inside $RECODE_DATA_DIR when
        that exists, else `path` unchanged (opening it then fails as usual).
    """
    if os.path.exists(path) or os.path.isabs(path): return path
    data_dir = os.environ.get(DATA_DIR_ENV)
    if data_dir and os.path.exists(os.path.join(data_dir, path)): return os.path.join(data_dir, path)
    return path
