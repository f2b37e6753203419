import os
import tempfile
import unittest
from unittest import mock

import pandas as pd

from RECODE.conf import DEFAULTS, PRESETS, build_config, create_configfile, load_configfile, resolve_path
from RECODE.errors import ConfigError
from RECODE.outputs import (atomic_write, format_header, parse_header, report_header, write_table, write_report,
                            load_report, GENERATOR)
from RECODE.pipeline import ExperimentConfig, run_experiment
from RECODE.synthetic import SyntheticSpec, generate_synthetic_site

DATA = os.path.join(os.path.dirname(__file__), "data")


def golden(name):
    with open(os.path.join(DATA, name)) as f:
        return f.read()


class TestHeaders(unittest.TestCase):
    def test_table1_header(self):
        config = build_config("table1").experiment
        self.assertEqual(format_header(report_header(config, "SY-Syn", "north")), golden("header_table1.txt"))

    def test_table2_headers_for_each_embedding(self):
        for n_emb, method in ((1, "DMDc"), (4, "DMDc-TDE"), (6, "DMDc-TDE")):
            config = build_config("table2", cli_values={"embed_dim": n_emb}).experiment
            self.assertEqual(config.method, method)
            self.assertEqual(format_header(report_header(config, "SY-Syn", "north")), golden(f"header_table2_n{n_emb}.txt"))

    def test_parse_header(self):
        header = parse_header(format_header({"schema": "x/1", "control": ["tair", "swc"], "rank_p": None}) + "a\tb\n# late: 1\n")
        self.assertEqual(header, {"schema": "x/1", "control": "tair,swc", "rank_p": "auto"})

    def test_generator_names_version(self):
        self.assertTrue(GENERATOR.startswith("RECODE "))


class TestFiles(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.tmp.cleanup()

    def test_atomic_write_leaves_no_temporary_file(self):
        filename = os.path.join(self.tmp.name, "sub", "a.txt")
        atomic_write(filename, "one\n")
        atomic_write(filename, "two\n")
        self.assertEqual(os.listdir(os.path.dirname(filename)), ["a.txt"])
        with open(filename) as f:
            self.assertEqual(f.read(), "two\n")

    def test_write_table(self):
        df = pd.DataFrame({"a": [1, 2], "b": [0.5, float("nan")]})
        filename = write_table(os.path.join(self.tmp.name, "t.tsv"), df, {"schema": "t/1"}, float_format="%.3f")
        with open(filename) as f:
            self.assertEqual(f.read(), "# schema: t/1\na\tb\n1\t0.500\n2\t\n")

    def test_report_round_trip(self):
        spec   = SyntheticSpec(kind="lti", n_days=15, night_records=2, a_matrix=[[0.5, 0.2], [-0.1, 0.4]],
                               b_matrix=[[0.3, 0.0], [0.1, 0.2]], start="2019-06-01")
        config = ExperimentConfig(train_nights=6, forecast_nights=2, mode_count=None, normalize_controls=False)
        report = run_experiment(config, generate_synthetic_site(spec, seed=1))
        write_report(report, self.tmp.name)
        loaded = load_report(self.tmp.name)
        self.assertEqual(loaded.header["schema"], "recode-report/1")
        self.assertEqual(loaded.header["M"], "6")
        self.assertEqual(list(loaded.summary["method"]), ["DMDc", "NT", "DT"])
        self.assertEqual(int(loaded.summary["windows"].iloc[0]), report.n_scored)
        self.assertEqual(len(loaded.windows), len(report.windows))
        self.assertAlmostEqual(loaded.summary["mean_rmse"].iloc[0], report.mean_rmse, places=7)

    def test_load_report_missing(self):
        with self.assertRaises(FileNotFoundError):
            load_report(os.path.join(self.tmp.name, "nothing"))


class TestConfigFiles(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.filename = os.path.join(self.tmp.name, "recode_config.dat")

    def tearDown(self):
        self.tmp.cleanup()

    def write(self, text):
        with open(self.filename, "w") as f:
            f.write(text)
        return self.filename

    def test_round_trip(self):
        config = ExperimentConfig(control_drivers=("tair", "swc"), embed_dim=3, train_nights=9, season_months=(6,),
                                  rank_p=4, mode_count=None, normalize_controls=False)
        create_configfile(config, self.filename, column_map={"tair": "TA_F_MDS"}, site={"hemisphere": "south", "sep": "\t"})
        settings = build_config(file_values=load_configfile(self.filename))
        self.assertEqual(settings.experiment, config)
        self.assertEqual(settings.site, {"hemisphere": "south", "site_id": None, "sep": "\t"})
        self.assertEqual(settings.columns, {"tair": "TA_F_MDS"})

    def test_default_file_reads_back_defaults(self):
        create_configfile(filename=self.filename)
        settings = build_config(file_values=load_configfile(self.filename))
        self.assertEqual(settings.experiment.to_dict(), DEFAULTS)
        self.assertEqual(settings.site["sep"], ",")

    def test_values(self):
        values = load_configfile(self.write("method = DMDc   # inline comment\n\ncontrol_drivers = tair, swc\n"
                                            "mode_count = none\nnormalize_controls = no\ncolumn.swc = SWC_F_MDS_2\n"))
        self.assertEqual(values, {"columns": {"swc": "SWC_F_MDS_2"}, "method": "DMDc", "control_drivers": ["tair", "swc"],
                                  "mode_count": None, "normalize_controls": False})

    def test_unknown_key_names_line(self):
        self.write("# experiment\nmethod = DMDc\nhorizon = 3\n")
        with self.assertRaises(ConfigError) as ctx:
            load_configfile(self.filename)
        self.assertIn("line 3", str(ctx.exception))
        self.assertIn("horizon", str(ctx.exception))

    def test_malformed_line(self):
        self.write("method = DMDc\ntrain_nights 5\n")
        with self.assertRaises(ConfigError) as ctx:
            load_configfile(self.filename)
        self.assertIn("line 2", str(ctx.exception))

    def test_invalid_value_is_config_error(self):
        with self.assertRaises(ConfigError):
            build_config(file_values=load_configfile(self.write("train_nights = many\n")))


class TestPrecedence(unittest.TestCase):
    def test_layers(self):
        c = build_config("table1", {"train_nights": 7, "forecast_nights": 4}, {"forecast_nights": 2}).experiment
        self.assertEqual((c.method, c.control_drivers, c.train_nights, c.forecast_nights), ("DMDc", ("tair",), 7, 2))
        self.assertEqual(build_config().experiment, ExperimentConfig())

    def test_presets(self):
        self.assertEqual(set(PRESETS), {"table1", "table2"})
        c = build_config("table2").experiment
        self.assertEqual((c.train_nights, c.forecast_nights, c.embed_dim), (14, 14, 1))

    def test_plain_dmd_drops_inherited_drivers(self):
        c = build_config("table1", cli_values={"method": "DMD"}).experiment
        self.assertEqual((c.method, c.control_drivers), ("DMD", ()))
        with self.assertRaises(ConfigError):
            build_config(cli_values={"method": "DMD", "control_drivers": ["tair"]})

    def test_unknown(self):
        with self.assertRaises(ConfigError):
            build_config("table3")
        with self.assertRaises(ConfigError):
            build_config(cli_values={"horizon": 2})

    def test_site_and_columns(self):
        s = build_config(file_values={"hemisphere": "south", "columns": {"tair": "TA_F"}}, cli_values={"site_id": "AU-Fix"})
        self.assertEqual(s.site, {"hemisphere": "south", "site_id": "AU-Fix", "sep": ","})
        self.assertEqual(s.columns, {"tair": "TA_F"})


class TestResolvePath(unittest.TestCase):
    def test_data_dir(self):
        with tempfile.TemporaryDirectory() as tmp:
            open(os.path.join(tmp, "FLX_XX-Dat.csv"), "w").close()
            with mock.patch.dict(os.environ, {"RECODE_DATA_DIR": tmp}):
                self.assertEqual(resolve_path("FLX_XX-Dat.csv"), os.path.join(tmp, "FLX_XX-Dat.csv"))
                self.assertEqual(resolve_path("absent.csv"), "absent.csv")


if __name__ == "__main__":
    unittest.main()
