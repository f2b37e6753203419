import argparse
import io
import os
import tempfile
import unittest
import warnings
from contextlib import redirect_stderr, redirect_stdout
from unittest import mock

import numpy as np
import pandas as pd
from numpy.testing import assert_allclose

from RECODE.cli import build_parser, main
from RECODE.conf import build_config
from RECODE.fluxnet import parse_site_file
from RECODE.outputs import parse_header
from RECODE.pipeline import UNCALIBRATED, prepare_nights, fit_window, forecast_window, resolve_mode_count

DATA = os.path.join(os.path.dirname(__file__), "data")


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    with redirect_stdout(out), redirect_stderr(err):
        status = main([str(a) for a in argv])
    return status, out.getvalue(), err.getvalue()


def read_text(filename):
    with open(filename, encoding="utf-8") as f:
        return f.read()


class TestParser(unittest.TestCase):
    def test_every_option_states_its_default(self):
        parser = build_parser()
        subparsers = [a for a in parser._actions if isinstance(a, argparse._SubParsersAction)][0]
        for name, p in [("recode", parser)] + list(subparsers.choices.items()):
            for action in p._actions:
                if not action.option_strings or isinstance(action, (argparse._HelpAction, argparse._VersionAction)):
                    continue
                self.assertIn("default", action.help, msg=f"{name} {action.option_strings}")

    def test_version(self):
        with redirect_stdout(io.StringIO()), self.assertRaises(SystemExit) as ctx:
            main(["--version"])
        self.assertEqual(ctx.exception.code, 0)

    def test_command_required(self):
        with redirect_stderr(io.StringIO()), self.assertRaises(SystemExit) as ctx:
            main([])
        self.assertEqual(ctx.exception.code, 2)

    def test_top_level_help(self):
        with mock.patch.dict(os.environ, {"COLUMNS": "100", "NO_COLOR": "1", "PYTHON_COLORS": "0"}):
            text = build_parser().format_help()
        self.assertEqual(text, read_text(os.path.join(DATA, "help_recode.txt")))

    def test_n_latent_must_be_positive(self):
        with redirect_stderr(io.StringIO()), self.assertRaises(SystemExit) as ctx:
            main(["fit", "site.csv", "--n-latent", "0"])
        self.assertEqual(ctx.exception.code, 2)


class TestCommands(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.tmp  = tempfile.TemporaryDirectory()
        cls.site = os.path.join(cls.tmp.name, "FLX_SY-Syn_SYN.csv")
        status, _, _ = run("synth", "--n-days", 60, "--seed", 4, "--out", cls.site)
        assert status == 0

    @classmethod
    def tearDownClass(cls):
        cls.tmp.cleanup()

    def folder(self, name):
        return os.path.join(self.tmp.name, name)

    def test_synth_writes_site_file(self):
        site = parse_site_file(self.site)
        self.assertEqual(site.site_id, "SY-Syn")
        self.assertEqual(len(site), 60*48)

    def test_experiment_table1_header(self):
        status, out, _ = run("experiment", self.site, "--preset", "table1", "--out-folder", self.folder("t1"))
        self.assertEqual(status, 0)
        self.assertIn("mean RMSE", out)
        summary = read_text(os.path.join(self.folder("t1"), "summary.tsv"))
        self.assertTrue(summary.startswith(read_text(os.path.join(DATA, "header_table1.txt"))))
        df = pd.read_csv(os.path.join(self.folder("t1"), "summary.tsv"), sep="\t", comment="#")
        self.assertEqual(list(df["method"]), ["DMDc", "NT", "DT"])

    def test_experiment_table2_embedding_header(self):
        status, _, _ = run("experiment", self.site, "--preset", "table2", "--embed-dim", 6, "--out-folder", self.folder("t2"))
        self.assertEqual(status, 0)
        summary = read_text(os.path.join(self.folder("t2"), "summary.tsv"))
        self.assertTrue(summary.startswith(read_text(os.path.join(DATA, "header_table2_n6.txt"))))

    def test_dmd_with_control_is_usage_error(self):
        status, _, err = run("experiment", self.site, "--method", "DMD", "--control", "tair", "--out-folder", self.folder("x"))
        self.assertEqual(status, 2)
        self.assertIn("DMD", err)
        self.assertFalse(os.path.exists(self.folder("x")))

    def test_missing_site_file(self):
        status, _, err = run("experiment", self.folder("nothing.csv"), "--out-folder", self.folder("y"))
        self.assertEqual(status, 2)
        self.assertIn("does not exist", err)

    def test_empty_season(self):
        status, _, err = run("experiment", self.site, "--season-months", 1, "--out-folder", self.folder("z"))
        self.assertEqual(status, 1)
        self.assertIn("season", err)

    def test_fit_then_forecast(self):
        model = os.path.join(self.tmp.name, "model.json")
        self.assertEqual(run("fit", self.site, "--preset", "table1", "--model", model)[0], 0)
        self.assertEqual(run("forecast", model, self.site, "--out-folder", self.folder("fc"))[0], 0)
        table = pd.read_csv(os.path.join(self.folder("fc"), "forecast.tsv"), sep="\t", comment="#")

        config = build_config("table1").experiment
        nights = prepare_nights(config, parse_site_file(self.site)).nights
        direct = forecast_window(fit_window(config, nights[:5], resolve_mode_count(config, nights)), nights[:5], nights[5:6])
        self.assertEqual(list(table["date"].unique()), [nights[5].date.isoformat()])
        assert_allclose(table["nee_forecast"].to_numpy(), direct.ravel(), atol=1e-9)

    def test_forecast_daytime(self):
        model = os.path.join(self.tmp.name, "model_day.json")
        run("fit", self.site, "--preset", "table1", "--model", model)
        status, _, _ = run("forecast", model, self.site, "--horizon", 2, "--daytime", "--out-folder", self.folder("day"))
        self.assertEqual(status, 0)
        text = read_text(os.path.join(self.folder("day"), "daytime.tsv"))
        self.assertEqual(parse_header(text)["flag"], UNCALIBRATED)
        table = pd.read_csv(os.path.join(self.folder("day"), "daytime.tsv"), sep="\t", comment="#")
        self.assertEqual(sorted(table["night"].unique()), [1, 2])
        self.assertTrue(np.all(np.isfinite(table["reco_day_estimate"])))

    def test_spectrum(self):
        status, out, _ = run("spectrum", self.site, "--embed-dim", 4, "--field", "nee", "--field", "tair",
                             "--out-folder", self.folder("sp"))
        self.assertEqual(status, 0)
        self.assertIn("dominant_count", out)
        for field in ("nee", "tair"):
            filename = os.path.join(self.folder("sp"), f"SY-Syn_{field}_spectrum.txt")
            header = parse_header(read_text(filename))
            self.assertEqual((header["schema"], header["field"], header["embed_dim"]), ("recode-spectrum/1", field, "4"))
            values = pd.read_csv(filename, sep="\t", comment="#")["normalized"].to_numpy()
            self.assertTrue(np.all(np.diff(values) <= 1e-12))
            self.assertGreaterEqual(int(header["dominant_count"]), 1)

    def test_embedding_advisory_uses_declared_latent_dimension(self):
        model = os.path.join(self.tmp.name, "model_tde.json")
        for extra, expected in (([], 0), (["--n-latent", 2], 1)):
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                status, _, _ = run("fit", self.site, "--embed-dim", 4, "--train-nights", 10, "--model", model, *extra)
            self.assertEqual(status, 0)
            advisories = [w for w in caught if issubclass(w.category, RuntimeWarning) and "latent" in str(w.message)]
            self.assertEqual(len(advisories), expected)

    def test_explicit_zero_quality_fraction_is_not_the_default(self):
        status, _, err = run("spectrum", self.site, "--min-quality-fraction", 0, "--out-folder", self.folder("q"))
        self.assertEqual(status, 2)
        self.assertIn("min_quality_fraction", err)


if __name__ == "__main__":
    unittest.main()
