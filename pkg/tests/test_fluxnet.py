import io
import os
import tempfile
import unittest
from datetime import date

import numpy as np
import pandas as pd
from numpy.testing import assert_allclose, assert_array_equal

from RECODE.errors import ConfigError, ParseError, SchemaError
from RECODE.fluxnet import (parse_site_file, write_site_file, find_night_runs, extract_nights, harmonize_nights,
                            seasonal_filter, fit_normalization, apply_normalization, invert_normalization,
                            NormalizationParams)
from RECODE.synthetic import SyntheticSpec, generate_synthetic_site

FIXTURE = os.path.join(os.path.dirname(__file__), "data", "fixture_2days.csv")


def fixture_lines():
    with open(FIXTURE) as f:
        return f.read().splitlines()


def from_lines(lines, **kw):
    return parse_site_file(io.StringIO("\n".join(lines) + "\n"), **kw)


class TestParseSiteFile(unittest.TestCase):
    def setUp(self):
        self.site = parse_site_file(FIXTURE)

    def test_records(self):
        rec = self.site.records
        self.assertEqual(len(self.site), 96)
        self.assertEqual(self.site.site_id, "fixture_2days")
        self.assertEqual(self.site.drivers, ["tair", "swc"])
        self.assertEqual(self.site.baselines, ["reco_nt", "reco_dt"])
        self.assertEqual(rec.index[0], pd.Timestamp("2021-06-01 12:00"))
        self.assertTrue(np.isnan(rec["nee"].iloc[23]))
        self.assertEqual(rec["nee_qc"].iloc[23], 3)
        self.assertEqual(int(rec["night"].sum()), 30)

    def test_night_runs(self):
        self.assertEqual(find_night_runs(self.site), [(18, 34), (68, 82)])

    def test_missing_column(self):
        with self.assertRaises(SchemaError):
            parse_site_file(FIXTURE, column_map={"tair": "TA_MISSING"})

    def test_optional_baseline_may_be_absent(self):
        site = parse_site_file(FIXTURE, column_map={"reco_dt": "RECO_DT_MISSING"})
        self.assertEqual(site.baselines, ["reco_nt"])

    def test_extra_driver_and_ignored_field(self):
        site = parse_site_file(FIXTURE, column_map={"swc": None, "soil": "SWC_F_MDS_1"})
        self.assertEqual(site.drivers, ["tair", "soil"])

    def test_site_id_from_fluxnet_name(self):
        with tempfile.TemporaryDirectory() as tmp:
            filename = os.path.join(tmp, "FLX_DE-Fix_FLUXNET2015_FULLSET_HH.csv")
            with open(filename, "w") as f:
                f.write("\n".join(fixture_lines()) + "\n")
            self.assertEqual(parse_site_file(filename).site_id, "DE-Fix")

    def test_unparsable_timestamp_names_line(self):
        lines = fixture_lines()
        lines[3] = "2021XX010000" + lines[3][12:]
        with self.assertRaises(ParseError) as ctx:
            from_lines(lines)
        self.assertEqual(ctx.exception.line, 4)
        self.assertIn("line 4", str(ctx.exception))

    def test_timestamps_must_increase(self):
        lines = fixture_lines()
        lines[3], lines[4] = lines[4], lines[3]
        with self.assertRaises(ParseError) as ctx:
            from_lines(lines)
        self.assertEqual(ctx.exception.line, 5)

    def test_missing_day_record_is_inserted_as_gap(self):
        lines = fixture_lines()
        del lines[41]
        site = from_lines(lines)
        self.assertEqual(len(site), 96)
        self.assertTrue(np.isnan(site.records["nee"].iloc[40]))
        self.assertFalse(site.records["night"].iloc[40])

    def test_missing_night_record_keeps_the_night(self):
        lines = fixture_lines()
        del lines[26]
        site = from_lines(lines)
        self.assertTrue(site.records["night"].iloc[25])
        self.assertEqual(find_night_runs(site)[0], (18, 34))
        night = extract_nights(site, min_quality_fraction=0.7, harmonize=False)[0]
        self.assertAlmostEqual(night.nee[7], 2.7)
        self.assertEqual(len(extract_nights(site)), 0)

    def test_bad_hemisphere(self):
        with self.assertRaises(ConfigError):
            parse_site_file(FIXTURE, hemisphere="east")

    def test_write_and_parse_back(self):
        with tempfile.TemporaryDirectory() as tmp:
            filename = write_site_file(self.site, os.path.join(tmp, "FLX_XX-Fix_copy.csv"))
            again = parse_site_file(filename)
        self.assertEqual(again.site_id, "XX-Fix")
        pd.testing.assert_frame_equal(again.records, self.site.records)


class TestExtractNights(unittest.TestCase):
    def setUp(self):
        self.site = parse_site_file(FIXTURE)

    def test_quality_rule(self):
        nights = extract_nights(self.site)
        self.assertEqual(len(nights), 1)
        night = nights[0]
        self.assertEqual(night.date, date(2021, 6, 1))
        self.assertEqual(night.length, 16)
        self.assertAlmostEqual(night.quality_fraction, 0.8125)
        self.assertAlmostEqual(night.nee[5], 2.5)
        self.assertEqual(int(night.observed.sum()), 13)
        self.assertFalse(night.observed[5] or night.observed[9] or night.observed[10])
        self.assertTrue(np.all(np.isfinite(night.nee)))
        params = fit_normalization(nights, "tair")
        self.assertEqual((params.min, params.max), (11.25, 15.0))

    def test_relaxed_quality_harmonizes(self):
        nights = extract_nights(self.site, min_quality_fraction=0.7)
        self.assertEqual([n.date for n in nights], [date(2021, 6, 1), date(2021, 6, 2)])
        self.assertEqual([n.length for n in nights], [14, 14])
        assert_allclose([n.quality_fraction for n in nights], [0.8125, 11/14])
        self.assertAlmostEqual(nights[0].nee[0], 2.1)
        self.assertEqual(nights[0].timestamps[0], pd.Timestamp("2021-06-01 21:30"))
        params = fit_normalization(nights, "tair")
        assert_allclose((params.min, params.max), (11.4, 14.75))

    def test_unharmonized_nights_keep_length(self):
        nights = extract_nights(self.site, min_quality_fraction=0.7, harmonize=False)
        self.assertEqual([n.length for n in nights], [16, 14])

    def test_baselines_keep_missing_values(self):
        nights = extract_nights(self.site)
        assert_array_equal(nights[0].baselines["reco_nt"], 2.5)
        assert_array_equal(nights[0].baselines["reco_dt"], 2.6)

    def test_selected_drivers(self):
        night = extract_nights(self.site, drivers=["tair"])[0]
        self.assertEqual(list(night.drivers), ["tair"])
        with self.assertRaises(SchemaError):
            extract_nights(self.site, drivers=["vpd"])

    def test_bad_fraction(self):
        with self.assertRaises(ConfigError):
            extract_nights(self.site, min_quality_fraction=0.0)

    def test_repeatable_ordered_and_disjoint(self):
        site  = generate_synthetic_site(SyntheticSpec(n_days=25, start="2019-06-01", bad_night_every=4), seed=3)
        first = extract_nights(site)
        again = extract_nights(site)
        self.assertEqual([n.date for n in first], [n.date for n in again])
        for a, b in zip(first, again):
            assert_array_equal(a.nee, b.nee)
            assert_array_equal(a.observed, b.observed)
        self.assertEqual(len({n.length for n in first}), 1)
        for prev, nxt in zip(first, first[1:]):
            self.assertLess(prev.date, nxt.date)
            self.assertLess(prev.timestamps[-1], nxt.timestamps[0])
        trimmed = harmonize_nights(first)
        self.assertEqual([n.timestamps[0] for n in harmonize_nights(trimmed)], [n.timestamps[0] for n in trimmed])


class TestHarmonizeAndSeason(unittest.TestCase):
    def setUp(self):
        self.nights = extract_nights(parse_site_file(FIXTURE), min_quality_fraction=0.7, harmonize=False)

    def test_centre_trim(self):
        out = harmonize_nights(self.nights, 12)
        self.assertEqual([n.length for n in out], [12, 12])
        self.assertAlmostEqual(out[0].nee[0], 2.2)
        self.assertAlmostEqual(out[1].nee[0], 2.95)

    def test_shorter_nights_dropped(self):
        out = harmonize_nights(self.nights, 15)
        self.assertEqual([n.date for n in out], [date(2021, 6, 1)])

    def test_too_long(self):
        with self.assertRaises(ConfigError):
            harmonize_nights(self.nights, 17)

    def test_season(self):
        self.assertEqual(len(seasonal_filter(self.nights, "north")), 2)
        self.assertEqual(len(seasonal_filter(self.nights, "south")), 0)
        self.assertEqual(len(seasonal_filter(self.nights, "south", months=[6])), 2)
        with self.assertRaises(ConfigError):
            seasonal_filter(self.nights, "west")


class TestNormalization(unittest.TestCase):
    def test_apply_and_invert(self):
        p = NormalizationParams("tair", 10.0, 20.0)
        assert_allclose(apply_normalization(p, [10.0, 15.0, 25.0]), [0.0, 0.5, 1.5])
        assert_allclose(invert_normalization(p, apply_normalization(p, [12.3, -4.0])), [12.3, -4.0])

    def test_degenerate_range(self):
        p = NormalizationParams("swc", 30.0, 30.0)
        assert_array_equal(apply_normalization(p, [30.0, 31.0]), [0.0, 0.0])

    def test_dict_round_trip(self):
        p = NormalizationParams("tair", 11.4, 14.75)
        self.assertEqual(NormalizationParams.from_dict(p.to_dict()), p)


if __name__ == "__main__":
    unittest.main()
