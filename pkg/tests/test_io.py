"""Tests for the plain-text formats: matrix files, grid data, configs, CSV."""

import numpy as np
import pytest

from envma import matio
from envma import matrixcore as mc
from envma.errors import ParseError
from envma.solver import GridSpec, ScalarField


class TestMatrixFormat:
    def test_sym_parse(self):
        M = matio.parse_matrix_text("sym 2\n1 0.5\n0.5 2\n")
        assert np.allclose(M, [[1.0, 0.5], [0.5, 2.0]])

    def test_sym_round_trip(self):
        rng = np.random.default_rng(3)
        S = rng.uniform(-5, 5, size=(4, 4))
        S = (S + S.T) / 2
        M = matio.parse_matrix_text(matio.format_matrix_text(S))
        assert np.array_equal(M, S)

    def test_herm_parse_embeds(self):
        text = "herm 2\n1,0 0,1\n0,-1 4,0\n"
        M = matio.parse_matrix_text(text)
        H = mc.HermitianMatrix(np.array([[1.0, 0.0], [0.0, 4.0]]),
                               np.array([[0.0, 1.0], [-1.0, 0.0]]))
        assert np.array_equal(M, mc.embed(H))

    def test_row_length_diagnostic(self):
        with pytest.raises(ParseError, match="row 2: expected 2 entries"):
            matio.parse_matrix_text("sym 2\n1 0\n0\n")

    def test_bad_number_diagnostic(self):
        with pytest.raises(ParseError, match="row 1, column 2"):
            matio.parse_matrix_text("sym 2\n1 zork\n0 1\n")

    def test_bad_header(self):
        with pytest.raises(ParseError, match="line 1"):
            matio.parse_matrix_text("mat 2\n1 0\n0 1\n")

    def test_missing_rows(self):
        with pytest.raises(ParseError, match="expected 2 rows"):
            matio.parse_matrix_text("sym 2\n1 0\n")

    def test_odd_sym_dimension_is_validation_error(self):
        with pytest.raises(ValueError, match="even"):
            matio.parse_matrix_text("sym 3\n1 0 0\n0 1 0\n0 0 1\n")

    def test_herm_pair_diagnostic(self):
        with pytest.raises(ParseError, match="row 1, column 1"):
            matio.parse_matrix_text("herm 1\n1;0\n")


class TestGridValues:
    def test_parse(self):
        vals = matio.parse_grid_values("1.0\n2.0\n# comment\n3.0\n", 3)
        assert np.array_equal(vals, [1.0, 2.0, 3.0])

    def test_count_mismatch(self):
        with pytest.raises(ParseError, match="expected 4 grid values"):
            matio.parse_grid_values("1\n2\n", 4)

    def test_bad_line(self):
        with pytest.raises(ParseError, match="line 2"):
            matio.parse_grid_values("1\nxyz\n", 2)


class TestConfig:
    def test_parse_with_comments(self):
        cfg = matio.parse_config("# hi\nn = 1\nlo = -1,-1  # corners\n")
        assert cfg == {"n": "1", "lo": "-1,-1"}

    def test_duplicate_key(self):
        with pytest.raises(ParseError, match="duplicate"):
            matio.parse_config("a = 1\na = 2\n")

    def test_missing_equals(self):
        with pytest.raises(ParseError, match="line 1"):
            matio.parse_config("just some words\n")

    def test_view_missing_key_named(self):
        view = matio.ConfigView({"n": "1"}, {"n", "pointsPerAxis"})
        with pytest.raises(ParseError, match="pointsPerAxis"):
            view.get_int("pointsPerAxis")

    def test_view_rejects_unknown_keys(self):
        with pytest.raises(ParseError, match="unknown config keys"):
            matio.ConfigView({"typo": "1"}, {"n"})

    def test_typed_accessors(self):
        view = matio.ConfigView(
            {"n": "2", "tol": "1e-9", "lo": "-1,0.5", "refinements": "9,17"},
            {"n", "tol", "lo", "refinements"})
        assert view.get_int("n") == 2
        assert view.get_float("tol") == 1e-9
        assert view.get_floats("lo") == [-1.0, 0.5]
        assert view.get_ints("refinements") == [9, 17]
        assert view.get_int("missing", 7) == 7

    def test_bad_number_reports_key(self):
        view = matio.ConfigView({"tol": "abc"}, {"tol"})
        with pytest.raises(ParseError, match="tol"):
            view.get_float("tol")


class TestCsvAndReport:
    def test_field_csv_shape_and_precision(self):
        grid = GridSpec(1, (0.0, 0.0), (1.0, 1.0), 5)
        f = ScalarField.from_function(grid, lambda x, y: x / 3.0 + y)
        text = matio.field_csv(f)
        lines = text.strip().split("\n")
        assert lines[0] == "x0,x1,value"
        assert len(lines) == 1 + 25
        # 17 significant digits survive a round trip
        x0, x1, v = (float(tok) for tok in lines[7].split(","))
        assert v == f.values[1, 1]

    def test_fmt_round_trips(self):
        for v in (1.0 / 3.0, 2.0, -1.7e-12, 3.9999999999999996):
            assert float(matio.fmt(v)) == v

    def test_convergence_csv(self):
        from envma.solver import ConvergenceRow
        rows = [ConvergenceRow(9, 0.25, 1e-3, None), ConvergenceRow(17, 0.125, 2.5e-4, 2.0)]
        text = matio.convergence_csv(rows)
        lines = text.strip().split("\n")
        assert lines[0] == "points_per_axis,h,max_error,observed_order"
        assert lines[1].endswith(",")
        assert lines[2].endswith(",2")
