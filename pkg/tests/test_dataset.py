import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from fairaudit.dataset import (ColumnSchema, Dataset, drop_protected, load_csv, normalize, read_schema,
                               representativeness_test, save_csv, split, write_schema)
from fairaudit.errors import (BadReference, BadValue, ConstantColumn, ContinuousProtected, EmptyData,
                              MultipleOutcomes, NotNumeric, SchemaMismatch, TooFewRows, UnknownAttribute)

SCHEMA = [
    {"name": "gender", "role": "protected", "dtype": "categorical"},
    {"name": "skill", "role": "feature", "dtype": "numeric"},
    {"name": "hired", "role": "outcome", "dtype": "binary"},
]

CSV_6 = """gender,skill,hired
F,0.5,1
M,0.2,0
F,0.9,1
M,0.7,1
F,0.1,0
M,0.4,0
"""


def write(tmp_path, text, name="data.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def small(values, extra=None):
    cols = {"x": values, "y": [i % 2 for i in range(len(values))]}
    schema = [{"name": "x", "role": "feature", "dtype": "numeric"},
              {"name": "y", "role": "outcome", "dtype": "binary"}]
    if extra:
        schema.append(extra[0])
        cols[extra[0]["name"]] = extra[1]
    return Dataset.from_columns(schema, cols)


def counts_dataset(counts):
    g = [k for k, v in counts.items() for _ in range(v)]
    return Dataset.from_columns(
        [{"name": "g", "role": "protected", "dtype": "categorical"},
         {"name": "y", "role": "outcome", "dtype": "binary"}],
        {"g": g, "y": [i % 2 for i in range(len(g))]})


class TestLoad:
    def test_six_rows_stable_fingerprint(self, tmp_path):
        p = write(tmp_path, CSV_6)
        a = load_csv(p, SCHEMA)
        b = load_csv(p, SCHEMA)
        assert a.n_rows == 6
        assert a.fingerprint == b.fingerprint
        assert len(a.fingerprint) == 64

    def test_missing_outcome_row_dropped(self, tmp_path):
        p = write(tmp_path, CSV_6.replace("M,0.2,0", "M,0.2,"))
        ds = load_csv(p, SCHEMA)
        assert ds.n_rows == 5
        assert ds.log["load"]["dropped_rows"] == 1
        assert ds.log["load"]["dropped_by_column"] == {"hired": 1}

    def test_missing_protected_row_dropped(self, tmp_path):
        p = write(tmp_path, CSV_6.replace("F,0.9,1", "NA,0.9,1"))
        assert load_csv(p, SCHEMA).n_rows == 5

    def test_missing_feature_imputed_with_mean(self, tmp_path):
        p = write(tmp_path, CSV_6.replace("M,0.2,0", "M,,0"))
        ds = load_csv(p, SCHEMA)
        assert ds.n_rows == 6
        assert ds.column("skill")[1] == pytest.approx(np.mean([0.5, 0.9, 0.7, 0.1, 0.4]))
        assert ds.log["load"]["imputed"] == {"skill": 1}

    def test_missing_feature_drop_policy(self, tmp_path):
        p = write(tmp_path, CSV_6.replace("M,0.2,0", "M,,0"))
        assert load_csv(p, SCHEMA, missing_policy="drop").n_rows == 5

    def test_schema_names_outcome_absent_from_csv(self, tmp_path):
        p = write(tmp_path, "gender,skill\nF,0.5\n")
        with pytest.raises(SchemaMismatch):
            load_csv(p, SCHEMA)

    def test_unparseable_cell(self, tmp_path):
        p = write(tmp_path, CSV_6.replace("0.7", "seven"))
        with pytest.raises(BadValue):
            load_csv(p, SCHEMA)

    def test_binary_outcome_must_be_01(self, tmp_path):
        p = write(tmp_path, CSV_6.replace("M,0.7,1", "M,0.7,2"))
        with pytest.raises(BadValue):
            load_csv(p, SCHEMA)

    def test_no_usable_rows(self, tmp_path):
        p = write(tmp_path, "gender,skill,hired\nF,0.5,\n")
        with pytest.raises(EmptyData):
            load_csv(p, SCHEMA)

    def test_two_outcomes(self, tmp_path):
        schema = SCHEMA + [{"name": "other", "role": "outcome", "dtype": "binary"}]
        p = write(tmp_path, "gender,skill,hired,other\nF,0.5,1,0\n")
        with pytest.raises(MultipleOutcomes):
            load_csv(p, schema)

    def test_numeric_protected_rejected(self):
        schema = [dict(SCHEMA[0], dtype="numeric")] + SCHEMA[1:]
        with pytest.raises(ContinuousProtected):
            Dataset.from_columns(schema, {"gender": [1.0], "skill": [0.1], "hired": [1]})

    def test_schema_sidecar(self, tmp_path):
        p = write(tmp_path, CSV_6)
        sp = tmp_path / "s.json"
        write_schema([ColumnSchema.from_dict(c) for c in SCHEMA], sp)
        assert load_csv(p, str(sp)) == load_csv(p, SCHEMA)
        assert [c.to_dict() for c in read_schema(sp)] == SCHEMA

    def test_unknown_schema_key(self):
        with pytest.raises(SchemaMismatch):
            ColumnSchema.from_dict({"name": "a", "role": "feature", "dtype": "numeric", "unit": "kg"})

    def test_round_trip(self, tmp_path):
        ds = load_csv(write(tmp_path, CSV_6), SCHEMA)
        out = tmp_path / "out.csv"
        save_csv(ds, out)
        assert load_csv(out, SCHEMA).fingerprint == ds.fingerprint


class TestNormalize:
    def test_minmax(self):
        assert normalize(small([2.0, 4.0, 6.0]), "minmax").column("x").tolist() == [0.0, 0.5, 1.0]

    def test_zscore(self):
        z = normalize(small([2.0, 4.0, 6.0]), "zscore").column("x")
        np.testing.assert_allclose(z, [-math.sqrt(1.5), 0.0, math.sqrt(1.5)], atol=1e-12)
        assert z[2] == pytest.approx(1.22474, abs=1e-5)

    def test_constant(self):
        with pytest.raises(ConstantColumn):
            normalize(small([5.0, 5.0, 5.0]), "minmax")
        with pytest.raises(ConstantColumn):
            normalize(small([5.0, 5.0, 5.0]), "zscore")

    def test_not_numeric(self):
        ds = small([1.0, 2.0], ({"name": "c", "role": "feature", "dtype": "categorical"}, ["a", "b"]))
        with pytest.raises(NotNumeric):
            normalize(ds, "minmax", ["c"])

    def test_input_untouched(self):
        ds = small([2.0, 4.0, 6.0])
        normalize(ds, "minmax")
        assert ds.column("x").tolist() == [2.0, 4.0, 6.0]

    @given(st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=50).filter(lambda v: max(v) > min(v)))
    def test_minmax_idempotent(self, values):
        once = normalize(small(values), "minmax")
        twice = normalize(once, "minmax")
        assert once.column("x").tolist() == twice.column("x").tolist()

    @given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=50).filter(lambda v: np.std(v) > 1e-3))
    def test_zscore_moments(self, values):
        z = normalize(small(values), "zscore").column("x")
        assert abs(z.mean()) < 1e-9
        assert abs(z.std() - 1) < 1e-9


class TestRepresentativeness:
    def test_exact_match(self):
        r = representativeness_test(counts_dataset({"M": 50, "F": 50}), "g")
        assert (r.statistic, r.p_value, r.verdict) == (0.0, 1.0, "representative")

    def test_skewed(self):
        r = representativeness_test(counts_dataset({"M": 90, "F": 10}), "g", alpha=0.05)
        assert r.statistic == pytest.approx(64.0, abs=1e-9)
        # independent p-value: chi-square with 1 dof equals a squared standard normal
        assert r.p_value == pytest.approx(2 * stats.norm.sf(8.0), rel=1e-9)
        assert r.verdict == "skewed"

    def test_insufficient(self):
        assert representativeness_test(counts_dataset({"M": 3, "F": 2}), "g").verdict == "insufficient"

    def test_reference_equal_to_observed_gives_zero(self):
        r = representativeness_test(counts_dataset({"a": 7, "b": 13, "c": 30}), "g",
                                    {"a": 7 / 50, "b": 13 / 50, "c": 30 / 50})
        assert r.statistic == 0.0

    def test_bad_reference(self):
        ds = counts_dataset({"M": 5, "F": 5})
        with pytest.raises(BadReference):
            representativeness_test(ds, "g", {"M": 0.7, "F": 0.7})
        with pytest.raises(BadReference):
            representativeness_test(ds, "g", {"M": 1.2, "F": -0.2})

    def test_unknown_attribute(self):
        with pytest.raises(UnknownAttribute):
            representativeness_test(counts_dataset({"M": 5, "F": 5}), "race")

    def test_counts_cover_observed(self):
        r = representativeness_test(counts_dataset({"a": 20, "b": 30}), "g")
        assert r.category_counts == {"a": 20, "b": 30}


def hundred_rows():
    rng = np.random.default_rng(0)
    return Dataset.from_columns(SCHEMA, {"gender": rng.choice(["F", "M"], 100), "skill": rng.random(100),
                                         "hired": rng.integers(0, 2, 100)})


def rows(ds):
    return sorted(zip(*[ds.column(n).tolist() for n in ds.names]))


class TestSplit:
    def test_sizes_and_determinism(self):
        ds = hundred_rows()
        tr, te = split(ds, 0.8, 7)
        assert (tr.n_rows, te.n_rows) == (80, 20)
        tr2, te2 = split(ds, 0.8, 7)
        assert tr == tr2 and te == te2

    def test_partition(self):
        ds = hundred_rows()
        tr, te = split(ds, 0.7, 3)
        assert sorted(rows(tr) + rows(te)) == rows(ds)

    def test_strata_in_both_halves(self):
        tr, te = split(hundred_rows(), 0.8, 1)
        for part in (tr, te):
            keys = set(zip(part.labels.tolist(), part.group_labels("gender").tolist()))
            assert len(keys) == 4

    def test_singleton_stratum_goes_to_train(self):
        ds = Dataset.from_columns(SCHEMA, {"gender": ["F"] * 5 + ["M"], "skill": [0.1] * 6,
                                           "hired": [0, 1, 0, 1, 0, 1]})
        tr, te = split(ds, 0.5, 0)
        assert "M" in tr.group_labels("gender").tolist()
        assert "M" not in te.group_labels("gender").tolist()
        assert tr.log["split"]["warnings"]

    @pytest.mark.parametrize("fraction", [0.0, 1.0])
    def test_fraction_bounds(self, fraction):
        with pytest.raises(TooFewRows):
            split(hundred_rows(), fraction, 0)


class TestDropProtected:
    def test_moves_to_side_table(self):
        ds = Dataset.from_columns(
            SCHEMA + [{"name": f"f{i}", "role": "feature", "dtype": "numeric"} for i in range(2)],
            {"gender": ["F", "M"], "skill": [0.1, 0.2], "hired": [0, 1], "f0": [1.0, 2.0], "f1": [3.0, 4.0]})
        d = drop_protected(ds)
        assert d.feature_names == ["skill", "f0", "f1"]
        assert "gender" not in d.names
        assert d.group_labels("gender").tolist() == ["F", "M"]
        assert len(d.side_columns["gender"]) == d.n_rows

    def test_identity_without_protected(self):
        ds = small([1.0, 2.0])
        assert drop_protected(ds) is ds


@settings(max_examples=30)
@given(st.lists(st.tuples(st.sampled_from(["F", "M"]), st.floats(-5, 5), st.integers(0, 1)),
                min_size=1, max_size=30))
def test_csv_round_trip_property(tmp_path_factory, data):
    ds = Dataset.from_columns(SCHEMA, {"gender": [d[0] for d in data], "skill": [d[1] for d in data],
                                       "hired": [d[2] for d in data]})
    p = tmp_path_factory.mktemp("rt") / "d.csv"
    save_csv(ds, p)
    assert load_csv(p, SCHEMA).fingerprint == ds.fingerprint
