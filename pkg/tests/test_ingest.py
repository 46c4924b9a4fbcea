import json
import warnings

import numpy as np
import pytest

from surprisal.core import validate_timeline
from surprisal.errors import IngestError
from surprisal.ingest import (
    IngestConfig,
    ingest,
    ingest_count_table,
    ingest_numeric_table,
    ingest_text_corpus,
    load_stopwords,
    read_corpus_dir,
    read_corpus_jsonl,
    read_labels,
    tokenize,
    write_labels,
)


def csv(tmp_path, text, name="in.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def dense(t):
    return np.vstack([b.to_dense(t.n_features) for b in t.bins])


# --- numeric tables --------------------------------------------------------

def test_minmax_two_by_two(tmp_path):
    res = ingest_numeric_table(csv(tmp_path, "x,y\n1,3\n3,1\n"))
    assert res.timeline.vocabulary.names == ("x", "y")
    assert dense(res.timeline).tolist() == [[0.0, 1.0], [1.0, 0.0]]


def test_constant_column_dropped_with_warning(tmp_path):
    with pytest.warns(UserWarning, match="const"):
        res = ingest_numeric_table(csv(tmp_path, "x,const,y\n1,5,2\n2,5,1\n3,5,3\n"))
    assert res.dropped_columns == ("const",)
    assert res.timeline.vocabulary.names == ("x", "y")


def test_identical_rows_error(tmp_path):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        with pytest.raises(IngestError, match="constant"):
            ingest_numeric_table(csv(tmp_path, "x,y\n1,2\n1,2\n"))


def test_row_at_every_minimum_errors(tmp_path):
    with pytest.raises(IngestError) as info:
        ingest_numeric_table(csv(tmp_path, "x,y\n0,0\n1,1\n"))
    assert info.value.row == 0


def test_rowsum_mode(tmp_path):
    cfg = IngestConfig("numeric_table", normalization="rowsum")
    res = ingest_numeric_table(csv(tmp_path, "x,y,z\n1,1,2\n0,3,1\n"), cfg)
    np.testing.assert_allclose(dense(res.timeline), [[0.25, 0.25, 0.5], [0, 0.75, 0.25]])


def test_rowsum_rejects_negative(tmp_path):
    cfg = IngestConfig("numeric_table", normalization="rowsum")
    with pytest.raises(IngestError) as info:
        ingest_numeric_table(csv(tmp_path, "x,y\n1,1\n-1,3\n"), cfg)
    assert (info.value.row, info.value.column) == (1, "x")


def test_label_and_bin_label_columns(tmp_path):
    cfg = IngestConfig("numeric_table", label_column="Normal/Attack", bin_label_column="ts")
    text = "ts,a,b,Normal/Attack\nt0,1,2,Normal\nt1,2,1,A ttack\nt2,3,3,Attack\n"
    res = ingest_numeric_table(csv(tmp_path, text), cfg)
    assert res.labels.tolist() == [0, 1, 1]
    assert res.timeline.labels == ("t0", "t1", "t2")
    assert res.timeline.vocabulary.names == ("a", "b")


def test_non_numeric_cell_reports_position(tmp_path):
    with pytest.raises(IngestError) as info:
        ingest_numeric_table(csv(tmp_path, "x,y\n1,2\n3,oops\n"))
    assert (info.value.row, info.value.column) == (1, "y")


def test_bad_label_reports_position(tmp_path):
    cfg = IngestConfig("numeric_table", label_column="y")
    with pytest.raises(IngestError) as info:
        ingest_numeric_table(csv(tmp_path, "a,b,y\n1,2,0\n2,1,maybe\n"), cfg)
    assert (info.value.row, info.value.column) == (1, "y")


def test_missing_column(tmp_path):
    with pytest.raises(IngestError, match="missing column"):
        ingest_numeric_table(csv(tmp_path, "a,b\n1,2\n2,1\n"),
                             IngestConfig("numeric_table", label_column="nope"))


def test_unused_feature_left_out_of_vocabulary(tmp_path):
    cfg = IngestConfig("numeric_table", normalization="rowsum")
    res = ingest_numeric_table(csv(tmp_path, "a,b,c\n1,0,1\n2,0,1\n"), cfg)
    assert res.timeline.vocabulary.names == ("a", "c")


# --- count tables ----------------------------------------------------------

def test_counts_with_denominator(tmp_path):
    cfg = IngestConfig("count_table", denominator_column="population", bin_label_column="year")
    res = ingest_count_table(csv(tmp_path, "year,x,y,population\n1990,10,30,100\n"), cfg)
    np.testing.assert_allclose(dense(res.timeline), [[0.25, 0.75]], rtol=1e-15)
    assert res.timeline.labels == ("1990",)


def test_single_nonzero_cause_is_unit_mass(tmp_path):
    res = ingest_count_table(csv(tmp_path, "x,y\n0,7\n"))
    assert res.timeline.bins[0].weights.tolist() == [1.0]


def test_negative_count(tmp_path):
    with pytest.raises(IngestError) as info:
        ingest_count_table(csv(tmp_path, "x,y\n1,-2\n"))
    assert (info.value.row, info.value.column) == (0, "y")


def test_zero_denominator(tmp_path):
    cfg = IngestConfig("count_table", denominator_column="pop")
    with pytest.raises(IngestError) as info:
        ingest_count_table(csv(tmp_path, "x,y,pop\n1,2,10\n1,2,0\n"), cfg)
    assert info.value.row == 1


def test_count_table_config_needs_denominator_or_rowsum():
    with pytest.raises(IngestError):
        IngestConfig("count_table", normalization="minmax_then_rowsum")


def test_quoted_fields(tmp_path):
    res = ingest_count_table(csv(tmp_path, '"cause, a","b"\n"3","1"\n'))
    assert res.timeline.vocabulary.names == ("cause, a", "b")


def test_malformed_csv(tmp_path):
    with pytest.raises(IngestError):
        ingest_count_table(csv(tmp_path, 'a,b\n1,2\n"3,4\n5,6,7\n'))


# --- text ------------------------------------------------------------------

def test_cat_sentence():
    res = ingest_text_corpus({"d": "the cat saw the cat"}, stopwords={"the"})
    t = res.timeline
    got = {t.vocabulary.names[i]: w for i, w in zip(t.bins[0].ids, t.bins[0].weights)}
    assert got == pytest.approx({"cat": 2 / 3, "saw": 1 / 3})


def test_single_word_unit_mass():
    t = ingest_text_corpus({"x": "Tonight!"}).timeline
    assert t.vocabulary.names == ("tonight",) and t.bins[0].weights.tolist() == [1.0]


def test_tokenizer_rules():
    assert tokenize("Don't stop: 1913's U.S. café…naïve") == ["don't", "stop", "s", "u", "s",
                                                            "café", "naïve"]
    assert tokenize("rock’n’roll 'quoted'") == ["rock'n'roll", "quoted"]


def test_pre_tokenized_documents_counted_verbatim():
    t = ingest_text_corpus({"a": [["The", "the", "x"]]}, stopwords={"the"}).timeline
    assert t.vocabulary.names == ("The", "the", "x")


def test_empty_bin_after_filtering():
    with pytest.raises(IngestError, match="empty"):
        ingest_text_corpus({"a": "the the", "b": "cat"}, stopwords={"the"})


def test_vocabulary_first_seen_order():
    t = ingest_text_corpus({"1": "b a", "2": "c a"}).timeline
    assert t.vocabulary.names == ("b", "a", "c")
    assert t.labels == ("1", "2")


def test_stopword_file(tmp_path):
    p = tmp_path / "stop.txt"
    p.write_text("# comment\nThe\n\nof\n", encoding="utf-8")
    assert load_stopwords(p) == {"the", "of"}
    t = ingest_text_corpus({"x": "The state of the union"},
                           IngestConfig("text_corpus", stopword_path=str(p))).timeline
    assert set(t.vocabulary.names) == {"state", "union"}


def test_corpus_dir_numeric_order(tmp_path):
    for year, text in [("1913", "tonight"), ("790", "gentlemen"), ("2001", "terror")]:
        (tmp_path / f"{year}.txt").write_text(text, encoding="utf-8")
    docs = read_corpus_dir(tmp_path)
    assert list(docs) == ["790", "1913", "2001"]
    res = ingest(tmp_path, IngestConfig("text_corpus"))
    assert res.timeline.labels == ("790", "1913", "2001")


def test_corpus_jsonl(tmp_path):
    p = tmp_path / "c.jsonl"
    lines = [{"label": "a", "text": "x y"}, {"label": "b", "tokens": ["z"]},
             {"label": "a", "text": "x"}]
    p.write_text("\n".join(json.dumps(r) for r in lines) + "\n", encoding="utf-8")
    docs = read_corpus_jsonl(p)
    assert docs == {"a": ["x y", "x"], "b": [["z"]]}
    t = ingest(p, IngestConfig("text_corpus")).timeline
    np.testing.assert_allclose(dense(t), [[2 / 3, 1 / 3, 0], [0, 0, 1]])


def test_corpus_jsonl_bad_record(tmp_path):
    p = tmp_path / "c.jsonl"
    p.write_text('{"label": "a"}\n', encoding="utf-8")
    with pytest.raises(IngestError):
        read_corpus_jsonl(p)


# --- shared properties -----------------------------------------------------

def test_ingest_is_deterministic_and_valid(tmp_path, rng):
    x = rng.integers(0, 50, size=(40, 8))
    x[:, 0] += 1  # no empty rows
    body = "\n".join(",".join(map(str, r)) for r in x)
    path = csv(tmp_path, ",".join(f"c{i}" for i in range(8)) + "\n" + body + "\n")
    for cfg in (IngestConfig("numeric_table"), IngestConfig("count_table", normalization="rowsum")):
        a, b = ingest(path, cfg).timeline, ingest(path, cfg).timeline
        assert validate_timeline(a) == []
        assert a.vocabulary.names == b.vocabulary.names
        assert all(p == q for p, q in zip(a.bins, b.bins))
        for i in range(a.n_features):
            assert any(i in bin.ids for bin in a.bins)


def test_labels_roundtrip(tmp_path):
    path = tmp_path / "labels.csv"
    write_labels([0, 1, 1, 0], path)
    assert read_labels(path).tolist() == [0, 1, 1, 0]


def test_labels_reordered_and_gaps(tmp_path):
    assert read_labels(csv(tmp_path, "bin_index,label\n1,1\n0,0\n")).tolist() == [0, 1]
    with pytest.raises(IngestError):
        read_labels(csv(tmp_path, "bin_index,label\n0,1\n2,0\n", "gap.csv"))
