import struct

import numpy as np
import pytest

from nc_coreset import errors
from nc_coreset.embedding_io import (
    EmbeddingRecord,
    EmbeddingTable,
    Label,
    ManifestRow,
    Rule,
    ScoreRow,
    ScoreTable,
    SelectionManifest,
    load_table,
    read_manifest,
    read_score_table,
    store_table,
    write_manifest,
    write_score_table,
)

from conftest import make_table


def random_table(rng, n=20, dim=5) -> EmbeddingTable:
    records = []
    for i in range(n):
        label = Label(int(rng.integers(2)))
        algo = 0 if label is Label.REAL else int(rng.integers(1, 5))
        records.append(
            EmbeddingRecord(f"id_{i:03d}", label, algo, rng.standard_normal(dim))
        )
    return EmbeddingTable(dimension=dim, records=tuple(records))


def test_round_trip_identity(tmp_path, rng):
    table = random_table(rng)
    path = tmp_path / "t.nceb"
    store_table(table, path)
    assert load_table(path) == table


def test_round_trip_preserves_float_bits(tmp_path):
    # values chosen to be non-representable exactly in shorter forms
    table = make_table([[0.1, 1 / 3]], [[np.pi, 2 / 7]])
    path = tmp_path / "t.nceb"
    store_table(table, path)
    loaded = load_table(path)
    for got, want in zip(loaded.records, table.records):
        assert got.embedding.tobytes() == want.embedding.tobytes()


def test_store_is_deterministic(tmp_path, rng):
    table = random_table(rng)
    store_table(table, tmp_path / "a.nceb")
    store_table(table, tmp_path / "b.nceb")
    assert (tmp_path / "a.nceb").read_bytes() == (tmp_path / "b.nceb").read_bytes()


def test_store_load_store_idempotent(tmp_path, rng):
    table = random_table(rng)
    store_table(table, tmp_path / "a.nceb")
    store_table(load_table(tmp_path / "a.nceb"), tmp_path / "b.nceb")
    assert (tmp_path / "a.nceb").read_bytes() == (tmp_path / "b.nceb").read_bytes()


def test_empty_table_round_trip(tmp_path):
    table = EmbeddingTable(dimension=4, records=())
    path = tmp_path / "empty.nceb"
    store_table(table, path)
    loaded = load_table(path)
    assert loaded.dimension == 4
    assert len(loaded) == 0


def test_record_order_preserved(tmp_path):
    table = make_table([[3.0], [1.0]], [[2.0]])
    path = tmp_path / "t.nceb"
    store_table(table, path)
    assert [r.sample_id for r in load_table(path).records] == [
        "real_0000",
        "real_0001",
        "fake_0000",
    ]


def test_imbalanced_dataset_scale_counts_per_label(tmp_path):
    # 2,580 real and 22,800 fake records survive a round trip with exact counts
    dim = 2
    records = [
        EmbeddingRecord(f"r{i}", Label.REAL, 0, [0.0, 0.0]) for i in range(2580)
    ]
    records += [
        EmbeddingRecord(f"f{i}", Label.FAKE, 1 + i % 6, [1.0, 1.0]) for i in range(22800)
    ]
    table = EmbeddingTable(dimension=dim, records=tuple(records))
    path = tmp_path / "big.nceb"
    store_table(table, path)
    loaded = load_table(path)
    assert loaded.count(Label.REAL) == 2580
    assert loaded.count(Label.FAKE) == 22800


def _valid_file_bytes(dim=3, ids=("a", "b")) -> bytes:
    head = struct.pack("<4sIIQ", b"NCEB", 1, dim, len(ids))
    body = b""
    for i, sid in enumerate(ids):
        body += struct.pack("<BHI", i % 2, 0 if i % 2 == 0 else 7, len(sid))
        body += sid.encode()
        body += np.arange(dim, dtype="<f4").tobytes()
    return head + body


def test_load_rejects_bad_magic(tmp_path):
    p = tmp_path / "x.nceb"
    p.write_bytes(b"XXXX" + _valid_file_bytes()[4:])
    with pytest.raises(errors.BadMagic):
        load_table(p)


def test_load_rejects_wrong_version(tmp_path):
    p = tmp_path / "x.nceb"
    blob = bytearray(_valid_file_bytes())
    blob[4:8] = struct.pack("<I", 2)
    p.write_bytes(bytes(blob))
    with pytest.raises(errors.VersionMismatch):
        load_table(p)


def test_load_rejects_truncated_header(tmp_path):
    p = tmp_path / "x.nceb"
    p.write_bytes(_valid_file_bytes()[:10])
    with pytest.raises(errors.TruncatedFile):
        load_table(p)


def test_load_rejects_short_record_vector(tmp_path):
    # header says dimension 8 but the single record carries 7 floats
    p = tmp_path / "x.nceb"
    head = struct.pack("<4sIIQ", b"NCEB", 1, 8, 1)
    rec = struct.pack("<BHI", 0, 0, 1) + b"a" + np.zeros(7, dtype="<f4").tobytes()
    p.write_bytes(head + rec)
    with pytest.raises(errors.DimensionMismatch):
        load_table(p)


def test_load_rejects_trailing_bytes(tmp_path):
    p = tmp_path / "x.nceb"
    p.write_bytes(_valid_file_bytes() + b"\x00")
    with pytest.raises(errors.TruncatedFile):
        load_table(p)


def test_load_rejects_nan_embedding(tmp_path):
    p = tmp_path / "x.nceb"
    head = struct.pack("<4sIIQ", b"NCEB", 1, 2, 1)
    vec = np.array([1.0, np.nan], dtype="<f4").tobytes()
    p.write_bytes(head + struct.pack("<BHI", 0, 0, 1) + b"a" + vec)
    with pytest.raises(errors.NonFiniteValue):
        load_table(p)


def test_load_rejects_duplicate_ids(tmp_path):
    p = tmp_path / "x.nceb"
    p.write_bytes(_valid_file_bytes(ids=("a", "a")))
    with pytest.raises(errors.DuplicateSampleId):
        load_table(p)


def test_load_rejects_real_with_algorithm_id(tmp_path):
    p = tmp_path / "x.nceb"
    head = struct.pack("<4sIIQ", b"NCEB", 1, 1, 1)
    rec = struct.pack("<BHI", 0, 3, 1) + b"a" + np.zeros(1, dtype="<f4").tobytes()
    p.write_bytes(head + rec)
    with pytest.raises(errors.InvariantViolation):
        load_table(p)


def test_load_fuzzed_truncations_always_named_error(tmp_path, rng):
    blob = _valid_file_bytes(dim=4, ids=("alpha", "beta", "g"))
    p = tmp_path / "x.nceb"
    for cut in range(len(blob)):
        p.write_bytes(blob[:cut])
        with pytest.raises(
            (
                errors.BadMagic,
                errors.TruncatedFile,
                errors.DimensionMismatch,
                errors.VersionMismatch,
            )
        ):
            load_table(p)


def test_store_rejects_invariant_violations(tmp_path):
    bad_dim = EmbeddingTable(
        dimension=3, records=(EmbeddingRecord("a", Label.REAL, 0, [1.0]),)
    )
    with pytest.raises(errors.DimensionMismatch):
        store_table(bad_dim, tmp_path / "x.nceb")

    dup = EmbeddingTable(
        dimension=1,
        records=(
            EmbeddingRecord("a", Label.REAL, 0, [1.0]),
            EmbeddingRecord("a", Label.FAKE, 1, [2.0]),
        ),
    )
    with pytest.raises(errors.DuplicateSampleId):
        store_table(dup, tmp_path / "x.nceb")

    real_tagged = EmbeddingTable(
        dimension=1, records=(EmbeddingRecord("a", Label.REAL, 5, [1.0]),)
    )
    with pytest.raises(errors.InvariantViolation):
        store_table(real_tagged, tmp_path / "x.nceb")


# --- CSV surfaces -------------------------------------------------------------


def test_score_csv_round_trip(tmp_path):
    table = ScoreTable(
        (
            ScoreRow("id1", Label.REAL, 0.2),
            ScoreRow("id2", Label.FAKE, 0.875),
        )
    )
    path = tmp_path / "s.csv"
    write_score_table(table, path)
    assert read_score_table(path) == table


def test_score_csv_parses_simple_row(tmp_path):
    path = tmp_path / "s.csv"
    path.write_text("sample_id,label,score\nid1,real,0.2\n")
    table = read_score_table(path)
    assert table.rows[0] == ScoreRow("id1", Label.REAL, 0.2)


def test_score_csv_rejects_unparsable_float(tmp_path):
    path = tmp_path / "s.csv"
    path.write_text("sample_id,label,score\nid1,real,abc\n")
    with pytest.raises(errors.MalformedRow):
        read_score_table(path)


def test_score_csv_rejects_unknown_label(tmp_path):
    path = tmp_path / "s.csv"
    path.write_text("sample_id,label,score\nid1,Real,0.2\n")
    with pytest.raises(errors.UnknownLabelToken):
        read_score_table(path)


def test_score_csv_rejects_wrong_column_count(tmp_path):
    path = tmp_path / "s.csv"
    path.write_text("sample_id,label,score\nid1,real\n")
    with pytest.raises(errors.MalformedRow):
        read_score_table(path)


def test_score_csv_rejects_bad_header(tmp_path):
    path = tmp_path / "s.csv"
    path.write_text("id,label,score\nid1,real,0.2\n")
    with pytest.raises(errors.MalformedRow):
        read_score_table(path)


def test_manifest_rows_sorted_on_write(tmp_path):
    rows = (
        ManifestRow("z", Label.FAKE, 0, 2.0, Rule.CLUSTER_THRESHOLD),
        ManifestRow("a", Label.FAKE, 1, 0.5, Rule.CLUSTER_THRESHOLD),
        ManifestRow("m", Label.REAL, -1, 9.0, Rule.THRESHOLD),
    )
    manifest = SelectionManifest(rows)
    path = tmp_path / "m.csv"
    write_manifest(manifest, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "sample_id,label,cluster_id,distance,rule"
    assert [ln.split(",")[0] for ln in lines[1:]] == ["m", "a", "z"]


def test_manifest_round_trip(tmp_path):
    manifest = SelectionManifest(
        (
            ManifestRow("a", Label.REAL, -1, 0.25, Rule.TOP_FRACTION),
            ManifestRow("b", Label.FAKE, 2, 1.5, Rule.CLUSTER_THRESHOLD),
            ManifestRow("c", Label.FAKE, -1, 0.0, Rule.RANDOM),
        )
    )
    path = tmp_path / "m.csv"
    write_manifest(manifest, path)
    assert read_manifest(path) == manifest


def test_manifest_rejects_negative_distance(tmp_path):
    manifest = SelectionManifest(
        (ManifestRow("a", Label.REAL, -1, -0.1, Rule.THRESHOLD),)
    )
    with pytest.raises(errors.InvariantViolation):
        write_manifest(manifest, tmp_path / "m.csv")


def test_label_real_requires_algorithm_zero():
    with pytest.raises(errors.InvariantViolation):
        EmbeddingTable(
            dimension=1, records=(EmbeddingRecord("a", Label.REAL, 1, [0.0]),)
        ).validate()
