from __future__ import annotations

import json

import numpy as np
import pytest


def test_matrix_table_keeps_full_precision(tmp_path):
    from lsmix.core.tables import read_matrix, write_matrix

    v = np.array([[1.0 / 3.0, np.pi], [-2.5e-300, 1e17 + 1.0]])
    p = write_matrix(tmp_path / "m.csv", v)
    assert p.read_text(encoding="utf-8").splitlines()[0] == "s0,s1"
    assert np.array_equal(read_matrix(p), v)


def test_read_matrix_errors(tmp_path):
    from lsmix.core.errors import DataError
    from lsmix.core.tables import read_matrix, write_matrix

    with pytest.raises(DataError, match="does not exist"):
        read_matrix(tmp_path / "nope.csv")
    (tmp_path / "empty.csv").write_text("\n", encoding="utf-8")
    with pytest.raises(DataError, match="empty"):
        read_matrix(tmp_path / "empty.csv")
    (tmp_path / "bad.csv").write_text("a,b\n1,x\n", encoding="utf-8")
    with pytest.raises(DataError, match="malformed"):
        read_matrix(tmp_path / "bad.csv")
    (tmp_path / "nan.csv").write_text("a,b\n1,nan\n", encoding="utf-8")
    with pytest.raises(DataError, match="non-finite"):
        read_matrix(tmp_path / "nan.csv")
    with pytest.raises(DataError, match="header length"):
        write_matrix(tmp_path / "h.csv", np.ones((2, 2)), header=("a",))


def test_read_sites_header_is_optional(tmp_path):
    from lsmix.core.errors import DataError
    from lsmix.core.tables import read_sites, write_sites

    coords = np.array([[0.0, 1.0], [2.0, 3.0]])
    assert np.array_equal(read_sites(write_sites(tmp_path / "a.csv", coords)), coords)
    (tmp_path / "b.csv").write_text("0,1\n2,3\n", encoding="utf-8")
    assert np.array_equal(read_sites(tmp_path / "b.csv"), coords)
    (tmp_path / "c.csv").write_text("0,1,2\n", encoding="utf-8")
    with pytest.raises(DataError, match="two columns"):
        read_sites(tmp_path / "c.csv")


def test_egpd_table_and_records(tmp_path):
    from lsmix.core.errors import DataError
    from lsmix.core.tables import read_egpd_table, write_egpd_table, write_records

    rows = [(1.0, 0.1, 1.0, 1.0, 1.0), (2.0, -0.2, 0.5, 0.8, 2.0)]
    p = write_egpd_table(tmp_path / "egpd.csv", rows)
    assert read_egpd_table(p).shape == (2, 5)
    (tmp_path / "short.csv").write_text("sigma,xi\n1,0\n", encoding="utf-8")
    with pytest.raises(DataError, match="needs columns"):
        read_egpd_table(tmp_path / "short.csv")

    out = write_records(tmp_path / "r.csv", ("name", "value"), [("phi", 0.1), ("n", 3)])
    assert out.read_text(encoding="utf-8").splitlines() == ["name,value", "phi,0.10000000000000001", "n,3"]


def test_paths(tmp_path):
    from lsmix.core.errors import DataError
    from lsmix.core.paths import ensure_within, resolve_input_file, resolve_out_dir

    out = resolve_out_dir(tmp_path / "a" / "b")
    assert out.is_dir()
    assert ensure_within(out, out / "x.csv") == (out / "x.csv").resolve()
    with pytest.raises(DataError, match="escapes output directory"):
        ensure_within(out, out / ".." / "x.csv")
    with pytest.raises(DataError, match="no data file given"):
        resolve_input_file(None, what="data file")
    with pytest.raises(DataError, match="not a file"):
        resolve_input_file(tmp_path)
    (tmp_path / "f").write_text("", encoding="utf-8")
    with pytest.raises(DataError, match="not a directory"):
        resolve_out_dir(tmp_path / "f")


def test_run_records_and_fingerprint(tmp_path, monkeypatch):
    from lsmix.core import runlog

    monkeypatch.setattr(runlog, "_now", lambda: 1000.0)
    fp = runlog.fingerprint("model=sm1")
    assert len(fp) == 64 and fp == runlog.fingerprint("model=sm1")
    assert fp != runlog.fingerprint("model=sm3")

    assert runlog.read_run_records(tmp_path) == []
    runlog.append_run_record(tmp_path, "simulate", fp, 3, {"data": "data.csv"}, 0.25, {"n": np.int64(10)})
    runlog.append_run_record(tmp_path, "fit", fp, None, {}, 1.0)
    recs = runlog.read_run_records(tmp_path)
    assert [r["command"] for r in recs] == ["simulate", "fit"]
    assert recs[0]["ts"] == 1000.0 and recs[0]["n"] == 10


def test_write_json_atomic(tmp_path):
    from lsmix.core.runlog import write_json_atomic

    p = write_json_atomic(tmp_path / "fit.json", {"b": np.float64(0.5), "a": np.arange(2)})
    assert json.loads(p.read_text(encoding="utf-8")) == {"a": [0, 1], "b": 0.5}
    assert not (tmp_path / "fit.json.tmp").exists()


def test_resolve_workers(monkeypatch):
    from lsmix.core.errors import ConfigError
    from lsmix.core.workers import resolve_workers

    monkeypatch.delenv("LSMIX_WORKERS", raising=False)
    assert resolve_workers().workers == 1
    monkeypatch.setenv("LSMIX_WORKERS", "3")
    assert resolve_workers().workers == 3
    assert resolve_workers(2).workers == 2
    monkeypatch.setenv("LSMIX_WORKERS", "lots")
    with pytest.raises(ConfigError, match="not an integer"):
        resolve_workers()
    with pytest.raises(ConfigError, match=">= 1"):
        resolve_workers(0)


def test_map_indexed_preserves_order_and_streams():
    from lsmix.core.workers import WorkerConfig, chunk_bounds, derive_rng, derive_seed, map_indexed

    def draw(i):
        return derive_rng(9, i).standard_normal()

    assert map_indexed(draw, 20, WorkerConfig(4)) == map_indexed(draw, 20)
    assert map_indexed(draw, 0) == []
    assert derive_seed(9, 1) == derive_seed(9, 1) != derive_seed(9, 2)
    assert chunk_bounds(10, 4) == [(0, 4), (4, 8), (8, 10)]


def test_error_string_includes_context():
    from lsmix.core.errors import DataError, LsmixError

    e = DataError("bad rows", context={"row": 3})
    assert isinstance(e, LsmixError)
    assert str(e) == "bad rows | context={'row': 3}"
    assert str(DataError()) == "DataError"


@pytest.mark.parametrize("name, upper, lower", [("gaussian", "AI", "AI"), ("LM1", "AD", "AI"), ("sm3", "AD", "AD")])
def test_tail_profile(name, upper, lower):
    from lsmix.core.classification import tail_profile

    prof = tail_profile(name)
    assert (prof["upper"], prof["lower"]) == (upper, lower)
    assert "Unknown variant" in tail_profile("sm9")["note"]
