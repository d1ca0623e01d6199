"""Tests for output directories, schema-tagged tables and manifests."""

import json

import pandas as pd
import pytest

from gzk_lab.errors import ConfigError
from gzk_lab.persistence import (
    RunRecorder,
    load_manifest,
    prepare_output_dir,
    read_table,
    schema_tag,
    table_footer,
    write_json,
    write_table,
)


class TestOutputDir:
    def test_creates_nested(self, tmp_path):
        out = prepare_output_dir(tmp_path / "a" / "b")
        assert out.is_dir()

    def test_existing_empty_dir_is_reused(self, tmp_path):
        assert prepare_output_dir(tmp_path) == tmp_path

    def test_non_empty_needs_force(self, tmp_path):
        (tmp_path / "old.csv").write_text("x")
        with pytest.raises(ConfigError, match="--force"):
            prepare_output_dir(tmp_path)
        assert prepare_output_dir(tmp_path, force=True) == tmp_path


class TestTables:
    def test_schema_line_and_footer(self, tmp_path):
        table = pd.DataFrame({"t": [0.0, 0.5], "mass": [1.0, 1.0 + 1e-16]})
        path = write_table(table, tmp_path / "d.csv", "diagnostics", footer=["fit: none"])
        lines = path.read_text().splitlines()
        assert lines[0] == "# schema: gzk-lab/diagnostics/v1"
        assert lines[-1] == "# fit: none"
        tag, loaded = read_table(path)
        assert tag == schema_tag("diagnostics")
        pd.testing.assert_frame_equal(loaded, table)
        assert table_footer(path) == ["fit: none"]

    def test_full_precision(self, tmp_path):
        value = 0.1 + 0.2
        path = write_table(pd.DataFrame({"v": [value]}), tmp_path / "v.csv", "demo")
        assert read_table(path)[1]["v"].iloc[0] == value

    def test_missing_schema(self, tmp_path):
        path = tmp_path / "plain.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(ConfigError, match="schema"):
            read_table(path)

    def test_json(self, tmp_path):
        path = write_json({"b": 1, "a": [1.5]}, tmp_path / "s.json")
        assert json.loads(path.read_text()) == {"a": [1.5], "b": 1}


class TestRunRecorder:
    def test_manifest_lists_itself_last(self, tmp_path):
        recorder = RunRecorder(tmp_path, "simulate", "abc")
        (tmp_path / "sub").mkdir()
        for name in ("config.ini", "sub/u.csv"):
            (tmp_path / name).write_text("x")
            recorder.add(tmp_path / name)
        recorder.add(tmp_path / "config.ini")
        recorder.note("hello")
        path = recorder.finish("complete")
        manifest = load_manifest(path)
        assert manifest.files == ["config.ini", "sub/u.csv", "manifest.json"]
        assert manifest.status == "complete"
        assert manifest.config_hash == "abc"
        assert manifest.notes == ["hello"]
        assert manifest.finished_at is not None
        assert not list(tmp_path.glob(".*.tmp"))
