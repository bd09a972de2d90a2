from pathlib import Path

import pytest

from src.utils.errors import DatasetError, FormatError
from src.utils.manifest import DatasetManifest, from_paths


def test_parse_records_comments_and_color():
    text = "#color: gray\n# clean\tnoisy\na.pgm\tn/a.pgm\n\nb.pgm\n"
    manifest = DatasetManifest.parse(text, "/data")
    assert manifest.color == "gray" and manifest.channels == 1
    assert [r.clean_path for r in manifest] == [Path("/data/a.pgm"), Path("/data/b.pgm")]
    assert manifest.records[0].noisy_path == Path("/data/n/a.pgm")
    assert manifest.records[1].noisy_path is None
    assert not manifest.paired


def test_too_many_fields_reports_offset():
    text = "a.ppm\n" + "b.ppm\tc.ppm\td.ppm\n"
    with pytest.raises(FormatError) as excinfo:
        DatasetManifest.parse(text, ".")
    assert excinfo.value.offset == 6


def test_unknown_color_mode():
    with pytest.raises(FormatError):
        DatasetManifest.parse("#color: cmyk\na.ppm\n", ".")


def test_paired_mode_requires_noisy_paths():
    manifest = DatasetManifest.parse("a.ppm\tna.ppm\nb.ppm\n", ".")
    with pytest.raises(FormatError, match="b.ppm"):
        manifest.require_paired()


def test_missing_files_are_listed(tmp_path):
    (tmp_path / "a.ppm").write_bytes(b"")
    (tmp_path / "list.tsv").write_text("a.ppm\nb.ppm\tc.ppm\n", encoding="utf-8")
    with pytest.raises(DatasetError) as excinfo:
        DatasetManifest.load(tmp_path / "list.tsv")
    assert excinfo.value.missing == [str(tmp_path / "b.ppm"), str(tmp_path / "c.ppm")]


def test_missing_manifest():
    with pytest.raises(DatasetError):
        DatasetManifest.load("/nonexistent/list.tsv")


def test_root_override(tmp_path):
    (tmp_path / "imgs").mkdir()
    (tmp_path / "imgs" / "a.ppm").write_bytes(b"")
    (tmp_path / "list.tsv").write_text("a.ppm\n", encoding="utf-8")
    manifest = DatasetManifest.load(tmp_path / "list.tsv", root=tmp_path / "imgs")
    assert manifest.records[0].clean_path == tmp_path / "imgs" / "a.ppm"


def test_save_writes_relative_paths(tmp_path):
    manifest = from_paths([tmp_path / "c0.ppm"], tmp_path, noisy=[tmp_path / "n0.ppm"])
    path = manifest.save(tmp_path / "pairs.tsv")
    assert path.read_text(encoding="utf-8") == "#color: rgb\nc0.ppm\tn0.ppm\n"
    assert DatasetManifest.load(path, check=False).paired


def test_split():
    manifest = DatasetManifest.parse("a\nb\nc\n", ".")
    head, tail = manifest.split(2)
    assert len(head) == 2 and len(tail) == 1
