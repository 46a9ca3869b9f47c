"""Unit tests for the shared file-format conventions."""

from __future__ import annotations

import typing as typ

import numpy as np
import pytest

from semnav import codec
from semnav.errors import OperationalError

if typ.TYPE_CHECKING:
    import pathlib


class TestQuantize:
    """Floats are stored at float32 precision."""

    def test_quantize_is_idempotent(self) -> None:
        """Quantizing a stored value changes nothing."""
        value = codec.quantize(0.1234567890123)
        assert codec.quantize(value) == value

    def test_payload_restores_shape(self) -> None:
        """Arrays keep their shape through the payload encoding."""
        array = np.arange(6, dtype=np.float64).reshape(2, 3) / 7.0
        restored = codec.payload_to_array(codec.array_to_payload(array))
        assert restored.shape == (2, 3)
        np.testing.assert_allclose(restored, array, rtol=1e-7)


class TestFiles:
    """Readers and writers report the path they failed on."""

    def test_json_write_read_write_is_byte_stable(self, tmp_path: pathlib.Path) -> None:
        """Re-serializing a decoded document reproduces the bytes."""
        document = {"b": [1.5, 2], "a": {"nested": "é"}}
        first = codec.write_json(tmp_path / "one.json", document)
        second = codec.write_json(tmp_path / "two.json", codec.read_json(first))
        assert first.read_bytes() == second.read_bytes()

    def test_unreadable_json_is_operational(self, tmp_path: pathlib.Path) -> None:
        """A missing file raises OperationalError naming the path."""
        missing = tmp_path / "missing.json"
        with pytest.raises(OperationalError, match="missing.json") as caught:
            codec.read_json(missing)
        assert caught.value.resource == missing
        assert caught.value.operation == "read-json"

    def test_unwritable_target_is_operational(self, tmp_path: pathlib.Path) -> None:
        """Writing beneath a regular file fails with the target path."""
        blocker = tmp_path / "file"
        blocker.write_text("x", encoding="utf-8")
        with pytest.raises(OperationalError, match="file/sub/out.csv"):
            codec.write_csv(blocker / "sub" / "out.csv", ("a",), [(1,)])

    def test_csv_and_jsonl_round_trip(self, tmp_path: pathlib.Path) -> None:
        """CSV rows read back as mappings; JSONL appends lines."""
        path = codec.write_csv(tmp_path / "t.csv", ("k", "v"), [("a", 1), ("b", 2)])
        assert codec.read_csv(path) == [{"k": "a", "v": "1"}, {"k": "b", "v": "2"}]
        lines = codec.write_jsonl(tmp_path / "t.jsonl", [{"x": 1}])
        codec.append_jsonl(lines, [{"x": 2}])
        assert lines.read_text(encoding="utf-8").splitlines() == ['{"x":1}', '{"x":2}']
