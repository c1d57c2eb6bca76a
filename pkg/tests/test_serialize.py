import numpy as np
import pytest

from budgetsp import serialize
from budgetsp.serialize import FormatError, dumps, loads


def sample():
    return {"b": np.arange(6, dtype=np.float64).reshape(2, 3) / 7, "a": np.array([1, -2], np.int64)}


class TestContainer:
    def test_round_trip_bit_exact(self):
        kind, meta, arrays = loads(dumps("thing", {"x": 1, "y": [1, 2]}, sample()))
        assert kind == "thing" and meta == {"x": 1, "y": [1, 2]}
        for k, v in sample().items():
            assert arrays[k].dtype == v.dtype and arrays[k].tobytes() == v.tobytes()

    def test_deterministic_bytes(self):
        assert dumps("k", {"b": 1, "a": 2}, sample()) == dumps("k", {"a": 2, "b": 1}, sample())

    def test_big_endian_input_normalized(self):
        be = np.arange(3, dtype=">f8")
        _, _, arrays = loads(dumps("k", {}, {"v": be}))
        np.testing.assert_array_equal(arrays["v"], be)

    def test_bad_magic(self):
        with pytest.raises(FormatError):
            loads(b"NOPE" + dumps("k", {}, {})[4:])

    def test_bad_version(self):
        raw = bytearray(dumps("k", {}, {}))
        raw[4] = 99
        with pytest.raises(FormatError):
            loads(bytes(raw))

    def test_truncated(self):
        raw = dumps("k", {}, sample())
        with pytest.raises(FormatError):
            loads(raw[:-5])
        with pytest.raises(FormatError):
            loads(raw[:6])

    def test_file_helpers(self, tmp_path):
        serialize.save(tmp_path / "w.bspk", "k", {"m": 1}, sample())
        assert serialize.load(tmp_path / "w.bspk")[1] == {"m": 1}
