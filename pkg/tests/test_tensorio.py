"""Binary tensor format: layout, round trips, malformed inputs."""

import io
import struct

import numpy as np
import pytest

from gspline.errors import BadMagic, TruncatedPayload, UnsupportedVersion
from gspline.tensorio import (
    load_tensor,
    read_tensor,
    save_tensor,
    tensor_bytes,
    write_tensor,
)


class TestLayout:
    def test_rank0_file_is_21_bytes(self):
        # magic(4) + version(4) + rank(4) + no dims + tag(1) + payload(8)
        raw = b"GST1" + struct.pack("<II", 1, 0) + b"\x01" + struct.pack("<d", 3.5)
        assert len(raw) == 21
        out = read_tensor(io.BytesIO(raw))
        assert out.shape == () and float(out) == 3.5

    def test_scalar_write_promotes_to_rank1(self):
        raw = tensor_bytes(np.float64(3.5))
        assert raw[:4] == b"GST1"
        assert struct.unpack("<II", raw[4:12]) == (1, 1)
        out = read_tensor(io.BytesIO(raw))
        assert out.shape == (1,) and out[0] == 3.5

    def test_header_fields(self):
        raw = tensor_bytes(np.zeros((2, 3), dtype=np.float32))
        version, rank = struct.unpack("<II", raw[4:12])
        dims = struct.unpack("<II", raw[12:20])
        assert (version, rank, dims) == (1, 2, (2, 3))
        assert raw[20] == 0
        assert len(raw) == 21 + 2 * 3 * 4

    def test_row_major_payload(self):
        t = np.arange(6.0).reshape(2, 3)
        raw = tensor_bytes(t)
        vals = np.frombuffer(raw[21:], dtype="<f8")
        assert np.array_equal(vals, np.arange(6.0))


class TestRoundTrips:
    @pytest.mark.parametrize("dtype", [np.float32, np.float64])
    def test_bit_identical(self, dtype):
        rng = np.random.default_rng(0)
        t = rng.normal(size=(3, 4, 5)).astype(dtype)
        out = read_tensor(io.BytesIO(tensor_bytes(t)))
        assert out.dtype == dtype
        assert np.array_equal(out.view(np.uint8), t.view(np.uint8))

    def test_integer_input_promoted_to_f64(self):
        out = read_tensor(io.BytesIO(tensor_bytes(np.arange(4))))
        assert out.dtype == np.float64
        assert np.array_equal(out, np.arange(4.0))

    def test_zero_size_dimension(self):
        t = np.zeros((3, 0, 2))
        out = read_tensor(io.BytesIO(tensor_bytes(t)))
        assert out.shape == (3, 0, 2)

    def test_file_roundtrip(self, tmp_path):
        t = np.random.default_rng(1).normal(size=(7,))
        path = tmp_path / "t.gst"
        save_tensor(path, t)
        assert np.array_equal(load_tensor(path), t)

    def test_two_tensors_in_one_stream(self):
        buf = io.BytesIO()
        write_tensor(buf, np.arange(3.0))
        write_tensor(buf, np.arange(2.0))
        buf.seek(0)
        assert np.array_equal(read_tensor(buf), np.arange(3.0))
        assert np.array_equal(read_tensor(buf), np.arange(2.0))


class TestMalformed:
    def test_bad_magic(self):
        with pytest.raises(BadMagic):
            read_tensor(io.BytesIO(b"NOPE" + b"\x00" * 20))

    def test_truncated_header(self):
        with pytest.raises(TruncatedPayload):
            read_tensor(io.BytesIO(b"GST1\x01\x00"))

    def test_truncated_dims(self):
        raw = tensor_bytes(np.zeros((2, 2)))
        with pytest.raises(TruncatedPayload):
            read_tensor(io.BytesIO(raw[:14]))

    def test_missing_dtype_tag(self):
        raw = tensor_bytes(np.zeros((2, 2)))
        with pytest.raises(TruncatedPayload):
            read_tensor(io.BytesIO(raw[:20]))

    def test_truncated_payload(self):
        raw = tensor_bytes(np.zeros(10))
        with pytest.raises(TruncatedPayload):
            read_tensor(io.BytesIO(raw[:-1]))

    def test_unsupported_version(self):
        raw = bytearray(tensor_bytes(np.zeros(2)))
        raw[4] = 9
        with pytest.raises(UnsupportedVersion):
            read_tensor(io.BytesIO(bytes(raw)))

    def test_unknown_dtype_tag(self):
        raw = bytearray(tensor_bytes(np.zeros(2)))
        raw[16] = 7  # tag byte for a rank-1 tensor
        with pytest.raises(UnsupportedVersion):
            read_tensor(io.BytesIO(bytes(raw)))
