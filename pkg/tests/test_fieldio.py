import struct

import numpy as np
import pytest

from evsim.fieldio import MAGIC, _HEADER, probe_to_csv, read_field, write_field
from evsim.transport import ConcentrationField


def sample_field(nt=3, nx=4, ny=5, nz=6):
    rng = np.random.default_rng(0)
    return ConcentrationField(
        x_um=-2.0 + 0.5 * np.arange(nx),
        y_um=1.0 + 0.25 * np.arange(ny),
        z_um=10.0 + 2.0 * np.arange(nz),
        times_s=0.005 * np.arange(nt),
        values_um=rng.uniform(0, 1, (nt, nx, ny, nz)),
        provenance="grid",
        metadata={"solver": "grid", "scheme": "central"},
    )


class TestBinaryFormat:
    def test_header_is_64_bytes(self):
        assert _HEADER.size == 64

    def test_round_trip_exact(self, tmp_path):
        field = sample_field()
        path = tmp_path / "field.evf"
        write_field(field, path)
        back = read_field(path)
        assert np.array_equal(back.values_um, field.values_um)
        assert np.array_equal(back.times_s, field.times_s)
        for a, b in zip(back.axes, field.axes):
            assert np.allclose(a, b, rtol=0, atol=1e-12)
        assert back.provenance == "grid"
        assert back.metadata["scheme"] == "central"

    def test_header_layout(self, tmp_path):
        field = sample_field()
        path = tmp_path / "field.evf"
        write_field(field, path)
        raw = path.read_bytes()
        assert raw[:4] == MAGIC
        nx, ny, nz, nt = struct.unpack_from("<4H", raw, 4)
        assert (nx, ny, nz, nt) == (4, 5, 6, 3)
        x0, y0, z0 = struct.unpack_from("<3d", raw, 12)
        assert (x0, y0, z0) == (-2.0, 1.0, 10.0)
        dx, dy, dz = struct.unpack_from("<3d", raw, 36)
        assert (dx, dy, dz) == (0.5, 0.25, 2.0)
        (dt,) = struct.unpack_from("<f", raw, 60)
        assert dt == pytest.approx(0.005, rel=1e-6)
        # payload is little-endian float64, row-major (t, x, y, z)
        assert len(raw) == 64 + 8 * 3 * 4 * 5 * 6

    def test_sidecar_written_and_preferred(self, tmp_path):
        field = sample_field()
        path = tmp_path / "field.evf"
        write_field(field, path)
        sidecar = tmp_path / "field.evf.meta"
        assert sidecar.exists()
        text = sidecar.read_text()
        assert "times_s" in text and "provenance = grid" in text
        # times survive at full precision even though the header step is f32
        back = read_field(path)
        assert np.array_equal(back.times_s, field.times_s)

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "bad.evf"
        path.write_bytes(b"NOPE" + b"\x00" * 80)
        with pytest.raises(ValueError, match="magic"):
            read_field(path)

    def test_truncated_payload_rejected(self, tmp_path):
        field = sample_field()
        path = tmp_path / "field.evf"
        write_field(field, path)
        data = path.read_bytes()
        path.write_bytes(data[: len(data) - 16])
        with pytest.raises(ValueError, match="truncated"):
            read_field(path)

    def test_nonuniform_axis_rejected(self, tmp_path):
        field = sample_field()
        field.x_um = np.array([0.0, 1.0, 3.0, 7.0])
        with pytest.raises(ValueError, match="uniform"):
            write_field(field, tmp_path / "field.evf")


class TestProbeCsv:
    def test_rows_and_header(self, tmp_path):
        points = [(2.0, 0.0, 20.0), (6.0, 0.0, 20.0)]
        times = np.array([0.0, 0.5])
        series = np.array([[0.0, 1.5], [0.0, 0.25]])
        path = tmp_path / "probes.csv"
        probe_to_csv(points, times, series, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "t,x,y,z,c"
        assert lines[1] == "0,2,0,20,0"
        assert lines[2] == "0.5,2,0,20,1.5"
        assert len(lines) == 1 + 4
