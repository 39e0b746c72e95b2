"""Binary concentration-field format and probe/diagnostic CSV writers.

Field files carry a fixed 64-byte little-endian header followed by the raw
samples as 64-bit floats in row-major (t, x, y, z) order:

    offset  size  field
    0       4     magic "EVF1"
    4       8     nx, ny, nz, nt as uint16
    12      24    x0, y0, z0 axis origins, float64 (um)
    36      24    dx, dy, dz axis spacings, float64 (um)
    60      4     nominal time step, float32 (s)

A plain-text sidecar ``<file>.meta`` always accompanies the binary and holds
the exact time stamps (full precision, so the float32 header step is only a
nominal hint), the provenance tag, and solver metadata. Readers prefer the
sidecar when present.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .transport import ConcentrationField

__all__ = ["write_field", "read_field", "probe_to_csv", "diagnostics_to_csv"]

MAGIC = b"EVF1"
_HEADER = struct.Struct("<4s4H3d3df")
assert _HEADER.size == 64

PROBE_CSV_HEADER = "t,x,y,z,c"


def _uniform_spacing(coords: np.ndarray, name: str) -> float:
    if coords.size < 2:
        return 0.0
    steps = np.diff(coords)
    if not np.allclose(steps, steps[0], rtol=1e-9, atol=1e-12):
        raise ValueError(f"{name} axis must be uniformly spaced to serialize")
    return float(steps[0])


def write_field(field: ConcentrationField, path) -> None:
    path = Path(path)
    nx, ny, nz = field.x_um.size, field.y_um.size, field.z_um.size
    nt = field.times_s.size
    for n, name in ((nx, "x"), (ny, "y"), (nz, "z"), (nt, "t")):
        if n > 0xFFFF:
            raise ValueError(f"{name} axis too large for the field format ({n} > 65535)")
    dx = _uniform_spacing(field.x_um, "x")
    dy = _uniform_spacing(field.y_um, "y")
    dz = _uniform_spacing(field.z_um, "z")
    dt = float(field.times_s[1] - field.times_s[0]) if nt > 1 else 0.0
    header = _HEADER.pack(
        MAGIC,
        nx,
        ny,
        nz,
        nt,
        float(field.x_um[0]) if nx else 0.0,
        float(field.y_um[0]) if ny else 0.0,
        float(field.z_um[0]) if nz else 0.0,
        dx,
        dy,
        dz,
        dt,
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(field.values_um, dtype="<f8").tobytes())

    lines = [
        "format = EVF1",
        f"provenance = {field.provenance}",
        "times_s = " + ",".join(f"{t:.17g}" for t in field.times_s),
    ]
    for key in sorted(field.metadata):
        lines.append(f"meta.{key} = {field.metadata[key]}")
    Path(str(path) + ".meta").write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_field(path) -> ConcentrationField:
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path} is too short to be a field file")
    magic, nx, ny, nz, nt, x0, y0, z0, dx, dy, dz, dt = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError(f"{path} has bad magic {magic!r}")
    count = nt * nx * ny * nz
    available = (len(raw) - _HEADER.size) // 8
    if available < count:
        raise ValueError(f"{path} payload truncated: {available} of {count} samples")
    values = np.frombuffer(raw, dtype="<f8", count=count, offset=_HEADER.size)
    values = values.reshape(nt, nx, ny, nz).astype(float)

    times = dt * np.arange(nt, dtype=float)
    provenance = "analytic"
    metadata: dict = {}
    sidecar = Path(str(path) + ".meta")
    if sidecar.exists():
        for line in sidecar.read_text(encoding="utf-8").splitlines():
            line = line.strip()
            if not line or "=" not in line:
                continue
            key, _, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if key == "times_s" and value:
                times = np.array([float(v) for v in value.split(",")])
            elif key == "provenance":
                provenance = value
            elif key.startswith("meta."):
                metadata[key[5:]] = value
    return ConcentrationField(
        x_um=x0 + dx * np.arange(nx),
        y_um=y0 + dy * np.arange(ny),
        z_um=z0 + dz * np.arange(nz),
        times_s=times,
        values_um=values,
        provenance=provenance,
        metadata=metadata,
    )


def probe_to_csv(points, times_s, series, path) -> None:
    """Write probe series as ``t,x,y,z,c`` rows, grouped by probe point."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    series = np.atleast_2d(np.asarray(series, dtype=float))
    times = np.asarray(times_s, dtype=float)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(PROBE_CSV_HEADER + "\n")
        for (px, py, pz), row in zip(points, series):
            for t, c in zip(times, row):
                fh.write(f"{t:.17g},{px:.17g},{py:.17g},{pz:.17g},{c:.17g}\n")


def diagnostics_to_csv(times_s, mass, min_value, stability_margin: float, clamp_count: int, path) -> None:
    """Write per-step solver diagnostics with run-constant margin/clamp columns."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t,total_mass,min_value,stability_margin,clamp_count\n")
        for t, m, mn in zip(times_s, mass, min_value):
            fh.write(f"{t:.17g},{m:.17g},{mn:.17g},{stability_margin:.17g},{clamp_count}\n")
