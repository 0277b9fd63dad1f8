"""Binary field files, text shot records, checkpoints and visualisation export.

FieldFile layout (little-endian)::

    b"FWIF" | u8 version | u8 ndim | u64 counts[ndim] | f64 spacing[ndim] | f64 payload

The payload is row-major (last axis fastest).  Checkpoints use a sibling
container ``b"FWIC"`` holding named blocks of float64 arrays or UTF-8 text.
"""
from __future__ import annotations

import io as _io
import json
import struct

import numpy as np

from .forward import SensorArray, ShotRecord
from .grid import ScalarField, TimeAxis, grid_from_spacing

FIELD_MAGIC = b"FWIF"
FIELD_VERSION = 1
CKPT_MAGIC = b"FWIC"
CKPT_VERSION = 1


class FormatError(ValueError):
    """Malformed or truncated file."""


# -- FieldFile --------------------------------------------------------------------

def field_to_bytes(field: ScalarField) -> bytes:
    grid = field.grid
    head = FIELD_MAGIC + struct.pack("<BB", FIELD_VERSION, grid.ndim)
    head += struct.pack(f"<{grid.ndim}Q", *grid.dims)
    head += struct.pack(f"<{grid.ndim}d", *grid.spacing)
    return head + np.ascontiguousarray(field.values, dtype="<f8").tobytes()


def field_from_bytes(buf: bytes) -> ScalarField:
    if len(buf) < 6 or buf[:4] != FIELD_MAGIC:
        raise FormatError("not a field file (bad magic)")
    version, ndim = struct.unpack_from("<BB", buf, 4)
    if version != FIELD_VERSION:
        raise FormatError(f"unsupported field file version {version}")
    if ndim not in (2, 3):
        raise FormatError(f"unsupported dimensionality {ndim}")
    off = 6
    need = off + 16 * ndim
    if len(buf) < need:
        raise FormatError("truncated field header")
    dims = struct.unpack_from(f"<{ndim}Q", buf, off)
    spacing = struct.unpack_from(f"<{ndim}d", buf, off + 8 * ndim)
    n = int(np.prod(dims))
    if len(buf) != need + 8 * n:
        raise FormatError(f"payload has {len(buf) - need} bytes, expected {8 * n}")
    vals = np.frombuffer(buf, dtype="<f8", count=n, offset=need).reshape(dims)
    grid = grid_from_spacing(dims, spacing)
    return ScalarField(grid, vals.astype(np.float64))


def write_field(path, field: ScalarField) -> None:
    with open(path, "wb") as fh:
        fh.write(field_to_bytes(field))


def read_field(path) -> ScalarField:
    with open(path, "rb") as fh:
        return field_from_bytes(fh.read())


# -- RecordFile -------------------------------------------------------------------

def _sensor_id(pos) -> str:
    return ":".join(str(i) for i in pos)


def record_to_text(rec: ShotRecord) -> str:
    out = _io.StringIO()
    out.write(",".join(["time"] + [_sensor_id(p) for p in rec.sensors.positions]) + "\n")
    times = rec.time.times
    for n in range(rec.values.shape[1]):
        row = [repr(float(times[n]))] + [repr(float(v)) for v in rec.values[:, n]]
        out.write(",".join(row) + "\n")
    return out.getvalue()


def record_from_text(text: str) -> ShotRecord:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if len(lines) < 3:
        raise FormatError("record needs a header and at least two time rows")
    head = lines[0].split(",")
    if head[0] != "time":
        raise FormatError("first column must be 'time'")
    try:
        sensors = SensorArray([tuple(int(i) for i in h.split(":")) for h in head[1:]])
        rows = [[float(x) for x in ln.split(",")] for ln in lines[1:]]
    except ValueError as exc:
        raise FormatError(f"unparseable record: {exc}") from None
    if any(len(r) != len(head) for r in rows):
        raise FormatError("record is not rectangular")
    arr = np.array(rows)
    time = TimeAxis(float(arr[1, 0]), len(rows) - 1)
    return ShotRecord(sensors, time, arr[:, 1:].T)


def write_record(path, rec: ShotRecord) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(record_to_text(rec))


def read_record(path) -> ShotRecord:
    with open(path) as fh:
        return record_from_text(fh.read())


# -- checkpoints ------------------------------------------------------------------

def write_checkpoint(path, arrays: dict, meta: dict | None = None) -> None:
    """Named float64 arrays plus an optional JSON metadata block."""
    blocks = []
    if meta is not None:
        blocks.append(("meta", 1, json.dumps(meta, sort_keys=True).encode()))
    for name, arr in arrays.items():
        a = np.ascontiguousarray(arr, dtype="<f8")
        body = struct.pack("<B", a.ndim) + struct.pack(f"<{a.ndim}Q", *a.shape) + a.tobytes()
        blocks.append((name, 0, body))
    with open(path, "wb") as fh:
        fh.write(CKPT_MAGIC + struct.pack("<BI", CKPT_VERSION, len(blocks)))
        for name, kind, body in blocks:
            nb = name.encode()
            fh.write(struct.pack("<H", len(nb)) + nb + struct.pack("<BQ", kind, len(body)) + body)


def read_checkpoint(path):
    """Returns ``(arrays, meta)``."""
    with open(path, "rb") as fh:
        buf = fh.read()
    if buf[:4] != CKPT_MAGIC:
        raise FormatError("not a checkpoint file (bad magic)")
    try:
        version, count = struct.unpack_from("<BI", buf, 4)
        if version != CKPT_VERSION:
            raise FormatError(f"unsupported checkpoint version {version}")
        off = 9
        arrays, meta = {}, None
        for _ in range(count):
            (ln,) = struct.unpack_from("<H", buf, off)
            name = buf[off + 2:off + 2 + ln].decode()
            off += 2 + ln
            kind, size = struct.unpack_from("<BQ", buf, off)
            off += 9
            body = buf[off:off + size]
            if len(body) != size:
                raise FormatError("truncated checkpoint block")
            off += size
            if kind == 1:
                meta = json.loads(body.decode())
                continue
            nd = body[0]
            shape = struct.unpack_from(f"<{nd}Q", body, 1)
            arrays[name] = np.frombuffer(body, dtype="<f8", offset=1 + 8 * nd).reshape(shape).copy()
    except struct.error as exc:
        raise FormatError(f"truncated checkpoint: {exc}") from None
    return arrays, meta


def save_ansatz(path, ansatz) -> None:
    from .ansatz import ConstantAnsatz
    if isinstance(ansatz, ConstantAnsatz):
        meta = {"kind": "constant", "voxel": list(ansatz.voxel), "eps": ansatz.eps,
                "upper": ansatz.upper}
        write_checkpoint(path, {"coefficients": ansatz.coefficients}, meta)
        return
    net = ansatz
    meta = {"kind": "network", "latent_channels": net.latent_channels,
            "latent_shape": list(net.latent_shape), "blocks": [list(b) for b in net.blocks],
            "eps": net.eps, "pixel_norm": net.pixel_norm, "seed": net.seed}
    arrays = {"latent": net.latent}
    arrays.update({f"param{i:03d}": p for i, p in enumerate(net.params)})
    write_checkpoint(path, arrays, meta)


def load_ansatz(path, grid):
    from .ansatz import ConstantAnsatz
    from .network import GeneratorNetwork
    arrays, meta = read_checkpoint(path)
    if meta is None:
        raise FormatError("checkpoint lacks metadata")
    if meta["kind"] == "constant":
        return ConstantAnsatz(grid, arrays["coefficients"], tuple(meta["voxel"]),
                              meta["eps"], meta["upper"])
    net = GeneratorNetwork(grid, meta["latent_channels"], meta["latent_shape"], meta["blocks"],
                           meta["eps"], meta["pixel_norm"], meta["seed"])
    net.latent[...] = arrays["latent"]
    params = net.params
    for i, p in enumerate(params):
        src = arrays[f"param{i:03d}"]
        if src.shape != p.shape:
            raise FormatError(f"parameter {i} has shape {src.shape}, expected {p.shape}")
        p[...] = src
    net.touch()
    return net


# -- export -------------------------------------------------------------------------

def export_text(path, field: ScalarField) -> None:
    """Plain-text matrix; 3D fields are written slice by slice along the last axis."""
    vals = field.values
    with open(path, "w") as fh:
        if vals.ndim == 2:
            np.savetxt(fh, vals, fmt="%.17g")
        else:
            for k in range(vals.shape[2]):
                fh.write(f"# slice {k}\n")
                np.savetxt(fh, vals[:, :, k], fmt="%.17g")


def export_vtk(path, field: ScalarField, name: str = "gamma") -> None:
    """Legacy ASCII VTK structured-points file (x fastest)."""
    grid = field.grid
    dims = list(grid.dims) + [1] * (3 - grid.ndim)
    spacing = list(grid.spacing) + [1.0] * (3 - grid.ndim)
    flat = field.values.reshape(dims).ravel(order="F")
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write(f"{name}\nASCII\nDATASET STRUCTURED_POINTS\n")
        fh.write("DIMENSIONS {} {} {}\n".format(*dims))
        fh.write("ORIGIN 0 0 0\n")
        fh.write("SPACING {!r} {!r} {!r}\n".format(*spacing))
        fh.write(f"POINT_DATA {flat.size}\nSCALARS {name} double 1\nLOOKUP_TABLE default\n")
        np.savetxt(fh, flat, fmt="%.17g")
