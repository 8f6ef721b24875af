"""LST1 binary tensors and small CSV matrices.

LST1 layout: the 8-byte magic ``LSTENSR1``, a little-endian ``u32`` rank,
``rank`` little-endian ``u32`` dimensions, then the float64 payload in
column-major order. Files may hold several records back to back.
"""
from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np

from ..errors import FormatError, InvalidArgumentError

MAGIC = b"LSTENSR1"
_U32 = struct.Struct("<I")
_MAX_DIM = 2 ** 32 - 1


def encode_tensor(tensor):
    a = np.asarray(tensor, dtype="<f8")
    if a.ndim == 0:
        a = a.reshape(1)
    if any(d > _MAX_DIM for d in a.shape) or a.ndim > _MAX_DIM:
        raise InvalidArgumentError("tensor dimensions exceed the u32 header range")
    header = MAGIC + _U32.pack(a.ndim) + b"".join(_U32.pack(d) for d in a.shape)
    return header + a.tobytes(order="F")


def decode_tensors(data, path=None):
    """Parse every record in ``data``; raises :class:`FormatError` with the byte offset."""
    out = []
    pos = 0
    size = len(data)
    while pos < size:
        if data[pos:pos + 8] != MAGIC:
            raise FormatError("bad magic", offset=pos, path=path)
        if pos + 12 > size:
            raise FormatError("truncated header", offset=pos + 8, path=path)
        (rank,) = _U32.unpack_from(data, pos + 8)
        dims_end = pos + 12 + 4 * rank
        if dims_end > size:
            raise FormatError("truncated dimension list", offset=pos + 12, path=path)
        shape = tuple(_U32.unpack_from(data, pos + 12 + 4 * i)[0] for i in range(rank))
        count = int(np.prod(shape, dtype=np.int64)) if rank else 1
        end = dims_end + 8 * count
        if end > size:
            raise FormatError(f"truncated payload: header declares {8 * count} bytes, "
                              f"{size - dims_end} present", offset=dims_end, path=path)
        flat = np.frombuffer(data, dtype="<f8", count=count, offset=dims_end)
        out.append(flat.reshape(shape, order="F").astype(float))
        pos = end
    return out


def write_tensors(path, tensors):
    path = Path(path)
    try:
        with open(path, "wb") as fh:
            for t in tensors:
                fh.write(encode_tensor(t))
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc


def read_tensors(path):
    path = Path(path)
    data = path.read_bytes()
    if not data:
        raise FormatError("empty file", offset=0, path=str(path))
    return decode_tensors(data, path=str(path))


def write_tensor(path, tensor):
    write_tensors(path, [tensor])


def read_tensor(path):
    return read_tensors(path)[0]


def tensor_io_roundtrip(path, tensor):
    """Write ``tensor`` as LST1 and read it back."""
    write_tensor(path, tensor)
    return read_tensor(path)


def read_csv_matrix(path):
    """Matrix from CSV whose header row lists the dimensions (``rows,cols``)."""
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise FormatError("empty CSV", offset=0, path=str(path))
    try:
        dims = [int(v) for v in rows[0]]
        values = [[float(v) for v in r] for r in rows[1:] if r]
    except ValueError as exc:
        raise FormatError(f"non-numeric CSV field: {exc}", offset=0, path=str(path)) from exc
    if len(dims) != 2:
        raise FormatError("CSV header must hold two dimensions", offset=0, path=str(path))
    a = np.array(values, dtype=float)
    if a.shape != tuple(dims):
        raise FormatError(f"CSV body is {a.shape}, header says {tuple(dims)}",
                          offset=0, path=str(path))
    return a


def write_measurements(path, meas):
    """Store a measurement set as consecutive LST1 records.

    Record 0 is the index ``[T, N, kind_code, M_1, ..., M_T]``, record 1 the
    noise variances, then ``Phi_t`` and ``y_t`` for every frame.
    """
    from ..sensing import ENSEMBLES
    index = [meas.T, meas.N, ENSEMBLES.index(meas.ensemble_kind), *meas.m_per_frame]
    records = [np.array(index, dtype=float), meas.noise_var]
    for Phi, y in zip(meas.matrices, meas.observations):
        records += [Phi, y]
    write_tensors(path, records)


def read_measurements(path):
    from ..sensing import ENSEMBLES, MeasurementSet
    records = read_tensors(path)
    if len(records) < 2 or records[0].ndim != 1 or len(records[0]) < 3:
        raise FormatError("missing measurement index record", offset=0, path=str(path))
    T, N, code = (int(v) for v in records[0][:3])
    if len(records[0]) != 3 + T or len(records) != 2 + 2 * T or not 0 <= code < len(ENSEMBLES):
        raise FormatError("measurement index does not match the record count",
                          offset=0, path=str(path))
    mats = records[2::2]
    obs = records[3::2]
    for Phi, y, M in zip(mats, obs, records[0][3:]):
        if Phi.shape != (int(M), N) or y.shape != (int(M),):
            raise FormatError("frame record shapes disagree with the index",
                              offset=0, path=str(path))
    return MeasurementSet(list(mats), list(obs), records[1], ENSEMBLES[code])
