"""Weight-file serialization.

Layout: 4-byte magic, little-endian uint64 header length, UTF-8 JSON header,
then the raw little-endian parameter payload in declaration order. The header
alone describes every array, so inspection never touches the payload.
"""

import json
import os
import struct
import tempfile

import numpy as np

from gridnav.nn.net import DetectorNet, NetSpec

MAGIC = b"GNAV"
_DTYPES = {"f32": np.dtype("<f4"), "f64": np.dtype("<f8")}


class WeightsError(ValueError):
    pass


def _dtype_tag(dtype):
    return "f64" if np.dtype(dtype).itemsize == 8 else "f32"


def _read_header(f, path):
    magic = f.read(4)
    if magic != MAGIC:
        raise WeightsError(f"{path}: not a gridnav weights file")
    raw = f.read(8)
    if len(raw) < 8:
        raise WeightsError(f"{path}: truncated header")
    (hlen,) = struct.unpack("<Q", raw)
    blob = f.read(hlen)
    if len(blob) < hlen:
        raise WeightsError(f"{path}: truncated header")
    return json.loads(blob.decode())


def save_weights(net, path, meta=None):
    arrays = net.state_arrays()
    tag = _dtype_tag(net.dtype)
    wire = _DTYPES[tag]
    header = {
        "format": "gridnav-weights",
        "version": 1,
        "dtype": tag,
        "byte_order": "little",
        "seed": net.seed,
        "netspec": net.spec.to_dict(),
        "layers": [{"name": n, "shape": list(a.shape)} for n, a in arrays.items()],
        "meta": meta or {},
    }
    hjson = json.dumps(header).encode()
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(os.path.abspath(path)) or ".")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(MAGIC)
            f.write(struct.pack("<Q", len(hjson)))
            f.write(hjson)
            for a in arrays.values():
                f.write(np.ascontiguousarray(a, dtype=wire).tobytes())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def inspect_weights(path):
    """Read only the header: layer names/shapes, dtype, netspec, metadata."""
    with open(path, "rb") as f:
        return _read_header(f, path)


def load_weights(path, expected_spec=None):
    """Rebuild the network from a weights file; returns (net, meta).

    ``expected_spec`` (a NetSpec) is validated against the stored layer list;
    the first mismatching layer is named in the error.
    """
    with open(path, "rb") as f:
        header = _read_header(f, path)
        tag = header["dtype"]
        if tag not in _DTYPES:
            raise WeightsError(f"{path}: unsupported dtype {tag!r}")
        wire = _DTYPES[tag]
        spec = NetSpec.from_dict(header["netspec"])
        net = DetectorNet(spec=spec, seed=int(header.get("seed", 0)),
                          dtype=np.float32 if tag == "f32" else np.float64)

        arrays = net.state_arrays()
        stored = header["layers"]
        if expected_spec is not None:
            probe = DetectorNet(spec=expected_spec, seed=0, dtype=np.float32)
            expected = [{"name": n, "shape": list(a.shape)}
                        for n, a in probe.state_arrays().items()]
            for want, got in zip(expected, stored):
                if want != got:
                    raise WeightsError(
                        f"{path}: architecture mismatch at layer {want['name']!r}: "
                        f"expected shape {want['shape']}, file has "
                        f"{got['name']!r} {got['shape']}")
            if len(expected) != len(stored):
                raise WeightsError(
                    f"{path}: architecture mismatch: expected {len(expected)} "
                    f"arrays, file has {len(stored)}")

        names = [e["name"] for e in stored]
        if names != list(arrays.keys()):
            first = next((a for a, b in zip(names, arrays.keys()) if a != b),
                         "<count>")
            raise WeightsError(f"{path}: layer list mismatch at {first!r}")

        for entry, (name, arr) in zip(stored, arrays.items()):
            if list(arr.shape) != entry["shape"]:
                raise WeightsError(
                    f"{path}: shape mismatch at layer {name!r}: "
                    f"net has {list(arr.shape)}, file has {entry['shape']}")
            nbytes = int(np.prod(entry["shape"])) * wire.itemsize
            buf = f.read(nbytes)
            if len(buf) < nbytes:
                raise WeightsError(f"{path}: truncated payload at layer {name!r}")
            arr[...] = np.frombuffer(buf, dtype=wire).reshape(arr.shape)
    return net, header["meta"]
