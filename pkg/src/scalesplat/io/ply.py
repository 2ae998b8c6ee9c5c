"""Binary little-endian PLY checkpoints in the common 3DGS vertex layout."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..core import GaussianCloud, sh_coeff_count, sh_degree_from_count
from ..errors import IoFailure, MalformedHeader, MissingProperty, TruncatedPayload

_PLY_TYPES = {
    "char": "i1", "int8": "i1", "uchar": "u1", "uint8": "u1",
    "short": "<i2", "int16": "<i2", "ushort": "<u2", "uint16": "<u2",
    "int": "<i4", "int32": "<i4", "uint": "<u4", "uint32": "<u4",
    "float": "<f4", "float32": "<f4", "double": "<f8", "float64": "<f8",
}
_MAX_HEADER = 1 << 16
_REQUIRED = (["x", "y", "z", "f_dc_0", "f_dc_1", "f_dc_2", "opacity"]
             + [f"scale_{i}" for i in range(3)] + [f"rot_{i}" for i in range(4)])


def _parse_header(data: bytes):
    end = data.find(b"end_header\n", 0, _MAX_HEADER)
    if not data.startswith(b"ply\n") or end < 0:
        raise MalformedHeader("not a PLY file or header not terminated")
    try:
        lines = data[:end].decode("ascii").split("\n")
    except UnicodeDecodeError as exc:
        raise MalformedHeader("header is not ASCII") from exc
    body_start = end + len(b"end_header\n")
    fmt = None
    elements: list[tuple[str, int, list[tuple[str, str]]]] = []
    for raw in lines[1:]:
        parts = raw.split()
        if not parts or parts[0] in ("comment", "obj_info"):
            continue
        key = parts[0]
        if key == "format":
            if len(parts) != 3:
                raise MalformedHeader(f"bad format line {raw!r}")
            fmt = parts[1]
        elif key == "element":
            if len(parts) != 3:
                raise MalformedHeader(f"bad element line {raw!r}")
            try:
                count = int(parts[2])
            except ValueError as exc:
                raise MalformedHeader(f"bad element count in {raw!r}") from exc
            if count < 0:
                raise MalformedHeader("negative element count")
            elements.append((parts[1], count, []))
        elif key == "property":
            if not elements:
                raise MalformedHeader("property before any element")
            if len(parts) != 3 or parts[1] == "list":
                raise MalformedHeader(f"unsupported property line {raw!r}")
            if parts[1] not in _PLY_TYPES:
                raise MalformedHeader(f"unknown property type {parts[1]!r}")
            elements[-1][2].append((parts[2], _PLY_TYPES[parts[1]]))
        else:
            raise MalformedHeader(f"unexpected header line {raw!r}")
    if fmt != "binary_little_endian":
        raise MalformedHeader(f"only binary_little_endian is supported, got {fmt!r}")
    return elements, body_start


def parse_ply(data: bytes) -> GaussianCloud:
    elements, offset = _parse_header(data)
    vertex = None
    for name, count, props in elements:
        names = [p[0] for p in props]
        if len(set(names)) != len(names):
            raise MalformedHeader(f"duplicate property in element {name!r}")
        dtype = np.dtype(props) if props else np.dtype([])
        if name == "vertex":
            vertex = (count, dtype)
            break
        offset += count * dtype.itemsize
    if vertex is None:
        raise MalformedHeader("no vertex element")
    count, dtype = vertex
    fields = set(dtype.names or ())
    for req in _REQUIRED:
        if req not in fields:
            raise MissingProperty(req)
    n_rest = 0
    while f"f_rest_{n_rest}" in fields:
        n_rest += 1
    if n_rest % 3:
        raise MalformedHeader(f"f_rest count {n_rest} is not a multiple of 3")
    try:
        degree = sh_degree_from_count(n_rest // 3 + 1)
    except ValueError as exc:
        raise MalformedHeader(str(exc)) from exc
    need = count * dtype.itemsize
    if offset + need > len(data):
        raise TruncatedPayload(f"vertex payload needs {need} bytes, {max(len(data) - offset, 0)} present")
    v = np.frombuffer(data, dtype=dtype, count=count, offset=offset)

    def col(name):
        # signaling NaNs in the payload trip an FP flag when widened; activation rejects them later
        with np.errstate(invalid="ignore"):
            return v[name].astype(np.float64)

    k = sh_coeff_count(degree)
    sh = np.zeros((count, k, 3))
    sh[:, 0, :] = np.stack([col(f"f_dc_{c}") for c in range(3)], axis=1)
    per_channel = k - 1
    for c in range(3):
        for j in range(per_channel):
            sh[:, 1 + j, c] = col(f"f_rest_{c * per_channel + j}")
    return GaussianCloud(
        means=np.stack([col("x"), col("y"), col("z")], axis=1),
        log_scales=np.stack([col(f"scale_{i}") for i in range(3)], axis=1),
        rotations=np.stack([col(f"rot_{i}") for i in range(4)], axis=1),
        opacity_logits=col("opacity"),
        sh=sh,
    )


def load_ply(path) -> GaussianCloud:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    return parse_ply(data)


def ply_bytes(cloud: GaussianCloud) -> bytes:
    n = len(cloud)
    k = cloud.sh.shape[1]
    per_channel = k - 1
    names = ["x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"]
    names += [f"f_rest_{i}" for i in range(3 * per_channel)]
    names += ["opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"]
    arr = np.zeros(n, dtype=[(name, "<f4") for name in names])
    for i, c in enumerate("xyz"):
        arr[c] = cloud.means[:, i]
    for c in range(3):
        arr[f"f_dc_{c}"] = cloud.sh[:, 0, c]
        for j in range(per_channel):
            arr[f"f_rest_{c * per_channel + j}"] = cloud.sh[:, 1 + j, c]
    arr["opacity"] = cloud.opacity_logits
    for i in range(3):
        arr[f"scale_{i}"] = cloud.log_scales[:, i]
    for i in range(4):
        arr[f"rot_{i}"] = cloud.rotations[:, i]
    header = "ply\nformat binary_little_endian 1.0\n" f"element vertex {n}\n"
    header += "".join(f"property float {name}\n" for name in names) + "end_header\n"
    return header.encode("ascii") + arr.tobytes()


def write_ply(cloud: GaussianCloud, path) -> Path:
    path = Path(path)
    try:
        path.write_bytes(ply_bytes(cloud))
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
    return path
