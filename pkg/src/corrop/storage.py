"""File formats: text dumps for meshes, fields, projectors and models, and a
checksummed binary container for sample datasets.

Text floats are written with repr, which round-trips doubles exactly; the
binary dataset is little-endian float64 with a sha256 trailer so corruption
is detected on load.
"""

from __future__ import annotations

import hashlib
import struct
from pathlib import Path

import numpy as np

from .fem import Field, FunctionSpace
from .mesh import Mesh, mesh_from_text, mesh_to_text
from .network import NetConfig, SurrogateWeights
from .reduction import DataSet, Projector

_MAGIC = b"NOD1"


def save_mesh(path, mesh: Mesh) -> None:
    Path(path).write_text(mesh_to_text(mesh))


def load_mesh(path) -> Mesh:
    return mesh_from_text(Path(path).read_text())


def field_to_text(coeffs: np.ndarray) -> str:
    lines = [f"field {len(coeffs)}"]
    lines += [repr(float(v)) for v in coeffs]
    return "\n".join(lines) + "\n"


def save_field(path, field: Field) -> None:
    Path(path).write_text(field_to_text(field.coeffs))


def load_field_coeffs(path) -> np.ndarray:
    lines = Path(path).read_text().splitlines()
    head = lines[0].split()
    if head[0] != "field":
        raise ValueError(f"{path}: not a field dump")
    n = int(head[1])
    return np.array([float(v) for v in lines[1 : 1 + n]])


def load_field(path, space: FunctionSpace) -> Field:
    return Field(space, load_field_coeffs(path))


def projector_to_text(p: Projector) -> str:
    q, r = p.basis.shape
    lines = [f"proj {q} {r}"]
    lines += [repr(float(v)) for v in p.mean]
    for j in range(r):
        lines += [repr(float(v)) for v in p.basis[:, j]]
    lines.append(f"singular {len(p.singular_values)}")
    lines += [repr(float(v)) for v in p.singular_values]
    return "\n".join(lines) + "\n"


def save_projector(path, p: Projector) -> None:
    Path(path).write_text(projector_to_text(p))


def load_projector(path) -> Projector:
    lines = Path(path).read_text().splitlines()
    head = lines[0].split()
    if head[0] != "proj":
        raise ValueError(f"{path}: not a projector file")
    q, r = int(head[1]), int(head[2])
    pos = 1
    mean = np.array([float(v) for v in lines[pos : pos + q]])
    pos += q
    basis = np.empty((q, r))
    for j in range(r):
        basis[:, j] = [float(v) for v in lines[pos : pos + q]]
        pos += q
    shead = lines[pos].split()
    if shead[0] != "singular":
        raise ValueError(f"{path}: missing singular-value block")
    k = int(shead[1])
    sing = np.array([float(v) for v in lines[pos + 1 : pos + 1 + k]])
    return Projector(basis=basis, mean=mean, singular_values=sing)


def projector_checksum(p: Projector) -> str:
    return hashlib.sha256(projector_to_text(p).encode()).hexdigest()


def _tensor_lines(name: str, arr: np.ndarray) -> list[str]:
    dims = " ".join(str(d) for d in arr.shape)
    return [f"tensor {name} {dims}"] + [repr(float(v)) for v in np.asarray(arr).ravel()]


def model_to_text(w: SurrogateWeights, proj_m: Projector, proj_u: Projector) -> str:
    cfg = w.config
    lines = [f"model {cfg.r_m} {cfg.r_u} {cfg.n_blocks} {cfg.block_rank}"]
    lines.append(f"frozen_m {projector_checksum(proj_m)}")
    lines.append(f"frozen_u {projector_checksum(proj_u)}")
    lines += _tensor_lines("dense", w.dense)
    for k in range(cfg.n_blocks):
        lines += _tensor_lines(f"w1_{k}", w.block_w1[k])
        lines += _tensor_lines(f"b1_{k}", w.block_b1[k])
        lines += _tensor_lines(f"w2_{k}", w.block_w2[k])
    return "\n".join(lines) + "\n"


def save_model(path, w: SurrogateWeights, proj_m: Projector, proj_u: Projector) -> None:
    Path(path).write_text(model_to_text(w, proj_m, proj_u))


def load_model(path, proj_m: Projector, proj_u: Projector) -> SurrogateWeights:
    """Rebuild weights; the stored checksums must match the supplied projectors."""
    lines = Path(path).read_text().splitlines()
    head = lines[0].split()
    if head[0] != "model":
        raise ValueError(f"{path}: not a model file")
    r_m, r_u, n_blocks, rank = (int(v) for v in head[1:5])
    for row, proj, label in ((1, proj_m, "input"), (2, proj_u, "output")):
        stored = lines[row].split()[1]
        if stored != projector_checksum(proj):
            raise ValueError(f"{path}: {label} projector does not match the model's frozen section")

    pos = 3
    tensors = {}
    while pos < len(lines) and lines[pos].strip():
        parts = lines[pos].split()
        if parts[0] != "tensor":
            raise ValueError(f"{path}: malformed tensor header at line {pos + 1}")
        name = parts[1]
        shape = tuple(int(v) for v in parts[2:])
        count = int(np.prod(shape)) if shape else 1
        vals = np.array([float(v) for v in lines[pos + 1 : pos + 1 + count]])
        tensors[name] = vals.reshape(shape)
        pos += 1 + count

    return SurrogateWeights(
        m_mean=proj_m.mean.copy(),
        in_basis=proj_m.basis.copy(),
        u_mean=proj_u.mean.copy(),
        out_basis=proj_u.basis.copy(),
        dense=tensors["dense"],
        block_w1=[tensors[f"w1_{k}"] for k in range(n_blocks)],
        block_b1=[tensors[f"b1_{k}"] for k in range(n_blocks)],
        block_w2=[tensors[f"w2_{k}"] for k in range(n_blocks)],
    )


def dataset_to_bytes(ds: DataSet) -> bytes:
    q_m, n = ds.m_data.shape
    q_u = ds.u_data.shape[0]
    parts = [
        _MAGIC,
        struct.pack("<III", q_m, q_u, n),
        np.ascontiguousarray(ds.m_mean, dtype="<f8").tobytes(),
        np.ascontiguousarray(ds.u_mean, dtype="<f8").tobytes(),
        np.asfortranarray(ds.m_data, dtype="<f8").tobytes(order="F"),
        np.asfortranarray(ds.u_data, dtype="<f8").tobytes(order="F"),
    ]
    payload = b"".join(parts)
    return payload + hashlib.sha256(payload).digest()


def save_dataset(path, ds: DataSet) -> None:
    Path(path).write_bytes(dataset_to_bytes(ds))


def load_dataset(path, problem_id: str = "", seed: int = 0) -> DataSet:
    raw = Path(path).read_bytes()
    payload, digest = raw[:-32], raw[-32:]
    if hashlib.sha256(payload).digest() != digest:
        raise ValueError(f"{path}: checksum mismatch, file is corrupt")
    if payload[:4] != _MAGIC:
        raise ValueError(f"{path}: not a dataset file")
    q_m, q_u, n = struct.unpack("<III", payload[4:16])
    pos = 16

    def take(count):
        nonlocal pos
        out = np.frombuffer(payload, dtype="<f8", count=count, offset=pos)
        pos += 8 * count
        return out

    m_mean = take(q_m).copy()
    u_mean = take(q_u).copy()
    m_data = take(q_m * n).reshape((q_m, n), order="F").copy()
    u_data = take(q_u * n).reshape((q_u, n), order="F").copy()
    return DataSet(m_data=m_data, u_data=u_data, m_mean=m_mean, u_mean=u_mean, problem_id=problem_id, seed=seed)


def write_csv(path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(repr(v) if isinstance(v, float) else str(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")
