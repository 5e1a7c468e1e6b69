"""Reading and writing triangle meshes in OFF and OBJ."""

from __future__ import annotations

import os

import numpy as np


class MeshFormatError(ValueError):
    pass


def _tokens(path):
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if line:
                yield line


def read_off(path):
    lines = _tokens(path)
    try:
        head = next(lines)
    except StopIteration:
        raise MeshFormatError(f"{path}: empty file") from None
    if not head.startswith("OFF"):
        raise MeshFormatError(f"{path}: missing OFF header")
    rest = head[3:].split()
    counts = rest if rest else next(lines).split()
    try:
        nv, nf = int(counts[0]), int(counts[1])
    except (IndexError, ValueError):
        raise MeshFormatError(f"{path}: bad OFF counts line") from None
    verts = np.empty((nv, 3))
    faces = np.empty((nf, 3), dtype=np.int64)
    try:
        for i in range(nv):
            verts[i] = [float(x) for x in next(lines).split()[:3]]
        for i in range(nf):
            parts = next(lines).split()
            k = int(parts[0])
            if k != 3:
                raise MeshFormatError(f"{path}: face {i} has {k} sides; only triangles are accepted")
            faces[i] = [int(x) for x in parts[1:4]]
    except StopIteration:
        raise MeshFormatError(f"{path}: truncated file") from None
    except ValueError as exc:
        if isinstance(exc, MeshFormatError):
            raise
        raise MeshFormatError(f"{path}: {exc}") from None
    return verts, faces


def read_obj(path):
    verts, faces = [], []
    for line in _tokens(path):
        parts = line.split()
        if parts[0] == "v":
            try:
                verts.append([float(x) for x in parts[1:4]])
            except ValueError:
                raise MeshFormatError(f"{path}: bad vertex line {line!r}") from None
        elif parts[0] == "f":
            try:
                idx = [int(p.split("/")[0]) for p in parts[1:]]
            except ValueError:
                raise MeshFormatError(f"{path}: bad face line {line!r}") from None
            if len(idx) != 3:
                raise MeshFormatError(f"{path}: face with {len(idx)} sides; only triangles are accepted")
            faces.append([i - 1 if i > 0 else len(verts) + i for i in idx])
    return np.array(verts, dtype=float).reshape(-1, 3), np.array(faces, dtype=np.int64).reshape(-1, 3)


def read_mesh(path):
    path = os.fspath(path)
    ext = os.path.splitext(path)[1].lower()
    if ext == ".off":
        verts, faces = read_off(path)
    elif ext == ".obj":
        verts, faces = read_obj(path)
    else:
        raise MeshFormatError(f"{path}: unsupported extension {ext!r} (use .off or .obj)")
    if not np.all(np.isfinite(verts)):
        raise MeshFormatError(f"{path}: non-finite vertex coordinates")
    if faces.size and (faces.min() < 0 or faces.max() >= len(verts)):
        raise MeshFormatError(f"{path}: face references a missing vertex")
    return verts, faces


def _fmt(x):
    # shortest round-trip representation
    return repr(float(x))


def write_mesh(path, verts, faces):
    path = os.fspath(path)
    ext = os.path.splitext(path)[1].lower()
    verts = np.asarray(verts, dtype=float)
    faces = np.asarray(faces, dtype=np.int64)
    if ext not in (".off", ".obj"):
        raise MeshFormatError(f"{path}: unsupported extension {ext!r}")
    with open(path, "w") as fh:
        if ext == ".off":
            fh.write(f"OFF\n{len(verts)} {len(faces)} 0\n")
            for v in verts:
                fh.write(f"{_fmt(v[0])} {_fmt(v[1])} {_fmt(v[2])}\n")
            for f in faces:
                fh.write(f"3 {f[0]} {f[1]} {f[2]}\n")
        elif ext == ".obj":
            for v in verts:
                fh.write(f"v {_fmt(v[0])} {_fmt(v[1])} {_fmt(v[2])}\n")
            for f in faces:
                fh.write(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}\n")


def write_tets_off(path, verts, tets):
    """Coarse volume mesh as an OFF-like listing with 4-vertex cells."""
    with open(path, "w") as fh:
        fh.write(f"OFF\n{len(verts)} {len(tets)} 0\n")
        for v in verts:
            fh.write(f"{_fmt(v[0])} {_fmt(v[1])} {_fmt(v[2])}\n")
        for t in tets:
            fh.write(f"4 {t[0]} {t[1]} {t[2]} {t[3]}\n")
