"""Indexed triangle mesh with per-corner UVs, derived geometry and face adjacency."""

from __future__ import annotations

import logging
import os
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .texture import TextureImage, load_texture

log = logging.getLogger(__name__)

AREA_EPS = 1e-12


class MeshError(ValueError):
    pass


class ObjParseError(MeshError):
    def __init__(self, path, lineno, msg):
        super().__init__(f"{path}:{lineno}: {msg}")
        self.path = path
        self.lineno = lineno


class DegenerateFaceError(MeshError):
    def __init__(self, faces, what="degenerate faces"):
        faces = [int(f) for f in faces]
        shown = ", ".join(map(str, faces[:20])) + (" ..." if len(faces) > 20 else "")
        super().__init__(f"{what}: {shown}")
        self.faces = faces


class MissingUVError(MeshError):
    pass


@dataclass(frozen=True)
class LoadOptions:
    uv_wrap: bool = False
    area_eps: float = AREA_EPS
    load_texture: bool = True


@dataclass(frozen=True, eq=False)
class TexturedMesh:
    """Immutable triangle mesh.

    ``uv_corners`` has shape (F, 3, 2) or is None for untextured meshes.
    Derived arrays are computed once at construction.
    """

    vertices: np.ndarray
    faces: np.ndarray
    uv_corners: Optional[np.ndarray] = None
    texture: Optional[TextureImage] = None
    texture_path: Optional[str] = None
    area_eps: float = AREA_EPS
    face_normals: np.ndarray = field(init=False, repr=False)
    face_centers: np.ndarray = field(init=False, repr=False)
    face_areas: np.ndarray = field(init=False, repr=False)
    corner_vectors: np.ndarray = field(init=False, repr=False)
    adjacency: tuple = field(init=False, repr=False)
    nonmanifold_edges: int = field(init=False, repr=False)

    def __post_init__(self):
        V = np.ascontiguousarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        Fc = np.ascontiguousarray(self.faces, dtype=np.int64).reshape(-1, 3)
        if len(Fc) and (Fc.min() < 0 or Fc.max() >= len(V)):
            bad = np.nonzero((Fc < 0).any(1) | (Fc >= len(V)).any(1))[0]
            raise DegenerateFaceError(bad, "face index out of range")
        repeated = (Fc[:, 0] == Fc[:, 1]) | (Fc[:, 1] == Fc[:, 2]) | (Fc[:, 0] == Fc[:, 2])
        tri = V[Fc]
        cross = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
        dbl = np.linalg.norm(cross, axis=1)
        areas = 0.5 * dbl
        bad = np.nonzero(repeated | ~(areas > self.area_eps))[0]
        if len(bad):
            raise DegenerateFaceError(bad)
        uv = None
        if self.uv_corners is not None:
            uv = np.ascontiguousarray(self.uv_corners, dtype=np.float64).reshape(-1, 3, 2)
            if len(uv) != len(Fc):
                raise MeshError(f"uv_corners has {len(uv)} faces, mesh has {len(Fc)}")
        centers = tri.mean(axis=1)
        for name, val in (
            ("vertices", V),
            ("faces", Fc),
            ("uv_corners", uv),
            ("face_normals", cross / dbl[:, None]),
            ("face_centers", centers),
            ("face_areas", areas),
            ("corner_vectors", tri - centers[:, None, :]),
        ):
            if val is not None:
                val.setflags(write=False)
            object.__setattr__(self, name, val)
        adjacency, nonmanifold = _edge_adjacency(Fc)
        object.__setattr__(self, "adjacency", adjacency)
        object.__setattr__(self, "nonmanifold_edges", nonmanifold)
        if nonmanifold:
            log.warning("mesh has %d non-manifold edges", nonmanifold)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def has_uv(self) -> bool:
        return self.uv_corners is not None

    def require_uv(self):
        if self.uv_corners is None:
            raise MissingUVError("mesh has no texture coordinates")
        return self.uv_corners

    def edges(self):
        """Unique undirected edges (E, 2) with a < b, and the per-face-edge index into them."""
        e = np.sort(self.faces[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
        uniq, inv = np.unique(e, axis=0, return_inverse=True)
        return uniq, inv.reshape(-1, 3)

    def boundary_vertices(self) -> np.ndarray:
        uniq, inv = self.edges()
        counts = np.bincount(inv.ravel(), minlength=len(uniq))
        mask = np.zeros(self.n_vertices, dtype=bool)
        mask[uniq[counts == 1].ravel()] = True
        return mask

    def with_geometry(self, vertices=None, faces=None, uv_corners=None):
        return TexturedMesh(
            self.vertices if vertices is None else vertices,
            self.faces if faces is None else faces,
            self.uv_corners if uv_corners is None else uv_corners,
            self.texture,
            self.texture_path,
            self.area_eps,
        )


def _edge_adjacency(faces):
    F = len(faces)
    if F == 0:
        return (), 0
    e = np.sort(faces[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
    owner = np.repeat(np.arange(F), 3)
    order = np.lexsort((owner, e[:, 1], e[:, 0]))
    e, owner = e[order], owner[order]
    starts = np.r_[0, np.nonzero((np.diff(e, axis=0) != 0).any(1))[0] + 1, len(e)]
    nbrs = [set() for _ in range(F)]
    nonmanifold = 0
    for s, t in zip(starts[:-1], starts[1:]):
        if t - s < 2:
            continue
        if t - s > 2:
            nonmanifold += 1
        group = owner[s:t].tolist()
        for a in group:
            for b in group:
                if a != b:
                    nbrs[a].add(b)
    return tuple(tuple(sorted(n)) for n in nbrs), nonmanifold


@dataclass(frozen=True)
class RingNeighborhood:
    face: int
    ring: int
    members: tuple

    def with_center(self) -> tuple:
        """Members plus the face itself, i.e. N(f, R)."""
        return (self.face,) + self.members


def ring_neighbors(mesh: TexturedMesh, face: int, ring: int) -> RingNeighborhood:
    if not 0 <= face < mesh.n_faces:
        raise IndexError(f"face {face} out of range [0, {mesh.n_faces})")
    if ring < 0:
        raise ValueError("ring must be >= 0")
    seen = {face}
    frontier = [face]
    for _ in range(ring):
        nxt = []
        for f in frontier:
            for g in mesh.adjacency[f]:
                if g not in seen:
                    seen.add(g)
                    nxt.append(g)
        frontier = nxt
    seen.discard(face)
    return RingNeighborhood(face, ring, tuple(sorted(seen)))


def ring_depths(mesh: TexturedMesh, face: int, max_ring: int = 3) -> dict:
    """BFS depth of every face within ``max_ring`` of ``face`` (face itself at 0)."""
    depth = {face: 0}
    q = deque([face])
    while q:
        f = q.popleft()
        if depth[f] == max_ring:
            continue
        for g in mesh.adjacency[f]:
            if g not in depth:
                depth[g] = depth[f] + 1
                q.append(g)
    return depth


# ---------------------------------------------------------------- OBJ I/O


def _resolve(idx: int, n: int, path, lineno):
    i = idx - 1 if idx > 0 else n + idx
    if idx == 0 or not 0 <= i < n:
        raise ObjParseError(path, lineno, f"index {idx} out of range (have {n})")
    return i


def load_mesh(path, options: LoadOptions = LoadOptions()) -> TexturedMesh:
    path = os.fspath(path)
    verts, uvs, faces, face_uvs = [], [], [], []
    mtllibs = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            tok = line.split("#", 1)[0].split()
            if not tok:
                continue
            key = tok[0]
            try:
                if key == "v":
                    if len(tok) < 4:
                        raise ValueError("vertex needs 3 coordinates")
                    verts.append([float(x) for x in tok[1:4]])
                elif key == "vt":
                    if len(tok) < 3:
                        raise ValueError("texture coordinate needs 2 values")
                    uvs.append([float(x) for x in tok[1:3]])
                elif key == "f":
                    if len(tok) < 4:
                        raise ValueError("face needs at least 3 corners")
                    vi, ti = [], []
                    for c in tok[1:]:
                        parts = c.split("/")
                        vi.append(_resolve(int(parts[0]), len(verts), path, lineno))
                        if len(parts) > 1 and parts[1] != "":
                            ti.append(_resolve(int(parts[1]), len(uvs), path, lineno))
                    if ti and len(ti) != len(vi):
                        raise ValueError("mixed corners with and without vt")
                    for k in range(1, len(vi) - 1):
                        faces.append((vi[0], vi[k], vi[k + 1]))
                        face_uvs.append((ti[0], ti[k], ti[k + 1]) if ti else None)
                elif key == "mtllib":
                    mtllibs.append(line.split(None, 1)[1].split("#", 1)[0].strip())
            except ObjParseError:
                raise
            except ValueError as exc:
                raise ObjParseError(path, lineno, str(exc)) from None
    if not faces:
        raise MeshError(f"{path}: no faces")
    with_uv = [u is not None for u in face_uvs]
    uv_corners = None
    if any(with_uv):
        if not all(with_uv):
            raise MeshError(f"{path}: some faces carry vt indices and some do not")
        uv_corners = np.asarray(uvs, dtype=np.float64)[np.asarray(face_uvs)]
        outside = (uv_corners < 0) | (uv_corners > 1)
        if outside.any():
            if not options.uv_wrap:
                bad = np.nonzero(outside.any(axis=(1, 2)))[0]
                raise DegenerateFaceError(bad, "UV outside [0,1] (set uv_wrap)")
            uv_corners = np.where(outside, np.mod(uv_corners, 1.0), uv_corners)

    texture = texture_path = None
    base = os.path.dirname(path)
    for lib in mtllibs:
        tp = _diffuse_from_mtl(os.path.join(base, lib))
        if tp:
            texture_path = tp
            break
    if texture_path and options.load_texture:
        texture = load_texture(texture_path)
    return TexturedMesh(
        np.asarray(verts, dtype=np.float64),
        np.asarray(faces, dtype=np.int64),
        uv_corners,
        texture,
        texture_path,
        options.area_eps,
    )


def _diffuse_from_mtl(mtl_path):
    if not os.path.exists(mtl_path):
        log.warning("material file %s not found", mtl_path)
        return None
    with open(mtl_path, "r", encoding="utf-8") as fh:
        for line in fh:
            tok = line.split()
            if tok and tok[0] == "map_Kd" and len(tok) > 1:
                return os.path.join(os.path.dirname(mtl_path), tok[-1])
    return None


def _fmt(x: float) -> str:
    return repr(float(x))


def save_mesh(mesh: TexturedMesh, path, mtllib: Optional[str] = None):
    """Write OBJ. Floats are written with ``repr`` so reloading is bit-exact."""
    path = os.fspath(path)
    lines = []
    if mtllib:
        lines.append(f"mtllib {mtllib}")
    for x, y, z in mesh.vertices:
        lines.append(f"v {_fmt(x)} {_fmt(y)} {_fmt(z)}")
    if mesh.uv_corners is None:
        for a, b, c in mesh.faces + 1:
            lines.append(f"f {a} {b} {c}")
    else:
        flat = mesh.uv_corners.reshape(-1, 2)
        index = {}
        corner_ids = np.empty(len(flat), dtype=np.int64)
        for i, (u, v) in enumerate(flat):
            key = (float(u), float(v))
            if key not in index:
                index[key] = len(index)
                lines.append(f"vt {_fmt(u)} {_fmt(v)}")
            corner_ids[i] = index[key]
        corner_ids = corner_ids.reshape(-1, 3) + 1
        for (a, b, c), (ta, tb, tc) in zip(mesh.faces + 1, corner_ids):
            lines.append(f"f {a}/{ta} {b}/{tb} {c}/{tc}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def save_mtl(path, texture_filename: str):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"newmtl material0\nmap_Kd {texture_filename}\n")


def save_ply_colored(path, vertices, faces, colors):
    """Binary little-endian PLY with uchar RGB vertex colors."""
    vertices = np.asarray(vertices, dtype="<f4")
    colors = np.asarray(colors, dtype=np.uint8)
    faces = np.asarray(faces, dtype="<i4")
    header = (
        "ply\nformat binary_little_endian 1.0\n"
        f"element vertex {len(vertices)}\n"
        "property float x\nproperty float y\nproperty float z\n"
        "property uchar red\nproperty uchar green\nproperty uchar blue\n"
        f"element face {len(faces)}\n"
        "property list uchar int vertex_indices\nend_header\n"
    )
    vdt = np.dtype([("p", "<f4", 3), ("c", "u1", 3)])
    vrec = np.empty(len(vertices), dtype=vdt)
    vrec["p"], vrec["c"] = vertices, colors
    fdt = np.dtype([("n", "u1"), ("i", "<i4", 3)])
    frec = np.empty(len(faces), dtype=fdt)
    frec["n"], frec["i"] = 3, faces
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(vrec.tobytes())
        fh.write(frec.tobytes())


def read_ply_colored(path):
    """Reader for files written by :func:`save_ply_colored` (tests and tooling)."""
    with open(path, "rb") as fh:
        data = fh.read()
    end = data.index(b"end_header\n") + len(b"end_header\n")
    header = data[:end].decode("ascii").splitlines()
    nv = int(next(h for h in header if h.startswith("element vertex")).split()[-1])
    nf = int(next(h for h in header if h.startswith("element face")).split()[-1])
    vdt = np.dtype([("p", "<f4", 3), ("c", "u1", 3)])
    fdt = np.dtype([("n", "u1"), ("i", "<i4", 3)])
    v = np.frombuffer(data, dtype=vdt, count=nv, offset=end)
    f = np.frombuffer(data, dtype=fdt, count=nf, offset=end + nv * vdt.itemsize)
    return v["p"].astype(np.float64), f["i"].astype(np.int64), v["c"].copy()


__all__ = [
    "AREA_EPS",
    "DegenerateFaceError",
    "LoadOptions",
    "MeshError",
    "MissingUVError",
    "ObjParseError",
    "RingNeighborhood",
    "TexturedMesh",
    "load_mesh",
    "read_ply_colored",
    "ring_depths",
    "ring_neighbors",
    "save_mesh",
    "save_mtl",
    "save_ply_colored",
]
