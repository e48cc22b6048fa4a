"""Per-face geometric descriptors: normalized centers, triangle shape, ring-normal
structure against fixed direction bases, and angle-deficit Gaussian curvature."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .mesh import DegenerateFaceError, TexturedMesh, ring_depths

N_RINGS = 3


@dataclass(frozen=True, eq=False)
class DirectionBases:
    vectors: np.ndarray  # (K, 3) unit vectors

    @property
    def K(self) -> int:
        return len(self.vectors)

    def rotated(self, R) -> "DirectionBases":
        return DirectionBases(self.vectors @ np.asarray(R).T)


def fibonacci_bases(K: int = 64) -> DirectionBases:
    """K unit vectors on the spherical Fibonacci lattice."""
    if K < 1:
        raise ValueError("K must be >= 1")
    i = np.arange(K)
    z = 1.0 - (2 * i + 1) / K
    r = np.sqrt(1.0 - z * z)
    phi = i * math.pi * (3.0 - math.sqrt(5.0))
    return DirectionBases(np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1))


@dataclass(frozen=True)
class SpatialTransform:
    """``normalized = (x - translation) * scale``."""

    translation: np.ndarray
    scale: float

    def apply(self, x):
        return (np.asarray(x) - self.translation) * self.scale

    def invert(self, y):
        return np.asarray(y) / self.scale + self.translation


def normalize_spatial(mesh: TexturedMesh):
    c = mesh.face_centers
    mu = c.mean(axis=0)
    r = np.linalg.norm(c - mu, axis=1).max()
    if not r > 0:
        raise ValueError("zero-extent mesh: all face centers coincide")
    tr = SpatialTransform(mu, 1.0 / r)
    return tr.apply(c), tr


@dataclass(frozen=True)
class ShapeRecord:
    edge_lengths: tuple  # ascending
    angles: tuple  # angle opposite each edge, radians
    area: float
    irregularity: float  # circumradius / (2 * inradius)

    def as_row(self):
        return [*self.edge_lengths, *self.angles, self.area, self.irregularity]


def _shape_from_points(a, b, c) -> ShapeRecord:
    # edge opposite vertex a is |bc|, etc.
    lengths = np.array([np.linalg.norm(c - b), np.linalg.norm(a - c), np.linalg.norm(b - a)])
    area = 0.5 * np.linalg.norm(np.cross(b - a, c - a))
    if not area > 0:
        raise ValueError("degenerate triangle")
    angles = np.empty(3)
    P = (a, b, c)
    for k in range(3):
        u = P[(k + 1) % 3] - P[k]
        v = P[(k + 2) % 3] - P[k]
        angles[k] = math.atan2(np.linalg.norm(np.cross(u, v)), float(u @ v))
    order = np.argsort(lengths, kind="stable")
    la, lb, lc = lengths
    R = la * lb * lc / (4 * area)
    r = area / (0.5 * lengths.sum())
    return ShapeRecord(tuple(lengths[order].tolist()), tuple(angles[order].tolist()), float(area), float(R / (2 * r)))


def shape_descriptor(mesh: TexturedMesh, face: int) -> ShapeRecord:
    if not 0 <= face < mesh.n_faces:
        raise IndexError(f"face {face} out of range")
    a, b, c = mesh.vertices[mesh.faces[face]]
    try:
        return _shape_from_points(a, b, c)
    except ValueError:
        raise DegenerateFaceError([face]) from None


def ring_sets(mesh: TexturedMesh, face: int, max_ring: int = N_RINGS):
    """``N(f, R)`` for R = 1..max_ring as index arrays, each including ``face``."""
    depth = ring_depths(mesh, face, max_ring)
    items = sorted(depth.items())
    idx = np.array([f for f, _ in items])
    d = np.array([k for _, k in items])
    return [idx[d <= R] for R in range(1, max_ring + 1)]


def structural_descriptor(mesh: TexturedMesh, face: int, bases: DirectionBases = None) -> np.ndarray:
    """(3, K) table; entry (R-1, k) is max cosine between ``bases[k]`` and the normals of N(f, R)."""
    bases = bases if bases is not None else fibonacci_bases()
    rows = [(mesh.face_normals[m] @ bases.vectors.T).max(axis=0) for m in ring_sets(mesh, face)]
    return np.clip(np.asarray(rows), -1.0, 1.0)


def structural_table(mesh: TexturedMesh, bases: DirectionBases = None) -> np.ndarray:
    bases = bases if bases is not None else fibonacci_bases()
    cos = mesh.face_normals @ bases.vectors.T
    out = np.empty((mesh.n_faces, N_RINGS, bases.K))
    for f in range(mesh.n_faces):
        for R, members in enumerate(ring_sets(mesh, f)):
            out[f, R] = cos[members].max(axis=0)
    return np.clip(out, -1.0, 1.0)


def corner_angles(mesh: TexturedMesh) -> np.ndarray:
    """Interior angle at each face corner, (F, 3)."""
    P = mesh.vertices[mesh.faces]
    out = np.empty((mesh.n_faces, 3))
    for k in range(3):
        u = P[:, (k + 1) % 3] - P[:, k]
        v = P[:, (k + 2) % 3] - P[:, k]
        out[:, k] = np.arctan2(np.linalg.norm(np.cross(u, v), axis=1), np.einsum("ij,ij->i", u, v))
    return out


def angle_deficits(mesh: TexturedMesh) -> np.ndarray:
    """Integrated Gaussian curvature per vertex: 2*pi (pi on the boundary) minus the angle sum.

    Vertices referenced by no face get 0.
    """
    ang = corner_angles(mesh)
    total = np.bincount(mesh.faces.ravel(), weights=ang.ravel(), minlength=mesh.n_vertices)
    used = np.bincount(mesh.faces.ravel(), minlength=mesh.n_vertices) > 0
    full = np.where(mesh.boundary_vertices(), math.pi, 2 * math.pi)
    return np.where(used, full - total, 0.0)


def vertex_gaussian_curvature(mesh: TexturedMesh) -> np.ndarray:
    area = np.bincount(mesh.faces.ravel(), weights=np.repeat(mesh.face_areas / 3.0, 3),
                       minlength=mesh.n_vertices)
    deficit = angle_deficits(mesh)
    out = np.zeros(mesh.n_vertices)
    ok = area > 0
    out[ok] = deficit[ok] / area[ok]
    return out


def gaussian_curvature(mesh: TexturedMesh) -> np.ndarray:
    """Per-face mean of the three vertex curvatures (1/m^2)."""
    return vertex_gaussian_curvature(mesh)[mesh.faces].mean(axis=1)


@dataclass(frozen=True, eq=False)
class FaceFeatureTable:
    centers: np.ndarray  # (F, 3) normalized
    corner_vectors: np.ndarray  # (F, 3, 3), same normalization as centers
    shape: np.ndarray  # (F, 8): 3 lengths, 3 angles, area, irregularity
    structural: np.ndarray  # (F, 3, K)
    gaussian_curvature: np.ndarray  # (F,)
    transform: SpatialTransform

    def columns(self):
        K = self.structural.shape[2]
        cols = ["face", "cx", "cy", "cz"]
        cols += [f"corner{i}_{a}" for i in range(3) for a in "xyz"]
        cols += ["edge0", "edge1", "edge2", "angle0", "angle1", "angle2", "area", "irregularity"]
        cols += ["gaussian_curvature"]
        cols += [f"ring{R + 1}_basis{k}" for R in range(N_RINGS) for k in range(K)]
        return cols

    def rows(self):
        F = len(self.centers)
        return np.column_stack([
            np.arange(F), self.centers, self.corner_vectors.reshape(F, 9), self.shape,
            self.gaussian_curvature, self.structural.reshape(F, -1),
        ])


def face_features(mesh: TexturedMesh, bases: DirectionBases = None, rotation=None) -> FaceFeatureTable:
    """Assemble the geometric feature table.

    ``rotation`` (3x3) optionally pre-rotates the mesh as a training-style
    augmentation; bases are not co-rotated.
    """
    bases = bases if bases is not None else fibonacci_bases()
    if rotation is not None:
        mesh = mesh.with_geometry(vertices=mesh.vertices @ np.asarray(rotation).T)
    centers, tr = normalize_spatial(mesh)
    shape = np.array([shape_descriptor(mesh, f).as_row() for f in range(mesh.n_faces)])
    return FaceFeatureTable(
        centers=centers,
        corner_vectors=mesh.corner_vectors * tr.scale,
        shape=shape,
        structural=structural_table(mesh, bases),
        gaussian_curvature=gaussian_curvature(mesh),
        transform=tr,
    )
