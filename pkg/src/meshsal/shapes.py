"""Procedural test meshes: cube, icosahedron/icosphere, planar grid, terrain."""

from __future__ import annotations

import numpy as np

from .mesh import TexturedMesh


def cube(size: float = 1.0, center=(0.0, 0.0, 0.0)) -> TexturedMesh:
    """Closed axis-aligned cube with 12 outward-facing triangles."""
    v = np.array(
        [[x, y, z] for x in (-0.5, 0.5) for y in (-0.5, 0.5) for z in (-0.5, 0.5)], dtype=np.float64
    )
    # vertex index = 4*ix + 2*iy + iz
    quads = [
        (0, 1, 3, 2),  # -x
        (4, 6, 7, 5),  # +x
        (0, 4, 5, 1),  # -y
        (2, 3, 7, 6),  # +y
        (0, 2, 6, 4),  # -z
        (1, 5, 7, 3),  # +z
    ]
    f = []
    for a, b, c, d in quads:
        f += [(a, b, c), (a, c, d)]
    return TexturedMesh(v * size + np.asarray(center, float), np.array(f))


def icosahedron(radius: float = 1.0) -> TexturedMesh:
    p = (1 + 5**0.5) / 2
    v = np.array(
        [[-1, p, 0], [1, p, 0], [-1, -p, 0], [1, -p, 0],
         [0, -1, p], [0, 1, p], [0, -1, -p], [0, 1, -p],
         [p, 0, -1], [p, 0, 1], [-p, 0, -1], [-p, 0, 1]], dtype=np.float64,
    )
    f = np.array(
        [[0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
         [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
         [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
         [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1]]
    )
    v = v / np.linalg.norm(v, axis=1, keepdims=True) * radius
    return TexturedMesh(v, f)


def icosphere(level: int = 3, radius: float = 1.0) -> TexturedMesh:
    """Loop-style 4:1 subdivision of the icosahedron, projected to the sphere (20 * 4**level faces)."""
    base = icosahedron()
    v = [tuple(x) for x in base.vertices]
    f = base.faces.tolist()
    for _ in range(level):
        mid = {}

        def midpoint(a, b):
            key = (a, b) if a < b else (b, a)
            if key not in mid:
                m = (np.asarray(v[a]) + np.asarray(v[b])) / 2
                v.append(tuple(m / np.linalg.norm(m)))
                mid[key] = len(v) - 1
            return mid[key]

        nf = []
        for a, b, c in f:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            nf += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        f = nf
    return TexturedMesh(np.asarray(v) * radius, np.asarray(f))


def grid(nx: int = 10, ny: int = 10, size=(1.0, 1.0), with_uv: bool = False) -> TexturedMesh:
    """Planar grid in z=0 with normals +z and 2*nx*ny triangles."""
    xs = np.linspace(0, size[0], nx + 1)
    ys = np.linspace(0, size[1], ny + 1)
    X, Y = np.meshgrid(xs, ys)
    v = np.stack([X.ravel(), Y.ravel(), np.zeros(X.size)], axis=1)
    idx = np.arange((nx + 1) * (ny + 1)).reshape(ny + 1, nx + 1)
    a = idx[:-1, :-1].ravel()
    b = idx[:-1, 1:].ravel()
    c = idx[1:, 1:].ravel()
    d = idx[1:, :-1].ravel()
    f = np.empty((2 * nx * ny, 3), dtype=np.int64)
    f[0::2] = np.stack([a, b, c], axis=1)
    f[1::2] = np.stack([a, c, d], axis=1)
    uv = None
    if with_uv:
        uv = v[f][..., :2] / np.asarray(size, float)
    return TexturedMesh(v, f, uv)


def terrain(n: int = 72, amplitude: float = 0.3, seed: int = 0) -> TexturedMesh:
    """Height-field grid with smooth random bumps; 2*(n-1)**2 faces (n=72 gives 10082)."""
    rng = np.random.default_rng(seed)
    xs = np.linspace(-1, 1, n)
    X, Y = np.meshgrid(xs, xs)
    Z = np.zeros_like(X)
    for _ in range(12):
        cx, cy = rng.uniform(-1, 1, 2)
        s = rng.uniform(0.1, 0.5)
        Z += rng.normal() * np.exp(-((X - cx) ** 2 + (Y - cy) ** 2) / (2 * s * s))
    Z += 0.02 * rng.standard_normal(Z.shape)
    Z *= amplitude / max(np.abs(Z).max(), 1e-12)
    v = np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1)
    g = grid(n - 1, n - 1)
    return TexturedMesh(v, g.faces)


def random_rotation(rng) -> np.ndarray:
    q = rng.standard_normal(4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


def spherical_uv(mesh: TexturedMesh) -> np.ndarray:
    """Per-corner equirectangular UVs for a mesh around the origin (seams are not split)."""
    p = mesh.vertices[mesh.faces]
    r = np.linalg.norm(p, axis=-1)
    u = (np.arctan2(p[..., 1], p[..., 0]) / (2 * np.pi)) % 1.0
    v = np.arccos(np.clip(p[..., 2] / r, -1, 1)) / np.pi
    return np.stack([u, 1.0 - v], axis=-1)
