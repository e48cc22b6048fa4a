"""Fixed-size, aspect-preserving texture patches for each face's UV triangle.

Each UV triangle is moved to the (-1, 1) chart scale, its bounding box is
grown to a square about the box center, and a G x G grid of cell centers over
that square is sampled bilinearly. Grid points outside the triangle keep their
samples but are masked out of the summary statistics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import DegenerateFaceError, TexturedMesh
from .texture import TextureImage, sample_uv

UV_AREA_EPS = 1e-14
INSIDE_EPS = 1e-12


@dataclass(frozen=True, eq=False)
class FacePatch:
    face: int
    grid: np.ndarray  # (G, G, 3); row i follows y (v) upwards, column j follows x (u)
    uv_bounds: tuple  # square [x_min, y_min, x_max, y_max] in (-1, 1) scale
    inside_mask: np.ndarray  # (G, G) bool
    mean_color: np.ndarray
    color_variance: float

    def feature_vector(self) -> np.ndarray:
        """Length 3*G*G + 4: mean color, variance, then the flattened grid."""
        return np.concatenate([self.mean_color, [self.color_variance], self.grid.ravel()])


def _uv_area(tri) -> float:
    (x0, y0), (x1, y1), (x2, y2) = tri
    return 0.5 * abs((x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0))


def expand_bounds(uv_triangle) -> tuple:
    tri = np.asarray(uv_triangle, dtype=np.float64).reshape(3, 2)
    if not _uv_area(tri) > UV_AREA_EPS:
        raise ValueError("degenerate UV triangle")
    s = 2.0 * tri - 1.0
    x_min, y_min = s.min(axis=0)
    x_max, y_max = s.max(axis=0)
    return square_bounds(x_min, y_min, x_max, y_max)


def square_bounds(x_min, y_min, x_max, y_max) -> tuple:
    w, h = x_max - x_min, y_max - y_min
    if w > h:
        cy = 0.5 * (y_min + y_max)
        y_min, y_max = cy - 0.5 * w, cy + 0.5 * w
    elif h > w:
        cx = 0.5 * (x_min + x_max)
        x_min, x_max = cx - 0.5 * h, cx + 0.5 * h
    return (float(x_min), float(y_min), float(x_max), float(y_max))


def grid_points(bounds, G: int) -> np.ndarray:
    """Cell-center coordinates (G, G, 2) in (-1, 1) scale."""
    x_min, y_min, x_max, y_max = bounds
    f = (np.arange(G) + 0.5) / G
    xs = x_min + f * (x_max - x_min)
    ys = y_min + f * (y_max - y_min)
    X, Y = np.meshgrid(xs, ys)
    return np.stack([X, Y], axis=-1)


def points_in_triangle(pts, tri, eps: float = INSIDE_EPS) -> np.ndarray:
    """Edge-function test; points within ``eps`` of an edge count as inside."""
    a, b, c = np.asarray(tri, dtype=np.float64)
    area2 = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])
    sgn = 1.0 if area2 > 0 else -1.0

    def edge(p, q):
        e = q - p
        n = np.hypot(e[0], e[1])
        return sgn * (e[0] * (pts[..., 1] - p[1]) - e[1] * (pts[..., 0] - p[0])) / n

    return (edge(a, b) >= -eps) & (edge(b, c) >= -eps) & (edge(c, a) >= -eps)


def sample_patch(tex: TextureImage, bounds, G: int = 8, uv_triangle=None, face: int = -1) -> FacePatch:
    if G < 2:
        raise ValueError("grid size G must be >= 2")
    pts = grid_points(bounds, G)
    grid = sample_uv(tex, (pts + 1.0) / 2.0)
    if uv_triangle is None:
        mask = np.ones((G, G), dtype=bool)
    else:
        tri = 2.0 * np.asarray(uv_triangle, dtype=np.float64) - 1.0
        mask = points_in_triangle(pts, tri)
        if not mask.any():
            # sliver thinner than the grid spacing: use the cell nearest its centroid
            d = ((pts - tri.mean(axis=0)) ** 2).sum(-1)
            mask.flat[int(np.argmin(d))] = True
    inside = grid[mask]
    # shifted statistics stay exact on constant patches
    d = inside - inside[0]
    mean = inside[0] + d.mean(axis=0)
    var = float(d.var(axis=0).mean())
    return FacePatch(face, grid, tuple(bounds), mask, mean, var)


def face_patch(mesh: TexturedMesh, tex: TextureImage, face: int, G: int = 8) -> FacePatch:
    uv = mesh.require_uv()[face]
    try:
        bounds = expand_bounds(uv)
    except ValueError:
        raise DegenerateFaceError([face], "degenerate UV triangle") from None
    return sample_patch(tex, bounds, G, uv_triangle=uv, face=face)


@dataclass(frozen=True, eq=False)
class TextureFeatureTable:
    patches: tuple

    @property
    def mean_color(self) -> np.ndarray:
        return np.array([p.mean_color for p in self.patches])

    @property
    def color_variance(self) -> np.ndarray:
        return np.array([p.color_variance for p in self.patches])

    def columns(self, with_grid: bool = False):
        cols = ["mean_r", "mean_g", "mean_b", "color_variance"]
        if with_grid and self.patches:
            G = self.patches[0].grid.shape[0]
            cols += [f"g{i}_{j}_{c}" for i in range(G) for j in range(G) for c in "rgb"]
        return cols

    def rows(self, with_grid: bool = False) -> np.ndarray:
        base = np.column_stack([self.mean_color, self.color_variance])
        if not with_grid:
            return base
        return np.column_stack([base, np.array([p.grid.ravel() for p in self.patches])])


def face_texture_features(mesh: TexturedMesh, tex: TextureImage = None, G: int = 8) -> TextureFeatureTable:
    uv = mesh.require_uv()
    tex = tex if tex is not None else mesh.texture
    if tex is None:
        raise ValueError("mesh has no texture image")
    bad = [f for f in range(mesh.n_faces) if not _uv_area(uv[f]) > UV_AREA_EPS]
    if bad:
        raise DegenerateFaceError(bad, "degenerate UV triangles")
    return TextureFeatureTable(tuple(face_patch(mesh, tex, f, G) for f in range(mesh.n_faces)))
