"""Möller–Trumbore ray/triangle tests and a median-split BVH for closest hits.

The hot loops are numba kernels with ``nogil=True`` so batches of rays can be
split over a thread pool. Results are per-ray pure functions of the inputs, so
any worker count gives identical output.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numba
import numpy as np

EPS_DET = 1e-12
EPS_BARY = 1e-9
LEAF_SIZE = 4
MAX_DEPTH = 64


@dataclass(frozen=True)
class Ray:
    origin: np.ndarray
    direction: np.ndarray
    t_min: float = 0.0
    t_max: float = math.inf

    def __post_init__(self):
        o = np.asarray(self.origin, dtype=np.float64).reshape(3)
        d = np.asarray(self.direction, dtype=np.float64).reshape(3)
        if abs(np.linalg.norm(d) - 1.0) > 1e-9:
            raise ValueError("ray direction must be unit length")
        if not 0 <= self.t_min < self.t_max:
            raise ValueError("need 0 <= t_min < t_max")
        object.__setattr__(self, "origin", o)
        object.__setattr__(self, "direction", d)

    @classmethod
    def towards(cls, origin, target, **kw) -> "Ray":
        d = np.asarray(target, float) - np.asarray(origin, float)
        return cls(origin, d / np.linalg.norm(d), **kw)


@dataclass(frozen=True)
class Hit:
    face: int
    t: float
    barycentric: tuple
    point: np.ndarray


@numba.njit(cache=True, nogil=True, inline="always")
def _mt(ox, oy, oz, dx, dy, dz, ax, ay, az, bx, by, bz, cx, cy, cz, tmin, tmax):
    # returns (hit, t, u, v) with u, v the weights of vertices 1 and 2
    e1x, e1y, e1z = bx - ax, by - ay, bz - az
    e2x, e2y, e2z = cx - ax, cy - ay, cz - az
    px = dy * e2z - dz * e2y
    py = dz * e2x - dx * e2z
    pz = dx * e2y - dy * e2x
    det = e1x * px + e1y * py + e1z * pz
    if abs(det) <= EPS_DET:
        return False, 0.0, 0.0, 0.0
    inv = 1.0 / det
    tx, ty, tz = ox - ax, oy - ay, oz - az
    u = (tx * px + ty * py + tz * pz) * inv
    if u < -EPS_BARY or u > 1.0 + EPS_BARY:
        return False, 0.0, 0.0, 0.0
    qx = ty * e1z - tz * e1y
    qy = tz * e1x - tx * e1z
    qz = tx * e1y - ty * e1x
    v = (dx * qx + dy * qy + dz * qz) * inv
    if v < -EPS_BARY or u + v > 1.0 + EPS_BARY:
        return False, 0.0, 0.0, 0.0
    t = (e2x * qx + e2y * qy + e2z * qz) * inv
    if t < tmin or t > tmax:
        return False, 0.0, 0.0, 0.0
    return True, t, u, v


@numba.njit(cache=True, nogil=True)
def _test_face(V, Fc, f, o, d, tmin, tmax):
    a, b, c = Fc[f, 0], Fc[f, 1], Fc[f, 2]
    return _mt(
        o[0], o[1], o[2], d[0], d[1], d[2],
        V[a, 0], V[a, 1], V[a, 2], V[b, 0], V[b, 1], V[b, 2], V[c, 0], V[c, 1], V[c, 2],
        tmin, tmax,
    )


@numba.njit(cache=True, nogil=True)
def _linear_kernel(V, Fc, O, D, TMIN, TMAX, out_face, out_t, out_uv):
    for r in range(O.shape[0]):
        best_f = -1
        best_t = np.inf
        bu = bv = 0.0
        for f in range(Fc.shape[0]):
            ok, t, u, v = _test_face(V, Fc, f, O[r], D[r], TMIN[r], TMAX[r])
            if ok and (t < best_t or (t == best_t and f < best_f)):
                best_f, best_t, bu, bv = f, t, u, v
        out_face[r] = best_f
        out_t[r] = best_t
        out_uv[r, 0] = bu
        out_uv[r, 1] = bv


@numba.njit(cache=True, nogil=True, inline="always")
def _slab(lo, hi, o, inv, tmin, tmax):
    t0 = tmin
    t1 = tmax
    for k in range(3):
        a = (lo[k] - o[k]) * inv[k]
        b = (hi[k] - o[k]) * inv[k]
        if a > b:
            a, b = b, a
        # NaN from 0 * inf (origin on a slab plane, axis-parallel ray) keeps the box
        if a == a and a > t0:
            t0 = a
        if b == b and b < t1:
            t1 = b
        if t0 > t1:
            return False, 0.0
    return True, t0


@numba.njit(cache=True, nogil=True)
def _bvh_kernel(V, Fc, lo, hi, left, right, start, count, order, O, D, TMIN, TMAX,
                out_face, out_t, out_uv, out_tests):
    stack = np.empty(2 * MAX_DEPTH + 2, dtype=np.int64)
    inv = np.empty(3)
    for r in range(O.shape[0]):
        o = O[r]
        d = D[r]
        for k in range(3):
            inv[k] = 1.0 / d[k] if d[k] != 0.0 else np.inf
        best_f = -1
        best_t = np.inf
        bu = bv = 0.0
        tests = 0
        sp = 0
        stack[sp] = 0
        sp += 1
        while sp > 0:
            sp -= 1
            n = stack[sp]
            # boxes are entered up to best_t inclusive so equal-t ties are still visited
            ok, tn = _slab(lo[n], hi[n], o, inv, TMIN[r], min(TMAX[r], best_t))
            if not ok:
                continue
            if count[n] > 0:
                for i in range(start[n], start[n] + count[n]):
                    f = order[i]
                    tests += 1
                    hit, t, u, v = _test_face(V, Fc, f, o, d, TMIN[r], TMAX[r])
                    if hit and (t < best_t or (t == best_t and f < best_f)):
                        best_f, best_t, bu, bv = f, t, u, v
            else:
                stack[sp] = right[n]
                stack[sp + 1] = left[n]
                sp += 2
        out_face[r] = best_f
        out_t[r] = best_t
        out_uv[r, 0] = bu
        out_uv[r, 1] = bv
        out_tests[r] = tests


@dataclass(frozen=True, eq=False)
class Bvh:
    """Flat binary BVH. Node 0 is the root; leaves have ``count > 0``."""

    lo: np.ndarray
    hi: np.ndarray
    left: np.ndarray
    right: np.ndarray
    start: np.ndarray
    count: np.ndarray
    face_order: np.ndarray
    depth: int

    @property
    def n_nodes(self) -> int:
        return len(self.lo)

    def leaves(self):
        return np.nonzero(self.count > 0)[0]


def build_bvh(mesh, leaf_size: int = LEAF_SIZE) -> Bvh:
    """Median split of face centroids along the widest axis of the node's box."""
    tri = mesh.vertices[mesh.faces]
    flo, fhi = tri.min(axis=1), tri.max(axis=1)
    cent = mesh.face_centers
    F = len(cent)
    if F < 1:
        raise ValueError("cannot build a BVH over zero faces")
    order = np.arange(F)
    lo, hi, left, right, start, count = [], [], [], [], [], []
    max_depth = 0

    def new_node(s, e):
        idx = order[s:e]
        lo.append(flo[idx].min(axis=0))
        hi.append(fhi[idx].max(axis=0))
        left.append(-1)
        right.append(-1)
        start.append(s)
        count.append(e - s)
        return len(lo) - 1

    stack = [(new_node(0, F), 0, F, 0)]
    while stack:
        n, s, e, depth = stack.pop()
        max_depth = max(max_depth, depth)
        if e - s <= leaf_size:
            continue
        if depth >= MAX_DEPTH:
            raise RuntimeError("BVH depth limit exceeded")
        idx = order[s:e]
        axis = int(np.argmax(hi[n] - lo[n]))
        # stable sort keeps the build deterministic on equal centroids
        keys = np.lexsort((idx, cent[idx, axis]))
        order[s:e] = idx[keys]
        m = s + (e - s) // 2
        ln = new_node(s, m)
        rn = new_node(m, e)
        left[n], right[n], count[n] = ln, rn, 0
        stack.append((rn, m, e, depth + 1))
        stack.append((ln, s, m, depth + 1))
    return Bvh(
        np.asarray(lo), np.asarray(hi),
        np.asarray(left, dtype=np.int64), np.asarray(right, dtype=np.int64),
        np.asarray(start, dtype=np.int64), np.asarray(count, dtype=np.int64),
        order.astype(np.int64), max_depth,
    )


def _ray_arrays(origins, directions, t_min=0.0, t_max=np.inf):
    O = np.ascontiguousarray(np.asarray(origins, dtype=np.float64).reshape(-1, 3))
    D = np.ascontiguousarray(np.asarray(directions, dtype=np.float64).reshape(-1, 3))
    n = len(O)
    TMIN = np.ascontiguousarray(np.broadcast_to(np.asarray(t_min, dtype=np.float64), (n,)))
    TMAX = np.ascontiguousarray(np.broadcast_to(np.asarray(t_max, dtype=np.float64), (n,)))
    return O, D, TMIN, TMAX


def _chunks(n, threads):
    threads = max(1, int(threads or 1))
    if threads == 1 or n < 256:
        return [(0, n)]
    step = -(-n // threads)
    return [(s, min(n, s + step)) for s in range(0, n, step)]


@dataclass(frozen=True)
class HitBatch:
    face: np.ndarray  # -1 where nothing was hit
    t: np.ndarray
    barycentric: np.ndarray  # (N, 3)
    point: np.ndarray  # (N, 3)
    tests: Optional[np.ndarray] = None

    def __len__(self):
        return len(self.face)

    def get(self, i) -> Optional[Hit]:
        if self.face[i] < 0:
            return None
        return Hit(int(self.face[i]), float(self.t[i]), tuple(map(float, self.barycentric[i])), self.point[i].copy())


def _finish(mesh, face, t, uv, tests=None):
    hit = face >= 0
    bary = np.zeros((len(face), 3))
    bary[hit, 1:] = uv[hit]
    bary[hit, 0] = 1.0 - uv[hit, 0] - uv[hit, 1]
    point = np.full((len(face), 3), np.nan)
    tri = mesh.vertices[mesh.faces[face[hit]]]
    point[hit] = np.einsum("nk,nkc->nc", bary[hit], tri)
    return HitBatch(face, t, bary, point, tests)


def closest_hits(bvh: Bvh, mesh, origins, directions, t_min=0.0, t_max=np.inf, threads=1) -> HitBatch:
    """Closest hit for each ray in a batch, ties going to the smaller face index."""
    O, D, TMIN, TMAX = _ray_arrays(origins, directions, t_min, t_max)
    n = len(O)
    face = np.empty(n, dtype=np.int64)
    t = np.empty(n)
    uv = np.empty((n, 2))
    tests = np.empty(n, dtype=np.int64)
    V, Fc = mesh.vertices, mesh.faces

    def run(span):
        s, e = span
        _bvh_kernel(V, Fc, bvh.lo, bvh.hi, bvh.left, bvh.right, bvh.start, bvh.count, bvh.face_order,
                    O[s:e], D[s:e], TMIN[s:e], TMAX[s:e], face[s:e], t[s:e], uv[s:e], tests[s:e])

    spans = _chunks(n, threads)
    if len(spans) == 1:
        run(spans[0])
    else:
        with ThreadPoolExecutor(len(spans)) as pool:
            list(pool.map(run, spans))
    return _finish(mesh, face, t, uv, tests)


def linear_hits(mesh, origins, directions, t_min=0.0, t_max=np.inf) -> HitBatch:
    """Brute-force scan over every face; the reference for :func:`closest_hits`."""
    O, D, TMIN, TMAX = _ray_arrays(origins, directions, t_min, t_max)
    n = len(O)
    face = np.empty(n, dtype=np.int64)
    t = np.empty(n)
    uv = np.empty((n, 2))
    _linear_kernel(mesh.vertices, mesh.faces, O, D, TMIN, TMAX, face, t, uv)
    return _finish(mesh, face, t, uv)


def closest_hit(bvh: Bvh, mesh, ray: Ray) -> Optional[Hit]:
    return closest_hits(bvh, mesh, ray.origin[None], ray.direction[None], ray.t_min, ray.t_max).get(0)


def intersect_triangle(ray: Ray, v0, v1, v2) -> Optional[Hit]:
    o, d = ray.origin, ray.direction
    a, b, c = (np.asarray(p, dtype=np.float64) for p in (v0, v1, v2))
    ok, t, u, v = _mt(o[0], o[1], o[2], d[0], d[1], d[2], a[0], a[1], a[2], b[0], b[1], b[2],
                      c[0], c[1], c[2], ray.t_min, ray.t_max)
    if not ok:
        return None
    w = (1.0 - u - v, u, v)
    return Hit(-1, t, w, w[0] * a + w[1] * b + w[2] * c)
