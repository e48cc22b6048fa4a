"""Quadric-error edge-collapse decimation with a per-face saliency penalty.

Collapse cost is the usual ``v^T (Qa + Qb) v`` at the optimal position,
multiplied by ``(1 + lam * s_e) ** gamma`` where ``s_e`` is the largest
saliency among the faces the collapse touches: by default every face around
either endpoint (``support="ring"``), or only the faces sharing the edge
(``support="edge"``). Saliency is max-normalized to [0, 1].
"""

from __future__ import annotations

import heapq
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .mesh import TexturedMesh

log = logging.getLogger(__name__)

COND_LIMIT = 1e8
BOUNDARY_WEIGHT = 1.0


class SimplifyError(ValueError):
    pass


class TargetUnreachable(SimplifyError):
    def __init__(self, msg, result=None):
        super().__init__(msg)
        self.result = result


class NonManifoldError(SimplifyError):
    pass


@dataclass(frozen=True)
class SimplifyParams:
    lam: float = 9.0
    gamma: float = 1.0
    allow_seam_collapse: bool = False
    strict: bool = False  # raise on non-manifold edges instead of skipping them
    support: str = "ring"  # "ring" | "edge"

    def __post_init__(self):
        if self.lam < 0 or self.gamma < 0:
            raise ValueError("lam and gamma must be nonnegative")
        if self.support not in ("ring", "edge"):
            raise ValueError("support must be 'ring' or 'edge'")


@dataclass(frozen=True)
class CollapseCandidate:
    edge: tuple
    optimal_position: np.ndarray
    base_cost: float
    weighted_cost: float
    saliency_weight: float


@dataclass(frozen=True, eq=False)
class SimplifyResult:
    mesh: TexturedMesh
    face_origin: np.ndarray  # original face index of each output face
    vertex_origin: np.ndarray  # original vertex index of each output vertex
    collapses: int
    history: list = field(default_factory=list, repr=False)


def plane_quadric(n, p) -> np.ndarray:
    d = -float(n @ p)
    h = np.array([n[0], n[1], n[2], d])
    return np.outer(h, h)


def vertex_quadrics(mesh: TexturedMesh, boundary_weight: float = BOUNDARY_WEIGHT) -> np.ndarray:
    """Per-vertex sum of incident face-plane quadrics, plus perpendicular planes on boundary edges."""
    n = mesh.face_normals
    p0 = mesh.vertices[mesh.faces[:, 0]]
    h = np.column_stack([n, -np.einsum("ij,ij->i", n, p0)])
    Kf = h[:, :, None] * h[:, None, :]
    Q = np.zeros((mesh.n_vertices, 4, 4))
    for k in range(3):
        np.add.at(Q, mesh.faces[:, k], Kf)
    if boundary_weight > 0:
        edges, inv = mesh.edges()
        counts = np.bincount(inv.ravel(), minlength=len(edges))
        for f, k in zip(*np.nonzero(counts[inv] == 1)):
            a, b = mesh.faces[f, k], mesh.faces[f, (k + 1) % 3]
            e = mesh.vertices[b] - mesh.vertices[a]
            m = np.cross(e, n[f])
            nm = np.linalg.norm(m)
            if nm == 0:
                continue
            Kb = boundary_weight * plane_quadric(m / nm, mesh.vertices[a])
            Q[a] += Kb
            Q[b] += Kb
    return Q


def quadric_cost(Q, v) -> float:
    h = np.append(v, 1.0)
    return max(0.0, float(h @ Q @ h))


def optimal_position(Q, pa, pb):
    A = Q[:3, :3]
    if np.linalg.cond(A) < COND_LIMIT:
        v = np.linalg.solve(A, -Q[:3, 3])
        return v, quadric_cost(Q, v)
    best = None
    for v in (pa, pb, 0.5 * (pa + pb)):
        c = quadric_cost(Q, v)
        if best is None or c < best[1]:
            best = (v, c)
    return best


def saliency_weight(s_e: float, lam: float, gamma: float) -> float:
    return (1.0 + lam * s_e) ** gamma


def _prepare_saliency(saliency, n_faces):
    if saliency is None:
        return np.zeros(n_faces)
    s = np.asarray(getattr(saliency, "values", saliency), dtype=np.float64).reshape(-1)
    if len(s) != n_faces:
        raise SimplifyError(f"saliency has {len(s)} values, mesh has {n_faces} faces")
    if np.any(s < 0):
        raise SimplifyError("saliency must be nonnegative")
    tot = s.sum()
    if tot > 0:
        s = s / tot
        s = s / s.max()
    return s


class _State:
    def __init__(self, mesh: TexturedMesh, sal, params: SimplifyParams):
        self.V = mesh.vertices.copy()
        self.F = mesh.faces.copy()
        self.uv = None if mesh.uv_corners is None else mesh.uv_corners.copy()
        self.alive = np.ones(len(self.F), dtype=bool)
        self.valive = np.zeros(len(self.V), dtype=bool)
        self.valive[self.F.ravel()] = True
        self.vf = [set() for _ in range(len(self.V))]
        for f, tri in enumerate(self.F):
            for v in tri:
                self.vf[v].add(f)
        self.Q = vertex_quadrics(mesh)
        self.sal = sal
        self.params = params
        self.version = np.zeros(len(self.V), dtype=np.int64)
        self.area_eps = mesh.area_eps
        self.n_alive = len(self.F)

    def neighbors(self, v):
        out = set()
        for f in self.vf[v]:
            out.update(self.F[f].tolist())
        out.discard(v)
        return out

    def edge_faces(self, a, b):
        return sorted(self.vf[a] & self.vf[b])

    def is_boundary_vertex(self, v):
        return any(len(self.edge_faces(v, u)) == 1 for u in self.neighbors(v))

    def is_seam_vertex(self, v):
        if self.uv is None:
            return False
        uvs = set()
        for f in self.vf[v]:
            k = int(np.nonzero(self.F[f] == v)[0][0])
            uvs.add((float(self.uv[f, k, 0]), float(self.uv[f, k, 1])))
            if len(uvs) > 1:
                return True
        return False

    def candidate(self, a, b) -> Optional[CollapseCandidate]:
        Q = self.Q[a] + self.Q[b]
        v, cost = optimal_position(Q, self.V[a], self.V[b])
        if self.params.support == "ring":
            faces = self.vf[a] | self.vf[b]
        else:
            faces = self.edge_faces(a, b)
        s_e = max((self.sal[f] for f in faces), default=0.0)
        w = saliency_weight(s_e, self.params.lam, self.params.gamma)
        return CollapseCandidate((a, b), v, cost, cost * w, w)

    def legal(self, a, b, v) -> bool:
        shared = self.edge_faces(a, b)
        if not shared:
            return False
        if len(shared) > 2:
            if self.params.strict:
                raise NonManifoldError(f"non-manifold edge ({a}, {b})")
            return False
        # link condition: common neighbours are exactly the opposite corners of the edge's faces
        opposite = set()
        for f in shared:
            opposite.update(self.F[f].tolist())
        opposite -= {a, b}
        if (self.neighbors(a) & self.neighbors(b)) != opposite:
            return False
        if len(shared) == 2 and self.is_boundary_vertex(a) and self.is_boundary_vertex(b):
            return False
        if not self.params.allow_seam_collapse and (self.is_seam_vertex(a) or self.is_seam_vertex(b)):
            return False
        shared_set = set(shared)
        seen = set()
        for u in (a, b):
            for f in self.vf[u]:
                if f in shared_set:
                    continue
                tri = self.F[f].copy()
                P = self.V[tri]
                n_old = np.cross(P[1] - P[0], P[2] - P[0])
                tri[tri == b] = a
                P = P.copy()
                P[tri == a] = v
                n_new = np.cross(P[1] - P[0], P[2] - P[0])
                if n_old @ n_new < 0 or 0.5 * np.linalg.norm(n_new) <= self.area_eps:
                    return False
                key = tuple(sorted(tri.tolist()))
                if key in seen:
                    return False
                seen.add(key)
        return True

    def collapse(self, a, b, v):
        for f in self.edge_faces(a, b):
            self.alive[f] = False
            self.n_alive -= 1
            for u in self.F[f]:
                self.vf[u].discard(f)
        a_uv = None
        if self.uv is not None and not self.is_seam_vertex(a) and self.vf[a]:
            f0 = next(iter(self.vf[a]))
            a_uv = self.uv[f0, int(np.nonzero(self.F[f0] == a)[0][0])].copy()
        for f in self.vf[b]:
            k = int(np.nonzero(self.F[f] == b)[0][0])
            self.F[f, k] = a
            if a_uv is not None:
                self.uv[f, k] = a_uv
            self.vf[a].add(f)
        self.vf[b] = set()
        self.valive[b] = False
        self.V[a] = v
        self.Q[a] = self.Q[a] + self.Q[b]
        self.version[a] += 1
        self.version[b] += 1


def simplify(mesh: TexturedMesh, saliency=None, target_faces: int = None,
             params: SimplifyParams = SimplifyParams(),
             progress: Optional[Callable[[int, int], None]] = None) -> SimplifyResult:
    F0 = mesh.n_faces
    if target_faces is None:
        target_faces = F0 // 2
    if not 4 <= target_faces <= F0:
        raise SimplifyError(f"target_faces must lie in [4, {F0}], got {target_faces}")
    sal = _prepare_saliency(saliency, F0)
    if target_faces == F0:
        return SimplifyResult(mesh, np.arange(F0), np.arange(mesh.n_vertices), 0)
    st = _State(mesh, sal, params)

    heap = []

    def push_edges_of(v):
        for u in st.neighbors(v):
            a, b = (v, u) if v < u else (u, v)
            c = st.candidate(a, b)
            heapq.heappush(heap, (c.weighted_cost, a, b, st.version[a], st.version[b]))

    edges, _ = mesh.edges()
    for a, b in edges.tolist():
        c = st.candidate(a, b)
        heap.append((c.weighted_cost, a, b, 0, 0))
    heapq.heapify(heap)

    collapses = 0
    history = []
    while st.n_alive > target_faces and heap:
        cost, a, b, va, vb = heapq.heappop(heap)
        if not (st.valive[a] and st.valive[b]):
            continue
        if va != st.version[a] or vb != st.version[b]:
            continue
        c = st.candidate(a, b)
        if not st.legal(a, b, c.optimal_position):
            continue
        # keep the endpoint with the smaller index
        st.collapse(a, b, c.optimal_position)
        collapses += 1
        history.append(c)
        ring = st.neighbors(a)
        for u in ring:
            st.version[u] += 1
        push_edges_of(a)
        for u in sorted(ring):
            push_edges_of(u)
        if progress is not None:
            progress(st.n_alive, target_faces)

    keep_f = np.nonzero(st.alive)[0]
    used = np.zeros(len(st.V), dtype=bool)
    used[st.F[keep_f].ravel()] = True
    vmap = -np.ones(len(st.V), dtype=np.int64)
    vmap[used] = np.arange(used.sum())
    out = TexturedMesh(
        st.V[used], vmap[st.F[keep_f]],
        None if st.uv is None else st.uv[keep_f],
        mesh.texture, mesh.texture_path, mesh.area_eps,
    )
    result = SimplifyResult(out, keep_f, np.nonzero(used)[0], collapses, history)
    if out.n_faces > target_faces:
        raise TargetUnreachable(
            f"no legal collapse left at {out.n_faces} faces (target {target_faces})", result)
    return result


def simplify_mesh(mesh: TexturedMesh, saliency=None, target_faces: int = None,
                  params: SimplifyParams = SimplifyParams(), progress=None) -> TexturedMesh:
    return simplify(mesh, saliency, target_faces, params, progress).mesh
