"""Gaze logs recorded against a turntable stimulus -> fixations -> per-face saliency.

Frames: gaze samples live in the world frame. The stimulus turns about
``RotationSchedule.axis`` through the origin, so model point ``p`` sits at
``R(theta(t)) @ p`` in the world. All hits and fixations are reported in the
static model frame.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .raycast import Bvh, Hit, Ray, build_bvh, closest_hits

log = logging.getLogger(__name__)


class GazeError(ValueError):
    pass


class GazeLogError(GazeError):
    def __init__(self, path, lineno, msg):
        where = f"{path}:{lineno}" if lineno else str(path)
        super().__init__(f"{where}: {msg}")
        self.path, self.lineno = path, lineno


class ZeroSaliencyError(GazeError):
    pass


# --------------------------------------------------------------- data types


@dataclass(frozen=True)
class GazeSample:
    timestamp: float
    gaze_origin: np.ndarray
    gaze_direction: np.ndarray
    head_position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    head_direction: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))


@dataclass(frozen=True, eq=False)
class GazeLog:
    """Column-oriented gaze log; ``timestamps`` in ms, vectors (N, 3)."""

    timestamps: np.ndarray
    origins: np.ndarray
    directions: np.ndarray
    head_positions: np.ndarray
    head_directions: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.timestamps, dtype=np.float64).reshape(-1)
        n = len(t)
        arrs = {}
        for name in ("origins", "directions", "head_positions", "head_directions"):
            a = np.asarray(getattr(self, name), dtype=np.float64).reshape(n, 3)
            arrs[name] = a
        if n > 1 and not np.all(np.diff(t) > 0):
            raise GazeError("timestamps must be strictly increasing")
        for name in ("directions", "head_directions"):
            norm = np.linalg.norm(arrs[name], axis=1)
            if np.any(norm < 1e-6):
                raise GazeError(f"{name}: zero-length vector at sample {int(np.argmin(norm))}")
            arrs[name] = arrs[name] / norm[:, None]
        object.__setattr__(self, "timestamps", t)
        for k, v in arrs.items():
            object.__setattr__(self, k, v)

    def __len__(self):
        return len(self.timestamps)

    def __getitem__(self, i) -> GazeSample:
        return GazeSample(
            float(self.timestamps[i]), self.origins[i], self.directions[i],
            self.head_positions[i], self.head_directions[i],
        )

    @classmethod
    def from_samples(cls, samples: Sequence[GazeSample]) -> "GazeLog":
        return cls(
            [s.timestamp for s in samples],
            [s.gaze_origin for s in samples],
            [s.gaze_direction for s in samples],
            [s.head_position for s in samples],
            [s.head_direction for s in samples],
        )

    @classmethod
    def concat(cls, logs: Sequence["GazeLog"]) -> "GazeLog":
        return cls(*(np.concatenate([getattr(g, k) for g in logs]) for k in (
            "timestamps", "origins", "directions", "head_positions", "head_directions")))


@dataclass(frozen=True)
class RotationSchedule:
    axis: tuple = (0.0, 1.0, 0.0)
    angular_speed: float = 15.0  # deg/s
    sign: int = -1  # -1: clockwise seen from +axis
    t0: float = 0.0  # ms

    def __post_init__(self):
        if self.angular_speed < 0:
            raise ValueError("angular_speed must be >= 0")
        if self.sign not in (-1, 1):
            raise ValueError("sign must be +1 or -1")
        a = np.asarray(self.axis, dtype=np.float64)
        n = np.linalg.norm(a)
        if n < 1e-12:
            raise ValueError("rotation axis must be nonzero")
        object.__setattr__(self, "axis", tuple(float(x) for x in a / n))

    def angle_deg(self, t_ms):
        return self.sign * self.angular_speed * (np.asarray(t_ms, dtype=np.float64) - self.t0) / 1000.0

    def model_to_world_matrix(self, t_ms) -> np.ndarray:
        return rotation_matrices(self.axis, self.angle_deg(t_ms))

    def world_to_model_matrix(self, t_ms) -> np.ndarray:
        return rotation_matrices(self.axis, -self.angle_deg(t_ms))


STATIC = RotationSchedule(angular_speed=0.0)


def rotation_matrices(axis, angle_deg) -> np.ndarray:
    """Right-handed rotation(s) about a unit axis; shape (..., 3, 3)."""
    k = np.asarray(axis, dtype=np.float64)
    th = np.radians(np.asarray(angle_deg, dtype=np.float64))
    c, s = np.cos(th), np.sin(th)
    K = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    KK = K @ K
    return np.eye(3) + s[..., None, None] * K + (1 - c)[..., None, None] * KK


def world_to_model(sample: GazeSample, schedule: RotationSchedule) -> Ray:
    if sample.timestamp < schedule.t0:
        raise GazeError("sample precedes the rotation schedule start")
    R = schedule.world_to_model_matrix(sample.timestamp)
    d = R @ np.asarray(sample.gaze_direction, float)
    return Ray(R @ np.asarray(sample.gaze_origin, float), d / np.linalg.norm(d))


def model_to_world(ray: Ray, t_ms: float, schedule: RotationSchedule) -> Ray:
    R = schedule.model_to_world_matrix(t_ms)
    d = R @ ray.direction
    return Ray(R @ ray.origin, d / np.linalg.norm(d), ray.t_min, ray.t_max)


def log_to_model(log: GazeLog, schedule: RotationSchedule):
    R = schedule.world_to_model_matrix(log.timestamps)
    o = np.einsum("nij,nj->ni", R, log.origins)
    d = np.einsum("nij,nj->ni", R, log.directions)
    return o, d / np.linalg.norm(d, axis=1, keepdims=True)


# --------------------------------------------------------------- intersection


@dataclass(frozen=True, eq=False)
class LogHits:
    """Per-sample model-frame rays and closest front-facing hits (face -1 = miss)."""

    log: GazeLog
    model_origins: np.ndarray
    model_directions: np.ndarray
    face: np.ndarray
    t: np.ndarray
    barycentric: np.ndarray
    point: np.ndarray

    def __len__(self):
        return len(self.face)

    def hit(self, i) -> Optional[Hit]:
        if self.face[i] < 0:
            return None
        return Hit(int(self.face[i]), float(self.t[i]), tuple(map(float, self.barycentric[i])), self.point[i])

    def pairs(self):
        return [(self.log[i], self.hit(i)) for i in range(len(self))]


def intersect_log(log: GazeLog, mesh, bvh: Optional[Bvh] = None,
                  schedule: RotationSchedule = RotationSchedule(), threads: int = 1) -> LogHits:
    if len(log) == 0:
        raise GazeError("no samples")
    if np.any(log.timestamps < schedule.t0):
        raise GazeError("samples precede the rotation schedule start")
    bvh = bvh if bvh is not None else build_bvh(mesh)
    o, d = log_to_model(log, schedule)
    hb = closest_hits(bvh, mesh, o, d, threads=threads)
    face = hb.face.copy()
    hit = face >= 0
    # back-facing hits are dropped
    facing = np.einsum("ij,ij->i", mesh.face_normals[face[hit]], o[hit] - hb.point[hit])
    drop = np.nonzero(hit)[0][facing <= 0]
    face[drop] = -1
    return LogHits(log, o, d, face, hb.t, hb.barycentric, hb.point)


# --------------------------------------------------------------- I-VT


@dataclass(frozen=True)
class IVTParams:
    velocity_threshold: float = 30.0  # deg/s
    min_fixation_duration: float = 100.0  # ms
    merge_angle: float = 0.5  # deg
    merge_gap: float = 75.0  # ms
    gap_factor: float = 3.0  # gaps above gap_factor * median dt split segments


@dataclass(frozen=True, eq=False)
class Fixation:
    face: int
    barycentric: tuple
    surface_point: np.ndarray
    start: float
    end: float
    duration: float
    mean_view_distance: float
    viewpoint: np.ndarray  # mean model-frame gaze origin
    direction: np.ndarray  # mean world-frame gaze direction
    samples: tuple = field(default=(), repr=False)


def closest_point_on_triangle(p, a, b, c):
    """Closest point and its barycentric weights (Ericson's region test)."""
    ab, ac, ap = b - a, c - a, p - a
    d1, d2 = ab @ ap, ac @ ap
    if d1 <= 0 and d2 <= 0:
        return a, (1.0, 0.0, 0.0)
    bp = p - b
    d3, d4 = ab @ bp, ac @ bp
    if d3 >= 0 and d4 <= d3:
        return b, (0.0, 1.0, 0.0)
    vc = d1 * d4 - d3 * d2
    if vc <= 0 and d1 >= 0 and d3 <= 0:
        v = d1 / (d1 - d3)
        return a + v * ab, (1 - v, v, 0.0)
    cp = p - c
    d5, d6 = ab @ cp, ac @ cp
    if d6 >= 0 and d5 <= d6:
        return c, (0.0, 0.0, 1.0)
    vb = d5 * d2 - d1 * d6
    if vb <= 0 and d2 >= 0 and d6 <= 0:
        w = d2 / (d2 - d6)
        return a + w * ac, (1 - w, 0.0, w)
    va = d3 * d6 - d5 * d4
    if va <= 0 and (d4 - d3) >= 0 and (d5 - d6) >= 0:
        w = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        return b + w * (c - b), (0.0, 1 - w, w)
    denom = 1.0 / (va + vb + vc)
    v, w = vb * denom, vc * denom
    return a + ab * v + ac * w, (1 - v - w, v, w)


def _build_fixation(hits: LogHits, mesh, idx, weights) -> Fixation:
    idx = np.asarray(idx)
    w = np.asarray(weights, dtype=np.float64)
    faces = hits.face[idx]
    # modal face by accumulated duration, ties to the smaller index
    per_face = {}
    for f, wi in zip(faces.tolist(), w.tolist()):
        per_face[f] = per_face.get(f, 0.0) + wi
    modal = min(per_face, key=lambda f: (-per_face[f], f))
    W = w.sum()
    mean_pt = (w[:, None] * hits.point[idx]).sum(0) / W
    a, b, c = mesh.vertices[mesh.faces[modal]]
    p, bary = closest_point_on_triangle(mean_pt, a, b, c)
    bary = np.asarray(bary)
    bary = tuple(float(x) for x in bary / bary.sum())
    d = (w[:, None] * hits.log.directions[idx]).sum(0)
    start = float(hits.log.timestamps[idx[0]])
    end = start + float(W)
    return Fixation(
        face=int(modal),
        barycentric=bary,
        surface_point=np.asarray(p, dtype=np.float64),
        start=start,
        end=end,
        duration=end - start,
        mean_view_distance=float((w * hits.t[idx]).sum() / W),
        viewpoint=(w[:, None] * hits.model_origins[idx]).sum(0) / W,
        direction=d / np.linalg.norm(d),
        samples=tuple(int(i) for i in idx),
    )


def _angle_deg(a, b):
    # atan2 form stays accurate for tiny angles
    return math.degrees(math.atan2(np.linalg.norm(np.cross(a, b)), float(np.dot(a, b))))


def fixation_separation_deg(a: Fixation, b: Fixation) -> float:
    """Angle between two fixations' surface points seen from their joint mean viewpoint.

    Measured in the model frame, so turntable motion during a dwell does not
    push apart two halves of the same fixation.
    """
    eye = 0.5 * (a.viewpoint + b.viewpoint)
    return _angle_deg(a.surface_point - eye, b.surface_point - eye)


def sample_velocities(log: GazeLog, gap_factor: float = 3.0):
    """Angular velocity (deg/s) per sample and the segment-break mask between samples.

    Sample i takes the velocity of the step arriving at it; the first sample of
    a segment takes the step leaving it.
    """
    t = log.timestamps
    d = log.directions
    n = len(t)
    dt = np.diff(t)
    brk = np.zeros(max(n - 1, 0), dtype=bool)
    step_v = np.zeros(max(n - 1, 0))
    if n > 1:
        med = float(np.median(dt))
        brk = dt > gap_factor * med
        cross = np.linalg.norm(np.cross(d[:-1], d[1:]), axis=1)
        dot = np.einsum("ij,ij->i", d[:-1], d[1:])
        step_v = np.degrees(np.arctan2(cross, dot)) / (dt / 1000.0)
    vel = np.zeros(n)
    for i in range(n):
        if i > 0 and not brk[i - 1]:
            vel[i] = step_v[i - 1]
        elif i < n - 1 and not brk[i]:
            vel[i] = step_v[i]
    return vel, brk


def classify_fixations(hits: LogHits, mesh, params: IVTParams = IVTParams()) -> list:
    if len(hits) == 0:
        raise GazeError("no samples")
    t = hits.log.timestamps
    n = len(t)
    vel, brk = sample_velocities(hits.log, params.gap_factor)
    med = float(np.median(np.diff(t))) if n > 1 else 0.0
    cand = (vel < params.velocity_threshold) & (hits.face >= 0)

    groups = []
    cur = []
    for i in range(n):
        if cand[i] and (not cur or not brk[i - 1]):
            cur.append(i)
        else:
            if cur:
                groups.append(cur)
            cur = [i] if cand[i] else []
    if cur:
        groups.append(cur)

    def weights(g):
        w = []
        for i in g:
            nxt = i + 1
            w.append(t[nxt] - t[i] if nxt < n and not brk[i] else med)
        return w

    fixes = []
    for g in groups:
        fx = _build_fixation(hits, mesh, g, weights(g))
        if fx.duration >= params.min_fixation_duration:
            fixes.append(fx)

    merged = []
    for fx in fixes:
        if merged:
            prev = merged[-1]
            if (fx.start - prev.end < params.merge_gap
                    and fixation_separation_deg(prev, fx) < params.merge_angle):
                g = list(prev.samples) + list(fx.samples)
                merged[-1] = _build_fixation(hits, mesh, g, weights(g))
                continue
        merged.append(fx)

    out = []
    for fx in merged:
        n_f = mesh.face_normals[fx.face]
        if n_f @ (fx.viewpoint - mesh.face_centers[fx.face]) <= 0:
            log.debug("dropping fixation on face %d: back-facing to mean viewpoint", fx.face)
            continue
        out.append(fx)
    return out


# --------------------------------------------------------------- smoothing


@dataclass(frozen=True, eq=False)
class SaliencyMap:
    values: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise ValueError("saliency values must be finite and nonnegative")
        object.__setattr__(self, "values", v)

    def __len__(self):
        return len(self.values)

    def normalize(self) -> "SaliencyMap":
        s = self.values.sum()
        if s <= 0:
            raise ZeroSaliencyError("cannot normalize an all-zero saliency map")
        return SaliencyMap(self.values / s, True)

    def max_normalized(self) -> np.ndarray:
        m = self.values.max() if len(self.values) else 0.0
        return self.values / m if m > 0 else np.zeros_like(self.values)


@dataclass(frozen=True)
class KernelParams:
    sigma_deg: float = 1.0
    truncate: float = 3.0  # in units of sigma
    normalize: bool = True
    duration_weighted: bool = True


def fixation_contributions(fx: Fixation, mesh, params: KernelParams = KernelParams()) -> np.ndarray:
    sigma = fx.mean_view_distance * math.tan(math.radians(params.sigma_deg))
    c = mesh.face_centers
    front = np.einsum("ij,ij->i", mesh.face_normals, fx.viewpoint - c) > 0
    d2 = ((c - fx.surface_point) ** 2).sum(1)
    w = fx.duration if params.duration_weighted else 1.0
    inside = front & (d2 <= (params.truncate * sigma) ** 2)
    out = np.zeros(len(c))
    out[inside] = w * np.exp(-d2[inside] / (2 * sigma * sigma))
    return out


def smooth_fixations(fixations: Sequence[Fixation], mesh, params: KernelParams = KernelParams()) -> SaliencyMap:
    acc = np.zeros(mesh.n_faces)
    for fx in fixations:
        acc += fixation_contributions(fx, mesh, params)
    if not acc.sum() > 0:
        raise ZeroSaliencyError("no fixation contributes to the saliency map")
    m = SaliencyMap(acc)
    return m.normalize() if params.normalize else m


# --------------------------------------------------------------- synthetic gaze


@dataclass(frozen=True)
class Target:
    face: int
    duration_ms: float
    barycentric: tuple = (1 / 3, 1 / 3, 1 / 3)


@dataclass(frozen=True)
class Scenario:
    targets: tuple
    saccade_ms: float = 50.0
    noise_deg: float = 0.0
    eye: tuple = (0.0, 0.0, -4.0)
    start_ms: float = 0.0


@dataclass(frozen=True)
class Dwell:
    """Ground-truth interval during which the synthetic gaze rests on a target."""

    target: int
    face: int
    start: float
    end: float


def _perturb(d, sigma_rad, rng):
    # isotropic small-angle noise: Gaussian offsets in the tangent plane
    helper = np.array([1.0, 0, 0]) if abs(d[0]) < 0.9 else np.array([0, 1.0, 0])
    e1 = np.cross(d, helper)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(d, e1)
    a, b = rng.normal(0.0, sigma_rad, 2)
    ang = math.hypot(a, b)
    if ang == 0:
        return d
    axis_dir = (a * e1 + b * e2) / ang
    return math.cos(ang) * d + math.sin(ang) * axis_dir


def synth_gaze(scenario: Scenario, mesh, schedule: RotationSchedule = RotationSchedule(),
               rate: float = 120.0, rng=None):
    """Sample a gaze log that follows the scripted targets on the (rotating) mesh.

    Returns ``(log, dwells)``; saccades between targets interpolate the gaze
    direction linearly over ``scenario.saccade_ms``.
    """
    if rng is None or isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    if not scenario.targets:
        raise GazeError("scenario has no targets")
    for tg in scenario.targets:
        if not 0 <= tg.face < mesh.n_faces:
            raise IndexError(f"target face {tg.face} out of range")
    eye = np.asarray(scenario.eye, dtype=np.float64)
    pts = []
    for tg in scenario.targets:
        tri = mesh.vertices[mesh.faces[tg.face]]
        w = np.asarray(tg.barycentric, dtype=np.float64)
        pts.append((w / w.sum()) @ tri)

    def aim(k, t):
        p = schedule.model_to_world_matrix(t) @ pts[k]
        d = p - eye
        return d / np.linalg.norm(d)

    dwells = []
    t = scenario.start_ms
    for k, tg in enumerate(scenario.targets):
        if k:
            t += scenario.saccade_ms
        dwells.append(Dwell(k, tg.face, t, t + tg.duration_ms))
        t += tg.duration_ms
    end = t
    period = 1000.0 / rate
    times = scenario.start_ms + period * np.arange(int(math.floor((end - scenario.start_ms) / period + 1e-9)))
    dirs = np.empty((len(times), 3))
    sigma = math.radians(scenario.noise_deg)
    starts = np.array([dw.start for dw in dwells])
    for i, ti in enumerate(times):
        k = int(np.searchsorted(starts, ti, side="right")) - 1
        dw = dwells[k]
        if ti < dw.end:
            d = aim(k, ti)
        else:
            a = aim(k, dw.end)
            b = aim(k + 1, dwells[k + 1].start)
            f = (ti - dw.end) / scenario.saccade_ms
            d = (1 - f) * a + f * b
            d /= np.linalg.norm(d)
        if sigma > 0:
            d = _perturb(d, sigma, rng)
        dirs[i] = d
    head_dir = -eye / np.linalg.norm(eye) if np.linalg.norm(eye) > 0 else np.array([0.0, 0.0, 1.0])
    n = len(times)
    log_ = GazeLog(times, np.tile(eye, (n, 1)), dirs, np.tile(eye, (n, 1)), np.tile(head_dir, (n, 1)))
    return log_, dwells


def visible_from(mesh, bvh, eye, schedule, face, times, min_cos=0.3) -> bool:
    """True if ``face``'s center is hit first and seen at ``>= min_cos`` at every time."""
    c = mesh.face_centers[face]
    eye = np.asarray(eye, dtype=np.float64)
    for t in times:
        Rm = schedule.world_to_model_matrix(t)
        o = Rm @ eye
        d = c - o
        dist = np.linalg.norm(d)
        d /= dist
        if -(mesh.face_normals[face] @ d) < min_cos:
            return False
        hb = closest_hits(bvh, mesh, o[None], d[None])
        if hb.face[0] != face:
            return False
    return True


def random_scenario(mesh, rng, schedule: RotationSchedule = RotationSchedule(), bvh=None,
                    n_targets=3, main_ms=(800.0, 1200.0), other_ms=(250.0, 500.0),
                    saccade_ms=50.0, noise_deg=0.0, eye=(0.0, 0.0, -4.0),
                    min_separation_deg=5.0, max_tries=2000) -> Scenario:
    """Random visible targets; target 0's dwell is the longest by construction."""
    bvh = bvh if bvh is not None else build_bvh(mesh)
    eye_v = np.asarray(eye, dtype=np.float64)
    durations = [rng.uniform(*main_ms)] + [rng.uniform(*other_ms) for _ in range(n_targets - 1)]
    order = rng.permutation(n_targets)
    durations = [durations[i] for i in order]
    targets = []
    t = 0.0
    chosen_dirs = []
    for k, dur in enumerate(durations):
        if k:
            t += saccade_ms
        times = np.linspace(t, t + dur, 5)
        for _ in range(max_tries):
            f = int(rng.integers(mesh.n_faces))
            if not visible_from(mesh, bvh, eye_v, schedule, f, times):
                continue
            p = schedule.model_to_world_matrix(t) @ mesh.face_centers[f] - eye_v
            p /= np.linalg.norm(p)
            if chosen_dirs:
                q = chosen_dirs[-1]
                if _angle_deg(p, q) < min_separation_deg:
                    continue
            if any(tg.face == f for tg in targets):
                continue
            break
        else:
            raise GazeError("could not place a visible target")
        # direction at the end of this dwell, for spacing the next saccade
        pe = schedule.model_to_world_matrix(t + dur) @ mesh.face_centers[f] - eye_v
        chosen_dirs.append(pe / np.linalg.norm(pe))
        targets.append(Target(f, float(dur)))
        t += dur
    return Scenario(tuple(targets), saccade_ms, noise_deg, tuple(eye_v))


# --------------------------------------------------------------- file formats

LOG_COLUMNS = ["t_ms", "ox", "oy", "oz", "dx", "dy", "dz", "hx", "hy", "hz", "hdx", "hdy", "hdz"]


def read_gaze_log(path) -> GazeLog:
    rows = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise GazeLogError(path, 0, "no samples")
        if [h.strip() for h in header] != LOG_COLUMNS:
            raise GazeLogError(path, 1, f"expected header {','.join(LOG_COLUMNS)}")
        prev_t = -math.inf
        for lineno, row in enumerate(reader, 2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(LOG_COLUMNS):
                raise GazeLogError(path, lineno, f"expected {len(LOG_COLUMNS)} columns, got {len(row)}")
            try:
                vals = [float(c) for c in row]
            except ValueError:
                raise GazeLogError(path, lineno, "non-numeric value") from None
            if not all(math.isfinite(v) for v in vals):
                raise GazeLogError(path, lineno, "non-finite value")
            if vals[0] <= prev_t:
                raise GazeLogError(path, lineno, "timestamps must be strictly increasing")
            prev_t = vals[0]
            for a, b, what in ((4, 7, "gaze direction"), (10, 13, "head direction")):
                if math.sqrt(sum(v * v for v in vals[a:b])) < 1e-6:
                    raise GazeLogError(path, lineno, f"{what} has near-zero norm")
            rows.append(vals)
    if not rows:
        raise GazeLogError(path, 0, "no samples")
    a = np.asarray(rows)
    return GazeLog(a[:, 0], a[:, 1:4], a[:, 4:7], a[:, 7:10], a[:, 10:13])


def write_gaze_log(path, log_: GazeLog):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(LOG_COLUMNS) + "\n")
        cols = np.column_stack([log_.timestamps, log_.origins, log_.directions,
                                log_.head_positions, log_.head_directions])
        for row in cols:
            fh.write(",".join(repr(float(x)) for x in row) + "\n")


def write_saliency(path, smap: SaliencyMap):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("face_index,value\n")
        for i, v in enumerate(smap.values):
            fh.write(f"{i},{v:.9g}\n")


def read_saliency(path) -> SaliencyMap:
    vals = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["face_index", "value"]:
            raise GazeLogError(path, 1, "expected header face_index,value")
        for lineno, row in enumerate(reader, 2):
            if not row:
                continue
            try:
                i, v = int(row[0]), float(row[1])
            except (ValueError, IndexError):
                raise GazeLogError(path, lineno, "malformed saliency record") from None
            if i in vals:
                raise GazeLogError(path, lineno, f"duplicate face index {i}")
            if not (v >= 0 and math.isfinite(v)):
                raise GazeLogError(path, lineno, "saliency must be finite and nonnegative")
            vals[i] = v
    if sorted(vals) != list(range(len(vals))):
        raise GazeLogError(path, 0, "face indices must be 0..F-1")
    return SaliencyMap(np.array([vals[i] for i in range(len(vals))]))


def write_fixations(path, fixations: Sequence[Fixation]):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("face,w0,w1,w2,start_ms,end_ms,duration_ms\n")
        for fx in fixations:
            w0, w1, w2 = fx.barycentric
            fh.write(f"{fx.face},{w0:.9g},{w1:.9g},{w2:.9g},{fx.start:.9g},{fx.end:.9g},{fx.duration:.9g}\n")


def write_dwells(path, dwells: Sequence[Dwell]):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("target,face,start_ms,end_ms\n")
        for d in dwells:
            fh.write(f"{d.target},{d.face},{d.start:.9g},{d.end:.9g}\n")


def read_scenario(path) -> Scenario:
    """Scenario file: ``key=value`` globals, then ``face,duration_ms`` rows."""
    targets, opts = [], {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line or line.startswith("face,"):
                continue
            try:
                if "=" in line:
                    k, v = (s.strip() for s in line.split("=", 1))
                    if k == "eye":
                        opts[k] = tuple(float(x) for x in v.split(","))
                    elif k in ("saccade_ms", "noise_deg", "start_ms"):
                        opts[k] = float(v)
                    else:
                        raise ValueError(f"unknown key {k!r}")
                else:
                    parts = line.split(",")
                    bary = tuple(float(x) for x in parts[2:5]) if len(parts) >= 5 else (1 / 3, 1 / 3, 1 / 3)
                    targets.append(Target(int(parts[0]), float(parts[1]), bary))
            except (ValueError, IndexError) as exc:
                raise GazeLogError(path, lineno, str(exc)) from None
    if not targets:
        raise GazeLogError(path, 0, "scenario has no targets")
    return Scenario(tuple(targets), **opts)
