"""Independent reference implementations used only by the tests."""

import numpy as np


def _cross(x, y):
    return (x[..., 1] * y[..., 2] - x[..., 2] * y[..., 1],
            x[..., 2] * y[..., 0] - x[..., 0] * y[..., 2],
            x[..., 0] * y[..., 1] - x[..., 1] * y[..., 0])


def brute_force_hits(V, F, O, D, t_min=0.0, t_max=np.inf, eps_det=1e-12, eps_b=1e-9, chunk=32):
    """All-pairs Moller-Trumbore in numpy: (face, t) per ray, face -1 on a miss."""
    a, b, c = V[F[:, 0]], V[F[:, 1]], V[F[:, 2]]
    e1, e2 = b - a, c - a
    O, D = np.asarray(O, float), np.asarray(D, float)
    faces = np.full(len(O), -1)
    ts = np.full(len(O), np.inf)
    for s in range(0, len(O), chunk):
        o, d = O[s:s + chunk, None, :], D[s:s + chunk, None, :]
        px, py, pz = _cross(d, e2)
        det = e1[:, 0] * px + e1[:, 1] * py + e1[:, 2] * pz
        ok = np.abs(det) > eps_det
        inv = 1.0 / np.where(ok, det, 1.0)
        sv = o - a
        u = (sv[..., 0] * px + sv[..., 1] * py + sv[..., 2] * pz) * inv
        qx, qy, qz = _cross(sv, e1)
        v = (qx * d[..., 0] + qy * d[..., 1] + qz * d[..., 2]) * inv
        t = (e2[:, 0] * qx + e2[:, 1] * qy + e2[:, 2] * qz) * inv
        ok &= (u >= -eps_b) & (v >= -eps_b) & (u + v <= 1 + eps_b) & (t >= t_min) & (t <= t_max)
        t = np.where(ok, t, np.inf)
        best = np.argmin(t, axis=1)  # first minimum: smallest face index on ties
        tb = t[np.arange(len(best)), best]
        faces[s:s + chunk] = np.where(np.isfinite(tb), best, -1)
        ts[s:s + chunk] = tb
    return faces, ts


def rodrigues(axis, deg):
    axis = np.asarray(axis, float) / np.linalg.norm(axis)
    th = np.radians(deg)
    K = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
    return np.eye(3) + np.sin(th) * K + (1 - np.cos(th)) * K @ K


def random_rays(rng, n, center, radius):
    """Origins on a sphere around the mesh aimed at random points inside its bounding ball."""
    o = rng.normal(size=(n, 3))
    o = center + 3 * radius * o / np.linalg.norm(o, axis=1, keepdims=True)
    tgt = center + radius * rng.uniform(-1, 1, (n, 3))
    d = tgt - o
    return o, d / np.linalg.norm(d, axis=1, keepdims=True)


def cap_mask(centers, axis=(0.0, 0.0, 1.0), threshold=0.8):
    c = centers / np.linalg.norm(centers, axis=1, keepdims=True)
    return c @ np.asarray(axis) > threshold


def cap_density_ratio(original, simplified, threshold=0.8):
    """Faces per unit area inside the cap over faces per unit area outside.

    Region areas are integrated over the original surface, face membership by
    the direction of each output face center.
    """
    cap0 = cap_mask(original.face_centers, threshold=threshold)
    a_in, a_out = original.face_areas[cap0].sum(), original.face_areas[~cap0].sum()
    cap1 = cap_mask(simplified.face_centers, threshold=threshold)
    return (cap1.sum() / a_in) / ((~cap1).sum() / a_out)
