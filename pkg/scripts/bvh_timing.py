"""Time BVH construction and closest-hit queries against thread count."""

import argparse
import time

import numpy as np

from meshsal.raycast import build_bvh, closest_hits
from meshsal.shapes import icosphere, terrain


def rays(rng, n, mesh):
    c = mesh.vertices.mean(0)
    r = np.linalg.norm(mesh.vertices - c, axis=1).max()
    o = rng.normal(size=(n, 3))
    o = c + 3 * r * o / np.linalg.norm(o, axis=1, keepdims=True)
    d = c + rng.uniform(-r, r, (n, 3)) - o
    return o, d / np.linalg.norm(d, axis=1, keepdims=True)


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--rays", type=int, default=100_000)
    p.add_argument("--threads", type=int, nargs="+", default=[1, 2, 4, 8])
    a = p.parse_args()
    rng = np.random.default_rng(0)
    for name, mesh in (("icosphere-5", icosphere(5)), ("terrain", terrain())):
        t0 = time.perf_counter()
        bvh = build_bvh(mesh)
        build = time.perf_counter() - t0
        O, D = rays(rng, a.rays, mesh)
        closest_hits(bvh, mesh, O[:10], D[:10])
        for th in a.threads:
            t0 = time.perf_counter()
            closest_hits(bvh, mesh, O, D, threads=th)
            q = time.perf_counter() - t0
            print(f"{name:12s} faces={mesh.n_faces:6d} build={build:.3f}s threads={th} "
                  f"query={q:.3f}s ({a.rays / q / 1e6:.2f} Mray/s)")


if __name__ == "__main__":
    main()
