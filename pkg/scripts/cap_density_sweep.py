"""Sweep the saliency weight and report how strongly a salient cap keeps its faces."""

import argparse
from dataclasses import dataclass

import numpy as np

from meshsal.shapes import icosphere
from meshsal.simplify import SimplifyParams, simplify


@dataclass
class SweepConfig:
    level: int = 3
    ratio: float = 0.25
    threshold: float = 0.8
    lambdas: tuple = (0.0, 1.0, 2.0, 4.0, 9.0)
    gamma: float = 1.0
    support: str = "ring"


def cap(centers, threshold):
    c = centers / np.linalg.norm(centers, axis=1, keepdims=True)
    return c[:, 2] > threshold


def run(cfg: SweepConfig):
    m = icosphere(cfg.level)
    in_cap = cap(m.face_centers, cfg.threshold)
    a_cap, a_rest = m.face_areas[in_cap].sum(), m.face_areas[~in_cap].sum()
    target = int(m.n_faces * cfg.ratio)
    print(f"{m.n_faces} -> {target} faces, cap {100 * a_cap / (a_cap + a_rest):.1f}% of area")
    print("lambda  cap_faces  density_ratio")
    for lam in cfg.lambdas:
        out = simplify(m, in_cap.astype(float), target,
                       SimplifyParams(lam=lam, gamma=cfg.gamma, support=cfg.support)).mesh
        k = cap(out.face_centers, cfg.threshold)
        ratio = (k.sum() / a_cap) / ((~k).sum() / a_rest)
        print(f"{lam:6.2f}  {int(k.sum()):9d}  {ratio:13.3f}")


if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--level", type=int, default=3)
    p.add_argument("--ratio", type=float, default=0.25)
    p.add_argument("--support", choices=["edge", "ring"], default="ring")
    p.add_argument("--gamma", type=float, default=1.0)
    a = p.parse_args()
    run(SweepConfig(level=a.level, ratio=a.ratio, support=a.support, gamma=a.gamma))
