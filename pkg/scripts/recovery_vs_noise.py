"""Run the synthetic gaze pipeline on a rotating sphere at several noise levels."""

import argparse
from dataclasses import dataclass

import numpy as np

from meshsal.gaze import (RotationSchedule, ZeroSaliencyError, classify_fixations, intersect_log, random_scenario,
                          smooth_fixations, synth_gaze)
from meshsal.raycast import build_bvh
from meshsal.shapes import icosphere


@dataclass
class RecoveryConfig:
    level: int = 3
    trials: int = 20
    noise_levels: tuple = (0.0, 0.05, 0.25, 0.5, 1.0, 2.0)
    rate_hz: float = 120.0


def run(cfg: RecoveryConfig):
    mesh = icosphere(cfg.level)
    bvh = build_bvh(mesh)
    sch = RotationSchedule()
    print("noise_deg  count_ok  argmax_ok")
    for noise in cfg.noise_levels:
        count_ok = argmax_ok = 0
        for seed in range(cfg.trials):
            rng = np.random.default_rng(seed)
            sc = random_scenario(mesh, rng, sch, bvh, noise_deg=noise)
            log, _ = synth_gaze(sc, mesh, sch, cfg.rate_hz, rng)
            fx = classify_fixations(intersect_log(log, mesh, bvh, sch), mesh)
            try:
                top = int(np.argmax(smooth_fixations(fx, mesh).values))
            except ZeroSaliencyError:
                top = -1
            main = max(sc.targets, key=lambda t: t.duration_ms).face
            count_ok += len(fx) == len(sc.targets)
            argmax_ok += top >= 0 and (top == main or top in mesh.adjacency[main])
        print(f"{noise:9.2f}  {count_ok:5d}/{cfg.trials}  {argmax_ok:6d}/{cfg.trials}")


if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--level", type=int, default=3)
    a = p.parse_args()
    run(RecoveryConfig(level=a.level, trials=a.trials))
