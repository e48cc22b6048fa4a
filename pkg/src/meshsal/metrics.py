"""Saliency map comparison (CC, SIM, KLD, SE), salient-vs-non-salient sampling
analysis, and a rank-blend curvature/texture baseline."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .gaze import SaliencyMap

EPS = 1e-12


def _values(m) -> np.ndarray:
    v = m.values if isinstance(m, SaliencyMap) else m
    return np.asarray(v, dtype=np.float64).reshape(-1)


def _fmt(x: float) -> str:
    return "0" if x == 0 else f"{x:.9f}"


@dataclass(frozen=True)
class MetricReport:
    cc: float
    sim: float
    kld: float
    se: float
    cc_defined: bool = True

    def line(self) -> str:
        return f"cc={_fmt(self.cc)},sim={_fmt(self.sim)},kld={_fmt(self.kld)},se={_fmt(self.se)}"

    def pretty(self) -> str:
        note = "" if self.cc_defined else "  (undefined: constant map)"
        return (
            f"CC   {self.cc: .9f}{note}\n"
            f"SIM  {self.sim: .9f}\n"
            f"KLD  {self.kld: .9f}\n"
            f"SE   {self.se: .9f}"
        )


def _prob(v):
    v = v + EPS
    return v / v.sum()


def correlation(p, q):
    """Pearson correlation; returns (value, defined)."""
    p = p - p.mean()
    q = q - q.mean()
    den = math.sqrt(float(p @ p) * float(q @ q))
    if den == 0:
        return 0.0, False
    return float(np.clip((p @ q) / den, -1.0, 1.0)), True


def similarity(p, q) -> float:
    return float(np.minimum(_prob(p), _prob(q)).sum())


def kl_divergence(pred, truth) -> float:
    """D(truth || pred) after epsilon smoothing; both distributions are strictly positive."""
    p, q = _prob(pred), _prob(truth)
    return float(max(0.0, np.sum(q * np.log(q / p))))


def saliency_error(p, q) -> float:
    def maxnorm(v):
        m = v.max()
        return v / m if m > 0 else np.zeros_like(v)

    return float(np.mean((maxnorm(p) - maxnorm(q)) ** 2))


def compare_maps(pred, truth) -> MetricReport:
    p, q = _values(pred), _values(truth)
    if len(p) != len(q):
        raise ValueError(f"face count mismatch: pred {len(p)}, truth {len(q)}")
    if len(q) == 0 or not np.any(q > 0):
        raise ValueError("truth map is all zero")
    if np.any(p < 0) or np.any(q < 0):
        raise ValueError("saliency maps must be nonnegative")
    cc, defined = correlation(p, q)
    return MetricReport(cc, similarity(p, q), kl_divergence(p, q), saliency_error(p, q), defined)


@dataclass(frozen=True)
class AnalysisReport:
    curvature_concordance: float
    variance_concordance: float
    repeats: int
    samples_per_repeat: int
    salient_quantile: float

    def line(self) -> str:
        return (
            f"curvature_concordance={self.curvature_concordance:.9f},"
            f"variance_concordance={self.variance_concordance:.9f},"
            f"repeats={self.repeats},samples_per_repeat={self.samples_per_repeat},"
            f"salient_quantile={self.salient_quantile:g}"
        )

    def pretty(self) -> str:
        return (
            f"salient faces with higher curvature:      {100 * self.curvature_concordance:6.2f}%\n"
            f"salient faces with higher color variance: {100 * self.variance_concordance:6.2f}%\n"
            f"({self.repeats} repeats x {self.samples_per_repeat} pairs, top {self.salient_quantile:g} salient)"
        )


def salient_split(values, quantile: float = 0.2):
    thr = np.quantile(values, 1.0 - quantile)
    salient = values > thr
    return salient, ~salient


def sampling_analysis(smap, curvature, variance, repeats: int = 100, n_samples: int = 1000,
                      quantile: float = 0.2, areas=None, seed: int = 0) -> AnalysisReport:
    """Fraction of (salient, non-salient) face pairs where the salient face's metric is strictly larger.

    Faces are drawn with probability proportional to area within each set.
    """
    s = _values(smap)
    curvature = np.asarray(curvature, dtype=np.float64)
    variance = np.asarray(variance, dtype=np.float64)
    if not (len(s) == len(curvature) == len(variance)):
        raise ValueError("map, curvature and variance must have one value per face")
    if np.ptp(s) == 0:
        raise ValueError("saliency map is constant")
    areas = np.ones(len(s)) if areas is None else np.asarray(areas, dtype=np.float64)
    sal, non = salient_split(s, quantile)
    si, ni = np.nonzero(sal)[0], np.nonzero(non)[0]
    if len(si) == 0 or len(ni) == 0:
        raise ValueError("empty salient or non-salient set")
    ps = areas[si] / areas[si].sum()
    pn = areas[ni] / areas[ni].sum()
    rng = np.random.default_rng(seed)
    cc = np.empty(repeats)
    vc = np.empty(repeats)
    for r in range(repeats):
        a = rng.choice(si, size=n_samples, p=ps)
        b = rng.choice(ni, size=n_samples, p=pn)
        cc[r] = np.mean(curvature[a] > curvature[b])
        vc[r] = np.mean(variance[a] > variance[b])
    return AnalysisReport(float(cc.mean()), float(vc.mean()), repeats, n_samples, quantile)


def rank_normalize(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if len(x) < 2:
        return np.zeros_like(x)
    return (rankdata(x, method="average") - 1.0) / (len(x) - 1.0)


def baseline_predict(curvature, variance, weights=(1.0, 1.0)) -> SaliencyMap:
    w_c, w_v = weights
    if w_c < 0 or w_v < 0 or (w_c == 0 and w_v == 0):
        raise ValueError("weights must be nonnegative and not both zero")
    c = np.asarray(curvature, dtype=np.float64)
    v = np.asarray(variance, dtype=np.float64)
    used = [x for x, w in ((c, w_c), (v, w_v)) if w > 0]
    if all(np.ptp(x) == 0 for x in used):
        raise ValueError("all weighted inputs are constant")
    blend = w_c * rank_normalize(c) + w_v * rank_normalize(v)
    return SaliencyMap(blend).normalize()
