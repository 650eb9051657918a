"""Detection accuracy and false detection rate, per image and per corpus."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .detect import DetectionMap
from .imagecore import Mask


@dataclass(frozen=True)
class MetricsReport:
    r: float
    w: float
    w_literal: float
    area_R: int
    area_D: int
    area_intersection: int
    area_false: int

    def to_dict(self) -> dict:
        return {
            "r": self.r,
            "w": self.w,
            "w_literal": self.w_literal,
            "area_R": self.area_R,
            "area_D": self.area_D,
            "area_intersection": self.area_intersection,
            "area_false": self.area_false,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsReport":
        return cls(**{k: d[k] for k in cls.__dataclass_fields__})


@dataclass(frozen=True)
class CorpusSummary:
    per_image: list[MetricsReport]
    mean_r: float
    sigma_r: float
    mean_w: float
    sigma_w: float
    failures: list[str] = field(default_factory=list)

    @property
    def n(self) -> int:
        return len(self.per_image)

    def to_dict(self) -> dict:
        return {
            "mean_r": self.mean_r,
            "sigma_r": self.sigma_r,
            "mean_w": self.mean_w,
            "sigma_w": self.sigma_w,
            "n": self.n,
        }


def _as_bool(m) -> np.ndarray:
    if isinstance(m, Mask):
        return m.binary()
    if isinstance(m, DetectionMap):
        return m.detected.astype(bool)
    a = np.asarray(m)
    return a.astype(bool) if a.dtype == bool else a >= 0.5


def score(truth, detected) -> MetricsReport:
    """r = |R n D| / |R|, w = |D \\ R| / |R|.

    ``w_literal`` evaluates |F - D| / |R| with F = D \\ R as written,
    which is always zero; it is kept so reports show both readings.
    """
    R = _as_bool(truth)
    D = _as_bool(detected)
    if R.shape != D.shape:
        raise ValueError(f"truth {R.shape[::-1]} and detection {D.shape[::-1]} sizes differ")
    area_r = int(np.count_nonzero(R))
    if area_r == 0:
        raise ValueError("ground-truth mask is empty")
    inter = int(np.count_nonzero(R & D))
    area_d = int(np.count_nonzero(D))
    false = area_d - inter
    F = D & ~R
    literal = int(np.count_nonzero(F & ~D))
    return MetricsReport(
        r=inter / area_r,
        w=false / area_r,
        w_literal=literal / area_r,
        area_R=area_r,
        area_D=area_d,
        area_intersection=inter,
        area_false=false,
    )


def _mean_std(values: list[float]) -> tuple[float, float]:
    n = len(values)
    mean = math.fsum(values) / n
    var = math.fsum((v - mean) ** 2 for v in values) / n
    return mean, math.sqrt(var)


def summarize(reports: list[MetricsReport], failures: list[str] | None = None) -> CorpusSummary:
    """Arithmetic mean and population standard deviation of r and w."""
    if not reports:
        raise ValueError("cannot summarise an empty list of reports")
    mean_r, sigma_r = _mean_std([m.r for m in reports])
    mean_w, sigma_w = _mean_std([m.w for m in reports])
    return CorpusSummary(list(reports), mean_r, sigma_r, mean_w, sigma_w, list(failures or []))
