"""Paired significance testing and effect sizes.

Sample (n-1) standard deviation throughout, so the paired t statistic and
Cohen's d relate by t = d * sqrt(n) exactly. Tail probabilities come from
the Student-t CDF evaluated through the regularized incomplete beta
function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import betainc, stdtrit


class DegenerateSampleError(ValueError):
    """Raised when the paired differences have zero variance."""


@dataclass(frozen=True)
class PairedSample:
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=np.float64)
        b = np.asarray(self.b, dtype=np.float64)
        if a.ndim != 1 or b.ndim != 1 or a.shape != b.shape:
            raise ValueError(f"paired samples must be equal-length vectors, got {a.shape} and {b.shape}")
        if a.size < 2:
            raise ValueError(f"need at least 2 pairs, got {a.size}")
        if not (np.isfinite(a).all() and np.isfinite(b).all()):
            raise ValueError("sample values must be finite")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def n(self) -> int:
        return int(self.a.size)

    def differences(self) -> np.ndarray:
        return self.a - self.b


def student_t_cdf(t: float, df: int) -> float:
    """P(T <= t) for Student's t with df degrees of freedom."""
    if df < 1:
        raise ValueError(f"degrees of freedom must be >= 1, got {df}")
    if t == 0.0:
        return 0.5
    x = df / (df + t * t)
    tail = 0.5 * betainc(df / 2.0, 0.5, x)
    return 1.0 - tail if t > 0 else tail


def student_t_two_sided_p(t: float, df: int) -> float:
    """Two-sided tail probability, exact at t = 0 (p = 1)."""
    if df < 1:
        raise ValueError(f"degrees of freedom must be >= 1, got {df}")
    return float(betainc(df / 2.0, 0.5, df / (df + t * t)))


def _diff_stats(sample: PairedSample) -> tuple[float, float]:
    d = sample.differences()
    mean = float(d.mean())
    sd = float(d.std(ddof=1))
    # Spread at the rounding-noise level of the mean is a constant shift.
    if sd == 0.0 or sd <= abs(mean) * 1e-12:
        raise DegenerateSampleError(
            "paired differences have zero variance; t and d are undefined"
        )
    return mean, sd


def paired_t_test(sample: PairedSample) -> tuple[float, float, int]:
    """Two-sided paired t-test; returns (t, p, df)."""
    mean, sd = _diff_stats(sample)
    n = sample.n
    t = mean / (sd / math.sqrt(n))
    df = n - 1
    return t, student_t_two_sided_p(t, df), df


def cohens_d_paired(sample: PairedSample) -> float:
    """Standardized paired effect size: mean(d) / sd(d)."""
    mean, sd = _diff_stats(sample)
    return mean / sd


def mean_ci95(values) -> tuple[float, float]:
    """Mean with the 95% confidence half-width t_{0.975, n-1} * sd / sqrt(n)."""
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1 or v.size < 2:
        raise ValueError(f"need a vector of at least 2 values, got shape {v.shape}")
    if not np.isfinite(v).all():
        raise ValueError("values must be finite")
    n = v.size
    mean = float(v.mean())
    sd = float(v.std(ddof=1))
    half = float(stdtrit(n - 1, 0.975)) * sd / math.sqrt(n)
    return mean, half
