"""Participation ratios and level-spacing-ratio statistics."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalToleranceError, ValidationError

PER_CONFIGURATION = "per-configuration"
PER_STATE = "per-state"

POISSON_MEAN_R = 2.0 * np.log(2.0) - 1.0
GOE_MEAN_R = 4.0 - 2.0 * np.sqrt(3.0)


def participation_ratio(modes, mode: str = PER_CONFIGURATION, tol: float = 1e-8) -> np.ndarray:
    """Inverse of the summed fourth powers of the mode coefficients.

    ``modes[l, mu]`` is the amplitude c_{mu,l} of configuration l in Floquet
    state mu. Per configuration, PR(l) = 1 / sum_mu |c_{mu,l}|^4 measures how
    many Floquet states a configuration spreads over; per state, the sum
    runs over configurations instead.
    """
    modes = np.asarray(modes)
    D = modes.shape[0]
    if modes.shape != (D, D):
        raise ValidationError("modes", f"expected a square matrix, got shape {modes.shape}")
    dev = float(np.max(np.abs(modes.conj().T @ modes - np.eye(D))))
    if dev > tol:
        raise NumericalToleranceError(f"mode matrix is not unitary (deviation {dev:.3e})")
    p4 = np.abs(modes) ** 4
    if mode == PER_CONFIGURATION:
        return 1.0 / p4.sum(axis=1)
    if mode == PER_STATE:
        return 1.0 / p4.sum(axis=0)
    raise ValidationError("mode", f"unknown participation-ratio convention {mode!r}")


def r_statistics(levels) -> np.ndarray:
    """Ratios of consecutive level spacings, min/max, for sorted ``levels``.

    A zero spacing next to a finite one gives r = 0; a pair of zero spacings
    carries no information and is dropped.
    """
    levels = np.asarray(levels, dtype=float)
    if levels.ndim != 1 or levels.size < 3:
        raise ValidationError("levels", f"need at least 3 levels, got {levels.size}")
    s = np.diff(levels)
    if np.any(s < 0):
        raise ValidationError("levels", "must be sorted ascending")
    lo = np.minimum(s[1:], s[:-1])
    hi = np.maximum(s[1:], s[:-1])
    keep = hi > 0
    return lo[keep] / hi[keep]


def p_goe(r):
    r = _check_r(r)
    return 27.0 / 4.0 * (r + r**2) / (1.0 + r + r**2) ** 2.5


def p_poisson(r):
    r = _check_r(r)
    return 2.0 / (1.0 + r) ** 2


def reference_distributions(r):
    """(P_GOE(r), P_Poisson(r)) surmises on [0, 1]."""
    return p_goe(r), p_poisson(r)


def _check_r(r):
    arr = np.asarray(r, dtype=float)
    if np.any(arr < 0) or np.any(arr > 1):
        raise ValidationError("r", "ratio must lie in [0, 1]")
    return arr


@dataclass
class RHistogram:
    """Integer bin counts plus running sums; merging is exact and associative."""

    edges: np.ndarray
    counts: np.ndarray
    n: int = 0
    total: float = 0.0
    total_sq: float = 0.0

    @classmethod
    def empty(cls, bins: int = 20) -> "RHistogram":
        return cls(edges=np.linspace(0.0, 1.0, bins + 1), counts=np.zeros(bins, dtype=np.int64))

    def add(self, r) -> "RHistogram":
        r = np.asarray(r, dtype=float)
        counts, _ = np.histogram(r, bins=self.edges)
        self.counts = self.counts + counts
        self.n += r.size
        self.total += float(np.sum(r))
        self.total_sq += float(np.sum(r * r))
        return self

    def merge(self, other: "RHistogram") -> "RHistogram":
        if not np.array_equal(self.edges, other.edges):
            raise ValidationError("bins", "cannot merge histograms with different bins")
        return RHistogram(
            edges=self.edges,
            counts=self.counts + other.counts,
            n=self.n + other.n,
            total=self.total + other.total,
            total_sq=self.total_sq + other.total_sq,
        )

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[1:] + self.edges[:-1])

    @property
    def density(self) -> np.ndarray:
        widths = np.diff(self.edges)
        if self.n == 0:
            return np.zeros_like(widths)
        return self.counts / (self.n * widths)

    @property
    def mean(self) -> float:
        return self.total / self.n

    @property
    def stderr(self) -> float:
        if self.n < 2:
            return float("nan")
        var = (self.total_sq - self.n * self.mean**2) / (self.n - 1)
        return float(np.sqrt(max(var, 0.0) / self.n))


def r_histogram(ensemble, bins: int = 20) -> RHistogram:
    """Pool r values from every realization into one density histogram."""
    ensemble = list(ensemble)
    if not ensemble:
        raise ValidationError("ensemble", "need at least one realization")
    hist = RHistogram.empty(bins)
    for r in ensemble:
        hist.add(r)
    if hist.n == 0:
        raise ValidationError("ensemble", "no spacing ratios in ensemble")
    return hist
