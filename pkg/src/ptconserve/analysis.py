"""Phase classification, exceptional-point order, and fits of time series."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy.signal import find_peaks

from . import linalg
from .dynamics import ObservableSeries
from .errors import (
    AmbiguousNearEP,
    NonPositiveData,
    NotPeriodic,
    NotSettled,
    TooFewOscillations,
)
from .model import PTModel, min_spacing

POWER_LAW_WINDOW = (20.0, 200.0)
EXPONENTIAL_WINDOW = (5.0, 8.0)
TAIL_FRACTION = 0.2
PERIOD_SPREAD = 1e-2

Phase = Literal["hermitian", "pt_symmetric", "exceptional_point", "pt_broken"]


@dataclass(frozen=True)
class PhaseDiagnosis:
    phase: Phase
    ep_order: int
    max_imag: float
    gap: float | None


@dataclass(frozen=True)
class FitResult:
    kind: Literal["power_law", "exponential", "period"]
    value: float
    residual: float
    window: tuple[float, float]


def _clusters(values: np.ndarray, radius: float) -> list[list[int]]:
    """Single-linkage groups of eigenvalues closer than ``radius``."""
    n = len(values)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if abs(values[i] - values[j]) <= radius:
                parent[find(i)] = find(j)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return list(groups.values())


def jordan_order(H, lam: complex, multiplicity: int) -> int | None:
    """Size of the largest Jordan block at ``lam``, or None if ``lam`` is not
    an eigenvalue of the stated algebraic multiplicity.

    The rank of ``(H - lam)**k`` drops until it reaches ``d - multiplicity``;
    the first ``k`` that hits this floor is the block size.
    """
    H = np.asarray(H)
    floor = H.shape[0] - multiplicity
    profile = linalg.rank_profile(H, lam, multiplicity)
    if profile[-1] != floor:
        return None
    return next(k for k, r in enumerate(profile, start=1) if r == floor)


def classify_phase(model: PTModel, tol: float | None = None) -> PhaseDiagnosis:
    """Decide which regime a model is in.

    Exceptional points are recognized from rank profiles at the mean of
    clustered eigenvalues, not from eigenvector collinearity.  Rounding
    splits an order-``m`` EP into eigenvalues spread by roughly
    ``eps**(1/m) * ||H||``, which sets the clustering radius.
    """
    H = model.H
    d = model.d
    scale = linalg.opnorm(H)
    if tol is None:
        tol = 1e-8 * scale
    if tol <= 0:
        raise ValueError("tol must be positive")
    res = linalg.eig(H)
    w = res.eigenvalues.copy()
    ep_order = 1
    if res.defective_flag:
        radius = max(10 * tol, 10 * scale * (d * np.finfo(float).eps) ** (1 / d))
        for group in _clusters(w, radius):
            if len(group) < 2:
                continue
            lam = w[group].mean()
            order = jordan_order(H, lam, len(group))
            if order is not None and order > 1:
                ep_order = max(ep_order, order)
                w[group] = lam
    gap = None
    if math.isfinite(model.gamma) and model.gamma <= model.J:
        gap = math.sqrt(model.J**2 - model.gamma**2)
    max_imag = float(w.imag.max())
    if ep_order > 1:
        return PhaseDiagnosis("exceptional_point", ep_order, max(max_imag, 0.0), gap)
    spacing = min_spacing(w)
    if tol < spacing < 10 * tol:
        raise AmbiguousNearEP(
            f"eigenvalue spacing {spacing:.3e} lies within (tol, 10 tol) with tol={tol:.3e}"
        )
    if max_imag > tol:
        return PhaseDiagnosis("pt_broken", 1, max_imag, gap)
    hermitian = model.symmetries().hermitian_residual <= 1e-12
    return PhaseDiagnosis("hermitian" if hermitian else "pt_symmetric", 1, max_imag, gap)


def period_closed_form(J: float, gamma: float) -> float:
    """``2 pi / sqrt(J**2 - gamma**2)``; only defined below the threshold."""
    if gamma >= J:
        raise NotPeriodic(f"no period at gamma={gamma} >= J={J}")
    return 2 * math.pi / math.sqrt(J**2 - gamma**2)


def _select(series: ObservableSeries, window):
    t = np.asarray(series.times, dtype=float)
    y = np.asarray(series.values, dtype=float)
    if y.ndim != 1:
        raise ValueError("fit a single column; use ObservableSeries.column")
    keep = ~np.asarray(series.mask, dtype=bool)
    if window is not None:
        lo, hi = window
        if lo < t[0] - 1e-12 or hi > t[-1] + 1e-12:
            raise ValueError(f"window {window} outside data range [{t[0]}, {t[-1]}]")
        keep &= (t >= lo - 1e-12) & (t <= hi + 1e-12)
    return t[keep], y[keep]


def _refine_peak(t: np.ndarray, y: np.ndarray, i: int) -> float:
    c = np.polyfit(t[i - 1 : i + 2] - t[i], y[i - 1 : i + 2], 2)
    if c[0] >= 0:
        return float(t[i])
    return float(t[i] - c[1] / (2 * c[0]))


def fit_period(series: ObservableSeries, window=None, prominence: float = 0.5) -> FitResult:
    """Period from the mean spacing of maxima, refined by local parabolas.

    Only maxima with prominence of at least ``prominence`` times the
    peak-to-peak range count, which discards the shallow secondary maxima
    some states show inside each period.  When two comparable maxima share
    a period their spacings alternate; the period is then taken between
    every ``k``-th maximum, with ``k`` the smallest stride whose spacings
    agree to ``PERIOD_SPREAD``.  ``residual`` is the standard deviation of
    the spacings used.
    """
    t, y = _select(series, window)
    if t.size < 5:
        raise TooFewOscillations("not enough samples")
    span = float(np.ptp(y))
    if span <= 1e-12 * max(1.0, float(np.max(np.abs(y)))):
        raise TooFewOscillations("series is constant")
    peaks, _ = find_peaks(y, prominence=prominence * span)
    troughs, _ = find_peaks(-y, prominence=prominence * span)
    if len(peaks) < 2 or len(peaks) + len(troughs) < 3:
        raise TooFewOscillations(
            f"found {len(peaks)} maxima and {len(troughs)} minima in window"
        )
    tops = np.array([_refine_peak(t, y, i) for i in peaks])
    spacing = tops[1:] - tops[:-1]
    for k in range(1, min(3, len(tops) - 1) + 1):
        strided = tops[k:] - tops[:-k]
        if strided.std() <= PERIOD_SPREAD * strided.mean():
            spacing = strided
            break
    return FitResult("period", float(spacing.mean()), float(spacing.std()), (float(t[0]), float(t[-1])))


def fit_growth(
    series: ObservableSeries,
    kind: Literal["power_law", "exponential"],
    window=None,
) -> FitResult:
    """Least-squares growth law of a positive series.

    ``power_law`` fits the slope of ``log N`` against ``log t``;
    ``exponential`` fits ``log N`` against ``t``.  ``residual`` is the RMS
    deviation of the fit in log space.
    """
    if window is None:
        window = POWER_LAW_WINDOW if kind == "power_law" else EXPONENTIAL_WINDOW
    t, y = _select(series, window)
    if t.size < 2:
        raise ValueError("need at least two points in the fit window")
    if np.any(y <= 0):
        raise NonPositiveData("growth fits need strictly positive values")
    if kind == "power_law":
        if np.any(t <= 0):
            raise NonPositiveData("power-law fits need t > 0")
        x = np.log(t)
    elif kind == "exponential":
        x = t
    else:
        raise ValueError(f"unknown fit kind {kind!r}")
    ly = np.log(y)
    slope, intercept = np.polyfit(x, ly, 1)
    rms = float(np.sqrt(np.mean((ly - (slope * x + intercept)) ** 2)))
    return FitResult(kind, float(slope), rms, (float(t[0]), float(t[-1])))


def steady_state(series: ObservableSeries, tol: float) -> tuple[float, float]:
    """Settling time and settled value of a series.

    ``t_star`` is the earliest sample after which every value stays within
    ``tol`` of the final one; the series counts as settled only if that
    stretch covers at least the final 20% of samples.  The returned value is
    the mean over that tail.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    t, y = _select(series, None)
    if t.size == 0:
        raise NotSettled("no valid samples")
    off = np.flatnonzero(np.abs(y - y[-1]) > tol)
    start = 0 if off.size == 0 else int(off[-1]) + 1
    ntail = max(1, math.ceil(TAIL_FRACTION * t.size))
    if t.size - start < ntail:
        raise NotSettled(
            f"{series.label} leaves the ±{tol:g} band around its final value at t={t[start - 1]:.4g}"
        )
    return float(t[start]), float(np.mean(y[-ntail:]))
