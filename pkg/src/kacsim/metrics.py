"""Distances between samples and laws, decay-rate fits and the Zolotarev bound constant."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import DomainError, InsufficientDataError
from .kernel import KernelSpec, spectral_mu


def _values(batch) -> np.ndarray:
    v = np.asarray(getattr(batch, "values", batch), dtype=float).ravel()
    if v.size == 0:
        raise DomainError("empty batch")
    return v


def empirical_cf(batch, xi_grid) -> np.ndarray:
    """(1/n) sum_j exp(i xi x_j) for each xi."""
    x = _values(batch)
    xi = np.atleast_1d(np.asarray(xi_grid, dtype=float))
    out = np.empty(xi.shape, dtype=complex)
    for k, s in enumerate(xi):
        arg = s * x
        out[k] = complex(np.cos(arg).mean(), np.sin(arg).mean())
    return out


def ks_distance(batch, reference_cdf) -> float:
    """sup |F_n - F| evaluated on both sides of every jump of F_n.

    Ties are grouped, so an atom of the reference at a sample point is not
    mistaken for a jump mismatch.
    """
    x = np.sort(_values(batch))
    n = x.size
    pts, counts = np.unique(x, return_counts=True)
    upper = np.cumsum(counts) / n
    lower = upper - counts / n
    F = np.asarray(reference_cdf(pts), dtype=float)
    # F may be right-continuous with an atom at a point: compare F(x-) with lower
    F_left = np.asarray(reference_cdf(np.nextafter(pts, -np.inf)), dtype=float)
    d = max(np.max(np.abs(upper - F)), np.max(np.abs(lower - F_left)))
    return float(min(1.0, max(0.0, d)))


def ks_two_sample(a, b) -> float:
    x, y = np.sort(_values(a)), np.sort(_values(b))
    pts = np.concatenate([x, y])
    fx = np.searchsorted(x, pts, side="right") / x.size
    fy = np.searchsorted(y, pts, side="right") / y.size
    return float(np.max(np.abs(fx - fy)))


@dataclass(frozen=True)
class Distance:
    value: float
    delta: float
    upper_bound_only: bool  # sorted coupling is optimal only for delta >= 1


def _quantiles(sorted_vals: np.ndarray, n: int) -> np.ndarray:
    """Values of the empirical quantile function at the n midpoints (i + 1/2)/n."""
    m = sorted_vals.size
    pos = (np.arange(n) + 0.5) / n * m - 0.5
    return np.interp(pos, np.arange(m), sorted_vals)


def wasserstein(a, b, delta: float) -> Distance:
    if not 0 < delta <= 2:
        raise DomainError("delta must lie in (0, 2]")
    x, y = np.sort(_values(a)), np.sort(_values(b))
    if x.size > y.size:
        x = _quantiles(x, y.size)
    elif y.size > x.size:
        y = _quantiles(y, x.size)
    cost = float(np.mean(np.abs(x - y) ** delta))
    return Distance(cost ** (1.0 / max(delta, 1.0)), delta, delta < 1)


def wasserstein_distance(a, b, delta: float) -> float:
    """((1/n) sum |x_(i) - y_(i)|^delta)^{1/max(delta, 1)} under the sorted coupling."""
    return wasserstein(a, b, delta).value


# -- decay rates -----------------------------------------------------------------------

@dataclass
class RateFit:
    points: list
    slope: float
    intercept: float
    r_squared: float
    predicted_slope: float
    floor: float = 0.0
    used: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def predicted_rate(spec: KernelSpec, gamma: float, delta: float) -> float:
    """delta (mu(gamma) - mu(delta))."""
    return delta * float(spectral_mu(spec, gamma) - spectral_mu(spec, delta))


def fit_decay_rate(points, spec: KernelSpec | None = None, gamma: float | None = None,
                   delta: float | None = None, floor: float = 0.0) -> RateFit:
    """Least-squares slope of -log(distance) against t over points above ``floor``."""
    pts = [(float(t), float(d)) for t, d in points]
    used = [(t, d) for t, d in pts if d > floor and d > 0]
    if len(used) < 3:
        raise InsufficientDataError(
            f"{len(used)} of {len(pts)} points lie above the floor {floor:g}; need 3")
    t = np.array([p[0] for p in used])
    y = np.log([p[1] for p in used])
    slope, intercept = np.polyfit(t, y, 1)
    resid = y - (slope * t + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    pred = math.nan
    if spec is not None and gamma is not None and delta is not None:
        pred = predicted_rate(spec, gamma, delta)
    return RateFit(pts, float(-slope) + 0.0, float(intercept), r2, pred, floor, used)


def save_rate_fit(fit: RateFit, json_path, csv_path=None):
    json_path = Path(json_path)
    json_path.parent.mkdir(parents=True, exist_ok=True)
    json_path.write_text(json.dumps(fit.to_dict(), indent=2, sort_keys=True) + "\n")
    if csv_path is not None:
        used = set(fit.used)
        with open(csv_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "distance", "used"])
            for t, d in fit.points:
                w.writerow([repr(t), repr(d), int((t, d) in used)])
    return json_path


def zolotarev_bound_constant(x0_batch, vinf_batch, delta: float) -> float:
    """(E|X_0|^delta + E|V_inf|^delta) / Gamma(1 + delta), from samples."""
    if not 0 < delta <= 3:
        raise DomainError("delta must lie in (0, 3]")
    x, v = _values(x0_batch), _values(vinf_batch)
    return float((np.mean(np.abs(x) ** delta) + np.mean(np.abs(v) ** delta))
                 / math.gamma(1.0 + delta))
