"""Central-tendency baselines, alignment helpers and the bias/information/noise split."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _jsonio
from .errors import AmscaleError, DegenerateVariance
from .placements import PlacementMatrix

ESTIMATORS = ("am", "mean", "median")


@dataclass(frozen=True)
class BinStats:
    bias: float
    information: float
    noise: float

    def to_dict(self):
        return {"bias": self.bias, "information": self.information, "noise": self.noise}


def column_means(p: PlacementMatrix) -> np.ndarray:
    """Available-case mean per stimulus; NaN where a column is entirely missing."""
    obs = ~p.missing
    counts = obs.sum(axis=0)
    sums = np.where(obs, p.values, 0.0).sum(axis=0)
    out = np.full(p.J, np.nan)
    np.divide(sums, counts, out=out, where=counts > 0)
    return out


def column_medians(p: PlacementMatrix) -> np.ndarray:
    out = np.full(p.J, np.nan)
    for j in range(p.J):
        col = p.values[~p.missing[:, j], j]
        if col.size:
            out[j] = np.median(col)
    return out


def pearson(x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("pearson needs two vectors of equal length")
    if x.size < 2:
        raise DegenerateVariance("correlation needs at least two points")
    xc = x - x.mean()
    yc = y - y.mean()
    sxx = xc @ xc
    syy = yc @ yc
    if sxx == 0 or syy == 0:
        raise DegenerateVariance("correlation undefined for a constant vector")
    r = (xc @ yc) / np.sqrt(sxx * syy)
    return float(min(1.0, max(-1.0, r)))


def affine_align(est, truth) -> np.ndarray:
    """Least-squares fit alpha + beta * est of ``truth``; returns the fitted values."""
    est = np.asarray(est, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if est.shape != truth.shape or est.size < 2:
        raise ValueError("affine_align needs two vectors of equal length >= 2")
    ec = est - est.mean()
    see = ec @ ec
    if see == 0:
        raise DegenerateVariance("cannot align a constant estimate")
    beta = (ec @ (truth - truth.mean())) / see
    return truth.mean() + beta * ec


def calibrate(est, truth) -> np.ndarray:
    """Map ``est`` onto the truth scale by inverting the regression of est on truth.

    Unlike :func:`affine_align` this does not shrink toward the mean, so
    estimation error shows up as extra variance (the BIN noise term).
    """
    est = np.asarray(est, dtype=float)
    truth = np.asarray(truth, dtype=float)
    tc = truth - truth.mean()
    stt = tc @ tc
    if stt == 0:
        raise DegenerateVariance("truth has no variance")
    slope = (tc @ (est - est.mean())) / stt
    if slope == 0:
        raise DegenerateVariance("estimate carries no linear signal about truth")
    return truth.mean() + (est - est.mean()) / slope


def bin_decomposition(estimates, truth) -> BinStats:
    """Pool all (replicate, stimulus) pairs: bias, covariance, variance excess."""
    theta = np.atleast_2d(np.asarray(estimates, dtype=float))
    truth = np.asarray(truth, dtype=float)
    T = np.broadcast_to(truth, theta.shape).ravel()
    th = theta.ravel()
    if th.size < 2:
        raise ValueError("need at least two estimate/truth pairs")
    bias = float(np.mean(th - T))
    info = float(np.cov(th, T, ddof=1)[0, 1])
    noise = float(np.var(th, ddof=1) - np.var(T, ddof=1))
    return BinStats(bias, info, noise)


@dataclass
class ComparisonRecord:
    """Estimator comparison. Correlations are ``None`` when the run failed."""

    r_am_truth: Optional[float] = None
    r_mean_truth: Optional[float] = None
    r_am_mean: Optional[float] = None
    r_median_truth: Optional[float] = None
    bin: dict = field(default_factory=dict)
    error: Optional[str] = None
    error_type: Optional[str] = None
    meta: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.error is None

    def to_dict(self) -> dict:
        d = dict(self.meta)
        d.update({
            "correlations": {
                "am_truth": self.r_am_truth,
                "mean_truth": self.r_mean_truth,
                "am_mean": self.r_am_mean,
                "median_truth": self.r_median_truth,
            },
            "bin": {k: v.to_dict() for k, v in self.bin.items()},
            "error": self.error,
        })
        return d

    def to_json(self) -> str:
        return _jsonio.dumps(self.to_dict())

    def csv_rows(self) -> list[list]:
        r_truth = {"am": self.r_am_truth, "mean": self.r_mean_truth,
                   "median": self.r_median_truth}
        rows = []
        for name in ESTIMATORS:
            b = self.bin.get(name)
            rows.append([name, r_truth[name]] +
                        ([b.bias, b.information, b.noise] if b else [None] * 3))
        return rows


def estimator_vectors(p: PlacementMatrix, cfg=None) -> dict:
    """Raw AM, mean and median stimulus estimates for one placement matrix."""
    from .am_core import scale
    return {
        "am": scale(p, cfg).solution.y_hat,
        "mean": column_means(p),
        "median": column_medians(p),
    }


def compare_estimators(sim, cfg=None) -> ComparisonRecord:
    """AM vs column means vs medians against the simulated truth."""
    truth = sim.truth_y
    try:
        est = estimator_vectors(sim.placements, cfg)
    except AmscaleError as exc:
        return ComparisonRecord(error=str(exc), error_type=type(exc).__name__)
    aligned = {k: affine_align(v, truth) for k, v in est.items()}
    rec = ComparisonRecord(
        r_am_truth=pearson(aligned["am"], truth),
        r_mean_truth=pearson(aligned["mean"], truth),
        r_am_mean=pearson(aligned["am"], aligned["mean"]),
        r_median_truth=pearson(aligned["median"], truth),
    )
    rec.bin = {k: bin_decomposition(calibrate(v, truth)[None, :], truth) for k, v in est.items()}
    return rec


def compare_observed(p: PlacementMatrix, cfg=None) -> dict:
    """Without a known truth only agreement between estimators can be reported."""
    est = estimator_vectors(p, cfg)
    return {
        "am_mean": pearson(est["am"], est["mean"]),
        "am_median": pearson(est["am"], est["median"]),
        "mean_median": pearson(est["mean"], est["median"]),
    }
