"""Point estimation for the BAM parameterisation a_i + b_i Y_j = X_ij + u_ij.

Here the respondent parameters act on the true positions rather than on the
placements. Estimation is alternating least squares over the observed cells,
so respondents with gaps still contribute.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _jsonio
from .errors import (
    ConfigError,
    DegenerateVariance,
    EmptyStimulusColumn,
    InsufficientPlacements,
    NonConvergence,
    TooFewStimuli,
    ZeroWeight,
)
from .placements import PlacementMatrix


@dataclass(frozen=True)
class BamConfig:
    max_iterations: int = 500
    convergence_tolerance: float = 1e-8
    polarity_index: int = 0
    min_placements: int = 2

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ConfigError("max_iterations must be >= 1")
        if not self.convergence_tolerance > 0:
            raise ConfigError("convergence_tolerance must be positive")
        if self.min_placements < 2:
            raise ConfigError("min_placements must be >= 2")


@dataclass(frozen=True, eq=False)
class BamSolution:
    """ALS result. Respondents below ``min_placements`` have NaN a and b."""

    y_hat: np.ndarray
    a: np.ndarray
    b: np.ndarray
    iterations: int
    converged: bool
    final_ssr: float
    ssr_history: np.ndarray = field(repr=False)
    step_ssr: np.ndarray = field(repr=False)
    stimulus_labels: tuple = ()
    respondent_ids: tuple = ()
    excluded: tuple = ()

    def to_dict(self):
        return {
            "stimuli": [{"label": lab, "position": float(y)}
                        for lab, y in zip(self.stimulus_labels, self.y_hat)],
            "respondents": [{"id": rid, "a": float(a), "b": float(b)}
                            for rid, a, b in zip(self.respondent_ids, self.a, self.b)],
            "iterations": self.iterations,
            "converged": self.converged,
            "ssr": self.final_ssr,
        }

    def to_json(self):
        return _jsonio.dumps(self.to_dict())


def parameter_map(c: float, w: float) -> tuple[float, float]:
    """AM (intercept, weight) -> BAM (a, b) at zero noise: X = (Y - c)/w = a + bY."""
    if w == 0:
        raise ZeroWeight("weight must be non-zero")
    return -c / w, 1.0 / w


def inverse_parameter_map(a: float, b: float) -> tuple[float, float]:
    if b == 0:
        raise ZeroWeight("b must be non-zero")
    return -a / b, 1.0 / b


def _ssr(X, obs, a, b, y):
    r = np.where(obs, a[:, None] + b[:, None] * y[None, :] - X, 0.0)
    return float(np.einsum("ij,ij->", r, r))


def _respondent_step(X, obs, y):
    """Per-row least squares of observed X_ij on [1, y_j]."""
    k = obs.sum(axis=1)
    ym = np.where(obs, y[None, :], 0.0).sum(axis=1) / k
    xm = np.where(obs, X, 0.0).sum(axis=1) / k
    yc = np.where(obs, y[None, :] - ym[:, None], 0.0)
    xc = np.where(obs, X - xm[:, None], 0.0)
    syy = np.einsum("ij,ij->i", yc, yc)
    sxy = np.einsum("ij,ij->i", yc, xc)
    b = np.zeros_like(syy)
    np.divide(sxy, syy, out=b, where=syy > 0)
    return xm - b * ym, b


def _stimulus_step(X, obs, a, b, y_prev):
    num = np.where(obs, b[:, None] * (X - a[:, None]), 0.0).sum(axis=0)
    den = np.where(obs, (b * b)[:, None], 0.0).sum(axis=0)
    y = y_prev.copy()
    np.divide(num, den, out=y, where=den > 0)
    return y


def bam_als(p: PlacementMatrix, cfg: BamConfig | None = None) -> BamSolution:
    cfg = cfg or BamConfig()
    n, J = p.values.shape
    if J < 3:
        raise TooFewStimuli("BAM needs at least 3 stimuli")
    if cfg.polarity_index >= J:
        raise ConfigError(f"polarity_index {cfg.polarity_index} out of range")
    obs_all = ~p.missing
    keep = obs_all.sum(axis=1) >= cfg.min_placements
    if not keep.any():
        raise InsufficientPlacements(f"no respondent placed at least {cfg.min_placements} stimuli")
    X = np.where(obs_all, p.values, 0.0)[keep]
    obs = obs_all[keep]
    counts = obs.sum(axis=0)
    if (counts == 0).any():
        empty = [p.stimulus_labels[j] for j in np.flatnonzero(counts == 0)]
        raise EmptyStimulusColumn(f"no retained respondent placed {', '.join(empty)}")

    y = np.where(obs, X, 0.0).sum(axis=0) / counts
    if y.std() == 0:
        raise DegenerateVariance("column means are all equal; no starting direction")
    y = (y - y.mean()) / y.std(ddof=1)

    history, steps = [], []
    converged = False
    it = 0
    for it in range(1, cfg.max_iterations + 1):
        a, b = _respondent_step(X, obs, y)
        s1 = _ssr(X, obs, a, b, y)
        y_new = _stimulus_step(X, obs, a, b, y)
        s2 = _ssr(X, obs, a, b, y_new)
        m, s = y_new.mean(), y_new.std(ddof=1)
        if s == 0:
            raise DegenerateVariance("stimulus estimates collapsed to a constant")
        a = a + b * m
        b = b * s
        y_new = (y_new - m) / s
        s3 = _ssr(X, obs, a, b, y_new)
        steps.append((s1, s2, s3))
        history.append(s3)
        delta = np.abs(y_new - y).max()
        y = y_new
        if delta < cfg.convergence_tolerance:
            converged = True
            break
    if not converged:
        warnings.warn(f"ALS did not converge in {cfg.max_iterations} iterations",
                      NonConvergence, stacklevel=2)

    if y[cfg.polarity_index] > 0:
        y = -y
        b = -b
    a_full = np.full(n, np.nan)
    b_full = np.full(n, np.nan)
    a_full[keep] = a
    b_full[keep] = b
    excluded = tuple(p.respondent_ids[i] for i in np.flatnonzero(~keep))
    return BamSolution(y, a_full, b_full, it, converged, history[-1], np.array(history),
                       np.array(steps), p.stimulus_labels, p.respondent_ids, excluded)
