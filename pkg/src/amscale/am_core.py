"""Aldrich-McKelvey estimator.

Each complete respondent row x_i defines the design [1, x_i] and its
column-space projector A_i. Summing gives A; the stimulus positions are the
eigenvector of A - nI with the largest eigenvalue once the trivial all-ones
direction (always in the null space) has been deflated away.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _jsonio, kernels
from .errors import (
    AmbiguousPolarity,
    AmscaleError,
    BootstrapDegenerate,
    ConfigError,
    InsufficientRows,
    NoValidRespondents,
    NotIdentified,
    SingularRespondent,
    TooFewStimuli,
)
from .identification import EXPLAIN, IdentificationReport, check_min_stimuli, respondent_ranks
from .placements import PlacementMatrix, complete_cases

METHODS = ("naive", "qr")


@dataclass(frozen=True)
class EstimatorConfig:
    """Estimator settings.

    ``zero_eigen_tolerance`` and ``separation_tolerance`` default to 1e-9 n and
    1e-7 n, where n is the number of contributing respondents.
    ``retain_degenerate`` defaults to True for ``qr`` and must stay False for
    ``naive``.
    """

    method: str = "qr"
    polarity_index: int = 0
    rank_tolerance: float = 1e-12
    zero_eigen_tolerance: Optional[float] = None
    separation_tolerance: Optional[float] = None
    retain_degenerate: Optional[bool] = None
    threads: int = 1

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        for name in ("rank_tolerance", "zero_eigen_tolerance", "separation_tolerance"):
            val = getattr(self, name)
            if val is not None and not val > 0:
                raise ConfigError(f"{name} must be positive")
        if self.polarity_index < 0:
            raise ConfigError("polarity_index must be non-negative")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if self.retain_degenerate is None:
            object.__setattr__(self, "retain_degenerate", self.method == "qr")
        elif self.retain_degenerate and self.method == "naive":
            raise ConfigError("retain_degenerate is only available with method='qr'")

    def zero_tol(self, n: int) -> float:
        return self.zero_eigen_tolerance or 1e-9 * max(n, 1)

    def sep_tol(self, n: int) -> float:
        return self.separation_tolerance or 1e-7 * max(n, 1)


@dataclass(frozen=True, eq=False)
class ProjectorAccumulation:
    A: np.ndarray
    n_used: int
    n_degenerate: int
    n_dropped: int
    ranks: np.ndarray
    method: str = "qr"
    kept: Optional[np.ndarray] = None

    @property
    def n(self) -> int:
        return self.n_used + self.n_degenerate


@dataclass(frozen=True, eq=False)
class StimuliSolution:
    y_hat: np.ndarray
    selected_eigenvalue: float
    deflated_spectrum: np.ndarray
    n_used: int
    method: str
    n_degenerate: int = 0


@dataclass(frozen=True)
class RespondentTransform:
    c_hat: float
    w_hat: float
    residual_ss: float
    reversed: bool
    ideal_point: Optional[float] = None
    rank: int = 2


@dataclass(eq=False)
class ScalingReport:
    solution: StimuliSolution
    transforms: dict
    dropped: list
    diagnostics: IdentificationReport
    stimulus_labels: tuple = ()

    def to_dict(self) -> dict:
        sol = self.solution
        return {
            "stimuli": [{"label": lab, "position": float(y)}
                        for lab, y in zip(self.stimulus_labels, sol.y_hat)],
            "eigenvalues": [float(x) for x in sol.deflated_spectrum],
            "respondents": [{"id": rid, "c": t.c_hat, "w": t.w_hat,
                             "reversed": t.reversed, "ideal_point": t.ideal_point}
                            for rid, t in self.transforms.items()],
            "dropped": [{"id": rid, "reason": why} for rid, why in self.dropped],
            "method": sol.method,
            "n_used": sol.n_used,
            "n_degenerate": sol.n_degenerate,
            "diagnostics": self.diagnostics.to_dict(),
        }

    def to_json(self) -> str:
        return _jsonio.dumps(self.to_dict())


# --------------------------------------------------------------------------
# projectors
# --------------------------------------------------------------------------

def _design_column(d) -> np.ndarray:
    d = np.asarray(d, dtype=float)
    if d.ndim != 2 or d.shape[1] != 2:
        raise ValueError("design must be a J x 2 grid")
    if not np.all(d[:, 0] == 1.0):
        raise ValueError("first design column must be all ones")
    if not np.all(np.isfinite(d)):
        raise ValueError("design entries must be finite")
    return d[:, 1]


def projector_naive(d, rank_tolerance: float = 1e-12) -> np.ndarray:
    """X (X'X)^-1 X' through the explicit 2x2 inverse."""
    x = _design_column(d)
    if respondent_ranks(x[None, :], rank_tolerance)[0] < 2:
        raise SingularRespondent(
            "X'X is singular: the respondent placed every stimulus identically")
    return kernels.naive_projectors_np(x[None, :])[0]


def projector_qr(d, rank_tolerance: float = 1e-12) -> tuple[np.ndarray, int]:
    """Q Q' from a Householder thin QR; rank-deficient designs give q0 q0'."""
    x = _design_column(d)
    J = x.shape[0]
    if J < 2:
        raise InsufficientRows("thin QR of a J x 2 design needs J >= 2 rows")
    A, ranks = kernels.qr_accumulate(x[None, :], rank_tolerance, keep_rank1=True)
    return A, int(ranks[0])


# --------------------------------------------------------------------------
# accumulation and solve
# --------------------------------------------------------------------------

def accumulate(p: PlacementMatrix, cfg: Optional[EstimatorConfig] = None) -> ProjectorAccumulation:
    cfg = cfg or EstimatorConfig()
    if p.missing.any():
        raise ValueError("accumulate needs complete rows; run complete_cases first")
    X = p.values
    n, J = X.shape
    if J < 2:
        raise TooFewStimuli(EXPLAIN[min(J, 2)])

    if cfg.method == "naive":
        ranks = respondent_ranks(X, cfg.rank_tolerance)
        kept = ranks == 2
        A = kernels.naive_accumulate(X[kept], threads=cfg.threads)
        n_used, n_deg = int(kept.sum()), 0
    else:
        A, ranks = kernels.qr_accumulate(X, cfg.rank_tolerance,
                                         keep_rank1=cfg.retain_degenerate,
                                         threads=cfg.threads)
        n_used = int((ranks == 2).sum())
        n_deg = int((ranks == 1).sum()) if cfg.retain_degenerate else 0
        kept = (ranks == 2) | ((ranks == 1) & bool(cfg.retain_degenerate))
    if n_used + n_deg == 0:
        raise NoValidRespondents("no respondent contributes a projector (every complete "
                                 "row is constant and degenerate rows are not retained)")
    return ProjectorAccumulation(A, n_used, n_deg, n - n_used - n_deg,
                                 np.asarray(ranks), cfg.method, kept)


def helmert_basis(J: int) -> np.ndarray:
    """Orthonormal J x (J-1) basis of the mean-zero subspace (Helmert contrasts)."""
    H = np.zeros((J, J - 1))
    for k in range(1, J):
        norm = np.sqrt(k * (k + 1.0))
        H[:k, k - 1] = 1.0 / norm
        H[k, k - 1] = -k / norm
    return H


def deflated_spectrum(acc: ProjectorAccumulation) -> tuple[np.ndarray, np.ndarray]:
    """Eigenpairs of A - nI restricted to the mean-zero subspace.

    Returns (values descending, J x (J-1) eigenvectors in stimulus space).
    """
    J = acc.A.shape[0]
    H = helmert_basis(J)
    M = acc.A - acc.n * np.eye(J)
    B = H.T @ M @ H
    B = 0.5 * (B + B.T)
    vals, V = kernels.symmetric_eigh(B)
    return vals, H @ V


def _standardise(v):
    v = v - v.mean()
    return v / v.std(ddof=1)


def leading_direction(acc: ProjectorAccumulation, cfg: EstimatorConfig):
    """Standardised leading eigenvector (sign arbitrary) and the deflated spectrum."""
    J = acc.A.shape[0]
    if J < 2:
        raise TooFewStimuli(EXPLAIN[min(J, 2)])
    vals, vecs = deflated_spectrum(acc)
    n = acc.n
    if np.all(np.abs(vals) <= cfg.zero_tol(n)):
        raise NotIdentified("deflated operator A - nI is zero; stimulus positions "
                            "are not identified" + (f" ({EXPLAIN[2]})" if J == 2 else ""))
    if J == 2:
        raise NotIdentified(EXPLAIN[2])
    if vals[0] - vals[1] < cfg.sep_tol(n):
        raise NotIdentified(f"top deflated eigenvalues are not separated "
                            f"({vals[0]:.6g} vs {vals[1]:.6g}); no unique solution")
    return _standardise(vecs[:, 0]), vals


def solve_stimuli(acc: ProjectorAccumulation,
                  cfg: Optional[EstimatorConfig] = None) -> StimuliSolution:
    cfg = cfg or EstimatorConfig()
    y, vals = leading_direction(acc, cfg)
    k = cfg.polarity_index
    if k >= y.shape[0]:
        raise ConfigError(f"polarity_index {k} out of range for {y.shape[0]} stimuli")
    if abs(y[k]) < 1e-12:
        raise AmbiguousPolarity(
            f"stimulus {k} sits at the scale centre; pick another polarity stimulus")
    if y[k] > 0:
        y = -y
    return StimuliSolution(y, float(vals[0]), vals, acc.n_used, acc.method, acc.n_degenerate)


# --------------------------------------------------------------------------
# respondents
# --------------------------------------------------------------------------

def _fit_transforms(X, y, rank_tolerance):
    """Least squares of y on [1, x_i] per row: (c, w, rss, rank)."""
    ranks = respondent_ranks(X, rank_tolerance)
    xc = X - X.mean(axis=1, keepdims=True)
    yc = y - y.mean()
    sxx = np.einsum("ij,ij->i", xc, xc)
    full = ranks == 2
    w = np.zeros(X.shape[0])
    w[full] = (xc[full] @ yc) / sxx[full]
    c = y.mean() - w * X.mean(axis=1)
    c[~full] = y.mean()
    resid = c[:, None] + w[:, None] * X - y[None, :]
    rss = np.einsum("ij,ij->i", resid, resid)
    return c, w, rss, ranks


def respondent_transforms(p: PlacementMatrix, sol: StimuliSolution,
                          rank_tolerance: float = 1e-12) -> list[RespondentTransform]:
    if p.missing.any():
        raise ValueError("respondent_transforms needs complete rows")
    c, w, rss, ranks = _fit_transforms(p.values, np.asarray(sol.y_hat), rank_tolerance)
    return [RespondentTransform(float(c[i]), float(w[i]), float(rss[i]), bool(w[i] < 0),
                                None, int(ranks[i]))
            for i in range(p.n)]


def ideal_points(transforms, self_placement) -> list[Optional[float]]:
    out = []
    for t, s in zip(transforms, self_placement):
        if s is None or not np.isfinite(s) or t.w_hat == 0:
            out.append(None)
        else:
            out.append(float(t.c_hat + t.w_hat * s))
    return out


# --------------------------------------------------------------------------
# pipeline
# --------------------------------------------------------------------------

def scale(p: PlacementMatrix, cfg: Optional[EstimatorConfig] = None) -> ScalingReport:
    """complete_cases -> accumulate -> solve_stimuli -> transforms -> ideal points."""
    cfg = cfg or EstimatorConfig()
    check = check_min_stimuli(p.J)
    if p.J < 2:
        raise TooFewStimuli(EXPLAIN[min(p.J, 2)])
    cc, missing_rows = complete_cases(p)
    acc = accumulate(cc, cfg)
    sol = solve_stimuli(acc, cfg)

    kept = np.flatnonzero(acc.kept)
    used = cc.take(kept)
    transforms = respondent_transforms(used, sol, cfg.rank_tolerance)
    if used.self_placement is not None:
        ips = ideal_points(transforms, used.self_placement)
        transforms = [RespondentTransform(t.c_hat, t.w_hat, t.residual_ss, t.reversed, ip, t.rank)
                      for t, ip in zip(transforms, ips)]

    reasons = {p.respondent_ids[i]: "missing placements" for i in missing_rows}
    for i in np.flatnonzero(~acc.kept):
        reasons[cc.respondent_ids[i]] = "rank-deficient design (constant placements)"
    dropped = [(rid, reasons[rid]) for rid in p.respondent_ids if rid in reasons]

    vals = sol.deflated_spectrum
    diag = IdentificationReport(
        j_count=p.J, min_j_satisfied=check.passed,
        respondent_ranks={"rank1": int((acc.ranks == 1).sum()),
                          "rank2": int((acc.ranks == 2).sum())},
        zero_operator=False, top_gap=float(vals[0] - vals[1]),
        n_respondents=cc.n, deflated_spectrum=tuple(float(v) for v in vals))
    return ScalingReport(sol, dict(zip(used.respondent_ids, transforms)), dropped, diag,
                         p.stimulus_labels)


# --------------------------------------------------------------------------
# bootstrap
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BootstrapResult:
    estimate: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    level: float
    replicates: int
    failed: int
    seed: int
    stimulus_labels: tuple = field(default=())

    @property
    def intervals(self) -> list[tuple[float, float]]:
        return [(float(a), float(b)) for a, b in zip(self.lower, self.upper)]

    def to_dict(self) -> dict:
        return {
            "stimuli": [{"label": lab, "estimate": float(e), "lower": float(a), "upper": float(b)}
                        for lab, e, a, b in zip(self.stimulus_labels, self.estimate,
                                                self.lower, self.upper)],
            "level": self.level,
            "replicates": self.replicates,
            "failed": self.failed,
            "seed": self.seed,
        }


def bootstrap_ci(p: PlacementMatrix, cfg: Optional[EstimatorConfig] = None, B: int = 200,
                 seed: int = 0, level: float = 0.9) -> BootstrapResult:
    """Percentile intervals from resampling respondents with replacement.

    Each replicate's eigenvector is sign-aligned to the point estimate before
    the percentiles are taken.
    """
    cfg = cfg or EstimatorConfig()
    if B < 100:
        raise ConfigError("bootstrap needs at least 100 replicates")
    if not 0 < level < 1:
        raise ConfigError("level must lie strictly between 0 and 1")
    point = scale(p, cfg).solution.y_hat
    cc, _ = complete_cases(p)
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, cc.n, size=(B, cc.n))
    draws = np.full((B, p.J), np.nan)
    failed = 0
    for b in range(B):
        sample = PlacementMatrix(cc.values[idx[b]], np.zeros((cc.n, p.J), bool),
                                 cc.stimulus_labels, tuple(str(k) for k in range(cc.n)))
        try:
            y, _ = leading_direction(accumulate(sample, cfg), cfg)
        except AmscaleError:
            failed += 1
            continue
        draws[b] = y if y @ point >= 0 else -y
    if failed > 0.2 * B:
        raise BootstrapDegenerate(f"{failed} of {B} bootstrap replicates were not identified")
    good = draws[~np.isnan(draws[:, 0])]
    tail = (1.0 - level) / 2.0
    lower = np.quantile(good, tail, axis=0)
    upper = np.quantile(good, 1.0 - tail, axis=0)
    return BootstrapResult(point, lower, upper, level, B, failed, seed, p.stimulus_labels)
