"""Identification diagnostics: minimum stimulus count, respondent rank, zero operator."""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

J1_REASON = "singular normal equations"
J2_REASON = "zero operator"

# Human-readable explanations used by error messages and the CLI.
EXPLAIN = {
    0: "no stimuli: nothing to scale",
    1: ("J=1: each respondent's 2x2 normal-equation matrix [[1, x], [x, x^2]] is "
        "singular and a thin QR needs at least two rows, so no projector exists"),
    2: ("J=2: every respondent's projector is the 2x2 identity, so A - nI is the zero "
        "matrix; every direction is an eigenvector with eigenvalue 0 and the stimulus "
        "positions are not identified (at least 3 stimuli are required)"),
}


class StimuliCheck(NamedTuple):
    passed: bool
    reason: str


@dataclass(frozen=True)
class IdentificationReport:
    j_count: int
    min_j_satisfied: bool
    respondent_ranks: dict
    zero_operator: bool
    top_gap: float
    n_respondents: int = 0
    deflated_spectrum: tuple = ()
    message: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "j_count": self.j_count,
            "min_j_satisfied": self.min_j_satisfied,
            "respondent_ranks": dict(self.respondent_ranks),
            "zero_operator": self.zero_operator,
            "top_gap": self.top_gap,
            "n_respondents": self.n_respondents,
            "deflated_spectrum": list(self.deflated_spectrum),
            "message": self.message,
        }


def check_min_stimuli(J: int) -> StimuliCheck:
    if J < 0:
        raise ValueError("J must be non-negative")
    if J == 0:
        return StimuliCheck(False, "no stimuli")
    if J == 1:
        return StimuliCheck(False, J1_REASON)
    if J == 2:
        return StimuliCheck(False, J2_REASON)
    return StimuliCheck(True, "ok")


def respondent_rank(row, rank_tolerance: float = 1e-12) -> int:
    """Rank (1 or 2) of the [1, row] design.

    Two if some pair of entries differs by more than
    ``rank_tolerance * max(1, max|row|)``, i.e. the row is not constant.
    """
    row = np.asarray(row, dtype=float)
    if row.size == 0:
        return 1
    spread = row.max() - row.min()
    return 2 if spread > rank_tolerance * max(1.0, float(np.abs(row).max())) else 1


def respondent_ranks(X, rank_tolerance: float = 1e-12) -> np.ndarray:
    """Vectorised :func:`respondent_rank` over the rows of ``X``."""
    X = np.asarray(X, dtype=float)
    spread = X.max(axis=1) - X.min(axis=1)
    mag = np.maximum(1.0, np.abs(X).max(axis=1))
    return np.where(spread > rank_tolerance * mag, 2, 1)


def operator_norm_gap(acc) -> float:
    """max |(A - nI)_ab| for an accumulation."""
    n = acc.n_used + acc.n_degenerate
    return float(np.abs(acc.A - n * np.eye(acc.A.shape[0])).max())


def verify_zero_operator(acc, tol: Optional[float] = None) -> bool:
    """True when A - nI vanishes (entrywise, within ``tol``; default 1e-9 n)."""
    n = acc.n_used + acc.n_degenerate
    if tol is None:
        tol = 1e-9 * max(n, 1)
    return operator_norm_gap(acc) <= tol


def diagnose(p, cfg=None) -> IdentificationReport:
    """Identification summary for a placement matrix. Never raises on non-identification."""
    from . import am_core
    from .errors import AmscaleError
    from .placements import complete_cases

    cfg = cfg or am_core.EstimatorConfig()
    J = p.J
    check = check_min_stimuli(J)
    try:
        cc, _ = complete_cases(p)
        X = cc.values
    except AmscaleError:
        X = np.empty((0, J))
    ranks = respondent_ranks(X, cfg.rank_tolerance) if X.shape[0] else np.empty(0, int)
    hist = {"rank1": int((ranks == 1).sum()), "rank2": int((ranks == 2).sum())}

    zero, gap, spectrum = False, 0.0, ()
    message = None if check.passed else EXPLAIN[min(J, 2)]
    if J >= 2 and X.shape[0]:
        try:
            acc = am_core.accumulate(cc, cfg)
        except AmscaleError as exc:
            message = str(exc)
        else:
            n = acc.n_used + acc.n_degenerate
            zero = verify_zero_operator(acc, cfg.zero_tol(n))
            spectrum = tuple(float(x) for x in am_core.deflated_spectrum(acc)[0])
            if len(spectrum) >= 2:
                gap = max(0.0, spectrum[0] - spectrum[1])
    return IdentificationReport(J, check.passed, hist, bool(zero), float(gap),
                                int(X.shape[0]), spectrum, message)
