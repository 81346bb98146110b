"""Synthetic placement data and the experiments run on it.

Data follow c_i + w_i X_ij = Y_j + u_ij: true positions Y are standard normal
draws standardised to mean 0 / sd 1, respondent noise sd sigma_i is uniform,
weights w_i uniform, intercepts c_i normal, and X_ij = (Y_j + u_ij - c_i) / w_i.

All draws come from numpy's PCG64 (``np.random.default_rng``). Replicate r
of an experiment seeded with s uses seed ``s ^ r``, so any replicate can be
regenerated on its own.
"""
from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import _jsonio
from .am_core import EstimatorConfig, scale
from .baselines import (
    ESTIMATORS,
    affine_align,
    bin_decomposition,
    calibrate,
    compare_estimators,
    estimator_vectors,
    pearson,
)
from .errors import AmscaleError, ConfigError
from .placements import PlacementMatrix

MIN_ABS_WEIGHT = 1e-6
ERROR_MODES = ("cell", "respondent")


@dataclass(frozen=True)
class SimConfig:
    """Data-generating settings.

    ``error_mode="cell"`` draws u_ij independently per stimulus.
    ``"respondent"`` draws one u_i per respondent and adds it to every
    stimulus, so the error is indistinguishable from the intercept.
    """

    n: int = 500
    j: int = 6
    sd_min: float = 0.3
    sd_max: float = 0.9
    w_min: float = 0.0
    w_max: float = 1.0
    c_sd: float = 1.0
    seed: int = 1234
    degenerate_count: int = 0
    rationalization_shift: float = 0.0
    error_mode: str = "cell"
    missing_rate: float = 0.0

    def __post_init__(self):
        if self.n < 1:
            raise ConfigError("n must be >= 1")
        if self.j < 2:
            raise ConfigError("j must be >= 2 (true positions are standardised)")
        if not 0 <= self.sd_min <= self.sd_max:
            raise ConfigError("need 0 <= sd_min <= sd_max")
        if not self.w_min < self.w_max:
            raise ConfigError("need w_min < w_max")
        if max(abs(self.w_min), abs(self.w_max)) <= MIN_ABS_WEIGHT:
            raise ConfigError(f"weight interval lies inside +/-{MIN_ABS_WEIGHT}")
        if self.c_sd < 0:
            raise ConfigError("c_sd must be >= 0")
        if self.degenerate_count < 0:
            raise ConfigError("degenerate_count must be >= 0")
        if self.error_mode not in ERROR_MODES:
            raise ConfigError(f"error_mode must be one of {ERROR_MODES}")
        if not 0 <= self.missing_rate < 1:
            raise ConfigError("missing_rate must lie in [0, 1)")


@dataclass(frozen=True, eq=False)
class SimData:
    """Generated truth and placements. Degenerate rows carry NaN parameters."""

    truth_y: np.ndarray
    placements: PlacementMatrix
    true_c: np.ndarray
    true_w: np.ndarray
    sigma: np.ndarray
    self_truth: np.ndarray
    errors: np.ndarray
    config: SimConfig


def _standardise(y):
    y = y - y.mean()
    return y / y.std(ddof=1)


def _draw_weights(rng, n, lo, hi):
    w = rng.uniform(lo, hi, n)
    bad = np.abs(w) < MIN_ABS_WEIGHT
    while bad.any():
        w[bad] = rng.uniform(lo, hi, int(bad.sum()))
        bad = np.abs(w) < MIN_ABS_WEIGHT
    return w


def generate(cfg: SimConfig, truth_y=None) -> SimData:
    """Draw one dataset. ``truth_y`` overrides the drawn positions (the draw still happens)."""
    rng = np.random.default_rng(cfg.seed)
    n, J = cfg.n, cfg.j
    y = _standardise(rng.standard_normal(J))
    if truth_y is not None:
        y = np.asarray(truth_y, dtype=float)
        if y.shape != (J,):
            raise ConfigError("truth_y must have j entries")
    sigma = rng.uniform(cfg.sd_min, cfg.sd_max, n)
    if cfg.error_mode == "cell":
        u = rng.standard_normal((n, J)) * sigma[:, None]
    else:
        u = np.repeat((rng.standard_normal(n) * sigma)[:, None], J, axis=1)
    w = _draw_weights(rng, n, cfg.w_min, cfg.w_max)
    c = rng.normal(0.0, cfg.c_sd, n) if cfg.c_sd > 0 else np.zeros(n)
    t = rng.standard_normal(n)
    self_noise = rng.standard_normal(n) * sigma

    perceived = y[None, :] + u
    if cfg.rationalization_shift != 0:
        liked = rng.random((n, J)) < 0.5
        toward = np.sign(t[:, None] - y[None, :])
        perceived = perceived + cfg.rationalization_shift * np.where(liked, toward, -toward)
    X = (perceived - c[:, None]) / w[:, None]
    selfp = (t + self_noise - c) / w

    if cfg.missing_rate > 0:
        X = np.where(rng.random((n, J)) < cfg.missing_rate, np.nan, X)

    k = cfg.degenerate_count
    if k:
        const = rng.standard_normal(k)
        X = np.vstack([X, np.repeat(const[:, None], J, axis=1)])
        pad = np.full(k, np.nan)
        sigma, w, c, t, selfp = (np.concatenate([a, pad]) for a in (sigma, w, c, t, selfp))
        u = np.vstack([u, np.full((k, J), np.nan)])

    p = PlacementMatrix.from_array(X, [f"S{j + 1}" for j in range(J)],
                                   [str(i + 1) for i in range(n + k)], selfp)
    return SimData(y, p, c, w, sigma, t, u, cfg)


def write_truth_csv(sim: SimData, path):
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["label", "position"])
        for lab, y in zip(sim.placements.stimulus_labels, sim.truth_y):
            wr.writerow([lab, repr(float(y))])


def _echo(cfg: SimConfig) -> dict:
    return {"seed": cfg.seed, "config": asdict(cfg)}


def run_hetero_experiment(cfg: SimConfig, estimator_cfg: Optional[EstimatorConfig] = None):
    sim = generate(cfg)
    rec = compare_estimators(sim, estimator_cfg)
    rec.meta = _echo(cfg)
    return rec


@dataclass
class RetentionRecord:
    naive: dict
    qr: dict
    max_abs_diff: Optional[float]
    meta: dict = field(default_factory=dict)

    def to_dict(self):
        d = dict(self.meta)
        d.update({"naive": self.naive, "qr": self.qr, "max_abs_diff": self.max_abs_diff})
        return d

    def to_json(self):
        return _jsonio.dumps(self.to_dict())


def run_retention_experiment(cfg: SimConfig, estimator_cfg: Optional[EstimatorConfig] = None):
    """Scale the same data with the naive and QR paths and compare retention."""
    if cfg.degenerate_count < 1:
        raise ConfigError("retention experiment needs degenerate_count >= 1")
    return _retention(generate(cfg), cfg, estimator_cfg or EstimatorConfig())


def _retention(sim, cfg, base):
    out, sols = {}, {}
    for method in ("naive", "qr"):
        ecfg = replace(base, method=method, retain_degenerate=(method == "qr"))
        try:
            rep = scale(sim.placements, ecfg)
        except AmscaleError as exc:
            out[method] = {"error": type(exc).__name__, "message": str(exc)}
            continue
        sol = rep.solution
        out[method] = {"n_used": sol.n_used, "n_degenerate": sol.n_degenerate,
                       "n_dropped": len(rep.dropped)}
        sols[method] = sol.y_hat
    diff = None
    if len(sols) == 2:
        a, b = sols["naive"], sols["qr"]
        if a @ b < 0:
            b = -b
        diff = float(np.abs(a - b).max())
    return RetentionRecord(out["naive"], out["qr"], diff, _echo(cfg))


@dataclass
class BinReplications:
    stats: dict
    correlations: np.ndarray
    replicates: int
    meta: dict = field(default_factory=dict)

    def to_dict(self):
        d = dict(self.meta)
        d.update({"replicates": self.replicates,
                  "bin": {k: v.to_dict() for k, v in self.stats.items()}})
        return d

    def write_correlations_csv(self, path):
        """One row per replicate: index then Pearson(aligned estimate, truth) per estimator."""
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["replicate"] + [f"r_{k}" for k in ESTIMATORS])
            for r, row in enumerate(self.correlations):
                wr.writerow([r] + [format(float(v), ".17g") for v in row])


def _replicate(cfg, truth, r, ecfg):
    sim = generate(replace(cfg, seed=cfg.seed ^ r), truth_y=truth)
    est = estimator_vectors(sim.placements, ecfg)
    cal = {k: calibrate(v, truth) for k, v in est.items()}
    cors = [pearson(affine_align(est[k], truth), truth) for k in ESTIMATORS]
    return cal, cors


def run_bin_replications(cfg: SimConfig, replicates: int,
                         estimator_cfg: Optional[EstimatorConfig] = None,
                         threads: int = 1) -> BinReplications:
    """Fixed truth, fresh respondents per replicate; pooled BIN per estimator.

    Each replicate's estimates are mapped onto the truth scale with
    :func:`calibrate` before pooling.
    """
    if replicates < 2:
        raise ConfigError("BIN replications need at least 2 replicates")
    truth = generate(cfg).truth_y

    def job(r):
        return _replicate(cfg, truth, r, estimator_cfg)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(job, range(replicates)))
    else:
        results = [job(r) for r in range(replicates)]
    stats = {}
    for name in ESTIMATORS:
        theta = np.vstack([cal[name] for cal, _ in results])
        stats[name] = bin_decomposition(theta, truth)
    cors = np.array([c for _, c in results])
    return BinReplications(stats, cors, replicates, _echo(cfg))
