"""Site-level k-fold cross-validation for smoke-threshold selection.

Folds hold out whole sites (the prediction task is unmonitored locations).
Held-out observations are predicted from the posterior summaries of a chain
fit to the training sites: bias fields and day-residual fields are kriged to
the held-out sites, and the predictive variance combines the residual kriging
variances with the measurement nugget.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from .data import PanelDataset
from .errors import (
    InsufficientDataError,
    NumericalError,
    ParameterError,
    ValidationError,
)
from .gibbs import ChainConfig, PosteriorSamples, estimate_ranges, run_chain
from .inference import KrigeKernel, causal_effect, field_kernel, krige
from .simulate import stream
from .spatial import SiteSet

logger = logging.getLogger(__name__)

# reduced schedule for per-fold refits; pass full_chains=True for the real one
CV_CHAIN_DEFAULTS = dict(n_iter=6000, burn_in=1000, thin=10)


def kfold_split(sites: SiteSet, k: int, seed: int = 0) -> list[np.ndarray]:
    """Seeded disjoint site folds with sizes differing by at most one."""
    if k < 1:
        raise ParameterError("k must be >= 1")
    if k > sites.n:
        raise ParameterError(f"k={k} exceeds the {sites.n} available sites")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFF, 0x6B666F6C]))
    perm = rng.permutation(sites.n)
    return [np.sort(fold) for fold in np.array_split(perm, k)]


@dataclass(frozen=True)
class CvMetrics:
    mse: float
    rmse: float
    mad: float
    sd: float
    coverage: float
    n_obs: int


def cv_metrics(pred_mean, pred_sd, obs) -> CvMetrics:
    """Point and interval metrics for one prediction batch.

    coverage is the share of observations inside mean +- 1.96 * sd; SD is the
    sample standard deviation of the predictions themselves.
    """
    p = np.asarray(pred_mean, dtype=float).ravel()
    s = np.asarray(pred_sd, dtype=float).ravel()
    o = np.asarray(obs, dtype=float).ravel()
    if not (p.size == s.size == o.size):
        raise ValidationError("prediction and observation lengths differ")
    if p.size == 0:
        raise ValidationError("no observations to score")
    err = p - o
    mse = float(np.mean(err**2))
    return CvMetrics(
        mse=mse,
        rmse=float(np.sqrt(mse)),
        mad=float(np.mean(np.abs(err))),
        sd=float(np.std(p, ddof=1)) if p.size > 1 else 0.0,
        coverage=float(np.mean(np.abs(err) <= 1.96 * s)),
        n_obs=int(p.size),
    )


def predict_panel(
    samples: PosteriorSamples,
    train: PanelDataset,
    test: PanelDataset,
) -> tuple[np.ndarray, np.ndarray]:
    """Posterior-predictive mean and sd of total PM2.5 at held-out sites.

    Bias fields are kriged from their training-site posterior means; the
    per-day latent residuals (posterior mean minus bias-adjusted model mean)
    are kriged with the error-process kernels, which share one geometry and
    therefore one weight solve each.
    """
    n_days = train.n_days
    if test.n_days != n_days:
        raise ValidationError("train and test panels must share the day axis")

    bias_hat = {}
    for name, draws in samples.field_chains():
        vals = draws.mean(axis=0)
        kernel = field_kernel(vals, train.sites, default_range=max(samples.phi2, 1e-6))
        bias_hat[name] = krige(vals, train.sites, test.sites.lon, test.sites.lat, kernel)

    b0_train = (
        samples.alpha0.mean(axis=0)[:, None]
        + samples.beta0.mean(axis=0)[:, None] * train.theta_hat
    )
    b1_train = (
        samples.alpha1.mean(axis=0)[:, None]
        + samples.beta1.mean(axis=0)[:, None] * train.delta_hat
    )
    e0 = samples.theta_mean - b0_train
    e1 = samples.delta_mean - b1_train

    k0 = KrigeKernel(sill=max(float(samples.sigma1_sq.mean()), 1e-12), range_km=samples.phi1)
    k1 = KrigeKernel(sill=max(float(samples.sigma2_sq.mean()), 1e-12), range_km=samples.phi1)
    zeros = np.zeros(train.n)
    w0 = krige(zeros, train.sites, test.sites.lon, test.sites.lat, k0)
    w1 = krige(zeros, train.sites, test.sites.lon, test.sites.lat, k1)

    e0_star = w0.weights @ e0
    e1_star = w1.weights @ e1

    cstar = test.c.astype(float)
    mean = (
        bias_hat["alpha0"].mean[:, None]
        + bias_hat["beta0"].mean[:, None] * test.theta_hat
        + e0_star
        + cstar
        * (
            bias_hat["alpha1"].mean[:, None]
            + bias_hat["beta1"].mean[:, None] * test.delta_hat
            + e1_star
        )
    )
    sigma_sq = float(samples.sigma_sq.mean())
    var = w0.sd[:, None] ** 2 + cstar * (w1.sd[:, None] ** 2) + sigma_sq
    return mean, np.sqrt(var)


@dataclass(frozen=True)
class CvRow:
    tau: float
    fold: int | None  # None marks the pooled row
    metrics: CvMetrics


@dataclass(frozen=True)
class CvTable:
    rows: tuple[CvRow, ...]
    recommended_tau: float
    notes: tuple[str, ...] = ()

    def pooled(self) -> dict[float, CvMetrics]:
        return {r.tau: r.metrics for r in self.rows if r.fold is None}


def tau_selection(
    data: PanelDataset,
    tau_grid,
    k: int = 5,
    seed: int = 0,
    chain_config: ChainConfig | None = None,
    full_chains: bool = False,
) -> CvTable:
    """Refit per fold for each threshold and tabulate predictive metrics.

    The recommended threshold minimizes the pooled MSE, with ties broken
    toward the smaller threshold.  Folds whose training design is degenerate
    are skipped with a note.
    """
    taus = [float(t) for t in tau_grid]
    if not taus:
        raise ParameterError("tau grid is empty")
    if chain_config is None:
        chain_config = ChainConfig(seed=seed, **({} if full_chains else CV_CHAIN_DEFAULTS))

    folds = kfold_split(data.sites, k, seed)
    rows: list[CvRow] = []
    notes: list[str] = []
    pooled_for_tau: dict[float, CvMetrics] = {}

    for tau in taus:
        data_tau = data.with_indicator(tau)
        all_pred, all_sd, all_obs = [], [], []
        for fold_idx, test_idx in enumerate(folds):
            train_idx = np.setdiff1d(np.arange(data.n), test_idx)
            train = data_tau.subset_sites(train_idx)
            test = data_tau.subset_sites(test_idx)
            fold_seed = int(stream(seed, "cv", f"{tau}", fold_idx).integers(2**31))
            config = replace(chain_config, seed=fold_seed)
            try:
                ranges = estimate_ranges(train)
                samples = run_chain(train, config, ranges=ranges)
                pred_mean, pred_sd = predict_panel(samples, train, test)
            except (ValidationError, NumericalError, InsufficientDataError) as exc:
                notes.append(f"tau={tau} fold={fold_idx}: skipped ({exc})")
                logger.warning(notes[-1])
                continue
            keep = ~test.missing_mask
            if not keep.any():
                notes.append(f"tau={tau} fold={fold_idx}: no held-out observations")
                continue
            m = cv_metrics(pred_mean[keep], pred_sd[keep], test.y[keep])
            rows.append(CvRow(tau=tau, fold=fold_idx, metrics=m))
            all_pred.append(pred_mean[keep])
            all_sd.append(pred_sd[keep])
            all_obs.append(test.y[keep])
        if all_pred:
            pooled = cv_metrics(
                np.concatenate(all_pred), np.concatenate(all_sd), np.concatenate(all_obs)
            )
            pooled_for_tau[tau] = pooled
            rows.append(CvRow(tau=tau, fold=None, metrics=pooled))

    if not pooled_for_tau:
        raise InsufficientDataError("every fold failed; no cross-validation results")
    best = min(pooled_for_tau, key=lambda t: (pooled_for_tau[t].mse, t))
    return CvTable(rows=tuple(rows), recommended_tau=best, notes=tuple(notes))
