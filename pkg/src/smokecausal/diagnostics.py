"""Convergence and model-fit diagnostics: ESS, residual ACF, variogram GoF.

ESS uses the initial-positive-sequence truncation of the summed
autocorrelations, which is conservative and has closed-form AR(1) behaviour
for testing.  All functions are pure over immutable inputs.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .data import PanelDataset, design_matrix
from .errors import InsufficientDataError, ValidationError
from .spatial import CovarianceParams, Variogram, obs_covariance

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EssResult:
    ess: float
    n_draws: int
    flag: str = ""


def _autocorrelation(x: np.ndarray) -> np.ndarray:
    """Biased sample autocorrelations via FFT, rho[0] = 1."""
    n = x.size
    centered = x - x.mean()
    size = int(2 ** np.ceil(np.log2(2 * n)))
    f = np.fft.rfft(centered, size)
    acov = np.fft.irfft(f * np.conjugate(f), size)[:n].real / n
    return acov / acov[0]


def ess(chain) -> EssResult:
    """Effective sample size N / (1 + 2 * sum of autocorrelations).

    The sum is truncated where the Geyer pairwise sums
    rho[2m] + rho[2m+1] first turn nonpositive, and the result is clipped
    to (0, N].  A constant chain is reported as ESS = N with a flag.
    """
    x = np.asarray(chain, dtype=float).ravel()
    n = x.size
    if n < 10:
        raise InsufficientDataError("ESS needs at least 10 draws")
    if not np.isfinite(x).all():
        raise ValidationError("chain contains non-finite draws")
    if np.var(x) == 0.0:
        return EssResult(ess=float(n), n_draws=n, flag="constant chain")
    rho = _autocorrelation(x)
    n_pairs = (n - 1) // 2
    tau = 1.0
    for m in range(n_pairs):
        pair = rho[2 * m + 1] + rho[2 * m + 2]
        if pair <= 0.0:
            break
        tau += 2.0 * pair
    value = float(np.clip(n / tau, 1e-12, n))
    return EssResult(ess=value, n_draws=n, flag="")


@dataclass(frozen=True)
class AcfResult:
    """Sample autocorrelations of day-ordered per-site regression residuals."""

    lags: np.ndarray
    per_site: np.ndarray  # (n_sites, n_lags), NaN where not computable
    pooled: np.ndarray  # (n_lags,)
    pair_counts: np.ndarray  # (n_sites, n_lags)
    max_lag: int


def _site_acf(resid: np.ndarray, max_lag: int) -> tuple[np.ndarray, np.ndarray]:
    finite = np.isfinite(resid)
    r = resid - np.nanmean(resid)
    var = np.nanmean(r[finite] ** 2)
    acf = np.full(max_lag + 1, np.nan)
    counts = np.zeros(max_lag + 1, dtype=np.int64)
    if var == 0 or finite.sum() < 2:
        return acf, counts
    for k in range(max_lag + 1):
        a = r[: r.size - k] if k else r
        b = r[k:]
        ok = finite[: r.size - k] & finite[k:] if k else finite
        if ok.sum() == 0:
            continue
        acf[k] = np.mean(a[ok] * b[ok]) / var
        counts[k] = int(ok.sum())
    return acf, counts


def residual_acf(data: PanelDataset, max_lag: int = 20) -> AcfResult:
    """Autocorrelation of per-site regression residuals, pooled across sites.

    Residuals come from the per-site least squares of y on
    [1, theta_hat, C, C*delta_hat]; rank-deficient sites use the minimum-norm
    solution, which still defines residuals.  Missing days are skipped
    pairwise.  The pooled curve weights site ACFs by usable pair counts.
    """
    n, n_days = data.n, data.n_days
    if n_days < max_lag + 2:
        new_lag = max(n_days - 2, 1)
        logger.warning("max_lag %d too long for %d days; shortened to %d", max_lag, n_days, new_lag)
        max_lag = new_lag
    per_site = np.full((n, max_lag + 1), np.nan)
    counts = np.zeros((n, max_lag + 1), dtype=np.int64)
    for i in range(n):
        days = np.nonzero(~data.missing_mask[i])[0]
        if days.size < 2:
            continue
        x = design_matrix(data, i, days)
        coef, _, _, _ = np.linalg.lstsq(x, data.y[i, days], rcond=None)
        resid = np.full(n_days, np.nan)
        resid[days] = data.y[i, days] - x @ coef
        per_site[i], counts[i] = _site_acf(resid, max_lag)
    weights = np.where(np.isfinite(per_site), counts, 0)
    with np.errstate(invalid="ignore", divide="ignore"):
        pooled = np.nansum(np.nan_to_num(per_site) * weights, axis=0) / weights.sum(axis=0)
    return AcfResult(
        lags=np.arange(max_lag + 1),
        per_site=per_site,
        pooled=pooled,
        pair_counts=counts,
        max_lag=max_lag,
    )


# ---------------------------------------------------------------------------
# Variogram goodness of fit by smoke-flag combination
# ---------------------------------------------------------------------------

FLAG_GROUPS = ((0, 0), (0, 1), (1, 1))


@dataclass(frozen=True)
class GofGroup:
    flags: tuple[int, int]
    empirical: Variogram
    fitted: np.ndarray  # model semivariance at the empirical bin centers


@dataclass(frozen=True)
class GofTable:
    groups: tuple[GofGroup, ...]
    notes: tuple[str, ...] = ()


def fitted_semivariance(h, flags: tuple[int, int], params: CovarianceParams):
    """Model semivariance for a pair with smoke flags (c, c') at distance h.

    gamma(h) = (V_c + V_c')/2 + nugget - Cov(h; c, c'), where V_c is the
    same-flag covariance at distance zero without nugget.
    """
    c, cp = flags
    v_c = obs_covariance(0.0, c, c, params)
    v_cp = obs_covariance(0.0, cp, cp, params)
    return 0.5 * (v_c + v_cp) + params.sigma_sq - obs_covariance(h, c, cp, params)


def variogram_gof(
    residuals: np.ndarray,
    c: np.ndarray,
    dist: np.ndarray,
    params: CovarianceParams,
    n_bins: int = 15,
    max_lag: float | None = None,
) -> GofTable:
    """Empirical vs fitted variograms for each smoke-flag pair combination.

    Pairs are grouped per day by the sorted flag pair (0,0), (0,1) or (1,1);
    semivariances are the classical estimator pooled over days.  Groups with
    no pairs are omitted with a note.
    """
    resid = np.asarray(residuals, dtype=float)
    n = resid.shape[0]
    if resid.ndim != 2 or c.shape != resid.shape:
        raise ValidationError("residuals and c must both be (n_sites, n_days)")
    if dist.shape != (n, n):
        raise ValidationError("distance matrix does not match residual rows")
    if n < 2:
        raise InsufficientDataError("variogram GoF needs at least two sites")

    iu, ju = np.triu_indices(n, k=1)
    d = dist[iu, ju]
    if max_lag is None:
        max_lag = 0.5 * float(np.max(d))
    if max_lag <= 0:
        raise InsufficientDataError("all pairwise distances are zero")
    edges = np.linspace(0.0, max_lag, n_bins + 1)
    centers = 0.5 * (edges[:-1] + edges[1:])
    bin_idx = np.minimum(np.searchsorted(edges, d, side="right") - 1, n_bins)
    in_range = bin_idx < n_bins

    sums = {g: np.zeros(n_bins) for g in FLAG_GROUPS}
    counts = {g: np.zeros(n_bins, dtype=np.int64) for g in FLAG_GROUPS}
    finite = np.isfinite(resid)
    flags = np.asarray(c)
    for t in range(resid.shape[1]):
        ok = finite[iu, t] & finite[ju, t] & in_range
        if not ok.any():
            continue
        diff = resid[iu[ok], t] - resid[ju[ok], t]
        pair_sum = flags[iu[ok], t] + flags[ju[ok], t]  # 0, 1 or 2 smoke flags
        idx = bin_idx[ok]
        for g, code in zip(FLAG_GROUPS, (0, 1, 2)):
            sel = pair_sum == code
            if not sel.any():
                continue
            sums[g] += np.bincount(idx[sel], weights=diff[sel] ** 2, minlength=n_bins)
            counts[g] += np.bincount(idx[sel], minlength=n_bins)

    groups = []
    notes = []
    for g in FLAG_GROUPS:
        cnt = counts[g]
        if cnt.sum() == 0:
            notes.append(f"group {g}: no pairs; omitted")
            continue
        with np.errstate(invalid="ignore"):
            semis = np.where(cnt > 0, sums[g] / (2.0 * np.maximum(cnt, 1)), np.nan)
        vg = Variogram(bin_centers=centers, semivariances=semis, bin_counts=cnt)
        groups.append(GofGroup(flags=g, empirical=vg, fitted=fitted_semivariance(centers, g, params)))
    return GofTable(groups=tuple(groups), notes=tuple(notes))


@dataclass(frozen=True)
class CovarianceCurves:
    """The three flag-case covariance curves on a common distance grid."""

    h: np.ndarray
    both_clear: np.ndarray
    mixed: np.ndarray
    both_smoke: np.ndarray

    def rows(self):
        for i, h in enumerate(self.h):
            yield h, self.both_clear[i], self.mixed[i], self.both_smoke[i]


def covariance_curves(params: CovarianceParams, h_grid) -> CovarianceCurves:
    """Evaluate the observation covariance on a grid for each flag case."""
    h = np.asarray(h_grid, dtype=float)
    return CovarianceCurves(
        h=h,
        both_clear=np.asarray(obs_covariance(h, 0, 0, params)),
        mixed=np.asarray(obs_covariance(h, 0, 1, params)),
        both_smoke=np.asarray(obs_covariance(h, 1, 1, params)),
    )
