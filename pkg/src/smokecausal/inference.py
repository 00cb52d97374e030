"""Posterior causal effect, ordinary kriging to grid cells, credible intervals.

Kriging is ordinary kriging (constant unknown mean estimated by GLS inside
the system): weights depend only on geometry and the kernel, so one solve per
target set serves every field and every posterior draw.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .data import GridTable
from .errors import InsufficientDataError, ParameterError, ValidationError
from .gibbs import PosteriorSamples
from .spatial import SiteSet, distance_matrix, empirical_variogram, fit_range, planar_coords

logger = logging.getLogger(__name__)


def credible_interval(draws, level: float = 0.95) -> tuple[float, float]:
    """Equal-tailed empirical interval with linear-interpolation quantiles.

    Fewer than 20 draws triggers a warning and the (min, max) envelope.
    """
    x = np.asarray(draws, dtype=float).ravel()
    if x.size == 0:
        raise InsufficientDataError("no draws")
    if not 0.0 < level < 1.0:
        raise ParameterError("level must be in (0, 1)")
    if x.size < 20:
        warnings.warn("fewer than 20 draws; returning the min/max envelope", stacklevel=2)
        return float(x.min()), float(x.max())
    tail = (1.0 - level) / 2.0
    lo, hi = np.quantile(x, [tail, 1.0 - tail])
    return float(lo), float(hi)


@dataclass(frozen=True)
class CausalEffectPosterior:
    """Per-site posterior of the time-averaged smoke-masked fire contribution."""

    site_id: np.ndarray
    draws: np.ndarray  # (K, n)
    mean: np.ndarray
    sd: np.ndarray
    lo95: np.ndarray
    hi95: np.ndarray
    theta_bar_mean: np.ndarray
    theta_bar_sd: np.ndarray


def causal_effect(samples: PosteriorSamples, c: np.ndarray | None = None) -> CausalEffectPosterior:
    """Summarize the per-site causal effect from kept draws.

    The per-draw effect is the time average of C_t * delta_t, computed inside
    the chain; when full latent draws were kept and an alternative indicator
    is supplied, the effect is recomputed against it.
    """
    if c is not None and samples.delta_draws is not None:
        draws = (samples.delta_draws * np.asarray(c, dtype=float)[None, :, :]).mean(axis=2)
    else:
        draws = samples.delta_effect_draws
    mean = draws.mean(axis=0)
    sd = draws.std(axis=0, ddof=1) if draws.shape[0] > 1 else np.zeros(draws.shape[1])
    lo = np.empty(mean.size)
    hi = np.empty(mean.size)
    for i in range(mean.size):
        lo[i], hi[i] = credible_interval(draws[:, i])
    return CausalEffectPosterior(
        site_id=samples.site_id,
        draws=draws,
        mean=mean,
        sd=sd,
        lo95=lo,
        hi95=hi,
        theta_bar_mean=samples.theta_bar_draws.mean(axis=0),
        theta_bar_sd=samples.theta_bar_draws.std(axis=0, ddof=1)
        if samples.theta_bar_draws.shape[0] > 1
        else np.zeros(mean.size),
    )


# ---------------------------------------------------------------------------
# Ordinary kriging
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KrigeKernel:
    sill: float
    range_km: float
    nugget: float = 0.0

    def __post_init__(self):
        if self.sill <= 0 or not np.isfinite(self.sill):
            raise ParameterError("kriging sill must be positive")
        if self.range_km <= 0 or not np.isfinite(self.range_km):
            raise ParameterError("kriging range must be positive")
        if self.nugget < 0:
            raise ParameterError("kriging nugget must be nonnegative")


@dataclass(frozen=True)
class KrigeResult:
    mean: np.ndarray
    sd: np.ndarray
    weights: np.ndarray  # (n_targets, n_sources); reusable for draw surfaces


def krige(
    values: np.ndarray,
    sites: SiteSet,
    target_lon,
    target_lat,
    kernel: KrigeKernel,
    on_duplicates: str = "error",
) -> KrigeResult:
    """Ordinary kriging of per-site values to target points.

    Targets are projected with the source sites' own projection so distances
    agree with the fitted model.  Duplicate source locations either raise or
    are averaged, per ``on_duplicates`` ("error" | "mean").
    """
    z = np.asarray(values, dtype=float)
    if z.shape[0] != sites.n:
        raise ValidationError("values length does not match number of sites")
    origin = sites.projection_origin()
    src = sites.coords_km()
    if sites.planar:
        tgt = np.column_stack([np.asarray(target_lon, float), np.asarray(target_lat, float)])
    else:
        tgt = planar_coords(target_lon, target_lat, origin)

    d_src = distance_matrix(sites)
    off_diag = d_src[np.triu_indices(sites.n, k=1)]
    if off_diag.size and off_diag.min() == 0.0:
        if on_duplicates == "mean":
            keep, z, src = _merge_duplicates(d_src, z, src)
            d_src = np.sqrt(((src[:, None, :] - src[None, :, :]) ** 2).sum(-1))
        else:
            raise ValidationError(
                "duplicate source locations; pass on_duplicates='mean' to average them"
            )

    n = z.shape[0]
    cov = kernel.sill * np.exp(-d_src / kernel.range_km) + kernel.nugget * np.eye(n)
    aug = np.zeros((n + 1, n + 1))
    aug[:n, :n] = cov
    aug[:n, n] = 1.0
    aug[n, :n] = 1.0
    lu = lu_factor(aug)

    d_cross = np.sqrt(((tgt[:, None, :] - src[None, :, :]) ** 2).sum(-1))
    rhs = np.empty((n + 1, tgt.shape[0]))
    rhs[:n] = kernel.sill * np.exp(-d_cross.T / kernel.range_km)
    rhs[n] = 1.0
    sol = lu_solve(lu, rhs)
    w = sol[:n].T
    lagrange = sol[n]

    mean = w @ z
    var = kernel.sill - np.einsum("ij,ji->i", w, rhs[:n]) - lagrange
    sd = np.sqrt(np.maximum(var, 0.0))
    return KrigeResult(mean=mean, sd=sd, weights=w)


def _merge_duplicates(d_src, z, src):
    """Average values at exactly co-located sources, keeping first positions."""
    n = d_src.shape[0]
    groups: list[list[int]] = []
    assigned = np.full(n, -1)
    for i in range(n):
        if assigned[i] >= 0:
            continue
        members = np.nonzero(d_src[i] == 0.0)[0]
        gid = len(groups)
        groups.append(list(members))
        assigned[members] = gid
    keep = np.array([g[0] for g in groups])
    merged = np.array([z[g].mean() for g in groups])
    return keep, merged, src[keep]


def field_kernel(
    values: np.ndarray,
    sites: SiteSet,
    default_range: float,
    nugget: float = 0.0,
    n_bins: int = 12,
) -> KrigeKernel:
    """Kernel for kriging a posterior-mean field: variogram fit with fallback.

    When the field's own variogram cannot be fit (few sites, flat field), the
    sample variance and the supplied default range are used instead.
    """
    z = np.asarray(values, dtype=float)
    fallback_sill = max(float(np.nanvar(z)), 1e-12)
    try:
        vg = empirical_variogram(z, distance_matrix(sites), n_bins=n_bins)
        fit = fit_range(vg)
        if not fit.degenerate and fit.sill > 0:
            return KrigeKernel(sill=fit.sill, range_km=fit.range_km, nugget=max(fit.nugget, nugget))
    except (InsufficientDataError, ValidationError):
        pass
    return KrigeKernel(sill=fallback_sill, range_km=default_range, nugget=nugget)


SURFACE_FIELDS = ("delta", "theta_bar", "alpha0", "beta0", "alpha1", "beta1")


@dataclass(frozen=True)
class KrigedSurface:
    """Posterior-summary fields interpolated to grid-cell centroids."""

    cell_id: np.ndarray
    fields: dict  # name -> (mean, sd) arrays over cells
    delta_draws: np.ndarray  # (K, n_cells) causal-effect draws carried to cells

    def mean(self, name: str) -> np.ndarray:
        return self.fields[name][0]

    def sd(self, name: str) -> np.ndarray:
        return self.fields[name][1]


def build_surfaces(
    samples: PosteriorSamples,
    effect: CausalEffectPosterior,
    sites: SiteSet,
    grid: GridTable,
) -> KrigedSurface:
    """Krige posterior means and sds of every reported field to the grid.

    Standard deviations are interpolated as plain values with the same
    weights as the means.  The causal-effect draws ride the same weight
    matrix, giving per-cell draws for downstream burden intervals.
    """
    default_range = max(samples.phi2, 1e-6)
    per_field_values = {
        "delta": (effect.mean, effect.sd),
        "theta_bar": (effect.theta_bar_mean, effect.theta_bar_sd),
        "alpha0": (samples.alpha0.mean(axis=0), samples.alpha0.std(axis=0, ddof=1)),
        "beta0": (samples.beta0.mean(axis=0), samples.beta0.std(axis=0, ddof=1)),
        "alpha1": (samples.alpha1.mean(axis=0), samples.alpha1.std(axis=0, ddof=1)),
        "beta1": (samples.beta1.mean(axis=0), samples.beta1.std(axis=0, ddof=1)),
    }
    # measurement noise averages down over the day dimension of theta_bar
    nuggets = {"theta_bar": float(samples.sigma_sq.mean()) / max(samples.theta_mean.shape[1], 1)}

    out: dict = {}
    delta_draws_cells = None
    for name in SURFACE_FIELDS:
        mean_vals, sd_vals = per_field_values[name]
        kernel = field_kernel(
            mean_vals,
            sites,
            default_range=default_range if name not in ("delta", "theta_bar") else max(samples.phi1, 1e-6),
            nugget=nuggets.get(name, 0.0),
        )
        res = krige(mean_vals, sites, grid.lon, grid.lat, kernel)
        sd_interp = res.weights @ sd_vals
        out[name] = (res.mean, np.maximum(sd_interp, 0.0))
        if name == "delta":
            delta_draws_cells = effect.draws @ res.weights.T
    return KrigedSurface(cell_id=grid.cell_id, fields=out, delta_draws=delta_draws_cells)


def percent_of_total(delta_mean: np.ndarray, theta_mean: np.ndarray):
    """Fire share of the estimated total, as percent per cell.

    Returns (percent, flags): percent = 100 * delta / (theta + delta),
    clamped to [-100, 100]; cells with nonpositive totals are flagged
    "total_nonpositive" and negative effects "negative_effect".
    """
    d = np.asarray(delta_mean, dtype=float)
    t = np.asarray(theta_mean, dtype=float)
    total = t + d
    flags = np.full(d.shape, "", dtype=object)
    flags[d < 0] = "negative_effect"
    bad = total <= 0
    flags[bad] = "total_nonpositive"
    with np.errstate(divide="ignore", invalid="ignore"):
        pct = np.where(bad, 0.0, 100.0 * d / np.where(bad, 1.0, total))
    return np.clip(pct, -100.0, 100.0), flags
