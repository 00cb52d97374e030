"""Distance geometry, exponential kernels, variograms and the observation covariance.

Coordinates are either geographic (decimal degrees, projected to a planar km
grid by an equirectangular map about the site centroid) or already planar km
(``SiteSet(planar=True)``, used heavily by the synthetic generator and tests).
All distances downstream of this module are kilometres.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares
from scipy.spatial.distance import pdist, squareform

from .errors import (
    InsufficientDataError,
    NumericalError,
    ParameterError,
    ValidationError,
)

logger = logging.getLogger(__name__)

EARTH_RADIUS_KM = 6371.0


# ---------------------------------------------------------------------------
# Sites and projection
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SiteSet:
    """Point locations with region labels; the spatial index for all fields.

    site_id
        Unique identifiers, one per site.
    lon, lat
        Decimal degrees, or planar km east/north when ``planar`` is True.
    region
        Region label per site (used for blocking).
    """

    site_id: np.ndarray
    lon: np.ndarray
    lat: np.ndarray
    region: np.ndarray
    planar: bool = False

    def __post_init__(self):
        ids = np.asarray(self.site_id, dtype=object)
        lon = np.asarray(self.lon, dtype=float)
        lat = np.asarray(self.lat, dtype=float)
        region = np.asarray(self.region, dtype=object)
        if ids.size == 0:
            raise ValidationError("SiteSet needs at least one site")
        if not (ids.size == lon.size == lat.size == region.size):
            raise ValidationError("SiteSet field lengths differ")
        if len(set(ids.tolist())) != ids.size:
            raise ValidationError("site_id values must be unique")
        if not (np.isfinite(lon).all() and np.isfinite(lat).all()):
            raise ValidationError("site coordinates must be finite")
        object.__setattr__(self, "site_id", ids)
        object.__setattr__(self, "lon", lon)
        object.__setattr__(self, "lat", lat)
        object.__setattr__(self, "region", region)

    @property
    def n(self) -> int:
        return self.site_id.size

    def projection_origin(self) -> tuple[float, float]:
        """Centroid (lon0, lat0) used by the equirectangular projection."""
        return float(np.mean(self.lon)), float(np.mean(self.lat))

    def coords_km(self, origin: tuple[float, float] | None = None) -> np.ndarray:
        """(n, 2) planar km coordinates."""
        if self.planar:
            return np.column_stack([self.lon, self.lat]).astype(float)
        if origin is None:
            origin = self.projection_origin()
        return planar_coords(self.lon, self.lat, origin)

    def subset(self, indices) -> "SiteSet":
        idx = np.asarray(indices)
        return SiteSet(
            site_id=self.site_id[idx],
            lon=self.lon[idx],
            lat=self.lat[idx],
            region=self.region[idx],
            planar=self.planar,
        )

    def region_labels(self) -> list[str]:
        """Distinct region labels in first-appearance order."""
        seen: dict = {}
        for r in self.region:
            seen.setdefault(r, None)
        return list(seen)


def planar_coords(lon, lat, origin: tuple[float, float]) -> np.ndarray:
    """Equirectangular projection of lon/lat degrees to km about ``origin``."""
    lon = np.asarray(lon, dtype=float)
    lat = np.asarray(lat, dtype=float)
    lon0, lat0 = origin
    rad = np.pi / 180.0
    x = EARTH_RADIUS_KM * np.cos(lat0 * rad) * (lon - lon0) * rad
    y = EARTH_RADIUS_KM * (lat - lat0) * rad
    return np.column_stack([x, y])


def distance_matrix(sites: SiteSet) -> np.ndarray:
    """Symmetric pairwise distance matrix in km with zero diagonal."""
    coords = sites.coords_km()
    if not np.isfinite(coords).all():
        raise ValidationError("non-finite coordinates in distance computation")
    if sites.n == 1:
        return np.zeros((1, 1))
    return squareform(pdist(coords))


def exp_correlation(dist: np.ndarray, phi: float) -> np.ndarray:
    """Exponential correlation exp(-h/phi) applied elementwise.

    phi must be positive; the result has unit diagonal for a zero-diagonal
    distance matrix and is positive definite for distinct sites.
    """
    if not np.isfinite(phi) or phi <= 0:
        raise ParameterError(f"range parameter must be positive, got {phi!r}")
    return np.exp(-np.asarray(dist, dtype=float) / phi)


def jittered_cholesky(mat: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor, retrying once with diagonal jitter 1e-8*trace/n."""
    try:
        return np.linalg.cholesky(mat)
    except np.linalg.LinAlgError:
        n = mat.shape[0]
        jitter = 1e-8 * np.trace(mat) / n
        try:
            return np.linalg.cholesky(mat + jitter * np.eye(n))
        except np.linalg.LinAlgError as exc:
            raise NumericalError(
                "covariance matrix is not positive definite even after "
                f"jitter {jitter:.3e}; check for duplicate site locations"
            ) from exc


# ---------------------------------------------------------------------------
# Observation covariance
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CovarianceParams:
    """Parameters of the bivariate error process plus the measurement nugget.

    sigma1_sq, sigma2_sq : variances of the no-fire and fire error components
    gamma : correlation between the two components, in [-1, 1]
    phi1 : spatial range (km) of the shared exponential decay
    sigma_sq : iid measurement-error (nugget) variance
    """

    sigma1_sq: float
    sigma2_sq: float
    gamma: float
    phi1: float
    sigma_sq: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.sigma1_sq) and self.sigma1_sq > 0):
            raise ParameterError("sigma1_sq must be positive")
        if not (np.isfinite(self.sigma2_sq) and self.sigma2_sq >= 0):
            raise ParameterError("sigma2_sq must be nonnegative")
        if not (np.isfinite(self.gamma) and abs(self.gamma) <= 1):
            raise ParameterError("gamma must lie in [-1, 1]")
        if not (np.isfinite(self.phi1) and self.phi1 > 0):
            raise ParameterError("phi1 must be positive")
        if not (np.isfinite(self.sigma_sq) and self.sigma_sq >= 0):
            raise ParameterError("sigma_sq must be nonnegative")

    @property
    def sigma12(self) -> float:
        return float(np.sqrt(self.sigma1_sq * self.sigma2_sq) * self.gamma)


def obs_covariance(h, c, c_prime, params: CovarianceParams, same_site=False):
    """Covariance of two observations at distance ``h`` under smoke flags (c, c').

    Three cases: both flags 0 gives sigma1^2 * exp(-h/phi1); mixed flags gives
    sigma1^2 * (1 + (sigma2/sigma1)*gamma) * exp(-h/phi1); both flags 1 gives
    (sigma1^2 + 2*sigma1*sigma2*gamma + sigma2^2) * exp(-h/phi1).  The nugget
    sigma_sq is added only where ``same_site`` is True; co-located but distinct
    sites share no measurement error.

    Accepts scalars or broadcastable arrays; returns the broadcast result.
    """
    h = np.asarray(h, dtype=float)
    c = np.asarray(c)
    cp = np.asarray(c_prime)
    if np.any(h < 0):
        raise ValidationError("distance h must be nonnegative")
    if not (np.isin(c, (0, 1)).all() and np.isin(cp, (0, 1)).all()):
        raise ValidationError("smoke flags must be 0 or 1")
    s1 = np.sqrt(params.sigma1_sq)
    s2 = np.sqrt(params.sigma2_sq)
    both0 = params.sigma1_sq
    mixed = params.sigma1_sq * (1.0 + (s2 / s1) * params.gamma)
    both1 = params.sigma1_sq + 2.0 * s1 * s2 * params.gamma + params.sigma2_sq
    sill = np.where(c == cp, np.where(c == 1, both1, both0), mixed)
    out = sill * np.exp(-h / params.phi1)
    out = out + np.where(np.asarray(same_site, dtype=bool), params.sigma_sq, 0.0)
    if out.ndim == 0:
        return float(out)
    return out


# ---------------------------------------------------------------------------
# Variograms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Variogram:
    """Binned classical (Matheron) semivariances.

    Bins with no pairs carry count 0 and NaN semivariance.
    """

    bin_centers: np.ndarray
    semivariances: np.ndarray
    bin_counts: np.ndarray

    def __post_init__(self):
        centers = np.asarray(self.bin_centers, dtype=float)
        semis = np.asarray(self.semivariances, dtype=float)
        counts = np.asarray(self.bin_counts, dtype=np.int64)
        if not (centers.size == semis.size == counts.size):
            raise ValidationError("variogram arrays must have equal length")
        if np.any(np.diff(centers) <= 0):
            raise ValidationError("variogram bins must be strictly increasing")
        if np.any(counts < 0) or np.nanmin(semis, initial=0.0) < 0:
            raise ValidationError("variogram counts and semivariances must be nonnegative")
        object.__setattr__(self, "bin_centers", centers)
        object.__setattr__(self, "semivariances", semis)
        object.__setattr__(self, "bin_counts", counts)

    def nonempty(self) -> np.ndarray:
        return self.bin_counts > 0


def empirical_variogram(
    values: np.ndarray,
    dist: np.ndarray,
    n_bins: int = 15,
    max_lag: float | None = None,
) -> Variogram:
    """Classical semivariance per distance bin, pairs pooled over days.

    values
        (n_sites, n_days) array, NaN for missing; a 1-D array is treated
        as a single realization.
    dist
        (n_sites, n_sites) distance matrix in km.
    max_lag
        Upper edge of the last bin; defaults to half the maximum pairwise
        distance.
    """
    vals = np.asarray(values, dtype=float)
    if vals.ndim == 1:
        vals = vals[:, None]
    n = vals.shape[0]
    if dist.shape != (n, n):
        raise ValidationError("distance matrix does not match value rows")
    if n < 2:
        raise InsufficientDataError("variogram needs at least two sites")
    if not np.isfinite(vals).any():
        raise InsufficientDataError("all values missing; empty variogram")

    iu, ju = np.triu_indices(n, k=1)
    d = dist[iu, ju]
    if max_lag is None:
        max_lag = 0.5 * float(d.max())
    if max_lag <= 0:
        raise InsufficientDataError("all pairwise distances are zero")
    edges = np.linspace(0.0, max_lag, n_bins + 1)
    centers = 0.5 * (edges[:-1] + edges[1:])
    # pairs beyond max_lag fall into bin index n_bins and are dropped
    bin_idx = np.minimum(np.searchsorted(edges, d, side="right") - 1, n_bins)
    in_range = bin_idx < n_bins

    sq_sum = np.zeros(n_bins)
    counts = np.zeros(n_bins, dtype=np.int64)
    finite = np.isfinite(vals)
    for t in range(vals.shape[1]):
        ok = finite[iu, t] & finite[ju, t] & in_range
        if not ok.any():
            continue
        diff = vals[iu[ok], t] - vals[ju[ok], t]
        idx = bin_idx[ok]
        sq_sum += np.bincount(idx, weights=diff * diff, minlength=n_bins)
        counts += np.bincount(idx, minlength=n_bins)

    if counts.sum() == 0:
        raise InsufficientDataError("no co-observed site pairs; empty variogram")
    with np.errstate(invalid="ignore", divide="ignore"):
        gamma = np.where(counts > 0, sq_sum / (2.0 * np.maximum(counts, 1)), np.nan)
    return Variogram(bin_centers=centers, semivariances=gamma, bin_counts=counts)


@dataclass(frozen=True)
class RangeFit:
    """Weighted least-squares fit of nugget + sill*(1 - exp(-h/range))."""

    sill: float
    range_km: float
    nugget: float
    degenerate: bool = False
    message: str = ""


def exponential_semivariance(h, sill, range_km, nugget):
    """Exponential variogram model evaluated at lags ``h``."""
    return nugget + sill * (1.0 - np.exp(-np.asarray(h, dtype=float) / range_km))


def fit_range(vg: Variogram, model: str = "exponential") -> RangeFit:
    """Fit the exponential variogram model by count-weighted least squares.

    The range is bounded to [min positive lag / 10, 10 * max lag] to keep the
    optimizer away from flat-variogram divergence; sill and nugget are bounded
    below by zero.  A fit whose sill is negligible relative to the observed
    level is returned with the range pinned at its lower bound and flagged
    degenerate.
    """
    if model != "exponential":
        raise ParameterError(f"unsupported variogram model {model!r}")
    keep = vg.nonempty() & np.isfinite(vg.semivariances)
    if keep.sum() < 3:
        raise InsufficientDataError("variogram fit needs at least 3 non-empty bins")
    h = vg.bin_centers[keep]
    g = vg.semivariances[keep]
    w = np.sqrt(vg.bin_counts[keep].astype(float))

    positive = h[h > 0]
    lo_range = float(positive.min() / 10.0) if positive.size else 1e-6
    hi_range = float(10.0 * h.max())
    level = float(np.max(g))

    if level <= 0.0:
        return RangeFit(0.0, lo_range, 0.0, degenerate=True, message="constant field")

    sill0 = max(level - g[0], 0.1 * level)
    nugget0 = min(max(g[0], 0.0), level)
    reach = np.nonzero(g >= 0.95 * level)[0]
    # the model hits 95% of its sill near 3 range lengths
    range0 = float(np.clip((h[reach[0]] / 3.0) if reach.size else h[-1] / 3.0, lo_range, hi_range))

    def resid(x):
        nugget, sill, rng = x
        return w * (exponential_semivariance(h, sill, rng, nugget) - g)

    sol = least_squares(
        resid,
        x0=[nugget0, sill0, range0],
        bounds=([0.0, 0.0, lo_range], [np.inf, np.inf, hi_range]),
        xtol=1e-14,
        ftol=1e-14,
        gtol=1e-14,
    )
    nugget, sill, range_km = [float(v) for v in sol.x]

    if sill <= 1e-6 * level:
        logger.warning("variogram has no resolvable spatial structure; range pinned at lower bound")
        return RangeFit(sill, lo_range, nugget, degenerate=True, message="flat variogram")
    return RangeFit(sill, range_km, nugget)
