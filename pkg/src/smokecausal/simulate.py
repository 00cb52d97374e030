"""Synthetic data generator mirroring the hierarchical generative model.

Every draw comes from a stream keyed by (seed, purpose, index) through
``numpy.random.SeedSequence``, so per-day and per-field draws are
order-independent and region-parallel simulation reproduces bit-for-bit.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, asdict

import numpy as np

from .data import PanelDataset, smoke_indicator
from .errors import DegenerateDesignError, InsufficientDataError, ParameterError
from .spatial import CovarianceParams, SiteSet, distance_matrix, exp_correlation, jittered_cholesky


@dataclass(frozen=True)
class TrueParams:
    """Ground-truth parameters of the generative model.

    Variances may be exactly zero to produce noiseless reductions; the
    observation-covariance helpers still require sigma1_sq > 0.
    """

    mu_alpha0: float = 0.5
    mu_beta0: float = 0.9
    mu_alpha1: float = 0.2
    mu_beta1: float = 0.8
    sigma_alpha0_sq: float = 0.09
    sigma_beta0_sq: float = 0.04
    sigma_alpha1_sq: float = 0.04
    sigma_beta1_sq: float = 0.04
    phi2: float = 80.0
    sigma1_sq: float = 1.0
    sigma2_sq: float = 0.5
    gamma: float = 0.3
    phi1: float = 40.0
    sigma_sq: float = 0.25
    tau: float = 1.0

    def __post_init__(self):
        for name in (
            "sigma_alpha0_sq",
            "sigma_beta0_sq",
            "sigma_alpha1_sq",
            "sigma_beta1_sq",
            "sigma1_sq",
            "sigma2_sq",
            "sigma_sq",
        ):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0):
                raise ParameterError(f"{name} must be nonnegative, got {v!r}")
        if abs(self.gamma) > 1:
            raise ParameterError("gamma must lie in [-1, 1]")
        if self.phi1 <= 0 or self.phi2 <= 0:
            raise ParameterError("ranges phi1, phi2 must be positive")
        if not np.isfinite(self.tau):
            raise ParameterError("tau must be finite")

    def to_covariance_params(self) -> CovarianceParams:
        return CovarianceParams(
            sigma1_sq=self.sigma1_sq,
            sigma2_sq=self.sigma2_sq,
            gamma=self.gamma,
            phi1=self.phi1,
            sigma_sq=self.sigma_sq,
        )

    def to_dict(self) -> dict:
        return asdict(self)


def _stable_int(part) -> int:
    if isinstance(part, (int, np.integer)):
        return int(part) & 0xFFFFFFFF
    return zlib.crc32(str(part).encode("utf-8"))


def stream(seed: int, *key) -> np.random.Generator:
    """Independent generator keyed by (seed, *key); stable across processes."""
    entropy = [int(seed) & 0xFFFFFFFF] + [_stable_int(k) for k in key]
    return np.random.default_rng(np.random.SeedSequence(entropy))


@dataclass(frozen=True)
class BiasFields:
    alpha0: np.ndarray
    beta0: np.ndarray
    alpha1: np.ndarray
    beta1: np.ndarray

    def stack(self) -> np.ndarray:
        return np.stack([self.alpha0, self.beta0, self.alpha1, self.beta1])


def simulate_bias_fields(sites: SiteSet, params: TrueParams, rng: np.random.Generator) -> BiasFields:
    """Draw the four bias surfaces from their Gaussian-process priors.

    Each field has constant mean and covariance variance * exp(-h/phi2);
    a zero variance collapses the field to its mean exactly.
    """
    dist = distance_matrix(sites)
    corr = exp_correlation(dist, params.phi2)
    chol = jittered_cholesky(corr) if sites.n > 1 else np.ones((1, 1))

    def draw(mean, var):
        if var == 0.0:
            return np.full(sites.n, mean)
        return mean + np.sqrt(var) * (chol @ rng.standard_normal(sites.n))

    return BiasFields(
        alpha0=draw(params.mu_alpha0, params.sigma_alpha0_sq),
        beta0=draw(params.mu_beta0, params.sigma_beta0_sq),
        alpha1=draw(params.mu_alpha1, params.sigma_alpha1_sq),
        beta1=draw(params.mu_beta1, params.sigma_beta1_sq),
    )


def default_covariates(
    sites: SiteSet,
    n_days: int,
    rng: np.random.Generator,
    mean_log: float = np.log(2.0),
    sd_log: float = 0.4,
    ar: float = 0.7,
    episodes_per_100_days: float = 8.0,
    episode_peak: float = 12.0,
    episode_range_km: float = 100.0,
    episode_decay_days: float = 3.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Background and fire-contribution model fields standing in for CMAQ runs.

    theta_hat is a lognormal background AR(1)-smoothed over days; delta_hat is
    zero except at Poisson-seeded fire episodes that decay exponentially in
    space and time, which keeps the smoke indicator sparse.
    """
    n = sites.n
    x = np.empty((n, n_days))
    x[:, 0] = rng.standard_normal(n)
    innov = rng.standard_normal((n, n_days))
    for t in range(1, n_days):
        x[:, t] = ar * x[:, t - 1] + np.sqrt(1.0 - ar**2) * innov[:, t]
    theta_hat = np.exp(mean_log + sd_log * x)

    delta_hat = np.zeros((n, n_days))
    dist = distance_matrix(sites)
    n_episodes = rng.poisson(episodes_per_100_days * n_days / 100.0)
    for _ in range(n_episodes):
        center = rng.integers(n)
        start = rng.integers(n_days)
        peak = episode_peak * rng.exponential()
        days = np.arange(n_days)
        time_decay = np.where(days >= start, np.exp(-(days - start) / episode_decay_days), 0.0)
        space_decay = np.exp(-dist[:, center] / episode_range_km)
        delta_hat += peak * np.outer(space_decay, time_decay)
    return theta_hat, delta_hat


@dataclass(frozen=True)
class PanelTruth:
    """Latent fields returned next to a simulated panel for recovery tests."""

    params: TrueParams
    bias: BiasFields
    theta: np.ndarray
    delta: np.ndarray
    e0: np.ndarray
    e1: np.ndarray
    epsilon: np.ndarray


def simulate_panel(
    sites: SiteSet,
    n_days: int,
    params: TrueParams,
    covariate_generator=None,
    seed: int = 0,
    missing_rate: float = 0.0,
) -> tuple[PanelDataset, PanelTruth]:
    """Simulate a complete panel with known latents.

    The latent day fields follow theta = alpha0 + beta0*theta_hat + e0 and
    delta = alpha1 + beta1*delta_hat + e1 with (e0, e1) a bivariate spatial
    error sharing one exponential correlation in space, and the observation
    is y = theta + C*delta + eps with C the thresholded indicator.
    """
    if n_days < 1:
        raise ParameterError("n_days must be >= 1")
    if not 0.0 <= missing_rate < 1.0:
        raise ParameterError("missing_rate must be in [0, 1)")

    bias = simulate_bias_fields(sites, params, stream(seed, "bias"))
    gen = covariate_generator or default_covariates
    theta_hat, delta_hat = gen(sites, n_days, stream(seed, "covariates"))

    n = sites.n
    if n > 1:
        corr = exp_correlation(distance_matrix(sites), params.phi1)
        chol = jittered_cholesky(corr)
    else:
        chol = np.ones((1, 1))

    # linear-coregionalization factorization of the cross-covariance
    s1 = np.sqrt(params.sigma1_sq)
    if params.sigma1_sq > 0:
        rho = params.gamma * np.sqrt(params.sigma2_sq / params.sigma1_sq)
        s2 = np.sqrt(params.sigma2_sq * (1.0 - params.gamma**2))
    else:
        rho = 0.0
        s2 = np.sqrt(params.sigma2_sq)

    e0 = np.empty((n, n_days))
    e1 = np.empty((n, n_days))
    for t in range(n_days):
        rng_t = stream(seed, "errors", t)
        z1 = chol @ rng_t.standard_normal(n)
        z2 = chol @ rng_t.standard_normal(n)
        e0[:, t] = s1 * z1
        e1[:, t] = rho * e0[:, t] + s2 * z2

    theta = bias.alpha0[:, None] + bias.beta0[:, None] * theta_hat + e0
    delta = bias.alpha1[:, None] + bias.beta1[:, None] * delta_hat + e1
    c = smoke_indicator(delta_hat, params.tau)

    eps = np.empty((n, n_days))
    sig = np.sqrt(params.sigma_sq)
    for t in range(n_days):
        eps[:, t] = sig * stream(seed, "noise", t).standard_normal(n)

    y = theta + c * delta + eps
    mask = np.zeros((n, n_days), dtype=bool)
    if missing_rate > 0:
        mask = stream(seed, "missing").random((n, n_days)) < missing_rate
        y = y.copy()
        y[mask] = np.nan

    dataset = PanelDataset(
        sites=sites,
        y=y,
        theta_hat=theta_hat,
        delta_hat=delta_hat,
        c=c,
        missing_mask=mask,
    )
    truth = PanelTruth(params=params, bias=bias, theta=theta, delta=delta, e0=e0, e1=e1, epsilon=eps)
    return dataset, truth


@dataclass(frozen=True)
class OlsFit:
    """Per-site least-squares fit of y on [1, theta_hat, C, C*delta_hat]."""

    alpha0: float
    beta0: float
    alpha1: float
    beta1: float
    se: np.ndarray
    residuals: np.ndarray  # length n_days, NaN where y missing
    n_days: int

    def coefficients(self) -> np.ndarray:
        return np.array([self.alpha0, self.beta0, self.alpha1, self.beta1])


def ols_mean_recovery(data: PanelDataset, site: int) -> OlsFit:
    """Per-site OLS of y on the four mean-model covariates.

    This is the independent oracle for the sampler's bias fields: it is
    unbiased whenever the design has full rank, which is exactly the
    collinearity screen's "ok" verdict.
    """
    days = np.nonzero(~data.missing_mask[site])[0]
    if days.size < 4:
        raise InsufficientDataError(f"site {site}: fewer than 4 observed days")
    from .data import design_matrix  # local import avoids a cycle at module load

    x = design_matrix(data, site, days)
    if np.linalg.matrix_rank(x) < 4:
        raise DegenerateDesignError(
            f"site {site}: design is rank deficient (smoke indicator constant?)"
        )
    yobs = data.y[site, days]
    coef, _, _, _ = np.linalg.lstsq(x, yobs, rcond=None)
    fitted = x @ coef
    resid_obs = yobs - fitted
    dof = max(days.size - 4, 1)
    sigma2 = float(resid_obs @ resid_obs) / dof
    xtx_inv = np.linalg.inv(x.T @ x)
    se = np.sqrt(sigma2 * np.diag(xtx_inv))
    residuals = np.full(data.n_days, np.nan)
    residuals[days] = resid_obs
    return OlsFit(
        alpha0=float(coef[0]),
        beta0=float(coef[1]),
        alpha1=float(coef[2]),
        beta1=float(coef[3]),
        se=se,
        residuals=residuals,
        n_days=int(days.size),
    )
