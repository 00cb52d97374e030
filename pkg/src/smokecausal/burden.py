"""County-level excess respiratory hospitalizations from the causal exposure.

The concentration-response is log-linear: excess count for age group a in
county c is r0_a * pop_ac * (exp(r_a * delta_c) - 1), with r_a = ln(RR_a)
per the configured exposure increment (default 10 ug/m3, the increment the
relative rates were reported against).  Intervals are computed by evaluating
the burden on every posterior draw of the county exposure; the exponential's
curvature makes a delta-method shortcut inaccurate.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .errors import InsufficientDataError, IoError, LoadError, ParameterError, ValidationError

logger = logging.getLogger(__name__)

# wildfire-period relative rates of respiratory hospitalization by age group
DEFAULT_RELATIVE_RATES = {
    "0-1": 1.045,
    "2-17": 1.027,
    "18-54": 1.024,
    "55-99": 1.030,
}
DEFAULT_RR_INCREMENT = 10.0  # ug/m3 the relative rates refer to


@dataclass(frozen=True)
class AgeRateTable:
    """Age groups with relative rates and baseline incidence."""

    age_groups: tuple[str, ...]
    relative_rate: np.ndarray
    baseline_rate: np.ndarray  # hospitalizations per person per period
    rr_increment: float = DEFAULT_RR_INCREMENT

    def __post_init__(self):
        rr = np.asarray(self.relative_rate, dtype=float)
        r0 = np.asarray(self.baseline_rate, dtype=float)
        if not (len(self.age_groups) == rr.size == r0.size):
            raise ValidationError("age-rate table columns must align")
        if np.any(rr <= 0):
            raise ParameterError("relative rates must be positive")
        if np.any(r0 < 0):
            raise ParameterError("baseline rates must be nonnegative")
        if self.rr_increment <= 0:
            raise ParameterError("rr_increment must be positive")
        object.__setattr__(self, "relative_rate", rr)
        object.__setattr__(self, "baseline_rate", r0)

    @property
    def slope(self) -> np.ndarray:
        """Per-unit log rate ratio r_a = ln(RR_a) / increment."""
        return np.log(self.relative_rate) / self.rr_increment

    @property
    def n_groups(self) -> int:
        return len(self.age_groups)


def load_rate_table(path, rr_table: dict | None = None, rr_increment: float = DEFAULT_RR_INCREMENT) -> AgeRateTable:
    """Read baseline_rates.csv (header ``age_group,r0``) into an AgeRateTable.

    Relative rates come from ``rr_table`` (or the built-in defaults) keyed by
    the age-group label; unknown labels are an error so misconfigured groups
    never silently get a neutral rate.
    """
    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False)
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    if list(df.columns) != ["age_group", "r0"]:
        raise LoadError(f"{path}: expected header age_group,r0")
    if len(df) == 0:
        raise LoadError(f"{path}: no age groups")
    rr_source = dict(DEFAULT_RELATIVE_RATES)
    if rr_table:
        rr_source.update({str(k): float(v) for k, v in rr_table.items()})
    groups, rr, r0 = [], [], []
    for i, row in df.iterrows():
        label = str(row["age_group"]).strip()
        if label not in rr_source:
            raise LoadError(
                f"{path} row {i + 2}: no relative rate configured for age group {label!r}"
            )
        try:
            r0.append(float(row["r0"]))
        except ValueError:
            raise LoadError(f"{path} row {i + 2}: bad r0 value {row['r0']!r}") from None
        groups.append(label)
        rr.append(rr_source[label])
    return AgeRateTable(
        age_groups=tuple(groups),
        relative_rate=np.array(rr),
        baseline_rate=np.array(r0),
        rr_increment=rr_increment,
    )


@dataclass(frozen=True)
class CountyTable:
    """County populations and age-group shares (columns aligned to a rate table)."""

    fips: np.ndarray
    population: np.ndarray
    shares: np.ndarray  # (n_counties, n_groups)

    def __post_init__(self):
        pop = np.asarray(self.population, dtype=float)
        shares = np.asarray(self.shares, dtype=float)
        if np.any(pop < 0):
            raise ValidationError("county population must be nonnegative")
        if shares.ndim != 2 or shares.shape[0] != pop.size:
            raise ValidationError("shares must be (n_counties, n_groups)")
        bad = np.abs(shares.sum(axis=1) - 1.0) > 1e-9
        if bad.any():
            raise ValidationError(
                f"county {self.fips[np.nonzero(bad)[0][0]]!r}: age shares do not sum to 1"
            )
        object.__setattr__(self, "population", pop)
        object.__setattr__(self, "shares", shares)

    @property
    def n(self) -> int:
        return self.fips.size


def load_counties(path, n_groups: int) -> CountyTable:
    """Read counties.csv (header ``fips,population,share_g1,...``)."""
    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False)
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    expected = ["fips", "population"] + [f"share_g{i + 1}" for i in range(n_groups)]
    if list(df.columns) != expected:
        raise LoadError(f"{path}: expected header {','.join(expected)}")
    if len(df) == 0:
        raise LoadError(f"{path}: no counties")
    try:
        population = df["population"].astype(float).to_numpy()
        shares = df[expected[2:]].astype(float).to_numpy()
    except ValueError as exc:
        raise LoadError(f"{path}: bad numeric value ({exc})") from exc
    return CountyTable(fips=df["fips"].to_numpy(dtype=object), population=population, shares=shares)


def county_exposure(cell_values: np.ndarray, cell_fips: np.ndarray, counties: CountyTable):
    """Equal-cell-weight average exposure per county.

    ``cell_values`` is (n_cells,) for a summary or (K, n_cells) for draws.
    Counties with no member cells are excluded with a warning; returns the
    kept county indices and the per-county values (aligned, draws keep their
    leading axis).
    """
    vals = np.asarray(cell_values, dtype=float)
    fips = np.asarray(cell_fips)
    squeeze = vals.ndim == 1
    if squeeze:
        vals = vals[None, :]
    if vals.shape[1] != fips.size:
        raise ValidationError("cell values and county keys differ in length")
    kept_idx = []
    out = []
    for i, f in enumerate(counties.fips):
        member = fips == f
        if not member.any():
            logger.warning("county %s has no grid cells; excluded from burden", f)
            continue
        kept_idx.append(i)
        out.append(vals[:, member].mean(axis=1))
    if not out:
        raise InsufficientDataError("no county matched any grid cell")
    stacked = np.column_stack(out)  # (K, n_kept)
    return np.array(kept_idx), (stacked[0] if squeeze else stacked)


def burden(delta_c: float, rates: AgeRateTable, population: float, shares) -> np.ndarray:
    """Excess hospitalizations per age group for one county exposure."""
    if not np.isfinite(delta_c):
        raise ValidationError("county exposure must be finite")
    shares = np.asarray(shares, dtype=float)
    exposed = population * shares
    return rates.baseline_rate * exposed * np.expm1(rates.slope * delta_c)


def burden_draws(delta_c_draws: np.ndarray, rates: AgeRateTable, population: float, shares) -> np.ndarray:
    """(K, n_groups) burden evaluated on every exposure draw."""
    d = np.asarray(delta_c_draws, dtype=float).ravel()
    shares = np.asarray(shares, dtype=float)
    exposed = population * shares
    return rates.baseline_rate[None, :] * exposed[None, :] * np.expm1(
        rates.slope[None, :] * d[:, None]
    )


@dataclass(frozen=True)
class BurdenInterval:
    mean: np.ndarray
    lo95: np.ndarray
    hi95: np.ndarray


def burden_ci(delta_c_draws, rates: AgeRateTable, population: float, shares, level: float = 0.95) -> BurdenInterval:
    """Posterior mean and equal-tailed interval of the per-group burden."""
    d = np.asarray(delta_c_draws, dtype=float).ravel()
    if d.size < 20:
        warnings.warn("fewer than 20 draws; interval is the min/max envelope", stacklevel=2)
        per_draw = burden_draws(d, rates, population, shares)
        return BurdenInterval(per_draw.mean(axis=0), per_draw.min(axis=0), per_draw.max(axis=0))
    per_draw = burden_draws(d, rates, population, shares)
    tail = (1.0 - level) / 2.0
    lo, hi = np.quantile(per_draw, [tail, 1.0 - tail], axis=0)
    return BurdenInterval(per_draw.mean(axis=0), lo, hi)


@dataclass(frozen=True)
class BurdenTable:
    """Per-county (and aggregate) burden with credible intervals.

    Aggregate rows are keyed ``REGION:<name>`` and ``NATIONAL``; their
    intervals are quantiles of the summed per-draw burdens so cross-county
    posterior dependence is respected.
    """

    keys: tuple[str, ...]
    age_groups: tuple[str, ...]
    mean: np.ndarray  # (n_keys, n_groups)
    lo95: np.ndarray
    hi95: np.ndarray


def burden_table(
    delta_cell_draws: np.ndarray,
    cell_fips: np.ndarray,
    counties: CountyTable,
    rates: AgeRateTable,
    county_region: dict | None = None,
    level: float = 0.95,
) -> BurdenTable:
    """Full burden table: per county, per region (optional) and national.

    delta_cell_draws is (K, n_cells) posterior draws of the cell exposure.
    """
    kept, exposures = county_exposure(delta_cell_draws, cell_fips, counties)
    n_draws = exposures.shape[0]
    tail = (1.0 - level) / 2.0

    keys: list[str] = []
    means, los, his = [], [], []
    per_county_draws = {}
    for col, idx in enumerate(kept):
        fips = str(counties.fips[idx])
        draws = burden_draws(
            exposures[:, col], rates, counties.population[idx], counties.shares[idx]
        )
        per_county_draws[fips] = draws
        keys.append(fips)
        means.append(draws.mean(axis=0))
        if n_draws >= 20:
            lo, hi = np.quantile(draws, [tail, 1.0 - tail], axis=0)
        else:
            lo, hi = draws.min(axis=0), draws.max(axis=0)
        los.append(lo)
        his.append(hi)

    def add_aggregate(key, members):
        total = sum(per_county_draws[f] for f in members)
        keys.append(key)
        means.append(total.mean(axis=0))
        if n_draws >= 20:
            lo, hi = np.quantile(total, [tail, 1.0 - tail], axis=0)
        else:
            lo, hi = total.min(axis=0), total.max(axis=0)
        los.append(lo)
        his.append(hi)

    county_keys = list(per_county_draws)
    if county_region:
        regions: dict[str, list[str]] = {}
        for f in county_keys:
            r = county_region.get(f)
            if r is not None:
                regions.setdefault(str(r), []).append(f)
        for r in sorted(regions):
            add_aggregate(f"REGION:{r}", regions[r])
    add_aggregate("NATIONAL", county_keys)

    return BurdenTable(
        keys=tuple(keys),
        age_groups=rates.age_groups,
        mean=np.vstack(means),
        lo95=np.vstack(los),
        hi95=np.vstack(his),
    )
