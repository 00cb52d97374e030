"""Panel dataset container, smoke indicator, region blocking and file ingestion.

File schemas (all UTF-8 CSV, floats written with 9 significant digits):

* ``sites.csv``  -- ``site_id,lon,lat,region``
* ``panel.csv``  -- ``site_id,day,y,theta_hat,delta_hat`` where ``y`` may be
  the literal ``NA`` and ``day`` is an integer >= 1
* ``grid.csv``   -- ``cell_id,lon,lat,region,county_fips``
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .errors import IoError, LoadError, ValidationError
from .spatial import SiteSet

logger = logging.getLogger(__name__)

SITES_COLUMNS = ["site_id", "lon", "lat", "region"]
PANEL_COLUMNS = ["site_id", "day", "y", "theta_hat", "delta_hat"]
GRID_COLUMNS = ["cell_id", "lon", "lat", "region", "county_fips"]


@dataclass
class PanelDataset:
    """Per-site, per-day observations next to the paired model runs.

    y
        Observed PM2.5 (n, T), NaN at missing cells.
    theta_hat
        No-fire model PM2.5 (n, T), complete.
    delta_hat
        Fire-minus-no-fire model PM2.5 (n, T), complete.
    c
        Binary smoke indicator (n, T).
    missing_mask
        True exactly where y is missing.
    """

    sites: SiteSet
    y: np.ndarray
    theta_hat: np.ndarray
    delta_hat: np.ndarray
    c: np.ndarray
    missing_mask: np.ndarray

    def __post_init__(self):
        n = self.sites.n
        self.y = np.asarray(self.y, dtype=float)
        self.theta_hat = np.asarray(self.theta_hat, dtype=float)
        self.delta_hat = np.asarray(self.delta_hat, dtype=float)
        self.c = np.asarray(self.c)
        self.missing_mask = np.asarray(self.missing_mask, dtype=bool)
        shape = self.y.shape
        if len(shape) != 2 or shape[0] != n or shape[1] < 1:
            raise ValidationError(f"y must be (n_sites, n_days); got {shape}")
        for name in ("theta_hat", "delta_hat", "c", "missing_mask"):
            if getattr(self, name).shape != shape:
                raise ValidationError(f"{name} shape {getattr(self, name).shape} != y shape {shape}")
        if not np.isfinite(self.theta_hat).all():
            raise ValidationError("theta_hat must be complete and finite")
        if not np.isfinite(self.delta_hat).all():
            raise ValidationError("delta_hat must be complete and finite")
        if not np.isin(self.c, (0, 1)).all():
            raise ValidationError("smoke indicator entries must be 0 or 1")
        self.c = self.c.astype(np.int8)
        if not np.array_equal(np.isnan(self.y), self.missing_mask):
            raise ValidationError("missing_mask must mark exactly the NaN cells of y")
        if np.any(self.delta_hat < 0):
            logger.info(
                "delta_hat has %d negative cells (model differencing); "
                "they are clamped to 0 by the smoke indicator",
                int((self.delta_hat < 0).sum()),
            )

    @property
    def n(self) -> int:
        return self.sites.n

    @property
    def n_days(self) -> int:
        return self.y.shape[1]

    def subset_sites(self, indices) -> "PanelDataset":
        idx = np.asarray(indices)
        return PanelDataset(
            sites=self.sites.subset(idx),
            y=self.y[idx],
            theta_hat=self.theta_hat[idx],
            delta_hat=self.delta_hat[idx],
            c=self.c[idx],
            missing_mask=self.missing_mask[idx],
        )

    def with_indicator(self, tau: float) -> "PanelDataset":
        """Copy of the dataset with the smoke indicator rebuilt at threshold tau."""
        return PanelDataset(
            sites=self.sites,
            y=self.y,
            theta_hat=self.theta_hat,
            delta_hat=self.delta_hat,
            c=smoke_indicator(self.delta_hat, tau),
            missing_mask=self.missing_mask,
        )


@dataclass
class RegionBlock:
    """One region's slice of a panel, with indices back into the parent."""

    region: str
    data: PanelDataset
    site_indices: np.ndarray


def smoke_indicator(delta_hat: np.ndarray, tau: float) -> np.ndarray:
    """Binary smoke indicator 1(delta_hat > tau), strict inequality.

    Negative delta_hat values (possible when differencing two model runs) are
    clamped to zero before thresholding; the clamp count is logged.
    """
    if not np.isfinite(tau):
        raise ValidationError("tau must be finite")
    d = np.asarray(delta_hat, dtype=float)
    n_neg = int((d < 0).sum())
    if n_neg:
        logger.info("smoke_indicator: clamped %d negative delta_hat values to 0", n_neg)
    return (np.maximum(d, 0.0) > tau).astype(np.int8)


def partition_regions(data: PanelDataset) -> list[RegionBlock]:
    """Split the panel into disjoint per-region blocks covering every site."""
    labels = data.sites.region
    for i, r in enumerate(labels):
        if r is None or (isinstance(r, float) and np.isnan(r)) or str(r).strip() == "":
            raise ValidationError(f"site {data.sites.site_id[i]!r} has no region label")
    blocks = []
    for region in data.sites.region_labels():
        idx = np.nonzero(labels == region)[0]
        blocks.append(RegionBlock(region=str(region), data=data.subset_sites(idx), site_indices=idx))
    return blocks


@dataclass(frozen=True)
class ScreenReport:
    """Identifiability screen for one site's mean-model design."""

    status: str  # "ok" | "degenerate" | "insufficient"
    condition_number: float
    n_days: int


def design_matrix(data: PanelDataset, site: int, days=None) -> np.ndarray:
    """T x 4 per-site design [1, theta_hat, C, C*delta_hat] on the given days."""
    if days is None:
        days = slice(None)
    th = data.theta_hat[site, days]
    dh = data.delta_hat[site, days]
    c = data.c[site, days].astype(float)
    return np.column_stack([np.ones_like(th), th, c, c * dh])


def collinearity_screen(data: PanelDataset, site: int) -> ScreenReport:
    """Flag sites whose four mean-model covariates are linearly dependent.

    A site where the smoke indicator never varies (all 0 or all 1 with
    proportional delta_hat) cannot identify its own fire-bias coefficients.
    Sites with fewer than 4 observed days are flagged insufficient rather
    than erroring.
    """
    days = np.nonzero(~data.missing_mask[site])[0]
    if days.size < 4:
        return ScreenReport(status="insufficient", condition_number=np.inf, n_days=int(days.size))
    x = design_matrix(data, site, days)
    rank = np.linalg.matrix_rank(x)
    cond = float(np.linalg.cond(x))
    status = "ok" if rank == 4 else "degenerate"
    return ScreenReport(status=status, condition_number=cond, n_days=int(days.size))


# ---------------------------------------------------------------------------
# File ingestion
# ---------------------------------------------------------------------------


def _read_csv(path, columns: list[str]) -> pd.DataFrame:
    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False)
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    except Exception as exc:
        raise LoadError(f"cannot parse {path}: {exc}") from exc
    if list(df.columns) != columns:
        raise LoadError(f"{path}: expected header {','.join(columns)}, got {','.join(df.columns)}")
    return df


def _to_float(df: pd.DataFrame, col: str, path, allow_na: bool = False) -> np.ndarray:
    raw = df[col].to_numpy()
    out = np.empty(raw.shape, dtype=float)
    for i, v in enumerate(raw):
        s = str(v).strip()
        if allow_na and s == "NA":
            out[i] = np.nan
            continue
        try:
            out[i] = float(s)
        except ValueError:
            raise LoadError(f"{path} row {i + 2}: bad {col} value {v!r}") from None
    return out


def load_sites(path) -> SiteSet:
    """Read sites.csv into a SiteSet."""
    df = _read_csv(path, SITES_COLUMNS)
    if len(df) == 0:
        raise LoadError(f"{path}: no sites")
    ids = df["site_id"].to_numpy(dtype=object)
    dup = df["site_id"].duplicated()
    if dup.any():
        row = int(np.nonzero(dup.to_numpy())[0][0]) + 2
        raise LoadError(f"{path} row {row}: duplicate site_id {ids[row - 2]!r}")
    return SiteSet(
        site_id=ids,
        lon=_to_float(df, "lon", path),
        lat=_to_float(df, "lat", path),
        region=df["region"].to_numpy(dtype=object),
    )


def load_panel(sites_path, panel_path, tau: float | None = None) -> PanelDataset:
    """Read sites.csv + panel.csv into a validated PanelDataset.

    Cells whose (site, day) row is absent get masked-missing y; their model
    columns are filled from the nearest day at the same site (model output is
    required to be gapless, so absent rows should be rare and are logged).
    When ``tau`` is given the smoke indicator is built from delta_hat,
    otherwise it defaults to threshold 1.0.
    """
    sites = load_sites(sites_path)
    df = _read_csv(panel_path, PANEL_COLUMNS)
    if len(df) == 0:
        raise LoadError(f"{panel_path}: no rows")

    id_index = {sid: i for i, sid in enumerate(sites.site_id)}
    site_idx = np.empty(len(df), dtype=int)
    for i, sid in enumerate(df["site_id"].to_numpy()):
        j = id_index.get(sid)
        if j is None:
            raise LoadError(f"{panel_path} row {i + 2}: unknown site_id {sid!r}")
        site_idx[i] = j

    day_raw = df["day"].to_numpy()
    days = np.empty(len(df), dtype=int)
    for i, v in enumerate(day_raw):
        try:
            d = int(str(v).strip())
        except ValueError:
            raise LoadError(f"{panel_path} row {i + 2}: bad day value {v!r}") from None
        if d < 1:
            raise LoadError(f"{panel_path} row {i + 2}: day must be >= 1, got {d}")
        days[i] = d

    key = site_idx.astype(np.int64) * (days.max() + 1) + days
    order = np.argsort(key, kind="stable")
    dup_pos = np.nonzero(np.diff(key[order]) == 0)[0]
    if dup_pos.size:
        row = int(order[dup_pos[0] + 1]) + 2
        raise LoadError(
            f"{panel_path} row {row}: duplicate key "
            f"({df['site_id'].iloc[row - 2]!r}, day {days[row - 2]})"
        )

    y_vals = _to_float(df, "y", panel_path, allow_na=True)
    th_vals = _to_float(df, "theta_hat", panel_path)
    dh_vals = _to_float(df, "delta_hat", panel_path)
    for name, vals in (("theta_hat", th_vals), ("delta_hat", dh_vals)):
        bad = ~np.isfinite(vals)
        if bad.any():
            row = int(np.nonzero(bad)[0][0]) + 2
            raise LoadError(f"{panel_path} row {row}: non-finite {name}")
    bad_y = np.isinf(y_vals)
    if bad_y.any():
        row = int(np.nonzero(bad_y)[0][0]) + 2
        raise LoadError(f"{panel_path} row {row}: non-finite y")

    n, t_max = sites.n, int(days.max())
    y = np.full((n, t_max), np.nan)
    theta_hat = np.full((n, t_max), np.nan)
    delta_hat = np.full((n, t_max), np.nan)
    y[site_idx, days - 1] = y_vals
    theta_hat[site_idx, days - 1] = th_vals
    delta_hat[site_idx, days - 1] = dh_vals

    absent = ~np.isfinite(theta_hat)
    if absent.any():
        logger.info(
            "%s: %d (site, day) rows absent; y masked, model columns filled from nearest day",
            panel_path,
            int(absent.sum()),
        )
        for mat in (theta_hat, delta_hat):
            frame = pd.DataFrame(mat.T)
            frame = frame.ffill(axis=0).bfill(axis=0)
            mat[:] = frame.to_numpy().T
        if not np.isfinite(theta_hat).all():
            empty = int(np.nonzero(~np.isfinite(theta_hat).all(axis=1))[0][0])
            raise LoadError(f"{panel_path}: site {sites.site_id[empty]!r} has no rows at all")

    tau_eff = 1.0 if tau is None else float(tau)
    return PanelDataset(
        sites=sites,
        y=y,
        theta_hat=theta_hat,
        delta_hat=delta_hat,
        c=smoke_indicator(delta_hat, tau_eff),
        missing_mask=np.isnan(y),
    )


@dataclass(frozen=True)
class GridTable:
    """Prediction targets: grid-cell centroids with region and county keys."""

    cell_id: np.ndarray
    lon: np.ndarray
    lat: np.ndarray
    region: np.ndarray
    county_fips: np.ndarray

    @property
    def n(self) -> int:
        return self.cell_id.size

    def subset(self, indices) -> "GridTable":
        idx = np.asarray(indices)
        return GridTable(
            cell_id=self.cell_id[idx],
            lon=self.lon[idx],
            lat=self.lat[idx],
            region=self.region[idx],
            county_fips=self.county_fips[idx],
        )


def load_grid(path) -> GridTable:
    """Read grid.csv into a GridTable."""
    df = _read_csv(path, GRID_COLUMNS)
    if len(df) == 0:
        raise LoadError(f"{path}: no grid cells")
    dup = df["cell_id"].duplicated()
    if dup.any():
        row = int(np.nonzero(dup.to_numpy())[0][0]) + 2
        raise LoadError(f"{path} row {row}: duplicate cell_id")
    return GridTable(
        cell_id=df["cell_id"].to_numpy(dtype=object),
        lon=_to_float(df, "lon", path),
        lat=_to_float(df, "lat", path),
        region=df["region"].to_numpy(dtype=object),
        county_fips=df["county_fips"].to_numpy(dtype=object),
    )
