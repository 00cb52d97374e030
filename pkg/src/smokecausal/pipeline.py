"""Subcommand orchestration: simulate, fit, diagnose, predict, cv, burden, blocking, e2e.

Each command writes its artifacts under an output directory and a
manifest.json with content hashes.  Region fits run in a thread pool with
per-region seeds derived from (seed, region name), so results do not depend
on scheduling order.  Per-region artifacts live under ``regions/<name>/``;
site-keyed tables are additionally merged at the top level.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import artifacts as art
from .burden import AgeRateTable, CountyTable, burden_table, load_counties, load_rate_table
from .crossval import tau_selection
from .data import GridTable, PanelDataset, load_grid, load_panel, partition_regions
from .diagnostics import covariance_curves, ess, residual_acf, variogram_gof
from .errors import InsufficientDataError, ValidationError
from .gibbs import ChainConfig, estimate_ranges, ols_residual_field, run_chain
from .inference import build_surfaces, causal_effect, percent_of_total
from .simulate import TrueParams, simulate_panel, stream
from .spatial import CovarianceParams, SiteSet, distance_matrix

logger = logging.getLogger(__name__)

DEFAULT_TAU = 1.0
DEFAULT_TAU_GRID = (0.0, 0.1, 1.0, 5.0, 10.0)


def _require_inputs(**paths):
    for name, p in paths.items():
        if p is None:
            raise ValidationError(f"--{name} is required for this subcommand")
        if not Path(p).exists():
            raise ValidationError(f"input file for --{name} does not exist: {p}")


def _region_seed(seed: int, region: str) -> int:
    return int(stream(seed, "region", region).integers(2**31))


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

SIM_DEFAULTS = dict(
    n_sites=25,
    n_days=120,
    regions=("R1",),
    extent_km=300.0,
    region_gap_km=0.0,
    grid_per_side=5,
    counties_per_region=4,
    missing_rate=0.05,
    origin_lon=-120.0,
    origin_lat=40.0,
)

# synthetic stand-ins; real runs supply counties.csv / baseline_rates.csv
DEFAULT_AGE_SHARES = (0.02, 0.20, 0.50, 0.28)
DEFAULT_BASELINE_RATES = (0.005, 0.002, 0.003, 0.012)
DEFAULT_AGE_GROUPS = ("0-1", "2-17", "18-54", "55-99")


def _km_to_lon(km, lat):
    return km / (111.19 * np.cos(np.deg2rad(lat)))


def _km_to_lat(km):
    return km / 111.19


def synthetic_sites(seed: int, sim_cfg: dict) -> SiteSet:
    """Uniform random sites in one box per region, boxes offset east by the gap."""
    rng = stream(seed, "sites")
    regions = sim_cfg["regions"]
    per_region = int(np.ceil(sim_cfg["n_sites"] / len(regions)))
    lat0 = sim_cfg["origin_lat"]
    ids, lons, lats, labels = [], [], [], []
    count = 0
    for r_idx, region in enumerate(regions):
        offset_km = r_idx * (sim_cfg["extent_km"] + sim_cfg["region_gap_km"])
        for _ in range(per_region):
            if count >= sim_cfg["n_sites"]:
                break
            east = offset_km + rng.random() * sim_cfg["extent_km"]
            north = rng.random() * sim_cfg["extent_km"]
            ids.append(f"S{count:04d}")
            lons.append(sim_cfg["origin_lon"] + _km_to_lon(east, lat0))
            lats.append(lat0 + _km_to_lat(north))
            labels.append(region)
            count += 1
    return SiteSet(
        site_id=np.array(ids, dtype=object),
        lon=np.array(lons),
        lat=np.array(lats),
        region=np.array(labels, dtype=object),
    )


def synthetic_grid(sim_cfg: dict) -> GridTable:
    """Regular grid of cell centroids per region, counties as quadrants."""
    regions = sim_cfg["regions"]
    side = sim_cfg["grid_per_side"]
    lat0 = sim_cfg["origin_lat"]
    cell_ids, lons, lats, labels, fips = [], [], [], [], []
    for r_idx, region in enumerate(regions):
        offset_km = r_idx * (sim_cfg["extent_km"] + sim_cfg["region_gap_km"])
        step = sim_cfg["extent_km"] / side
        for gy in range(side):
            for gx in range(side):
                east = offset_km + (gx + 0.5) * step
                north = (gy + 0.5) * step
                quadrant = (2 * (gy >= side / 2) + (gx >= side / 2)) % sim_cfg["counties_per_region"]
                cell_ids.append(f"{region}_C{gy * side + gx:03d}")
                lons.append(sim_cfg["origin_lon"] + _km_to_lon(east, lat0))
                lats.append(lat0 + _km_to_lat(north))
                labels.append(region)
                fips.append(f"{region}F{quadrant}")
    return GridTable(
        cell_id=np.array(cell_ids, dtype=object),
        lon=np.array(lons),
        lat=np.array(lats),
        region=np.array(labels, dtype=object),
        county_fips=np.array(fips, dtype=object),
    )


def cmd_simulate(out_dir, seed: int = 0, config: dict | None = None) -> list[Path]:
    """Write a full synthetic input set: sites, panel, truth, grid, counties, rates."""
    out = Path(out_dir)
    cfg = dict(SIM_DEFAULTS)
    params_cfg = {}
    if config:
        params_cfg = dict(config.get("true_params", {}))
        cfg.update({k: v for k, v in config.items() if k in SIM_DEFAULTS})
        if "regions" in cfg:
            cfg["regions"] = tuple(cfg["regions"])
    params = TrueParams(**params_cfg)

    sites = synthetic_sites(seed, cfg)
    data, truth = simulate_panel(
        sites, cfg["n_days"], params, seed=seed, missing_rate=cfg["missing_rate"]
    )
    grid = synthetic_grid(cfg)

    counties = CountyTable(
        fips=np.unique(grid.county_fips),
        population=np.full(np.unique(grid.county_fips).size, 100_000.0),
        shares=np.tile(DEFAULT_AGE_SHARES, (np.unique(grid.county_fips).size, 1)),
    )
    rates = AgeRateTable(
        age_groups=DEFAULT_AGE_GROUPS,
        relative_rate=np.array([1.045, 1.027, 1.024, 1.030]),
        baseline_rate=np.array(DEFAULT_BASELINE_RATES),
    )

    paths = [
        art.write_sites_csv(out / "sites.csv", sites),
        art.write_panel_csv(out / "panel.csv", data),
        art.write_grid_csv(out / "grid.csv", grid),
        art.write_counties_csv(out / "counties.csv", counties),
        art.write_rates_csv(out / "baseline_rates.csv", rates),
        art.write_json(
            out / "truth.json",
            {
                "true_params": params.to_dict(),
                "seed": seed,
                "bias_fields": {
                    "site_id": list(sites.site_id),
                    "alpha0": truth.bias.alpha0,
                    "beta0": truth.bias.beta0,
                    "alpha1": truth.bias.alpha1,
                    "beta1": truth.bias.beta1,
                },
            },
        ),
    ]
    art.write_manifest(out, "simulate", {"seed": seed, **cfg, "true_params": params.to_dict()}, paths)
    return paths


# ---------------------------------------------------------------------------
# fit
# ---------------------------------------------------------------------------


def _posterior_cov_params(samples) -> CovarianceParams:
    return CovarianceParams(
        sigma1_sq=max(float(samples.sigma1_sq.mean()), 1e-12),
        sigma2_sq=max(float(samples.sigma2_sq.mean()), 0.0),
        gamma=float(np.clip(samples.gamma.mean(), -1.0, 1.0)),
        phi1=samples.phi1,
        sigma_sq=max(float(samples.sigma_sq.mean()), 0.0),
    )


def _region_diagnostics(block_data: PanelDataset, samples, effect, region: str, region_dir: Path) -> list[Path]:
    paths = []
    ess_entries = [(name, "", ess(chain)) for name, chain in samples.scalar_chains()]
    ess_entries += [
        ("causal_effect", sid, ess(effect.draws[:, j]))
        for j, sid in enumerate(samples.site_id)
    ]
    paths.append(art.write_ess_csv(region_dir / "ess.csv", ess_entries))

    acf = residual_acf(block_data)
    acf_rows = []
    for j, sid in enumerate(block_data.sites.site_id):
        for lag in acf.lags:
            val = acf.per_site[j, lag]
            if np.isfinite(val):
                acf_rows.append((region, sid, int(lag), val))
    for lag in acf.lags:
        if np.isfinite(acf.pooled[lag]):
            acf_rows.append((region, "pooled", int(lag), acf.pooled[lag]))
    paths.append(art.write_acf_csv(region_dir / "acf.csv", acf_rows))

    params = _posterior_cov_params(samples)
    residuals, _ = ols_residual_field(block_data)
    try:
        gof = variogram_gof(residuals, block_data.c, distance_matrix(block_data.sites), params)
        paths.append(art.write_variogram_gof_csv(region_dir / "variogram_gof.csv", gof, region))
    except (InsufficientDataError, ValidationError) as exc:
        logger.warning("region %s: variogram GoF skipped (%s)", region, exc)

    hmax = float(distance_matrix(block_data.sites).max())
    curves = covariance_curves(params, np.linspace(0.0, max(hmax, 1.0), 50))
    paths.append(art.write_covcurves_csv(region_dir / "covcurves.csv", curves, region))
    return paths


def _fit_one_region(block, chain_config: ChainConfig, seed: int):
    config = replace(chain_config, seed=_region_seed(seed, block.region))
    ranges = estimate_ranges(block.data)
    samples = run_chain(block.data, config, ranges=ranges)
    effect = causal_effect(samples)
    return block, samples, effect


def run_fit(
    data: PanelDataset,
    out_dir,
    chain_config: ChainConfig,
    seed: int = 0,
    jobs: int | None = None,
) -> dict:
    """Fit every region in parallel and write all fit artifacts.

    Returns {region: (samples, effect)} for downstream commands.
    """
    out = Path(out_dir)
    blocks = partition_regions(data)
    workers = jobs or len(blocks)
    results = {}
    if workers <= 1 or len(blocks) == 1:
        fitted = [_fit_one_region(b, chain_config, seed) for b in blocks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            fitted = list(pool.map(lambda b: _fit_one_region(b, chain_config, seed), blocks))

    paths = []
    for block, samples, effect in sorted(fitted, key=lambda r: r[0].region):
        region_dir = out / "regions" / block.region
        paths.append(art.write_samples_csv(region_dir / "samples.csv", samples))
        paths.append(art.write_latents_csv(region_dir / "latents.csv", samples))
        paths.append(art.write_effect_csv(region_dir / "effect.csv", effect))
        paths.append(art.write_effect_draws_csv(region_dir / "effect_draws.csv", effect))
        paths.append(art.samples_to_npz(region_dir / "posterior.npz", samples))
        paths.extend(_region_diagnostics(block.data, samples, effect, block.region, region_dir))
        results[block.region] = (samples, effect)
    return {"results": results, "paths": paths, "blocks": blocks}


def _merge_region_csvs(out: Path, results: dict, blocks) -> list[Path]:
    """Top-level site-keyed tables merged across regions in region-sorted order."""
    regions = sorted(results)
    paths = []
    effect_rows, latent_rows, ess_rows = [], [], []
    for region in regions:
        samples, effect = results[region]
        for j, sid in enumerate(effect.site_id):
            effect_rows.append((sid, effect.mean[j], effect.sd[j], effect.lo95[j], effect.hi95[j]))
        n, n_days = samples.theta_mean.shape
        for i in range(n):
            for t in range(n_days):
                latent_rows.append(
                    (
                        samples.site_id[i],
                        t + 1,
                        samples.theta_mean[i, t],
                        samples.theta_sd[i, t],
                        samples.delta_mean[i, t],
                        samples.delta_sd[i, t],
                    )
                )
        for name, chain in samples.scalar_chains():
            ess_rows.append((f"{region}/{name}", "", ess(chain)))
        for j, sid in enumerate(samples.site_id):
            ess_rows.append((f"{region}/causal_effect", sid, ess(effect.draws[:, j])))
    paths.append(
        art.write_csv(
            out / "effect.csv",
            ["site_id", "delta_mean", "delta_sd", "lo95", "hi95"],
            effect_rows,
        )
    )
    paths.append(
        art.write_csv(
            out / "latents.csv",
            ["site_id", "day", "theta_mean", "theta_sd", "delta_mean", "delta_sd"],
            latent_rows,
        )
    )
    paths.append(art.write_ess_csv(out / "ess.csv", ess_rows))
    if len(regions) == 1:
        samples, _ = results[regions[0]]
        paths.append(art.write_samples_csv(out / "samples.csv", samples))
    return paths


def cmd_fit(
    sites_path,
    panel_path,
    out_dir,
    tau: float = DEFAULT_TAU,
    chain_config: ChainConfig | None = None,
    seed: int = 0,
    jobs: int | None = None,
) -> list[Path]:
    _require_inputs(sites=sites_path, panel=panel_path)
    out = Path(out_dir)
    chain_config = chain_config or ChainConfig()
    data = load_panel(sites_path, panel_path, tau=tau)
    effective = {
        "tau": tau,
        "seed": seed,
        "jobs": jobs,
        "chain": {
            "n_iter": chain_config.n_iter,
            "burn_in": chain_config.burn_in,
            "thin": chain_config.thin,
        },
    }
    try:
        fit = run_fit(data, out, chain_config, seed=seed, jobs=jobs)
        paths = fit["paths"] + _merge_region_csvs(out, fit["results"], fit["blocks"])
    except Exception as exc:
        existing = [p for p in out.rglob("*") if p.is_file() and p.name != "manifest.json"]
        art.write_manifest(out, "fit", effective, existing, status=f"failed: {exc}")
        raise
    art.write_manifest(out, "fit", effective, paths)
    return paths


# ---------------------------------------------------------------------------
# diagnose / predict / burden / cv / blocking / e2e
# ---------------------------------------------------------------------------


def _load_region_samples(out: Path) -> dict:
    regions_dir = out / "regions"
    if not regions_dir.is_dir():
        raise ValidationError(f"no fit artifacts under {out}; run fit first")
    loaded = {}
    for region_dir in sorted(regions_dir.iterdir()):
        npz = region_dir / "posterior.npz"
        if npz.exists():
            loaded[region_dir.name] = art.samples_from_npz(npz)
    if not loaded:
        raise ValidationError(f"no posterior archives under {regions_dir}")
    return loaded


def cmd_diagnose(sites_path, panel_path, out_dir, tau: float = DEFAULT_TAU, trace_params=None) -> list[Path]:
    """Recompute diagnostics from stored posteriors and write trace exports."""
    _require_inputs(sites=sites_path, panel=panel_path)
    out = Path(out_dir)
    data = load_panel(sites_path, panel_path, tau=tau)
    samples_by_region = _load_region_samples(out)
    blocks = {b.region: b for b in partition_regions(data)}

    paths = []
    ess_rows = []
    for region, samples in samples_by_region.items():
        if region not in blocks:
            raise ValidationError(f"fitted region {region!r} not present in the panel")
        effect = causal_effect(samples)
        region_dir = out / "regions" / region
        paths.extend(_region_diagnostics(blocks[region].data, samples, effect, region, region_dir))
        for name, chain in samples.scalar_chains():
            ess_rows.append((f"{region}/{name}", "", ess(chain)))
        for j, sid in enumerate(samples.site_id):
            ess_rows.append((f"{region}/causal_effect", sid, ess(effect.draws[:, j])))
        if trace_params:
            paths.append(
                art.write_trace_csv(region_dir / "trace.csv", samples, list(trace_params))
            )
    paths.append(art.write_ess_csv(out / "ess.csv", ess_rows))
    art.write_manifest(out, "diagnose", {"tau": tau, "trace_params": list(trace_params or [])}, paths)
    return paths


def run_predict(samples_by_region: dict, data: PanelDataset, grid: GridTable, out: Path) -> dict:
    """Krige per-region posterior summaries to that region's grid cells."""
    blocks = {b.region: b for b in partition_regions(data)}
    cells_order = []
    surf_mean: dict[str, list] = {}
    surf_sd: dict[str, list] = {}
    draw_blocks = []
    fips_order = []
    region_order = []
    for region, samples in sorted(samples_by_region.items()):
        if region not in blocks:
            logger.warning("region %s has a fit but no sites in the panel; skipped", region)
            continue
        cell_idx = np.nonzero(grid.region == region)[0]
        if cell_idx.size == 0:
            logger.warning("region %s has no grid cells; skipped", region)
            continue
        sub_grid = grid.subset(cell_idx)
        effect = causal_effect(samples)
        surface = build_surfaces(samples, effect, blocks[region].data.sites, sub_grid)
        cells_order.append(sub_grid.cell_id)
        fips_order.append(sub_grid.county_fips)
        region_order.append(sub_grid.region)
        for name, (mean, sd) in surface.fields.items():
            surf_mean.setdefault(name, []).append(mean)
            surf_sd.setdefault(name, []).append(sd)
        draw_blocks.append(surface.delta_draws)

    if not cells_order:
        raise InsufficientDataError("no grid cells matched any fitted region")
    n_draws = {d.shape[0] for d in draw_blocks}
    if len(n_draws) != 1:
        raise ValidationError("regions carry different numbers of kept draws; refit with one schedule")

    cell_id = np.concatenate(cells_order)
    merged = {
        name: (np.concatenate(surf_mean[name]), np.concatenate(surf_sd[name]))
        for name in surf_mean
    }
    delta_draws = np.hstack(draw_blocks)
    fips = np.concatenate(fips_order)
    regions = np.concatenate(region_order)
    return {
        "cell_id": cell_id,
        "fields": merged,
        "delta_draws": delta_draws,
        "county_fips": fips,
        "region": regions,
    }


def cmd_predict(sites_path, panel_path, grid_path, out_dir, tau: float = DEFAULT_TAU) -> list[Path]:
    _require_inputs(sites=sites_path, panel=panel_path, grid=grid_path)
    out = Path(out_dir)
    data = load_panel(sites_path, panel_path, tau=tau)
    grid = load_grid(grid_path)
    samples_by_region = _load_region_samples(out)
    pred = run_predict(samples_by_region, data, grid, out)

    class _Surface:
        cell_id = pred["cell_id"]
        fields = pred["fields"]

    paths = [art.write_surface_csv(out / "surface.csv", _Surface)]
    pct, flags = percent_of_total(pred["fields"]["delta"][0], pred["fields"]["theta_bar"][0])
    paths.append(art.write_percent_csv(out / "percent.csv", pred["cell_id"], pct, flags))
    np.savez_compressed(
        out / "cell_draws.npz",
        cell_id=pred["cell_id"].astype(str),
        county_fips=pred["county_fips"].astype(str),
        region=pred["region"].astype(str),
        delta_draws=pred["delta_draws"],
    )
    paths.append(out / "cell_draws.npz")
    art.write_manifest(out, "predict", {"tau": tau}, paths)
    return paths


def cmd_burden(counties_path, rates_path, out_dir, rr_table=None, rr_increment=None) -> list[Path]:
    _require_inputs(counties=counties_path, rates=rates_path)
    out = Path(out_dir)
    cell_npz = out / "cell_draws.npz"
    if not cell_npz.exists():
        raise ValidationError(f"no predicted cell draws at {cell_npz}; run predict first")
    rates = load_rate_table(
        rates_path, rr_table=rr_table, rr_increment=rr_increment or 10.0
    )
    counties = load_counties(counties_path, rates.n_groups)
    with np.load(cell_npz, allow_pickle=False) as archive:
        cell_fips = archive["county_fips"].astype(object)
        cell_region = archive["region"].astype(object)
        delta_draws = archive["delta_draws"]

    county_region = {}
    for f in np.unique(cell_fips):
        member_regions = cell_region[cell_fips == f]
        county_region[str(f)] = str(member_regions[0])

    table = burden_table(delta_draws, cell_fips, counties, rates, county_region=county_region)
    paths = [art.write_burden_csv(out / "burden.csv", table)]
    art.write_manifest(
        out,
        "burden",
        {"rr_increment": rates.rr_increment, "age_groups": list(rates.age_groups)},
        paths,
    )
    return paths


def cmd_cv(
    sites_path,
    panel_path,
    out_dir,
    tau_grid=DEFAULT_TAU_GRID,
    folds: int = 5,
    seed: int = 0,
    chain_config: ChainConfig | None = None,
) -> list[Path]:
    _require_inputs(sites=sites_path, panel=panel_path)
    out = Path(out_dir)
    data = load_panel(sites_path, panel_path, tau=DEFAULT_TAU)
    table = tau_selection(data, tau_grid, k=folds, seed=seed, chain_config=chain_config)
    paths = [art.write_cv_csv(out / "cv.csv", table)]
    art.write_manifest(
        out,
        "cv",
        {
            "tau_grid": [float(t) for t in tau_grid],
            "folds": folds,
            "seed": seed,
            "recommended_tau": table.recommended_tau,
        },
        paths,
    )
    return paths


def cmd_blocking(
    sites_path,
    panel_path,
    grid_path,
    out_dir,
    regions: tuple[str, str],
    tau: float = DEFAULT_TAU,
    chain_config: ChainConfig | None = None,
    seed: int = 0,
) -> list[Path]:
    """Joint vs separate fits of two regions, compared on the kriged effect surface."""
    _require_inputs(sites=sites_path, panel=panel_path, grid=grid_path)
    region_a, region_b = regions
    if region_a == region_b:
        raise ValidationError("blocking comparison needs two distinct regions")
    out = Path(out_dir)
    chain_config = chain_config or ChainConfig()
    data = load_panel(sites_path, panel_path, tau=tau)
    grid = load_grid(grid_path)
    available = set(data.sites.region_labels())
    for r in (region_a, region_b):
        if r not in available:
            raise ValidationError(f"region {r!r} not present in the panel")

    pair_idx = np.nonzero(np.isin(data.sites.region, [region_a, region_b]))[0]
    pair_data = data.subset_sites(pair_idx)
    cell_idx = np.nonzero(np.isin(grid.region, [region_a, region_b]))[0]
    pair_grid = grid.subset(cell_idx)

    # joint fit: one chain across both regions
    joint_config = replace(chain_config, seed=_region_seed(seed, f"{region_a}+{region_b}"))
    joint_samples = run_chain(pair_data, joint_config, ranges=estimate_ranges(pair_data))
    joint_effect = causal_effect(joint_samples)
    joint_surface = build_surfaces(joint_samples, joint_effect, pair_data.sites, pair_grid)
    joint_mean = joint_surface.fields["delta"][0]

    # separate fits: per-region chains kriged to their own cells
    separate = np.full(pair_grid.n, np.nan)
    fit = run_fit(pair_data, out / "separate", chain_config, seed=seed, jobs=2)
    for region in (region_a, region_b):
        samples, effect = fit["results"][region]
        block = [b for b in fit["blocks"] if b.region == region][0]
        own_cells = np.nonzero(pair_grid.region == region)[0]
        surface = build_surfaces(samples, effect, block.data.sites, pair_grid.subset(own_cells))
        separate[own_cells] = surface.fields["delta"][0]

    diff = joint_mean - separate
    corr = float(np.corrcoef(joint_mean, separate)[0, 1])
    rows = [
        (pair_grid.cell_id[i], joint_mean[i], separate[i], diff[i])
        for i in range(pair_grid.n)
    ]
    paths = [
        art.write_csv(
            out / "blocking.csv",
            ["cell_id", "delta_joint", "delta_separate", "diff"],
            rows,
        ),
        art.write_csv(
            out / "blocking_summary.csv",
            ["metric", "value"],
            [("max_abs_diff", float(np.max(np.abs(diff)))), ("correlation", corr)],
        ),
    ]
    paths.extend(fit["paths"])
    art.write_manifest(
        out, "blocking", {"regions": [region_a, region_b], "tau": tau, "seed": seed}, paths
    )
    return paths


def cmd_e2e(
    sites_path,
    panel_path,
    grid_path,
    counties_path,
    rates_path,
    out_dir,
    tau: float = DEFAULT_TAU,
    chain_config: ChainConfig | None = None,
    seed: int = 0,
    jobs: int | None = None,
) -> list[Path]:
    """fit -> predict -> burden in one pass."""
    _require_inputs(
        sites=sites_path,
        panel=panel_path,
        grid=grid_path,
        counties=counties_path,
        rates=rates_path,
    )
    out = Path(out_dir)
    paths = cmd_fit(sites_path, panel_path, out, tau=tau, chain_config=chain_config, seed=seed, jobs=jobs)
    paths += cmd_predict(sites_path, panel_path, grid_path, out, tau=tau)
    paths += cmd_burden(counties_path, rates_path, out)
    art.write_manifest(out, "e2e", {"tau": tau, "seed": seed}, paths)
    return paths
