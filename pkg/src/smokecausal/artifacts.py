"""Deterministic artifact writers: CSV schemas, posterior archives, manifest.json.

All floats in CSVs are written with 9 significant digits and no timestamps
are embedded, so a rerun with identical inputs and seed is byte-identical.
The posterior archive (.npz) is an internal hand-off between subcommands and
is exempt from the byte-identity guarantee (zip headers carry mtimes).
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .errors import IoError, LoadError
from .gibbs import ChainConfig, PosteriorSamples


def fmt(value) -> str:
    """Render one CSV cell; floats get 9 significant digits."""
    if isinstance(value, (float, np.floating)):
        if np.isnan(value):
            return "NA"
        return f"{value:.9g}"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def write_csv(path, header: list[str], rows) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(header) + "\n")
            for row in rows:
                fh.write(",".join(fmt(v) for v in row) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
    return path


def round9(obj):
    """Recursively round floats to 9 significant digits for JSON output."""
    if isinstance(obj, (float, np.floating)):
        return float(f"{obj:.9g}")
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return [round9(v) for v in obj.tolist()]
    if isinstance(obj, dict):
        return {k: round9(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [round9(v) for v in obj]
    return obj


def write_json(path, payload) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(round9(payload), fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
    return path


def sha256_of(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_dir, subcommand: str, effective_config: dict, artifact_paths, status: str = "ok") -> Path:
    """manifest.json listing every artifact with its content hash."""
    out_dir = Path(out_dir)
    artifacts = {}
    for p in sorted(str(Path(a)) for a in artifact_paths):
        rel = os.path.relpath(p, out_dir)
        artifacts[rel] = sha256_of(p)
    payload = {
        "subcommand": subcommand,
        "status": status,
        "effective_config": effective_config,
        "artifacts": artifacts,
    }
    return write_json(out_dir / "manifest.json", payload)


# ---------------------------------------------------------------------------
# Schema-specific writers
# ---------------------------------------------------------------------------


def write_sites_csv(path, sites) -> Path:
    rows = zip(sites.site_id, sites.lon, sites.lat, sites.region)
    return write_csv(path, ["site_id", "lon", "lat", "region"], rows)


def write_panel_csv(path, data) -> Path:
    rows = []
    for i in range(data.n):
        for t in range(data.n_days):
            y = data.y[i, t]
            rows.append(
                (
                    data.sites.site_id[i],
                    t + 1,
                    "NA" if np.isnan(y) else y,
                    data.theta_hat[i, t],
                    data.delta_hat[i, t],
                )
            )
    return write_csv(path, ["site_id", "day", "y", "theta_hat", "delta_hat"], rows)


def write_grid_csv(path, grid) -> Path:
    rows = zip(grid.cell_id, grid.lon, grid.lat, grid.region, grid.county_fips)
    return write_csv(path, ["cell_id", "lon", "lat", "region", "county_fips"], rows)


def write_samples_csv(path, samples) -> Path:
    """Kept draws: scalar parameters and per-site bias fields."""
    rows = []
    for k, iteration in enumerate(samples.iterations):
        for name, chain in samples.scalar_chains():
            rows.append((int(iteration), name, "", chain[k]))
        for name, draws in samples.field_chains():
            for j, sid in enumerate(samples.site_id):
                rows.append((int(iteration), name, sid, draws[k, j]))
    return write_csv(path, ["iter", "param", "site_id", "value"], rows)


def write_latents_csv(path, samples) -> Path:
    rows = []
    n, n_days = samples.theta_mean.shape
    for i in range(n):
        for t in range(n_days):
            rows.append(
                (
                    samples.site_id[i],
                    t + 1,
                    samples.theta_mean[i, t],
                    samples.theta_sd[i, t],
                    samples.delta_mean[i, t],
                    samples.delta_sd[i, t],
                )
            )
    return write_csv(
        path,
        ["site_id", "day", "theta_mean", "theta_sd", "delta_mean", "delta_sd"],
        rows,
    )


def write_effect_csv(path, effect) -> Path:
    rows = zip(effect.site_id, effect.mean, effect.sd, effect.lo95, effect.hi95)
    return write_csv(path, ["site_id", "delta_mean", "delta_sd", "lo95", "hi95"], rows)


def write_effect_draws_csv(path, effect) -> Path:
    rows = []
    for k in range(effect.draws.shape[0]):
        for j, sid in enumerate(effect.site_id):
            rows.append((k, sid, effect.draws[k, j]))
    return write_csv(path, ["draw", "site_id", "value"], rows)


def write_ess_csv(path, entries) -> Path:
    """entries: iterable of (target, site_id, EssResult)."""
    rows = [(t, s, r.ess, r.n_draws, r.flag) for t, s, r in entries]
    return write_csv(path, ["target", "site_id", "ess", "n_draws", "flag"], rows)


def write_acf_csv(path, entries) -> Path:
    """entries: iterable of (region, site_or_pooled, lag, value)."""
    return write_csv(path, ["region", "site_id", "lag", "acf"], entries)


def write_variogram_gof_csv(path, gof, region: str = "") -> Path:
    rows = []
    for group in gof.groups:
        label = f"{group.flags[0]},{group.flags[1]}"
        if region:
            label = f"{region}:{label}"
        vg = group.empirical
        for b in range(vg.bin_centers.size):
            rows.append(
                (
                    label,
                    vg.bin_centers[b],
                    vg.semivariances[b],
                    group.fitted[b],
                    int(vg.bin_counts[b]),
                )
            )
    return write_csv(path, ["group", "bin_center_km", "empirical", "fitted", "count"], rows)


def write_covcurves_csv(path, curves, region: str = "") -> Path:
    rows = []
    for h, c00, c01, c11 in curves.rows():
        rows.append((region, h, c00, c01, c11))
    return write_csv(path, ["region", "h_km", "cov_00", "cov_01", "cov_11"], rows)


def write_trace_csv(path, samples, params: list[str]) -> Path:
    rows = []
    scalars = dict(samples.scalar_chains())
    fields = dict(samples.field_chains())
    for name in params:
        if name in scalars:
            for k, iteration in enumerate(samples.iterations):
                rows.append((int(iteration), name, "", scalars[name][k]))
        elif name in fields:
            for k, iteration in enumerate(samples.iterations):
                for j, sid in enumerate(samples.site_id):
                    rows.append((int(iteration), name, sid, fields[name][k, j]))
    return write_csv(path, ["iter", "param", "site_id", "value"], rows)


def write_surface_csv(path, surface) -> Path:
    rows = []
    for name in sorted(surface.fields):
        mean, sd = surface.fields[name]
        for i, cid in enumerate(surface.cell_id):
            rows.append((cid, name, mean[i], sd[i]))
    return write_csv(path, ["cell_id", "field", "mean", "sd"], rows)


def write_percent_csv(path, cell_id, percent, flags) -> Path:
    rows = zip(cell_id, percent, flags)
    return write_csv(path, ["cell_id", "percent", "flag"], rows)


def write_cv_csv(path, table) -> Path:
    rows = []
    for row in table.rows:
        m = row.metrics
        rows.append(
            (
                row.tau,
                "pooled" if row.fold is None else row.fold,
                m.mse,
                m.rmse,
                m.mad,
                m.sd,
                m.coverage,
            )
        )
    return write_csv(path, ["tau", "fold", "mse", "rmse", "mad", "sd", "coverage"], rows)


def write_burden_csv(path, table) -> Path:
    rows = []
    for i, key in enumerate(table.keys):
        for g, group in enumerate(table.age_groups):
            rows.append((key, group, table.mean[i, g], table.lo95[i, g], table.hi95[i, g]))
    return write_csv(path, ["fips", "age_group", "mean", "lo95", "hi95"], rows)


def write_counties_csv(path, counties) -> Path:
    n_groups = counties.shares.shape[1]
    header = ["fips", "population"] + [f"share_g{i + 1}" for i in range(n_groups)]
    rows = []
    for i in range(counties.n):
        rows.append((counties.fips[i], counties.population[i], *counties.shares[i]))
    return write_csv(path, header, rows)


def write_rates_csv(path, rates) -> Path:
    rows = zip(rates.age_groups, rates.baseline_rate)
    return write_csv(path, ["age_group", "r0"], rows)


# ---------------------------------------------------------------------------
# Posterior archive
# ---------------------------------------------------------------------------

_SAMPLE_ARRAYS = (
    "iterations",
    "alpha0",
    "beta0",
    "alpha1",
    "beta1",
    "delta_effect_draws",
    "theta_bar_draws",
    "theta_mean",
    "theta_sd",
    "delta_mean",
    "delta_sd",
) + PosteriorSamples.SCALAR_PARAMS


def samples_to_npz(path, samples: PosteriorSamples) -> Path:
    path = Path(path)
    payload = {name: getattr(samples, name) for name in _SAMPLE_ARRAYS}
    payload["site_id"] = np.asarray(samples.site_id, dtype=str)
    payload["phi"] = np.array([samples.phi1, samples.phi2])
    payload["config_json"] = np.array(json.dumps(asdict(samples.config)))
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        np.savez_compressed(path, **payload)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
    return path


def samples_from_npz(path) -> PosteriorSamples:
    try:
        with np.load(path, allow_pickle=False) as archive:
            data = {name: archive[name] for name in archive.files}
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    except Exception as exc:
        raise LoadError(f"corrupt posterior archive {path}: {exc}") from exc
    config = ChainConfig(**json.loads(str(data.pop("config_json"))))
    phi1, phi2 = data.pop("phi")
    site_id = data.pop("site_id").astype(object)
    return PosteriorSamples(
        site_id=site_id,
        phi1=float(phi1),
        phi2=float(phi2),
        config=config,
        **{name: data[name] for name in _SAMPLE_ARRAYS},
    )
