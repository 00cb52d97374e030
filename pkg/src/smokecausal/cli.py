"""Command-line entry point.

Subcommands: simulate | fit | diagnose | predict | cv | burden | blocking | e2e.
Effective option precedence is CLI flag > config JSON > built-in default, and
every effective value is echoed into the output manifest.  Log level comes
from SMOKECAUSAL_LOG (error | warn | info | debug).

Exit codes: 0 success, 2 validation, 3 numerical failure, 4 I/O.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from . import pipeline
from .errors import IoError, SmokeCausalError, ValidationError
from .gibbs import ChainConfig

logger = logging.getLogger("smokecausal")

_LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}


def _setup_logging():
    level = os.environ.get("SMOKECAUSAL_LOG", "warn").lower()
    if level not in _LOG_LEVELS:
        level = "warn"
    logging.basicConfig(level=_LOG_LEVELS[level], format="%(levelname)s %(name)s: %(message)s")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="smokecausal", description=__doc__)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add_common(p, *, inputs=()):
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--config", default=None, help="JSON file with defaults for any option")
        for name in inputs:
            p.add_argument(f"--{name}", default=None)

    def add_chain(p):
        p.add_argument("--iters", type=int, default=None, help="total MCMC iterations")
        p.add_argument("--burnin", type=int, default=None)
        p.add_argument("--thin", type=int, default=None)
        p.add_argument("--tau", type=float, default=None, help="smoke threshold (ug/m3)")
        p.add_argument("--jobs", type=int, default=None, help="parallel region fits")

    p = sub.add_parser("simulate", help="write a synthetic input set")
    add_common(p)

    p = sub.add_parser("fit", help="per-region Gibbs fits with diagnostics")
    add_common(p, inputs=("sites", "panel"))
    add_chain(p)

    p = sub.add_parser("diagnose", help="recompute diagnostics from a fit directory")
    add_common(p, inputs=("sites", "panel"))
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--trace-params", default=None, help="comma-separated parameters for trace.csv")

    p = sub.add_parser("predict", help="krige fitted summaries to grid cells")
    add_common(p, inputs=("sites", "panel", "grid"))
    p.add_argument("--tau", type=float, default=None)

    p = sub.add_parser("cv", help="k-fold threshold selection")
    add_common(p, inputs=("sites", "panel"))
    add_chain(p)
    p.add_argument("--tau-grid", default=None, help="comma-separated thresholds")
    p.add_argument("--folds", type=int, default=None)

    p = sub.add_parser("burden", help="county burden from predicted surfaces")
    add_common(p, inputs=("counties", "rates"))

    p = sub.add_parser("blocking", help="joint vs separate fits of two regions")
    add_common(p, inputs=("sites", "panel", "grid"))
    add_chain(p)
    p.add_argument("--merge-regions", default=None, help="two region labels, comma-separated")

    p = sub.add_parser("e2e", help="fit, predict and burden in one pass")
    add_common(p, inputs=("sites", "panel", "grid", "counties", "rates"))
    add_chain(p)
    return parser


def _load_config(path) -> dict:
    if path is None:
        return {}
    if not os.path.exists(path):
        raise ValidationError(f"config file does not exist: {path}")
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise IoError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ValidationError(f"config {path} must hold a JSON object")
    return cfg


def _effective(args, cfg: dict, name: str, default):
    cli = getattr(args, name.replace("-", "_"), None)
    if cli is not None:
        return cli
    if name in cfg:
        return cfg[name]
    return default


def _chain_config(args, cfg: dict) -> ChainConfig:
    return ChainConfig(
        n_iter=int(_effective(args, cfg, "iters", 30000)),
        burn_in=int(_effective(args, cfg, "burnin", 5000)),
        thin=int(_effective(args, cfg, "thin", 100)),
    )


def _parse_tau_grid(raw) -> list[float]:
    if isinstance(raw, (list, tuple)):
        return [float(v) for v in raw]
    try:
        return [float(v) for v in str(raw).split(",") if str(v).strip() != ""]
    except ValueError:
        raise ValidationError(f"bad --tau-grid value {raw!r}") from None


def run(args) -> int:
    cfg = _load_config(args.config)
    seed = int(_effective(args, cfg, "seed", 0))
    out = args.out

    if args.subcommand == "simulate":
        pipeline.cmd_simulate(out, seed=seed, config=cfg)
    elif args.subcommand == "fit":
        pipeline.cmd_fit(
            _effective(args, cfg, "sites", None),
            _effective(args, cfg, "panel", None),
            out,
            tau=float(_effective(args, cfg, "tau", pipeline.DEFAULT_TAU)),
            chain_config=_chain_config(args, cfg),
            seed=seed,
            jobs=_effective(args, cfg, "jobs", None),
        )
    elif args.subcommand == "diagnose":
        raw = _effective(args, cfg, "trace-params", None)
        trace = [s.strip() for s in str(raw).split(",")] if raw else None
        pipeline.cmd_diagnose(
            _effective(args, cfg, "sites", None),
            _effective(args, cfg, "panel", None),
            out,
            tau=float(_effective(args, cfg, "tau", pipeline.DEFAULT_TAU)),
            trace_params=trace,
        )
    elif args.subcommand == "predict":
        pipeline.cmd_predict(
            _effective(args, cfg, "sites", None),
            _effective(args, cfg, "panel", None),
            _effective(args, cfg, "grid", None),
            out,
            tau=float(_effective(args, cfg, "tau", pipeline.DEFAULT_TAU)),
        )
    elif args.subcommand == "cv":
        grid_raw = _effective(args, cfg, "tau-grid", list(pipeline.DEFAULT_TAU_GRID))
        chain = None
        if any(getattr(args, k, None) is not None or k in cfg for k in ("iters", "burnin", "thin")):
            chain = ChainConfig(
                n_iter=int(_effective(args, cfg, "iters", 6000)),
                burn_in=int(_effective(args, cfg, "burnin", 1000)),
                thin=int(_effective(args, cfg, "thin", 10)),
            )
        pipeline.cmd_cv(
            _effective(args, cfg, "sites", None),
            _effective(args, cfg, "panel", None),
            out,
            tau_grid=_parse_tau_grid(grid_raw),
            folds=int(_effective(args, cfg, "folds", 5)),
            seed=seed,
            chain_config=chain,
        )
    elif args.subcommand == "burden":
        pipeline.cmd_burden(
            _effective(args, cfg, "counties", None),
            _effective(args, cfg, "rates", None),
            out,
            rr_table=cfg.get("rr_table"),
            rr_increment=cfg.get("rr_increment"),
        )
    elif args.subcommand == "blocking":
        raw = _effective(args, cfg, "merge-regions", None)
        if not raw:
            raise ValidationError("--merge-regions is required (two labels, comma-separated)")
        parts = [s.strip() for s in str(raw).split(",") if s.strip()]
        if len(parts) != 2:
            raise ValidationError("--merge-regions needs exactly two region labels")
        pipeline.cmd_blocking(
            _effective(args, cfg, "sites", None),
            _effective(args, cfg, "panel", None),
            _effective(args, cfg, "grid", None),
            out,
            regions=(parts[0], parts[1]),
            tau=float(_effective(args, cfg, "tau", pipeline.DEFAULT_TAU)),
            chain_config=_chain_config(args, cfg),
            seed=seed,
        )
    elif args.subcommand == "e2e":
        pipeline.cmd_e2e(
            _effective(args, cfg, "sites", None),
            _effective(args, cfg, "panel", None),
            _effective(args, cfg, "grid", None),
            _effective(args, cfg, "counties", None),
            _effective(args, cfg, "rates", None),
            out,
            tau=float(_effective(args, cfg, "tau", pipeline.DEFAULT_TAU)),
            chain_config=_chain_config(args, cfg),
            seed=seed,
            jobs=_effective(args, cfg, "jobs", None),
        )
    else:  # pragma: no cover - argparse enforces the choices
        raise ValidationError(f"unknown subcommand {args.subcommand!r}")
    return 0


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return run(args)
    except SmokeCausalError as exc:
        logger.error("%s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
