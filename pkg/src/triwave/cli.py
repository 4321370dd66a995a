"""Command-line interface: scatter | ensemble | reconstruct | simulate | validate | plot.

Every subcommand that writes artifacts also writes a manifest echoing the
exact configuration and convention flags.  Exit codes: 0 on success, 1 on a
validation or computation failure, 2 on usage or configuration errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .ensemble import compose_ensemble, packet_zs_data
from .gridio import (
    ConfigError,
    ExperimentConfig,
    ensemble_from_json,
    ensemble_to_json,
    model_to_dict,
    packet_to_dict,
    parse_config,
    read_field_grid,
    render_heatmap,
    write_field_grid,
)
from .reconstruct import grid_solve
from . import simulate as sim
from .validate import run_validation

_USAGE_ERROR = 2
_FAILURE = 1


def _load_config(args: argparse.Namespace) -> ExperimentConfig:
    text = Path(args.config).read_text()
    cfg = parse_config(text)
    run = cfg.run
    if args.out is not None:
        run = replace(run, output_dir=args.out)
    if args.threads is not None:
        run = replace(run, threads=args.threads)
    if args.precision is not None:
        run = replace(run, precision=args.precision)
    return ExperimentConfig(cfg.model, cfg.packets, cfg.grid, run, cfg.raw)


def _outdir(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.run.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _config_echo(cfg: ExperimentConfig) -> dict:
    return {
        "model": model_to_dict(cfg.model),
        "packets": [packet_to_dict(p) for p in cfg.packets],
        "run": {
            "cfl": cfg.run.cfl,
            "threads": cfg.run.threads,
            "precision": cfg.run.precision,
            "correction_mode": cfg.run.correction_mode,
            "norming_convention": cfg.run.norming_convention,
            "coupling_scheme": cfg.run.coupling_scheme,
            "transport": cfg.run.transport,
        },
    }


def _cmd_scatter(cfg: ExperimentConfig, args: argparse.Namespace) -> int:
    out = _outdir(cfg)
    records = []
    for i, p in enumerate(cfg.packets):
        data = packet_zs_data(p, cfg.model, cfg.run.norming_convention)
        records.append(
            {
                "packet_index": i,
                "packet": packet_to_dict(p),
                "epsilon_effective": data.epsilon,
                "taus": list(map(float, data.taus)),
                "norming": [[c.real, c.imag] for c in np.asarray(data.norming)],
                "norming_convention": data.norming_convention,
                "excluded_boundary_indices": list(data.excluded_boundary_indices),
            }
        )
    doc = {
        "format": "triwave-scatter",
        "version": 1,
        "tool": f"triwave {__version__}",
        "config": _config_echo(cfg),
        "spectra": records,
    }
    target = out / "scatter.json"
    target.write_text(json.dumps(doc, indent=2, sort_keys=True))
    print(f"wrote {target}")
    return 0


def _build_ensemble(cfg: ExperimentConfig):
    spectra = [packet_zs_data(p, cfg.model, cfg.run.norming_convention) for p in cfg.packets]
    return compose_ensemble(cfg.packets, cfg.model, spectra, cfg.run.correction_mode)


def _cmd_ensemble(cfg: ExperimentConfig, args: argparse.Namespace) -> int:
    out = _outdir(cfg)
    ensemble = _build_ensemble(cfg)
    target = out / "ensemble.json"
    target.write_text(ensemble_to_json(ensemble))
    print(f"wrote {target} ({len(ensemble)} poles)")
    return 0


def _cmd_reconstruct(cfg: ExperimentConfig, args: argparse.Namespace) -> int:
    if cfg.grid is None:
        print("error: reconstruct requires a 'grid' section", file=sys.stderr)
        return _USAGE_ERROR
    out = _outdir(cfg)
    if args.ensemble is not None:
        ensemble = ensemble_from_json(Path(args.ensemble).read_text())
    else:
        ensemble = _build_ensemble(cfg)
    grid = grid_solve(ensemble, cfg.grid, threads=cfg.run.threads,
                      precision=cfg.run.precision)
    manifest = write_field_grid(
        grid,
        out / "reconstruct.json",
        config_echo=_config_echo(cfg),
        extra_conventions={
            "norming_convention": ensemble.norming_convention,
            "correction_mode": ensemble.correction_mode,
        },
    )
    print(f"wrote {manifest.path}")
    return 0


def _cmd_simulate(cfg: ExperimentConfig, args: argparse.Namespace) -> int:
    if cfg.grid is None:
        print("error: simulate requires a 'grid' section", file=sys.stderr)
        return _USAGE_ERROR
    out = _outdir(cfg)
    state = sim.initialize(
        cfg.packets, cfg.model, cfg.grid.x_min, cfg.grid.x_max, cfg.grid.nx,
        t_max=cfg.grid.t_max,
    )
    snaps = sim.run(
        state, cfg.grid.t_max, cfl=cfg.run.cfl,
        snapshot_times=cfg.grid.ts,
        coupling=cfg.run.coupling_scheme,
        transport=cfg.run.transport,
    )
    grid = sim.to_field_grid(snaps)
    manifest = write_field_grid(grid, out / "simulate.json", config_echo=_config_echo(cfg))
    print(f"wrote {manifest.path}")
    return 0


def _cmd_plot(cfg: ExperimentConfig, args: argparse.Namespace) -> int:
    out = _outdir(cfg)
    source = Path(args.grid) if args.grid else out / "reconstruct.json"
    if not source.exists():
        print(f"error: no grid manifest at {source}", file=sys.stderr)
        return _USAGE_ERROR
    grid = read_field_grid(source)
    for channel in cfg.run.heatmap_channels:
        target = render_heatmap(grid, channel, out / f"{source.stem}.{channel}.png")
        print(f"wrote {target}")
    return 0


def _cmd_validate(cfg: ExperimentConfig, args: argparse.Namespace) -> int:
    failures = run_validation()
    if failures:
        print(f"{failures} validation check(s) failed", file=sys.stderr)
        return _FAILURE
    print("all validation checks passed")
    return 0


_COMMANDS = {
    "scatter": _cmd_scatter,
    "ensemble": _cmd_ensemble,
    "reconstruct": _cmd_reconstruct,
    "simulate": _cmd_simulate,
    "validate": _cmd_validate,
    "plot": _cmd_plot,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="triwave",
        description="Semiclassical soliton ensembles for the three-wave "
                    "resonant interaction equations",
    )
    parser.add_argument("--version", action="version", version=f"triwave {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("scatter", "per-packet discrete scattering data"),
        ("ensemble", "compose the reflectionless ensemble data"),
        ("reconstruct", "evaluate the ensemble on the configured grid"),
        ("simulate", "run the forward solver on the configured grid"),
        ("validate", "run the oracle-equivalence and conservation suites"),
        ("plot", "render heatmaps from a stored grid"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", required=True, help="path to a JSON experiment config")
        p.add_argument("--out", default=None, help="output directory (overrides config)")
        p.add_argument("--threads", type=int, default=None, help="worker threads")
        p.add_argument("--precision", choices=("double", "extended"), default=None)
        if name == "reconstruct":
            p.add_argument("--ensemble", default=None,
                           help="reuse a stored ensemble.json instead of recomposing")
        if name == "plot":
            p.add_argument("--grid", default=None, help="grid manifest to render")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _load_config(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return _USAGE_ERROR
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return _USAGE_ERROR
    try:
        return _COMMANDS[args.command](cfg, args)
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _FAILURE


if __name__ == "__main__":
    sys.exit(main())
