"""qmelab command line.

Commands (all take --config PATH, --out DIR, --seed INT, --workers INT):
  qmelab check    consistency suite for the configured scheme
  qmelab evolve   thermodynamic trajectory and MGF scan
  qmelab ft       detailed work FT scan and integral entropy FT
  qmelab steady   steady state, coherences and mismatch against Gibbs
  qmelab oracle   exact random-matrix heat against each scheme
  qmelab fig2     both fluctuation-theorem and heat panels plus a gnuplot script
"""
from __future__ import annotations

import json
import logging
import os
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional

import click
import numpy as np

from . import __version__
from .config import load_config
from .const import EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_NUMERIC, ErrorCode
from .errors import ConfigError, QmelabError
from .runner import COMMANDS

LOG_ENV = "QMELAB_LOG"


def _configure_logging() -> None:
    """One stderr handler on the ``qmelab`` logger; level from QMELAB_LOG (default WARNING)."""
    name = os.environ.get(LOG_ENV, "WARNING").strip().upper()
    level = logging.getLevelName(name)
    if not isinstance(level, int):
        level = logging.WARNING
    logger = logging.getLogger("qmelab")
    for h in list(logger.handlers):
        logger.removeHandler(h)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    logger.addHandler(handler)
    logger.setLevel(level)


def _fail(errors: List[Dict[str, str]], exit_code: int) -> None:
    click.echo(json.dumps({"status": "ERROR", "errors": errors}, ensure_ascii=False, sort_keys=True))
    for err in errors:
        click.echo(f"{err['code']}: {err['message']}", err=True)
    raise SystemExit(exit_code)


def _execute(command: str, config: Path, out: Optional[Path], seed: Optional[int], workers: Optional[int]) -> None:
    _configure_logging()
    try:
        cfg = load_config(config).with_overrides(out=out, seed=seed, workers=workers)
        manifest = COMMANDS[command](cfg, base_dir=config.parent)
    except ConfigError as exc:
        _fail([exc.as_dict()], EXIT_CONFIG)
    except QmelabError as exc:
        _fail([exc.as_dict()], EXIT_NUMERIC)
    except (ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
        _fail([{"code": ErrorCode.E_NUMERIC.value, "message": str(exc)}], EXIT_NUMERIC)

    result = {
        "status": "PASS" if manifest.passed else "FAIL",
        "command": command,
        "out": str(cfg.output.directory),
        "verdicts": manifest.verdicts,
        "summary": manifest.summary,
        "merkle_root": manifest.merkle_root,
        "wall_clock_seconds": round(manifest.wall_clock, 3),
    }
    click.echo(json.dumps(result, ensure_ascii=False, sort_keys=True))
    if manifest.passed:
        return
    for name, verdict in sorted(manifest.verdicts.items()):
        if verdict == "fail":
            click.echo(f"{ErrorCode.E_CHECK_FAILED.value}: {name} residual above tolerance", err=True)
    raise SystemExit(EXIT_CHECK_FAILED)


_RUN_OPTIONS = [
    click.option("--config", "config", required=True,
                 type=click.Path(exists=True, dir_okay=False, path_type=Path),
                 help="Run configuration (JSON, see docs/CONFIG.md)."),
    click.option("--out", type=click.Path(file_okay=False, path_type=Path), default=None,
                 help="Output directory (overrides output.directory)."),
    click.option("--seed", type=int, default=None, help="Oracle seed (overrides oracle.seed)."),
    click.option("--workers", type=click.IntRange(min=1), default=None,
                 help="Worker threads for independent grid points (overrides workers)."),
]


def _run_options(func: Callable) -> Callable:
    for option in reversed(_RUN_OPTIONS):
        func = option(func)
    return func


@click.group()
@click.version_option(__version__, prog_name="qmelab")
def main() -> None:
    """Thermodynamic consistency of quantum master equations.

    Exit-code contract (frozen):

    \b
      0  every judged check passed
      1  at least one judged check failed (stderr carries one line per failure)
      2  configuration error: schema violation, unreadable config, output
         directory that is not a previous qmelab run, oracle disabled
         (click usage errors also exit 2)
      3  numeric failure: quadrature, degenerate kernel, step underflow

    The machine-readable JSON result is always printed to stdout.
    """


@main.command("check")
@_run_options
def check_cmd(config: Path, out: Optional[Path], seed: Optional[int], workers: Optional[int]) -> None:
    """GQDB, energy balance, first law, Gibbs fixed point, steady state, sinc condition."""
    _execute("check", config, out, seed, workers)


@main.command("evolve")
@_run_options
def evolve_cmd(config: Path, out: Optional[Path], seed: Optional[int], workers: Optional[int]) -> None:
    """Energy, heat, entropy and entropy production over the time grid; MGF scan."""
    _execute("evolve", config, out, seed, workers)


@main.command("ft")
@_run_options
def ft_cmd(config: Path, out: Optional[Path], seed: Optional[int], workers: Optional[int]) -> None:
    """Detailed work fluctuation theorem and integral entropy fluctuation theorem."""
    _execute("ft", config, out, seed, workers)


@main.command("steady")
@_run_options
def steady_cmd(config: Path, out: Optional[Path], seed: Optional[int], workers: Optional[int]) -> None:
    """Steady state of the untilted generator."""
    _execute("steady", config, out, seed, workers)


@main.command("oracle")
@_run_options
def oracle_cmd(config: Path, out: Optional[Path], seed: Optional[int], workers: Optional[int]) -> None:
    """Exact heat from the random-matrix bath against secular and symmetrized heat."""
    _execute("oracle", config, out, seed, workers)


@main.command("fig2")
@_run_options
def fig2_cmd(config: Path, out: Optional[Path], seed: Optional[int], workers: Optional[int]) -> None:
    """Fluctuation-theorem curves and heat curves, plus fig2.gp."""
    _execute("fig2", config, out, seed, workers)


if __name__ == "__main__":
    main()
