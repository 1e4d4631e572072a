"""Shared helpers for the qmelab test suite.

Pure functions and path constants only; fixtures live in conftest.py.
"""
from __future__ import annotations

import copy
import json
from pathlib import Path
from typing import Any, Dict

import numpy as np

from qmelab.bath import BathSpec, SpectralDensity, relaxation_delta0
from qmelab.system import SystemSpec, three_level_system

TESTS_DIR = Path(__file__).resolve().parent
REPO_ROOT = TESTS_DIR.parent
CONFIGS_DIR = REPO_ROOT / "configs"
THREE_LEVEL_CONFIG = CONFIGS_DIR / "three_level.json"

# Three-level model with an ohmic bath: doublet centred at 0.1, beta = 5.
CENTER = 0.1
GAMMA = 0.2
BETA = 5.0
ETA = 0.125
OMEGA_C = 0.25
CUTOFF = 1.0


def ohmic_bath(beta: float = BETA, gamma: float = GAMMA) -> BathSpec:
    density = SpectralDensity(kind="ohmic_exp_cutoff", eta=ETA, cutoff=CUTOFF, omega_c=OMEGA_C)
    return BathSpec(beta=beta, density=density, gamma=gamma)


def model_delta0(bath: BathSpec) -> float:
    return relaxation_delta0([bath], CENTER)


def doublet_system(delta0: float) -> SystemSpec:
    return three_level_system(CENTER, delta0, 1.0)


def two_level_system(omega: float = 0.3, g: float = 1.0) -> SystemSpec:
    couplings = np.zeros((2, 2), dtype=np.complex128)
    couplings[1, 0] = g
    return SystemSpec(energies=(0.0, omega), couplings=couplings)


def small_config(out_dir: Path, **overrides: Any) -> Dict[str, Any]:
    """A fast single-bath three-level config writing into ``out_dir``."""
    cfg: Dict[str, Any] = {
        "system": {"three_level": {"center": CENTER, "coupling": 1.0}},
        "baths": [{
            "beta": BETA,
            "gamma": GAMMA,
            "spectral_density": {"kind": "ohmic_exp_cutoff", "eta": ETA, "omega_c": OMEGA_C, "cutoff": CUTOFF},
        }],
        "scheme": {"name": "symmetrized", "epsilon_scale": 2.0},
        "counting": {
            "lambda_grid": {"start": -5.0, "stop": 5.0, "points": 5},
            "chi_grid": {"start": -2.0, "stop": 2.0, "points": 5},
            "ft_lambda_grid": {"start": -5.0, "stop": 0.0, "points": 5},
        },
        "times": {"start": 0.0, "stop": 40.0, "points": 5},
        "ft_time": 10.0,
        "output": {"directory": str(out_dir), "formats": ["csv"]},
    }
    for key, value in overrides.items():
        cfg[key] = value
    return cfg


def write_config(path: Path, cfg: Dict[str, Any]) -> Path:
    path.write_text(json.dumps(cfg, indent=2), encoding="utf-8")
    return path


def with_oracle(cfg: Dict[str, Any], n: int = 40) -> Dict[str, Any]:
    out = copy.deepcopy(cfg)
    out["oracle"] = {"enabled": True, "N": n, "seed": 3, "times": {"start": 0.0, "stop": 20.0, "points": 3}}
    return out
