"""qmelab suite fixtures.

Path constants and pure helpers live in tests/helpers.py; this module
only wires them into pytest fixtures. Builders are session-scoped so the
principal-value cache is shared across tests.
"""
from __future__ import annotations

import sys
from pathlib import Path

import pytest

_TESTS_DIR = Path(__file__).resolve().parent
_SRC = _TESTS_DIR.parent / "src"
for _p in (str(_SRC), str(_TESTS_DIR)):
    if _p not in sys.path:
        sys.path.insert(0, _p)

from helpers import doublet_system, model_delta0, ohmic_bath  # noqa: E402

from qmelab.bath import BathSpec  # noqa: E402
from qmelab.generators import GeneratorBuilder, Scheme  # noqa: E402
from qmelab.system import SystemSpec  # noqa: E402


@pytest.fixture(scope="session")
def bath() -> BathSpec:
    return ohmic_bath()


@pytest.fixture(scope="session")
def delta0(bath: BathSpec) -> float:
    return model_delta0(bath)


@pytest.fixture(scope="session")
def system(delta0: float) -> SystemSpec:
    return doublet_system(delta0)


def _builder(variant: str, system: SystemSpec, bath: BathSpec, delta0: float) -> GeneratorBuilder:
    scheme = Scheme(
        variant,
        epsilon=2.0 / delta0 if variant == "symmetrized" else None,
        delta0=delta0 if variant == "coarse_grained" else None,
    )
    return GeneratorBuilder(scheme, system, (bath,))


@pytest.fixture(scope="session")
def secular(system: SystemSpec, bath: BathSpec, delta0: float) -> GeneratorBuilder:
    return _builder("secular", system, bath, delta0)


@pytest.fixture(scope="session")
def symmetrized(system: SystemSpec, bath: BathSpec, delta0: float) -> GeneratorBuilder:
    return _builder("symmetrized", system, bath, delta0)


@pytest.fixture(scope="session")
def redfield(system: SystemSpec, bath: BathSpec, delta0: float) -> GeneratorBuilder:
    return _builder("redfield", system, bath, delta0)


@pytest.fixture(scope="session")
def coarse_grained(system: SystemSpec, bath: BathSpec, delta0: float) -> GeneratorBuilder:
    return _builder("coarse_grained", system, bath, delta0)


@pytest.fixture(scope="session", params=["redfield", "secular", "symmetrized", "coarse_grained"])
def any_builder(request, system: SystemSpec, bath: BathSpec, delta0: float) -> GeneratorBuilder:
    return _builder(request.param, system, bath, delta0)
