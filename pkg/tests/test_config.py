"""Config parsing, validation and resolution into an experiment."""
from __future__ import annotations

import copy
from pathlib import Path

import numpy as np
import pytest

from helpers import THREE_LEVEL_CONFIG, small_config, write_config
from qmelab.config import RunConfig, load_config, parse_config
from qmelab.const import DEFAULT_TOLERANCES, ErrorCode
from qmelab.errors import ConfigError
from qmelab.runner import JUDGED_CHECKS, resolve


def test_shipped_config_loads() -> None:
    cfg = load_config(THREE_LEVEL_CONFIG)
    assert cfg.scheme.name == "symmetrized"
    assert cfg.oracle.enabled and cfg.oracle.N == 300
    assert cfg.tolerances.gqdb == DEFAULT_TOLERANCES["gqdb"]
    assert len(cfg.counting.lambda_grid.values()) == 11


def test_missing_file_is_a_syntax_error(tmp_path: Path) -> None:
    with pytest.raises(ConfigError) as info:
        load_config(tmp_path / "nope.json")
    assert info.value.code == ErrorCode.E_CONFIG_SYNTAX


def test_invalid_json_is_a_syntax_error(tmp_path: Path) -> None:
    path = tmp_path / "bad.json"
    path.write_text("{ not json", encoding="utf-8")
    with pytest.raises(ConfigError) as info:
        load_config(path)
    assert info.value.code == ErrorCode.E_CONFIG_SYNTAX


def test_unknown_keys_are_rejected(tmp_path: Path) -> None:
    cfg = small_config(tmp_path)
    cfg["scheme"]["secularize"] = True
    with pytest.raises(ConfigError, match="scheme.secularize") as info:
        parse_config(cfg)
    assert info.value.code == ErrorCode.E_CONFIG_SCHEMA


@pytest.mark.parametrize(
    "patch, message",
    [
        (lambda c: c["baths"][0].update(beta=0.0), "baths.0.beta"),
        (lambda c: c["scheme"].update(name="lindblad"), "scheme.name"),
        (lambda c: c["scheme"].update(epsilon=0.1), "epsilon or epsilon_scale"),
        (lambda c: c["system"].update(energies=[0.0, 0.1]), "not both"),
        (lambda c: c.update(baths=[]), "baths"),
        (lambda c: c.update(initial_state={"kind": "pure"}), "amplitudes"),
        (lambda c: c["baths"][0]["spectral_density"].update(kind="tabulated"), "table / table_file"),
        (lambda c: c.update(workers=0), "workers"),
    ],
)
def test_schema_violations(tmp_path: Path, patch, message) -> None:
    cfg = copy.deepcopy(small_config(tmp_path))
    patch(cfg)
    with pytest.raises(ConfigError, match=message):
        parse_config(cfg)


def test_explicit_system_needs_both_parts(tmp_path: Path) -> None:
    cfg = small_config(tmp_path, system={"energies": [0.0, 0.3]})
    with pytest.raises(ConfigError, match="both energies and couplings"):
        parse_config(cfg)


def test_overrides(tmp_path: Path) -> None:
    cfg = parse_config(small_config(tmp_path / "a"))
    new = cfg.with_overrides(out=tmp_path / "b", seed=9, workers=4)
    assert new.output.directory == str(tmp_path / "b")
    assert new.oracle.seed == 9 and new.workers == 4
    assert cfg.oracle.seed == 0 and cfg.workers == 1
    assert cfg.with_overrides() == cfg
    with pytest.raises(ConfigError, match="--workers"):
        cfg.with_overrides(workers=0)


def test_config_is_frozen(tmp_path: Path) -> None:
    cfg = parse_config(small_config(tmp_path))
    with pytest.raises(Exception):
        cfg.workers = 3


# ── Resolution ───────────────────────────────────────────────────────────────

def test_resolve_three_level_preset(tmp_path: Path) -> None:
    exp = resolve(parse_config(small_config(tmp_path)))
    assert exp.system.dim == 3
    assert exp.delta0 == pytest.approx(10.78, abs=0.05)
    assert exp.epsilon == pytest.approx(2.0 / exp.delta0)
    assert exp.builder.scheme.epsilon == pytest.approx(exp.epsilon)
    # the doublet splitting is 1/delta0
    e = exp.system.energies
    assert e[2] - e[1] == pytest.approx(1.0 / exp.delta0)
    assert np.trace(exp.rho0).real == pytest.approx(1.0)


def test_resolve_explicit_system_and_pure_state(tmp_path: Path) -> None:
    cfg = small_config(
        tmp_path,
        system={"energies": [0.0, 0.3], "couplings": [[[0, 0], [0, 0]], [[1, 0], [0, 0]]]},
        scheme={"name": "secular"},
        initial_state={"kind": "pure", "amplitudes": [[1, 0], [0, 1]]},
    )
    exp = resolve(parse_config(cfg))
    assert exp.delta0 is None and exp.epsilon is None
    assert exp.system.couplings[1, 0] == 1.0
    assert exp.rho0[0, 1] == pytest.approx(-0.5j)


def test_resolve_rejects_bad_pure_state_length(tmp_path: Path) -> None:
    cfg = small_config(tmp_path, initial_state={"kind": "pure", "amplitudes": [[1, 0]]})
    with pytest.raises(ConfigError, match="amplitudes"):
        resolve(parse_config(cfg))


def test_epsilon_scale_needs_delta0(tmp_path: Path) -> None:
    cfg = small_config(
        tmp_path,
        system={"energies": [0.0, 0.3], "couplings": [[[0, 0], [0, 0]], [[1, 0], [0, 0]]]},
    )
    with pytest.raises(ConfigError, match="delta0"):
        resolve(parse_config(cfg))


def test_model_errors_become_config_errors(tmp_path: Path) -> None:
    cfg = small_config(
        tmp_path,
        system={"energies": [0.3, 0.0], "couplings": [[[0, 0], [0, 0]], [[1, 0], [0, 0]]]},
        scheme={"name": "secular"},
    )
    with pytest.raises(ConfigError, match="sorted"):
        resolve(parse_config(cfg))


def test_table_file_is_relative_to_config(tmp_path: Path) -> None:
    (tmp_path / "j.csv").write_text("0.0,0.0\n0.5,0.05\n1.0,0.0\n", encoding="utf-8")
    cfg = small_config(tmp_path / "out")
    cfg["baths"][0]["spectral_density"] = {"kind": "tabulated", "cutoff": 1.0, "table_file": "j.csv"}
    exp = resolve(parse_config(cfg), base_dir=tmp_path)
    assert exp.baths[0].density(0.25) == pytest.approx(0.025)
    with pytest.raises(ConfigError, match="spectral table"):
        resolve(parse_config(cfg), base_dir=tmp_path / "elsewhere")


def test_tolerances_follow_the_scheme(tmp_path: Path) -> None:
    exp = resolve(parse_config(small_config(tmp_path)))
    tol = exp.tolerances()
    assert tol["gqdb"] == DEFAULT_TOLERANCES["gqdb"]
    assert tol["strict_energy"] is None
    red = exp.tolerances("redfield")
    assert {k for k, v in red.items() if v is not None} == set(JUDGED_CHECKS["redfield"])


def test_written_config_round_trips(tmp_path: Path) -> None:
    path = write_config(tmp_path / "cfg.json", small_config(tmp_path / "out"))
    assert isinstance(load_config(path), RunConfig)
