"""System model: jump basis, Bohr spectrum, Gibbs state, presets."""
from __future__ import annotations

import numpy as np
import pytest

from helpers import two_level_system
from qmelab.system import (
    SystemSpec,
    bohr_spectrum,
    build_jump_basis,
    excited_superposition_state,
    gibbs_state,
    pure_state,
    three_level_system,
)


def test_three_level_energies_and_jumps() -> None:
    spec = three_level_system(center=0.1, delta0=10.0)
    assert spec.energies == pytest.approx((0.0, 0.05, 0.15))
    jumps = build_jump_basis(spec)
    assert [(j.m, j.n) for j in jumps] == [(1, 0), (2, 0)]
    assert [j.omega for j in jumps] == pytest.approx([0.05, 0.15])
    # sigma_mn = |n><m|
    assert jumps[0].sigma[0, 1] == 1.0
    assert np.count_nonzero(jumps[0].sigma) == 1


def test_coupling_operator_is_transpose_of_couplings() -> None:
    spec = three_level_system(delta0=20.0, coupling=0.5)
    a = spec.coupling_operator
    assert a[0, 1] == 0.5 and a[0, 2] == 0.5
    assert np.allclose(a, sum(j.operator for j in build_jump_basis(spec)))


def test_norm_and_omega_tolerance() -> None:
    spec = three_level_system(center=0.1, delta0=10.0)
    assert spec.norm == pytest.approx(0.15)
    assert 0 < spec.tol_omega < 1e-6


def test_gibbs_state_is_normalized_and_ordered() -> None:
    spec = three_level_system(delta0=10.0)
    rho = gibbs_state(spec, 5.0)
    p = np.diag(rho).real
    assert p.sum() == pytest.approx(1.0)
    assert p[0] > p[1] > p[2]
    assert p[1] / p[0] == pytest.approx(np.exp(-5.0 * 0.05))
    assert np.allclose(gibbs_state(spec, 0.0), np.eye(3) / 3)


def test_bohr_spectrum_groups_within_tolerance() -> None:
    g = np.zeros((3, 3), dtype=complex)
    g[1, 0] = g[2, 0] = 1.0
    spec = SystemSpec(energies=(0.0, 0.2, 0.2 + 1e-14), couplings=g)
    jumps = build_jump_basis(spec)
    grouped = bohr_spectrum(jumps, spec.tol_omega)
    assert len(grouped.frequencies) == 1
    assert grouped.members == ((0, 1),)
    assert grouped.multiplicity == {grouped.frequencies[0]: 2}
    split = bohr_spectrum(jumps, 0.0)
    assert len(split.frequencies) == 2
    assert split.index_of(1) == 1


def test_bohr_spectrum_default_tolerance_is_relative() -> None:
    g = np.zeros((3, 3), dtype=complex)
    g[1, 0] = g[2, 0] = 1.0
    close = build_jump_basis(SystemSpec(energies=(0.0, 0.2, 0.2 + 1e-14), couplings=g))
    assert bohr_spectrum(close).members == ((0, 1),)
    apart = build_jump_basis(SystemSpec(energies=(0.0, 0.2, 0.2 + 1e-9), couplings=g))
    assert len(bohr_spectrum(apart).frequencies) == 2


@pytest.mark.parametrize(
    "energies, couplings, message",
    [
        ((0.2, 0.0), [[0, 0], [1, 0]], "sorted"),
        ((0.0,), [[0]], "two levels"),
        ((0.0, 0.2), [[1, 0], [1, 0]], "diagonal"),
        ((0.0, 0.2), [[0, 0, 0], [1, 0, 0]], "couplings must be"),
    ],
)
def test_system_validation(energies, couplings, message) -> None:
    with pytest.raises(ValueError, match=message):
        SystemSpec(energies=energies, couplings=np.array(couplings, dtype=complex))


def test_diagonal_couplings_allowed_on_request() -> None:
    spec = SystemSpec(energies=(0.0, 0.2), couplings=np.array([[0.3, 0], [1, 0]]), allow_diagonal=True)
    assert {(j.m, j.n) for j in build_jump_basis(spec)} == {(0, 0), (1, 0)}


def test_couplings_are_frozen() -> None:
    spec = two_level_system()
    with pytest.raises(ValueError):
        spec.couplings[1, 0] = 2.0


def test_excited_superposition_state() -> None:
    rho = excited_superposition_state(three_level_system(delta0=10.0))
    assert rho[1, 1].real == pytest.approx(0.25)
    assert rho[2, 2].real == pytest.approx(0.75)
    assert abs(rho[1, 2]) == pytest.approx(np.sqrt(3) / 4)
    assert rho[0, 0] == 0
    with pytest.raises(ValueError):
        excited_superposition_state(two_level_system())


def test_pure_state_normalizes() -> None:
    rho = pure_state([1.0, 1.0j])
    assert np.trace(rho).real == pytest.approx(1.0)
    assert rho[0, 1] == pytest.approx(-0.5j)
    with pytest.raises(ValueError):
        pure_state([0.0, 0.0])


def test_three_level_rejects_overlapping_doublet() -> None:
    with pytest.raises(ValueError):
        three_level_system(center=0.1, delta0=2.0)
