"""Tilted generators: structure, counting-field transforms and time reversal."""
from __future__ import annotations

import numpy as np
import pytest

from helpers import BETA, ohmic_bath, two_level_system
from qmelab.bath import CorrelationTransforms
from qmelab.generators import (
    GeneratorBuilder,
    Scheme,
    add_system_counting,
    build_coarse_grained,
    build_redfield,
    build_secular,
    build_symmetrized,
    coarse_grained_table,
    default_epsilon,
    reversed_generator,
    symmetrized_table,
)
from qmelab.generators import _signed_root
from qmelab.operators import (
    apply_superop,
    commutator_superop,
    hermiticity_preservation_residual,
    trace_preservation_residual,
    vectorize,
)
from qmelab.system import SystemSpec, gibbs_state, three_level_system


def _norm(m: np.ndarray) -> float:
    return float(np.linalg.norm(m))


def test_untilted_generators_preserve_trace_and_hermiticity(any_builder) -> None:
    m = any_builder(0.0, None).matrix
    assert trace_preservation_residual(m) < 1e-12 * _norm(m)
    assert hermiticity_preservation_residual(m) < 1e-12 * _norm(m)


def test_tilted_generator_does_not_preserve_trace(secular) -> None:
    assert trace_preservation_residual(secular(0.0, 1.0).matrix) > 1e-6


def test_scheme_validation() -> None:
    with pytest.raises(ValueError, match="unknown scheme"):
        Scheme("lindblad")
    with pytest.raises(ValueError, match="epsilon"):
        Scheme("symmetrized", epsilon=0.0)
    with pytest.raises(ValueError, match="delta0"):
        Scheme("coarse_grained", delta0=-1.0)


def test_builder_requires_delta0_for_coarse_graining(system, bath) -> None:
    with pytest.raises(ValueError, match="delta0"):
        GeneratorBuilder(Scheme("coarse_grained"), system, (bath,))
    with pytest.raises(ValueError, match="at least one bath"):
        GeneratorBuilder(Scheme("secular"), system, ())


def test_builder_matches_free_functions(system, bath, delta0) -> None:
    lam = -1.3
    eps = 2.0 / delta0
    pairs = [
        (Scheme("redfield"), build_redfield(system, (bath,), lam)),
        (Scheme("secular"), build_secular(system, (bath,), lam)),
        (Scheme("symmetrized", epsilon=eps), build_symmetrized(system, (bath,), lam, eps)),
        (Scheme("coarse_grained", delta0=delta0), build_coarse_grained(system, (bath,), 0.0, lam, delta0)),
    ]
    for scheme, direct in pairs:
        via_builder = GeneratorBuilder(scheme, system, (bath,))(0.0, lam)
        assert np.allclose(via_builder.matrix, direct.matrix, atol=1e-15)
        assert via_builder.lambda_B == (lam,)


def test_lambda_vector_length_is_checked(secular) -> None:
    with pytest.raises(ValueError, match="bath counting fields"):
        secular(0.0, [0.1, 0.2])


def test_secular_drops_cross_frequency_terms(secular, redfield) -> None:
    coh = np.zeros((3, 3), dtype=complex)
    coh[1, 2] = 1.0
    probe = vectorize(coh)
    # populations feed the excited coherence only through cross-frequency terms
    for pop in ([0.0, 1.0, 0.0], [1.0, 0.0, 0.0]):
        src = vectorize(np.diag(pop).astype(complex))
        assert probe @ secular(0.0, None).matrix @ src == 0.0
        assert abs(probe @ redfield(0.0, None).matrix @ src) > 0.0


def test_secular_gibbs_is_fixed_point(secular, system) -> None:
    m = secular(0.0, None).matrix
    assert _norm(m @ vectorize(gibbs_state(system, BETA))) < 1e-12 * _norm(m)


def test_symmetrized_table_structure(system, bath, delta0) -> None:
    t = CorrelationTransforms(bath)
    wide = symmetrized_table(system, t, 0.0, 2.0 / delta0)
    narrow = symmetrized_table(system, t, 0.0, 0.5 / delta0)
    # the doublet splitting is 1/delta0: only the wide threshold couples both jumps
    assert wide.k_plus[0, 1] != 0 and narrow.k_plus[0, 1] == 0
    assert np.allclose(wide.k_plus, wide.k_plus.T)
    # K = 2 sqrt(R_p R_q) is rank one and positive semidefinite for a coupled pair
    assert np.linalg.eigvalsh(wide.k_plus.real).min() > -1e-15
    assert np.allclose(wide.lamb, wide.lamb.conj().T)
    assert np.count_nonzero(wide.lamb - np.diag(np.diag(wide.lamb))) == 0


def test_symmetrized_lamb_root_carries_the_shared_sign() -> None:
    assert _signed_root(-4.0, -1.0) == pytest.approx(-2.0)
    assert _signed_root(4.0, 1.0) == pytest.approx(2.0)
    assert _signed_root(0.0, 3.0) == 0.0
    # opposite signs: the larger magnitude wins
    assert _signed_root(-9.0, 1.0) == pytest.approx(-3.0)


def test_coarse_grained_uses_midpoint_rates(system, bath, delta0) -> None:
    t = CorrelationTransforms(bath)
    table = coarse_grained_table(system, t, 0.4, delta0)
    w1, w2 = (j.omega for j in table.jumps)
    mid = 0.5 * (w1 + w2)
    assert table.k_plus[0, 1] == pytest.approx(2.0 * t.rate_real(1, mid, 0.4), rel=1e-14)
    assert table.k_minus[1, 1] == pytest.approx(2.0 * t.rate_real(-1, w2, 0.4), rel=1e-14)


def test_default_epsilon_is_positive(system, bath) -> None:
    eps = default_epsilon(system, [CorrelationTransforms(bath)])
    assert eps > 0
    single = default_epsilon(two_level_system(), [CorrelationTransforms(bath)])
    assert single == pytest.approx(two_level_system().norm)


def test_builder_defaults_symmetrized_epsilon(system, bath) -> None:
    b = GeneratorBuilder(Scheme("symmetrized"), system, (bath,))
    assert b.scheme.epsilon == pytest.approx(default_epsilon(system, b.transforms))


# ── Counting-field transforms ────────────────────────────────────────────────

def test_system_counting_is_a_similarity(symmetrized, system) -> None:
    g = symmetrized(0.0, 0.5)
    tilted = add_system_counting(g, 1.2)
    s = np.diag(np.exp(0.6 * np.array(system.energies))).astype(complex)
    s_inv = np.linalg.inv(s)
    x = np.arange(9).reshape(3, 3) + 1j
    expected = s @ apply_superop(g.matrix, s_inv @ x @ s_inv) @ s
    assert np.allclose(apply_superop(tilted.matrix, x), expected, atol=1e-14)
    assert tilted.lambda_S == pytest.approx(1.2)
    assert np.array_equal(tilted.bath_matrix, g.bath_matrix)
    again = add_system_counting(tilted, -1.2)
    assert np.allclose(again.matrix, g.matrix, atol=1e-15)


def test_coarse_grained_builder_applies_system_field(coarse_grained) -> None:
    g = coarse_grained(0.7, -0.3)
    assert g.lambda_S == pytest.approx(0.7)
    assert np.allclose(g.matrix, add_system_counting(coarse_grained(0.0, -0.3), 0.7).matrix, atol=1e-15)


def test_reversed_generator_conjugates(secular) -> None:
    g = secular(0.0, 0.3)
    r = reversed_generator(g)
    assert r.reversed and not g.reversed
    assert np.array_equal(r.matrix, np.conj(g.matrix))
    assert np.array_equal(reversed_generator(r).matrix, g.matrix)


def test_reversal_needs_real_couplings() -> None:
    g = np.zeros((2, 2), dtype=complex)
    g[1, 0] = 1j
    spec = SystemSpec(energies=(0.0, 0.3), couplings=g)
    gen = build_secular(spec, (ohmic_bath(),))
    with pytest.raises(ValueError, match="real coupling"):
        reversed_generator(gen)


def test_two_baths_have_independent_fields() -> None:
    spec = three_level_system(delta0=10.0)
    hot, cold = ohmic_bath(beta=1.0), ohmic_bath(beta=5.0)
    b = GeneratorBuilder(Scheme("secular"), spec, (hot, cold))
    g = b(0.0, [0.4, 0.0])
    only_hot = build_secular(spec, (hot,), 0.4).matrix + build_secular(spec, (cold,), 0.0).matrix
    # both single-bath generators carry the Hamiltonian part
    assert np.allclose(g.matrix, only_hot - commutator_superop(spec.hamiltonian), atol=1e-14)
