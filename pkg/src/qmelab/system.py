"""System Hamiltonian in its eigenbasis, jump-operator decomposition, Bohr spectrum.

Index convention: states are 0-based and sorted by energy, so index 0 is
the ground state. ``couplings[m, n]`` is the amplitude g_mn multiplying

    sigma_mn = |n><m|,     omega_mn = E_m - E_n,

so a jump with omega > 0 lowers the system energy. The bath-coupling
operator is A = sum_mn g_mn sigma_mn, i.e. ``A = couplings.T``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .const import TOL_OMEGA_REL

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class SystemSpec:
    energies: Tuple[float, ...]
    couplings: np.ndarray
    allow_diagonal: bool = False

    def __post_init__(self) -> None:
        e = tuple(float(x) for x in self.energies)
        if len(e) < 2:
            raise ValueError("system needs at least two levels")
        if any(b < a for a, b in zip(e, e[1:])):
            raise ValueError(f"energies must be sorted ascending, got {e}")
        g = np.array(self.couplings, dtype=np.complex128)
        if g.shape != (len(e), len(e)):
            raise ValueError(f"couplings must be {len(e)}x{len(e)}, got {g.shape}")
        if not self.allow_diagonal and np.any(np.diag(g) != 0):
            raise ValueError("diagonal couplings g_nn are forbidden unless allow_diagonal is set")
        g.setflags(write=False)
        object.__setattr__(self, "energies", e)
        object.__setattr__(self, "couplings", g)

    @property
    def dim(self) -> int:
        return len(self.energies)

    @property
    def hamiltonian(self) -> np.ndarray:
        return np.diag(np.array(self.energies, dtype=np.complex128))

    @property
    def coupling_operator(self) -> np.ndarray:
        return np.array(self.couplings.T)

    @property
    def norm(self) -> float:
        """Spectral norm of H_S."""
        return float(max(abs(x) for x in self.energies))

    @property
    def tol_omega(self) -> float:
        return TOL_OMEGA_REL * self.norm

    @property
    def is_real(self) -> bool:
        return not np.any(self.couplings.imag != 0)


@dataclass(frozen=True)
class JumpOperator:
    m: int
    n: int
    omega: float
    amplitude: complex
    dim: int

    @property
    def sigma(self) -> np.ndarray:
        s = np.zeros((self.dim, self.dim), dtype=np.complex128)
        s[self.n, self.m] = 1.0
        return s

    @property
    def operator(self) -> np.ndarray:
        return self.amplitude * self.sigma


@dataclass(frozen=True)
class BohrSpectrum:
    frequencies: Tuple[float, ...]
    # members[k] = indices (into the jump list) sharing frequencies[k]
    members: Tuple[Tuple[int, ...], ...]

    def index_of(self, jump_index: int) -> int:
        for k, group in enumerate(self.members):
            if jump_index in group:
                return k
        raise KeyError(jump_index)

    @property
    def multiplicity(self) -> Dict[float, int]:
        return {w: len(g) for w, g in zip(self.frequencies, self.members)}


def build_jump_basis(spec: SystemSpec) -> List[JumpOperator]:
    """One rank-one jump per nonzero g_mn, in row-major (m, n) order."""
    e = spec.energies
    jumps = [
        JumpOperator(m=m, n=n, omega=e[m] - e[n], amplitude=complex(spec.couplings[m, n]), dim=spec.dim)
        for m in range(spec.dim)
        for n in range(spec.dim)
        if spec.couplings[m, n] != 0
    ]
    log.debug("jump basis: %d operators", len(jumps))
    return jumps


def gibbs_state(spec: SystemSpec, beta: float) -> np.ndarray:
    if beta < 0:
        raise ValueError(f"beta must be >= 0, got {beta}")
    e = np.array(spec.energies)
    w = np.exp(-beta * (e - e.min()))
    return np.diag(w / w.sum()).astype(np.complex128)


def bohr_spectrum(jumps: Sequence[JumpOperator], tol_omega: Optional[float] = None) -> BohrSpectrum:
    """Deduplicate jump frequencies; a group spans at most tol_omega from its first member.

    Without an explicit tolerance it is TOL_OMEGA_REL * max|omega|, which is
    SystemSpec.tol_omega when the ground energy is zero.
    """
    if tol_omega is None:
        tol_omega = TOL_OMEGA_REL * max((abs(j.omega) for j in jumps), default=0.0)
    order = sorted(range(len(jumps)), key=lambda i: (jumps[i].omega, i))
    freqs: List[float] = []
    groups: List[List[int]] = []
    for i in order:
        w = jumps[i].omega
        if groups and w - freqs[-1] <= tol_omega:
            groups[-1].append(i)
        else:
            freqs.append(w)
            groups.append([i])
    return BohrSpectrum(tuple(freqs), tuple(tuple(sorted(g)) for g in groups))


# ── Presets ──────────────────────────────────────────────────────────────────

def three_level_system(center: float = 0.1, delta0: float = 10.0, coupling: float = 1.0) -> SystemSpec:
    """Ground state plus an excited doublet split by 1/delta0 around ``center``.

    Only ground <-> excited jumps are coupled, both with amplitude ``coupling``.
    """
    if delta0 <= 0:
        raise ValueError(f"delta0 must be > 0, got {delta0}")
    half = 0.5 / delta0
    if center - half <= 0:
        raise ValueError(f"doublet splitting 1/delta0={2 * half:g} pushes e1 below the ground state")
    g = np.zeros((3, 3), dtype=np.complex128)
    g[1, 0] = coupling
    g[2, 0] = coupling
    return SystemSpec(energies=(0.0, center - half, center + half), couplings=g)


def pure_state(amplitudes: Sequence[complex]) -> np.ndarray:
    psi = np.asarray(amplitudes, dtype=np.complex128)
    norm = np.linalg.norm(psi)
    if norm == 0:
        raise ValueError("pure state amplitudes are all zero")
    psi = psi / norm
    return np.outer(psi, np.conj(psi))


def excited_superposition_state(spec: SystemSpec) -> np.ndarray:
    """(|e1> + sqrt(3)|e2>)(h.c.)/4 on the two lowest excited levels."""
    if spec.dim < 3:
        raise ValueError("excited superposition needs at least three levels")
    amps = np.zeros(spec.dim, dtype=np.complex128)
    amps[1] = 1.0
    amps[2] = np.sqrt(3.0)
    return pure_state(amps)
