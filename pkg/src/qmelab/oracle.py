"""Exact two-point-measurement dynamics of the system coupled to a random-matrix bath.

The bath is N levels with equally spaced energies on [-1/2, 1/2] and a
coupling matrix drawn from the Gaussian orthogonal ensemble:

    H = H_S x 1 + 1 x H_B + gamma (A + A^+) x R,     R = X / (4 sqrt(N))

The system is the slow tensor factor. One full ``eigh`` of H per model
gives U(t) for every time. The initial state is rho_S x Gibbs(H_B); only
the bath energy is counted, so projecting onto the bath eigenbasis is a
no-op and system coherences are kept.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Sequence, Tuple

import numpy as np
import scipy.linalg as la
from scipy.integrate import trapezoid

from .bath import BathSpec, SpectralDensity
from .consistency import richardson_derivative
from .errors import DimensionError, NumericError
from .operators import CompositeSpace, as_operator, dagger, identity, partial_trace
from .system import SystemSpec

log = logging.getLogger(__name__)

DEFAULT_DIM_CAP = 4096


def sample_goe(n: int, seed: int) -> np.ndarray:
    """Real symmetric X with density ~ exp(-Tr X^2 / 4): var 2 on the diagonal, 1 off it."""
    if n < 2:
        raise ValueError(f"GOE needs N >= 2, got {n}")
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, n))
    return (a + a.T) / math.sqrt(2.0)


@dataclass(frozen=True, eq=False)
class ExactModel:
    system: SystemSpec
    N: int
    gamma: float
    beta_B: float
    seed: int = 0
    dim_cap: int = DEFAULT_DIM_CAP

    def __post_init__(self) -> None:
        if self.N < 2:
            raise ValueError(f"bath needs N >= 2 levels, got {self.N}")
        if not self.beta_B > 0:
            raise ValueError(f"beta_B must be > 0, got {self.beta_B}")
        if self.system.dim * self.N > self.dim_cap:
            raise DimensionError(
                f"composite dimension {self.system.dim}x{self.N}={self.system.dim * self.N} exceeds cap {self.dim_cap}"
            )

    @cached_property
    def bath_energies(self) -> np.ndarray:
        b = np.linspace(-0.5, 0.5, self.N)
        b.setflags(write=False)
        return b

    @cached_property
    def R(self) -> np.ndarray:
        r = sample_goe(self.N, self.seed) / (4.0 * math.sqrt(self.N))
        r.setflags(write=False)
        return r

    @cached_property
    def bath_populations(self) -> np.ndarray:
        x = -self.beta_B * (self.bath_energies - self.bath_energies.min())
        p = np.exp(x)
        return p / p.sum()

    @property
    def space(self) -> CompositeSpace:
        return CompositeSpace((self.system.dim, self.N))

    @cached_property
    def spectrum(self) -> Tuple[np.ndarray, np.ndarray]:
        h = build_total(self)
        log.info("oracle: diagonalizing %dx%d total Hamiltonian (seed %d)", h.shape[0], h.shape[0], self.seed)
        try:
            return la.eigh(h)
        except la.LinAlgError as exc:
            raise NumericError(f"eigendecomposition of the total Hamiltonian failed: {exc}") from exc

    def unitary(self, t: float) -> np.ndarray:
        w, v = self.spectrum
        return (v * np.exp(-1j * w * t)) @ dagger(v)


def build_total(model: ExactModel) -> np.ndarray:
    d, n = model.system.dim, model.N
    if d * n > model.dim_cap:
        raise DimensionError(f"composite dimension {d * n} exceeds cap {model.dim_cap}")
    a = model.system.coupling_operator
    h = np.kron(model.system.hamiltonian, identity(n))
    h = h + np.kron(identity(d), np.diag(model.bath_energies).astype(np.complex128))
    h = h + model.gamma * np.kron(a + dagger(a), model.R)
    return h


# ── Transfer matrix and TPM statistics ───────────────────────────────────────

def transfer_matrix(model: ExactModel, rho_S0: np.ndarray, t: float) -> np.ndarray:
    """T[k, l] = probability that the bath ends in level k having started in l."""
    d, n = model.system.dim, model.N
    u = model.unitary(t).reshape(d, n, d, n)
    m1 = np.einsum("skal,ab->skbl", u, as_operator(rho_S0))
    return np.einsum("skbl,skbl->kl", m1, u.conj()).real


def _mgf_from_transfer(model: ExactModel, tm: np.ndarray, lambda_B: float) -> float:
    b = model.bath_energies
    phase = np.exp(lambda_B * (b[:, None] - b[None, :]))
    return float(np.sum(phase * tm * model.bath_populations[None, :]))


def exact_mgf(model: ExactModel, rho_S0: np.ndarray, t: float, lambda_B: float) -> complex:
    """G(t, lam) = sum_kl exp(lam (b_k - b_l)) p_l T_kl."""
    return complex(_mgf_from_transfer(model, transfer_matrix(model, rho_S0, t), lambda_B))


def _heat_routes(model: ExactModel, tm: np.ndarray, h: float) -> Tuple[float, float]:
    p, b = model.bath_populations, model.bath_energies
    from_mgf = float(richardson_derivative(lambda x: _mgf_from_transfer(model, tm, -x), h))
    direct = float(p @ b - b @ tm @ p)
    return from_mgf, direct


def exact_heat(model: ExactModel, rho_S0: np.ndarray, t: float, h: float = 1e-5) -> Tuple[float, float]:
    """Energy that left the bath by time t: (from the MGF, from Tr[H_B (rho(0) - rho(t))])."""
    return _heat_routes(model, transfer_matrix(model, rho_S0, t), h)


@dataclass(frozen=True, eq=False)
class TPMResult:
    times: np.ndarray
    lambdas: np.ndarray
    mgf: np.ndarray  # shape (times, lambdas)
    heat: np.ndarray
    heat_direct: np.ndarray


def exact_series(model: ExactModel, rho_S0: np.ndarray, times: Sequence[float],
                 lambdas: Sequence[float] = (), h: float = 1e-5) -> TPMResult:
    times = np.asarray(times, dtype=float)
    lambdas = np.asarray(lambdas, dtype=float)
    g = np.zeros((len(times), len(lambdas)))
    q = np.zeros(len(times))
    qd = np.zeros(len(times))
    for i, t in enumerate(times):
        tm = transfer_matrix(model, rho_S0, t)
        g[i] = [_mgf_from_transfer(model, tm, lam) for lam in lambdas]
        q[i], qd[i] = _heat_routes(model, tm, h)
    return TPMResult(times, lambdas, g, q, qd)


def exact_state(model: ExactModel, rho_S0: np.ndarray, t: float) -> np.ndarray:
    rho0 = np.kron(as_operator(rho_S0), np.diag(model.bath_populations).astype(np.complex128))
    u = model.unitary(t)
    return u @ rho0 @ dagger(u)


def exact_reduced_state(model: ExactModel, rho_S0: np.ndarray, t: float) -> np.ndarray:
    return partial_trace(exact_state(model, rho_S0, t), model.space, 1)


# ── Calibration against the master equations ─────────────────────────────────

def calibrate_spectral_density(model: ExactModel, omegas: Optional[Sequence[float]] = None, *,
                               kernel_width: float = 0.02, points: int = 129) -> SpectralDensity:
    """Tabulated J with pi gamma^2 J (n + 1) equal to the smoothed golden-rule emission rate.

    C_+(w) = sum_kl p_l R_kl^2 K(b_k - b_l - w), K a unit Gaussian of the
    given width, and J = C_+ / (n_B + 1).
    """
    if not kernel_width > 0:
        raise ValueError(f"kernel_width must be > 0, got {kernel_width}")
    b, p = model.bath_energies, model.bath_populations
    cutoff = float(b[-1] - b[0])
    w = np.linspace(0.0, cutoff, points) if omegas is None else np.asarray(omegas, dtype=float)
    gaps = (b[:, None] - b[None, :]).ravel()
    weights = ((model.R**2) * p[None, :]).ravel()
    table = np.zeros((len(w), 2))
    table[:, 0] = w
    norm = 1.0 / (math.sqrt(2.0 * math.pi) * kernel_width)
    for i, x in enumerate(w):
        if x <= 0:
            continue
        c_plus = norm * np.sum(weights * np.exp(-0.5 * ((gaps - x) / kernel_width) ** 2))
        table[i, 1] = c_plus * -math.expm1(-model.beta_B * x)
    log.info("calibrated J on %d points (kernel width %g, peak %.4g)", len(w), kernel_width, table[:, 1].max())
    return SpectralDensity(kind="tabulated", cutoff=cutoff, table=table)


def calibrated_bath(model: ExactModel, **kwargs) -> BathSpec:
    return BathSpec(beta=model.beta_B, density=calibrate_spectral_density(model, **kwargs), gamma=model.gamma)


def integrated_deviation(times: Sequence[float], q_scheme: Sequence[float], q_exact: Sequence[float]) -> float:
    """int |Q_scheme(t) - Q_exact(t)| dt by the trapezoid rule."""
    t = np.asarray(times, dtype=float)
    if len(t) < 2:
        return 0.0
    return float(trapezoid(np.abs(np.asarray(q_scheme) - np.asarray(q_exact)), t))
