"""Full counting statistics: tilted propagation, MGFs, heat and entropy production.

Propagation exponentiates the d^2 x d^2 generator directly; no ODE
stepping. The system counting field enters only at the trajectory
boundaries:

    rho_lam(t) = S [ exp(t L_{0, lam_B}) (S^-1 rho0 S^-1) ] S,   S = exp(lam_S H_S / 2)

which equals exp(t L_{lam_S, lam_B}) rho0 but never multiplies by the
large similarity weights inside the exponential.

Heat Q_a is the energy that leaves bath a; it is read off the MGF at
lambda_a = -lambda as a Richardson-refined central difference.
"""
from __future__ import annotations

import cmath
import logging
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg as la
from scipy.special import entr

from .const import DEFAULT_LAMBDA_POINTS, DEFAULT_TOLERANCES
from .consistency import CheckReport, Mapper, fd_step, make_report, richardson_derivative
from .errors import NumericError
from .generators import Builder, TiltedGenerator, reversed_generator
from .operators import as_operator, devectorize, hermitian_power, matrix_exp, matrix_log, vectorize
from .system import SystemSpec, gibbs_state

log = logging.getLogger(__name__)

# Smallest eigenvalue (relative) of a state fed to a negative matrix power.
FULL_RANK_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class TiltedState:
    time: float
    lambda_S: float
    lambda_B: Tuple[float, ...]
    rho: np.ndarray

    @property
    def trace(self) -> complex:
        return complex(np.trace(self.rho))


@dataclass(frozen=True)
class MGFSample:
    time: float
    lambda_S: float
    lambda_B: Tuple[float, ...]
    value: complex


@dataclass(frozen=True, eq=False)
class ThermoTrajectory:
    times: np.ndarray
    energy: np.ndarray
    heat: Tuple[np.ndarray, ...]  # one series per bath, energy leaving that bath
    entropy: np.ndarray
    sigma: np.ndarray
    relative_entropy: Optional[np.ndarray] = None  # D(rho(t) || Gibbs), single bath only

    def __post_init__(self) -> None:
        for a in (self.times, self.energy, self.entropy, self.sigma, self.relative_entropy, *self.heat):
            if a is not None:
                a.setflags(write=False)


@dataclass(frozen=True, eq=False)
class FTCurve:
    """log G(t, lam) against log G^R(t, -lam - beta) over a lambda grid."""

    time: float
    lambdas: np.ndarray
    log_forward: np.ndarray
    log_reversed: np.ndarray

    @property
    def deviation(self) -> np.ndarray:
        return np.abs(self.log_reversed - self.log_forward)


# ── Propagation ──────────────────────────────────────────────────────────────

def _boundary(g: TiltedGenerator) -> np.ndarray:
    s = np.exp(0.5 * g.lambda_S * np.array(g.system.energies))
    return np.outer(s, s)


def propagate(g: TiltedGenerator, rho0: np.ndarray, t: float) -> TiltedState:
    if t < 0:
        raise ValueError(f"propagation time must be >= 0, got {t}")
    rho0 = as_operator(rho0)
    weights = _boundary(g)
    v = matrix_exp(g.bath_matrix, float(t)) @ vectorize(rho0 / weights)
    return TiltedState(float(t), g.lambda_S, g.lambda_B, devectorize(v) * weights)


def mgf(g: TiltedGenerator, rho0: np.ndarray, t: float) -> MGFSample:
    """G(t, lam) = Tr rho_lam(t) at the counting fields carried by ``g``."""
    state = propagate(g, rho0, t)
    return MGFSample(state.time, g.lambda_S, g.lambda_B, state.trace)


def mgf_scan(builder: Builder, rho0: np.ndarray, times: Sequence[float],
             fields: Sequence[Tuple[float, Sequence[float]]], *, mapper: Mapper = map) -> List[MGFSample]:
    """G over the product times x fields; ``fields`` are (lambda_S, lambda_B) pairs."""
    gens = [builder(ls, lb) for ls, lb in fields]
    jobs = [(t, g) for t in times for g in gens]
    return list(mapper(lambda job: mgf(job[1], rho0, job[0]), jobs))


def _safe_log(value: complex, what: str) -> complex:
    if value == 0 or not cmath.isfinite(value):
        raise NumericError(f"log of {what} = {value!r}")
    return cmath.log(value)


# ── Heat and energy ──────────────────────────────────────────────────────────

def _heat_generators(builder: Builder, bath_index: int) -> Tuple[float, Dict[float, TiltedGenerator]]:
    g0 = builder(0.0, None)
    n = len(g0.baths)
    if not 0 <= bath_index < n:
        raise ValueError(f"bath index {bath_index} out of range for {n} baths")
    h = fd_step(g0.system)

    def at(x: float) -> TiltedGenerator:
        lb = [0.0] * n
        lb[bath_index] = -x
        return builder(0.0, lb)

    return h, {x: at(x) for x in (h, -h, 2 * h, -2 * h)}


def heat_series(builder: Builder, rho0: np.ndarray, times: Iterable[float], bath_index: int = 0, *,
                mapper: Mapper = map) -> np.ndarray:
    """Q_a(t) = d/dlam G(t, lam_a = -lam) at 0, for every time; four generators are built once."""
    h, gens = _heat_generators(builder, bath_index)

    def one(t: float) -> float:
        return float(richardson_derivative(lambda x: propagate(gens[x], rho0, t).trace, h).real)

    return np.array(list(mapper(one, list(times))), dtype=float)


def heat(builder: Builder, rho0: np.ndarray, t: float, bath_index: int = 0) -> float:
    return float(heat_series(builder, rho0, [t], bath_index)[0])


def energy_change(builder: Builder, rho0: np.ndarray, t: float) -> float:
    g0 = builder(0.0, None)
    rho_t = propagate(g0, rho0, t).rho
    return float(np.trace(g0.system.hamiltonian @ (rho_t - as_operator(rho0))).real)


def check_first_law_heat(builder: Builder, rho0: np.ndarray, times: Sequence[float], *,
                         tolerance: Optional[float] = DEFAULT_TOLERANCES["first_law_heat"],
                         mapper: Mapper = map) -> CheckReport:
    """|sum_a Q_a(t) - Tr[H_S (rho(t) - rho0)]| relative to the largest |Delta E_S| on the grid."""
    g0 = builder(0.0, None)
    times = [float(t) for t in times]
    total = sum(heat_series(builder, rho0, times, a, mapper=mapper) for a in range(len(g0.baths)))
    de = np.array([energy_change(builder, rho0, t) for t in times])
    scale = float(np.max(np.abs(de))) if len(de) else 0.0
    values = np.abs(total - de) / (scale if scale > 0 else 1.0)
    return make_report("first_law_heat", times, values, tolerance)


# ── Fluctuation theorems ─────────────────────────────────────────────────────

def ft_work_curve(builder: Builder, system: SystemSpec, baths: Sequence, t: float,
                  lambda_grid: Optional[Sequence[float]] = None, *, beta_S: float,
                  mapper: Mapper = map) -> FTCurve:
    """Forward counting lam = (lam_S = lam, lam_B = -lam); reversed at -lam - beta.

    Both sides start from Gibbs(beta_S), so Delta F_eq = 0.
    """
    grid = np.linspace(-baths[0].beta, 0.0, DEFAULT_LAMBDA_POINTS) if lambda_grid is None else np.asarray(lambda_grid)
    rho0 = gibbs_state(system, beta_S)
    betas = [b.beta for b in baths]

    def point(lam: float) -> Tuple[complex, complex]:
        fwd = mgf(builder(lam, [-lam] * len(baths)), rho0, t).value
        rev_gen = reversed_generator(builder(-lam - beta_S, [lam - b for b in betas]))
        rev = mgf(rev_gen, rho0, t).value
        return _safe_log(fwd, "forward MGF"), _safe_log(rev, "reversed MGF")

    pairs = list(mapper(point, [float(x) for x in grid]))
    fwd = np.array([p[0].real for p in pairs])
    rev = np.array([p[1].real for p in pairs])
    return FTCurve(float(t), np.array(grid, dtype=float), fwd, rev)


def check_ft_work(builder: Builder, system: SystemSpec, baths: Sequence, t: float,
                  lambda_grid: Optional[Sequence[float]] = None, *, beta_S: float,
                  tolerance: Optional[float] = DEFAULT_TOLERANCES["ft_work"],
                  mapper: Mapper = map) -> CheckReport:
    curve = ft_work_curve(builder, system, baths, t, lambda_grid, beta_S=beta_S, mapper=mapper)
    return make_report("ft_work", curve.lambdas, curve.deviation, tolerance, time=float(t), beta_S=beta_S)


def _require_full_rank(rho: np.ndarray, what: str) -> np.ndarray:
    rho = (rho + rho.conj().T) / 2
    w = la.eigvalsh(rho)
    if w.min() <= FULL_RANK_RTOL * w.max():
        raise NumericError(f"{what} is rank deficient (smallest eigenvalue {w.min():.3e})")
    return rho


def entropy_mgf(builder: Builder, rho0: np.ndarray, t: float, lam_sigma: float) -> complex:
    """G_Sigma(t, l) = Tr[ rho(t)^{-l} exp(t L_{0, l beta}) (rho0^{l/2} rho0 rho0^{l/2}) ].

    rho(t) is the untilted state; at l = -1 this is <exp(-Sigma)>.
    """
    g0 = builder(0.0, None)
    rho0 = as_operator(rho0)
    if lam_sigma == 0.0:
        return complex(np.trace(propagate(g0, rho0, t).rho))
    rho_t = _require_full_rank(propagate(g0, rho0, t).rho, "rho(t)")
    rho0 = _require_full_rank(rho0, "rho(0)")
    g = builder(0.0, [lam_sigma * b.beta for b in g0.baths])
    half = hermitian_power(rho0, 0.5 * lam_sigma)
    evolved = propagate(g, half @ rho0 @ half, t).rho
    return complex(np.trace(hermitian_power(rho_t, -lam_sigma) @ evolved))


def check_integral_ft_entropy(builder: Builder, rho0: np.ndarray, times: Sequence[float], *,
                              tolerance: Optional[float] = DEFAULT_TOLERANCES["ft_entropy"],
                              mapper: Mapper = map) -> CheckReport:
    times = [float(t) for t in times]
    values = list(mapper(lambda t: abs(entropy_mgf(builder, rho0, t, -1.0) - 1.0), times))
    return make_report("ft_entropy", times, values, tolerance)


# ── Entropy production ───────────────────────────────────────────────────────

def von_neumann_entropy(rho: np.ndarray) -> float:
    w = la.eigvalsh((rho + rho.conj().T) / 2)
    return float(np.sum(entr(np.clip(w, 0.0, None))))


def relative_entropy(rho: np.ndarray, sigma: np.ndarray) -> float:
    """D(rho || sigma) = -S(rho) - Tr[rho log sigma]."""
    return float(-von_neumann_entropy(rho) - np.trace(rho @ matrix_log(sigma)).real)


def thermo_trajectory(builder: Builder, rho0: np.ndarray, times: Sequence[float], *,
                      mapper: Mapper = map) -> ThermoTrajectory:
    g0 = builder(0.0, None)
    rho0 = as_operator(rho0)
    times = np.array([float(t) for t in times], dtype=float)
    states = list(mapper(lambda t: propagate(g0, rho0, t).rho, times))
    h_s = g0.system.hamiltonian
    energy = np.array([np.trace(h_s @ r).real for r in states])
    heats = tuple(heat_series(builder, rho0, times, a, mapper=mapper) for a in range(len(g0.baths)))
    entropy = np.array([von_neumann_entropy(r) for r in states])
    sigma = entropy - von_neumann_entropy(rho0)
    for bath, q in zip(g0.baths, heats):
        sigma = sigma - bath.beta * q
    d_rel = None
    if len(g0.baths) == 1:
        gibbs = gibbs_state(g0.system, g0.baths[0].beta)
        d_rel = np.array([relative_entropy(r, gibbs) for r in states])
    log.info("trajectory: %d times, min increment of Sigma %.3e", len(times),
             float(np.min(np.diff(sigma))) if len(sigma) > 1 else 0.0)
    return ThermoTrajectory(times, energy, heats, entropy, np.asarray(sigma, dtype=float), d_rel)


