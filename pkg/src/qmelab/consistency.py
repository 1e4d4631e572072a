"""Thermodynamic-consistency checks on tilted generators.

Each check returns a CheckReport: a nonnegative residual (relative, Frobenius
norm of vectorized superoperators divided by the untilted generator norm),
the tolerance it is judged against and the sampled grid. A check whose
tolerance is None is reported, not judged.

``builder`` arguments are callables (lambda_S, lambda_B) -> TiltedGenerator,
normally a ``generators.GeneratorBuilder``. ``mapper`` lets the caller run
independent grid points on a pool (``executor.map``); results are reduced
by max in grid order.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg as la

from .bath import BathSpec, CorrelationTransforms, checked_quad
from .const import DEFAULT_LAMBDA_POINTS, DEFAULT_TOLERANCES, FD_STEP_SCALE, KERNEL_RTOL
from .errors import DegenerateKernelError, NumericError
from .generators import Builder, TiltedGenerator, reversed_generator
from .operators import devectorize, identity, superop_adjoint, vectorize
from .system import SystemSpec, build_jump_basis, gibbs_state

log = logging.getLogger(__name__)

Mapper = Callable[..., Iterable]


@dataclass(frozen=True)
class CheckReport:
    check: str
    residual: float
    tolerance: Optional[float]
    grid: Tuple[float, ...] = ()
    values: Tuple[float, ...] = ()
    detail: Dict[str, float] = field(default_factory=dict)

    @property
    def verdict(self) -> str:
        if self.tolerance is None:
            return "report"
        return "pass" if self.residual < self.tolerance else "fail"

    @property
    def passed(self) -> bool:
        return self.verdict != "fail"

    def to_dict(self) -> dict:
        return {
            "check": self.check,
            "residual": self.residual,
            "tolerance": self.tolerance,
            "verdict": self.verdict,
            "grid": list(self.grid),
            "values": list(self.values),
            "detail": dict(self.detail),
        }


def _fro(x: np.ndarray) -> float:
    return float(np.linalg.norm(x))


def make_report(check: str, grid: Sequence[float], values: Sequence[float], tolerance: Optional[float],
                **detail: float) -> CheckReport:
    vals = tuple(float(v) for v in values)
    return CheckReport(check, max(vals, default=0.0), tolerance, tuple(float(x) for x in grid), vals, detail)


def default_lambda_grid(beta: float, points: int = DEFAULT_LAMBDA_POINTS) -> np.ndarray:
    return np.linspace(-beta, beta, points)


# ── Finite differences ───────────────────────────────────────────────────────

def fd_step(system: SystemSpec) -> float:
    norm = system.norm
    h = FD_STEP_SCALE / norm if norm > 0 else 0.0
    if not (math.isfinite(h) and h > 1e-300):
        raise NumericError(f"finite-difference step underflow (||H_S|| = {norm:g})")
    return h


def richardson_derivative(f: Callable[[float], Union[float, complex, np.ndarray]], h: float):
    """Central difference with one Richardson level: (4 D(h) - D(2h)) / 3."""
    if not (math.isfinite(h) and h > 0):
        raise NumericError(f"invalid finite-difference step {h!r}")
    d1 = (f(h) - f(-h)) / (2 * h)
    d2 = (f(2 * h) - f(-2 * h)) / (4 * h)
    return (4 * d1 - d2) / 3


# ── Generalized quantum detailed balance ─────────────────────────────────────

def gqdb_residual(builder: Builder, baths: Sequence[BathSpec], lambda_B: Sequence[float], norm0: float) -> float:
    """||L^R_{0,lam} - L^dagger_{0,-lam-beta}||_F / ||L_{0,0}||_F."""
    betas = [b.beta for b in baths]
    forward = reversed_generator(builder(0.0, list(lambda_B))).matrix
    mirrored = builder(0.0, [-lb - be for lb, be in zip(lambda_B, betas)]).matrix
    return _fro(forward - superop_adjoint(mirrored)) / norm0


def check_gqdb(builder: Builder, system: SystemSpec, baths: Sequence[BathSpec],
               lambda_grid: Optional[Sequence[float]] = None, *, tolerance: Optional[float] = DEFAULT_TOLERANCES["gqdb"],
               mapper: Mapper = map) -> CheckReport:
    """Residual of L^R_{0,lam} = L^dagger_{0,-lam-beta} over the grid.

    A scalar grid value t maps to lambda_B = t for every bath. The default
    grid is 11 points of t in [-1, 1] scaled by each bath's beta.
    """
    if lambda_grid is None:
        grid = list(np.linspace(-1.0, 1.0, DEFAULT_LAMBDA_POINTS))
        fields = [[t * b.beta for b in baths] for t in grid]
        grid = [t * baths[0].beta for t in grid]
    else:
        grid = [float(t) for t in lambda_grid]
        fields = [[t] * len(baths) for t in grid]
    norm0 = _fro(builder(0.0, None).matrix)
    values = list(mapper(lambda f: gqdb_residual(builder, baths, f, norm0), fields))
    log.info("gqdb: max residual %.3e over %d points", max(values, default=0.0), len(values))
    return make_report("gqdb", grid, values, tolerance)


# ── Energy conservation ──────────────────────────────────────────────────────

def strict_energy_residual(builder: Builder, n_baths: int, chi: float, base: float, norm0: float) -> float:
    shifted = builder(base + chi, [base + chi] * n_baths).matrix
    reference = builder(base, [base] * n_baths).matrix
    return _fro(shifted - reference) / norm0


def check_strict_energy(builder: Builder, system: SystemSpec, baths: Sequence[BathSpec],
                        chi_grid: Optional[Sequence[float]] = None, *, base_lambda: float = 0.0,
                        tolerance: Optional[float] = DEFAULT_TOLERANCES["strict_energy"],
                        mapper: Mapper = map) -> CheckReport:
    """max over chi of ||L_{lam + chi 1} - L_lam|| / ||L_0|| at base lam = base_lambda 1."""
    grid = list(default_lambda_grid(baths[0].beta) if chi_grid is None else chi_grid)
    norm0 = _fro(builder(0.0, None).matrix)
    values = list(mapper(lambda c: strict_energy_residual(builder, len(baths), c, base_lambda, norm0), grid))
    return make_report("strict_energy", grid, values, tolerance, base_lambda=base_lambda)


def random_density_matrices(dim: int, count: int, seed: int = 0) -> List[np.ndarray]:
    """Full-rank Ginibre states G G^+ / Tr."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
        rho = g @ g.conj().T
        out.append(rho / np.trace(rho))
    return out


def check_average_first_law(builder: Builder, system: SystemSpec, baths: Sequence[BathSpec],
                            rho_samples: Optional[Sequence[np.ndarray]] = None, *,
                            tolerance: Optional[float] = DEFAULT_TOLERANCES["average_first_law"]) -> CheckReport:
    """max over samples of |d/dchi Tr[L_{chi 1}[rho]]| at chi = 0.

    Normalized by ||H_S|| ||L_0 rho||.
    """
    if rho_samples is None:
        rho_samples = random_density_matrices(system.dim, 10)
    if len(rho_samples) < 10:
        raise ValueError(f"average first law needs >= 10 states, got {len(rho_samples)}")
    h = fd_step(system)
    n = len(baths)
    trace_row = vectorize(identity(system.dim))
    cache = {x: trace_row @ builder(x, [x] * n).matrix for x in (-2 * h, -h, h, 2 * h)}
    m0 = builder(0.0, None).matrix
    values = []
    for rho in rho_samples:
        v = vectorize(rho)
        deriv = richardson_derivative(lambda x: cache[x] @ v, h)
        scale = system.norm * _fro(m0 @ v)
        values.append(abs(deriv) / scale if scale > 0 else abs(deriv))
    return make_report("average_first_law", range(len(values)), values, tolerance, step=h)


# ── Detailed balance ─────────────────────────────────────────────────────────

def check_gibbs_fixed_point(g: TiltedGenerator, beta: float, *,
                            tolerance: Optional[float] = DEFAULT_TOLERANCES["gibbs_fixed_point"]) -> CheckReport:
    """||L[e^{-beta H_S}/Z]|| / ||L|| for a single-bath generator at zero counting."""
    if len(g.baths) != 1:
        raise ValueError("Gibbs fixed point is a single-bath check")
    m = g.matrix
    residual = _fro(m @ vectorize(gibbs_state(g.system, beta))) / _fro(m)
    return make_report("gibbs_fixed_point", [beta], [residual], tolerance)


@dataclass(frozen=True, eq=False)
class SteadyState:
    rho: np.ndarray
    residual: float
    kernel_dim: int


def steady_state(g: TiltedGenerator, rtol: float = KERNEL_RTOL) -> SteadyState:
    """Unit-trace Hermitian kernel vector (smallest right singular vector)."""
    if g.lambda_S != 0.0 or any(g.lambda_B):
        raise ValueError("steady state needs a generator at zero counting fields")
    m = g.matrix
    _, s, vh = la.svd(m)
    kernel_dim = int(np.sum(s < rtol * s[0]))
    if kernel_dim > 1:
        raise DegenerateKernelError(f"generator kernel has dimension {kernel_dim}; steady state is not unique")
    rho = devectorize(np.conj(vh[-1]))
    tr = np.trace(rho)
    if abs(tr) == 0:
        raise NumericError("kernel vector is traceless")
    rho = rho / tr
    rho = (rho + rho.conj().T) / 2
    return SteadyState(rho, _fro(m @ vectorize(rho)), kernel_dim)


def excited_coherence(rho: np.ndarray, i: int = 1, j: int = 2) -> float:
    return float(abs(rho[i, j]))


def population_mismatch(rho: np.ndarray, reference: np.ndarray) -> float:
    return float(np.max(np.abs(np.diag(rho).real - np.diag(reference).real)))


# ── Coarse-graining first-law condition ──────────────────────────────────────

RateLike = Union[CorrelationTransforms, Callable[[float], float]]


def _rate_callable(bath: RateLike, sign: int) -> Tuple[Callable[[float], float], Tuple[float, float]]:
    if isinstance(bath, CorrelationTransforms):
        return (lambda w: bath.rate_real(sign, w)), (0.0, bath.bath.cutoff)
    return bath, (0.0, 1.0)


def _sinc(x: float) -> float:
    return float(np.sinc(x / np.pi))


def _sinc_epsabs(rate: Callable[[float], float], lo: float, hi: float, delta0: float) -> float:
    # absolute target scaled to the single-peak integral, max|R| * 2pi / delta0
    peak = max(abs(rate(w)) for w in np.linspace(lo, hi, 257))
    return max(1e-11 * peak * 2.0 * math.pi / delta0, 1e-300)


def sinc_condition(omega1: float, omega2: float, delta0: float, bath: RateLike, sign: int = 1, *,
                   window: Optional[Tuple[float, float]] = None, limit: int = 2000) -> float:
    """int dw R(w) (w - wbar) sinc((w - w1) d0/2) sinc((w - w2) d0/2).

    The part of the window symmetric about wbar is folded onto u = w - wbar,
    where the integrand is u s(u + d) s(u - d) (R(wbar + u) - R(wbar - u)),
    so a constant R cancels exactly.
    """
    if not delta0 > 0:
        raise ValueError(f"delta0 must be > 0, got {delta0}")
    rate, support = _rate_callable(bath, sign)
    lo, hi = window if window is not None else support
    a = 0.5 * delta0
    mid = 0.5 * (omega1 + omega2)
    d = 0.5 * (omega2 - omega1)

    def direct(w: float) -> float:
        return rate(w) * (w - mid) * _sinc((w - omega1) * a) * _sinc((w - omega2) * a)

    def folded(u: float) -> float:
        return u * _sinc((u + d) * a) * _sinc((u - d) * a) * (rate(mid + u) - rate(mid - u))

    opts = dict(epsabs=_sinc_epsabs(rate, lo, hi, delta0), limit=limit)
    half = min(mid - lo, hi - mid)
    total = 0.0
    if half > 0:
        total += checked_quad(folded, 0.0, half, **opts)
        if mid - half > lo:
            total += checked_quad(direct, lo, mid - half, **opts)
        if mid + half < hi:
            total += checked_quad(direct, mid + half, hi, **opts)
    else:
        total = checked_quad(direct, lo, hi, **opts)
    return total


def sinc_single_peak(omega: float, delta0: float, bath: RateLike, sign: int = 1, *,
                     window: Optional[Tuple[float, float]] = None, limit: int = 2000) -> float:
    """int dw R(w) sinc^2((w - omega) d0/2): the normalization scale of sinc_condition."""
    rate, support = _rate_callable(bath, sign)
    lo, hi = window if window is not None else support
    a = 0.5 * delta0
    return checked_quad(lambda w: rate(w) * _sinc((w - omega) * a) ** 2, lo, hi,
                        points=[omega] if lo < omega < hi else None,
                        epsabs=_sinc_epsabs(rate, lo, hi, delta0), limit=limit)


# ── Suite ────────────────────────────────────────────────────────────────────

def run_consistency_suite(builder: Builder, system: SystemSpec, baths: Sequence[BathSpec], *,
                          tolerances: Optional[Dict[str, float]] = None,
                          lambda_grid: Optional[Sequence[float]] = None,
                          chi_grid: Optional[Sequence[float]] = None,
                          delta0: Optional[float] = None,
                          mapper: Mapper = map) -> List[CheckReport]:
    tol = dict(DEFAULT_TOLERANCES)
    tol.update(tolerances or {})
    reports = [
        check_gqdb(builder, system, baths, lambda_grid, tolerance=tol["gqdb"], mapper=mapper),
        check_strict_energy(builder, system, baths, chi_grid, tolerance=tol["strict_energy"], mapper=mapper),
        check_average_first_law(builder, system, baths, tolerance=tol["average_first_law"]),
    ]
    g0 = builder(0.0, None)
    if len(baths) == 1:
        reports.append(check_gibbs_fixed_point(g0, baths[0].beta, tolerance=tol["gibbs_fixed_point"]))
    ss = steady_state(g0)
    reports.append(make_report("steady_state", [], [ss.residual], tol["steady_state"]))
    if delta0 is not None:
        transforms = CorrelationTransforms(baths[0])
        freqs = sorted({j.omega for j in build_jump_basis(system)})
        for k, w1 in enumerate(freqs):
            for w2 in freqs[k + 1:]:
                value = sinc_condition(w1, w2, delta0, transforms)
                scale = sinc_single_peak(0.5 * (w1 + w2), delta0, transforms)
                reports.append(make_report(f"sinc_condition[{w1:.6g},{w2:.6g}]", [w1, w2],
                                           [abs(value) / scale if scale else abs(value)], None))
    for r in reports:
        log.info("check %-20s residual %.3e  %s", r.check, r.residual, r.verdict)
    return reports
