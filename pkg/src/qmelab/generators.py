"""Tilted generators L_{lambda_S, lambda_B} for each master-equation scheme.

Every scheme is expressed through one coefficient table per bath, with
A_p = g_p sigma_p the rank-one jumps of ``system.build_jump_basis``:

    D[rho] = sum_pq  K+_pq A_p rho A_q^+  +  K-_pq A_p^+ rho A_q
           - sum_pq  P+_pq A_q^+ A_p rho  +  Q+_pq rho A_q^+ A_p
           - sum_pq  P-_pq A_q A_p^+ rho  +  Q-_pq rho A_q A_p^+
           - i [H_LS, rho]

K carries the bath counting field; P, Q are untilted. The system counting
field only ever enters through the similarity sandwich of
``add_system_counting``.

    scheme          pairs kept                K+-                          P+- / Q+-                    H_LS
    redfield        all                       G(w_p, l) + G(w_q, l)^*      G(w_p, 0) / G(w_q, 0)^*      0 (inside G)
    secular         |w_p - w_q| <= tol_omega  as redfield                  as redfield                  0 (inside G)
    symmetrized     |w_p - w_q| <  epsilon    2 sqrt(R_p(l) R_q(l))        sqrt(R_p R_q)                sign sqrt|I_p I_q|, secularized
    coarse_grained  |w_p - w_q| <= 1/delta0   2 R(wbar, l)                 R(wbar)                      I(wbar) terms
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .bath import BathSpec, CorrelationTransforms
from .operators import commutator_superop, dagger, left_multiply, right_multiply, sandwich
from .system import JumpOperator, SystemSpec, build_jump_basis

log = logging.getLogger(__name__)

SCHEMES = ("redfield", "secular", "symmetrized", "coarse_grained")

LambdaB = Union[None, float, Sequence[float]]


@dataclass(frozen=True)
class Scheme:
    variant: str
    epsilon: Optional[float] = None
    delta0: Optional[float] = None
    lamb_shift: bool = True

    def __post_init__(self) -> None:
        if self.variant not in SCHEMES:
            raise ValueError(f"unknown scheme {self.variant!r}; expected one of {SCHEMES}")
        if self.epsilon is not None and not self.epsilon > 0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")
        if self.delta0 is not None and not self.delta0 > 0:
            raise ValueError(f"delta0 must be > 0, got {self.delta0}")


@dataclass(frozen=True, eq=False)
class CoefficientTable:
    jumps: Tuple[JumpOperator, ...]
    k_plus: np.ndarray
    k_minus: np.ndarray
    p_plus: np.ndarray
    q_plus: np.ndarray
    p_minus: np.ndarray
    q_minus: np.ndarray
    lamb: Optional[np.ndarray] = None


@dataclass(frozen=True, eq=False)
class TiltedGenerator:
    scheme: Scheme
    lambda_S: float
    lambda_B: Tuple[float, ...]
    bath_matrix: np.ndarray  # generator at (0, lambda_B)
    matrix: np.ndarray  # generator at (lambda_S, lambda_B)
    system: SystemSpec
    baths: Tuple[BathSpec, ...]
    reversed: bool = False

    @property
    def dim(self) -> int:
        return self.system.dim


# ── Assembly ─────────────────────────────────────────────────────────────────

def dissipator(table: CoefficientTable) -> np.ndarray:
    ops = [j.operator for j in table.jumps]
    d = ops[0].shape[0] if ops else 0
    out = np.zeros((d * d, d * d), dtype=np.complex128)
    for p, a_p in enumerate(ops):
        for q, a_q in enumerate(ops):
            kp, km = table.k_plus[p, q], table.k_minus[p, q]
            if kp:
                out += kp * sandwich(a_p, dagger(a_q))
            if km:
                out += km * sandwich(dagger(a_p), a_q)
            up = dagger(a_q) @ a_p
            down = a_q @ dagger(a_p)
            if table.p_plus[p, q] or table.q_plus[p, q]:
                out -= table.p_plus[p, q] * left_multiply(up) + table.q_plus[p, q] * right_multiply(up)
            if table.p_minus[p, q] or table.q_minus[p, q]:
                out -= table.p_minus[p, q] * left_multiply(down) + table.q_minus[p, q] * right_multiply(down)
    if table.lamb is not None and np.any(table.lamb):
        out += commutator_superop(table.lamb)
    return out


def assemble_generator(system: SystemSpec, tables: Sequence[CoefficientTable]) -> np.ndarray:
    """Generator matrix at lambda_S = 0: -i[H_S, .] plus every bath dissipator."""
    m = commutator_superop(system.hamiltonian)
    for t in tables:
        if t.jumps:
            m = m + dissipator(t)
    return m


def _empty(n: int) -> np.ndarray:
    return np.zeros((n, n), dtype=np.complex128)


def _pair_ops(jumps: Sequence[JumpOperator], p: int, q: int) -> Tuple[np.ndarray, np.ndarray]:
    a_p, a_q = jumps[p].operator, jumps[q].operator
    return dagger(a_q) @ a_p, a_q @ dagger(a_p)


def _secularize(h: np.ndarray, system: SystemSpec) -> np.ndarray:
    e = np.array(system.energies)
    keep = np.abs(e[:, None] - e[None, :]) <= system.tol_omega
    return np.where(keep, h, 0.0)


def _lambda_vector(lambda_B: LambdaB, n_baths: int) -> Tuple[float, ...]:
    if lambda_B is None:
        return (0.0,) * n_baths
    if np.isscalar(lambda_B):
        return (float(lambda_B),) * n_baths
    lam = tuple(float(x) for x in lambda_B)
    if len(lam) != n_baths:
        raise ValueError(f"expected {n_baths} bath counting fields, got {len(lam)}")
    return lam


# ── Coefficient tables ───────────────────────────────────────────────────────

def redfield_table(system: SystemSpec, transforms: CorrelationTransforms, lam: float, *,
                   lamb_shift: bool = True, secular: bool = False) -> CoefficientTable:
    jumps = tuple(build_jump_basis(system))
    n = len(jumps)
    kp, km, pp, qp, pm, qm = (_empty(n) for _ in range(6))

    def gam(s: int, w: float, field_: float) -> complex:
        return transforms.gamma(s, w, field_, lamb_shift)

    for p in range(n):
        for q in range(n):
            wp, wq = jumps[p].omega, jumps[q].omega
            if secular and abs(wp - wq) > system.tol_omega:
                continue
            kp[p, q] = gam(1, wp, lam) + np.conj(gam(1, wq, lam))
            km[p, q] = gam(-1, wp, lam) + np.conj(gam(-1, wq, lam))
            pp[p, q] = gam(1, wp, 0.0)
            qp[p, q] = np.conj(gam(1, wq, 0.0))
            pm[p, q] = gam(-1, wp, 0.0)
            qm[p, q] = np.conj(gam(-1, wq, 0.0))
    return CoefficientTable(jumps, kp, km, pp, qp, pm, qm)


def _signed_root(a: float, b: float) -> float:
    # sign of the pair sum; equals sign I(w) whenever both frequencies share it, as in the near-degenerate doublet
    return math.copysign(math.sqrt(abs(a * b)), a + b) if a + b != 0 else 0.0


def symmetrized_table(system: SystemSpec, transforms: CorrelationTransforms, lam: float, epsilon: float, *,
                      lamb_shift: bool = True) -> CoefficientTable:
    if not epsilon > 0:
        raise ValueError(f"epsilon must be > 0, got {epsilon}")
    jumps = tuple(build_jump_basis(system))
    n, d = len(jumps), system.dim
    kp, km, pp, qp, pm, qm = (_empty(n) for _ in range(6))
    lamb = np.zeros((d, d), dtype=np.complex128)
    r = transforms.rate_real
    for p in range(n):
        for q in range(n):
            wp, wq = jumps[p].omega, jumps[q].omega
            if not abs(wp - wq) < epsilon:
                continue
            kp[p, q] = 2.0 * math.sqrt(r(1, wp, lam) * r(1, wq, lam))
            km[p, q] = 2.0 * math.sqrt(r(-1, wp, lam) * r(-1, wq, lam))
            pp[p, q] = qp[p, q] = math.sqrt(r(1, wp) * r(1, wq))
            pm[p, q] = qm[p, q] = math.sqrt(r(-1, wp) * r(-1, wq))
            if lamb_shift:
                up, down = _pair_ops(jumps, p, q)
                i = transforms.lamb_imag
                lamb += _signed_root(i(1, wp), i(1, wq)) * up + _signed_root(i(-1, wp), i(-1, wq)) * down
    return CoefficientTable(jumps, kp, km, pp, qp, pm, qm, _secularize(lamb, system))


def coarse_grained_table(system: SystemSpec, transforms: CorrelationTransforms, lam: float, delta0: float, *,
                         lamb_shift: bool = True) -> CoefficientTable:
    """Midpoint-rate table coupling jump pairs with |w_p - w_q| <= 1/delta0.

    The boundary is inclusive (within tol_omega), unlike a strict
    |w_p - w_q| < 1/delta0: the three-level doublet is split by exactly
    1/delta0 and must be coupled. The Lamb term is kept unsecularized, so
    with lamb_shift the average first law is violated at order
    [H_S, H_LS].
    """
    if not delta0 > 0:
        raise ValueError(f"delta0 must be > 0, got {delta0}")
    jumps = tuple(build_jump_basis(system))
    n, d = len(jumps), system.dim
    kp, km, pp, qp, pm, qm = (_empty(n) for _ in range(6))
    lamb = np.zeros((d, d), dtype=np.complex128)
    r = transforms.rate_real
    for p in range(n):
        for q in range(n):
            wp, wq = jumps[p].omega, jumps[q].omega
            # the boundary |w_p - w_q| = 1/delta0 is included
            if abs(wp - wq) > 1.0 / delta0 + system.tol_omega:
                continue
            mid = 0.5 * (wp + wq)
            kp[p, q] = 2.0 * r(1, mid, lam)
            km[p, q] = 2.0 * r(-1, mid, lam)
            pp[p, q] = qp[p, q] = r(1, mid)
            pm[p, q] = qm[p, q] = r(-1, mid)
            if lamb_shift:
                up, down = _pair_ops(jumps, p, q)
                lamb += transforms.lamb_imag(1, mid) * up + transforms.lamb_imag(-1, mid) * down
    return CoefficientTable(jumps, kp, km, pp, qp, pm, qm, lamb)


# ── Builders ─────────────────────────────────────────────────────────────────

def _transforms_for(baths: Sequence[BathSpec],
                    transforms: Optional[Sequence[CorrelationTransforms]]) -> List[CorrelationTransforms]:
    if transforms is None:
        return [CorrelationTransforms(b) for b in baths]
    if len(transforms) != len(baths):
        raise ValueError("one CorrelationTransforms per bath is required")
    return list(transforms)


def _finish(scheme: Scheme, system: SystemSpec, baths: Sequence[BathSpec], lam: Tuple[float, ...],
            tables: Sequence[CoefficientTable], lambda_S: float = 0.0) -> TiltedGenerator:
    m = assemble_generator(system, tables)
    g = TiltedGenerator(scheme, 0.0, lam, m, m, system, tuple(baths))
    return add_system_counting(g, lambda_S) if lambda_S else g


def build_redfield(system: SystemSpec, baths: Sequence[BathSpec], lambda_B: LambdaB = None, *,
                   lamb_shift: bool = True, transforms=None) -> TiltedGenerator:
    lam = _lambda_vector(lambda_B, len(baths))
    ts = _transforms_for(baths, transforms)
    tables = [redfield_table(system, t, lb, lamb_shift=lamb_shift) for t, lb in zip(ts, lam)]
    return _finish(Scheme("redfield", lamb_shift=lamb_shift), system, baths, lam, tables)


def build_secular(system: SystemSpec, baths: Sequence[BathSpec], lambda_B: LambdaB = None, *,
                  lamb_shift: bool = True, transforms=None) -> TiltedGenerator:
    lam = _lambda_vector(lambda_B, len(baths))
    ts = _transforms_for(baths, transforms)
    tables = [redfield_table(system, t, lb, lamb_shift=lamb_shift, secular=True) for t, lb in zip(ts, lam)]
    return _finish(Scheme("secular", lamb_shift=lamb_shift), system, baths, lam, tables)


def build_symmetrized(system: SystemSpec, baths: Sequence[BathSpec], lambda_B: LambdaB = None,
                      epsilon: Optional[float] = None, *, lamb_shift: bool = True,
                      transforms=None) -> TiltedGenerator:
    lam = _lambda_vector(lambda_B, len(baths))
    ts = _transforms_for(baths, transforms)
    if epsilon is None:
        epsilon = default_epsilon(system, ts, lamb_shift=lamb_shift)
    tables = [symmetrized_table(system, t, lb, epsilon, lamb_shift=lamb_shift) for t, lb in zip(ts, lam)]
    return _finish(Scheme("symmetrized", epsilon=epsilon, lamb_shift=lamb_shift), system, baths, lam, tables)


def build_coarse_grained(system: SystemSpec, baths: Sequence[BathSpec], lambda_S: float = 0.0,
                         lambda_B: LambdaB = None, delta0: float = 1.0, *, lamb_shift: bool = True,
                         transforms=None) -> TiltedGenerator:
    lam = _lambda_vector(lambda_B, len(baths))
    ts = _transforms_for(baths, transforms)
    tables = [coarse_grained_table(system, t, lb, delta0, lamb_shift=lamb_shift) for t, lb in zip(ts, lam)]
    scheme = Scheme("coarse_grained", delta0=delta0, lamb_shift=lamb_shift)
    return _finish(scheme, system, baths, lam, tables, lambda_S)


def default_epsilon(system: SystemSpec, transforms: Sequence[CorrelationTransforms], *,
                    lamb_shift: bool = True) -> float:
    """Smallest geometric-mean coefficient over pairs of distinct jump frequencies.

    Uses sqrt|I_p I_q| where the Lamb part dominates the pair, sqrt(R_p R_q)
    otherwise. With a single Bohr frequency every threshold is equivalent
    and ||H_S|| is returned.
    """
    jumps = build_jump_basis(system)
    best = math.inf
    for t in transforms:
        for p, jp in enumerate(jumps):
            for jq in jumps[p + 1:]:
                if abs(jp.omega - jq.omega) <= system.tol_omega:
                    continue
                for s in (1, -1):
                    rr = t.rate_real(s, jp.omega) * t.rate_real(s, jq.omega)
                    ii = abs(t.lamb_imag(s, jp.omega) * t.lamb_imag(s, jq.omega)) if lamb_shift else 0.0
                    v = math.sqrt(ii if ii > rr else rr)
                    if v > 0:
                        best = min(best, v)
    return best if math.isfinite(best) else system.norm


# ── Counting-field and time-reversal transforms ─────────────────────────────

def _system_weights(system: SystemSpec, lambda_S: float) -> np.ndarray:
    """Diagonal of the superoperator X -> S X S, S = exp(lambda_S H_S / 2)."""
    s = np.exp(0.5 * lambda_S * np.array(system.energies))
    return np.kron(s, s)


def add_system_counting(g: TiltedGenerator, lambda_S: float) -> TiltedGenerator:
    """Sandwich by exp(lambda_S H_S / 2); fields accumulate over repeated calls."""
    if lambda_S == 0.0:
        return g
    w = _system_weights(g.system, lambda_S)
    m = g.matrix * np.outer(w, 1.0 / w)
    return TiltedGenerator(g.scheme, g.lambda_S + lambda_S, g.lambda_B, g.bath_matrix, m, g.system, g.baths,
                           g.reversed)


def reversed_generator(g: TiltedGenerator) -> TiltedGenerator:
    """Theta L Theta with Theta complex conjugation in the energy eigenbasis.

    Complex conjugation of the vectorized matrix flips the sign of every
    Hamiltonian commutator; couplings must be time-reversal even (real).
    """
    if not g.system.is_real:
        raise ValueError("time reversal needs real coupling amplitudes (no time-reversal odd couplings)")
    return TiltedGenerator(g.scheme, g.lambda_S, g.lambda_B, np.conj(g.bath_matrix), np.conj(g.matrix),
                           g.system, g.baths, not g.reversed)


# ── Builder objects ──────────────────────────────────────────────────────────

@dataclass
class GeneratorBuilder:
    """Callable (lambda_S, lambda_B) -> TiltedGenerator for one scheme.

    Holds one CorrelationTransforms per bath so the principal-value cache
    is shared across every counting field the caller asks for.
    """

    scheme: Scheme
    system: SystemSpec
    baths: Tuple[BathSpec, ...]
    transforms: List[CorrelationTransforms] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.baths = tuple(self.baths)
        if not self.baths:
            raise ValueError("at least one bath is required")
        self.transforms = _transforms_for(self.baths, self.transforms or None)
        if self.scheme.variant == "symmetrized" and self.scheme.epsilon is None:
            eps = default_epsilon(self.system, self.transforms, lamb_shift=self.scheme.lamb_shift)
            log.info("symmetrized epsilon defaulted to %.6g", eps)
            self.scheme = Scheme("symmetrized", epsilon=eps, lamb_shift=self.scheme.lamb_shift)
        if self.scheme.variant == "coarse_grained" and self.scheme.delta0 is None:
            raise ValueError("coarse_grained scheme needs delta0")

    def __call__(self, lambda_S: float = 0.0, lambda_B: LambdaB = None) -> TiltedGenerator:
        s = self.scheme
        kw = dict(lamb_shift=s.lamb_shift, transforms=self.transforms)
        if s.variant == "redfield":
            g = build_redfield(self.system, self.baths, lambda_B, **kw)
        elif s.variant == "secular":
            g = build_secular(self.system, self.baths, lambda_B, **kw)
        elif s.variant == "symmetrized":
            g = build_symmetrized(self.system, self.baths, lambda_B, s.epsilon, **kw)
        else:
            return build_coarse_grained(self.system, self.baths, lambda_S, lambda_B, s.delta0, **kw)
        return add_system_counting(g, lambda_S)

    def lambda_vector(self, lambda_B: LambdaB) -> Tuple[float, ...]:
        return _lambda_vector(lambda_B, len(self.baths))


Builder = Callable[..., TiltedGenerator]
