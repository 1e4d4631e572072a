"""Dense operator and superoperator algebra on small Hilbert spaces.

Operators are square complex ``numpy`` arrays; superoperators are
``d**2 x d**2`` complex arrays acting on vectorized operators.

Vectorization convention (the only one used anywhere in qmelab):

    vec(X)        = column stacking, ``X.reshape(-1, order="F")``
    vec(A X B)    = (B^T kron A) vec(X)
    adjoint(O)    = O^H  (Hilbert-Schmidt inner product)

``vectorize`` and ``devectorize`` are the single conversion point.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Tuple, Union

import numpy as np
import scipy.linalg as la

from .const import EIGENVALUE_FLOOR, NORMALITY_RTOL

Operator = np.ndarray
SuperOperator = np.ndarray
Scalar = Union[float, complex]


@dataclass(frozen=True)
class CompositeSpace:
    """Ordered tensor factors; factor 0 is the slowest index."""

    dims: Tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.dims or any(int(d) < 1 for d in self.dims):
            raise ValueError(f"factor dimensions must be positive, got {self.dims}")
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))

    @property
    def total(self) -> int:
        return math.prod(self.dims)


def as_operator(x) -> Operator:
    a = np.asarray(x, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"operator must be a square matrix, got shape {a.shape}")
    return a


def identity(dim: int) -> Operator:
    return np.eye(dim, dtype=np.complex128)


def dagger(x: Operator) -> Operator:
    return np.conj(x).T


# ── Predicates ───────────────────────────────────────────────────────────────

def _rel(x: np.ndarray, ref: np.ndarray) -> float:
    scale = float(np.linalg.norm(ref))
    return float(np.linalg.norm(x)) / scale if scale > 0.0 else 0.0


def is_hermitian(x: Operator, rtol: float = NORMALITY_RTOL) -> bool:
    return _rel(x - dagger(x), x) < rtol


def is_anti_hermitian(x: Operator, rtol: float = NORMALITY_RTOL) -> bool:
    return _rel(x + dagger(x), x) < rtol


def is_unitary(x: Operator, atol: float = 1e-12) -> bool:
    return float(np.linalg.norm(dagger(x) @ x - identity(x.shape[0]))) < atol


def is_psd(x: Operator, atol: float = 1e-12) -> bool:
    if not is_hermitian(x):
        return False
    w = np.linalg.eigvalsh((x + dagger(x)) / 2)
    return bool(w.min() >= -atol * max(1.0, float(np.abs(w).max())))


# ── Tensor structure ─────────────────────────────────────────────────────────

def tensor_product(a: Operator, b: Operator) -> Operator:
    """Kronecker product with ``a`` as the slow index."""
    return np.kron(as_operator(a), as_operator(b))


def partial_trace(x: Operator, space: CompositeSpace, factor: int) -> Operator:
    """Trace out ``space.dims[factor]``; the remaining factors keep their order."""
    x = as_operator(x)
    n = len(space.dims)
    if not 0 <= factor < n:
        raise ValueError(f"factor index {factor} out of range for {n} factors")
    if x.shape[0] != space.total:
        raise ValueError(f"operator dim {x.shape[0]} != composite dim {space.total}")
    t = np.trace(x.reshape(space.dims + space.dims), axis1=factor, axis2=factor + n)
    rest = space.total // space.dims[factor]
    return t.reshape(rest, rest)


# ── Vectorization ────────────────────────────────────────────────────────────

def vectorize(x: Operator) -> np.ndarray:
    return np.asarray(x, dtype=np.complex128).reshape(-1, order="F")


def devectorize(v: np.ndarray) -> Operator:
    v = np.asarray(v, dtype=np.complex128).ravel()
    n = math.isqrt(v.size)
    if n * n != v.size:
        raise ValueError(f"vector length {v.size} is not a perfect square")
    return v.reshape((n, n), order="F")


def sandwich(a: Operator, b: Operator) -> SuperOperator:
    """Superoperator of X -> a X b."""
    return np.kron(np.asarray(b).T, np.asarray(a)).astype(np.complex128)


def left_multiply(a: Operator) -> SuperOperator:
    return sandwich(a, identity(a.shape[0]))


def right_multiply(b: Operator) -> SuperOperator:
    return sandwich(identity(b.shape[0]), b)


def commutator_superop(h: Operator) -> SuperOperator:
    """Superoperator of X -> -i[h, X]."""
    return -1j * (left_multiply(h) - right_multiply(h))


def apply_superop(o: SuperOperator, x: Operator) -> Operator:
    return devectorize(o @ vectorize(x))


def superop_adjoint(o: SuperOperator) -> SuperOperator:
    return np.conj(o).T


def operator_basis(dim: int) -> Iterator[Operator]:
    """Matrix units E_ij, i.e. a complete basis of the operator space."""
    for i in range(dim):
        for j in range(dim):
            e = np.zeros((dim, dim), dtype=np.complex128)
            e[i, j] = 1.0
            yield e


def trace_preservation_residual(o: SuperOperator) -> float:
    """||vec(I)^T O||: zero iff Tr[O[X]] = 0 for every X."""
    d = math.isqrt(o.shape[0])
    return float(np.linalg.norm(vectorize(identity(d)) @ o))


def hermiticity_preservation_residual(o: SuperOperator) -> float:
    d = math.isqrt(o.shape[0])
    worst = 0.0
    for e in operator_basis(d):
        lhs = apply_superop(o, dagger(e))
        rhs = dagger(apply_superop(o, e))
        worst = max(worst, float(np.linalg.norm(lhs - rhs)))
    return worst


# ── Matrix functions ─────────────────────────────────────────────────────────

def matrix_exp(x: np.ndarray, scale: Scalar = 1.0) -> np.ndarray:
    """exp(scale * x).

    Hermitian and anti-Hermitian arguments go through ``eigh``; everything
    else (tilted generators are non-normal) through scipy's scaling and
    squaring Pade ``expm``.
    """
    y = scale * np.asarray(x, dtype=np.complex128)
    if not np.all(np.isfinite(y)):
        raise ValueError("matrix_exp: non-finite entries")
    if is_hermitian(y):
        w, v = la.eigh((y + dagger(y)) / 2)
        return (v * np.exp(w)) @ dagger(v)
    if is_anti_hermitian(y):
        k = -1j * y
        w, v = la.eigh((k + dagger(k)) / 2)
        return (v * np.exp(1j * w)) @ dagger(v)
    return la.expm(y)


def matrix_log(x: Operator, atol: float = 1e-10) -> Operator:
    """Principal log of a Hermitian PSD operator, eigenvalues clamped at EIGENVALUE_FLOOR."""
    x = as_operator(x)
    if not is_hermitian(x, rtol=1e-10):
        raise ValueError("matrix_log: operator is not Hermitian")
    w, v = la.eigh((x + dagger(x)) / 2)
    if w.min() < -atol * max(1.0, float(np.abs(w).max())):
        raise ValueError(f"matrix_log: negative eigenvalue {w.min():.3e}")
    return (v * np.log(np.maximum(w, EIGENVALUE_FLOOR))) @ dagger(v)


def hermitian_power(x: Operator, p: float) -> Operator:
    """x**p for Hermitian PSD x through the clamped spectrum (exp(p log x))."""
    return matrix_exp(matrix_log(x), p)
