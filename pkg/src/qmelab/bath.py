"""Thermal bosonic baths: spectral densities and tilted correlation transforms.

Conventions (shared by every generator scheme):

    R_+(w, lam) = pi g^2 J(w) (n_B(w) + 1) e^{+lam w}
    R_-(w, lam) = pi g^2 J(w) n_B(w)       e^{-lam w}

    I_+(w, lam) = PV int_0^Omega dx g^2 J(x) (n_B(x) + 1) e^{+lam x} / (w - x)
    I_-(w, lam) = PV int_0^Omega dx g^2 J(x) n_B(x)       e^{-lam x} / (x - w)

    Gamma_pm(w, lam) = R_pm(w, lam) + i I_pm(w, lam)

with g the overall coupling ``gamma``, J = 0 outside [0, Omega]. The
denominators of I_+ and I_- differ in sign, which is what makes the tilt
symmetry Gamma_pm(w, -lam - beta) = conj(Gamma_mp(w, lam)) hold.
"""
from __future__ import annotations

import logging
import math
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.integrate import quad

from .const import QUAD_EPSABS, QUAD_EPSREL, QUAD_LIMIT
from .errors import QuadratureError

log = logging.getLogger(__name__)

SPECTRAL_KINDS = ("ohmic_exp_cutoff", "flat_smooth_cutoff", "lorentzian_peak", "tabulated")

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True, eq=False)
class SpectralDensity:
    """J(w) on [0, cutoff], zero elsewhere.

    ohmic_exp_cutoff    eta * w * exp(-w / omega_c)
    flat_smooth_cutoff  eta * tanh(w / edge) * tanh((cutoff - w) / edge)
    lorentzian_peak     eta * w * width^2 / ((w - center)^2 + width^2)
    tabulated           linear interpolation of ``table`` rows (w, J)
    """

    kind: str = "ohmic_exp_cutoff"
    eta: float = 1.0
    cutoff: float = 1.0
    omega_c: float = 0.25
    center: float = 0.5
    width: float = 0.1
    edge: float = 0.02
    table: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        if self.kind not in SPECTRAL_KINDS:
            raise ValueError(f"unknown spectral density kind {self.kind!r}; expected one of {SPECTRAL_KINDS}")
        if self.cutoff <= 0:
            raise ValueError(f"cutoff must be > 0, got {self.cutoff}")
        if self.eta < 0:
            raise ValueError(f"eta must be >= 0, got {self.eta}")
        if self.kind == "tabulated":
            if self.table is None:
                raise ValueError("tabulated spectral density needs a table")
            t = np.array(self.table, dtype=float)
            if t.ndim != 2 or t.shape[1] != 2 or t.shape[0] < 2:
                raise ValueError(f"table must have shape (n>=2, 2), got {t.shape}")
            if np.any(np.diff(t[:, 0]) <= 0):
                raise ValueError("table frequencies must be strictly increasing")
            if np.any(t[:, 1] < 0):
                raise ValueError("table contains negative J values")
            t.setflags(write=False)
            object.__setattr__(self, "table", t)

    def __call__(self, omega: ArrayLike) -> ArrayLike:
        w = np.asarray(omega, dtype=float)
        inside = (w >= 0.0) & (w <= self.cutoff)
        if self.kind == "ohmic_exp_cutoff":
            j = self.eta * w * np.exp(-w / self.omega_c)
        elif self.kind == "flat_smooth_cutoff":
            j = self.eta * np.tanh(w / self.edge) * np.tanh((self.cutoff - w) / self.edge)
        elif self.kind == "lorentzian_peak":
            j = self.eta * w * self.width**2 / ((w - self.center) ** 2 + self.width**2)
        else:
            j = np.interp(w, self.table[:, 0], self.table[:, 1], left=0.0, right=0.0)
        out = np.where(inside, j, 0.0)
        return float(out) if out.ndim == 0 else out


def load_spectral_table(path: Path) -> np.ndarray:
    """Two-column CSV (w, J); '#' starts a comment line."""
    t = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    if t.shape[1] != 2:
        raise ValueError(f"{path}: expected two columns, got {t.shape[1]}")
    return t


@dataclass(frozen=True)
class BathSpec:
    beta: float
    density: SpectralDensity
    gamma: float = 1.0

    def __post_init__(self) -> None:
        if not self.beta > 0:
            raise ValueError(f"beta must be > 0, got {self.beta}")
        if self.gamma < 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")

    @property
    def cutoff(self) -> float:
        return self.density.cutoff


def bose_einstein(beta: float, omega: ArrayLike) -> ArrayLike:
    w = np.asarray(omega, dtype=float)
    if np.any(w <= 0):
        raise ValueError("bose_einstein: omega must be > 0")
    n = 1.0 / np.expm1(beta * w)
    return float(n) if n.ndim == 0 else n


def _check_sign(sign: int) -> int:
    if sign not in (1, -1):
        raise ValueError(f"sign must be +1 or -1, got {sign!r}")
    return sign


# ── Principal values ─────────────────────────────────────────────────────────

def checked_quad(func: Callable[[float], float], a: float, b: float, *, points: Optional[Sequence[float]] = None,
                 epsabs: float = QUAD_EPSABS, epsrel: float = QUAD_EPSREL, limit: int = QUAD_LIMIT) -> float:
    res = quad(func, a, b, points=points, epsabs=epsabs, epsrel=epsrel, limit=limit, full_output=1)
    value, abserr = float(res[0]), float(res[1])
    if len(res) > 3:
        # quad flagged trouble; accept only if the achieved error still meets the target
        if abserr > max(1e-8 * abs(value), epsabs):
            raise QuadratureError(
                f"quadrature on [{a:g}, {b:g}] did not converge: achieved error {abserr:.3e} "
                f"for value {value:.6e} ({res[3].strip().splitlines()[0]})"
            )
        log.debug("quad warning accepted: value=%g abserr=%g", value, abserr)
    return value


def principal_value(f: Callable[[float], float], omega: float, cutoff: float, *,
                    breaks: Optional[Sequence[float]] = None, epsabs: float = QUAD_EPSABS,
                    epsrel: float = QUAD_EPSREL, limit: int = QUAD_LIMIT) -> float:
    """PV int_0^cutoff f(x) / (omega - x) dx.

    Inside the support the pole is removed by subtraction:
    int (f(x) - f(omega)) / (omega - x) dx + f(omega) ln(omega / (cutoff - omega)).
    ``breaks`` are kinks of f (tabulated densities) handed to quad.
    """
    opts = dict(epsabs=epsabs, epsrel=epsrel, limit=limit)
    inner = sorted({float(x) for x in (breaks or ()) if 0.0 < x < cutoff})
    if not 0.0 < omega < cutoff:
        return checked_quad(lambda x: f(x) / (omega - x), 0.0, cutoff, points=inner or None, **opts)

    f0 = f(omega)
    h = 1e-6 * cutoff

    def smooth(x: float) -> float:
        d = omega - x
        if abs(d) < 1e-12 * cutoff:
            return -(f(omega + h) - f(omega - h)) / (2 * h)
        return (f(x) - f0) / d

    regular = checked_quad(smooth, 0.0, cutoff, points=sorted(set(inner) | {omega}), **opts)
    return regular + f0 * math.log(omega / (cutoff - omega))


# ── Correlation transforms ───────────────────────────────────────────────────

class CorrelationTransforms:
    """Gamma_pm(w, lam) for one bath, with a lock-guarded cache of the PV integrals."""

    def __init__(self, bath: BathSpec, *, epsabs: float = QUAD_EPSABS, epsrel: float = QUAD_EPSREL,
                 limit: int = QUAD_LIMIT) -> None:
        self.bath = bath
        self._opts = dict(epsabs=epsabs, epsrel=epsrel, limit=limit)
        table = bath.density.table if bath.density.kind == "tabulated" else None
        if table is not None:
            self._opts["breaks"] = tuple(table[:, 0])
            self._opts["limit"] = max(limit, 4 * len(table))
        self._cache: Dict[Tuple[int, float, float], float] = {}
        self._lock = threading.Lock()

    def occupied_density(self, sign: int, omega: float, lam: float = 0.0) -> float:
        """g^2 J(w) (n_B + 1/2 +- 1/2) e^{+-lam w}; zero outside (0, cutoff)."""
        _check_sign(sign)
        b = self.bath
        if not 0.0 < omega < b.cutoff:
            return 0.0
        j = b.density(omega)
        if j == 0.0:
            return 0.0
        n = bose_einstein(b.beta, omega)
        occ = n + 1.0 if sign > 0 else n
        return b.gamma**2 * j * occ * math.exp(sign * lam * omega)

    def rate_real(self, sign: int, omega: float, lam: float = 0.0) -> float:
        return math.pi * self.occupied_density(sign, omega, lam)

    def lamb_imag(self, sign: int, omega: float, lam: float = 0.0) -> float:
        _check_sign(sign)
        key = (sign, float(omega), float(lam))
        with self._lock:
            hit = self._cache.get(key)
        if hit is not None:
            return hit
        pv = principal_value(lambda x: self.occupied_density(sign, x, lam), omega, self.bath.cutoff, **self._opts)
        value = pv if sign > 0 else -pv
        with self._lock:
            self._cache[key] = value
        return value

    def gamma(self, sign: int, omega: float, lam: float = 0.0, lamb_shift: bool = True) -> complex:
        im = self.lamb_imag(sign, omega, lam) if lamb_shift else 0.0
        return complex(self.rate_real(sign, omega, lam), im)

    def gamma_plus(self, omega: float, lam: float = 0.0) -> complex:
        return self.gamma(1, omega, lam)

    def gamma_minus(self, omega: float, lam: float = 0.0) -> complex:
        return self.gamma(-1, omega, lam)


def relaxation_delta0(baths: Sequence[BathSpec], center: float, coupling: float = 1.0) -> float:
    """Coarse-graining time sqrt(tau_B * tau_S) for a doublet centred at ``center``.

    tau_B = 1/Omega (largest cutoff); tau_S = 1/Gamma with Gamma the population
    relaxation rate 2|g|^2 (R_+ + R_-) summed over baths at the centre frequency.
    """
    rate = 0.0
    for b in baths:
        t = CorrelationTransforms(b)
        rate += 2.0 * abs(coupling) ** 2 * (t.rate_real(1, center) + t.rate_real(-1, center))
    if rate <= 0:
        raise ValueError("relaxation rate is zero at the doublet centre; delta0 is undefined")
    omega = max(b.cutoff for b in baths)
    return math.sqrt((1.0 / omega) * (1.0 / rate))
