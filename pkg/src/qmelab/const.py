"""qmelab frozen constants: error codes, exit-code contract, numeric floors, default tolerances."""
from __future__ import annotations

from enum import Enum


class ErrorCode(str, Enum):
    # ── Configuration ─────────────────────────────────────────────────────
    E_CONFIG_SYNTAX = "E_CONFIG_SYNTAX"  # config file unreadable or not valid JSON
    E_CONFIG_SCHEMA = "E_CONFIG_SCHEMA"  # unknown key, missing field, wrong type or range
    E_DIMENSION     = "E_DIMENSION"      # composite dimension above the configured cap
    E_OUT_DIR       = "E_OUT_DIR"        # output directory is not ours to overwrite
    E_ORACLE_DISABLED = "E_ORACLE_DISABLED"  # command needs oracle.enabled = true
    # ── Verdicts ──────────────────────────────────────────────────────────
    E_CHECK_FAILED = "E_CHECK_FAILED"  # at least one consistency check above tolerance
    # ── Numerics ──────────────────────────────────────────────────────────
    E_NUMERIC           = "E_NUMERIC"            # non-finite input, step underflow, log of non-positive MGF
    E_QUADRATURE        = "E_QUADRATURE"         # principal-value quadrature did not converge
    E_KERNEL_DEGENERATE = "E_KERNEL_DEGENERATE"  # generator kernel dimension > 1


# ── CLI exit-code contract (frozen) ──────────────────────────────────────────

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

# ── Numerics ─────────────────────────────────────────────────────────────────

# Eigenvalue floor applied before taking the log of a density matrix.
EIGENVALUE_FLOOR = 1e-300

# Relative residual below which X is treated as Hermitian / anti-Hermitian.
NORMALITY_RTOL = 1e-12

# Bohr frequencies closer than TOL_OMEGA_REL * max|E| are the same frequency.
TOL_OMEGA_REL = 1e-12

# Counting-field finite-difference step is FD_STEP_SCALE / ||H_S||.
FD_STEP_SCALE = 1e-5

# Singular values below KERNEL_RTOL * s_max span the generator kernel.
KERNEL_RTOL = 1e-10

# Quadrature settings for the principal-value transforms.
QUAD_EPSABS = 1e-14
QUAD_EPSREL = 1e-10
QUAD_LIMIT = 400

DEFAULT_LAMBDA_POINTS = 11

# ── Default verdict tolerances (one per check) ───────────────────────────────

DEFAULT_TOLERANCES = {
    "gqdb": 1e-8,
    "strict_energy": 1e-10,
    "average_first_law": 1e-8,
    "gibbs_fixed_point": 1e-10,
    "steady_state": 1e-8,
    "ft_work": 1e-6,
    "ft_entropy": 1e-6,
    "first_law_heat": 1e-6,
}
