"""Experiment orchestration behind the CLI subcommands.

Each ``cmd_*`` resolves a RunConfig into library objects, refuses bad
configurations before touching the output directory, runs the work on a
bounded worker pool, writes its files and seals them into manifest.json.
Grid points are mapped with ``Executor.map``, so results come back in
submission order and outputs are byte-identical for any worker count.
"""
from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from .bath import BathSpec, SpectralDensity, load_spectral_table, relaxation_delta0
from .config import BathConfig, GridSpec, RunConfig
from .consistency import (
    CheckReport,
    Mapper,
    excited_coherence,
    make_report,
    population_mismatch,
    run_consistency_suite,
    steady_state,
)
from .const import DEFAULT_LAMBDA_POINTS, ErrorCode
from .counting import (
    energy_change,
    entropy_mgf,
    ft_work_curve,
    heat_series,
    mgf_scan,
    thermo_trajectory,
)
from .emit import RunManifest, prepare_out_dir, seal, write_csv, write_fig2_script, write_json
from .errors import ConfigError
from .generators import GeneratorBuilder, Scheme
from .oracle import ExactModel, calibrated_bath, exact_series, integrated_deviation
from .system import (
    SystemSpec,
    excited_superposition_state,
    gibbs_state,
    pure_state,
    three_level_system,
)

log = logging.getLogger(__name__)

# Checks whose verdict is binding for each scheme; the rest are reported.
JUDGED_CHECKS: Dict[str, frozenset] = {
    "secular": frozenset({"gqdb", "strict_energy", "average_first_law", "gibbs_fixed_point", "steady_state",
                          "ft_work", "ft_entropy", "first_law_heat"}),
    "symmetrized": frozenset({"gqdb", "average_first_law", "steady_state", "ft_work", "ft_entropy",
                              "first_law_heat"}),
    "coarse_grained": frozenset({"gqdb", "steady_state", "ft_work", "ft_entropy"}),
    "redfield": frozenset({"gqdb", "steady_state"}),
}

TRACE_TOLERANCE = 1e-10


# ── Resolution ───────────────────────────────────────────────────────────────

@dataclass
class Experiment:
    config: RunConfig
    system: SystemSpec
    baths: Tuple[BathSpec, ...]
    delta0: Optional[float]
    epsilon: Optional[float]
    rho0: np.ndarray
    builder: GeneratorBuilder = field(init=False)

    def __post_init__(self) -> None:
        self.builder = self.builder_for(self.config.scheme.name)

    @property
    def variant(self) -> str:
        return self.config.scheme.name

    def builder_for(self, variant: str, baths: Optional[Sequence[BathSpec]] = None) -> GeneratorBuilder:
        scheme = Scheme(
            variant,
            epsilon=self.epsilon if variant == "symmetrized" else None,
            delta0=self.delta0 if variant == "coarse_grained" else None,
            lamb_shift=self.config.scheme.lamb_shift,
        )
        return GeneratorBuilder(scheme, self.system, tuple(baths or self.baths))

    def tolerances(self, variant: Optional[str] = None) -> Dict[str, Optional[float]]:
        judged = JUDGED_CHECKS[variant or self.variant]
        tol = self.config.tolerances.model_dump()
        return {k: (v if k in judged else None) for k, v in tol.items()}


def _grid(spec: Optional[GridSpec]) -> Optional[np.ndarray]:
    return None if spec is None else spec.values()


def _bath(cfg: BathConfig, base_dir: Path) -> BathSpec:
    sd = cfg.spectral_density
    table = None
    if sd.kind == "tabulated":
        if sd.table is not None:
            table = np.array(sd.table, dtype=float)
        else:
            path = base_dir / sd.table_file
            try:
                table = load_spectral_table(path)
            except OSError as exc:
                raise ConfigError(f"cannot read spectral table {path}: {exc}") from exc
    density = SpectralDensity(kind=sd.kind, eta=sd.eta, cutoff=sd.cutoff, omega_c=sd.omega_c, center=sd.center,
                              width=sd.width, edge=sd.edge, table=table)
    return BathSpec(beta=cfg.beta, density=density, gamma=cfg.gamma)


def _initial_state(cfg: RunConfig, system: SystemSpec) -> np.ndarray:
    init = cfg.initial_state
    if init.kind == "gibbs":
        return gibbs_state(system, init.beta or cfg.beta_S)
    if init.kind == "pure":
        if len(init.amplitudes) != system.dim:
            raise ConfigError(f"initial_state.amplitudes has {len(init.amplitudes)} entries, system dim is {system.dim}")
        return pure_state([complex(re, im) for re, im in init.amplitudes])
    return excited_superposition_state(system)


def resolve(cfg: RunConfig, base_dir: Path = Path(".")) -> Experiment:
    try:
        baths = tuple(_bath(b, base_dir) for b in cfg.baths)
        s = cfg.system
        if s.three_level is not None:
            p = s.three_level
            delta0 = p.delta0 or relaxation_delta0(baths, p.center, p.coupling)
            system = three_level_system(p.center, delta0, p.coupling)
        else:
            system = SystemSpec(tuple(s.energies), s.coupling_matrix(), s.allow_diagonal)
            delta0 = None
        if cfg.scheme.delta0 is not None:
            delta0 = cfg.scheme.delta0
        epsilon = cfg.scheme.epsilon
        if cfg.scheme.epsilon_scale is not None:
            if delta0 is None:
                raise ConfigError("scheme.epsilon_scale needs a delta0 (three_level preset or scheme.delta0)")
            epsilon = cfg.scheme.epsilon_scale / delta0
        if cfg.scheme.name == "coarse_grained" and delta0 is None:
            raise ConfigError("coarse_grained scheme needs scheme.delta0 or the three_level preset")
        rho0 = _initial_state(cfg, system)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc
    exp = Experiment(cfg, system, baths, delta0, epsilon, rho0)
    log.info("resolved %s: dim %d, %d bath(s), delta0=%s, epsilon=%s", cfg.scheme.name, system.dim, len(baths),
             delta0, exp.builder.scheme.epsilon)
    return exp


# ── Plumbing ─────────────────────────────────────────────────────────────────

@contextmanager
def worker_pool(workers: int) -> Iterator[Mapper]:
    if workers <= 1:
        yield map
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        yield pool.map


def _jsonable(x: Any) -> Any:
    if isinstance(x, (np.floating, float)):
        return float(x)
    if isinstance(x, (np.integer, int)) and not isinstance(x, bool):
        return int(x)
    return x


def _emit_table(exp: Experiment, out_dir: Path, name: str, header: Sequence[str], rows: List[Sequence[Any]],
                provenance: Optional[Dict[str, Any]] = None) -> None:
    formats = exp.config.output.formats
    if "csv" in formats:
        write_csv(out_dir / f"{name}.csv", header, rows, provenance)
    if "json" in formats:
        doc = {"columns": list(header), "rows": [[_jsonable(x) for x in r] for r in rows]}
        if provenance is not None:
            doc["provenance"] = provenance
        write_json(out_dir / f"{name}.json", doc)


def _record(manifest: RunManifest, reports: Sequence[CheckReport]) -> None:
    for r in reports:
        manifest.verdicts[r.check] = r.verdict


def _run(command: str, cfg: RunConfig, base_dir: Path,
         body: Callable[[Experiment, Path, RunManifest, Mapper], None],
         precheck: Optional[Callable[[Experiment], None]] = None) -> RunManifest:
    start = time.perf_counter()
    exp = resolve(cfg, base_dir)
    if precheck is not None:
        precheck(exp)
    out_dir = prepare_out_dir(Path(cfg.output.directory))
    manifest = RunManifest(command, cfg.model_dump(mode="json"))
    log.info("%s: writing to %s with %d worker(s)", command, out_dir, cfg.workers)
    with worker_pool(cfg.workers) as mapper:
        body(exp, out_dir, manifest, mapper)
    manifest.wall_clock = time.perf_counter() - start
    sealed = seal(out_dir, manifest)
    log.info("%s: done in %.3f s, merkle root %s", command, sealed.wall_clock, sealed.merkle_root)
    return sealed


def _reports_doc(exp: Experiment, reports: Sequence[CheckReport]) -> Dict[str, Any]:
    return {"scheme": exp.variant, "reports": [r.to_dict() for r in reports]}


# ── check ────────────────────────────────────────────────────────────────────

def cmd_check(cfg: RunConfig, base_dir: Path = Path(".")) -> RunManifest:
    def body(exp: Experiment, out_dir: Path, manifest: RunManifest, mapper: Mapper) -> None:
        reports = run_consistency_suite(
            exp.builder, exp.system, exp.baths,
            tolerances=exp.tolerances(),
            lambda_grid=_grid(exp.config.counting.lambda_grid),
            chi_grid=_grid(exp.config.counting.chi_grid),
            delta0=exp.delta0,
            mapper=mapper,
        )
        write_json(out_dir / "check_report.json", _reports_doc(exp, reports))
        _record(manifest, reports)

    return _run("check", cfg, base_dir, body)


# ── evolve ───────────────────────────────────────────────────────────────────

def cmd_evolve(cfg: RunConfig, base_dir: Path = Path(".")) -> RunManifest:
    def body(exp: Experiment, out_dir: Path, manifest: RunManifest, mapper: Mapper) -> None:
        times = exp.config.times.values()
        n = len(exp.baths)
        traj = thermo_trajectory(exp.builder, exp.rho0, times, mapper=mapper)
        header = ["t", "E_S", *[f"Q_{a + 1}" for a in range(n)], "S", "Sigma"]
        columns = [traj.times, traj.energy, *traj.heat, traj.entropy, traj.sigma]
        if traj.relative_entropy is not None:
            header.append("D_rel")
            columns.append(traj.relative_entropy)
        _emit_table(exp, out_dir, "trajectory", header, [list(r) for r in zip(*columns)])

        lam = _grid(exp.config.counting.lambda_grid)
        if lam is None:
            beta = exp.baths[0].beta
            lam = np.linspace(-beta, beta, DEFAULT_LAMBDA_POINTS)
        fields = [(0.0, [0.0] * n)] + [(0.0, [float(x)] * n) for x in lam if x != 0.0]
        samples = mgf_scan(exp.builder, exp.rho0, times, fields, mapper=mapper)
        header = ["t", "lambda_S", *[f"lambda_B_{a + 1}" for a in range(n)], "re_G", "im_G"]
        rows = [[s.time, s.lambda_S, *s.lambda_B, s.value.real, s.value.imag] for s in samples]
        _emit_table(exp, out_dir, "mgf", header, rows)

        norm_err = [abs(s.value - 1.0) for s in samples if s.lambda_S == 0.0 and not any(s.lambda_B)]
        de = traj.energy - float(np.trace(exp.system.hamiltonian @ exp.rho0).real)
        q = np.sum(traj.heat, axis=0) if len(times) else np.zeros(0)
        scale = float(np.max(np.abs(de))) if len(de) else 0.0
        first_law = (np.abs(q - de) / (scale if scale > 0 else 1.0)) if len(de) else np.zeros(0)
        tol = exp.tolerances()
        reports = [
            make_report("trace_preservation", times, norm_err, TRACE_TOLERANCE),
            make_report("first_law_heat", times, first_law, tol["first_law_heat"]),
        ]
        write_json(out_dir / "evolve_report.json", _reports_doc(exp, reports))
        _record(manifest, reports)
        manifest.summary = {"times": int(len(times)), "mgf_samples": len(samples)}

    return _run("evolve", cfg, base_dir, body)


# ── ft ───────────────────────────────────────────────────────────────────────

def cmd_ft(cfg: RunConfig, base_dir: Path = Path(".")) -> RunManifest:
    def body(exp: Experiment, out_dir: Path, manifest: RunManifest, mapper: Mapper) -> None:
        c = exp.config
        tol = exp.tolerances()
        curve = ft_work_curve(exp.builder, exp.system, exp.baths, c.ft_time, _grid(c.counting.ft_lambda_grid),
                              beta_S=c.beta_S, mapper=mapper)
        rows = [list(r) for r in zip(curve.lambdas, curve.log_forward, curve.log_reversed, curve.deviation)]
        _emit_table(exp, out_dir, "ft_work", ["lambda", "log_G", "log_G_R", "deviation"], rows)

        rho_ft = gibbs_state(exp.system, c.beta_S)
        times = c.times.values()
        values = list(mapper(lambda t: entropy_mgf(exp.builder, rho_ft, t, -1.0), times))
        dev = [abs(v - 1.0) for v in values]
        _emit_table(exp, out_dir, "ft_entropy", ["t", "re_G", "im_G", "deviation"],
                    [[t, v.real, v.imag, d] for t, v, d in zip(times, values, dev)])

        reports = [
            make_report("ft_work", curve.lambdas, curve.deviation, tol["ft_work"], time=c.ft_time, beta_S=c.beta_S),
            make_report("ft_entropy", times, dev, tol["ft_entropy"]),
        ]
        write_json(out_dir / "ft_report.json", _reports_doc(exp, reports))
        _record(manifest, reports)

    return _run("ft", cfg, base_dir, body)


# ── steady ───────────────────────────────────────────────────────────────────

def cmd_steady(cfg: RunConfig, base_dir: Path = Path(".")) -> RunManifest:
    def body(exp: Experiment, out_dir: Path, manifest: RunManifest, mapper: Mapper) -> None:
        ss = steady_state(exp.builder(0.0, None))
        doc: Dict[str, Any] = {
            "scheme": exp.variant,
            "residual": ss.residual,
            "kernel_dim": ss.kernel_dim,
            "rho": [[[float(z.real), float(z.imag)] for z in row] for row in ss.rho],
        }
        if exp.system.dim >= 3:
            doc["excited_coherence"] = excited_coherence(ss.rho)
        if len(exp.baths) == 1:
            doc["population_mismatch"] = population_mismatch(ss.rho, gibbs_state(exp.system, exp.baths[0].beta))
        write_json(out_dir / "steady_state.json", doc)
        report = make_report("steady_state", [], [ss.residual], exp.tolerances()["steady_state"])
        _record(manifest, [report])
        manifest.summary = {k: v for k, v in doc.items() if k != "rho"}

    return _run("steady", cfg, base_dir, body)


# ── oracle and fig2 ──────────────────────────────────────────────────────────

def _require_oracle(exp: Experiment) -> None:
    o = exp.config.oracle
    if not o.enabled:
        raise ConfigError("this command needs the exact oracle; set oracle.enabled = true in the config",
                          ErrorCode.E_ORACLE_DISABLED)
    if len(exp.baths) != 1:
        raise ConfigError("the exact oracle models a single bath")
    _oracle_model(exp)


def _oracle_model(exp: Experiment) -> ExactModel:
    o = exp.config.oracle
    bath = exp.baths[0]
    return ExactModel(exp.system, o.N, bath.gamma, bath.beta, seed=o.seed, dim_cap=o.dim_cap)


def _oracle_times(exp: Experiment) -> np.ndarray:
    return (exp.config.oracle.times or exp.config.times).values()


def _provenance(exp: Experiment, model: ExactModel) -> Dict[str, Any]:
    o = exp.config.oracle
    return {"seed": o.seed, "N": o.N, "gamma": model.gamma, "beta_B": model.beta_B, "kernel_width": o.kernel_width,
            "dim_cap": o.dim_cap, "delta0": exp.delta0, "epsilon": exp.epsilon, "energies": list(exp.system.energies)}


def cmd_oracle(cfg: RunConfig, base_dir: Path = Path(".")) -> RunManifest:
    def body(exp: Experiment, out_dir: Path, manifest: RunManifest, mapper: Mapper) -> None:
        model = _oracle_model(exp)
        times = _oracle_times(exp)
        exact = exact_series(model, exp.rho0, times)
        calibrated = (calibrated_bath(model, kernel_width=exp.config.oracle.kernel_width),)
        variants = ["secular", "symmetrized"] + ([exp.variant] if exp.variant not in ("secular", "symmetrized") else [])
        q = {v: heat_series(exp.builder_for(v, calibrated), exp.rho0, times, mapper=mapper) for v in variants}
        header = ["t", "Q_exact", "Q_exact_direct", *[f"Q_{v}" for v in variants]]
        rows = [[t, exact.heat[i], exact.heat_direct[i], *[q[v][i] for v in variants]] for i, t in enumerate(times)]
        _emit_table(exp, out_dir, "oracle_heat", header, rows, _provenance(exp, model))
        manifest.summary = {
            "integrated_deviation": {v: integrated_deviation(times, q[v], exact.heat) for v in variants},
            "heat_route_mismatch": float(np.max(np.abs(exact.heat - exact.heat_direct))) if len(times) else 0.0,
        }

    return _run("oracle", cfg, base_dir, body, precheck=_require_oracle)


def cmd_fig2(cfg: RunConfig, base_dir: Path = Path(".")) -> RunManifest:
    def body(exp: Experiment, out_dir: Path, manifest: RunManifest, mapper: Mapper) -> None:
        c = exp.config
        grid = _grid(c.counting.ft_lambda_grid)
        curves = {}
        for v in ("symmetrized", "redfield"):
            curve = ft_work_curve(exp.builder_for(v), exp.system, exp.baths, c.ft_time, grid, beta_S=c.beta_S,
                                  mapper=mapper)
            curves[v] = curve
            rows = [list(r) for r in zip(curve.lambdas, curve.log_forward, curve.log_reversed)]
            _emit_table(exp, out_dir, f"fig2a_{v}", ["lambda", "log_G", "log_G_R"], rows)

        model = _oracle_model(exp)
        times = _oracle_times(exp)
        exact = exact_series(model, exp.rho0, times)
        calibrated = (calibrated_bath(model, kernel_width=c.oracle.kernel_width),)
        sym = exp.builder_for("symmetrized", calibrated)
        q_mgf = heat_series(sym, exp.rho0, times, mapper=mapper)
        de = np.array(list(mapper(lambda t: energy_change(sym, exp.rho0, t), times)))
        q_sec = heat_series(exp.builder_for("secular", calibrated), exp.rho0, times, mapper=mapper)
        heat_cols = ["Q_mgf", "dE_S", "Q_secular", "Q_exact"]
        rows = [[t, q_mgf[i], de[i], q_sec[i], exact.heat[i]] for i, t in enumerate(times)]
        _emit_table(exp, out_dir, "fig2b_heat", ["t", *heat_cols], rows, _provenance(exp, model))
        if "csv" in c.output.formats:
            write_fig2_script(out_dir / "fig2.gp", [f"fig2a_{v}.csv" for v in curves], "fig2b_heat.csv", heat_cols)

        tol = exp.tolerances("symmetrized")
        scale = float(np.max(np.abs(de))) if len(de) else 0.0
        reports = [
            make_report("ft_work", curves["symmetrized"].lambdas, curves["symmetrized"].deviation, tol["ft_work"]),
            make_report("first_law_heat", times, np.abs(q_mgf - de) / (scale if scale > 0 else 1.0),
                        tol["first_law_heat"]),
        ]
        _record(manifest, reports)
        sym_dev = float(np.max(curves["symmetrized"].deviation)) if len(curves["symmetrized"].lambdas) else 0.0
        red_dev = float(np.max(curves["redfield"].deviation)) if len(curves["redfield"].lambdas) else 0.0
        manifest.summary = {
            "ft_deviation": {"symmetrized": sym_dev, "redfield": red_dev},
            "integrated_deviation": {
                "symmetrized": integrated_deviation(times, q_mgf, exact.heat),
                "secular": integrated_deviation(times, q_sec, exact.heat),
            },
        }

    return _run("fig2", cfg, base_dir, body, precheck=_require_oracle)


COMMANDS: Dict[str, Callable[..., RunManifest]] = {
    "check": cmd_check,
    "evolve": cmd_evolve,
    "ft": cmd_ft,
    "steady": cmd_steady,
    "oracle": cmd_oracle,
    "fig2": cmd_fig2,
}
