"""
Experiment Controller - run configuration, certification suites and the
experiment drivers behind the tfch commands
"""
import configparser
import csv
import json
import logging
import math
import warnings
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, ValidationError
from scipy.integrate import IntegrationWarning, quad
from scipy.special import gamma

from controllers.dgs_controller import DgsController
from controllers.kernel_controller import KernelController, KERNEL_TOL
from controllers.mesh_controller import MeshController
from controllers.solver_controller import SolverController
from controllers.spectral_controller import SpectralController
from data.presets import PRESETS
from errors import ConfigError, TfchError, VerificationFailure
from models.config_models import InitialData, MeshMode, RunConfig
from models.field_models import Field2D
from models.mesh_models import TimeMesh
from models.report_models import BoundsRow, CompatRow, ConvergenceRow, SuiteResult, VerifyReport
from models.solver_models import ModelParams, Scheme, SolverState

logger = logging.getLogger(__name__)

ORACLE_TOL = 1e-11
IDENTITY_TOL = 1e-12
DGS_TOL = 1e-11
VERIFY_ALPHAS = (0.2, 0.5, 0.8)
ORACLE_ALPHAS = (0.1, 0.5, 0.9)
RATIO_CEILING = 4.5

_SECTIONS = ("model", "grid", "mesh", "solver", "converge", "output")


def _quad(func: Callable[[float], float], lower: float, upper: float, **kwargs) -> float:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        value, _ = quad(func, lower, upper, epsabs=0.0, epsrel=1e-13, limit=200, **kwargs)
    return value


class ExperimentController:
    """Controller for the tfch experiments"""

    # ------------------------------------------------------------------
    # configuration
    # ------------------------------------------------------------------

    @staticmethod
    def load_config(path: Union[str, Path]) -> RunConfig:
        """
        Parse an INI run configuration

        Args:
            path: File with sections [model], [grid], [mesh], [solver], [converge], [output]

        Returns:
            Validated RunConfig

        Raises:
            ConfigError: unreadable file, unknown section or key, invalid value
        """
        path = Path(path)
        parser = configparser.ConfigParser()
        parser.optionxform = str
        try:
            if not parser.read(path):
                raise ConfigError(f"config file {path} not found")
        except configparser.Error as e:
            raise ConfigError(f"cannot parse {path}: {e}") from e

        sections: Dict[str, dict] = {}
        for name in parser.sections():
            if name not in _SECTIONS:
                raise ConfigError(f"{path}: unknown section [{name}]")
            # blank values fall back to the defaults
            sections[name] = {k: v for k, v in parser.items(name) if v.strip() != ""}
        return ExperimentController.build_config(sections, source=str(path))

    @staticmethod
    def build_config(sections: Dict[str, dict], source: str = "config") -> RunConfig:
        """Validate section dictionaries into a RunConfig, rejecting unknown keys"""
        for name, values in sections.items():
            section_model = RunConfig.model_fields[name].annotation
            unknown = set(values) - set(section_model.model_fields)
            if unknown:
                raise ConfigError(f"{source}: unknown keys in [{name}]: {sorted(unknown)}")
        try:
            return RunConfig.model_validate(sections)
        except ValidationError as e:
            raise ConfigError(f"{source}: {e}") from e

    @staticmethod
    def preset(name: str) -> RunConfig:
        """
        Named run configuration

        Raises:
            ConfigError: unknown preset name
        """
        if name not in PRESETS:
            raise ConfigError(f"unknown preset '{name}'; choose from {sorted(PRESETS)}")
        return ExperimentController.build_config(PRESETS[name], source=f"preset {name}")

    @staticmethod
    def resolve_config(
        config_path: Optional[str] = None,
        preset: Optional[str] = None,
        alpha: Optional[float] = None,
        seed: Optional[int] = None,
    ) -> RunConfig:
        """Config file, preset or defaults, with optional alpha and seed overrides"""
        if config_path and preset:
            raise ConfigError("use either a config file or a preset, not both")
        if config_path:
            config = ExperimentController.load_config(config_path)
        elif preset:
            config = ExperimentController.preset(preset)
        else:
            config = RunConfig()
        if alpha is not None:
            try:
                model = config.model.model_validate({**config.model.model_dump(), "alpha": alpha})
            except ValidationError as e:
                raise ConfigError(f"invalid alpha override {alpha}: {e}") from e
            config = config.model_copy(update={"model": model})
        if seed is not None:
            config = config.model_copy(update={"solver": config.solver.model_copy(update={"seed": seed})})
        return config

    @staticmethod
    def model_params(config: RunConfig, alpha: Optional[float] = None) -> ModelParams:
        return ModelParams(
            alpha=config.model.alpha if alpha is None else alpha,
            kappa=config.model.kappa,
            eps=config.model.eps,
            grid=config.grid,
            fp_tol=config.solver.fp_tol,
            fp_max_iters=config.solver.fp_max_iters,
            fp_stabilizer=config.solver.fp_stabilizer,
        )

    @staticmethod
    def parse_alpha_grid(spec: str) -> List[float]:
        """
        'start:stop:count' (inclusive linspace) or a comma separated list

        Raises:
            ConfigError: malformed grid or alpha outside (0, 1]
        """
        try:
            if ":" in spec:
                start, stop, count = spec.split(":")
                alphas = np.linspace(float(start), float(stop), int(count)).tolist()
            else:
                alphas = [float(item) for item in spec.split(",") if item.strip()]
        except ValueError as e:
            raise ConfigError(f"malformed alpha grid '{spec}'") from e
        if not alphas or any(not 0.0 < a <= 1.0 for a in alphas):
            raise ConfigError(f"alpha grid '{spec}' must be non-empty inside (0, 1]")
        return alphas

    # ------------------------------------------------------------------
    # bounds
    # ------------------------------------------------------------------

    @staticmethod
    def bounds_table(alphas: Sequence[float]) -> List[BoundsRow]:
        """r*(alpha), gamma_max(alpha) and 3 - alpha for each alpha"""
        return [
            BoundsRow(
                alpha=float(a),
                r_star=MeshController.r_star(a),
                gamma_max=MeshController.gamma_max(a),
                three_minus_alpha=3.0 - float(a),
            )
            for a in alphas
        ]

    @staticmethod
    def write_rows_csv(rows: Sequence[BaseModel], path: Union[str, Path]) -> Path:
        """Write pydantic rows as CSV with their field names as header"""
        path = Path(path)
        if not rows:
            raise ConfigError(f"nothing to write to {path}")
        fields = list(type(rows[0]).model_fields)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            with path.open("w", newline="") as handle:
                writer = csv.DictWriter(handle, fieldnames=fields)
                writer.writeheader()
                for row in rows:
                    writer.writerow({k: ("" if v is None else v) for k, v in row.model_dump().items()})
        except OSError as e:
            raise ConfigError(f"cannot write {path}: {e}") from e
        logger.info("wrote %d rows to %s", len(rows), path)
        return path

    # ------------------------------------------------------------------
    # certification
    # ------------------------------------------------------------------

    @staticmethod
    def random_mesh(rng: np.random.Generator, n: int, r_low: float, r_high: float) -> TimeMesh:
        """Mesh of n steps on [0, 1] with ratios drawn uniformly from [r_low, r_high]"""
        ratios = rng.uniform(r_low, r_high, size=n - 1)
        steps = np.concatenate(([1.0], np.cumprod(ratios)))
        levels = np.concatenate(([0.0], np.cumsum(steps)))
        return TimeMesh(levels=levels / levels[-1])

    @staticmethod
    def admissible_ceiling(alpha: float) -> float:
        return min(RATIO_CEILING, MeshController.r_star(alpha) - 0.01)

    @staticmethod
    def quadrature_coefficients(mesh: TimeMesh, n: int, alpha: float) -> Dict[str, np.ndarray]:
        """
        a, eta, I, J of level n by adaptive quadrature of their defining integrals

        The endpoint singularity of the k = n integrals is handled with the
        algebraic weight (t_n - s)^(-alpha). Arrays are lag indexed; J[0] is nan.
        """
        t = mesh.levels
        t_n = t[n]
        g1, g0 = gamma(1.0 - alpha), gamma(-alpha)
        out = {name: np.empty(n) for name in ("a", "eta", "I", "J")}
        out["J"][0] = np.nan
        for j in range(n):
            k = n - j
            lo, hi = t[k - 1], t[k]
            tau = hi - lo
            if k == n:
                weight = {"weight": "alg", "wvar": (0.0, -alpha)}
                out["a"][j] = _quad(lambda s: 1.0 / g1, lo, hi, **weight) / tau
                out["I"][j] = _quad(lambda s: -1.0 / (tau * g0), lo, hi, **weight)
                out["eta"][j] = _quad(
                    lambda s: -1.0 / (tau ** 2 * g0), lo, hi, weight="alg", wvar=(1.0, -alpha)
                )
                continue

            def kernel(s: float) -> float:
                return (t_n - s) ** (-alpha - 1.0) / g0

            out["a"][j] = _quad(lambda s: (t_n - s) ** (-alpha) / g1, lo, hi) / tau
            out["I"][j] = _quad(lambda s: (s - hi) / tau * kernel(s), lo, hi)
            out["J"][j] = _quad(lambda s: (lo - s) / tau * kernel(s), lo, hi)
            out["eta"][j] = -_quad(lambda s: (s - lo) * (hi - s) * kernel(s), lo, hi) / tau ** 2
        return out

    @staticmethod
    def _suite_bound_constants() -> SuiteResult:
        suite = SuiteResult(name="bound_constants", trials=1)
        R = MeshController.R_star()
        suite.record(5e-4 - abs(R - 0.4753), 0.0)
        suite.record(-abs(MeshController.g4(R)), 1e-12)
        suite.record(1e-3 - abs(MeshController.r_star(1.0) - 4.864), 0.0)
        for alpha in np.linspace(0.01, 0.99, 99):
            r_upper = MeshController.r_star(alpha)
            suite.record(r_upper - 4.659, 0.0)
            suite.record(-abs(MeshController.g1(r_upper, alpha)) / r_upper ** 2, 1e-12)
            suite.record(MeshController.gamma_max(alpha) - (3.0 - alpha), 0.0)
        return suite

    @staticmethod
    def _suite_g_functions(rng: np.random.Generator, trials: int) -> SuiteResult:
        suite = SuiteResult(name="g_functions", trials=trials)
        for _ in range(trials):
            alpha = float(rng.uniform(0.01, 0.99))
            r_upper = MeshController.r_star(alpha)
            x, y = rng.uniform(0.0, r_upper, size=2)
            suite.record(DgsController.g_func(x, y, alpha), 0.0)
            suite.record(-abs(DgsController.g_func(r_upper, r_upper, alpha)), 1e-10)
            z = np.sort(rng.uniform(0.0, 10.0, size=8))
            values = np.array([DgsController.g5_check(v, alpha) for v in z])
            suite.record(float(values.min()), 0.0)
            suite.record(float(np.diff(values).min()), 1e-14)
        return suite

    @staticmethod
    def _suite_kernel_oracle(rng: np.random.Generator, trials: int) -> SuiteResult:
        suite = SuiteResult(name="kernel_oracle", trials=trials)
        for trial in range(trials):
            alpha = ORACLE_ALPHAS[trial % len(ORACLE_ALPHAS)]
            n = int(rng.integers(2, 31))
            mesh = ExperimentController.random_mesh(rng, n, 0.5, 2.0)
            row = KernelController.build_kernel_row(mesh, n, alpha)
            exact = ExperimentController.quadrature_coefficients(mesh, n, alpha)
            closed = {
                "a": row.a,
                "eta": row.eta,
                "I": np.array([KernelController.bridging_integrals(mesh, n, n - j, alpha).I for j in range(n)]),
                "J": np.array(
                    [np.nan] + [KernelController.bridging_integrals(mesh, n, n - j, alpha).J for j in range(1, n)]
                ),
            }
            for name, reference in exact.items():
                mask = np.isfinite(reference)
                error = np.abs(closed[name][mask] - reference[mask]) / np.abs(reference[mask])
                suite.record(-float(error.max()), ORACLE_TOL)
        return suite

    @staticmethod
    def _record_report(suite: SuiteResult, report, tolerances: Dict[str, float]) -> None:
        for family, margin in report.worst_margins.items():
            suite.record(margin, tolerances.get(family, KERNEL_TOL))

    @staticmethod
    def _suite_bridging(rng: np.random.Generator, trials: int) -> SuiteResult:
        suite = SuiteResult(name="bridging_and_eta", trials=trials)
        tolerances = {"identity_i": IDENTITY_TOL, "identity_ii": IDENTITY_TOL}
        for trial in range(trials):
            alpha = VERIFY_ALPHAS[trial % len(VERIFY_ALPHAS)]
            n = int(rng.integers(3, 41))
            mesh = ExperimentController.random_mesh(
                rng, n, MeshController.R_star(), ExperimentController.admissible_ceiling(alpha)
            )
            ExperimentController._record_report(
                suite, KernelController.check_bridging_lemmas(mesh, alpha, n), tolerances
            )
            ExperimentController._record_report(suite, KernelController.check_eta_lemmas(mesh, alpha, n), {})
        return suite

    @staticmethod
    def _suite_kernel_properties(rng: np.random.Generator, trials: int) -> SuiteResult:
        suite = SuiteResult(name="kernel_properties", trials=trials * len(VERIFY_ALPHAS))
        for alpha in VERIFY_ALPHAS:
            ceiling = ExperimentController.admissible_ceiling(alpha)
            for _ in range(trials):
                n = int(rng.integers(3, 41))
                mesh = ExperimentController.random_mesh(rng, n, MeshController.R_star(), ceiling)
                report = KernelController.check_kernel_properties(mesh, alpha, n)
                if not report.hypothesis_ok:
                    suite.skipped += 1
                    continue
                ExperimentController._record_report(suite, report, {})
        return suite

    @staticmethod
    def telescoping_residual(
        kernel: np.ndarray, kernel_prev: np.ndarray, w: np.ndarray, sigma: float
    ) -> float:
        """
        Residual of 2 w_n sum chi w = Y[w_n] - Y[w_{n-1}] + sigma chi_0 w_n^2 + Y_R[w_n]
        for positive rows chi of levels n and n-1, relative to the left-hand scale
        """
        modified = np.array(kernel, dtype=float)
        modified[0] *= 2.0 - sigma
        modified_prev = np.array(kernel_prev, dtype=float)
        modified_prev[0] *= 2.0 - sigma
        lhs = 2.0 * w[-1] * float(np.dot(np.asarray(kernel)[::-1], w))
        terms = np.array(
            [
                DgsController.Y_functional(modified, w),
                -DgsController.Y_functional(modified_prev, w[:-1]),
                sigma * kernel[0] * w[-1] ** 2,
                DgsController.Y_remainder(modified, modified_prev, w),
            ]
        )
        scale = abs(lhs) + float(np.abs(terms).sum())
        return abs(lhs - terms.sum()) / scale if scale > 0 else 0.0

    @staticmethod
    def _suite_telescoping(rng: np.random.Generator, trials: int) -> SuiteResult:
        suite = SuiteResult(name="dgs_telescoping", trials=trials)
        for _ in range(trials):
            n = int(rng.integers(2, 41))
            kernel = rng.uniform(0.1, 2.0, size=n)
            kernel_prev = rng.uniform(0.1, 2.0, size=n - 1)
            w = rng.normal(size=n)
            sigma = float(rng.uniform(0.0, 2.0))
            residual = ExperimentController.telescoping_residual(kernel, kernel_prev, w, sigma)
            suite.record(-residual, IDENTITY_TOL)
        return suite

    @staticmethod
    def _suite_dgs(rng: np.random.Generator, trials: int, inject_bad_mesh: bool) -> Dict[str, SuiteResult]:
        nonlocal_suite = SuiteResult(name="dgs_nonlocal", trials=trials)
        local_suite = SuiteResult(name="dgs_local", trials=trials)
        full_suite = SuiteResult(name="dgs_full", trials=trials)
        for trial in range(trials):
            alpha = VERIFY_ALPHAS[trial % len(VERIFY_ALPHAS)]
            n = int(rng.integers(2, 40))
            ceiling = ExperimentController.admissible_ceiling(alpha)
            mesh = ExperimentController.random_mesh(rng, n + 1, MeshController.R_star(), ceiling)
            v = np.concatenate(([0.0], np.cumsum(rng.normal(size=n))))
            w = np.diff(v)
            margin = DgsController.dgs_nonlocal_check(mesh, alpha, w, n)
            nonlocal_scale = float(np.dot(w, w)) * mesh.tau(n) ** (-alpha) / gamma(2.0 - alpha)
            nonlocal_suite.record(margin / max(nonlocal_scale, 1e-300), DGS_TOL)
            report = DgsController.dgs_full_check(mesh, alpha, v, n)
            if not report.hypothesis_ok:
                full_suite.skipped += 1
            else:
                full_suite.record(report.relative_margin, DGS_TOL)
            local = DgsController.dgs_local_check(mesh, alpha, v, n)
            local_scale = (w[-1] ** 2 + w[-2] ** 2) * mesh.tau(n) ** (-alpha) / gamma(2.0 - alpha)
            local_suite.record(local / local_scale, DGS_TOL)

        suites = {s.name: s for s in (nonlocal_suite, local_suite, full_suite)}
        if inject_bad_mesh:
            suites["injected_bad_mesh"] = ExperimentController._suite_bad_mesh(rng)
        return suites

    @staticmethod
    def _suite_bad_mesh(rng: np.random.Generator) -> SuiteResult:
        """A mesh whose middle ratio exceeds r*(alpha): the row must be flagged and skipped"""
        suite = SuiteResult(name="injected_bad_mesh", trials=1)
        alpha = 0.5
        levels = np.concatenate(([0.0], np.cumsum([1.0, 1.0, 1.2 * MeshController.r_star(alpha), 1.0, 1.0])))
        mesh = TimeMesh(levels=levels)
        v = np.concatenate(([0.0], np.cumsum(rng.normal(size=4))))
        report = DgsController.dgs_full_check(mesh, alpha, v, 4)
        if report.hypothesis_ok:
            suite.violations += 1
            suite.notes.append("ratio above r*(alpha) was not flagged")
        else:
            suite.skipped += 1
            suite.notes.append(f"hypothesis violation flagged; margin {report.margin:.3e} not judged")
        return suite

    @staticmethod
    def run_verify(seed: int, trials: int = 1000, oracle_trials: int = 100, inject_bad_mesh: bool = False) -> VerifyReport:
        """
        Run every certification suite

        Args:
            seed: Seed of the random meshes and sequences
            trials: Random meshes per randomized suite (per alpha for kernel properties)
            oracle_trials: Meshes compared against quadrature
            inject_bad_mesh: Add a mesh violating the ratio condition

        Returns:
            VerifyReport; passed is False when any suite has a violation
        """
        rng = np.random.default_rng(seed)
        suites: Dict[str, SuiteResult] = {}
        runners = [
            lambda: ExperimentController._suite_bound_constants(),
            lambda: ExperimentController._suite_g_functions(rng, trials),
            lambda: ExperimentController._suite_kernel_oracle(rng, oracle_trials),
            lambda: ExperimentController._suite_bridging(rng, trials),
            lambda: ExperimentController._suite_kernel_properties(rng, trials),
            lambda: ExperimentController._suite_telescoping(rng, trials),
        ]
        for runner in runners:
            suite = runner()
            suites[suite.name] = suite
            ExperimentController._log_suite(suite)
        for suite in ExperimentController._suite_dgs(rng, trials, inject_bad_mesh).values():
            suites[suite.name] = suite
            ExperimentController._log_suite(suite)
        return VerifyReport(seed=seed, passed=all(s.passed for s in suites.values()), suites=suites)

    @staticmethod
    def _log_suite(suite: SuiteResult) -> None:
        log = logger.info if suite.passed else logger.error
        log(
            "suite %s: %s (%d checks, %d skipped, %d violations, worst margin %s)",
            suite.name,
            "pass" if suite.passed else "FAIL",
            suite.checks,
            suite.skipped,
            suite.violations,
            "n/a" if suite.worst_margin is None else f"{suite.worst_margin:.3e}",
        )

    @staticmethod
    def write_verify_report(report: VerifyReport, path: Union[str, Path]) -> Path:
        """
        Write the JSON report and fail when a suite did not pass

        Raises:
            VerificationFailure: the report contains a violation (after writing it)
        """
        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(report.model_dump_json(indent=2))
        except OSError as e:
            raise ConfigError(f"cannot write verify report {path}: {e}") from e
        if not report.passed:
            failed = [name for name, suite in report.suites.items() if not suite.passed]
            raise VerificationFailure(f"certification failed in {failed}; see {path}")
        return path

    # ------------------------------------------------------------------
    # convergence
    # ------------------------------------------------------------------

    @staticmethod
    def converge_once(config: RunConfig, alpha: float, gamma_exp: float, N: int) -> float:
        """Discrete L2 error at T of the manufactured solution on t_k = T (k/N)^gamma"""
        params = ExperimentController.model_params(config, alpha)
        T = config.converge.T
        mesh = MeshController.graded_mesh(T, N, gamma_exp)
        state = SolverController.initial_state(params, Field2D.zeros(config.grid), mesh)
        SolverController.run_mesh(state, params, forcing=lambda t, g: SolverController.manufactured_forcing(params, t, g))
        exact = SolverController.manufactured_solution(params, T, config.grid)
        return SpectralController.l2_norm(Field2D(values=state.phi - exact.values, grid=config.grid))

    @staticmethod
    def run_converge(
        config: RunConfig, alpha: Optional[float] = None, gamma_exp: Optional[float] = None
    ) -> List[ConvergenceRow]:
        """
        Error sweep over N = N_base 2^(m-1); the order on row m compares it with row m-1

        Returns:
            One ConvergenceRow per N
        """
        alpha = config.model.alpha if alpha is None else alpha
        gamma_exp = config.converge.gamma if gamma_exp is None else gamma_exp
        expected = min(gamma_exp, 3.0 - alpha)
        rows: List[ConvergenceRow] = []
        previous = None
        for m in range(config.converge.refinements):
            N = config.converge.N_base * 2 ** m
            error = ExperimentController.converge_once(config, alpha, gamma_exp, N)
            order = None if previous is None or error <= 0 else math.log2(previous / error)
            mesh_tau = config.converge.T * (1.0 - (1.0 - 1.0 / N) ** gamma_exp)
            rows.append(
                ConvergenceRow(
                    alpha=alpha,
                    gamma=gamma_exp,
                    N=N,
                    tau_max=mesh_tau,
                    error=error,
                    order=order,
                    expected_order=expected,
                )
            )
            logger.info(
                "alpha=%.3f gamma=%.2f N=%d error=%.4e order=%s",
                alpha, gamma_exp, N, error, "-" if order is None else f"{order:.3f}",
            )
            previous = error
        return rows

    # ------------------------------------------------------------------
    # simulation
    # ------------------------------------------------------------------

    @staticmethod
    def initial_field(config: RunConfig, seed: Optional[int] = None) -> Field2D:
        """Initial data: uniform noise in [-amplitude, amplitude], a smooth profile, or zero"""
        grid, solver = config.grid, config.solver
        if solver.initial == InitialData.ZERO:
            return Field2D.zeros(grid)
        if solver.initial == InitialData.SMOOTH:
            x, y = grid.coordinates()
            kx, ky = 2.0 * np.pi / grid.Lx, 2.0 * np.pi / grid.Ly
            profile = np.sin(kx * x) * np.sin(ky * y) + 0.5 * np.cos(2.0 * kx * x) * np.cos(ky * y)
            return Field2D(values=solver.amplitude * profile, grid=grid)
        rng = np.random.default_rng(solver.seed if seed is None else seed)
        return Field2D(values=rng.uniform(-solver.amplitude, solver.amplitude, size=grid.shape), grid=grid)

    @staticmethod
    def simulation_mesh(config: RunConfig, alpha: float) -> TimeMesh:
        """Initial mesh of a simulate run; adaptive runs start from the graded prefix"""
        mesh = config.mesh
        if mesh.mode == MeshMode.UNIFORM:
            return MeshController.uniform_mesh(mesh.T, max(1, math.ceil(mesh.T / mesh.tau_max - 1e-12)))
        if mesh.mode == MeshMode.GRADED:
            return MeshController.composite_mesh(
                mesh.T0, mesh.N0, mesh.gamma, mesh.T, mesh.tau_max, alpha, mesh.ratio_cap
            )
        return MeshController.graded_mesh(mesh.T0, mesh.N0, mesh.gamma, alpha)

    @staticmethod
    def _snapshot_callback(
        config: RunConfig, alpha: float, directory: Path
    ) -> Callable[[SolverState], None]:
        pending = sorted(config.output.snapshot_times)

        def write(state: SolverState) -> None:
            # first level at or past each requested time
            while pending and state.t >= pending[0] * (1.0 - 1e-12):
                requested = pending.pop(0)
                SpectralController.write_snapshot(state.field, state.t, alpha, directory, f"phi_t{requested:g}")

        return write

    @staticmethod
    def summarize(state: SolverState) -> dict:
        """Structure-preservation diagnostics of a finished run"""
        volumes = np.array([entry.volume for entry in state.ledger])
        e_alpha = [entry.E_alpha for entry in state.ledger]
        increases = 0
        for record in state.records:
            m = record.n
            if not record.energy_bound_ok or m >= len(e_alpha) or e_alpha[m] is None or e_alpha[m - 1] is None:
                continue
            if e_alpha[m] > e_alpha[m - 1] * (1.0 + 1e-12) + 1e-14:
                increases += 1
        ratio_flags = [r.ratio_ok for r in state.records if r.ratio_ok is not None]
        return {
            "scheme": state.scheme.value,
            "steps": state.n,
            "t_final": state.t,
            "volume_drift": float(np.max(np.abs(volumes - state.volume0))),
            "ratio_violations": int(sum(not ok for ok in ratio_flags)),
            "solvability_violations": int(sum(not r.solvable_ok for r in state.records)),
            "energy_bound_violations": int(sum(r.energy_bound_ok is False for r in state.records)),
            "e_alpha_increases_under_bound": increases,
            "tau_min": float(min(r.tau for r in state.records)) if state.records else 0.0,
            "tau_max": float(max(r.tau for r in state.records)) if state.records else 0.0,
            "max_fp_iterations": int(max((r.fp_iterations for r in state.records), default=0)),
        }

    @staticmethod
    def run_simulation(
        config: RunConfig, outdir: Union[str, Path], scheme: Scheme = Scheme.FBDF2
    ) -> dict:
        """
        Coarsening run writing ledger, per-step records, mesh, snapshots and summary.json

        Returns:
            The summary dictionary
        """
        outdir = Path(outdir)
        alpha = config.model.alpha
        params = ExperimentController.model_params(config)
        mesh = ExperimentController.simulation_mesh(config, alpha)
        state = SolverController.initial_state(params, ExperimentController.initial_field(config), mesh, scheme)
        callback = ExperimentController._snapshot_callback(config, alpha, outdir / config.output.snapshot_dir)
        callback(state)
        logger.info(
            "simulate alpha=%.3f mode=%s grid=%dx%d T=%g initial steps=%d",
            alpha, config.mesh.mode.value, config.grid.Mx, config.grid.My, config.mesh.T, mesh.N,
        )
        if config.mesh.mode == MeshMode.ADAPTIVE:
            SolverController.run_adaptive(
                state,
                params,
                config.mesh.T,
                config.mesh.tau_min,
                config.mesh.tau_max,
                config.mesh.eta_user,
                config.mesh.ratio_cap,
                callback=callback,
            )
        else:
            SolverController.run_mesh(state, params, callback=callback)

        SolverController.write_ledger_csv(state, outdir / config.output.ledger_csv)
        SolverController.write_steps_csv(state, outdir / config.output.steps_csv)
        MeshController.write_mesh_csv(state.mesh, outdir / config.output.mesh_csv)
        summary = {"alpha": alpha, **ExperimentController.summarize(state)}
        try:
            (outdir / "summary.json").write_text(json.dumps(summary, indent=2))
        except OSError as e:
            raise ConfigError(f"cannot write summary in {outdir}: {e}") from e
        logger.info("simulate finished: %s", summary)
        return summary

    # ------------------------------------------------------------------
    # asymptotic compatibility
    # ------------------------------------------------------------------

    @staticmethod
    def final_field(config: RunConfig, mesh: TimeMesh, scheme: Scheme, alpha: float) -> np.ndarray:
        params = ExperimentController.model_params(config, alpha)
        state = SolverController.initial_state(params, ExperimentController.initial_field(config), mesh, scheme)
        return SolverController.run_mesh(state, params).phi

    @staticmethod
    def run_compat(config: RunConfig, alphas: Sequence[float], N: int = 100) -> List[CompatRow]:
        """
        Distance of FBDF2(alpha) from BDF2 at T on a shared uniform mesh, with max |a_hat|

        Returns:
            One CompatRow per alpha
        """
        mesh = MeshController.uniform_mesh(config.mesh.T, N)
        reference = ExperimentController.final_field(config, mesh, Scheme.BDF2, config.model.alpha)
        rows = []
        for alpha in alphas:
            phi = ExperimentController.final_field(config, mesh, Scheme.FBDF2, alpha)
            distance = SpectralController.l2_norm(Field2D(values=phi - reference, grid=config.grid))
            a_hat = KernelController.build_kernel_row(mesh, N, alpha).a_hat
            rows.append(CompatRow(alpha=alpha, distance=distance, max_abs_a_hat=float(np.max(np.abs(a_hat)))))
            logger.info("alpha=%.4f distance to BDF2 %.4e max|a_hat| %.4e", alpha, distance, rows[-1].max_abs_a_hat)
        return rows

    # ------------------------------------------------------------------
    # kernel dump
    # ------------------------------------------------------------------

    @staticmethod
    def run_kernels(
        config: RunConfig,
        path: Union[str, Path],
        mesh_csv: Optional[str] = None,
        up_to_n: Optional[int] = None,
    ) -> Path:
        """Dump the kernel rows of a mesh read from CSV or of the configured graded mesh"""
        try:
            if mesh_csv:
                mesh = MeshController.read_mesh_csv(mesh_csv)
            else:
                mesh = MeshController.graded_mesh(
                    config.mesh.T0, config.mesh.N0, config.mesh.gamma, config.model.alpha
                )
            if up_to_n is not None and up_to_n > mesh.N:
                raise ConfigError(f"mesh has {mesh.N} levels, cannot dump {up_to_n}")
            return KernelController.dump_rows_csv(mesh, config.model.alpha, path, up_to_n)
        except TfchError:
            raise
        except Exception as e:
            raise ConfigError(f"kernel dump failed: {e}") from e
