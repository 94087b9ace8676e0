"""
Solver Controller - implicit variable-step FBDF2 (and BDF2 reference) stepping
for the time-fractional Cahn-Hilliard equation with Fourier collocation in space
"""
import csv
import logging
from pathlib import Path
from typing import Callable, Mapping, Optional, Tuple, Union

import numpy as np
from scipy.special import gamma

import settings
from controllers.dgs_controller import DgsController
from controllers.kernel_controller import KernelController
from controllers.mesh_controller import MeshController, RATIO_MARGIN
from controllers.spectral_controller import SpectralController, SpectralPlan, spectral_plan
from errors import ConfigError, HistoryMismatchError, SolverFailure, TfchError
from models.field_models import EnergyLedgerEntry, Field2D, Grid2D
from models.kernel_models import KernelRow
from models.mesh_models import TimeMesh
from models.solver_models import IncrementHistory, ModelParams, Scheme, SolverState, StepRecord

logger = logging.getLogger(__name__)

Forcing = Callable[[float, Grid2D], Union[Field2D, np.ndarray]]
StepCallback = Callable[[SolverState], None]


def _forcing_hat(plan: SpectralPlan, forcing: Optional[Forcing], t: float, grid: Grid2D):
    if forcing is None:
        return 0.0
    values = forcing(t, grid)
    values = values.values if isinstance(values, Field2D) else np.asarray(values, dtype=float)
    return plan.forward(values)


class SolverController:
    """Controller for time stepping, step-size safeguards and run loops"""

    @staticmethod
    def _order(params: ModelParams, scheme: Scheme) -> float:
        return 1.0 if scheme == Scheme.BDF2 else params.alpha

    @staticmethod
    def solvability_max_step(params: ModelParams, r_n: float, alpha: Optional[float] = None) -> float:
        """
        Largest tau_n keeping the nonlinear system uniquely solvable

        Args:
            params: Model parameters
            r_n: Current step ratio (0 at the first level)
            alpha: Order override, 1 gives the BDF2 bound

        Returns:
            [4 eps^2 (2 - alpha + 2 r_n) / (kappa (1 + r_n) Gamma(3 - alpha))]^(1/alpha)
        """
        alpha = params.alpha if alpha is None else alpha
        base = 4.0 * params.eps ** 2 * (2.0 - alpha + 2.0 * r_n) / (
            params.kappa * (1.0 + r_n) * gamma(3.0 - alpha)
        )
        return float(base ** (1.0 / alpha))

    @staticmethod
    def energy_step_bound(
        params: ModelParams, r_n: float, r_np1: float, alpha: Optional[float] = None
    ) -> Optional[float]:
        """
        Step bound of the discrete energy law, or None where g(r_n, r_{n+1}, alpha) <= 0

        Returns:
            [4 eps^2 g(r_n, r_{n+1}, alpha) / (kappa Gamma(3 - alpha))]^(1/alpha)
        """
        alpha = params.alpha if alpha is None else alpha
        weight = DgsController.g_func(r_n, r_np1, alpha)
        if weight <= 0.0:
            return None
        base = 4.0 * params.eps ** 2 * weight / (params.kappa * gamma(3.0 - alpha))
        return float(base ** (1.0 / alpha))

    @staticmethod
    def initial_state(
        params: ModelParams,
        phi0: Union[Field2D, np.ndarray],
        mesh: TimeMesh,
        scheme: Scheme = Scheme.FBDF2,
    ) -> SolverState:
        """
        State at level 0 on a mesh whose first step is already fixed

        Args:
            params: Model parameters
            phi0: Initial field
            mesh: Mesh with at least one step; may be extended later
            scheme: FBDF2 or the BDF2 reference

        Returns:
            SolverState with the level-0 ledger entry
        """
        grid = params.grid
        values = phi0.values if isinstance(phi0, Field2D) else np.asarray(phi0, dtype=float)
        if values.shape != grid.shape:
            raise ConfigError(f"initial field shape {values.shape} does not match grid {grid.shape}")
        plan = spectral_plan(grid)
        phi = np.array(values, dtype=float)
        phi_hat = plan.forward(phi)
        state = SolverState(
            scheme=scheme,
            grid=grid,
            phi=phi,
            phi_hat=phi_hat,
            mesh=mesh,
            increments=IncrementHistory(plan.spectral_shape, capacity=max(mesh.N, 16)),
            volume0=float(np.mean(phi)),
        )
        energy = SpectralController.energy_from_hat(plan, phi, phi_hat, params.eps)
        # G vanishes without history, so E_alpha = E at level 0
        state.ledger.append(
            EnergyLedgerEntry(
                n=0,
                t=float(mesh.levels[0]),
                E=energy,
                E_alpha=energy,
                tau=0.0,
                volume=state.volume0,
            )
        )
        return state

    @staticmethod
    def _history_hat(state: SolverState, B: np.ndarray, n: int) -> np.ndarray:
        if n == 1:
            return np.zeros(spectral_plan(state.grid).spectral_shape, dtype=complex)
        spectra = state.increments.spectra
        if len(spectra) < n - 1:
            raise HistoryMismatchError(f"level {n} needs {n - 1} stored increments, got {len(spectra)}")
        return np.tensordot(B[1:n][::-1], spectra[: n - 1], axes=1)

    @staticmethod
    def history_term(
        state: SolverState, rows: Union[KernelRow, Mapping[int, KernelRow]], n: int
    ) -> Field2D:
        """
        Memory term sum_{k=1}^{n-1} B^{(n)}_{n-k} grad phi^k of level n

        Args:
            state: Solver state holding at least n-1 increments
            rows: Kernel row of level n, or a mapping n -> KernelRow
            n: Level >= 1

        Returns:
            Field2D (zero for n = 1)
        """
        row = rows if isinstance(rows, KernelRow) else rows.get(n)
        if row is None or row.n != n:
            raise HistoryMismatchError(f"no kernel row for level {n}")
        plan = spectral_plan(state.grid)
        return Field2D(values=plan.backward(SolverController._history_hat(state, row.B, n)), grid=state.grid)

    @staticmethod
    def _solve_level(
        state: SolverState,
        params: ModelParams,
        b0: float,
        history_hat: np.ndarray,
        forcing: Optional[Forcing],
    ) -> Tuple[np.ndarray, np.ndarray, int, float]:
        """
        Stabilized fixed point for (b0 + kappa eps^2 |k|^4) phi = b0 phi^{n-1} - L + kappa Lap f(phi) - g

        Iteration stops once the update is below fp_tol and the equation residual
        b0 (phi - phi^{n-1}) + L - kappa Lap mu + g is below fp_tol too, or has
        stopped decreasing at round-off level.

        Returns:
            (phi, phi_hat, iterations, max-norm equation residual)
        """
        plan = spectral_plan(state.grid)
        n = state.n + 1
        t_n = float(state.mesh.levels[n])
        kappa, eps, stab = params.kappa, params.eps, params.fp_stabilizer
        multiplier = b0 + kappa * eps ** 2 * plan.k4 + kappa * stab * plan.k2
        forcing_hat = _forcing_hat(plan, forcing, t_n, state.grid)
        base = b0 * state.phi_hat - history_hat - forcing_hat

        def equation_residual(phi_hat: np.ndarray, nonlinear_hat: np.ndarray) -> float:
            mu_hat = nonlinear_hat + eps ** 2 * plan.k2 * phi_hat
            residual_hat = b0 * (phi_hat - state.phi_hat) + history_hat + forcing_hat + kappa * plan.k2 * mu_hat
            return float(np.max(np.abs(plan.backward(residual_hat))))

        phi, phi_hat = state.phi, state.phi_hat
        nonlinear_hat = plan.forward(phi ** 3 - phi)
        residual = previous = np.inf
        for iteration in range(1, params.fp_max_iters + 1):
            new_phi = plan.backward((base - kappa * plan.k2 * (nonlinear_hat - stab * phi_hat)) / multiplier)
            update = float(np.max(np.abs(new_phi - phi)))
            if not np.isfinite(update):
                raise SolverFailure(
                    f"non-finite iterate at level {n}",
                    diagnostics={"n": n, "t": t_n, "iteration": iteration},
                )
            phi, phi_hat = new_phi, plan.forward(new_phi)
            nonlinear_hat = plan.forward(phi ** 3 - phi)
            if update <= params.fp_tol:
                residual = equation_residual(phi_hat, nonlinear_hat)
                if residual <= params.fp_tol or residual >= previous:
                    break
                previous = residual
        else:
            raise SolverFailure(
                f"fixed point did not converge at level {n} after {params.fp_max_iters} iterations",
                diagnostics={"n": n, "t": t_n, "last_update": update, "residual": residual, "b0": b0},
            )
        return phi, phi_hat, iteration, residual

    @staticmethod
    def _close_previous_level(state: SolverState, params: ModelParams, alpha: float) -> None:
        """Fill E_alpha and the energy-bound verdict of level n now that r_{n+1} is known"""
        m = state.n
        if m == 0:
            return
        plan = spectral_plan(state.grid)
        mesh = state.mesh
        entry = state.ledger[-1]
        if state.scheme == Scheme.BDF2:
            e_alpha = SpectralController.bdf2_energy(
                plan, state.phi, state.phi_hat, state.increments.spectra[m - 1],
                mesh.tau(m), mesh.tau(m + 1), params.kappa, params.eps,
            )
        else:
            row = state.kernel_rows[m]
            history = SpectralController.history_functional(
                plan, state.increments.spectra[:m], row.A, mesh.tau(m), mesh.ratio(m + 1), alpha
            )
            e_alpha = entry.E + history / params.kappa
        state.ledger[-1] = entry.model_copy(update={"E_alpha": e_alpha})

        if m >= 2:
            bound = SolverController.energy_step_bound(params, mesh.ratio(m), mesh.ratio(m + 1), alpha)
            ok = bound is not None and mesh.tau(m) <= bound
            record = state.records[m - 1]
            state.records[m - 1] = record.model_copy(update={"energy_bound": bound, "energy_bound_ok": ok})
            if not ok:
                logger.warning(
                    "energy step bound violated at level %d: tau=%.3e bound=%s", m, mesh.tau(m), bound
                )

    @staticmethod
    def _advance(
        state: SolverState,
        params: ModelParams,
        forcing: Optional[Forcing],
    ) -> SolverState:
        n = state.n + 1
        mesh = state.mesh
        if mesh.N < n:
            raise HistoryMismatchError(f"mesh has no level {n}; choose tau_{n} first")
        alpha = SolverController._order(params, state.scheme)
        tau_n, r_n = mesh.tau(n), mesh.ratio(n)

        if state.scheme == Scheme.BDF2:
            if n == 1:
                b0 = 1.0 / tau_n
                history_hat = np.zeros(spectral_plan(state.grid).spectral_shape, dtype=complex)
            else:
                b0 = (1.0 + 2.0 * r_n) / ((1.0 + r_n) * tau_n)
                history_hat = -(r_n ** 2) / ((1.0 + r_n) * tau_n) * state.increments.spectra[n - 2]
        else:
            row = KernelController.build_kernel_row(mesh, n, alpha)
            state.kernel_rows[n] = row
            b0, history_hat = float(row.B[0]), SolverController._history_hat(state, row.B, n)

        SolverController._close_previous_level(state, params, alpha)

        solvable = SolverController.solvability_max_step(params, r_n, alpha)
        if tau_n > solvable:
            logger.warning("tau_%d=%.3e exceeds the solvability bound %.3e", n, tau_n, solvable)

        phi, phi_hat, iterations, residual = SolverController._solve_level(
            state, params, b0, history_hat, forcing
        )
        stored_before = state.increments.nbytes
        state.increments.append(phi_hat - state.phi_hat)
        cap = settings.memory_cap_bytes()
        if stored_before <= cap < state.increments.nbytes:
            logger.warning(
                "increment history uses %.2f GiB, above the configured cap",
                state.increments.nbytes / 1024 ** 3,
            )
        state.phi, state.phi_hat, state.n = phi, phi_hat, n
        for stale in [k for k in state.kernel_rows if k < n - 1]:
            del state.kernel_rows[stale]

        plan = spectral_plan(state.grid)
        volume = float(np.mean(phi))
        state.ledger.append(
            EnergyLedgerEntry(
                n=n,
                t=float(mesh.levels[n]),
                E=SpectralController.energy_from_hat(plan, phi, phi_hat, params.eps),
                tau=tau_n,
                volume=volume,
            )
        )
        ratio_ok = None
        if n >= 2:
            bounds = MeshController.ratio_bounds(alpha)
            ratio_ok = bool(bounds.R_lower <= r_n < bounds.r_upper)
        state.records.append(
            StepRecord(
                n=n,
                t=float(mesh.levels[n]),
                tau=tau_n,
                ratio=r_n,
                fp_iterations=iterations,
                residual=residual,
                solvable_bound=solvable,
                solvable_ok=tau_n <= solvable,
                ratio_ok=ratio_ok,
            )
        )
        logger.debug(
            "level %d t=%.6g tau=%.3e r=%.3f iterations=%d residual=%.2e",
            n, mesh.levels[n], tau_n, r_n, iterations, residual,
        )
        return state

    @staticmethod
    def step(state: SolverState, params: ModelParams, forcing: Optional[Forcing] = None) -> SolverState:
        """
        Advance the FBDF2 scheme from level n-1 to level n

        The mesh must already hold level n. Before solving, the modified energy and
        the energy-bound verdict of level n-1 are completed, since r_n is now known.

        Args:
            state: Current state (mutated in place)
            params: Model parameters
            forcing: Optional g(t, grid) evaluated at t_n

        Returns:
            The updated state

        Raises:
            SolverFailure: fixed point exceeded fp_max_iters or produced non-finite values
        """
        if state.scheme != Scheme.FBDF2:
            raise ConfigError("step() drives FBDF2 states; use bdf2_reference_step for BDF2")
        return SolverController._advance(state, params, forcing)

    @staticmethod
    def bdf2_reference_step(
        state: SolverState, params: ModelParams, forcing: Optional[Forcing] = None
    ) -> SolverState:
        """Advance the variable-step BDF2 scheme (backward Euler at level 1)"""
        if state.scheme != Scheme.BDF2:
            raise ConfigError("bdf2_reference_step() drives BDF2 states")
        return SolverController._advance(state, params, forcing)

    @staticmethod
    def time_derivative_norm(state: SolverState) -> float:
        """L2 norm of (phi^n - phi^{n-1}) / tau_n"""
        if state.n == 0:
            return 0.0
        plan = spectral_plan(state.grid)
        increment = state.increments.spectra[state.n - 1]
        return float(np.sqrt(plan.quadratic(increment))) / state.mesh.tau(state.n)

    @staticmethod
    def adaptive_next_step(
        state: SolverState,
        params: ModelParams,
        tau_min: float,
        tau_max: float,
        eta_user: float,
        ratio_cap: Optional[float] = None,
    ) -> float:
        """
        Next step from the time-derivative indicator, clamped into the ratio window

        tau_ada = max(tau_min, tau_max / sqrt(1 + eta ||d_tau phi^n||^2)), then
        tau_{n+1} = min(max(tau_ada, R_* tau_n), r*(alpha) tau_n (1 - 1e-9)).

        Returns:
            tau_{n+1}
        """
        indicator = np.sqrt(1.0 + eta_user * SolverController.time_derivative_norm(state) ** 2)
        tau_ada = max(tau_min, tau_max / indicator)
        if state.n == 0:
            return tau_ada
        alpha = SolverController._order(params, state.scheme)
        bounds = MeshController.ratio_bounds(alpha, ratio_cap)
        tau_n = state.mesh.tau(state.n)
        return min(max(tau_ada, bounds.R_lower * tau_n), bounds.r_upper * tau_n * (1.0 - RATIO_MARGIN))

    @staticmethod
    def _stepper(state: SolverState):
        return SolverController.bdf2_reference_step if state.scheme == Scheme.BDF2 else SolverController.step

    @staticmethod
    def run_mesh(
        state: SolverState,
        params: ModelParams,
        forcing: Optional[Forcing] = None,
        callback: Optional[StepCallback] = None,
    ) -> SolverState:
        """Step through every remaining level of the state's mesh"""
        stepper = SolverController._stepper(state)
        try:
            while state.n < state.mesh.N:
                stepper(state, params, forcing)
                if callback is not None:
                    callback(state)
        except TfchError:
            raise
        except Exception as e:
            raise SolverFailure(f"run failed at level {state.n + 1}: {e}") from e
        return state

    @staticmethod
    def run_adaptive(
        state: SolverState,
        params: ModelParams,
        T: float,
        tau_min: float,
        tau_max: float,
        eta_user: float,
        ratio_cap: Optional[float] = None,
        forcing: Optional[Forcing] = None,
        callback: Optional[StepCallback] = None,
    ) -> SolverState:
        """
        Finish the prescribed mesh, then grow it adaptively until T

        Every adaptive step goes through MeshController.step_towards, so the run
        lands on T with every ratio inside the window. A T closer to the end of
        the prescribed mesh than R_* times its last step moves that last level
        to T before stepping.
        """
        bounds = MeshController.ratio_bounds(SolverController._order(params, state.scheme), ratio_cap)
        mesh = state.mesh
        short = 0.0 < T - mesh.T < bounds.R_lower * (1.0 + RATIO_MARGIN) * mesh.tau(mesh.N)
        if short and state.n < mesh.N:
            state.mesh = TimeMesh(
                levels=MeshController.absorb_short_remainder(mesh.levels, T, bounds), grading=mesh.grading
            )
        elif short:
            logger.warning("T=%.6g lies %.3e past a finished mesh; the closing ratio will fall below R_*", T, T - mesh.T)
        SolverController.run_mesh(state, params, forcing, callback)
        stepper = SolverController._stepper(state)
        try:
            while state.t < T * (1.0 - 1e-12):
                tau = SolverController.adaptive_next_step(state, params, tau_min, tau_max, eta_user, ratio_cap)
                tau = MeshController.step_towards(T - state.t, tau, state.mesh.tau(state.n), bounds)
                state.mesh = state.mesh.extend(tau)
                stepper(state, params, forcing)
                if callback is not None:
                    callback(state)
        except TfchError:
            raise
        except Exception as e:
            raise SolverFailure(f"adaptive run failed at level {state.n + 1}: {e}") from e
        return state

    @staticmethod
    def manufactured_solution(params: ModelParams, t: float, grid: Grid2D) -> Field2D:
        """omega_{1+alpha}(t) sin x sin y (zero at t = 0)"""
        x, y = grid.coordinates()
        amplitude = KernelController.omega(1.0 + params.alpha, t) if t > 0 else 0.0
        return Field2D(values=amplitude * np.sin(x) * np.sin(y), grid=grid)

    @staticmethod
    def manufactured_forcing(params: ModelParams, t: float, grid: Grid2D) -> Field2D:
        """
        Forcing g = kappa Lap mu(Phi) - D^alpha Phi for the exact solution Phi

        The Caputo derivative of omega_{1+alpha}(t) is 1, so D^alpha Phi = sin x sin y.
        """
        plan = spectral_plan(grid)
        x, y = grid.coordinates()
        profile = np.sin(x) * np.sin(y)
        phi = SolverController.manufactured_solution(params, t, grid).values
        phi_hat = plan.forward(phi)
        mu_hat = plan.forward(phi ** 3 - phi) + params.eps ** 2 * plan.k2 * phi_hat
        return Field2D(values=plan.backward(-params.kappa * plan.k2 * mu_hat) - profile, grid=grid)

    @staticmethod
    def write_ledger_csv(state: SolverState, path: Union[str, Path]) -> Path:
        """Columns t, E, E_alpha, tau, volume (E_alpha blank where not yet known)"""
        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            with path.open("w", newline="") as handle:
                writer = csv.writer(handle)
                writer.writerow(["t", "E", "E_alpha", "tau", "volume"])
                for entry in state.ledger:
                    writer.writerow(
                        [
                            repr(entry.t),
                            repr(entry.E),
                            "" if entry.E_alpha is None else repr(entry.E_alpha),
                            repr(entry.tau),
                            repr(entry.volume),
                        ]
                    )
        except OSError as e:
            raise ConfigError(f"cannot write ledger {path}: {e}") from e
        return path

    @staticmethod
    def write_steps_csv(state: SolverState, path: Union[str, Path]) -> Path:
        """Per-level diagnostics, one row per StepRecord"""
        path = Path(path)
        fields = list(StepRecord.model_fields)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            with path.open("w", newline="") as handle:
                writer = csv.DictWriter(handle, fieldnames=fields)
                writer.writeheader()
                for record in state.records:
                    writer.writerow({k: ("" if v is None else v) for k, v in record.model_dump().items()})
        except OSError as e:
            raise ConfigError(f"cannot write step records {path}: {e}") from e
        return path
