"""
Spectral Controller - Fourier pseudo-spectral operators, norms and energies
on a doubly periodic grid
"""
import json
import logging
from functools import lru_cache
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np

from controllers.dgs_controller import DgsController
from controllers.kernel_controller import KernelController
from errors import ConfigError, HistoryMismatchError, MeanNotZeroError
from models.field_models import Field2D, Grid2D
from models.kernel_models import KernelRow
from models.mesh_models import TimeMesh

logger = logging.getLogger(__name__)

MEAN_TOL = 1e-10


class SpectralPlan:
    """Read-only wavenumber tables of one grid, shared by all fields on it"""

    def __init__(self, grid: Grid2D):
        self.grid = grid
        self.shape = grid.shape
        kx = 2.0 * np.pi * np.fft.fftfreq(grid.Mx, d=grid.Lx / grid.Mx)
        ky = 2.0 * np.pi * np.fft.rfftfreq(grid.My, d=grid.Ly / grid.My)
        self.k2 = kx[:, None] ** 2 + ky[None, :] ** 2
        self.k4 = self.k2 ** 2
        self.inv_k2 = np.zeros_like(self.k2)
        self.inv_k2[self.k2 > 0] = 1.0 / self.k2[self.k2 > 0]
        # rfft keeps half the spectrum: interior columns stand for two modes
        self.weights = np.full(self.k2.shape, 2.0)
        self.weights[:, 0] = 1.0
        self.weights[:, -1] = 1.0
        self.norm_factor = grid.cell_area / (grid.Mx * grid.My)
        for table in (self.k2, self.k4, self.inv_k2, self.weights):
            table.setflags(write=False)

    @property
    def spectral_shape(self) -> Tuple[int, int]:
        return self.k2.shape

    def forward(self, values: np.ndarray) -> np.ndarray:
        return np.fft.rfft2(values)

    def backward(self, values_hat: np.ndarray) -> np.ndarray:
        return np.fft.irfft2(values_hat, s=self.shape)

    def quadratic(self, values_hat: np.ndarray, symbol: Optional[np.ndarray] = None) -> np.ndarray:
        """Collocation integral of sum symbol |f_k|^2 over the last two axes (stack aware)"""
        density = self.weights * np.abs(values_hat) ** 2
        if symbol is not None:
            density = density * symbol
        return self.norm_factor * density.sum(axis=(-2, -1))

    def mean_of(self, values_hat: np.ndarray):
        return values_hat[..., 0, 0].real / (self.shape[0] * self.shape[1])


@lru_cache(maxsize=16)
def spectral_plan(grid: Grid2D) -> SpectralPlan:
    """Shared plan for a grid"""
    return SpectralPlan(grid)


def _require_zero_mean(plan: SpectralPlan, values_hat: np.ndarray) -> None:
    mean = plan.mean_of(values_hat)
    if np.any(np.abs(mean) > MEAN_TOL):
        raise MeanNotZeroError(f"field mean {float(np.max(np.abs(mean))):.3e} exceeds {MEAN_TOL:g}")


class SpectralController:
    """Controller for field operators on periodic grids"""

    @staticmethod
    def laplacian(f: Field2D) -> Field2D:
        """Spectral Laplacian (multiplier -|k|^2) of the trigonometric interpolant"""
        plan = spectral_plan(f.grid)
        return Field2D(values=plan.backward(-plan.k2 * plan.forward(f.values)), grid=f.grid)

    @staticmethod
    def inv_laplacian_zero_mean(f: Field2D) -> Field2D:
        """
        Zero-mean solution g of -Laplace g = f

        Raises:
            MeanNotZeroError: |mean(f)| above 1e-10
        """
        plan = spectral_plan(f.grid)
        f_hat = plan.forward(f.values)
        _require_zero_mean(plan, f_hat)
        return Field2D(values=plan.backward(plan.inv_k2 * f_hat), grid=f.grid)

    @staticmethod
    def hminus1_norm(f: Field2D) -> float:
        """
        H^{-1} norm sqrt(<(-Laplace)^{-1} f, f>) with the zero mode excluded

        Raises:
            MeanNotZeroError: |mean(f)| above 1e-10
        """
        plan = spectral_plan(f.grid)
        f_hat = plan.forward(f.values)
        _require_zero_mean(plan, f_hat)
        return float(np.sqrt(plan.quadratic(f_hat, plan.inv_k2)))

    @staticmethod
    def l2_norm(f: Field2D) -> float:
        return float(np.sqrt(f.grid.cell_area * np.sum(f.values ** 2)))

    @staticmethod
    def h1_seminorm(f: Field2D) -> float:
        """||grad f|| from the spectral symbol |k|^2"""
        plan = spectral_plan(f.grid)
        return float(np.sqrt(plan.quadratic(plan.forward(f.values), plan.k2)))

    @staticmethod
    def energy_from_hat(plan: SpectralPlan, phi: np.ndarray, phi_hat: np.ndarray, eps: float) -> float:
        gradient = 0.5 * eps ** 2 * plan.quadratic(phi_hat, plan.k2)
        potential = plan.grid.cell_area * np.sum(0.25 * (phi ** 2 - 1.0) ** 2)
        return float(gradient + potential)

    @staticmethod
    def energy_E(phi: Field2D, eps: float) -> float:
        """
        Ginzburg-Landau energy (eps^2/2)||grad phi||^2 + <(phi^2-1)^2/4, 1>

        Args:
            phi: Phase field
            eps: Interface width

        Returns:
            Discrete energy
        """
        plan = spectral_plan(phi.grid)
        return SpectralController.energy_from_hat(plan, phi.values, plan.forward(phi.values), eps)

    @staticmethod
    def history_functional(
        plan: SpectralPlan,
        increments_hat: np.ndarray,
        A: np.ndarray,
        tau_n: float,
        r_next: float,
        alpha: float,
    ) -> float:
        """
        Field version of G: scalar squares replaced by squared H^{-1} norms of
        grad phi^n, phi^n - phi^j and phi^n - phi^0
        """
        suffix = np.cumsum(increments_hat[::-1], axis=0)[::-1]
        squares = plan.quadratic(suffix, plan.inv_k2)
        last = plan.quadratic(increments_hat[-1], plan.inv_k2)
        return DgsController.G_from_squares(A, float(last), squares, tau_n, r_next, alpha)

    @staticmethod
    def energy_E_alpha(
        phi: Field2D,
        increments_hat: np.ndarray,
        mesh: TimeMesh,
        n: int,
        alpha: float,
        kappa: float,
        eps: float,
        row: Optional[KernelRow] = None,
    ) -> float:
        """
        Modified energy E[phi^n] + G_n / kappa, evaluated one step in arrears

        Args:
            phi: Field at level n
            increments_hat: rfft2 of phi^k - phi^{k-1}, k = 1..n (at least n entries)
            mesh: Mesh holding level n+1
            n: Level
            alpha: Fractional order
            kappa: Mobility
            eps: Interface width
            row: Kernel row of level n, built when omitted

        Raises:
            HistoryMismatchError: missing increments or missing level n+1
        """
        if len(increments_hat) < n or mesh.N < n + 1:
            raise HistoryMismatchError(f"E_alpha at level {n} needs {n} increments and level {n + 1}")
        plan = spectral_plan(phi.grid)
        energy = SpectralController.energy_E(phi, eps)
        if n == 0:
            return energy
        row = row if row is not None else KernelController.build_kernel_row(mesh, n, alpha)
        history = SpectralController.history_functional(
            plan, np.asarray(increments_hat[:n]), row.A, mesh.tau(n), mesh.ratio(n + 1), alpha
        )
        return energy + history / kappa

    @staticmethod
    def bdf2_energy(
        plan: SpectralPlan,
        phi: np.ndarray,
        phi_hat: np.ndarray,
        increment_hat: np.ndarray,
        tau_n: float,
        tau_next: float,
        kappa: float,
        eps: float,
    ) -> float:
        """BDF2 modified energy E + sqrt(r) tau_{n+1} / (2 kappa (1+r)) ||grad phi^n / tau_n||_{-1}^2"""
        r_next = tau_next / tau_n
        weight = np.sqrt(r_next) * tau_next / (2.0 * kappa * (1.0 + r_next))
        rate = plan.quadratic(increment_hat, plan.inv_k2) / tau_n ** 2
        return SpectralController.energy_from_hat(plan, phi, phi_hat, eps) + float(weight * rate)

    @staticmethod
    def write_snapshot(
        field: Field2D, t: float, alpha: float, directory: Union[str, Path], stem: str
    ) -> Path:
        """
        Write flat little-endian float64 samples (row-major) plus a JSON sidecar

        Returns:
            Path of the binary file
        """
        directory = Path(directory)
        try:
            directory.mkdir(parents=True, exist_ok=True)
            data_path = directory / f"{stem}.bin"
            np.ascontiguousarray(field.values, dtype="<f8").tofile(data_path)
            meta = {
                "Mx": field.grid.Mx,
                "My": field.grid.My,
                "Lx": field.grid.Lx,
                "Ly": field.grid.Ly,
                "t": float(t),
                "alpha": float(alpha),
            }
            (directory / f"{stem}.json").write_text(json.dumps(meta, indent=2))
        except OSError as e:
            raise ConfigError(f"cannot write snapshot {stem} in {directory}: {e}") from e
        logger.info("snapshot t=%.6g written to %s", t, data_path)
        return data_path

    @staticmethod
    def read_snapshot(data_path: Union[str, Path]) -> Tuple[Field2D, dict]:
        """Read a snapshot written by write_snapshot"""
        data_path = Path(data_path)
        try:
            meta = json.loads(data_path.with_suffix(".json").read_text())
            grid = Grid2D(Mx=meta["Mx"], My=meta["My"], Lx=meta["Lx"], Ly=meta["Ly"])
            values = np.fromfile(data_path, dtype="<f8").reshape(grid.shape)
        except (OSError, KeyError, ValueError) as e:
            raise ConfigError(f"cannot read snapshot {data_path}: {e}") from e
        return Field2D(values=values, grid=grid), meta
