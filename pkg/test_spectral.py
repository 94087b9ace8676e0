"""
Tests for periodic spectral operators, norms and energies
"""
import json

import numpy as np
import pytest
from pydantic import ValidationError

from controllers.dgs_controller import DgsController
from controllers.kernel_controller import KernelController
from controllers.mesh_controller import MeshController
from controllers.spectral_controller import SpectralController, spectral_plan
from errors import HistoryMismatchError, MeanNotZeroError
from models.dgs_models import GStateScalar
from models.field_models import Field2D, Grid2D

GRID = Grid2D(Mx=32, My=32)


def sinsin(grid: Grid2D = GRID, amplitude: float = 1.0) -> Field2D:
    x, y = grid.coordinates()
    return Field2D(values=amplitude * np.sin(x) * np.sin(y), grid=grid)


def test_grid_validation():
    assert GRID.shape == (32, 32)
    assert GRID.area == pytest.approx(4 * np.pi ** 2)
    with pytest.raises(ValidationError):
        Grid2D(Mx=33, My=32)
    with pytest.raises(ValidationError):
        Grid2D(Mx=4, My=4)


def test_field_validation():
    with pytest.raises(ValidationError):
        Field2D(values=np.zeros((4, 4)), grid=GRID)
    bad = np.zeros(GRID.shape)
    bad[0, 0] = np.nan
    with pytest.raises(ValidationError):
        Field2D(values=bad, grid=GRID)


def test_norms_of_a_single_mode():
    f = sinsin()
    assert SpectralController.l2_norm(f) ** 2 == pytest.approx(np.pi ** 2, rel=1e-12)
    assert SpectralController.hminus1_norm(f) ** 2 == pytest.approx(np.pi ** 2 / 2, rel=1e-12)
    assert SpectralController.h1_seminorm(f) ** 2 == pytest.approx(2 * np.pi ** 2, rel=1e-12)


def test_norms_on_rectangular_domain():
    grid = Grid2D(Mx=16, My=32, Lx=np.pi, Ly=4 * np.pi)
    x, y = grid.coordinates()
    f = Field2D(values=np.cos(2 * x) * np.sin(0.5 * y), grid=grid)
    # |k|^2 = 4 + 1/4, ||f||^2 = area / 4
    l2_sq = grid.area / 4
    assert SpectralController.l2_norm(f) ** 2 == pytest.approx(l2_sq, rel=1e-12)
    assert SpectralController.hminus1_norm(f) ** 2 == pytest.approx(l2_sq / 4.25, rel=1e-12)


def test_nyquist_mode_weight():
    x, _ = GRID.coordinates()
    f = Field2D(values=np.cos(16 * x), grid=GRID)
    assert SpectralController.h1_seminorm(f) ** 2 == pytest.approx(256 * SpectralController.l2_norm(f) ** 2)


def test_laplacian_and_inverse():
    f = sinsin()
    np.testing.assert_allclose(SpectralController.laplacian(f).values, -2 * f.values, atol=1e-12)
    g = SpectralController.inv_laplacian_zero_mean(f)
    np.testing.assert_allclose(SpectralController.laplacian(g).values, -f.values, atol=1e-12)
    assert abs(g.mean) < 1e-14


def test_inverse_requires_zero_mean():
    f = Field2D(values=np.ones(GRID.shape), grid=GRID)
    with pytest.raises(MeanNotZeroError):
        SpectralController.inv_laplacian_zero_mean(f)
    with pytest.raises(MeanNotZeroError):
        SpectralController.hminus1_norm(f)


def test_transform_round_trip_and_parseval():
    grid = Grid2D(Mx=16, My=24, Lx=3.0, Ly=5.0)
    plan = spectral_plan(grid)
    values = np.random.default_rng(12).normal(size=grid.shape)
    values_hat = plan.forward(values)
    np.testing.assert_allclose(plan.backward(values_hat), values, atol=1e-13)
    l2_sq = SpectralController.l2_norm(Field2D(values=values, grid=grid)) ** 2
    assert plan.quadratic(values_hat) == pytest.approx(l2_sq, rel=1e-12)


@pytest.mark.parametrize("seed", [0, 1, 2, 3])
def test_interpolation_between_h1_and_hminus1(seed):
    grid = Grid2D(Mx=32, My=16, Lx=2 * np.pi, Ly=np.pi)
    values = np.random.default_rng(seed).uniform(-1.0, 1.0, size=grid.shape)
    f = Field2D(values=values - values.mean(), grid=grid)
    product = SpectralController.h1_seminorm(f) * SpectralController.hminus1_norm(f)
    assert SpectralController.l2_norm(f) ** 2 <= product * (1 + 1e-12)


def test_energy():
    assert SpectralController.energy_E(Field2D.zeros(GRID), 0.5) == pytest.approx(np.pi ** 2, rel=1e-12)
    ones = Field2D(values=np.ones(GRID.shape), grid=GRID)
    assert SpectralController.energy_E(ones, 0.5) == pytest.approx(0.0, abs=1e-12)
    f = sinsin(amplitude=0.1)
    plan = spectral_plan(GRID)
    gradient = 0.5 * 0.25 * 2 * np.pi ** 2 * 0.01
    potential = GRID.cell_area * np.sum(0.25 * (f.values ** 2 - 1) ** 2)
    assert SpectralController.energy_E(f, 0.5) == pytest.approx(gradient + potential, rel=1e-12)
    assert plan is spectral_plan(Grid2D(Mx=32, My=32))


def test_history_functional_matches_scalar_g():
    mesh = MeshController.graded_mesh(1.0, 8, 2.0)
    n, alpha = 6, 0.5
    coefficients = np.array([0.3, -0.1, 0.2, 0.05, -0.2, 0.1])
    plan = spectral_plan(GRID)
    profile_hat = plan.forward(sinsin().values)
    increments_hat = coefficients[:, None, None] * profile_hat[None]
    row = KernelController.build_kernel_row(mesh, n, alpha)
    field_value = SpectralController.history_functional(
        plan, increments_hat, row.A, mesh.tau(n), mesh.ratio(n + 1), alpha
    )
    scalar = DgsController.G_functional(
        GStateScalar(n=n, history=coefficients, mesh=mesh.truncate(n + 1), alpha=alpha)
    )
    assert field_value == pytest.approx(np.pi ** 2 / 2 * scalar, rel=1e-12)


def test_modified_energy():
    mesh = MeshController.uniform_mesh(1.0, 4)
    phi = sinsin(amplitude=0.2)
    plan = spectral_plan(GRID)
    increments = np.stack([plan.forward(0.1 * sinsin().values)] * 2)
    e0 = SpectralController.energy_E_alpha(phi, increments, mesh, 0, 0.5, 1.0, 0.5)
    assert e0 == pytest.approx(SpectralController.energy_E(phi, 0.5))
    e2 = SpectralController.energy_E_alpha(phi, increments, mesh, 2, 0.5, 2.0, 0.5)
    assert e2 > e0
    with pytest.raises(HistoryMismatchError):
        SpectralController.energy_E_alpha(phi, increments, mesh, 3, 0.5, 1.0, 0.5)
    with pytest.raises(HistoryMismatchError):
        SpectralController.energy_E_alpha(phi, increments, MeshController.uniform_mesh(1.0, 2), 2, 0.5, 1.0, 0.5)


def test_bdf2_energy_adds_rate_term():
    plan = spectral_plan(GRID)
    phi = sinsin(amplitude=0.3)
    increment_hat = plan.forward(0.1 * sinsin().values)
    value = SpectralController.bdf2_energy(plan, phi.values, plan.forward(phi.values), increment_hat, 0.1, 0.1, 1.0, 0.5)
    rate = (np.pi ** 2 / 2) * 0.01 / 0.01
    expected = SpectralController.energy_E(phi, 0.5) + 0.1 / 4.0 * rate
    assert value == pytest.approx(expected, rel=1e-12)


def test_modified_energy_tends_to_the_bdf2_energy():
    mesh = MeshController.uniform_mesh(0.6, 6)
    plan = spectral_plan(GRID)
    x, y = GRID.coordinates()
    profiles = [np.sin(x) * np.sin(y), np.cos(2 * x), np.cos(x) * np.sin(y), np.cos(x + y)]
    increments = np.stack([plan.forward(0.05 * (k + 1) * p) for k, p in enumerate(profiles)])
    phi = sinsin(amplitude=0.3)
    n = 4
    bdf2 = SpectralController.bdf2_energy(
        plan, phi.values, plan.forward(phi.values), increments[n - 1], mesh.tau(n), mesh.tau(n + 1), 1.0, 0.5
    )
    rate_term = bdf2 - SpectralController.energy_E(phi, 0.5)
    gaps = [
        abs(SpectralController.energy_E_alpha(phi, increments, mesh, n, alpha, 1.0, 0.5) - bdf2)
        for alpha in (0.9, 0.99, 0.999)
    ]
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[2] < 0.1 * gaps[0]
    assert gaps[2] < 0.1 * rate_term


def test_snapshot_round_trip(tmp_path):
    f = sinsin(Grid2D(Mx=8, My=16))
    path = SpectralController.write_snapshot(f, 10.25, 0.5, tmp_path, "phi_t10")
    assert path.stat().st_size == 8 * 16 * 8
    meta = json.loads((tmp_path / "phi_t10.json").read_text())
    assert meta == {"Mx": 8, "My": 16, "Lx": 2 * np.pi, "Ly": 2 * np.pi, "t": 10.25, "alpha": 0.5}
    g, _ = SpectralController.read_snapshot(path)
    np.testing.assert_array_equal(g.values, f.values)
