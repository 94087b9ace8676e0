"""
Tests for time meshes and the step-ratio window
"""
import logging
import math

import numpy as np
import pytest
from pydantic import ValidationError

from controllers.mesh_controller import MeshController
from errors import ConfigError, DomainError
from models.mesh_models import RatioBounds, TimeMesh

ALPHA_GRID = np.linspace(0.01, 0.99, 99)


def test_lower_ratio_bound():
    R = MeshController.R_star()
    assert abs(R - 0.4753) <= 5e-4
    assert abs(MeshController.g4(R)) < 1e-12


def test_upper_ratio_bound_at_bdf2_limit():
    assert abs(MeshController.r_star(1.0) - 4.864) <= 1e-3


def test_upper_ratio_bound_has_a_floor():
    values = [MeshController.r_star(a) for a in ALPHA_GRID]
    assert min(values) >= 4.659
    for alpha, r in zip(ALPHA_GRID, values):
        assert abs(MeshController.g1(r, alpha)) < 1e-9


@pytest.mark.parametrize(
    "alpha,expected",
    [(0.3, 6.42), (0.5, 5.1), (0.7, 4.699), (0.8, 4.661), (0.9, 4.717)],
)
def test_upper_ratio_bound_values(alpha, expected):
    assert MeshController.r_star(alpha) == pytest.approx(expected, abs=0.02)


def test_stationary_pair_of_the_floor():
    z, alpha = 4.660, 0.7881
    assert 0.0 < MeshController.g1(z, alpha) < 1e-3
    # d g1 / d alpha = 0 together with g1 = 0 reduces to g3 = 0
    g3 = 0.5 * alpha * math.log(z) - (1.0 + z) / (1.0 + (1.0 + alpha) * z)
    assert abs(g3) < 1e-3


def test_gamma_max_exceeds_optimal_grading():
    for alpha in ALPHA_GRID:
        assert MeshController.gamma_max(alpha) > 3.0 - alpha


def test_gamma_max_decreases_up_to_the_floor():
    values = [MeshController.gamma_max(a) for a in np.arange(0.1, 0.75, 0.1)]
    assert all(b < a for a, b in zip(values, values[1:]))


def test_r_star_rejects_invalid_order():
    with pytest.raises(DomainError):
        MeshController.r_star(0.0)
    with pytest.raises(DomainError):
        MeshController.r_star(1.5)


def test_mesh_steps_and_ratios():
    mesh = TimeMesh(levels=[0.0, 1.0, 3.0, 4.0])
    assert mesh.N == 3
    assert mesh.T == 4.0
    assert mesh.tau(2) == 2.0
    assert mesh.ratio(1) == 0.0
    assert mesh.ratio(2) == 2.0
    assert mesh.ratio(3) == 0.5
    np.testing.assert_allclose(mesh.ratios, [0.0, 0.0, 2.0, 0.5])
    assert mesh.extend(2.0).T == 6.0
    assert mesh.truncate(2).N == 2


def test_mesh_rejects_non_increasing_levels():
    with pytest.raises(ValidationError):
        TimeMesh(levels=[0.0, 1.0, 1.0])
    with pytest.raises(ValidationError):
        TimeMesh(levels=[0.0])


def test_mesh_levels_are_read_only():
    mesh = MeshController.uniform_mesh(1.0, 4)
    with pytest.raises(ValueError):
        mesh.levels[1] = 0.5


def test_uniform_mesh():
    mesh = MeshController.uniform_mesh(2.0, 8, t0=1.0)
    np.testing.assert_allclose(mesh.steps[1:], 0.25)
    assert mesh.T == pytest.approx(3.0)
    with pytest.raises(DomainError):
        MeshController.uniform_mesh(1.0, 0)


def test_graded_mesh_metadata():
    mesh = MeshController.graded_mesh(0.01, 30, 2.0, alpha=0.5)
    assert mesh.N == 30
    assert mesh.T == pytest.approx(0.01)
    assert mesh.levels[1] == pytest.approx(0.01 / 900)
    assert mesh.ratio(2) == pytest.approx(3.0)
    assert mesh.grading.max_ratio == pytest.approx(3.0)
    assert mesh.grading.admissible is True
    assert mesh.grading.gamma_max == pytest.approx(MeshController.gamma_max(0.5))


def test_graded_mesh_warns_above_gamma_max(caplog):
    with caplog.at_level(logging.WARNING, logger="controllers.mesh_controller"):
        mesh = MeshController.graded_mesh(1.0, 20, 3.0, alpha=0.7)
    assert mesh.grading.admissible is False
    assert any("gamma_max" in record.message for record in caplog.records)


def test_validate_ratios_reports_both_sides():
    bounds = MeshController.ratio_bounds(0.5)
    mesh = TimeMesh(levels=np.cumsum([0.0, 1.0, 0.4, 0.4 * 6.0, 2.4]))
    report = MeshController.validate_ratios(mesh, bounds)
    assert not report.ok
    assert [v.k for v in report.violations] == [2, 3]
    assert report.violations[0].reason == "below R_*"
    assert report.checked == 3


def test_ratio_bounds_cap():
    bounds = MeshController.ratio_bounds(0.5, cap=2.0)
    assert bounds.r_upper == 2.0
    with pytest.raises(ValidationError):
        RatioBounds(alpha=0.5, R_lower=2.0, r_upper=1.0)


def test_composite_mesh_stays_in_window():
    mesh = MeshController.composite_mesh(0.01, 30, 2.0, 1.0, 0.05, 0.5)
    assert mesh.T == pytest.approx(1.0)
    assert mesh.steps[1:].max() <= 0.05 + 1e-12
    report = MeshController.validate_ratios(mesh, MeshController.ratio_bounds(0.5))
    assert report.ok, report.violations


@pytest.mark.parametrize("T", [0.0100001, 0.0304, 0.1202, 0.35, 2.0])
def test_composite_mesh_closing_steps(T):
    mesh = MeshController.composite_mesh(0.01, 30, 2.0, T, 0.1, 0.5)
    assert mesh.T == T
    assert mesh.steps[1:].max() <= 0.1 + 1e-12
    report = MeshController.validate_ratios(mesh, MeshController.ratio_bounds(0.5))
    assert report.ok, report.violations


def test_composite_mesh_window_over_many_final_times():
    bounds = MeshController.ratio_bounds(0.5)
    for T in np.linspace(0.0105, 2.0, 400):
        mesh = MeshController.composite_mesh(0.01, 30, 2.0, T, 0.1, 0.5)
        assert mesh.T == pytest.approx(T, rel=1e-15)
        assert MeshController.validate_ratios(mesh, bounds).ok, T


def test_step_towards_final_time():
    bounds = MeshController.ratio_bounds(0.5)
    # remainder fits in the proposed step
    assert MeshController.step_towards(0.9, 1.0, 1.0, bounds) == 0.9
    # a remainder of 0.2 would be stranded, so the rest is halved
    assert MeshController.step_towards(1.2, 1.0, 1.0, bounds) == pytest.approx(0.6)
    # halving would fall below R_* tau_prev, so the rest is taken at once
    assert MeshController.step_towards(0.6, 0.5, 1.0, bounds) == 0.6
    assert MeshController.step_towards(0.9, 0.5, 1.0, bounds) == 0.5
    assert MeshController.step_towards(100.0, 100.0, 1.0, bounds) == pytest.approx(bounds.r_upper)
    assert MeshController.step_towards(100.0, 0.01, 1.0, bounds) == pytest.approx(bounds.R_lower)


def test_absorb_short_remainder():
    bounds = MeshController.ratio_bounds(0.5)
    np.testing.assert_allclose(MeshController.absorb_short_remainder([0.0, 1.0, 2.0], 2.2, bounds), [0.0, 1.0, 2.2])
    # stretching to 6.3 would give a ratio of 5.3 > r*(1/2), so the last span is split
    np.testing.assert_allclose(
        MeshController.absorb_short_remainder([0.0, 1.0, 6.0], 6.3, bounds), [0.0, 1.0, 3.65, 6.3]
    )


def test_mesh_csv_round_trip(tmp_path):
    mesh = MeshController.graded_mesh(1.0, 10, 2.0)
    path = MeshController.write_mesh_csv(mesh, tmp_path / "mesh.csv")
    header = path.read_text().splitlines()[0]
    assert header == "k,t_k,tau_k,r_k"
    np.testing.assert_array_equal(MeshController.read_mesh_csv(path).levels, mesh.levels)


def test_read_mesh_csv_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        MeshController.read_mesh_csv(tmp_path / "absent.csv")
