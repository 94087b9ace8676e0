"""
Mesh Controller - time meshes, step-ratio bookkeeping and ratio-bound functions
"""
import csv
import logging
import math
from functools import lru_cache
from pathlib import Path
from typing import Optional, Union

import numpy as np
from scipy.optimize import brentq

from errors import ConfigError, DomainError
from models.mesh_models import (
    GradingInfo,
    RatioBounds,
    RatioReport,
    RatioViolation,
    TimeMesh,
)

logger = logging.getLogger(__name__)

# safety factor keeping generated ratios strictly below r*(alpha)
RATIO_MARGIN = 1e-9


def _check_alpha(alpha: float) -> None:
    if not 0.0 < alpha <= 1.0:
        raise DomainError(f"fractional order must lie in (0, 1], got {alpha}")


@lru_cache(maxsize=1024)
def _r_star_cached(alpha: float) -> float:
    upper = 1e6 / alpha
    return brentq(
        MeshController.g1, 1.0, upper, args=(alpha,), xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500
    )


class MeshController:
    """Controller for time meshes and the admissible step-ratio window"""

    @staticmethod
    def R_star() -> float:
        """
        Lower ratio bound, the positive root of 3 - 1/(z^2 (1+z))

        Returns:
            R_* ~ 0.4753
        """
        sqrt5 = math.sqrt(5.0)
        return float(
            np.cbrt((189.0 - 81.0 * sqrt5) / 2.0) / 9.0
            + np.cbrt((7.0 + 3.0 * sqrt5) / 2.0) / 3.0
            - 1.0 / 3.0
        )

    @staticmethod
    def g1(z: float, alpha: float) -> float:
        """1/alpha + (1 + 1/alpha) z - z^(2 - alpha/2)"""
        return 1.0 / alpha + (1.0 + 1.0 / alpha) * z - z ** (2.0 - alpha / 2.0)

    @staticmethod
    def g4(z: float) -> float:
        """3 - 1/(z^2 (1+z)), whose positive root is R_*"""
        return 3.0 - 1.0 / (z * z * (1.0 + z))

    @staticmethod
    def r_star(alpha: float) -> float:
        """
        Upper ratio bound r*(alpha), the root of g1(., alpha) above 1

        Args:
            alpha: Fractional order in (0, 1]; alpha = 1 gives the BDF2 value ~4.864

        Returns:
            r*(alpha)

        Raises:
            DomainError: alpha outside (0, 1]
        """
        _check_alpha(alpha)
        return _r_star_cached(float(alpha))

    @staticmethod
    def gamma_max(alpha: float) -> float:
        """Largest grading exponent with r_2 = 2^gamma - 1 below r*(alpha)"""
        return math.log2(1.0 + MeshController.r_star(alpha))

    @staticmethod
    def ratio_bounds(alpha: float, cap: Optional[float] = None) -> RatioBounds:
        """Admissible window [R_*, min(r*(alpha), cap))"""
        upper = MeshController.r_star(alpha)
        if cap is not None:
            upper = min(upper, cap)
        return RatioBounds(alpha=alpha, R_lower=MeshController.R_star(), r_upper=upper)

    @staticmethod
    def uniform_mesh(T: float, N: int, t0: float = 0.0) -> TimeMesh:
        """N equal steps on [t0, t0 + T]"""
        if N < 1 or T <= 0:
            raise DomainError(f"uniform mesh needs N >= 1 and T > 0, got N={N}, T={T}")
        return TimeMesh(levels=t0 + T * np.arange(N + 1) / N)

    @staticmethod
    def graded_mesh(
        T0: float, N0: int, gamma: float, alpha: Optional[float] = None
    ) -> TimeMesh:
        """
        Graded mesh t_k = T0 (k/N0)^gamma

        Args:
            T0: End of the graded interval
            N0: Number of steps
            gamma: Grading exponent >= 1
            alpha: Optional fractional order used to judge admissibility

        Returns:
            TimeMesh with GradingInfo metadata
        """
        if gamma < 1.0 or N0 < 2 or T0 <= 0:
            raise DomainError(
                f"graded mesh needs gamma >= 1, N0 >= 2, T0 > 0; got {gamma}, {N0}, {T0}"
            )
        levels = T0 * (np.arange(N0 + 1) / N0) ** gamma
        info = GradingInfo(T0=T0, N0=N0, gamma=gamma, max_ratio=2.0 ** gamma - 1.0)
        if alpha is not None:
            r_upper = MeshController.r_star(alpha)
            g_max = MeshController.gamma_max(alpha)
            info = info.model_copy(
                update={
                    "alpha": alpha,
                    "r_star": r_upper,
                    "admissible": info.max_ratio < r_upper,
                    "gamma_max": g_max,
                }
            )
            if gamma > g_max:
                logger.warning(
                    "grading exponent %.3f exceeds gamma_max(%.3f) = %.3f; r_2 = %.3f",
                    gamma, alpha, g_max, info.max_ratio,
                )
        return TimeMesh(levels=levels, grading=info)

    @staticmethod
    def ramp_steps(tau_from: float, tau_to: float, alpha: float, cap: Optional[float] = None) -> list:
        """
        Steps leading geometrically from tau_from towards tau_to inside the ratio window

        The returned list ends with a step whose ratio to the next tau_to step is admissible.
        """
        bounds = MeshController.ratio_bounds(alpha, cap)
        grow = bounds.r_upper * (1.0 - 1e-3)
        shrink = bounds.R_lower * (1.0 + 1e-3)
        steps = []
        current = tau_from
        while not (shrink <= tau_to / current < grow):
            current = current * (grow if tau_to > current else shrink)
            steps.append(current)
        return steps

    @staticmethod
    def step_towards(remaining: float, proposal: float, tau_prev: float, bounds: RatioBounds) -> float:
        """
        Next step on the way to a final time, kept inside the ratio window

        The proposal is clamped to [R_* tau_prev, r_upper tau_prev). A remainder
        shorter than (1 + R_*) times the clamped step is finished in one step, or
        split into two equal steps when half of it still clears the lower bound.
        As long as the remainder handed in is at least R_* tau_prev, the step
        returned and the remainder it leaves both stay in the window.

        Args:
            remaining: Time left until the final level
            proposal: Preferred step
            tau_prev: Last step taken (0 before the first step)
            bounds: Admissible window

        Returns:
            The next step, equal to ``remaining`` when it closes the mesh
        """
        lower = bounds.R_lower * (1.0 + RATIO_MARGIN)
        tau = proposal
        if tau_prev > 0.0:
            tau = min(max(tau, lower * tau_prev), bounds.r_upper * (1.0 - RATIO_MARGIN) * tau_prev)
        if remaining <= tau:
            return remaining
        if remaining - tau < lower * tau:
            half = 0.5 * remaining
            return half if half >= lower * tau_prev else remaining
        return tau

    @staticmethod
    def absorb_short_remainder(levels, T: float, bounds: RatioBounds) -> np.ndarray:
        """
        Move the last level to T when T - t_N is too short to be a step of its own

        The last step is stretched to T. If that pushes its ratio to r_upper or
        beyond, t_N is moved to the midpoint of [t_{N-1}, T] instead.
        """
        levels = list(np.asarray(levels, dtype=float))
        stretched = T - levels[-2]
        if len(levels) >= 3:
            previous = levels[-2] - levels[-3]
            if stretched / previous >= bounds.r_upper and 0.5 * stretched / previous >= bounds.R_lower:
                levels[-1:] = [levels[-2] + 0.5 * stretched, T]
                return np.array(levels)
        levels[-1] = T
        return np.array(levels)

    @staticmethod
    def composite_mesh(
        T0: float,
        N0: int,
        gamma: float,
        T: float,
        tau_tail: float,
        alpha: float,
        cap: Optional[float] = None,
    ) -> TimeMesh:
        """
        Graded prefix on [0, T0] followed by steps of tau_tail up to T

        The junction is bridged by geometric steps and the closing steps are
        shaped by step_towards, so every ratio stays in [R_*, r*(alpha)).
        A T closer to T0 than R_* tau_{N0} stretches the prefix instead.
        """
        bounds = MeshController.ratio_bounds(alpha, cap)
        prefix = MeshController.graded_mesh(T0, N0, gamma, alpha)
        if T <= T0:
            return prefix
        levels = list(prefix.levels)
        if T - T0 < bounds.R_lower * (1.0 + RATIO_MARGIN) * prefix.tau(N0):
            return TimeMesh(levels=MeshController.absorb_short_remainder(levels, T, bounds), grading=prefix.grading)
        ramp = iter(MeshController.ramp_steps(prefix.tau(N0), tau_tail, alpha, cap))
        while True:
            remaining = T - levels[-1]
            step = MeshController.step_towards(remaining, next(ramp, tau_tail), levels[-1] - levels[-2], bounds)
            if step >= remaining:
                levels.append(T)
                break
            levels.append(levels[-1] + step)
        return TimeMesh(levels=levels, grading=prefix.grading)

    @staticmethod
    def validate_ratios(mesh: TimeMesh, bounds: RatioBounds) -> RatioReport:
        """
        List every k >= 2 with r_k outside [R_lower, r_upper)

        Args:
            mesh: Mesh to check
            bounds: Admissible window

        Returns:
            RatioReport with one entry per violating level
        """
        ratios = mesh.ratios
        violations = []
        for k in range(2, mesh.N + 1):
            r = float(ratios[k])
            if r < bounds.R_lower:
                violations.append(RatioViolation(k=k, ratio=r, reason="below R_*"))
            elif r >= bounds.r_upper:
                violations.append(RatioViolation(k=k, ratio=r, reason="not below r*(alpha)"))
        return RatioReport(bounds=bounds, checked=max(mesh.N - 1, 0), violations=violations)

    @staticmethod
    def write_mesh_csv(mesh: TimeMesh, path: Union[str, Path]) -> Path:
        """Export columns k, t_k, tau_k, r_k"""
        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            steps, ratios = mesh.steps, mesh.ratios
            with path.open("w", newline="") as handle:
                writer = csv.writer(handle)
                writer.writerow(["k", "t_k", "tau_k", "r_k"])
                for k, t in enumerate(mesh.levels):
                    writer.writerow([k, repr(float(t)), repr(float(steps[k])), repr(float(ratios[k]))])
        except OSError as e:
            raise ConfigError(f"cannot write mesh CSV {path}: {e}") from e
        return path

    @staticmethod
    def read_mesh_csv(path: Union[str, Path]) -> TimeMesh:
        """Import a mesh written by write_mesh_csv (only t_k is used)"""
        path = Path(path)
        try:
            with path.open(newline="") as handle:
                levels = [float(row["t_k"]) for row in csv.DictReader(handle)]
            return TimeMesh(levels=levels)
        except (OSError, KeyError, ValueError) as e:
            raise ConfigError(f"cannot read mesh CSV {path}: {e}") from e
