"""
DGS Controller - bound functions, quadratic history functionals and the
numerical certification of the discrete gradient structure
"""
import logging
from typing import Sequence

import numpy as np
from scipy.special import gamma

from controllers.kernel_controller import KernelController
from controllers.mesh_controller import MeshController
from errors import HistoryMismatchError, IndexRangeError
from models.dgs_models import DgsReport, GStateScalar
from models.mesh_models import TimeMesh

logger = logging.getLogger(__name__)


def _suffix_sums(w: np.ndarray) -> np.ndarray:
    """S[i] = w[i] + ... + w[-1] along the first axis"""
    return np.cumsum(w[::-1], axis=0)[::-1]


class DgsController:
    """Controller for the discrete gradient structure of FBDF2"""

    @staticmethod
    def g_func(x: float, y: float, alpha: float) -> float:
        """
        Energy-law weight g(x, y, alpha)

        Positive on [0, r*(alpha))^2 and zero at (r*, r*).
        """
        power = 2.0 - alpha / 2.0
        return (2.0 + 2.0 * (1.0 + alpha) * x - alpha * x ** power) / (1.0 + x) - alpha * y ** power / (1.0 + y)

    @staticmethod
    def g5_check(z: float, alpha: float) -> float:
        """alpha/(2-alpha)[(z+1)^(2-alpha) - z^(2-alpha)] - alpha (z+1)^(1-alpha) + alpha(1-alpha)(z+1)/(2-alpha)"""
        return (
            alpha / (2.0 - alpha) * ((z + 1.0) ** (2.0 - alpha) - z ** (2.0 - alpha))
            - alpha * (z + 1.0) ** (1.0 - alpha)
            + alpha * (1.0 - alpha) * (z + 1.0) / (2.0 - alpha)
        )

    @staticmethod
    def local_weight(r_next: float, tau: float, alpha: float) -> float:
        """alpha r^(2-alpha/2) / (2 (1+r) tau^alpha Gamma(3-alpha)), the first term of G"""
        return alpha * r_next ** (2.0 - alpha / 2.0) / (
            2.0 * (1.0 + r_next) * tau ** alpha * gamma(3.0 - alpha)
        )

    @staticmethod
    def y_from_squares(kernel: np.ndarray, squares: np.ndarray) -> float:
        """
        Y-form from squared suffix sums

        Args:
            kernel: Lag-indexed kernel of level n (length n)
            squares: squares[i] = |w_{i+1} + ... + w_n|^2, i = 0..n-1

        Returns:
            sum_{l=1}^{n-1} (kernel[l-1] - kernel[l]) squares[n-l] + kernel[n-1] squares[0]
        """
        n = len(squares)
        if len(kernel) < n:
            raise HistoryMismatchError(f"kernel of length {len(kernel)} cannot weigh {n} sums")
        kernel = np.asarray(kernel[:n])
        diffs = kernel[:-1] - kernel[1:]
        return float(np.dot(diffs, squares[1:][::-1]) + kernel[-1] * squares[0])

    @staticmethod
    def Y_functional(kernel: np.ndarray, w: Sequence[float]) -> float:
        """
        Quadratic form of the increments w_1..w_n

        Args:
            kernel: Lag-indexed kernel row of level n = len(w)
            w: Increments, oldest first

        Returns:
            Nonnegative value when the kernel is decreasing and convex
        """
        w = np.asarray(w, dtype=float)
        if len(kernel) != w.size:
            raise HistoryMismatchError(f"kernel length {len(kernel)} differs from history {w.size}")
        return DgsController.y_from_squares(kernel, _suffix_sums(w) ** 2)

    @staticmethod
    def Y_remainder(kernel: np.ndarray, kernel_prev: np.ndarray, w: Sequence[float]) -> float:
        """
        Remainder Y_R of the telescoping identity; needs rows n and n-1

        Args:
            kernel: Lag-indexed kernel of level n
            kernel_prev: Lag-indexed kernel of level n-1
            w: Increments w_1..w_n
        """
        w = np.asarray(w, dtype=float)
        n = w.size
        if n < 2:
            return 0.0
        suffix = _suffix_sums(w[:-1]) ** 2
        kernel = np.asarray(kernel)
        kernel_prev = np.asarray(kernel_prev)
        # j = 1..n-2 with lag l = n-1-j of level n-1
        total = (kernel_prev[n - 2] - kernel[n - 1]) * suffix[0]
        for j in range(1, n - 1):
            weight = (
                kernel_prev[n - 2 - j] - kernel_prev[n - 1 - j] - kernel[n - j - 1] + kernel[n - j]
            )
            total += weight * suffix[j]
        return float(total)

    @staticmethod
    def G_from_squares(
        A: np.ndarray,
        last_square: float,
        squares: np.ndarray,
        tau_n: float,
        r_next: float,
        alpha: float,
    ) -> float:
        """Local first term plus half the A-weighted Y-form"""
        return DgsController.local_weight(r_next, tau_n, alpha) * last_square + 0.5 * DgsController.y_from_squares(
            A, squares
        )

    @staticmethod
    def G_functional(state: GStateScalar) -> float:
        """
        Nonnegative history functional G at level n

        Raises:
            HistoryMismatchError: mesh lacks level n+1 (the next ratio is unknown)
        """
        n, mesh = state.n, state.mesh
        if mesh.N < n + 1:
            raise HistoryMismatchError(f"G at level {n} needs the ratio r_{n + 1}")
        A = KernelController.build_kernel_row(mesh, n, state.alpha).A
        squares = _suffix_sums(state.history) ** 2
        return DgsController.G_from_squares(
            A, state.history[-1] ** 2, squares, mesh.tau(n), mesh.ratio(n + 1), state.alpha
        )

    @staticmethod
    def dgs_nonlocal_check(mesh: TimeMesh, alpha: float, w: Sequence[float], n: int) -> float:
        """
        Margin of the nonlocal part: w_n sum a_hat w - (Y_A^{(n)} - Y_A^{(n-1)}) / 2

        Args:
            mesh: Time mesh with at least n steps
            alpha: Fractional order
            w: Increments w_1..w_n
            n: Level

        Returns:
            The margin (equals Y_R / 2, nonnegative under r_k >= R_*)
        """
        w = np.asarray(w, dtype=float)[:n]
        if w.size != n:
            raise HistoryMismatchError(f"level {n} needs {n} increments, got {w.size}")
        row = KernelController.build_kernel_row(mesh, n, alpha)
        lhs = w[-1] * float(np.dot(row.a_hat[::-1], w))
        y_now = DgsController.Y_functional(row.A, w)
        y_prev = 0.0
        if n > 1:
            y_prev = DgsController.Y_functional(KernelController.build_kernel_row(mesh, n - 1, alpha).A, w[:-1])
        return lhs - 0.5 * (y_now - y_prev)

    @staticmethod
    def _increments(v: Sequence[float], n: int) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.size < n + 1:
            raise HistoryMismatchError(f"level {n} needs values v^0..v^{n}, got {v.size}")
        return np.diff(v[: n + 1])

    @staticmethod
    def dgs_local_check(mesh: TimeMesh, alpha: float, v: Sequence[float], n: int) -> float:
        """
        Margin of the local BDF2-like term against its telescoped lower bound

        Needs levels up to n+1 since the bound references r_{n+1}.
        """
        if n < 2 or mesh.N < n + 1:
            raise IndexRangeError(f"local check needs 2 <= n <= N-1, got n={n}, N={mesh.N}")
        w = DgsController._increments(v, n)
        row = KernelController.build_kernel_row(mesh, n, alpha)
        r_n, r_next = mesh.ratio(n), mesh.ratio(n + 1)
        tau_n, tau_prev = mesh.tau(n), mesh.tau(n - 1)
        lhs = w[-1] * (row.local[0] * w[-1] + row.local[1] * w[-2])
        rhs = (
            DgsController.local_weight(r_next, tau_n, alpha) * w[-1] ** 2
            - DgsController.local_weight(r_n, tau_prev, alpha) * w[-2] ** 2
            + DgsController.g_func(r_n, r_next, alpha) / (2.0 * gamma(3.0 - alpha) * tau_n ** alpha) * w[-1] ** 2
        )
        return float(lhs - rhs)

    @staticmethod
    def dgs_full_check(mesh: TimeMesh, alpha: float, v: Sequence[float], n: int) -> DgsReport:
        """
        Both sides of (grad v^n)(D^alpha v)^n >= G_n - G_{n-1} + g/(2 Gamma(3-alpha) tau_n^alpha) (grad v^n)^2

        Args:
            mesh: Time mesh with at least n+1 steps
            alpha: Fractional order
            v: Values v^0..v^n
            n: Level >= 2

        Returns:
            DgsReport; hypothesis_ok is False when some ratio up to r_{n+1}
            leaves [R_*, r*(alpha)) and the margin is still computed
        """
        if n < 2 or mesh.N < n + 1:
            raise IndexRangeError(f"full check needs 2 <= n <= N-1, got n={n}, N={mesh.N}")
        w = DgsController._increments(v, n)
        row = KernelController.build_kernel_row(mesh, n, alpha)
        lhs = w[-1] * KernelController.apply_caputo(row, w, n)

        prefix = mesh.truncate(n + 1)
        g_now = DgsController.G_functional(GStateScalar(n=n, history=w, mesh=prefix, alpha=alpha))
        g_prev = DgsController.G_functional(GStateScalar(n=n - 1, history=w[:-1], mesh=prefix, alpha=alpha))
        g_term = DgsController.g_func(mesh.ratio(n), mesh.ratio(n + 1), alpha) / (
            2.0 * gamma(3.0 - alpha) * mesh.tau(n) ** alpha
        ) * w[-1] ** 2
        rhs = g_now - g_prev + g_term

        report = MeshController.validate_ratios(prefix, MeshController.ratio_bounds(alpha))
        if not report.ok:
            logger.debug("ratio condition violated at k=%s", [v.k for v in report.violations])
        return DgsReport(
            n=n,
            lhs=float(lhs),
            rhs=float(rhs),
            margin=float(lhs - rhs),
            scale=float(abs(lhs) + abs(g_now) + abs(g_prev) + abs(g_term)),
            hypothesis_ok=report.ok,
        )
