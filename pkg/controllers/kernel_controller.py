"""
Kernel Controller - closed-form FBDF2 convolution coefficients on nonuniform meshes

All coefficients of a level n are produced together as lag-indexed arrays
(lag j = n - k). For k < n every coefficient is x^{-alpha}/Gamma(2-alpha) times
a bracket depending only on rho = tau_k / x with x = t_n - t_k; the brackets are
summed as binomial series for small rho and taken in closed form otherwise.
"""
import csv
import logging
from functools import lru_cache
from pathlib import Path
from typing import Dict, Mapping, Optional, Sequence, Union

import numpy as np
from pydantic import ValidationError
from scipy.special import gamma

from controllers.mesh_controller import MeshController
from errors import DomainError, HistoryMismatchError, IndexRangeError, ConfigError
from models.kernel_models import BridgingPair, FracWeightQuery, KernelPropertyReport, KernelRow
from models.mesh_models import TimeMesh

logger = logging.getLogger(__name__)

SERIES_RHO = 0.5
SERIES_TERMS = 64
KERNEL_TOL = 1e-12


@lru_cache(maxsize=64)
def _series_weights(p: float) -> Dict[str, np.ndarray]:
    """Coefficients of rho^(m-1), m = 2..SERIES_TERMS+1, in the I, J and eta series"""
    m = np.arange(2, SERIES_TERMS + 2, dtype=float)
    # C(p, m) by the ratio C(p, m+1) / C(p, m) = (p - m) / (m + 1)
    ratios = np.concatenate(([p * (p - 1.0) / 2.0], (p - m[:-1]) / (m[:-1] + 1.0)))
    binom = np.cumprod(ratios)
    weights = {
        "power": m - 1.0,
        "I": (1.0 - m) * binom,
        "J": -binom,
        "eta": (1.0 - m) / (m + 1.0) * binom,
    }
    for table in weights.values():
        table.setflags(write=False)
    return weights


def _brackets(p: float, rho: np.ndarray) -> Dict[str, np.ndarray]:
    """
    Dimensionless brackets of a, I, J and eta for p = 1 - alpha

    a   = ((1+rho)^p - 1)/rho
    I   = a - p (1+rho)^(p-1)
    J   = p - a
    eta = (2/rho^2) [((1+rho)^(p+1) - 1)/(p+1) - rho/2 ((1+rho)^p + 1)]
    """
    log1p = np.log1p(rho)
    a = np.expm1(p * log1p) / rho
    out = {
        "a": a,
        "I": a - p * np.exp((p - 1.0) * log1p),
        "J": p - a,
        "eta": 2.0 / rho ** 2
        * (np.expm1((p + 1.0) * log1p) / (p + 1.0) - 0.5 * rho * (np.exp(p * log1p) + 1.0)),
    }
    small = rho <= SERIES_RHO
    if not np.any(small):
        return out

    weights = _series_weights(float(p))
    powers = rho[small][:, None] ** weights["power"][None, :]
    out["I"][small] = powers @ weights["I"]
    out["J"][small] = powers @ weights["J"]
    out["eta"][small] = powers @ weights["eta"]
    return out


def _lag_coefficients(levels: np.ndarray, n: int, alpha: float) -> Dict[str, np.ndarray]:
    """a, eta, I, J of level n as arrays over lag j = 0..n-1 (J[0] is nan)"""
    gamma2 = gamma(2.0 - alpha)
    tau_n = levels[n] - levels[n - 1]
    base = tau_n ** (-alpha)
    a = np.empty(n)
    eta = np.empty(n)
    bridge_i = np.empty(n)
    bridge_j = np.full(n, np.nan)
    a[0] = base / gamma2
    eta[0] = alpha * base / gamma(3.0 - alpha)
    bridge_i[0] = alpha * base / gamma2
    if n > 1:
        k = np.arange(n - 1, 0, -1)
        x = levels[n] - levels[k]
        rho = (levels[k] - levels[k - 1]) / x
        scale = x ** (-alpha) / gamma2
        br = _brackets(1.0 - alpha, rho)
        a[1:] = scale * br["a"]
        eta[1:] = scale * br["eta"]
        bridge_i[1:] = scale * br["I"]
        bridge_j[1:] = scale * br["J"]
    return {"a": a, "eta": eta, "I": bridge_i, "J": bridge_j}


def _check_level(mesh: TimeMesh, n: int, k: Optional[int] = None) -> None:
    if not 1 <= n <= mesh.N:
        raise IndexRangeError(f"level n={n} outside 1..{mesh.N}")
    if k is not None and not 1 <= k <= n:
        raise IndexRangeError(f"index k={k} outside 1..{n}")


def _check_order(alpha: float) -> None:
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"fractional order must lie in (0, 1), got {alpha}")


class KernelController:
    """Controller for the discrete Caputo kernels"""

    @staticmethod
    def omega(beta: float, t: float) -> float:
        """
        Fractional weight t^(beta-1) / Gamma(beta)

        Args:
            beta: Exponent, > 0
            t: Elapsed time, > 0

        Returns:
            omega_beta(t)

        Raises:
            DomainError: t <= 0 or beta <= 0
        """
        try:
            query = FracWeightQuery(beta=beta, t=t)
        except ValidationError as e:
            raise DomainError(f"omega needs beta > 0 and t > 0, got beta={beta}, t={t}") from e
        return float(query.t ** (query.beta - 1.0) / gamma(query.beta))

    @staticmethod
    def coeff_a(mesh: TimeMesh, n: int, k: int, alpha: float) -> float:
        """a^{(n)}_{n-k} = [omega_{2-a}(t_n - t_{k-1}) - omega_{2-a}(t_n - t_k)] / tau_k"""
        _check_order(alpha)
        _check_level(mesh, n, k)
        return float(_lag_coefficients(mesh.levels, n, alpha)["a"][n - k])

    @staticmethod
    def coeff_eta(mesh: TimeMesh, n: int, k: int, alpha: float) -> float:
        """eta^{(n)}_{n-k}; equals alpha tau_n^{-alpha} / Gamma(3-alpha) for k = n"""
        _check_order(alpha)
        _check_level(mesh, n, k)
        return float(_lag_coefficients(mesh.levels, n, alpha)["eta"][n - k])

    @staticmethod
    def bridging_integrals(mesh: TimeMesh, n: int, k: int, alpha: float) -> BridgingPair:
        """
        Bridging integrals I^{(n)}_{n-k} (1 <= k <= n) and J^{(n)}_{n-k} (1 <= k <= n-1)

        Returns:
            BridgingPair; J is None when k = n
        """
        _check_order(alpha)
        _check_level(mesh, n, k)
        coeffs = _lag_coefficients(mesh.levels, n, alpha)
        j = n - k
        return BridgingPair(
            I=float(coeffs["I"][j]),
            J=None if k == n else float(coeffs["J"][j]),
        )

    @staticmethod
    def build_kernel_row(mesh: TimeMesh, n: int, alpha: float) -> KernelRow:
        """
        Assemble a, eta, B, a_hat, A and the local pair of level n

        Level 1 uses the L1 start: B = a_hat = a, local = 0.

        Args:
            mesh: Time mesh with at least n steps
            n: Level index >= 1
            alpha: Fractional order in (0, 1)

        Returns:
            Immutable KernelRow
        """
        _check_order(alpha)
        _check_level(mesh, n)
        levels = mesh.levels
        coeffs = _lag_coefficients(levels, n, alpha)
        a, eta = coeffs["a"], coeffs["eta"]

        if n == 1:
            return KernelRow(
                n=1, alpha=alpha, a=a, eta=eta, B=a, a_hat=a, A=2.0 * a, local=[0.0, 0.0]
            )

        steps = np.diff(levels[: n + 1])
        ratios = np.zeros(n + 1)
        ratios[2:] = steps[1:] / steps[:-1]
        r_n = ratios[n]
        lag = np.arange(n)
        # r_{k} and r_{k+1} for k = n - j
        r_k = ratios[n - lag]
        r_k1 = np.zeros(n)
        r_k1[1:] = ratios[n - lag[1:] + 1]

        # eta_{j+1} / (r_k (1 + r_k)) for k >= 2, i.e. j <= n-2
        upper = np.zeros(n)
        upper[:-1] = eta[1:] / (r_k[:-1] * (1.0 + r_k[:-1]))
        # eta_j / (1 + r_{k+1}) for k <= n-1, i.e. j >= 1
        lower = np.zeros(n)
        lower[1:] = eta[1:] / (1.0 + r_k1[1:])

        B = a + upper - lower
        B[0] += r_n * eta[0] / (1.0 + r_n)
        B[1] -= r_n ** 2 * eta[0] / (1.0 + r_n)

        a_hat = a + upper - lower
        a_hat[0] = (1.0 - alpha) / (2.0 - alpha) * a[0] + upper[0]

        local = np.array(
            [
                a[0] / (2.0 - alpha) + r_n * eta[0] / (1.0 + r_n),
                -(r_n ** 2) * eta[0] / (1.0 + r_n),
            ]
        )
        A = a_hat.copy()
        A[0] *= 2.0
        return KernelRow(n=n, alpha=alpha, a=a, eta=eta, B=B, a_hat=a_hat, A=A, local=local)

    @staticmethod
    def build_kernel_rows(mesh: TimeMesh, alpha: float, up_to_n: Optional[int] = None) -> Dict[int, KernelRow]:
        """Rows 1..up_to_n (default: all levels) keyed by n"""
        up_to_n = mesh.N if up_to_n is None else up_to_n
        return {n: KernelController.build_kernel_row(mesh, n, alpha) for n in range(1, up_to_n + 1)}

    @staticmethod
    def apply_caputo(
        rows: Union[KernelRow, Mapping[int, KernelRow]],
        increments: Union[Sequence, np.ndarray],
        n: int,
    ):
        """
        Discrete Caputo derivative sum_{k=1}^n B^{(n)}_{n-k} increments[k-1]

        Args:
            rows: The level-n row, or a mapping n -> KernelRow
            increments: Scalars or equally shaped arrays, k = 1..n first
            n: Level index

        Returns:
            Scalar or array with the shape of one increment

        Raises:
            HistoryMismatchError: fewer than n increments or no row for level n
        """
        row = rows if isinstance(rows, KernelRow) else rows.get(n)
        if row is None or row.n != n:
            raise HistoryMismatchError(f"no kernel row for level {n}")
        history = np.asarray(increments)
        if history.shape[0] < n:
            raise HistoryMismatchError(f"level {n} needs {n} increments, got {history.shape[0]}")
        result = np.tensordot(row.B[::-1], history[:n], axes=1)
        return float(result) if np.ndim(result) == 0 else result

    @staticmethod
    def _hypothesis(mesh: TimeMesh, up_to_n: int, report: KernelPropertyReport) -> None:
        R_lower = MeshController.R_star()
        ratios = mesh.ratios
        bad = [k for k in range(2, up_to_n + 1) if ratios[k] < R_lower]
        if bad:
            report.hypothesis_ok = False
            report.hypothesis_violations = bad
            logger.warning("ratio hypothesis r_k >= R_* violated at k=%s", bad[:10])

    @staticmethod
    def _finish(report: KernelPropertyReport, margins: Dict[str, float]) -> KernelPropertyReport:
        for name, margin in margins.items():
            report.worst_margins[name] = float(margin)
            report.verdicts[name] = bool(margin >= -KERNEL_TOL)
        return report

    @staticmethod
    def check_kernel_properties(mesh: TimeMesh, alpha: float, up_to_n: int) -> KernelPropertyReport:
        """
        Certify positivity, row decrease, column decrease and convexity of the A kernels

        Margins are relative to the first entry of the row involved; the worst
        (smallest) margin of each family is reported and a family passes when it
        is not below -1e-12.

        Args:
            mesh: Time mesh
            alpha: Fractional order
            up_to_n: Largest level examined

        Returns:
            KernelPropertyReport with families row_decrease, column_decrease, convexity
        """
        _check_level(mesh, up_to_n)
        report = KernelPropertyReport(alpha=alpha, up_to_n=up_to_n)
        KernelController._hypothesis(mesh, up_to_n, report)
        margins = {"row_decrease": np.inf, "column_decrease": np.inf, "convexity": np.inf}
        previous = None
        for n in range(1, up_to_n + 1):
            A = KernelController.build_kernel_row(mesh, n, alpha).A
            scale = A[0]
            row_margin = min(A[-1], np.min(A[:-1] - A[1:], initial=np.inf)) / scale
            margins["row_decrease"] = min(margins["row_decrease"], row_margin)
            if previous is not None:
                column = (previous[: n - 1] - A[1:]) / previous[0]
                margins["column_decrease"] = min(margins["column_decrease"], column.min())
                if n >= 3:
                    convex = (
                        (previous[: n - 2] - previous[1 : n - 1]) - (A[1 : n - 1] - A[2:n])
                    ) / previous[0]
                    margins["convexity"] = min(margins["convexity"], convex.min())
            previous = A
        return KernelController._finish(report, {k: v for k, v in margins.items() if np.isfinite(v)})

    @staticmethod
    def check_eta_lemmas(mesh: TimeMesh, alpha: float, up_to_n: int) -> KernelPropertyReport:
        """
        Certify the eta inequalities: column decrease, eta_{j-1} > r_{k+1} eta_j
        and the column decrease of that difference
        """
        _check_level(mesh, up_to_n)
        report = KernelPropertyReport(alpha=alpha, up_to_n=up_to_n)
        ratios = mesh.ratios
        margins = {"eta_column": np.inf, "eta_ratio": np.inf, "eta_ratio_column": np.inf}
        previous = None
        for n in range(2, up_to_n + 1):
            eta = _lag_coefficients(mesh.levels, n, alpha)["eta"]
            lag = np.arange(1, n)
            r_next = ratios[n - lag + 1]
            diff = eta[lag - 1] - r_next * eta[lag]
            margins["eta_ratio"] = min(margins["eta_ratio"], (diff / eta[0]).min())
            if previous is not None:
                prev_eta, prev_diff = previous
                margins["eta_column"] = min(
                    margins["eta_column"], ((prev_eta[: n - 1] - eta[1:]) / prev_eta[0]).min()
                )
                if n >= 3:
                    # same k: lag j at level n against lag j-1 at level n-1
                    column = (prev_diff[: n - 2] - diff[1:]) / prev_eta[0]
                    margins["eta_ratio_column"] = min(margins["eta_ratio_column"], column.min())
            else:
                prev_eta = _lag_coefficients(mesh.levels, 1, alpha)["eta"]
                margins["eta_column"] = min(
                    margins["eta_column"], ((prev_eta[:1] - eta[1:]) / prev_eta[0]).min()
                )
            previous = (eta, diff)
        return KernelController._finish(report, {k: v for k, v in margins.items() if np.isfinite(v)})

    @staticmethod
    def check_bridging_lemmas(mesh: TimeMesh, alpha: float, up_to_n: int) -> KernelPropertyReport:
        """
        Certify I > eta, J > 3 eta and the column decrease of I - eta and J - 3 eta,
        together with both bridging identities of the a coefficients
        """
        _check_level(mesh, up_to_n)
        report = KernelPropertyReport(alpha=alpha, up_to_n=up_to_n)
        margins = {
            "I_above_eta": np.inf,
            "J_above_3eta": np.inf,
            "I_column": np.inf,
            "J_column": np.inf,
            "identity_i": np.inf,
            "identity_ii": np.inf,
        }
        previous = KernelController._bridge_excess(mesh.levels, 1, alpha)
        for n in range(2, up_to_n + 1):
            coeffs = _lag_coefficients(mesh.levels, n, alpha)
            a, eta = coeffs["a"], coeffs["eta"]
            i_excess, j_excess = KernelController._bridge_excess(mesh.levels, n, alpha)
            scale = a[0]
            margins["I_above_eta"] = min(margins["I_above_eta"], (i_excess / scale).min())
            margins["J_above_3eta"] = min(margins["J_above_3eta"], (j_excess[1:] / scale).min())
            prev_i, prev_j = previous
            margins["I_column"] = min(
                margins["I_column"], ((prev_i[: n - 1] - i_excess[1:]) / scale).min()
            )
            if n >= 3:
                margins["J_column"] = min(
                    margins["J_column"], ((prev_j[1 : n - 1] - j_excess[2:]) / scale).min()
                )
            # identities are equalities: record minus their absolute residual
            residual_i = np.abs(a[:-1] - a[1:] - coeffs["I"][:-1] - coeffs["J"][1:]) / scale
            tau_n = mesh.tau(n)
            omega_tau = tau_n ** (-alpha) / gamma(1.0 - alpha)
            residual_ii = abs(
                2.0 * (1.0 - alpha) / (2.0 - alpha) * a[0]
                - a[1]
                - alpha / (2.0 - alpha) * omega_tau
                - coeffs["J"][1]
            ) / scale
            margins["identity_i"] = min(margins["identity_i"], -residual_i.max())
            margins["identity_ii"] = min(margins["identity_ii"], -residual_ii)
            previous = (i_excess, j_excess)
        return KernelController._finish(report, {k: v for k, v in margins.items() if np.isfinite(v)})

    @staticmethod
    def _bridge_excess(levels: np.ndarray, n: int, alpha: float):
        coeffs = _lag_coefficients(levels, n, alpha)
        return coeffs["I"] - coeffs["eta"], coeffs["J"] - 3.0 * coeffs["eta"]

    @staticmethod
    def dump_rows_csv(mesh: TimeMesh, alpha: float, path: Union[str, Path], up_to_n: Optional[int] = None) -> Path:
        """Write columns n, k, a, eta, B, a_hat, A for every level"""
        path = Path(path)
        rows = KernelController.build_kernel_rows(mesh, alpha, up_to_n)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            with path.open("w", newline="") as handle:
                writer = csv.writer(handle)
                writer.writerow(["n", "k", "a", "eta", "B", "a_hat", "A"])
                for n, row in rows.items():
                    for k in range(1, n + 1):
                        j = n - k
                        writer.writerow(
                            [n, k] + [repr(float(v[j])) for v in (row.a, row.eta, row.B, row.a_hat, row.A)]
                        )
        except OSError as e:
            raise ConfigError(f"cannot write kernel CSV {path}: {e}") from e
        logger.info("wrote %d kernel rows to %s", len(rows), path)
        return path
