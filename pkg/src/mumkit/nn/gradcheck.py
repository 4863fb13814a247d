"""Central finite-difference verification of analytic gradients."""

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from loguru import logger


@dataclass
class GradcheckReport:
    """Per-array relative errors ||a - n|| / (||a|| + ||n||)."""

    name: str
    tolerance: float
    errors: dict[str, float] = field(default_factory=dict)

    @property
    def max_rel_error(self) -> float:
        return max(self.errors.values(), default=0.0)

    @property
    def failures(self) -> list[str]:
        return [k for k, e in self.errors.items() if not e < self.tolerance]

    @property
    def passed(self) -> bool:
        return not self.failures

    def summary(self) -> str:
        status = "ok" if self.passed else "FAILED " + ", ".join(self.failures)
        return f"{self.name}: max rel err {self.max_rel_error:.3e} ({status})"


ZERO_GRADIENT_ATOL = 1e-7


def relative_error(
    analytic: np.ndarray, numeric: np.ndarray, atol: float = ZERO_GRADIENT_ATOL
) -> float:
    """||a - n|| / (||a|| + ||n||), or 0 when both norms are below ``atol``.

    Parameters whose true gradient is zero (a conv bias feeding train-mode
    batch norm) leave only rounding noise on both sides.
    """
    norm_a = float(np.linalg.norm(analytic))
    norm_n = float(np.linalg.norm(numeric))
    if max(norm_a, norm_n) < atol:
        return 0.0
    denom = norm_a + norm_n
    return float(np.linalg.norm(analytic - numeric)) / denom


def numerical_gradient(
    loss_fn: Callable[[], float], array: np.ndarray, eps: float = 1e-5
) -> np.ndarray:
    """Perturb ``array`` in place one element at a time; restores it afterwards."""
    grad = np.zeros_like(array)
    flat = array.reshape(-1)
    out = grad.reshape(-1)
    for i in range(flat.size):
        original = flat[i]
        flat[i] = original + eps
        plus = loss_fn()
        flat[i] = original - eps
        minus = loss_fn()
        flat[i] = original
        out[i] = (plus - minus) / (2.0 * eps)
    return grad


def gradcheck(
    name: str,
    loss_fn: Callable[[], float],
    arrays: dict[str, np.ndarray],
    analytic: dict[str, np.ndarray],
    tolerance: float = 1e-4,
    eps: float = 1e-5,
) -> GradcheckReport:
    """Compare ``analytic[k]`` with central differences of ``loss_fn`` over ``arrays[k]``.

    ``loss_fn`` must read the arrays by reference so in-place perturbations
    reach it.
    """
    report = GradcheckReport(name=name, tolerance=tolerance)
    for key, array in arrays.items():
        numeric = numerical_gradient(loss_fn, array, eps)
        report.errors[key] = relative_error(analytic[key], numeric)
        logger.debug(f"gradcheck {name}/{key}: rel err {report.errors[key]:.3e}")
    return report


def nudge_from_zero(x: np.ndarray, margin: float = 1e-3) -> np.ndarray:
    """Push entries with |x| < margin out to +-margin, away from the ReLU kink."""
    sign = np.where(x >= 0.0, 1.0, -1.0)
    return np.where(np.abs(x) < margin, sign * margin, x)
