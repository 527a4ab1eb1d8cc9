"""Finite-difference gradient checking"""

from dataclasses import dataclass, field

import numpy as np

from numcore.tensor import as_tensor
from utils.errors import NumericError, ParameterError

# Coordinates where both gradients are below this agree by definition
MAGNITUDE_FLOOR = 1e-8
MACHINE_EPS = np.finfo(np.float64).eps
# Round-off allowed in each evaluation of f, in ulps
ROUNDOFF_ULPS = 8.0


@dataclass
class GradCheckReport:
    """Outcome of a gradient check"""
    max_rel_err: float
    passed: bool
    checked: int
    skipped: list = field(default_factory=list)
    ties: list = field(default_factory=list)
    near_zero: list = field(default_factory=list)
    worst_index: int = -1


def grad_check(f, grad_fn, x, h=1e-6, tol=1e-4, ties=None):
    """Compare an analytic gradient with central differences

    Every coordinate except ties is compared. Both magnitudes at or below 1e-8
    count as agreement (listed in near_zero); otherwise the relative error is
    taken after subtracting the round-off of the two evaluations of f.

    Args:
        f: Scalar function of a flat float64 vector
        grad_fn: Analytic gradient of f, same shape as x
        x: Point to check at
        h (float): Finite-difference step
        tol (float): Maximum allowed relative error
        ties: Optional boolean mask (or callable x -> mask) of coordinates at a
            non-differentiable point; those are reported and skipped

    Returns:
        GradCheckReport: max relative error and pass flag
    """
    if h <= 0:
        raise ParameterError(f"Finite-difference step must be positive, got {h}")
    if tol <= 0:
        raise ParameterError(f"Tolerance must be positive, got {tol}")
    x = as_tensor(x).ravel().copy()
    analytic = as_tensor(grad_fn(x.copy())).ravel()
    if analytic.shape != x.shape:
        raise ParameterError(f"Gradient shape {analytic.shape} does not match input {x.shape}")

    if callable(ties):
        ties = ties(x.copy())
    tie_mask = np.zeros(x.shape, dtype=bool) if ties is None else np.asarray(ties, dtype=bool).ravel()

    report = GradCheckReport(max_rel_err=0.0, passed=True, checked=0)
    for k in range(x.size):
        if tie_mask[k]:
            report.ties.append(k)
            report.skipped.append(k)
            continue

        x_plus = x.copy()
        x_plus[k] += h
        x_minus = x.copy()
        x_minus[k] -= h
        f_plus = float(f(x_plus))
        f_minus = float(f(x_minus))
        if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
            raise NumericError(f"Non-finite function value at coordinate {k}", location=k)

        numeric = (f_plus - f_minus) / (2.0 * h)
        report.checked += 1
        scale = max(abs(numeric), abs(analytic[k]))
        if scale <= MAGNITUDE_FLOOR:
            report.near_zero.append(k)
            continue
        roundoff = ROUNDOFF_ULPS * MACHINE_EPS * max(abs(f_plus), abs(f_minus)) / h
        rel_err = max(abs(numeric - analytic[k]) - roundoff, 0.0) / scale
        if rel_err > report.max_rel_err:
            report.max_rel_err = rel_err
            report.worst_index = k

    report.passed = report.max_rel_err <= tol
    return report
