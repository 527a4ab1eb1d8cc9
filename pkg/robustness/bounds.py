"""Numeric evaluators for the margin generalization bound and the ensemble
certified-error bound, plus a Monte-Carlo check of the latter"""

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from ensemble.ensemble_model import EnsembleModel
from numcore.rng import Rng
from numcore.tensor import as_tensor
from robustness.certify import radius_matrix
from robustness.evaluate import certified_train_error
from utils.errors import ParameterError
from utils.logger import get_logger

CONSTANT_CAVEAT = ("Complexity term is known only up to the unspecified constant C "
                   "and logarithmic factors; the bound holds up to constants")
MU_CAVEAT = ("Per-sample expected margins are replaced by sample means over the "
             "base networks; the bound is an estimate, not a guarantee")
VACUOUS_CAVEAT = "Best bracketed term is >= 1; the bound is vacuous"


@dataclass
class BoundReport:
    """Itemized bound evaluation; fields that do not apply stay None"""
    theorem: int
    bound: float
    n: int
    t: float
    r: float
    caveats: list = field(default_factory=list)
    # margin generalization bound
    delta_grid: Optional[list] = None
    term1: Optional[list] = None
    term2: Optional[list] = None
    term3: Optional[list] = None
    totals: Optional[list] = None
    chosen_delta: Optional[float] = None
    t_term: Optional[float] = None
    W: Optional[int] = None
    L: Optional[int] = None
    C: Optional[float] = None
    # ensemble certified-error bound
    m: Optional[int] = None
    mu_hat: Optional[list] = None
    threshold: Optional[float] = None
    indicators: Optional[list] = None

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)

    def save(self, path):
        with open(path, "w", encoding="utf-8") as f:
            f.write(self.to_json() + "\n")

    def format_table(self):
        if self.theorem == 2:
            lines = [f"{'delta':>10} {'margin':>10} {'complexity':>11} {'loglog':>10} {'total':>10}"]
            for row in zip(self.delta_grid, self.term1, self.term2, self.term3, self.totals):
                lines.append(" ".join(f"{v:>10.4g}" for v in row[:2]) + f" {row[2]:>11.4g} "
                             + " ".join(f"{v:>10.4g}" for v in row[3:]))
            lines.append(f"chosen delta={self.chosen_delta:.4g} t/sqrt(n)={self.t_term:.4g} bound={self.bound:.4g}")
            return "\n".join(lines)
        return (f"m={self.m} n={self.n} t={self.t:g} r={self.r:g} "
                f"threshold={self.threshold:.4f} bound={self.bound:.4f}")


def parse_delta_grid(text):
    """Parse 'start:stop:count' (inclusive, evenly spaced) or a comma list"""
    try:
        if ":" in text:
            start, stop, count = text.split(":")
            return np.linspace(float(start), float(stop), int(count)).tolist()
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise ParameterError(f"Bad delta grid '{text}': {e}") from e


def theorem2_margin_bound(margins, r, delta_grid, W, L, n=None, t=1.0, C=1.0):
    """Margin generalization bound minimized over a grid of deltas

    For each delta: term1 = fraction of margins <= delta + r,
    term2 = C * L * W**2 / (delta * sqrt(n)), term3 = sqrt(log(log2(2 / delta)) / n).
    The reported bound is min(1, min over the grid of the sum) + t / sqrt(n).

    Returns:
        BoundReport: Every term per delta, the chosen delta and caveats
    """
    margins = as_tensor(margins, name="margins").ravel()
    if margins.size == 0:
        raise ParameterError("Margin bound needs at least one margin")
    if n is None:
        n = margins.size
    elif n != margins.size:
        raise ParameterError(f"n={n} does not match {margins.size} margins")
    grid = [float(d) for d in delta_grid]
    if not grid:
        raise ParameterError("Delta grid is empty")
    if any(not 0.0 < d <= 1.0 for d in grid):
        raise ParameterError(f"Delta grid values must lie in (0, 1], got {grid}")
    if not t > 0:
        raise ParameterError(f"t must be > 0, got {t}")
    if W < 1 or L < 1:
        raise ParameterError(f"Width and depth must be >= 1, got W={W}, L={L}")
    if r < 0 or C < 0:
        raise ParameterError(f"r and C must be >= 0, got r={r}, C={C}")

    sqrt_n = math.sqrt(n)
    term1 = [float(np.mean(margins <= d + r)) for d in grid]
    term2 = [C * L * W ** 2 / (d * sqrt_n) for d in grid]
    term3 = [math.sqrt(math.log(math.log2(2.0 / d)) / n) if d < 1.0 else 0.0 for d in grid]
    totals = [a + b + c for a, b, c in zip(term1, term2, term3)]
    best = int(np.argmin(totals))
    t_term = t / sqrt_n

    caveats = [CONSTANT_CAVEAT]
    if totals[best] >= 1.0:
        caveats.append(VACUOUS_CAVEAT)
    return BoundReport(theorem=2, bound=min(1.0, totals[best]) + t_term, n=n, t=t, r=r, caveats=caveats,
                       delta_grid=grid, term1=term1, term2=term2, term3=term3, totals=totals,
                       chosen_delta=grid[best], t_term=t_term, W=int(W), L=int(L), C=float(C))


def _check_t(t):
    if not 0.0 < t <= 1.0:
        raise ParameterError(f"t must lie in (0, 1], got {t}")


def bound_from_means(mu_hat, m, r, t):
    """Ensemble bound from per-sample mean radii of m-member ensembles"""
    _check_t(t)
    if m < 1:
        raise ParameterError(f"Ensemble size m must be >= 1, got {m}")
    mu_hat = as_tensor(mu_hat, name="mu_hat").ravel()
    n = mu_hat.size
    if n == 0:
        raise ParameterError("Need at least one sample")
    threshold = math.sqrt(math.log(n / t) / (2.0 * m))
    indicators = r >= mu_hat - threshold
    return BoundReport(theorem=3, bound=float(np.mean(indicators)), n=n, t=t, r=r, caveats=[MU_CAVEAT],
                       m=int(m), mu_hat=mu_hat.tolist(), threshold=threshold,
                       indicators=[bool(v) for v in indicators])


def theorem3_bound(rho, r, t):
    """Ensemble certified-error bound from an n x m matrix of base radii in [0, 1]

    bound = mean_i [r >= mean_j rho_ij - sqrt(log(n / t) / (2m))]
    """
    _check_t(t)
    rho = as_tensor(rho, name="rho")
    if rho.ndim != 2 or rho.size == 0:
        raise ParameterError(f"rho must be a non-empty n x m matrix, got shape {rho.shape}")
    if rho.min() < 0.0 or rho.max() > 1.0:
        raise ParameterError("rho entries must lie in [0, 1]; clamp the radii first")
    return bound_from_means(rho.mean(axis=1), rho.shape[1], r, t)


def theorem3_empirical_check(base_pool, train_set, r, m, t, trials, seed=0, replace=True,
                             threads=1, logger=None):
    """Fraction of random m-member Fusion ensembles whose certified training
    error exceeds the bound

    Each trial draws m pool indices (with or without replacement); the mean
    radii come from the pool networks left out of that draw, or from the whole
    pool when none are left out.
    """
    logger = logger or get_logger("robustness")
    pool = list(base_pool)
    if m < 1 or len(pool) < m:
        raise ParameterError(f"Pool of {len(pool)} networks cannot form ensembles of {m}")
    if trials < 1:
        raise ParameterError(f"trials must be >= 1, got {trials}")
    _check_t(t)

    rho = radius_matrix(pool, train_set.features, train_set.labels, threads)
    rng = Rng(seed)
    violations = 0
    for trial in range(trials):
        if replace:
            picks = [rng.randint(len(pool)) for _ in range(m)]
        else:
            picks = rng.permutation(len(pool))[:m].tolist()
        held_out = np.setdiff1d(np.arange(len(pool)), picks)
        columns = held_out if held_out.size else np.arange(len(pool))
        report = bound_from_means(rho[:, columns].mean(axis=1), m, r, t)
        ensemble = EnsembleModel([pool[i] for i in picks])
        error = certified_train_error(ensemble, train_set, r, threads)
        if error > report.bound:
            violations += 1
            logger.debug(f"Trial {trial}: certified error {error:.4f} exceeds bound {report.bound:.4f}")
    frequency = violations / trials
    logger.info(f"Bound violated in {violations}/{trials} trials ({frequency:.3f}) at r={r}, m={m}, t={t}")
    return frequency
