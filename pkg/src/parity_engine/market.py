"""Money-line arithmetic, vig removal and market calibration testing."""

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import stats

from ._csvio import write_csv
from .errors import DomainError, InsufficientData

MIN_LINE = 100


@dataclass(frozen=True)
class ImpliedPair:
    """Vig-free home/away win probabilities for one game."""

    p_home: float
    p_away: float
    vig: float


def boundary_probability(line):
    """Break-even win probability of a single American money line.

    >>> round(boundary_probability(-127), 3)
    0.559
    >>> round(boundary_probability(117), 3)
    0.461
    """
    line = float(line)
    if not math.isfinite(line) or abs(line) < MIN_LINE:
        raise DomainError(f"money line must satisfy |line| >= 100, got {line:g}")
    if line >= MIN_LINE:
        return 100.0 / (100.0 + line)
    return -line / (100.0 - line)


def implied_pair(home_line, away_line):
    """Normalise the two boundary probabilities so they sum to one.

    The returned ``vig`` is the bookmaker's overround. A negative vig (only
    seen in synthetic or corrupted data) triggers a ``RuntimeWarning``.
    """
    b_home = boundary_probability(home_line)
    b_away = boundary_probability(away_line)
    total = b_home + b_away
    vig = total - 1.0
    if vig < -1e-12:
        warnings.warn(f"negative vig {vig:.4f} for lines ({home_line}, {away_line})",
                      RuntimeWarning, stacklevel=2)
    p_home = b_home / total
    return ImpliedPair(p_home=p_home, p_away=1.0 - p_home, vig=vig)


def boundary_to_line(p):
    """Inverse of :func:`boundary_probability`, unrounded.

    Probabilities of at least one half map to favourite (negative) lines.
    """
    if not 0.0 < p < 1.0:
        raise DomainError(f"boundary probability must lie in (0, 1), got {p}")
    if p >= 0.5:
        return -100.0 * p / (1.0 - p)
    return 100.0 * (1.0 - p) / p


@dataclass(frozen=True)
class HosmerLemeshowResult:
    statistic: float
    p_value: float
    dof: int
    bins: list  # list of dicts, one per bin

    def write_bins(self, path):
        rows = [(b["bin_index"], b["n"], b["mean_implied_p"], b["observed_wins"],
                 b["expected_wins"]) for b in self.bins]
        write_csv(path, "hl_bins/1",
                  ["bin_index", "n", "mean_implied_p", "observed_wins", "expected_wins"], rows)


def _bin_sizes(n, bins):
    base, rem = divmod(n, bins)
    # remainder games go one per bin, starting from the last bin
    return [base + (1 if b >= bins - rem else 0) for b in range(bins)]


def hosmer_lemeshow(p, outcome, bins=10, dof=None):
    """Hosmer-Lemeshow goodness-of-fit test for externally supplied probabilities.

    Games are stably sorted by ``p`` and cut into ``bins`` contiguous groups
    whose sizes differ by at most one.

    Parameters
    ----------
    p : array_like
        Predicted (implied) home-win probabilities.
    outcome : array_like
        Observed 0/1 home wins.
    bins : int
        Number of groups.
    dof : int, optional
        Chi-square degrees of freedom. Defaults to ``bins``, the reference
        distribution for probabilities that were not fitted to these
        outcomes. Pass ``bins - 2`` for the in-sample variant.

    Returns
    -------
    HosmerLemeshowResult
    """
    p = np.asarray(p, dtype=float)
    y = np.asarray(outcome, dtype=float)
    if p.shape != y.shape or p.ndim != 1:
        raise ValueError("p and outcome must be 1-d arrays of equal length")
    if bins < 2:
        raise ValueError("bins must be at least 2")
    if len(p) < bins:
        raise InsufficientData(f"{len(p)} games cannot fill {bins} non-empty bins")
    if np.any((y != 0) & (y != 1)):
        raise ValueError("outcomes must be 0 or 1")
    order = np.argsort(p, kind="stable")
    p, y = p[order], y[order]

    stat = 0.0
    table = []
    start = 0
    for b, size in enumerate(_bin_sizes(len(p), bins)):
        pb, yb = p[start:start + size], y[start:start + size]
        start += size
        observed = float(yb.sum())
        expected = float(pb.sum())
        denom = expected * (1.0 - expected / size)
        if denom > 0:
            stat += (observed - expected) ** 2 / denom
        elif observed != expected:
            stat = math.inf
        table.append({"bin_index": b + 1, "n": size, "mean_implied_p": expected / size,
                      "observed_wins": observed, "expected_wins": expected})
    dof = bins if dof is None else int(dof)
    p_value = float(stats.chi2.sf(stat, dof))
    return HosmerLemeshowResult(statistic=float(stat), p_value=p_value, dof=dof, bins=table)
