"""Convergence diagnostics: split R-hat and effective sample size."""

import math
from dataclasses import dataclass, field

import numpy as np

from ._csvio import write_csv
from .errors import InsufficientDraws

RHAT_THRESHOLD = 1.1


@dataclass
class ChainDiagnostics:
    """Per-parameter diagnostics; ``degenerate`` lists zero-variance parameters."""

    rhat: dict
    ess: dict
    degenerate: list = field(default_factory=list)
    slice_evaluations: dict = field(default_factory=dict)

    @property
    def flagged(self):
        return sorted(k for k, v in self.rhat.items() if np.isfinite(v) and v > RHAT_THRESHOLD)

    def write(self, path):
        rows = [(name, self.rhat[name], self.ess[name], int(name in self.degenerate),
                 int(name in self.flagged)) for name in self.rhat]
        write_csv(path, "diagnostics/1", ["parameter", "rhat", "ess", "degenerate", "flagged"], rows)


def _split(x):
    m, n = x.shape
    half = n // 2
    return np.concatenate([x[:, :half], x[:, n - half:]], axis=0)


def split_rhat(x):
    """Split potential scale reduction factor for an ``(chains, draws)`` array."""
    x = _split(np.asarray(x, dtype=float))
    n = x.shape[1]
    w = np.mean(np.var(x, axis=1, ddof=1))
    if w == 0 or not np.isfinite(w):
        return math.nan
    b = n * np.var(np.mean(x, axis=1), ddof=1)
    var_plus = (n - 1) / n * w + b / n
    return float(math.sqrt(var_plus / w))


def _autocov(x):
    n = x.shape[-1]
    size = 1 << (2 * n - 1).bit_length()
    xc = x - x.mean(axis=-1, keepdims=True)
    f = np.fft.rfft(xc, size)
    return np.fft.irfft(f * np.conj(f), size)[..., :n] / n


def ess(x):
    """Effective sample size via Geyer's initial monotone sequence on split chains."""
    x = _split(np.asarray(x, dtype=float))
    m, n = x.shape
    acov = _autocov(x)
    chain_var = acov[:, 0] * n / (n - 1)
    mean_var = np.mean(chain_var)
    var_plus = mean_var * (n - 1) / n
    if m > 1:
        var_plus += np.var(np.mean(x, axis=1), ddof=1)
    if var_plus == 0 or not np.isfinite(var_plus):
        return math.nan
    rho = np.zeros(n)
    rho[0] = 1.0
    rho_even = 1.0
    rho_odd = 1.0 - (mean_var - np.mean(acov[:, 1])) / var_plus if n > 1 else 0.0
    if n > 1:
        rho[1] = rho_odd
    t = 1
    while t < n - 3 and rho_even + rho_odd > 0:
        rho_even = 1.0 - (mean_var - np.mean(acov[:, t + 1])) / var_plus
        rho_odd = 1.0 - (mean_var - np.mean(acov[:, t + 2])) / var_plus
        if rho_even + rho_odd >= 0:
            rho[t + 1], rho[t + 2] = rho_even, rho_odd
        t += 2
    max_t = t
    if rho_even > 0 and max_t + 1 < n:
        rho[max_t + 1] = rho_even
    t = 1
    while t <= max_t - 2:
        if rho[t + 1] + rho[t + 2] > rho[t - 1] + rho[t]:
            rho[t + 1] = rho[t + 2] = 0.5 * (rho[t - 1] + rho[t])
        t += 2
    tau = -1.0 + 2.0 * np.sum(rho[:max_t + 1]) + (rho[max_t + 1] if max_t + 1 < n else 0.0)
    tau = max(tau, 1.0 / math.log10(m * n)) if m * n > 1 else tau
    return float(m * n / tau)


def diagnostics(draws, parameters=None):
    """Split R-hat and ESS for every scalar parameter of a fit.

    Parameters
    ----------
    draws : PosteriorDraws
    parameters : list of str, optional
        Restrict to these parameter names.
    """
    chains = np.unique(draws.chain)
    if len(chains) < 2:
        raise InsufficientDraws("diagnostics need at least 2 chains")
    per_chain = min(int(np.sum(draws.chain == c)) for c in chains)
    if per_chain < 10:
        raise InsufficientDraws("diagnostics need at least 10 draws per chain")
    names = parameters or draws.parameter_names()
    out = ChainDiagnostics(rhat={}, ess={},
                           slice_evaluations=dict(draws.meta.get("slice_evaluations", {})))
    for name in names:
        x = draws.by_chain(np.asarray(draws.values(name), dtype=float))
        if not np.all(np.isfinite(x)) or np.all(np.ptp(x, axis=1) == 0):
            out.rhat[name] = math.nan
            out.ess[name] = math.nan
            out.degenerate.append(name)
            continue
        out.rhat[name] = split_rhat(x)
        out.ess[name] = ess(x)
    return out


def chain_diagnostics(chains):
    """Diagnostics for a raw ``(chains, draws)`` array: ``(rhat, ess, degenerate)``."""
    x = np.asarray(chains, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2:
        raise InsufficientDraws("need an array of at least 2 chains")
    if x.shape[1] < 10:
        raise InsufficientDraws("need at least 10 draws per chain")
    if np.all(np.ptp(x, axis=1) == 0):
        return math.nan, math.nan, True
    return split_rhat(x), ess(x), False
