"""Posterior predictive replicates, per-team discrepancies, DIC and posterior summaries."""

import math
from dataclasses import dataclass

import numpy as np

from ._csvio import write_csv
from .diagnostics import ess
from .ssm import IHA, GameArrays, game_arrays, game_means, invert_link

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True, eq=False)
class PredictiveReplicate:
    replicate_id: int
    draw_index: int
    values: np.ndarray  # link scale, one per fitted game
    probabilities: np.ndarray


def _arrays(games, spec):
    return games if isinstance(games, GameArrays) else game_arrays(
        [g for g in games if g.has_probability], spec)


def _draw_means(draws, spec, arrays):
    """``(n_draws, n_games)`` link-scale game means."""
    th = draws.theta
    m = th[:, arrays.period, arrays.home] - th[:, arrays.period, arrays.away]
    m = m + draws.scalars["alpha0"][:, None]
    if spec.variant == IHA:
        m = m + draws.alpha[:, arrays.city]
    return m


def simulate_replicates(draws, spec, games, n_rep=20, rng=None):
    """Draw ``n_rep`` replicated data sets from the posterior predictive.

    Each replicate takes one posterior draw uniformly at random and then
    samples every game's link value from ``N(game_mean, sigma_game^2)``.
    """
    if n_rep == 0:
        return []
    draws.require_nonempty()
    rng = rng or np.random.default_rng(0)
    arrays = _arrays(games, spec)
    out = []
    for r in range(n_rep):
        d = int(rng.integers(len(draws)))
        state = draws.state(d)
        mean = game_means(state, spec, arrays)
        values = mean + state.sigma_game * rng.standard_normal(len(mean))
        out.append(PredictiveReplicate(replicate_id=r + 1, draw_index=d, values=values,
                                       probabilities=invert_link(values, spec.link)))
    return out


def team_discrepancy(replicates, games, spec):
    """Mean (replicate-averaged simulated - observed) link value per home team.

    Returns ``{team_index: discrepancy}``; teams without home games are absent.
    """
    if not replicates:
        raise ValueError("need at least one replicate")
    fitted = [g for g in games if g.has_probability]
    arrays = game_arrays(fitted, spec)
    sim_mean = np.mean([r.values for r in replicates], axis=0)
    diff = sim_mean - arrays.y
    out = {}
    for team in np.unique(arrays.home):
        out[int(team) + 1] = float(np.mean(diff[arrays.home == team]))
    return out


def write_replicates(path, replicates, games):
    ids = [g.game_id for g in games if g.has_probability]
    rows = ((r.replicate_id, gid, v) for r in replicates for gid, v in zip(ids, r.values))
    write_csv(path, "ppc_replicates/1", ["replicate_id", "game_id", "value"], rows)


def write_discrepancy(path, disc_cha, disc_iha, team_names=None):
    teams = sorted(set(disc_cha) | set(disc_iha))
    name = (lambda i: team_names[i - 1]) if team_names else (lambda i: i)
    rows = ((name(t), disc_cha.get(t), disc_iha.get(t)) for t in teams)
    write_csv(path, "team_discrepancy/1", ["team", "discrepancy_cha", "discrepancy_iha"], rows)


# -- DIC ---------------------------------------------------------------------

@dataclass(frozen=True)
class DicResult:
    dbar: float
    d_at_mean: float
    p_d: float
    dic: float

    @property
    def negative_pd(self):
        return self.p_d < 0


def deviances(draws, spec, games):
    """``-2 * log_likelihood`` for every draw."""
    arrays = _arrays(games, spec)
    if len(arrays) == 0:
        return np.zeros(len(draws))
    sd = draws.scalars["sigma_game"]
    out = np.empty(len(draws))
    chunk = max(1, 2_000_000 // max(len(arrays), 1))
    for start in range(0, len(draws), chunk):
        sub = draws.subset(slice(start, start + chunk))
        resid = arrays.y[None, :] - _draw_means(sub, spec, arrays)
        s = sd[start:start + chunk]
        ll = -0.5 * len(arrays) * _LOG_2PI - len(arrays) * np.log(s) \
            - 0.5 * np.sum(resid ** 2, axis=1) / s ** 2
        out[start:start + chunk] = -2.0 * ll
    return out


def dic(draws, spec, games):
    """Deviance information criterion with the posterior-mean plug-in state."""
    draws.require_nonempty()
    arrays = _arrays(games, spec)
    dev = deviances(draws, spec, arrays)
    dbar = float(np.mean(dev))
    mean_state = draws.mean_state()
    if len(arrays):
        resid = arrays.y - game_means(mean_state, spec, arrays)
        s = mean_state.sigma_game
        d_hat = float(-2.0 * (-0.5 * len(resid) * _LOG_2PI - len(resid) * math.log(s)
                              - 0.5 * np.sum(resid ** 2) / s ** 2))
    else:
        d_hat = 0.0
    p_d = dbar - d_hat
    return DicResult(dbar=dbar, d_at_mean=d_hat, p_d=p_d, dic=dbar + p_d)


def dic_difference(draws_a, spec_a, draws_b, spec_b, games):
    """DIC(a) - DIC(b) with a paired standard error.

    The SE is that of the mean of draw-wise deviance differences over
    matched draw indices (both fits should share seed and settings). When
    the draws hold at least two chains of ten or more, the sample size in
    the SE is the effective sample size of the differences.
    """
    arrays_a, arrays_b = _arrays(games, spec_a), _arrays(games, spec_b)
    da, db = dic(draws_a, spec_a, arrays_a), dic(draws_b, spec_b, arrays_b)
    n = min(len(draws_a), len(draws_b))
    diff = deviances(draws_a, spec_a, arrays_a)[:n] - deviances(draws_b, spec_b, arrays_b)[:n]
    if n < 2:
        return da.dic - db.dic, math.nan
    n_eff = n
    chain = draws_a.chain[:n]
    per_chain = np.unique(chain, return_counts=True)[1]
    if np.array_equal(chain, draws_b.chain[:n]) and len(per_chain) >= 2 and per_chain.min() >= 10:
        e = ess(draws_a.subset(slice(0, n)).by_chain(diff))
        if math.isfinite(e) and e > 0:
            n_eff = min(n, e)
    se = float(np.std(diff, ddof=1) / math.sqrt(n_eff))
    return da.dic - db.dic, se


# -- posterior summaries -------------------------------------------------------

def strength_summary(draws):
    """Distribution of posterior-mean week-level strengths across all teams and weeks."""
    draws.require_nonempty()
    m = draws.theta.mean(axis=0).ravel()
    q = np.quantile(m, [0.025, 0.25, 0.75, 0.975])
    return {"n": int(m.size), "min": float(m.min()), "q025": float(q[0]), "q1": float(q[1]),
            "q3": float(q[2]), "q975": float(q[3]), "max": float(m.max()),
            "sd": float(np.std(m, ddof=1)) if m.size > 1 else 0.0}


def parameter_summary(draws):
    """Posterior mean and SD of the AR coefficients and standard deviations."""
    draws.require_nonempty()
    out = {}
    for name in ("gamma_season", "gamma_week", "sigma_game", "sigma_season", "sigma_week",
                 "sigma_alpha", "alpha0"):
        v = draws.scalars[name]
        if np.all(np.isnan(v)):
            continue
        out[name] = (float(np.mean(v)), float(np.std(v, ddof=1)) if len(v) > 1 else 0.0)
    return out


def home_advantage_summary(draws, quantiles=(0.025, 0.5, 0.975)):
    """Per-city home-win probability against an equal team, ``invlogit(alpha0 + alpha[c])``.

    Returns ``{city_index: (q_low, median, q_high)}``.
    """
    draws.require_nonempty()
    a0 = draws.scalars["alpha0"][:, None]
    probs = invert_link(a0 + draws.alpha, draws.spec.link)
    qs = np.quantile(probs, quantiles, axis=0)
    return {c + 1: tuple(float(v) for v in qs[:, c]) for c in range(probs.shape[1])}
