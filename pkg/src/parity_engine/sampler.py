"""Gibbs sampler for the IHA/CHA state-space models.

One sweep updates, in order:

1. the whole strength path ``theta`` from its Gaussian full conditional
   (joint block-Cholesky draw; week-by-week Gibbs is available as
   ``theta_update="blockwise"``);
2. ``alpha0`` and, under IHA, the city effects jointly (Gaussian);
3. ``gamma_week`` and ``gamma_season`` (normal truncated to their supports);
4. the precisions of the game, season, week and city terms, each by
   univariate slice sampling on ``log(tau^2)``.

Chains run on unconstrained strengths and city effects; every stored draw
is centred so each theta row and ``alpha`` sum to zero, with ``alpha0``
absorbing the mean city effect (game means are unchanged by this).
"""

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import linalg
from scipy.special import ndtr, ndtri

from . import _kernels
from .draws import SCALARS, empty_draws
from .errors import DimensionMismatch, NonFiniteDensity
from .rng import substream
from .ssm import IHA, Hyperpriors, ParameterState, game_arrays, log_posterior

THREADS_ENV = "PARITY_ENGINE_THREADS"
_SLICE_PARAMS = ("sigma_game", "sigma_season", "sigma_week", "sigma_alpha")


@dataclass(frozen=True)
class SamplerConfig:
    """MCMC run settings.

    ``iterations`` counts every sweep, burn-in included, so each chain keeps
    ``(iterations - burn_in) / thin`` draws. ``fixed`` pins parameters
    (e.g. ``{"sigma_game": 0.2}``) so they are never updated.
    ``step_scales`` sets slice widths on the log-precision scale.
    """

    chains: int = 3
    iterations: int = 40000
    burn_in: int = 4000
    thin: int = 5
    seed: int = 0
    step_scales: dict = field(default_factory=dict)
    fixed: dict = field(default_factory=dict)
    theta_update: str = "joint"
    hyperpriors: Hyperpriors = field(default_factory=Hyperpriors)

    def __post_init__(self):
        if self.chains < 1:
            raise ValueError("chains must be >= 1")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")
        if not 0 <= self.burn_in < self.iterations:
            raise ValueError("need 0 <= burn_in < iterations")
        if self.theta_update not in ("joint", "blockwise"):
            raise ValueError("theta_update must be 'joint' or 'blockwise'")
        unknown = set(self.fixed) - set(SCALARS) - {"theta", "alpha"}
        if unknown:
            raise ValueError(f"cannot fix unknown parameters {sorted(unknown)}")

    @property
    def draws_per_chain(self):
        return len(range(self.burn_in, self.iterations, self.thin))

    def to_dict(self):
        d = asdict(self)
        d["fixed"] = {k: (np.asarray(v).tolist()) for k, v in self.fixed.items()}
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["hyperpriors"] = Hyperpriors(**{k: tuple(v) if isinstance(v, list) else v
                                          for k, v in d.get("hyperpriors", {}).items()})
        return cls(**d)


# -- univariate samplers -----------------------------------------------------

def truncated_normal(mean, sd, lo, hi, rng):
    """Inverse-CDF draw from ``N(mean, sd^2)`` restricted to ``[lo, hi]``."""
    a, b = (lo - mean) / sd, (hi - mean) / sd
    flip = a > 0
    if flip:  # keep the interval in the lower tail, where ndtr is accurate
        a, b = -b, -a
    fa, fb = ndtr(a), ndtr(b)
    if fb - fa <= 0.0:
        x = b  # whole interval far in the lower tail: mass piles up at its upper end
    else:
        u = fa + rng.random() * (fb - fa)
        x = min(max(float(ndtri(u)), a), b)
    if flip:
        x = -x
    return min(max(mean + sd * x, lo), hi)


def slice_sample(logf, x0, width, rng, max_steps=64, upper=math.inf):
    """One stepping-out/shrinkage slice update (Neal, 2003).

    Returns ``(x, n_evaluations)``. ``logf`` must be finite at ``x0``.
    """
    f0 = logf(x0)
    level = f0 - rng.standard_exponential()
    left = x0 - width * rng.random()
    right = left + width
    j = int(max_steps * rng.random())
    k = max_steps - 1 - j
    evals = 1
    while j > 0 and logf(left) > level:
        left -= width
        j -= 1
        evals += 1
    right = min(right, upper)
    while k > 0 and right < upper and logf(right) > level:
        right = min(right + width, upper)
        k -= 1
        evals += 1
    while True:
        x = left + rng.random() * (right - left)
        evals += 1
        if logf(x) > level:
            return x, evals
        if x < x0:
            left = x
        else:
            right = x


def precision_logpdf(n, ss, upper):
    """Log full conditional of ``u = log(tau^2)`` for ``n`` normal terms with
    sum of squares ``ss`` under a ``Uniform(0, upper)`` prior on ``tau^2``."""
    log_upper = math.log(upper)
    shape = 0.5 * n + 1.0
    half_ss = 0.5 * ss

    def logf(u):
        if u >= log_upper:
            return -math.inf
        return shape * u - math.exp(u) * half_ss
    return logf


# -- model structure ---------------------------------------------------------

class _Structure:
    """Data-dependent constants shared by all sweeps of one fit."""

    def __init__(self, arrays, spec):
        cfg = spec.league_config
        self.S, self.K, self.t, self.t_star = cfg.S, cfg.K, cfg.t, cfg.t_star
        self.T = cfg.S * cfg.K
        self.iha = spec.variant == IHA
        self.y = np.asarray(arrays.y, dtype=float)
        self.n = len(self.y)
        self.idx_home = arrays.period * cfg.t + arrays.home
        self.idx_away = arrays.period * cfg.t + arrays.away
        self.city = arrays.city
        xtx = np.zeros((self.T, cfg.t, cfg.t))
        np.add.at(xtx, (arrays.period, arrays.home, arrays.home), 1.0)
        np.add.at(xtx, (arrays.period, arrays.away, arrays.away), 1.0)
        np.add.at(xtx, (arrays.period, arrays.home, arrays.away), -1.0)
        np.add.at(xtx, (arrays.period, arrays.away, arrays.home), -1.0)
        self.xtx = xtx
        self.city_counts = np.bincount(self.city, minlength=self.t_star).astype(float)
        # first period of each season after the first receives a season transition
        self.season_start = np.zeros(self.T, dtype=bool)
        self.season_start[np.arange(1, cfg.S) * cfg.K] = True

    def prior_blocks(self, gamma_week, gamma_season, prec_week, prec_season):
        """Diagonal and off-diagonal scalars of the AR prior precision."""
        T = self.T
        # precision and coefficient of the transition *into* period p
        into_prec = np.where(self.season_start, prec_season, prec_week)
        into_gamma = np.where(self.season_start, gamma_season, gamma_week)
        into_prec[0] = prec_season
        diag = into_prec.copy()
        diag[:-1] += into_gamma[1:] ** 2 * into_prec[1:]
        off = -into_gamma[1:] * into_prec[1:]
        return diag, off if T > 1 else np.zeros(0)


def _initial_state(rng, st, config):
    fixed = config.fixed
    theta = rng.normal(0.0, 0.5, size=(st.T, st.t))
    alpha0 = rng.normal(0.0, 0.1)
    alpha = rng.normal(0.0, 0.1, size=st.t_star) if st.iha else np.zeros(st.t_star)
    state = {"theta": theta, "alpha0": alpha0, "alpha": alpha,
             "gamma_season": 0.5 * sum(config.hyperpriors.gamma_season_range),
             "gamma_week": 0.5 * sum(config.hyperpriors.gamma_week_range),
             "sigma_game": 0.2, "sigma_season": 0.2, "sigma_week": 0.2,
             "sigma_alpha": 0.2 if st.iha else math.nan}
    for name, value in fixed.items():
        state[name] = np.array(value, dtype=float) if name in ("theta", "alpha") else float(value)
    return state


def _sweep(state, st, config, rng, slice_evals):
    fixed = config.fixed
    hp = config.hyperpriors
    theta = state["theta"]
    w = 1.0 / state["sigma_game"] ** 2
    prec_week = 1.0 / state["sigma_week"] ** 2
    prec_season = 1.0 / state["sigma_season"] ** 2

    # 1. strengths
    if "theta" not in fixed:
        resid = st.y - state["alpha0"]
        if st.iha:
            resid = resid - state["alpha"][st.city]
        size = st.T * st.t
        lin = (np.bincount(st.idx_home, resid, size) - np.bincount(st.idx_away, resid, size)) * w
        diag, off = st.prior_blocks(state["gamma_week"], state["gamma_season"], prec_week, prec_season)
        z = rng.standard_normal((st.T, st.t))
        kernel = (_kernels.draw_theta_joint if config.theta_update == "joint"
                  else _kernels.draw_theta_blockwise)
        if not kernel(st.xtx, w, diag, off, lin.reshape(st.T, st.t), z, theta):
            raise NonFiniteDensity("strength precision is not positive definite")

    flat = theta.reshape(-1)
    u = st.y - (flat[st.idx_home] - flat[st.idx_away])

    # 2. home advantage
    prior_a0 = 1.0 / hp.alpha0_variance
    if st.iha and "alpha" not in fixed:
        prec_a = 1.0 / state["sigma_alpha"] ** 2
        m = st.t_star + 1
        P = np.empty((m, m))
        P[0, 0] = w * st.n + prior_a0
        P[0, 1:] = P[1:, 0] = w * st.city_counts
        P[1:, 1:] = np.diag(w * st.city_counts + prec_a)
        b = np.empty(m)
        b[0] = w * u.sum()
        b[1:] = w * np.bincount(st.city, u, st.t_star)
        if "alpha0" in fixed:
            P, b = P[1:, 1:], b[1:] - P[1:, 0] * state["alpha0"]
        L = linalg.cholesky(P, lower=True)
        mean = linalg.cho_solve((L, True), b)
        draw = mean + linalg.solve_triangular(L.T, rng.standard_normal(len(b)), lower=False)
        if "alpha0" in fixed:
            state["alpha"] = draw
        else:
            state["alpha0"], state["alpha"] = float(draw[0]), draw[1:]
    elif "alpha0" not in fixed:
        r = u - (state["alpha"][st.city] if st.iha else 0.0)
        prec = w * st.n + prior_a0
        state["alpha0"] = float(w * np.sum(r) / prec + rng.standard_normal() / math.sqrt(prec))

    # 3. autoregressive coefficients
    th = theta.reshape(st.S, st.K, st.t)
    if "gamma_week" not in fixed:
        prev, nxt = th[:, :-1, :], th[:, 1:, :]
        sxx = float(np.sum(prev * prev))
        lo, hi = hp.gamma_week_range
        if sxx > 0:
            state["gamma_week"] = truncated_normal(float(np.sum(prev * nxt)) / sxx,
                                                   1.0 / math.sqrt(sxx * prec_week), lo, hi, rng)
        else:
            state["gamma_week"] = lo + (hi - lo) * rng.random()
    if "gamma_season" not in fixed:
        prev, nxt = th[:-1, -1, :], th[1:, 0, :]
        sxx = float(np.sum(prev * prev))
        lo, hi = hp.gamma_season_range
        if sxx > 0:
            state["gamma_season"] = truncated_normal(float(np.sum(prev * nxt)) / sxx,
                                                     1.0 / math.sqrt(sxx * prec_season), lo, hi, rng)
        else:
            state["gamma_season"] = lo + (hi - lo) * rng.random()

    # 4. precisions
    week_res = th[:, 1:, :] - state["gamma_week"] * th[:, :-1, :]
    season_res = th[1:, 0, :] - state["gamma_season"] * th[:-1, -1, :]
    u_full = u - state["alpha0"] - (state["alpha"][st.city] if st.iha else 0.0)
    suff = {
        "sigma_game": (st.n, float(np.dot(u_full, u_full))),
        "sigma_season": (th[0, 0, :].size + season_res.size,
                         float(np.sum(th[0, 0, :] ** 2) + np.sum(season_res ** 2))),
        "sigma_week": (week_res.size, float(np.sum(week_res ** 2))),
    }
    if st.iha:
        suff["sigma_alpha"] = (st.t_star, float(np.sum(state["alpha"] ** 2)))
    for name, (n, ss) in suff.items():
        if name in fixed:
            continue
        logf = precision_logpdf(n, ss, hp.tau_sq_upper)
        u0 = -2.0 * math.log(state[name])
        width = float(config.step_scales.get(name, 1.0))
        u1, evals = slice_sample(logf, u0, width, rng, upper=math.log(hp.tau_sq_upper))
        state[name] = math.exp(-0.5 * u1)
        slice_evals[name] += evals


def _snapshot(state):
    return ParameterState(theta=state["theta"], alpha0=state["alpha0"], alpha=state["alpha"],
                          sigma_game=state["sigma_game"], sigma_season=state["sigma_season"],
                          sigma_week=state["sigma_week"], gamma_season=state["gamma_season"],
                          gamma_week=state["gamma_week"], sigma_alpha=state["sigma_alpha"]).centered()


def _run_chain(args):
    chain, arrays, spec, config = args
    st = _Structure(arrays, spec)
    rng = substream(config.seed, "chain", chain)
    state = _initial_state(rng, st, config)
    n_keep = config.draws_per_chain
    theta_out = np.empty((n_keep, st.T, st.t))
    alpha_out = np.empty((n_keep, st.t_star))
    scal_out = {k: np.empty(n_keep) for k in SCALARS}
    iters = np.empty(n_keep, dtype=np.int64)
    slice_evals = {k: 0 for k in _SLICE_PARAMS}
    j = 0
    for it in range(config.iterations):
        _sweep(state, st, config, rng, slice_evals)
        if it >= config.burn_in and (it - config.burn_in) % config.thin == 0:
            snap = _snapshot(state)
            theta_out[j] = snap.theta
            alpha_out[j] = snap.alpha
            for k, v in snap.scalars().items():
                scal_out[k][j] = v
            iters[j] = it + 1
            j += 1
    final = _snapshot(state)
    if not math.isfinite(log_posterior(final, spec, arrays, config.hyperpriors)):
        raise NonFiniteDensity(f"chain {chain}: log-posterior is not finite at the final state")
    n_updates = config.iterations
    return theta_out, alpha_out, scal_out, iters, {k: v / n_updates for k, v in slice_evals.items()}


def _max_workers(n_chains):
    try:
        cap = int(os.environ.get(THREADS_ENV, "1"))
    except ValueError:
        cap = 1
    return max(1, min(cap, n_chains))


def fit(games, spec, config=None, meta=None):
    """Run ``config.chains`` chains and return the pooled retained draws.

    Parameters
    ----------
    games : list of GameRecord or LeagueGames
        Games without an implied probability are skipped.
    spec : ModelSpec
    config : SamplerConfig, optional
    meta : dict, optional
        Extra metadata stored on the result (team/city names, home-city table).
        Filled automatically when ``games`` is a ``LeagueGames``.
    """
    config = config or SamplerConfig()
    meta = dict(meta or {})
    if hasattr(games, "team_names"):
        meta.setdefault("team_names", list(games.team_names))
        meta.setdefault("city_names", list(games.city_names))
        meta.setdefault("home_city", games.registry.table(spec.league_config.t, spec.league_config.S))
        games = games.games
    fitted = [g for g in games if g.has_probability]
    cfg = spec.league_config
    for g in fitted:
        if g.season > cfg.S or g.week > cfg.K or max(g.home_team, g.away_team) > cfg.t \
                or g.home_city > cfg.t_star:
            raise DimensionMismatch(f"game {g.game_id} lies outside the model dimensions")
    for name in ("theta", "alpha"):
        if name in config.fixed:
            want = (cfg.S * cfg.K, cfg.t) if name == "theta" else (cfg.t_star,)
            if np.shape(config.fixed[name]) != want:
                raise DimensionMismatch(f"fixed {name} must have shape {want}")
    arrays = game_arrays(fitted, spec)
    meta.setdefault("n_games_fitted", len(fitted))
    meta.setdefault("seed", config.seed)
    weeks = {}
    for g in fitted:
        weeks.setdefault(str(g.season), set()).add(g.week)
    meta.setdefault("weeks_with_games", {s: sorted(w) for s, w in sorted(weeks.items())})

    jobs = [(c, arrays, spec, config) for c in range(config.chains)]
    workers = _max_workers(config.chains)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_chain, jobs))
    else:
        results = [_run_chain(job) for job in jobs]

    out = empty_draws(spec, config.to_dict(), meta)
    if config.draws_per_chain == 0:
        return out
    out.theta = np.concatenate([r[0] for r in results])
    out.alpha = np.concatenate([r[1] for r in results])
    out.scalars = {k: np.concatenate([r[2][k] for r in results]) for k in SCALARS}
    out.chain = np.repeat(np.arange(1, config.chains + 1), config.draws_per_chain)
    out.iteration = np.concatenate([r[3] for r in results])
    out.meta["slice_evaluations"] = {k: float(np.mean([r[4][k] for r in results]))
                                     for k in _SLICE_PARAMS}
    return out
