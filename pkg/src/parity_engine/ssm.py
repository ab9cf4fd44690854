"""State-space paired-comparison models with individual (IHA) or constant (CHA)
home advantage.

For a game in season ``s``, week ``k`` between home team ``i`` (playing in
city ``c``) and away team ``j``, the link-transformed implied probability is
normal with mean ``theta[s,k,i] - theta[s,k,j] + alpha0 + alpha[c]`` and
standard deviation ``sigma_game``. Strengths follow AR(1) dynamics within a
season (``gamma_week``, ``sigma_week``) and across seasons (``gamma_season``,
``sigma_season``); the first week of the first season is ``N(0, sigma_season^2)``.
Priors are uniform on the precisions ``1 / sigma^2``.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, DomainError, MissingProbability
from .schedule import LeagueConfig

IHA = "IHA"
CHA = "CHA"
LOGIT = "logit"
ARCSIN_SQRT = "arcsin_sqrt"
_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class Hyperpriors:
    tau_sq_upper: float = 1000.0
    alpha0_variance: float = 10000.0
    gamma_season_range: tuple = (0.0, 1.0)
    gamma_week_range: tuple = (0.0, 1.5)

    def __post_init__(self):
        if self.tau_sq_upper <= 0 or self.alpha0_variance <= 0:
            raise ValueError("hyperprior bounds must be positive")
        for lo, hi in (self.gamma_season_range, self.gamma_week_range):
            if not 0 <= lo < hi:
                raise ValueError("gamma ranges must satisfy 0 <= lo < hi")


@dataclass(frozen=True)
class ModelSpec:
    league_config: LeagueConfig
    variant: str = IHA
    link: str = LOGIT

    def __post_init__(self):
        if self.variant not in (IHA, CHA):
            raise ValueError(f"variant must be IHA or CHA, got {self.variant!r}")
        if self.link not in (LOGIT, ARCSIN_SQRT):
            raise ValueError(f"unknown link {self.link!r}")

    def to_dict(self):
        c = self.league_config
        return {"variant": self.variant, "link": self.link,
                "league": {"league_id": c.league_id, "t": c.t, "t_star": c.t_star, "S": c.S, "K": c.K}}

    @classmethod
    def from_dict(cls, d):
        return cls(league_config=LeagueConfig(**d["league"]), variant=d["variant"], link=d["link"])


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ParameterState:
    """One full set of model parameters.

    ``theta`` has one row per ``(season, week)``, in season-major order, and
    one column per team. Rows and ``alpha`` are centred to sum to zero.
    ``sigma_alpha`` is NaN under CHA.
    """

    theta: np.ndarray
    alpha0: float
    alpha: np.ndarray
    sigma_game: float
    sigma_season: float
    sigma_week: float
    gamma_season: float
    gamma_week: float
    sigma_alpha: float = float("nan")

    def __post_init__(self):
        object.__setattr__(self, "theta", _frozen(self.theta))
        object.__setattr__(self, "alpha", _frozen(self.alpha))

    def theta_at(self, season, week, K):
        return self.theta[(season - 1) * K + (week - 1)]

    def centered(self):
        """Return the state with theta rows and alpha shifted to sum to zero.

        ``alpha0`` absorbs the mean of ``alpha`` so game means are unchanged.
        """
        theta = self.theta - self.theta.mean(axis=1, keepdims=True)
        shift = float(self.alpha.mean()) if self.alpha.size else 0.0
        return ParameterState(theta=theta, alpha0=self.alpha0 + shift, alpha=self.alpha - shift,
                              sigma_game=self.sigma_game, sigma_season=self.sigma_season,
                              sigma_week=self.sigma_week, gamma_season=self.gamma_season,
                              gamma_week=self.gamma_week, sigma_alpha=self.sigma_alpha)

    def scalars(self):
        return {"alpha0": self.alpha0, "sigma_game": self.sigma_game,
                "sigma_season": self.sigma_season, "sigma_week": self.sigma_week,
                "sigma_alpha": self.sigma_alpha, "gamma_season": self.gamma_season,
                "gamma_week": self.gamma_week}

    def allclose(self, other, atol=1e-12):
        a, b = self.scalars(), other.scalars()
        same_scalars = all((math.isnan(a[k]) and math.isnan(b[k])) or abs(a[k] - b[k]) <= atol
                           for k in a)
        return (same_scalars and self.theta.shape == other.theta.shape
                and np.allclose(self.theta, other.theta, rtol=0, atol=atol)
                and np.allclose(self.alpha, other.alpha, rtol=0, atol=atol))

    def check_dimensions(self, config):
        if self.theta.shape != (config.S * config.K, config.t):
            raise DimensionMismatch(f"theta has shape {self.theta.shape}, expected "
                                    f"{(config.S * config.K, config.t)}")
        if self.alpha.shape != (config.t_star,):
            raise DimensionMismatch(f"alpha has length {self.alpha.size}, expected {config.t_star}")


def zero_state(config, sigma=1.0, variant=IHA):
    """All strengths and home effects zero; every sigma equal to ``sigma``."""
    return ParameterState(theta=np.zeros((config.S * config.K, config.t)), alpha0=0.0,
                          alpha=np.zeros(config.t_star), sigma_game=sigma, sigma_season=sigma,
                          sigma_week=sigma, gamma_season=0.5, gamma_week=0.75,
                          sigma_alpha=sigma if variant == IHA else float("nan"))


# -- links -----------------------------------------------------------------

def apply_link(p, link=LOGIT):
    """Map probabilities to the model scale (log-odds or arcsin-sqrt)."""
    p_arr = np.asarray(p, dtype=float)
    if np.any(~((p_arr > 0) & (p_arr < 1))):
        raise DomainError("link requires 0 < p < 1")
    if link == LOGIT:
        out = np.log(p_arr) - np.log1p(-p_arr)
    elif link == ARCSIN_SQRT:
        out = np.arcsin(np.sqrt(p_arr))
    else:
        raise ValueError(f"unknown link {link!r}")
    return float(out) if np.ndim(p) == 0 else out


def invert_link(x, link=LOGIT):
    """Inverse of :func:`apply_link`.

    On the arcsin-sqrt scale values are clipped to ``[0, pi/2]`` first, the
    range on which the transform is invertible.
    """
    x_arr = np.asarray(x, dtype=float)
    if link == LOGIT:
        out = np.where(x_arr >= 0, 1.0 / (1.0 + np.exp(-np.abs(x_arr))),
                       np.exp(-np.abs(x_arr)) / (1.0 + np.exp(-np.abs(x_arr))))
    elif link == ARCSIN_SQRT:
        out = np.sin(np.clip(x_arr, 0.0, math.pi / 2)) ** 2
    else:
        raise ValueError(f"unknown link {link!r}")
    return float(out) if np.ndim(x) == 0 else out


# -- game arrays -------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class GameArrays:
    """Column view of fitted games with 0-based indices."""

    period: np.ndarray  # (season - 1) * K + (week - 1)
    home: np.ndarray
    away: np.ndarray
    city: np.ndarray
    y: np.ndarray = field(default=None)  # link-scale observation, None if absent

    def __len__(self):
        return len(self.home)


def game_arrays(games, spec, require_probability=True):
    cfg = spec.league_config
    period, home, away, city, p = [], [], [], [], []
    for g in games:
        if not (1 <= g.season <= cfg.S and 1 <= g.week <= cfg.K):
            raise IndexError(f"game (season {g.season}, week {g.week}) outside league grid")
        if not (1 <= g.home_team <= cfg.t and 1 <= g.away_team <= cfg.t):
            raise IndexError("team index outside 1..t")
        if not 1 <= g.home_city <= cfg.t_star:
            raise IndexError("city index outside 1..t_star")
        if g.implied_p_home is None and require_probability:
            raise MissingProbability(f"game {g.game_id} has no implied probability")
        period.append((g.season - 1) * cfg.K + g.week - 1)
        home.append(g.home_team - 1)
        away.append(g.away_team - 1)
        city.append(g.home_city - 1)
        p.append(g.implied_p_home)
    y = None
    if require_probability:
        y = apply_link(np.array(p, dtype=float), spec.link) if p else np.zeros(0)
    as_int = lambda v: np.array(v, dtype=np.int64)
    return GameArrays(period=as_int(period), home=as_int(home), away=as_int(away),
                      city=as_int(city), y=y)


def game_means(state, spec, arrays):
    """Vectorised :func:`game_mean` over a :class:`GameArrays`."""
    theta = state.theta
    mean = theta[arrays.period, arrays.home] - theta[arrays.period, arrays.away] + state.alpha0
    if spec.variant == IHA:
        mean = mean + state.alpha[arrays.city]
    return mean


def game_mean(state, spec, game):
    """Link-scale mean of one game's implied home-win probability."""
    return float(game_means(state, spec, game_arrays([game], spec, require_probability=False))[0])


# -- densities -------------------------------------------------------------

def _norm_logpdf_sum(resid, sd, n=None):
    n = np.size(resid) if n is None else n
    return float(-0.5 * n * _LOG_2PI - n * math.log(sd) - 0.5 * np.sum(np.square(resid)) / sd ** 2)


def log_likelihood(state, spec, games):
    """Sum of normal log-densities of the link-scale implied probabilities.

    ``games`` is a list of :class:`GameRecord` or a prepared :class:`GameArrays`.
    """
    arrays = games if isinstance(games, GameArrays) else game_arrays(games, spec)
    if arrays.y is None:
        raise MissingProbability("game arrays carry no observations")
    if len(arrays) == 0:
        return 0.0
    return _norm_logpdf_sum(arrays.y - game_means(state, spec, arrays), state.sigma_game)


def evolution_residuals(theta, config, gamma_week, gamma_season):
    """Split the AR innovations of a ``(S*K, t)`` strength path.

    Returns ``(initial, week_innovations, season_innovations)`` as arrays
    with one row per block.
    """
    S, K, t = config.S, config.K, config.t
    th = np.asarray(theta).reshape(S, K, t)
    week = (th[:, 1:, :] - gamma_week * th[:, :-1, :]).reshape(-1, t)
    season = (th[1:, 0, :] - gamma_season * th[:-1, K - 1, :]).reshape(-1, t)
    return th[0, 0, :], week, season


def log_evolution(state, spec):
    """Log-density of the strength path under the AR(1) week/season dynamics."""
    cfg = spec.league_config
    state.check_dimensions(cfg)
    init, week, season = evolution_residuals(state.theta, cfg, state.gamma_week, state.gamma_season)
    total = _norm_logpdf_sum(init, state.sigma_season)
    if week.size:
        total += _norm_logpdf_sum(week, state.sigma_week)
    if season.size:
        total += _norm_logpdf_sum(season, state.sigma_season)
    return total


def precision_in_support(sigma, hyper):
    if not sigma > 0 or not math.isfinite(sigma):
        return False
    return 0.0 < 1.0 / sigma ** 2 < hyper.tau_sq_upper


def log_prior(state, spec, hyperpriors=None):
    """Log prior density; ``-inf`` outside the support.

    The precisions ``1/sigma^2`` are uniform on ``(0, tau_sq_upper)``
    (densities on the precision scale, as the model is stated).
    """
    hp = hyperpriors or Hyperpriors()
    sigmas = [state.sigma_game, state.sigma_season, state.sigma_week]
    if spec.variant == IHA:
        sigmas.append(state.sigma_alpha)
    if not all(precision_in_support(s, hp) for s in sigmas):
        return -math.inf
    lo_s, hi_s = hp.gamma_season_range
    lo_w, hi_w = hp.gamma_week_range
    if not (lo_s <= state.gamma_season <= hi_s and lo_w <= state.gamma_week <= hi_w):
        return -math.inf
    total = -len(sigmas) * math.log(hp.tau_sq_upper)
    total -= math.log(hi_s - lo_s) + math.log(hi_w - lo_w)
    total += _norm_logpdf_sum(np.array([state.alpha0]), math.sqrt(hp.alpha0_variance))
    if spec.variant == IHA:
        total += _norm_logpdf_sum(state.alpha, state.sigma_alpha)
    return total


def log_posterior(state, spec, games, hyperpriors=None):
    lp = log_prior(state, spec, hyperpriors)
    if lp == -math.inf:
        return lp
    return lp + log_evolution(state, spec) + log_likelihood(state, spec, games)
