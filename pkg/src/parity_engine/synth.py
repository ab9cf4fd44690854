"""Ground-truth synthetic leagues generated from the state-space model itself."""

from dataclasses import dataclass, fields

import numpy as np

from . import market
from ._csvio import write_csv
from .errors import ConfigError
from .rng import substream
from .schedule import CityRegistry, GameRecord, LeagueConfig, LeagueGames
from .ssm import IHA, ModelSpec, ParameterState, game_means, invert_link
from .ssm import GameArrays


@dataclass(frozen=True)
class TruthConfig:
    """True parameters and schedule density of a synthetic league.

    ``alpha`` gives the city effects explicitly; when omitted they are drawn
    from ``N(0, sigma_alpha^2)``. The first ``t_star - t`` teams relocate to
    a new city at the start of season ``S // 2 + 1``.
    """

    t: int = 8
    t_star: int = 8
    S: int = 3
    K: int = 12
    gamma_season: float = 0.6
    gamma_week: float = 0.98
    sigma_season: float = 0.3
    sigma_week: float = 0.08
    sigma_game: float = 0.2
    alpha0: float = 0.25
    sigma_alpha: float = 0.1
    alpha: tuple = None
    games_per_week: int = 16
    vig: float = 0.0
    seed: int = 0
    league_id: str = "SYN"

    def __post_init__(self):
        try:
            LeagueConfig(self.league_id, self.t, self.t_star, self.S, self.K)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.t_star > self.t and self.S < 2:
            raise ConfigError("relocations (t_star > t) need at least 2 seasons")
        if self.t_star > 2 * self.t:
            raise ConfigError("at most one relocation per team")
        if not 0 <= self.gamma_season <= 1 or not 0 <= self.gamma_week <= 1.5:
            raise ConfigError("gamma_season must lie in [0, 1] and gamma_week in [0, 1.5]")
        for name in ("sigma_season", "sigma_week", "sigma_game", "sigma_alpha"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")
        if not 0 <= self.vig <= 0.1:
            raise ConfigError("vig must lie in [0, 0.1]")
        if self.games_per_week < 0:
            raise ConfigError("games_per_week must be non-negative")
        if self.alpha is not None and len(self.alpha) != self.t_star:
            raise ConfigError(f"alpha needs {self.t_star} entries")

    @property
    def league_config(self):
        return LeagueConfig(self.league_id, self.t, self.t_star, self.S, self.K)

    @classmethod
    def from_mapping(cls, mapping):
        """Build from string values, e.g. a parsed ``key=value`` file."""
        types = {f.name: f.type for f in fields(cls)}
        kw = {}
        for key, raw in mapping.items():
            if key not in types:
                raise ConfigError(f"unknown truth parameter {key!r}")
            raw = str(raw).strip()
            if key == "alpha":
                kw[key] = tuple(float(v) for v in raw.split(",")) if raw else None
            elif key == "league_id":
                kw[key] = raw
            elif key in ("t", "t_star", "S", "K", "games_per_week", "seed"):
                kw[key] = int(raw)
            else:
                kw[key] = float(raw)
        return cls(**kw)


def read_key_values(path):
    """Parse a flat ``key=value`` file; ``#`` starts a comment."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{n}: expected key=value")
            key, value = line.split("=", 1)
            out[key.strip()] = value.strip()
    return out


def _city_of(team, season, config):
    moved = team <= config.t_star - config.t and season >= config.S // 2 + 1
    return config.t + team if moved else team


def quantize_line(boundary):
    """Nearest integer money line for a boundary probability, kept at |line| >= 100."""
    b = min(max(boundary, 1e-4), 1 - 1e-4)
    line = int(round(market.boundary_to_line(b)))
    if abs(line) < market.MIN_LINE:
        line = -market.MIN_LINE if b >= 0.5 else market.MIN_LINE
    return line


def generate(config, return_probabilities=False):
    """Simulate a league forward from ``config``.

    Returns
    -------
    games : LeagueGames
    truth : ParameterState
        Centred true strengths and home effects.
    p_true : numpy.ndarray
        True home-win probability of each game, only when
        ``return_probabilities`` is set.
    """
    rng = substream(config.seed, "synth")
    S, K, t = config.S, config.K, config.t
    theta = np.empty((S * K, t))
    for s in range(S):
        for k in range(K):
            p = s * K + k
            if p == 0:
                theta[p] = config.sigma_season * rng.standard_normal(t)
            elif k == 0:
                theta[p] = config.gamma_season * theta[p - 1] + config.sigma_season * rng.standard_normal(t)
            else:
                theta[p] = config.gamma_week * theta[p - 1] + config.sigma_week * rng.standard_normal(t)
    if config.alpha is not None:
        alpha = np.array(config.alpha, dtype=float)
    else:
        alpha = config.sigma_alpha * rng.standard_normal(config.t_star)
    truth = ParameterState(theta=theta, alpha0=config.alpha0, alpha=alpha,
                           sigma_game=config.sigma_game, sigma_season=config.sigma_season,
                           sigma_week=config.sigma_week, gamma_season=config.gamma_season,
                           gamma_week=config.gamma_week, sigma_alpha=config.sigma_alpha).centered()

    registry = CityRegistry()
    for s in range(1, S + 1):
        for i in range(1, t + 1):
            registry.set(i, s, _city_of(i, s, config))

    n = S * K * config.games_per_week
    period = np.repeat(np.arange(S * K), config.games_per_week)
    home = np.empty(n, dtype=np.int64)
    away = np.empty(n, dtype=np.int64)
    for g in range(n):
        home[g], away[g] = rng.choice(t, size=2, replace=False)
    season = period // K + 1
    city = np.array([_city_of(h + 1, s, config) - 1 for h, s in zip(home, season)], dtype=np.int64)
    arrays = GameArrays(period=period, home=home, away=away, city=city)
    spec = ModelSpec(config.league_config, variant=IHA)
    logit = game_means(truth, spec, arrays) + config.sigma_game * rng.standard_normal(n)
    p_true = invert_link(logit)
    wins = (rng.random(n) < p_true).astype(int)
    loser_score = rng.integers(0, 8, size=n)
    margin = rng.integers(1, 4, size=n)

    games = []
    half_vig = config.vig / 2.0
    for g in range(n):
        home_line = quantize_line(p_true[g] + half_vig)
        away_line = quantize_line(1.0 - p_true[g] + half_vig)
        pair = market.implied_pair(home_line, away_line)
        win_score = int(loser_score[g] + margin[g])
        hs, as_ = (win_score, int(loser_score[g])) if wins[g] else (int(loser_score[g]), win_score)
        games.append(GameRecord(
            league_id=config.league_id, season=int(season[g]), week=int(period[g] % K + 1),
            home_team=int(home[g] + 1), away_team=int(away[g] + 1), home_city=int(city[g] + 1),
            home_line=home_line, away_line=away_line, implied_p_home=pair.p_home,
            home_win=int(wins[g]), home_score=hs, away_score=as_, game_id=g + 1))
    team_names = [f"T{i:02d}" for i in range(1, t + 1)]
    city_names = [f"C{c:02d}" for c in range(1, config.t_star + 1)]
    league = LeagueGames(config=config.league_config, games=games, team_names=team_names,
                         city_names=city_names, registry=registry)
    if return_probabilities:
        return league, truth, p_true
    return league, truth


def write_truth(truth, config, theta_path, params_path):
    """Write true strengths (``season,week,team,theta_true``) and scalar parameters."""
    rows = ((s, k, f"T{i:02d}", float(truth.theta[(s - 1) * config.K + k - 1, i - 1]))
            for s in range(1, config.S + 1) for k in range(1, config.K + 1)
            for i in range(1, config.t + 1))
    write_csv(theta_path, "truth_theta/1", ["season", "week", "team", "theta_true"], rows)
    scal = [(k, v) for k, v in truth.scalars().items()]
    scal += [(f"alpha[{c}]", float(a)) for c, a in enumerate(truth.alpha, start=1)]
    write_csv(params_path, "truth_params/1", ["parameter", "value"], scal)
