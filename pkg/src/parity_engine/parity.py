"""League parity from posterior draws.

``reg_parity`` summarises how often the better team wins a random regular
season matchup: twice the area under the CDF of better-team win
probabilities on [0.5, 1], so 1 means every game is a coin flip and 0 means
every result is predetermined.

``post_parity`` is a pseudo-R^2 comparing expected tournament finish by seed
with the two extremes: seeds fully determining the finish (0) and seeds
being irrelevant (1).
"""

import math
from dataclasses import dataclass, field

import numpy as np

from ._csvio import write_csv
from .errors import EmptySet, TooFewTeams
from .ssm import IHA, invert_link

WITH_HA = "with_ha"
NEUTRAL = "neutral"
HIGHER_SEED_HOSTS = "higher_seed"
ALTERNATE = "alternate"  # 2-2-1-1-1 style; not the published procedure


@dataclass(frozen=True, eq=False)
class SimulatedMatchupSet:
    league_id: str
    home_advantage_mode: str
    probabilities: np.ndarray


def _home_city_table(draws):
    cfg = draws.spec.league_config
    return np.array([[draws.home_city(i, s) for i in range(1, cfg.t + 1)]
                     for s in range(1, cfg.S + 1)], dtype=np.int64) - 1


def simulate_matchups(draws, n_sim=1000, mode=NEUTRAL, rng=None):
    """Simulate better-team win probabilities for random pairs of teams.

    For each replicate: pick a season and week uniformly; two distinct teams;
    one posterior draw of both teams' strengths; one posterior draw of the
    league and city home advantage for the stronger team (zero in neutral
    mode); one posterior draw of ``sigma_game`` and a game-level error.
    The inverse-link probability is reflected onto the better team's side.
    """
    draws.require_nonempty()
    if mode not in (WITH_HA, NEUTRAL):
        raise ValueError(f"mode must be {WITH_HA!r} or {NEUTRAL!r}")
    rng = rng or np.random.default_rng(0)
    spec = draws.spec
    cfg = spec.league_config
    n = len(draws)
    s = rng.integers(cfg.S, size=n_sim)
    k = rng.integers(cfg.K, size=n_sim)
    i = rng.integers(cfg.t, size=n_sim)
    j = rng.integers(cfg.t - 1, size=n_sim)
    j = j + (j >= i)
    d_theta = rng.integers(n, size=n_sim)
    d_ha = rng.integers(n, size=n_sim)
    d_sigma = rng.integers(n, size=n_sim)
    eps = rng.standard_normal(n_sim)

    period = s * cfg.K + k
    th_i = draws.theta[d_theta, period, i]
    th_j = draws.theta[d_theta, period, j]
    better = np.where(th_i >= th_j, i, j)
    logit = np.abs(th_i - th_j)
    if mode == WITH_HA:
        logit = logit + draws.scalars["alpha0"][d_ha]
        if spec.variant == IHA:
            city = _home_city_table(draws)[s, better]
            logit = logit + draws.alpha[d_ha, city]
    logit = logit + draws.scalars["sigma_game"][d_sigma] * eps
    p = invert_link(logit, spec.link)
    p = np.maximum(p, 1.0 - p)
    return SimulatedMatchupSet(league_id=cfg.league_id, home_advantage_mode=mode, probabilities=p)


def reg_parity(matchups):
    """``2 * integral_{0.5}^{1} P(p <= x) dx`` for the empirical distribution, i.e. ``2 * mean(1 - p)``."""
    p = np.asarray(getattr(matchups, "probabilities", matchups), dtype=float)
    if p.size == 0:
        raise EmptySet("no simulated probabilities")
    if np.any(p < 0.5) or np.any(p > 1.0):
        raise ValueError("probabilities must lie in [0.5, 1]")
    return 2.0 * math.fsum((1.0 - p).ravel()) / p.size


def write_matchups(path, sets):
    rows = ((m.league_id, m.home_advantage_mode, float(p)) for m in sets for p in m.probabilities)
    write_csv(path, "matchups/1", ["league", "mode", "p"], rows)


# -- postseason --------------------------------------------------------------

def expected_finish_bound(d):
    """Finish round of seed ``d`` when the higher seed always wins: ``ceil(log2(d) + 1)``."""
    d = int(d)
    if d < 1:
        raise ValueError("seed must be >= 1")
    return (d - 1).bit_length() + 1


def _check_bracket(z):
    z = int(z)
    if z < 2 or z & (z - 1):
        raise ValueError(f"bracket size must be a power of 2, got {z}")
    return z


def uniform_finish_constant(z):
    """Mean finish round of a seed when every team is equally strong."""
    z = _check_bracket(z)
    return math.fsum(expected_finish_bound(d) for d in range(1, z + 1)) / z


def deterministic_finish(z):
    return np.array([expected_finish_bound(d) for d in range(1, _check_bracket(z) + 1)], dtype=float)


@dataclass(frozen=True)
class TournamentSpec:
    z: int = 16
    series_length: int = 7
    n_tournaments: int = 1000
    home_rule: str = HIGHER_SEED_HOSTS
    game_error: bool = False

    def __post_init__(self):
        _check_bracket(self.z)
        if self.series_length < 1 or self.series_length % 2 == 0 or self.series_length > 75:
            raise ValueError("series_length must be odd and between 1 and 75")
        if self.n_tournaments < 1:
            raise ValueError("n_tournaments must be >= 1")
        if self.home_rule not in (HIGHER_SEED_HOSTS, ALTERNATE):
            raise ValueError(f"unknown home_rule {self.home_rule!r}")


@dataclass(frozen=True, eq=False)
class FinishDistribution:
    """``expected_finish[d-1]`` is the mean finish round of seed ``d``."""

    expected_finish: np.ndarray
    counts: np.ndarray = field(default=None)  # (z, rounds + 1) finish-round tallies

    @property
    def z(self):
        return len(self.expected_finish)


def bracket_order(z):
    """Seeds in bracket slot order, e.g. ``[1, 8, 4, 5, 2, 7, 3, 6]`` for 8 teams."""
    order = [1]
    while len(order) < _check_bracket(z):
        m = 2 * len(order)
        order = [x for s in order for x in (s, m + 1 - s)]
    return order


def _higher_seed_home(n):
    if n == 7:
        return np.array([1, 1, 0, 0, 1, 0, 1], dtype=bool)
    return np.arange(n) % 2 == 0


def simulate_bracket(strengths, home_advantage, spec, rng, sigma_game=0.0, link="logit"):
    """Simulate single-elimination tournaments.

    Parameters
    ----------
    strengths : array_like
        Strength of each seed, seed 1 first (length ``spec.z``).
    home_advantage : array_like or float
        Link-scale home edge each seed enjoys when hosting.
    spec : TournamentSpec
    rng : numpy.random.Generator
    sigma_game : float
        Game-level error SD, used only when ``spec.game_error``.

    Returns
    -------
    FinishDistribution
    """
    z = spec.z
    theta = np.asarray(strengths, dtype=float)
    if theta.shape != (z,):
        raise TooFewTeams(f"need exactly {z} seeded strengths, got {theta.size}")
    ha = np.broadcast_to(np.asarray(home_advantage, dtype=float), (z,))
    n_t, n = spec.n_tournaments, spec.series_length
    rounds = z.bit_length() - 1
    slots = np.tile(np.array(bracket_order(z)) - 1, (n_t, 1))
    finish = np.ones((n_t, z), dtype=np.int64)
    hosts_hi = (np.ones(n, dtype=bool) if spec.home_rule == HIGHER_SEED_HOSTS
                else _higher_seed_home(n))
    for r in range(1, rounds + 1):
        a, b = slots[:, 0::2], slots[:, 1::2]
        hi, lo = np.minimum(a, b), np.maximum(a, b)
        base = theta[hi] - theta[lo]
        logit = np.where(hosts_hi, base[..., None] + ha[hi][..., None],
                         base[..., None] - ha[lo][..., None])
        if spec.game_error and sigma_game > 0:
            logit = logit + sigma_game * rng.standard_normal(logit.shape)
        p = invert_link(logit, link)
        wins = np.sum(rng.random(p.shape) < p, axis=-1)
        hi_wins = wins > n // 2
        winner = np.where(hi_wins, hi, lo)
        loser = np.where(hi_wins, lo, hi)
        np.put_along_axis(finish, loser, rounds - r + 2, axis=1)
        slots = winner
    counts = np.stack([np.bincount(finish[:, d], minlength=rounds + 2) for d in range(z)])
    expected = np.array([math.fsum(finish[:, d]) / n_t for d in range(z)])
    return FinishDistribution(expected_finish=expected, counts=counts)


def post_parity(finish, z=None):
    """Pseudo-R^2 of expected finish against the deterministic-bracket finish."""
    e = np.asarray(getattr(finish, "expected_finish", finish), dtype=float)
    z = len(e) if z is None else _check_bracket(z)
    if len(e) != z:
        raise ValueError("finish vector length must equal z")
    f_z = uniform_finish_constant(z)
    num = math.fsum((e - f_z) ** 2)
    den = math.fsum((deterministic_finish(z) - f_z) ** 2)
    return 1.0 - num / den


def seeding_strengths(draws, season, weeks_with_games=None):
    """Mean posterior strength of each team over the last four weeks of ``season``.

    Only weeks that contained games count when ``weeks_with_games`` (or the
    fit metadata) says which those are. Returns ``(team_order, strengths)``
    with teams sorted strongest first; ties fall back to the mean over the
    earlier weeks of the season, then to team index.
    """
    cfg = draws.spec.league_config
    if weeks_with_games is None:
        weeks_with_games = (draws.meta.get("weeks_with_games") or {}).get(str(season))
    weeks = sorted(weeks_with_games) if weeks_with_games else list(range(1, cfg.K + 1))
    last = weeks[-4:]
    mean_theta = draws.theta.mean(axis=0)
    rows = lambda ws: mean_theta[[(season - 1) * cfg.K + k - 1 for k in ws]]
    strength = rows(last).mean(axis=0)
    earlier = [k for k in range(1, cfg.K + 1) if k < last[0]]
    tie = rows(earlier).mean(axis=0) if earlier else np.zeros(cfg.t)
    order = sorted(range(cfg.t), key=lambda i: (-strength[i], -tie[i], i))
    return [i + 1 for i in order], strength[order]


def season_tournament(draws, season, spec, rng):
    """Seed the top ``spec.z`` teams of ``season`` and simulate their tournaments."""
    cfg = draws.spec.league_config
    if cfg.t < spec.z:
        raise TooFewTeams(f"league has {cfg.t} teams; bracket needs {spec.z}")
    teams, strengths = seeding_strengths(draws, season)
    teams, strengths = teams[:spec.z], strengths[:spec.z]
    mean = draws.mean_state()
    ha = np.full(spec.z, mean.alpha0)
    if draws.spec.variant == IHA:
        ha = ha + np.array([mean.alpha[draws.home_city(team, season) - 1] for team in teams])
    return simulate_bracket(strengths, ha, spec, rng, sigma_game=mean.sigma_game,
                            link=draws.spec.link)


def league_post_parity(draws, spec, rng, seasons=None):
    """PostParity from tournaments pooled over seasons.

    Returns ``(post_parity, {season: FinishDistribution})``; the pooled
    expected finish is the mean over seasons.
    """
    seasons = seasons or range(1, draws.spec.league_config.S + 1)
    per_season = {s: season_tournament(draws, s, spec, rng) for s in seasons}
    pooled = np.mean([f.expected_finish for f in per_season.values()], axis=0)
    return post_parity(pooled, spec.z), per_season
