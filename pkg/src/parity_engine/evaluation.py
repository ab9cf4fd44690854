"""Walk-forward refits, game predictions and predictive scoring."""

import math
import warnings
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from ._csvio import read_csv, write_csv
from .errors import InsufficientData, InsufficientTeams, MissingFit, ParseError, SingleClass
from .sampler import SamplerConfig, fit
from .ssm import game_arrays, game_means, invert_link

OBSERVED = "observed_market"
SEQUENTIAL = "sequential_model"


@dataclass(frozen=True)
class SequentialFitPlan:
    """Cut points for walk-forward fits in one season.

    The fit at cut ``k`` sees every earlier season plus weeks ``1..k`` of
    ``season``.
    """

    season: int
    weeks: tuple
    sampler: SamplerConfig = field(default_factory=lambda: SamplerConfig(iterations=2000, burn_in=1000))

    @classmethod
    def for_season(cls, season, K, sampler=None):
        kw = {} if sampler is None else {"sampler": sampler}
        return cls(season=season, weeks=tuple(range(2, K + 1)), **kw)


@dataclass(frozen=True)
class PredictionRecord:
    game_id: int
    season: int
    week: int
    home_team: int
    away_team: int
    p_home: float
    source: str

    def __post_init__(self):
        if not 0.0 < self.p_home < 1.0:
            raise ValueError(f"prediction must lie in (0, 1), got {self.p_home}")


def games_through(games, season, week):
    return [g for g in games if g.season < season or (g.season == season and g.week <= week)]


def sequential_fit(games, spec, plan):
    """Independent fits at each cut point of ``plan``; returns ``{week: PosteriorDraws}``."""
    meta = None
    if hasattr(games, "team_names"):
        meta = {"team_names": list(games.team_names), "city_names": list(games.city_names),
                "home_city": games.registry.table(spec.league_config.t, spec.league_config.S)}
        games = games.games
    cfg = spec.league_config
    fits = {}
    for k in plan.weeks:
        if not (1 <= k <= cfg.K) or not (1 <= plan.season <= cfg.S):
            raise ValueError(f"cut (season {plan.season}, week {k}) outside the league grid")
        fits[k] = fit(games_through(games, plan.season, k), spec, plan.sampler, meta=meta)
    return fits


def predict_games(draws, spec, games, plug_in="posterior_mean"):
    """Home-win probabilities for ``games`` from an earlier fit.

    ``plug_in="posterior_mean"`` evaluates the game mean at the posterior
    mean state. ``"draw_average"`` (not the published procedure) averages
    the inverse link over draws instead.
    """
    if draws is None:
        raise MissingFit("no fit available for the previous week")
    games = list(games)
    if not games:
        return []
    arrays = game_arrays(games, spec, require_probability=False)
    if plug_in == "posterior_mean":
        p = invert_link(game_means(draws.mean_state(), spec, arrays), spec.link)
    elif plug_in == "draw_average":
        p = np.mean([invert_link(game_means(s, spec, arrays), spec.link) for s in draws], axis=0)
    else:
        raise ValueError(f"unknown plug_in {plug_in!r}")
    p = np.clip(p, 1e-12, 1 - 1e-12)
    return [PredictionRecord(game_id=g.game_id, season=g.season, week=g.week, home_team=g.home_team,
                             away_team=g.away_team, p_home=float(pi), source=SEQUENTIAL)
            for g, pi in zip(games, p)]


def sequential_predictions(fits, spec, games, season, plug_in="posterior_mean"):
    """Predict each week ``k + 1`` of ``season`` from the fit at cut ``k``."""
    out = []
    for k in sorted(fits):
        week_games = [g for g in games if g.season == season and g.week == k + 1]
        out.extend(predict_games(fits[k], spec, week_games, plug_in=plug_in))
    return out


def observed_predictions(games):
    return [PredictionRecord(game_id=g.game_id, season=g.season, week=g.week, home_team=g.home_team,
                             away_team=g.away_team, p_home=g.implied_p_home, source=OBSERVED)
            for g in games if g.has_probability]


PREDICTION_COLUMNS = ["game_id", "season", "week", "home_team", "away_team", "p_home", "source"]


def write_predictions(path, predictions, team_names=None):
    name = (lambda i: team_names[i - 1]) if team_names else (lambda i: i)
    rows = ((p.game_id, p.season, p.week, name(p.home_team), name(p.away_team), p.p_home, p.source)
            for p in predictions)
    write_csv(path, "predictions/1", PREDICTION_COLUMNS, rows)


def read_predictions(path):
    """Return ``[(game_id, p_home, source)]`` from a predictions CSV."""
    schema, header, rows = read_csv(path)
    if header != PREDICTION_COLUMNS:
        raise ParseError(f"predictions header must be {','.join(PREDICTION_COLUMNS)}", 0)
    out = []
    for i, r in enumerate(rows, start=1):
        try:
            out.append((int(r[0]), float(r[5]), r[6]))
        except (ValueError, IndexError):
            raise ParseError("malformed prediction row", i) from None
    return out


# -- scores ------------------------------------------------------------------

def _binary(outcomes):
    y = np.asarray(outcomes, dtype=float)
    if np.any((y != 0) & (y != 1)):
        raise ValueError("outcomes must be 0 or 1")
    return y


def auc(predictions, outcomes):
    """Probability that a random winner's prediction exceeds a random loser's (ties count half)."""
    p = np.asarray(predictions, dtype=float)
    y = _binary(outcomes)
    n1 = int(y.sum())
    n0 = len(y) - n1
    if n1 == 0 or n0 == 0:
        raise SingleClass("AUC needs both winners and losers")
    ranks = stats.rankdata(p)
    u = ranks[y == 1].sum() - n1 * (n1 + 1) / 2.0
    return float(u / (n1 * n0))


def auc_se(a, n_pos, n_neg):
    """Hanley-McNeil standard error of an AUC."""
    q1 = a / (2 - a)
    q2 = 2 * a * a / (1 + a)
    var = (a * (1 - a) + (n_pos - 1) * (q1 - a * a) + (n_neg - 1) * (q2 - a * a)) / (n_pos * n_neg)
    return math.sqrt(max(var, 0.0))


@dataclass(frozen=True)
class BrierResult:
    score: float
    spiegelhalter_z: float
    p_value: float
    degenerate: bool = False


def brier(predictions, outcomes):
    """Brier score with Spiegelhalter's calibration z-test (two-sided).

    When every prediction equals one half the z-statistic is undefined; the
    result then carries ``degenerate=True`` and a p-value of 1.
    """
    p = np.asarray(predictions, dtype=float)
    y = _binary(outcomes)
    if len(p) == 0:
        raise InsufficientData("brier needs at least one prediction")
    score = float(np.mean((y - p) ** 2))
    var = float(np.sum((1 - 2 * p) ** 2 * p * (1 - p)))
    if var <= 0:
        return BrierResult(score=score, spiegelhalter_z=math.nan, p_value=1.0, degenerate=True)
    z = float(np.sum((y - p) * (1 - 2 * p)) / math.sqrt(var))
    return BrierResult(score=score, spiegelhalter_z=z, p_value=float(2 * stats.norm.sf(abs(z))))


def write_table5(path, rows):
    """``rows``: iterable of ``(metric, source, value, p_value)``."""
    write_csv(path, "table5/1", ["metric", "source", "value", "p_value"], rows)


# -- future win percentage -------------------------------------------------------

def game_outcome(game):
    """Home win (1/0), or None for ties and unknown results."""
    if game.home_win is not None:
        return game.home_win
    if game.home_score is not None and game.away_score is not None and game.home_score != game.away_score:
        return int(game.home_score > game.away_score)
    return None


def team_game_panel(games, theta_lookup=None):
    """One row per team-season-game with season-to-date predictors and future win %.

    Parameters
    ----------
    games : iterable of GameRecord
    theta_lookup : dict, optional
        ``{(season, week, team): strength estimate}`` available after that week.

    Returns
    -------
    list of dict
        Keys ``team, season, game_number, week, theta, point_diff, win_pct,
        future_win_pct`` (the last is None for a team's final game).
    """
    per_team = defaultdict(list)
    ties = 0
    for g in games:
        res = game_outcome(g)
        if res is None:
            if g.home_score is not None and g.home_score == g.away_score:
                ties += 1
            continue
        margin = (g.home_score - g.away_score) if g.home_score is not None and g.away_score is not None else 0
        per_team[(g.home_team, g.season)].append((g.week, g.game_id or 0, res, margin))
        per_team[(g.away_team, g.season)].append((g.week, g.game_id or 0, 1 - res, -margin))
    if ties:
        warnings.warn(f"{ties} tied games excluded from win percentages", RuntimeWarning, stacklevel=2)
    theta_lookup = theta_lookup or {}
    panel = []
    for (team, season), rows in sorted(per_team.items()):
        rows.sort()
        wins = np.array([r[2] for r in rows], dtype=float)
        margins = np.array([r[3] for r in rows], dtype=float)
        n = len(rows)
        for g in range(1, n + 1):
            future = float(wins[g:].mean()) if g < n else None
            panel.append({"team": team, "season": season, "game_number": g, "week": rows[g - 1][0],
                          "theta": theta_lookup.get((season, rows[g - 1][0], team)),
                          "point_diff": float(margins[:g].sum()), "win_pct": float(wins[:g].mean()),
                          "future_win_pct": future})
    return panel


def sequential_theta_lookup(fits, season):
    """``{(season, week, team): mean strength}`` from the fit at cut ``week``."""
    out = {}
    for k, draws in fits.items():
        cfg = draws.spec.league_config
        row = draws.theta[:, (season - 1) * cfg.K + k - 1, :].mean(axis=0)
        for i, v in enumerate(row, start=1):
            out[(season, k, i)] = float(v)
    return out


PREDICTORS = ("theta", "point_diff", "win_pct")


def future_win_r2(panel, predictors=PREDICTORS):
    """R^2 of future win % on each predictor, pooled over teams and seasons, per game number.

    Returns ``{(game_number, predictor): r2}``. Game numbers with fewer than
    three usable points (including each team's last game, where the future
    is empty) are omitted.
    """
    by_g = defaultdict(list)
    for row in panel:
        if row["future_win_pct"] is not None:
            by_g[row["game_number"]].append(row)
    out = {}
    for g in sorted(by_g):
        rows = by_g[g]
        for pred in predictors:
            pts = [(r[pred], r["future_win_pct"]) for r in rows if r.get(pred) is not None]
            if len(pts) < 3:
                continue
            x, y = np.array(pts, dtype=float).T
            if np.ptp(x) == 0 or np.ptp(y) == 0:
                continue
            out[(g, pred)] = float(np.corrcoef(x, y)[0, 1] ** 2)
    if not out:
        raise InsufficientTeams("no game number has three or more teams with a future record")
    return out


def write_r2(path, r2):
    rows = ((g, pred, v) for (g, pred), v in sorted(r2.items()))
    write_csv(path, "future_win_r2/1", ["game_number", "predictor", "r2_pooled"], rows)
