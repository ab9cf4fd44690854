"""Game records, league dimensions and games-CSV ingestion.

Team and city names are strings in the CSV and are mapped to dense 1-based
indices in sorted-name order, so the same file always yields the same
indices.
"""

import csv
import math
import os
from collections import defaultdict
from dataclasses import dataclass, field, replace

from . import market
from ._csvio import SCHEMA_PREFIX, fmt
from .errors import DomainError, ParseError, ValidationError

GAMES_COLUMNS = ["league", "season", "week", "home_team", "away_team", "home_city",
                 "home_line", "away_line", "home_win", "home_score", "away_score"]
GAMES_SCHEMA = "games/1"
REGISTRY_COLUMNS = ["league", "team", "season_from", "season_to", "city"]


@dataclass(frozen=True)
class LeagueConfig:
    """League dimensions: teams ``t``, home cities ``t_star``, seasons ``S``, weeks ``K``."""

    league_id: str
    t: int
    t_star: int
    S: int
    K: int

    def __post_init__(self):
        if self.t < 2:
            raise ValidationError("a league needs at least 2 teams")
        if self.t_star < self.t:
            raise ValidationError("t_star must be >= t")
        if self.S < 1 or self.K < 1:
            raise ValidationError("S and K must be >= 1")

    @property
    def n_periods(self):
        return self.S * self.K


@dataclass(frozen=True)
class GameRecord:
    league_id: str
    season: int
    week: int
    home_team: int
    away_team: int
    home_city: int
    home_line: int = None
    away_line: int = None
    implied_p_home: float = None
    home_win: int = None
    home_score: int = None
    away_score: int = None
    game_id: int = None

    def __post_init__(self):
        if self.home_team == self.away_team:
            raise ValidationError(f"home_team == away_team ({self.home_team})")
        p = self.implied_p_home
        if p is not None and not 0.0 < p < 1.0:
            raise ValidationError(f"implied_p_home must lie in (0, 1), got {p}")

    @property
    def has_probability(self):
        return self.implied_p_home is not None


@dataclass
class CityRegistry:
    """Maps ``(team, season)`` to a home-city index."""

    cities: dict = field(default_factory=dict)

    def city(self, team, season):
        return self.cities.get((team, season))

    def set(self, team, season, city):
        prev = self.cities.get((team, season))
        if prev is not None and prev != city:
            raise ValidationError(
                f"team {team} has two home cities ({prev}, {city}) in season {season}")
        self.cities[(team, season)] = city

    def n_cities(self):
        return len(set(self.cities.values()))

    def table(self, n_teams, n_seasons):
        """Dense ``(S, t)`` nested list of city indices (0 where unknown)."""
        return [[self.cities.get((i, s), 0) for i in range(1, n_teams + 1)]
                for s in range(1, n_seasons + 1)]


@dataclass
class LeagueGames:
    """Validated games of one league plus the name-to-index maps used to build them."""

    config: LeagueConfig
    games: list
    team_names: list
    city_names: list
    registry: CityRegistry

    def __iter__(self):
        return iter(self.games)

    def __len__(self):
        return len(self.games)

    def __getitem__(self, item):
        return self.games[item]

    def fitted(self):
        """Games carrying an implied probability; the others are only counted for coverage."""
        return [g for g in self.games if g.has_probability]

    def with_games(self, games):
        return replace(self, games=list(games))

    def index_mapping(self):
        return {"teams": {name: i + 1 for i, name in enumerate(self.team_names)},
                "cities": {name: i + 1 for i, name in enumerate(self.city_names)}}


def _opt_int(raw, name, row):
    raw = raw.strip()
    if raw == "":
        return None
    try:
        value = float(raw)
    except ValueError:
        raise ParseError(f"column {name!r}: {raw!r} is not an integer", row) from None
    if not math.isfinite(value) or value != int(value):
        raise ParseError(f"column {name!r}: {raw!r} is not an integer", row)
    return int(value)


def _req_int(raw, name, row):
    value = _opt_int(raw, name, row)
    if value is None:
        raise ParseError(f"column {name!r} is required", row)
    return value


def _read_rows(path, expected):
    with open(path, newline="", encoding="utf-8-sig") as fh:
        lines = [ln for ln in fh.read().splitlines() if not ln.startswith("#")]
    if not lines:
        raise ParseError(f"{os.path.basename(path)}: empty file, header row required", 0)
    reader = csv.reader(lines)
    header = [h.strip() for h in next(reader)]
    if header != expected:
        raise ParseError(f"header must be {','.join(expected)}; got {','.join(header)}", 0)
    rows = []
    for i, raw in enumerate(reader, start=1):
        if not raw or all(c.strip() == "" for c in raw):
            continue
        if len(raw) != len(expected):
            raise ParseError(f"expected {len(expected)} fields, got {len(raw)}", i)
        rows.append((i, dict(zip(expected, raw))))
    return rows


def load_registry(path):
    """Read a city-registry CSV into ``{league: [(team, season_from, season_to, city)]}``."""
    out = defaultdict(list)
    for i, row in _read_rows(path, REGISTRY_COLUMNS):
        out[row["league"].strip()].append((row["team"].strip(), _req_int(row["season_from"], "season_from", i),
                                           _req_int(row["season_to"], "season_to", i), row["city"].strip()))
    return dict(out)


def read_games(path, registry_path=None):
    """Load every league in a games CSV.

    Returns
    -------
    dict
        ``{league_id: LeagueGames}`` with dimensions inferred from the data.
    """
    rows = _read_rows(path, GAMES_COLUMNS)
    by_league = defaultdict(list)
    for i, row in rows:
        by_league[row["league"].strip()].append((i, row))
    registry = load_registry(registry_path) if registry_path else {}
    return {lg: _build_league(lg, lr, None, registry.get(lg)) for lg, lr in sorted(by_league.items())}


def load_games(path, league_config=None, registry_path=None, league=None):
    """Load and validate the games of a single league.

    Parameters
    ----------
    path : str
        Games CSV (see ``GAMES_COLUMNS``).
    league_config : LeagueConfig, optional
        Expected dimensions. When omitted they are inferred: ``t`` and
        ``t_star`` from the distinct names, ``S`` and ``K`` from the largest
        season and week indices.
    registry_path : str, optional
        City-registry CSV; without one, each team's city for a season is
        taken from its home games.
    league : str, optional
        Which league to keep when the file holds several.
    """
    rows = _read_rows(path, GAMES_COLUMNS)
    if league is None and league_config is not None:
        league = league_config.league_id
    leagues = sorted({r["league"].strip() for _, r in rows})
    if league is None:
        if len(leagues) > 1:
            raise ValidationError(f"file holds several leagues {leagues}; pass league=")
        league = leagues[0] if leagues else ""
    mine = [(i, r) for i, r in rows if r["league"].strip() == league]
    reg = load_registry(registry_path).get(league) if registry_path else None
    return _build_league(league, mine, league_config, reg)


def _build_league(league, rows, config, registry_rows):
    team_names = sorted({r[c].strip() for _, r in rows for c in ("home_team", "away_team")}
                        | {t for t, *_ in (registry_rows or [])})
    city_names = sorted({r["home_city"].strip() for _, r in rows}
                        | {c for *_, c in (registry_rows or [])})
    team_idx = {n: k + 1 for k, n in enumerate(team_names)}
    city_idx = {n: k + 1 for k, n in enumerate(city_names)}

    registry = CityRegistry()
    if registry_rows:
        for team, s0, s1, city in registry_rows:
            for s in range(s0, s1 + 1):
                registry.set(team_idx[team], s, city_idx[city])

    games = []
    for i, row in rows:
        season = _req_int(row["season"], "season", i)
        week = _req_int(row["week"], "week", i)
        home_line = _opt_int(row["home_line"], "home_line", i)
        away_line = _opt_int(row["away_line"], "away_line", i)
        home_win = _opt_int(row["home_win"], "home_win", i)
        if home_win not in (None, 0, 1):
            raise ValidationError(f"row {i}: home_win must be 0, 1 or empty")
        if (home_line is None) != (away_line is None):
            raise ValidationError(f"row {i}: only one money line present")
        p_home = None
        if home_line is not None:
            try:
                p_home = market.implied_pair(home_line, away_line).p_home
            except DomainError as exc:
                raise ValidationError(f"row {i}: {exc}") from None
        home, away = row["home_team"].strip(), row["away_team"].strip()
        city = city_idx[row["home_city"].strip()]
        if season < 1 or week < 1:
            raise ValidationError(f"row {i}: season and week are 1-based")
        if registry_rows:
            expected = registry.city(team_idx[home], season)
            if expected != city:
                raise ValidationError(
                    f"row {i}: home_city {row['home_city'].strip()!r} does not match the registry "
                    f"for {home!r} in season {season}")
        try:
            registry.set(team_idx[home], season, city)
            games.append(GameRecord(
                league_id=league, season=season, week=week, home_team=team_idx[home],
                away_team=team_idx[away], home_city=city, home_line=home_line,
                away_line=away_line, implied_p_home=p_home, home_win=home_win,
                home_score=_opt_int(row["home_score"], "home_score", i),
                away_score=_opt_int(row["away_score"], "away_score", i), game_id=i))
        except ValidationError as exc:
            raise ValidationError(f"row {i}: {exc}") from None

    if config is None:
        config = LeagueConfig(
            league_id=league, t=max(len(team_names), 2), t_star=max(len(city_names), len(team_names), 2),
            S=max((g.season for g in games), default=1), K=max((g.week for g in games), default=1))
    else:
        if len(team_names) > config.t or len(city_names) > config.t_star:
            raise ValidationError(
                f"data has {len(team_names)} teams / {len(city_names)} cities; config allows "
                f"{config.t} / {config.t_star}")
        for g in games:
            if g.season > config.S or g.week > config.K:
                raise ValidationError(f"row {g.game_id}: (season {g.season}, week {g.week}) "
                                      f"outside {config.S} x {config.K}")
    return LeagueGames(config=config, games=games, team_names=team_names,
                       city_names=city_names, registry=registry)


def write_games(league_games, path):
    """Write games back out in the games-CSV schema, names restored."""
    teams, cities = league_games.team_names, league_games.city_names
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"{SCHEMA_PREFIX}{GAMES_SCHEMA}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(GAMES_COLUMNS)
        for g in league_games.games:
            writer.writerow([g.league_id, g.season, g.week, teams[g.home_team - 1],
                             teams[g.away_team - 1], cities[g.home_city - 1],
                             fmt(g.home_line), fmt(g.away_line), fmt(g.home_win),
                             fmt(g.home_score), fmt(g.away_score)])


def week_slices(games, config):
    """Group games by ``(season, week)``.

    Every ``(s, k)`` in the league grid gets a key, so weeks without games
    (lockouts) appear as empty lists.
    """
    slices = {(s, k): [] for s in range(1, config.S + 1) for k in range(1, config.K + 1)}
    for g in games:
        slices[(g.season, g.week)].append(g)
    return slices
