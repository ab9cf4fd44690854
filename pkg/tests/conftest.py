"""Shared fixtures: a small synthetic league and short fits of it.

Test comments tag where expected values come from. A [DERIVED] value is
computed independently, by closed form, brute force or simulation. A
[PUBLISHED] value is a published reference number. Untagged assertions
check values that follow directly from the definitions.
"""

import sys

import numpy as np
import pytest

from parity_engine.sampler import SamplerConfig, fit
from parity_engine.schedule import GameRecord, LeagueConfig
from parity_engine.ssm import CHA, IHA, ModelSpec
from parity_engine.synth import TruthConfig, generate


def make_game(season=1, week=1, home=1, away=2, city=1, p=0.5, win=1, game_id=1, league="L",
              home_score=None, away_score=None):
    return GameRecord(league_id=league, season=season, week=week, home_team=home, away_team=away,
                      home_city=city, home_line=None, away_line=None, implied_p_home=p,
                      home_win=win, home_score=home_score, away_score=away_score, game_id=game_id)


@pytest.fixture(scope="session")
def small_truth():
    return TruthConfig(t=6, t_star=7, S=2, K=6, games_per_week=9, sigma_alpha=0.3, seed=11)


@pytest.fixture(scope="session")
def small_league(small_truth):
    return generate(small_truth)


@pytest.fixture(scope="session")
def small_fit(small_league):
    league, _ = small_league
    spec = ModelSpec(league.config, variant=IHA)
    return fit(league, spec, SamplerConfig(chains=2, iterations=600, burn_in=200, thin=2, seed=5))


@pytest.fixture(scope="session")
def small_fit_cha(small_league):
    league, _ = small_league
    spec = ModelSpec(league.config, variant=CHA)
    return fit(league, spec, SamplerConfig(chains=2, iterations=600, burn_in=200, thin=2, seed=5))


@pytest.fixture
def rng():
    return np.random.default_rng(20240101)


@pytest.fixture
def two_team_config():
    return LeagueConfig("L", t=2, t_star=2, S=1, K=1)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for key in sorted(results):
            terminalreporter.write_line(results[key])
