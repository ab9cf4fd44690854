"""Measuring parity in the regular season and in the playoffs.

Regular-season parity asks how close a typical game is. Draw two teams at
random from a random week, take the probability that the better one wins and
average its distance from certainty: RegParity = 2 * mean(1 - p). A league of
coin flips scores 1; a league where the better team always wins scores 0.

Postseason parity asks how much the bracket rewards being seeded high.
Simulate the playoffs many times, record each seed's mean finishing round
and compare with two references: every seed equal (parity 1) and the higher
seed always advancing (parity 0).

The script fits two synthetic leagues, one tightly bunched and one spread
out, and compares them on both measures.

Run with ``python demos/04_parity.py`` (a few seconds).
"""

import numpy as np

from parity_engine.parity import (NEUTRAL, WITH_HA, TournamentSpec, league_post_parity, post_parity,
                                  reg_parity, simulate_bracket, simulate_matchups)
from parity_engine.rng import substream
from parity_engine.sampler import SamplerConfig, fit
from parity_engine.ssm import IHA, ModelSpec
from parity_engine.synth import TruthConfig, generate

config = SamplerConfig(chains=2, iterations=2000, burn_in=500, thin=3, seed=2)
leagues = {"bunched": 0.15, "spread": 0.7}

print("league    RegParity (with home edge)  RegParity (neutral)  PostParity (8 teams, best of 7)")
for name, sigma_season in leagues.items():
    league, _ = generate(TruthConfig(t=12, t_star=12, S=2, K=12, games_per_week=24,
                                     sigma_season=sigma_season, seed=8))
    draws = fit(league, ModelSpec(league.config, IHA), config)
    rng = substream(1, name)
    reg = {mode: reg_parity(simulate_matchups(draws, 2000, mode, rng)) for mode in (WITH_HA, NEUTRAL)}
    post, _ = league_post_parity(draws, TournamentSpec(z=8, series_length=7, n_tournaments=2000), rng)
    print(f"{name:<9} {reg[WITH_HA]:26.3f}  {reg[NEUTRAL]:19.3f}  {post:8.3f}")

# %% Longer series let the better team's edge accumulate, so postseason parity
# falls as the series lengthens. Here the sixteen strengths are fixed directly.
strengths = np.linspace(0.6, -0.6, 16)
print("\nseries length  PostParity")
for n in (1, 3, 7, 21, 75):
    spec = TournamentSpec(z=16, series_length=n, n_tournaments=2000)
    finish = simulate_bracket(strengths, 0.1, spec, substream(3, f"series-{n}"))
    print(f"{n:>13}  {post_parity(finish):.3f}")
