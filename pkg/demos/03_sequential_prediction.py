"""Walk-forward prediction: does the model beat the market?

To judge a model fairly it may only use games already played. A sequential
fit refits the model after each week of a season and uses the fit through
week k to price the games of week k + 1. Those out-of-sample probabilities
are then scored against outcomes with AUC and the Brier score, next to the
market's own prices for the same games.

The script also asks which early-season signal best predicts a team's win
percentage over the rest of the season: its estimated strength, its point
differential, or its win percentage so far.

Run with ``python demos/03_sequential_prediction.py`` (about half a minute).
"""

import numpy as np

from parity_engine.evaluation import (SequentialFitPlan, auc, auc_se, brier, future_win_r2,
                                      observed_predictions, sequential_fit, sequential_predictions,
                                      sequential_theta_lookup, team_game_panel)
from parity_engine.sampler import SamplerConfig
from parity_engine.ssm import IHA, ModelSpec
from parity_engine.synth import TruthConfig, generate

# %% A league with widely spread team strengths, two seasons of ten weeks.
league, _ = generate(TruthConfig(t=10, t_star=10, S=2, K=10, sigma_season=0.8, games_per_week=20, seed=5))
spec = ModelSpec(league.config, variant=IHA)

# %% Refit after every week of season 2. Each fit sees season 1 in full plus
# the season-2 weeks played so far.
plan = SequentialFitPlan(season=2, weeks=tuple(range(2, 11)),
                         sampler=SamplerConfig(chains=2, iterations=3000, burn_in=1000, thin=4, seed=3))
fits = sequential_fit(league, spec, plan)
model = sequential_predictions(fits, spec, league.games, season=2)
print(f"{len(fits)} fits produced {len(model)} next-week predictions")

# %% Score model and market on exactly the same games.
outcome = {g.game_id: g.home_win for g in league.games}
predicted = {p.game_id for p in model}
market = [p for p in observed_predictions(league.games) if p.game_id in predicted]
print("\nsource   AUC (se)         Brier  calibration p")
for name, preds in (("model", model), ("market", market)):
    p = np.array([r.p_home for r in preds])
    y = np.array([outcome[r.game_id] for r in preds])
    a = auc(p, y)
    b = brier(p, y)
    print(f"{name:<8} {a:.3f} ({auc_se(a, y.sum(), len(y) - y.sum()):.3f})   {b.score:.3f}  {b.p_value:.3f}")

# %% Which signal after g games predicts the rest of the season best?
panel = team_game_panel(league.games, sequential_theta_lookup(fits, season=2))
r2 = future_win_r2([row for row in panel if row["season"] == 2])
print("\ngames played  R^2 strength  R^2 point diff  R^2 win %")
for g in sorted({g for g, _ in r2})[::3]:
    print(f"{g:>12}  {r2.get((g, 'theta'), float('nan')):12.3f}  {r2[(g, 'point_diff')]:14.3f}  "
          f"{r2[(g, 'win_pct')]:9.3f}")
