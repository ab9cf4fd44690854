"""From money lines to calibrated win probabilities.

A sportsbook quotes two American money lines per game. Each line implies a
break-even probability; the two add up to slightly more than one because of
the bookmaker's margin (the vig). Dividing by that sum gives a vig-free pair.

This script walks through the conversion by hand, then checks on a synthetic
league whether the implied probabilities are calibrated against outcomes.

Run with ``python demos/01_market_probabilities.py``.
"""

import numpy as np

from parity_engine.market import boundary_probability, boundary_to_line, hosmer_lemeshow, implied_pair
from parity_engine.synth import TruthConfig, generate

# %% A single game: the favourite is -127, the underdog +117.
home, away = -127, 117
print(f"break-even probabilities: {boundary_probability(home):.4f} and {boundary_probability(away):.4f}")
pair = implied_pair(home, away)
print(f"overround {1 + pair.vig:.4f} -> vig-free pair ({pair.p_home:.4f}, {pair.p_away:.4f})")

# %% Going back: the money line that breaks even at a given probability.
for p in (0.25, 0.5, 0.6, 0.8):
    print(f"p={p:.2f}  line={boundary_to_line(p):+.0f}")

# %% Calibration. A synthetic league prices every game at its true
# probability plus a 4% margin, and outcomes are drawn from the truth, so the
# market should pass a Hosmer-Lemeshow test.
league, _ = generate(TruthConfig(t=12, t_star=12, S=4, K=20, games_per_week=30, vig=0.04, seed=1))
p = np.array([g.implied_p_home for g in league.games])
y = np.array([g.home_win for g in league.games])
hl = hosmer_lemeshow(p, y, bins=10)
print(f"\n{len(p)} games, HL statistic {hl.statistic:.2f} on {hl.dof} dof, p-value {hl.p_value:.3f}")
print("bin  n    mean p  expected  observed")
for b in hl.bins:
    print(f"{b['bin_index']:>3}  {b['n']:<4} {b['mean_implied_p']:.3f}  {b['expected_wins']:8.1f}  "
          f"{b['observed_wins']:8.0f}")

# %% A market that overrates home teams by 8 points fails the same test.
biased = np.clip(p + 0.08, 0.01, 0.99)
print(f"\nbiased market: HL p-value {hosmer_lemeshow(biased, y).p_value:.2e}")
