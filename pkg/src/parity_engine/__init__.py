"""Dynamic team-strength models fit to betting-market probabilities, with
regular-season and postseason parity measures built on the posterior draws.

The main entry points are re-exported here; see the submodules for the rest.
"""

__version__ = "0.1.0"

from .errors import ParityEngineError
from .market import boundary_probability, hosmer_lemeshow, implied_pair
from .schedule import LeagueConfig, load_games, read_games, write_games
from .ssm import ARCSIN_SQRT, CHA, IHA, LOGIT, ModelSpec, ParameterState, apply_link, invert_link
from .sampler import SamplerConfig, fit
from .draws import PosteriorDraws, export_draws, import_draws
from .diagnostics import diagnostics
from .ppc import dic, dic_difference
from .evaluation import auc, brier, predict_games, sequential_fit
from .parity import TournamentSpec, league_post_parity, post_parity, reg_parity, simulate_matchups
from .synth import TruthConfig, generate

__all__ = [
    "ParityEngineError", "boundary_probability", "hosmer_lemeshow", "implied_pair",
    "LeagueConfig", "load_games", "read_games", "write_games",
    "ARCSIN_SQRT", "CHA", "IHA", "LOGIT", "ModelSpec", "ParameterState", "apply_link", "invert_link",
    "SamplerConfig", "fit", "PosteriorDraws", "export_draws", "import_draws", "diagnostics",
    "dic", "dic_difference", "auc", "brier", "predict_games", "sequential_fit",
    "TournamentSpec", "league_post_parity", "post_parity", "reg_parity", "simulate_matchups",
    "TruthConfig", "generate",
]
