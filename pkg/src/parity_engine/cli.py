"""Command-line entry point: ``parity-engine <command> ...``.

Every command writes into ``--out`` together with a ``manifest.json`` that
records the command, its resolved configuration, SHA-256 digests of the
inputs and the list of outputs. No timestamps are recorded, so rerunning a
command with the same inputs and flags reproduces every file byte for byte.

Exit codes: 0 ok, 2 unreadable input, 3 invalid input, 10 convergence
warning (some split R-hat above 1.1), 1 anything else.
"""

import argparse
import hashlib
import json
import math
import os
import sys

import numpy as np

from . import __version__
from ._csvio import write_csv
from .diagnostics import diagnostics
from .draws import export_draws, import_draws, sidecar_path
from .errors import InsufficientData, InsufficientDraws, ParityEngineError, ParseError, SchemaVersionError
from .evaluation import (OBSERVED, SEQUENTIAL, SequentialFitPlan, auc, auc_se, brier, future_win_r2,
                         observed_predictions, read_predictions, sequential_fit,
                         sequential_predictions, sequential_theta_lookup, team_game_panel,
                         write_predictions, write_r2, write_table5)
from .market import hosmer_lemeshow
from .parity import (ALTERNATE, HIGHER_SEED_HOSTS, NEUTRAL, WITH_HA, TournamentSpec,
                     league_post_parity, reg_parity, simulate_matchups, write_matchups)
from .ppc import dic, dic_difference, home_advantage_summary, parameter_summary, strength_summary
from .rng import substream
from .sampler import SamplerConfig, fit
from .schedule import load_games, read_games, write_games
from .ssm import CHA, IHA, LOGIT, ARCSIN_SQRT, ModelSpec
from .synth import TruthConfig, generate, read_key_values, write_truth

EXIT_OK = 0
EXIT_OTHER = 1
EXIT_PARSE = 2
EXIT_VALIDATION = 3
EXIT_CONVERGENCE = 10

MANIFEST = "manifest.json"
_SAMPLER_INTS = ("chains", "iterations", "burn_in", "thin", "seed")


# -- helpers -----------------------------------------------------------------

def sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def write_manifest(out, command, config, inputs, seed, outputs):
    """Write ``out/manifest.json``; ``outputs`` are paths relative to ``out``."""
    manifest = {
        "command": command,
        "config": config,
        "inputs": {path: sha256(path) for path in inputs},
        "seed": seed,
        "engine_version": __version__,
        "outputs": sorted(outputs),
    }
    with open(os.path.join(out, MANIFEST), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return repr(value)
    return value


def sampler_config(args, **defaults):
    """Sampler settings: ``defaults``, then the ``--sampler-config`` file, then explicit flags."""
    kw = dict(defaults)
    if getattr(args, "sampler_config", None):
        for key, value in read_key_values(args.sampler_config).items():
            key = key.replace("-", "_")
            if key in _SAMPLER_INTS:
                kw[key] = int(value)
            elif key == "theta_update":
                kw[key] = value
            else:
                raise ValueError(f"unknown sampler setting {key!r}")
    for key in _SAMPLER_INTS + ("theta_update",):
        value = getattr(args, key, None)
        if value is not None:
            kw[key] = value
    return SamplerConfig(**kw)


def _add_sampler_flags(p):
    g = p.add_argument_group("sampler")
    g.add_argument("--chains", type=int)
    g.add_argument("--iterations", type=int, help="sweeps per chain, burn-in included")
    g.add_argument("--burn-in", dest="burn_in", type=int)
    g.add_argument("--thin", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--theta-update", dest="theta_update", choices=("joint", "blockwise"))
    g.add_argument("--sampler-config", dest="sampler_config", help="key=value file of sampler settings")


def _add_model_flags(p):
    p.add_argument("--model", type=str.upper, choices=(IHA, CHA), default=IHA)
    p.add_argument("--link", choices=(LOGIT, ARCSIN_SQRT), default=LOGIT)


def _add_games_flags(p):
    p.add_argument("games", help="games CSV")
    p.add_argument("--registry", help="optional team/city registry CSV")
    p.add_argument("--league", help="league to use when the file holds several")


def _load_league(args, league_config=None):
    return load_games(args.games, league_config=league_config, registry_path=args.registry,
                      league=args.league)


def _inputs(args, *paths):
    found = [p for p in paths if p]
    if getattr(args, "registry", None):
        found.append(args.registry)
    return found


def _fit_outputs(draws, out, stem="draws"):
    """Export draws and diagnostics; return (relative outputs, flagged parameters)."""
    path = os.path.join(out, f"{stem}.csv")
    export_draws(draws, path)
    outputs = [f"{stem}.csv", os.path.relpath(sidecar_path(path), out)]
    flagged = []
    try:
        diag = diagnostics(draws)
    except InsufficientDraws as exc:
        print(f"warning: diagnostics skipped ({exc})", file=sys.stderr)
    else:
        diag.write(os.path.join(out, f"{stem}_diagnostics.csv"))
        outputs.append(f"{stem}_diagnostics.csv")
        flagged = diag.flagged
    return outputs, flagged


# -- commands ------------------------------------------------------------------

def cmd_validate_market(args):
    leagues = read_games(args.games, args.registry)
    rows, outputs = [], []
    for league, lg in leagues.items():
        bet = [g for g in lg.games if g.has_probability]
        with_outcome = [g for g in lg.games if g.home_win is not None]
        p = np.array([g.implied_p_home for g in bet if g.home_win is not None])
        y = np.array([g.home_win for g in bet if g.home_win is not None])
        observed = float(np.mean([g.home_win for g in with_outcome])) if with_outcome else math.nan
        row = [league, len(lg.games), len(bet), observed,
               float(np.mean([g.implied_p_home for g in bet])) if bet else math.nan,
               len(bet) / len(lg.games) if lg.games else math.nan]
        try:
            hl = hosmer_lemeshow(p, y, bins=args.bins)
        except InsufficientData as exc:
            row += [math.nan, math.nan, f"insufficient data ({exc})"]
        else:
            verdict = "lack of fit" if hl.p_value < args.alpha else "no lack of fit"
            row += [hl.statistic, hl.p_value, verdict]
            name = f"hl_bins_{league}.csv"
            hl.write_bins(os.path.join(args.out, name))
            outputs.append(name)
        rows.append(row)
        print(f"{league}: n_games={row[1]} n_bets={row[2]} HL p={row[7]:.4g} -> {row[8]}")
    header = ["league", "n_games", "n_bets", "mean_observed_p", "mean_implied_p", "coverage",
              "hl_statistic", "hl_p_value", "verdict"]
    write_csv(os.path.join(args.out, "calibration.csv"), "calibration/1", header, rows)
    outputs.append("calibration.csv")
    write_manifest(args.out, "validate-market", {"bins": args.bins, "alpha": args.alpha},
                   _inputs(args, args.games), None, outputs)
    return EXIT_OK


def cmd_fit(args):
    lg = _load_league(args)
    spec = ModelSpec(lg.config, variant=args.model, link=args.link)
    config = sampler_config(args)
    draws = fit(lg, spec, config)
    outputs, flagged = _fit_outputs(draws, args.out)

    summary = [("strength", k, v) for k, v in strength_summary(draws).items()]
    summary += [("parameter", f"{k}_mean", m) for k, (m, _) in parameter_summary(draws).items()]
    summary += [("parameter", f"{k}_sd", s) for k, (_, s) in parameter_summary(draws).items()]
    if spec.variant == IHA:
        for c, (lo, med, hi) in home_advantage_summary(draws).items():
            name = lg.city_names[c - 1]
            summary += [("home_win_prob", f"{name}_q025", lo), ("home_win_prob", f"{name}_median", med),
                        ("home_win_prob", f"{name}_q975", hi)]
    write_csv(os.path.join(args.out, "summary.csv"), "fit_summary/1", ["section", "name", "value"], summary)
    outputs.append("summary.csv")
    write_manifest(args.out, "fit", {"model": spec.to_dict(), "sampler": config.to_dict()},
                   _inputs(args, args.games), config.seed, outputs)
    if flagged:
        print(f"warning: split R-hat above 1.1 for {len(flagged)} parameter(s): "
              f"{', '.join(flagged[:10])}", file=sys.stderr)
        return EXIT_CONVERGENCE
    return EXIT_OK


def cmd_compare(args):
    draws_a = import_draws(args.draws_iha)
    draws_b = import_draws(args.draws_cha)
    lg = _load_league(args, draws_a.spec.league_config)
    games = lg.fitted()
    rows = []
    for label, d in (("a", draws_a), ("b", draws_b)):
        r = dic(d, d.spec, games)
        rows.append((label, d.spec.variant, r.dic, r.dbar, r.p_d))
    diff, se = dic_difference(draws_a, draws_a.spec, draws_b, draws_b.spec, games)
    write_csv(os.path.join(args.out, "dic.csv"), "dic/1", ["fit", "model", "dic", "d_bar", "p_d"], rows)
    write_csv(os.path.join(args.out, "dic_difference.csv"), "dic_difference/1",
              ["model_a", "model_b", "difference", "se"],
              [(draws_a.spec.variant, draws_b.spec.variant, diff, se)])
    for r in rows:
        print(f"{r[1]}: DIC={r[2]:.3f} pD={r[4]:.3f}")
    print(f"DIC({rows[0][1]}) - DIC({rows[1][1]}) = {diff:.3f} (se {se:.3f})")
    write_manifest(args.out, "compare", {}, _inputs(args, args.draws_iha, sidecar_path(args.draws_iha),
                                                     args.draws_cha, sidecar_path(args.draws_cha),
                                                     args.games),
                   None, ["dic.csv", "dic_difference.csv"])
    return EXIT_OK


def cmd_sequential(args):
    lg = _load_league(args)
    spec = ModelSpec(lg.config, variant=args.model, link=args.link)
    base = SequentialFitPlan.for_season(args.season, lg.config.K)
    config = sampler_config(args, iterations=base.sampler.iterations, burn_in=base.sampler.burn_in)
    weeks = tuple(int(w) for w in args.weeks.split(",")) if args.weeks else base.weeks
    plan = SequentialFitPlan(season=args.season, weeks=weeks, sampler=config)
    fits = sequential_fit(lg, spec, plan)
    outputs, flagged = [], []
    for k, draws in sorted(fits.items()):
        out, fl = _fit_outputs(draws, args.out, stem=f"fits/week_{k:02d}")
        outputs += out
        flagged += [f"week {k}: {name}" for name in fl]

    model = sequential_predictions(fits, spec, lg.games, args.season)
    predicted = {p.game_id for p in model}
    market = [p for p in observed_predictions(lg.games) if p.game_id in predicted]
    write_predictions(os.path.join(args.out, "predictions.csv"), model + market, lg.team_names)
    outputs.append("predictions.csv")

    try:
        r2 = future_win_r2(team_game_panel(lg.games, sequential_theta_lookup(fits, args.season)))
    except InsufficientData as exc:
        print(f"warning: future-win R^2 skipped ({exc})", file=sys.stderr)
    else:
        write_r2(os.path.join(args.out, "future_win_r2.csv"), r2)
        outputs.append("future_win_r2.csv")
    write_manifest(args.out, "sequential",
                   {"model": spec.to_dict(), "sampler": config.to_dict(), "season": args.season,
                    "weeks": list(weeks)},
                   _inputs(args, args.games), config.seed, outputs)
    print(f"{len(fits)} fits, {len(model)} predictions")
    if flagged:
        print(f"warning: split R-hat above 1.1 in {len(flagged)} case(s)", file=sys.stderr)
        return EXIT_CONVERGENCE
    return EXIT_OK


def cmd_evaluate(args):
    predictions = read_predictions(args.predictions)
    outcomes = {}
    for lg in read_games(args.games, args.registry).values():
        if args.league and lg.config.league_id != args.league:
            continue
        outcomes.update({g.game_id: g.home_win for g in lg.games})
    by_source = {}
    for game_id, p, source in predictions:
        y = outcomes.get(game_id)
        if y is None:
            continue
        by_source.setdefault(source, ([], []))
        by_source[source][0].append(p)
        by_source[source][1].append(y)
    rows = []
    order = sorted(by_source, key=lambda s: (s not in (OBSERVED, SEQUENTIAL), s))
    for source in order:
        p, y = (np.array(v) for v in by_source[source])
        a = auc(p, y)
        n_pos = int(np.sum(y))
        se = auc_se(a, n_pos, len(y) - n_pos)
        b = brier(p, y)
        rows += [("n", source, len(y), None), ("auc", source, a, None), ("auc_se", source, se, None),
                 ("brier", source, b.score, b.p_value), ("spiegelhalter_z", source, b.spiegelhalter_z, None)]
        print(f"{source}: n={len(y)} AUC={a:.4f} (se {se:.4f}) Brier={b.score:.4f} (p={b.p_value:.3g})")
    write_table5(os.path.join(args.out, "metrics.csv"), rows)
    write_manifest(args.out, "evaluate", {"league": args.league},
                   _inputs(args, args.predictions, args.games), None, ["metrics.csv"])
    return EXIT_OK


def cmd_parity(args):
    draws = import_draws(args.draws)
    league = draws.spec.league_config.league_id
    seed = 0 if args.seed is None else args.seed
    outputs = []
    config = {"mode": args.mode}
    if args.mode == "reg":
        sets = [simulate_matchups(draws, args.n_sim, mode, substream(seed, f"parity-{mode}"))
                for mode in (WITH_HA, NEUTRAL)]
        write_matchups(os.path.join(args.out, "matchups.csv"), sets)
        rows = [(league, m.home_advantage_mode, reg_parity(m)) for m in sets]
        write_csv(os.path.join(args.out, "reg_parity.csv"), "reg_parity/1", ["league", "mode", "reg_parity"], rows)
        outputs += ["matchups.csv", "reg_parity.csv"]
        config["n_sim"] = args.n_sim
        for r in rows:
            print(f"{league} {r[1]}: RegParity={r[2]:.4f}")
    else:
        spec = TournamentSpec(z=args.z, series_length=args.series_length,
                              n_tournaments=args.n_tournaments, home_rule=args.home_rule,
                              game_error=args.game_error)
        pp, per_season = league_post_parity(draws, spec, substream(seed, "parity-post"))
        rows = [(league, s, d, float(e)) for s, f in per_season.items()
                for d, e in enumerate(f.expected_finish, start=1)]
        write_csv(os.path.join(args.out, "finish.csv"), "finish/1",
                  ["league", "season", "seed", "expected_finish"], rows)
        write_csv(os.path.join(args.out, "post_parity.csv"), "post_parity/1",
                  ["league", "z", "series_length", "post_parity"],
                  [(league, spec.z, spec.series_length, pp)])
        outputs += ["finish.csv", "post_parity.csv"]
        config.update(z=spec.z, series_length=spec.series_length, n_tournaments=spec.n_tournaments,
                      home_rule=spec.home_rule, game_error=spec.game_error)
        print(f"{league}: PostParity={pp:.4f}")
    write_manifest(args.out, "parity", config, _inputs(args, args.draws, sidecar_path(args.draws)),
                   seed, outputs)
    return EXIT_OK


def cmd_synth(args):
    values = read_key_values(args.config)
    if args.seed is not None:
        values["seed"] = str(args.seed)
    truth_config = TruthConfig.from_mapping(values)
    league, truth = generate(truth_config)
    write_games(league, os.path.join(args.out, "games.csv"))
    write_truth(truth, truth_config, os.path.join(args.out, "truth_theta.csv"),
                os.path.join(args.out, "truth_params.csv"))
    config = {k: _jsonable(v) for k, v in truth_config.__dict__.items()}
    write_manifest(args.out, "synth", config, [args.config], truth_config.seed,
                   ["games.csv", "truth_theta.csv", "truth_params.csv"])
    print(f"{len(league)} games written to {os.path.join(args.out, 'games.csv')}")
    return EXIT_OK


# -- parser --------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(prog="parity-engine", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate-market", help="calibration of market-implied probabilities")
    _add_games_flags(p)
    p.add_argument("--bins", type=int, default=10)
    p.add_argument("--alpha", type=float, default=0.05, help="significance level for the verdict")
    p.set_defaults(func=cmd_validate_market)

    p = sub.add_parser("fit", help="fit the state-space model to all games")
    _add_games_flags(p)
    _add_model_flags(p)
    _add_sampler_flags(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("compare", help="DIC of two fits on the same games")
    p.add_argument("draws_iha", help="draws CSV of the first fit (usually IHA)")
    p.add_argument("draws_cha", help="draws CSV of the second fit (usually CHA)")
    _add_games_flags(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("sequential", help="walk-forward fits and next-week predictions")
    _add_games_flags(p)
    _add_model_flags(p)
    _add_sampler_flags(p)
    p.add_argument("--season", type=int, required=True)
    p.add_argument("--weeks", help="comma-separated cut weeks (default 2..K)")
    p.set_defaults(func=cmd_sequential)

    p = sub.add_parser("evaluate", help="AUC and Brier scores of predictions")
    p.add_argument("predictions", help="predictions CSV")
    _add_games_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("parity", help="regular-season or postseason parity from draws")
    p.add_argument("draws", help="draws CSV")
    p.add_argument("--mode", choices=("reg", "post"), default="reg")
    p.add_argument("--seed", type=int)
    p.add_argument("--n-sim", dest="n_sim", type=int, default=1000)
    p.add_argument("--z", type=int, default=16, help="bracket size")
    p.add_argument("--series-length", dest="series_length", type=int, default=7)
    p.add_argument("--n-tournaments", dest="n_tournaments", type=int, default=1000)
    p.add_argument("--home-rule", dest="home_rule", choices=(HIGHER_SEED_HOSTS, ALTERNATE),
                   default=HIGHER_SEED_HOSTS)
    p.add_argument("--game-error", dest="game_error", action="store_true",
                   help="add game-level noise to each simulated game")
    p.set_defaults(func=cmd_parity)

    p = sub.add_parser("synth", help="generate a synthetic league from a key=value truth file")
    p.add_argument("config", help="key=value truth configuration")
    p.add_argument("--seed", type=int, help="overrides the seed in the config file")
    p.set_defaults(func=cmd_synth)

    for name, action in sub.choices.items():
        action.add_argument("--out", required=True, help="output directory")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        os.makedirs(args.out, exist_ok=True)
        return args.func(args)
    except (ParseError, SchemaVersionError, UnicodeDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ValueError as exc:  # every validation error of the engine is a ValueError
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ParityEngineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OTHER


if __name__ == "__main__":
    sys.exit(main())
