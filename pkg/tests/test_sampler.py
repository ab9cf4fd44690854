import math

import numpy as np
import pytest
from scipy import linalg, stats

from parity_engine import _kernels
from parity_engine.errors import DimensionMismatch
from parity_engine.rng import substream
from parity_engine.sampler import (SamplerConfig, fit, precision_logpdf, slice_sample,
                                   truncated_normal)
from parity_engine.ssm import CHA, ModelSpec, apply_link

from conftest import make_game


# -- oracle pieces --------------------------------------------------------------

def random_problem(rng, T=4, t=3, n_games=12):
    xtx = np.zeros((T, t, t))
    for _ in range(n_games):
        p = rng.integers(T)
        h, a = rng.choice(t, 2, replace=False)
        xtx[p, h, h] += 1
        xtx[p, a, a] += 1
        xtx[p, h, a] -= 1
        xtx[p, a, h] -= 1
    w = 1 / 0.3 ** 2
    diag = rng.uniform(2, 5, T)
    off = -rng.uniform(0.5, 1.5, T - 1)
    lin = rng.normal(size=(T, t))
    return xtx, w, diag, off, lin


def dense_precision(xtx, w, diag, off):
    T, t, _ = xtx.shape
    Q = np.zeros((T * t, T * t))
    for p in range(T):
        Q[p * t:(p + 1) * t, p * t:(p + 1) * t] = w * xtx[p] + diag[p] * np.eye(t)
        if p < T - 1:
            Q[p * t:(p + 1) * t, (p + 1) * t:(p + 2) * t] = off[p] * np.eye(t)
            Q[(p + 1) * t:(p + 2) * t, p * t:(p + 1) * t] = off[p] * np.eye(t)
    return Q


def test_joint_kernel_matches_dense_cholesky(rng):
    # [DERIVED] mean Q^-1 b plus L^-T z with L the dense Cholesky factor of Q
    xtx, w, diag, off, lin = random_problem(rng)
    z = rng.normal(size=lin.shape)
    theta = np.zeros_like(lin)
    assert _kernels.draw_theta_joint(xtx, w, diag, off, lin, z, theta)
    Q = dense_precision(xtx, w, diag, off)
    L = np.linalg.cholesky(Q)
    expected = np.linalg.solve(Q, lin.ravel()) + linalg.solve_triangular(L.T, z.ravel(), lower=False)
    np.testing.assert_allclose(theta.ravel(), expected, rtol=1e-10, atol=1e-12)


def test_blockwise_equals_joint_for_one_period(rng):
    xtx, w, diag, off, lin = random_problem(rng, T=1)
    z = rng.normal(size=lin.shape)
    a, b = np.zeros_like(lin), np.zeros_like(lin)
    _kernels.draw_theta_joint(xtx, w, diag, off, lin, z, a)
    _kernels.draw_theta_blockwise(xtx, w, diag, off, lin, z, b)
    np.testing.assert_allclose(a, b, rtol=1e-12)


def test_blockwise_gibbs_targets_joint_distribution(rng):
    xtx, w, diag, off, lin = random_problem(rng, T=3, t=2, n_games=6)
    Q = dense_precision(xtx, w, diag, off)
    mean = np.linalg.solve(Q, lin.ravel())
    cov = np.linalg.inv(Q)
    theta = np.zeros_like(lin)
    draws = np.empty((20000, lin.size))
    for i in range(len(draws)):
        _kernels.draw_theta_blockwise(xtx, w, diag, off, lin, rng.normal(size=lin.shape), theta)
        draws[i] = theta.ravel()
    sd = np.sqrt(np.diag(cov))
    assert np.all(np.abs(draws.mean(axis=0) - mean) < 0.05 * sd + 0.01)
    np.testing.assert_allclose(np.cov(draws.T), cov, atol=0.05 * sd.max() ** 2)


def test_kernel_reports_non_positive_definite(rng):
    xtx, w, _, off, lin = random_problem(rng, T=2, t=2)
    diag = np.array([-10.0, -10.0])
    assert not _kernels.draw_theta_joint(xtx, w, diag, off, lin, np.zeros_like(lin), np.zeros_like(lin))


@pytest.mark.parametrize("mean,sd,lo,hi", [(0.3, 0.2, 0, 1), (2.0, 0.1, 0, 1.5), (-9.0, 0.5, 0, 1),
                                           (12.0, 1.0, 0, 1), (0.5, 10.0, 0, 1)])
def test_truncated_normal_matches_scipy(rng, mean, sd, lo, hi):
    x = np.array([truncated_normal(mean, sd, lo, hi, rng) for _ in range(4000)])
    assert np.all((x >= lo) & (x <= hi))
    a, b = (lo - mean) / sd, (hi - mean) / sd
    if stats.truncnorm.cdf(hi - 1e-9, a, b, loc=mean, scale=sd) > 0.999 and mean < lo - 8 * sd:
        # beyond double precision the oracle itself degenerates to a point mass at the bound
        return
    assert stats.kstest(x, stats.truncnorm(a, b, loc=mean, scale=sd).cdf).statistic < 0.03


def truncated_gamma_cdf(shape, rate, upper):
    g = stats.gamma(shape, scale=1 / rate)
    return lambda x: g.cdf(np.minimum(x, upper)) / g.cdf(upper)


@pytest.mark.parametrize("n,ss", [(40, 8.0), (3, 0.02), (2, 1e-4)])
def test_slice_sampler_recovers_truncated_gamma(rng, n, ss):
    # [DERIVED] the precision full conditional is Gamma(n/2 + 1, ss/2) truncated to (0, 1000)
    logf = precision_logpdf(n, ss, 1000.0)
    u = math.log(0.5 * min(999, (n / 2 + 1) / (ss / 2)))
    kept = []
    for i in range(25000):
        u, _ = slice_sample(logf, u, 1.0, rng, upper=math.log(1000))
        if i >= 500 and i % 5 == 0:
            kept.append(math.exp(u))
    kept = np.array(kept)
    assert kept.max() < 1000
    assert stats.kstest(kept, truncated_gamma_cdf(n / 2 + 1, ss / 2, 1000.0)).statistic < 0.03


def test_precision_logpdf_support():
    logf = precision_logpdf(10, 1.0, 1000.0)
    assert logf(math.log(1000)) == -math.inf
    assert logf(0.0) == pytest.approx(-0.5)


# -- configuration ----------------------------------------------------------------

def test_sampler_defaults():
    c = SamplerConfig()
    assert (c.chains, c.iterations, c.burn_in, c.thin) == (3, 40000, 4000, 5)
    assert c.chains * c.draws_per_chain == 21600
    assert SamplerConfig(chains=2, iterations=24000, burn_in=4000, thin=5).draws_per_chain * 2 == 8000


@pytest.mark.parametrize("kw", [{"chains": 0}, {"thin": 0}, {"burn_in": 10, "iterations": 10},
                                {"theta_update": "ffbs"}, {"fixed": {"nope": 1}}])
def test_sampler_config_validation(kw):
    with pytest.raises(ValueError):
        SamplerConfig(**kw)


def test_sampler_config_round_trip():
    c = SamplerConfig(chains=2, iterations=50, burn_in=10, fixed={"sigma_game": 0.2})
    assert SamplerConfig.from_dict(c.to_dict()) == c


def test_substreams_are_distinct_and_reproducible():
    a = substream(1, "chain", 0).random(3)
    assert np.array_equal(a, substream(1, "chain", 0).random(3))
    assert not np.array_equal(a, substream(1, "chain", 1).random(3))
    assert not np.array_equal(a, substream(2, "chain", 0).random(3))


# -- fits ----------------------------------------------------------------------------

def test_fit_shapes_and_labels(small_fit, small_league):
    league, _ = small_league
    cfg = league.config
    assert len(small_fit) == 2 * 200
    assert small_fit.theta.shape == (400, cfg.S * cfg.K, cfg.t)
    assert small_fit.alpha.shape == (400, cfg.t_star)
    assert list(np.unique(small_fit.chain)) == [1, 2]
    assert small_fit.iteration[:3].tolist() == [201, 203, 205]
    assert small_fit.meta["team_names"] == league.team_names
    assert small_fit.meta["weeks_with_games"]["1"] == list(range(1, cfg.K + 1))


def test_fit_draws_respect_support_and_centering(small_fit):
    s = small_fit.scalars
    assert np.all((s["gamma_season"] >= 0) & (s["gamma_season"] <= 1))
    assert np.all((s["gamma_week"] >= 0) & (s["gamma_week"] <= 1.5))
    for name in ("sigma_game", "sigma_season", "sigma_week", "sigma_alpha"):
        tau2 = 1 / s[name] ** 2
        assert np.all((tau2 > 0) & (tau2 < 1000))
    assert np.abs(small_fit.theta.sum(axis=2)).max() < 1e-9
    assert np.abs(small_fit.alpha.sum(axis=1)).max() < 1e-9


def test_cha_fit_has_no_city_effects(small_fit_cha):
    assert np.all(small_fit_cha.alpha == 0)
    assert np.all(np.isnan(small_fit_cha.scalars["sigma_alpha"]))


def test_fit_is_deterministic(small_league):
    league, _ = small_league
    spec = ModelSpec(league.config)
    cfg = SamplerConfig(chains=2, iterations=60, burn_in=20, seed=9)
    a, b = fit(league, spec, cfg), fit(league, spec, cfg)
    assert np.array_equal(a.theta, b.theta)
    assert all(np.array_equal(a.scalars[k], b.scalars[k], equal_nan=True) for k in a.scalars)
    c = fit(league, spec, SamplerConfig(chains=2, iterations=60, burn_in=20, seed=10))
    assert not np.array_equal(a.theta, c.theta)


def test_fit_parallel_chains_match_serial(small_league, monkeypatch):
    league, _ = small_league
    spec = ModelSpec(league.config)
    cfg = SamplerConfig(chains=2, iterations=40, burn_in=10, seed=4)
    serial = fit(league, spec, cfg)
    monkeypatch.setenv("PARITY_ENGINE_THREADS", "2")
    parallel = fit(league, spec, cfg)
    assert np.array_equal(serial.theta, parallel.theta)
    assert np.array_equal(serial.scalars["sigma_game"], parallel.scalars["sigma_game"])


def test_blockwise_and_joint_agree_in_distribution(small_league):
    league, _ = small_league
    spec = ModelSpec(league.config, CHA)
    fixed = {"sigma_game": 0.2, "sigma_season": 0.3, "sigma_week": 0.1, "gamma_week": 0.95,
             "gamma_season": 0.6, "alpha0": 0.25}
    runs = [fit(league, spec, SamplerConfig(chains=1, iterations=3000, burn_in=200, thin=2, seed=3,
                                            fixed=fixed, theta_update=u))
            for u in ("joint", "blockwise")]
    m = [r.theta.mean(axis=0) for r in runs]
    sd = runs[0].theta.std(axis=0)
    assert np.max(np.abs(m[0] - m[1]) / sd) < 0.5


def test_two_team_posterior_mean_conjugate(two_team_config):
    # [DERIVED] conjugate Gaussian: prior d ~ N(0, 2 s^2), n games y ~ N(d + a0, g^2)
    p = 0.7
    games = [make_game(p=p, game_id=i) for i in range(30)]
    spec = ModelSpec(two_team_config, CHA)
    fixed = {"sigma_game": 0.3, "sigma_season": 0.5, "alpha0": 0.0}
    draws = fit(games, spec, SamplerConfig(chains=1, iterations=3000, burn_in=100, seed=1, fixed=fixed))
    d = draws.theta[:, 0, 0] - draws.theta[:, 0, 1]
    prec = 1 / (2 * 0.25) + 30 / 0.09
    mean = 30 * apply_link(p) / 0.09 / prec
    assert abs(d.mean() - apply_link(p)) < 2 / math.sqrt(prec)
    assert abs(d.mean() - mean) < 4 / math.sqrt(prec * len(d))
    assert d.std() == pytest.approx(1 / math.sqrt(prec), rel=0.1)


def test_zero_game_fit_recovers_alpha0_prior(two_team_config):
    draws = fit([], ModelSpec(two_team_config, CHA), SamplerConfig(chains=2, iterations=4000, burn_in=100,
                                                                    thin=1, seed=2))
    a0 = draws.scalars["alpha0"]
    assert abs(a0.mean()) < 3 * 100 / math.sqrt(len(a0))  # prior draws are independent here
    assert a0.std() == pytest.approx(100, rel=0.1)


def test_fit_dimension_mismatch(two_team_config):
    with pytest.raises(DimensionMismatch):
        fit([make_game(home=1, away=3)], ModelSpec(two_team_config), SamplerConfig(iterations=5, burn_in=1))
    with pytest.raises(DimensionMismatch):
        fit([], ModelSpec(two_team_config),
            SamplerConfig(iterations=5, burn_in=1, fixed={"theta": np.zeros((2, 2))}))


def test_games_without_probability_are_skipped(two_team_config):
    games = [make_game(p=0.6), make_game(p=None, game_id=2)]
    draws = fit(games, ModelSpec(two_team_config, CHA), SamplerConfig(chains=1, iterations=20, burn_in=5))
    assert draws.meta["n_games_fitted"] == 1


def test_fixed_parameters_never_move(small_league):
    league, _ = small_league
    draws = fit(league, ModelSpec(league.config), SamplerConfig(chains=1, iterations=30, burn_in=5,
                                                                fixed={"sigma_game": 0.2, "gamma_week": 1.0}))
    assert np.all(draws.scalars["sigma_game"] == 0.2)
    assert np.all(draws.scalars["gamma_week"] == 1.0)
