"""Posterior draw storage and the long-format draws CSV.

The CSV has columns ``chain,iteration,parameter,value`` under a
``#schema=draws/1`` line. A sidecar ``<stem>.json`` records the sampler
configuration, model spec, seed and the team/city index mapping.
"""

import json
import math
import os
import re
from dataclasses import dataclass, field

import numpy as np

from ._csvio import SCHEMA_PREFIX
from .errors import EmptyDraws, ParseError, SchemaVersionError
from .ssm import CHA, IHA, ModelSpec, ParameterState

DRAWS_SCHEMA = "draws/1"
SCALARS = ("alpha0", "sigma_game", "sigma_season", "sigma_week", "sigma_alpha",
           "gamma_season", "gamma_week")
_THETA = re.compile(r"^theta\[(\d+),(\d+),(\d+)\]$")
_ALPHA = re.compile(r"^alpha\[(\d+)\]$")


@dataclass(eq=False)
class PosteriorDraws:
    """Retained draws of one fit, stored column-wise.

    ``theta`` is ``(n, S*K, t)``, ``alpha`` is ``(n, t_star)`` and every
    scalar parameter is an ``(n,)`` array in ``scalars``. ``chain`` and
    ``iteration`` tag each draw.
    """

    spec: ModelSpec
    theta: np.ndarray
    alpha: np.ndarray
    scalars: dict
    chain: np.ndarray
    iteration: np.ndarray
    config: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.chain)

    def __iter__(self):
        for i in range(len(self)):
            yield self.state(i)

    def __getitem__(self, i):
        return self.state(i)

    def state(self, i):
        s = {k: float(v[i]) for k, v in self.scalars.items()}
        return ParameterState(theta=self.theta[i], alpha=self.alpha[i], **s)

    @property
    def sampler_config(self):
        """The run settings as a :class:`SamplerConfig` (``config`` holds its dict form)."""
        from .sampler import SamplerConfig
        return SamplerConfig.from_dict(self.config)

    @property
    def n_chains(self):
        return len(np.unique(self.chain))

    def require_nonempty(self):
        if len(self) == 0:
            raise EmptyDraws("no posterior draws")

    def by_chain(self, values):
        """Reshape a per-draw array to ``(chains, draws_per_chain, ...)``."""
        chains = np.unique(self.chain)
        parts = [values[self.chain == c] for c in chains]
        n = min(len(p) for p in parts)
        return np.stack([p[:n] for p in parts])

    def parameter_names(self):
        cfg = self.spec.league_config
        names = [f"theta[{s},{k},{i}]" for s in range(1, cfg.S + 1)
                 for k in range(1, cfg.K + 1) for i in range(1, cfg.t + 1)]
        names.append("alpha0")
        if self.spec.variant == IHA:
            names += [f"alpha[{c}]" for c in range(1, cfg.t_star + 1)]
        names += [s for s in SCALARS[1:] if not (s == "sigma_alpha" and self.spec.variant == CHA)]
        return names

    def values(self, name):
        """Per-draw values of one named scalar parameter."""
        m = _THETA.match(name)
        if m:
            s, k, i = map(int, m.groups())
            return self.theta[:, (s - 1) * self.spec.league_config.K + k - 1, i - 1]
        m = _ALPHA.match(name)
        if m:
            return self.alpha[:, int(m.group(1)) - 1]
        if name in self.scalars:
            return self.scalars[name]
        raise KeyError(name)

    def mean_state(self):
        """Per-scalar posterior means, re-centred."""
        self.require_nonempty()
        s = {k: float(np.mean(v)) for k, v in self.scalars.items()}
        return ParameterState(theta=self.theta.mean(axis=0), alpha=self.alpha.mean(axis=0),
                              **s).centered()

    def subset(self, mask):
        if not isinstance(mask, slice):
            mask = np.asarray(mask)
        return PosteriorDraws(spec=self.spec, theta=self.theta[mask], alpha=self.alpha[mask],
                              scalars={k: v[mask] for k, v in self.scalars.items()},
                              chain=self.chain[mask], iteration=self.iteration[mask],
                              config=dict(self.config), meta=dict(self.meta))

    def home_city(self, team, season):
        """1-based home city of ``team`` in ``season`` (its own index if unknown)."""
        table = self.meta.get("home_city")
        if table:
            c = table[season - 1][team - 1]
            if c:
                return c
        return min(team, self.spec.league_config.t_star)


def empty_draws(spec, config=None, meta=None):
    cfg = spec.league_config
    return PosteriorDraws(spec=spec, theta=np.zeros((0, cfg.S * cfg.K, cfg.t)),
                          alpha=np.zeros((0, cfg.t_star)),
                          scalars={k: np.zeros(0) for k in SCALARS},
                          chain=np.zeros(0, dtype=np.int64), iteration=np.zeros(0, dtype=np.int64),
                          config=dict(config or {}), meta=dict(meta or {}))


def sidecar_path(path):
    stem, _ = os.path.splitext(path)
    return stem + ".json"


def export_draws(draws, path):
    """Write draws to ``path`` and the JSON sidecar next to it."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    names = [f'"{n}"' if "," in n else n for n in draws.parameter_names()]
    cfg = draws.spec.league_config
    T = cfg.S * cfg.K
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"{SCHEMA_PREFIX}{DRAWS_SCHEMA}\n")
        fh.write("chain,iteration,parameter,value\n")
        for d in range(len(draws)):
            values = [draws.theta[d].reshape(T * cfg.t), np.array([draws.scalars["alpha0"][d]])]
            if draws.spec.variant == IHA:
                values.append(draws.alpha[d])
            values.append(np.array([draws.scalars[s][d] for s in SCALARS[1:]
                                    if not (s == "sigma_alpha" and draws.spec.variant == CHA)]))
            flat = np.concatenate(values)
            prefix = f"{int(draws.chain[d])},{int(draws.iteration[d])},"
            fh.write("".join(f"{prefix}{n},{float(v)!r}\n" for n, v in zip(names, flat)))
    sidecar = {"schema": DRAWS_SCHEMA, "model": draws.spec.to_dict(), "config": draws.config,
               "meta": draws.meta}
    with open(sidecar_path(path), "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")


def import_draws(path):
    """Inverse of :func:`export_draws`."""
    try:
        with open(sidecar_path(path), encoding="utf-8") as fh:
            side = json.load(fh)
    except FileNotFoundError:
        raise ParseError(f"missing sidecar {sidecar_path(path)}") from None
    except json.JSONDecodeError as exc:
        raise ParseError(f"bad sidecar JSON: {exc}") from None
    if side.get("schema") != DRAWS_SCHEMA:
        raise SchemaVersionError(f"unsupported draws schema {side.get('schema')!r}")
    spec = ModelSpec.from_dict(side["model"])
    cfg = spec.league_config
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != f"{SCHEMA_PREFIX}{DRAWS_SCHEMA}":
        raise SchemaVersionError(f"{path}: expected first line {SCHEMA_PREFIX}{DRAWS_SCHEMA}")
    if len(lines) < 2 or lines[1] != "chain,iteration,parameter,value":
        raise ParseError("bad header; expected chain,iteration,parameter,value", 0)

    order, rows = [], {}
    for r, line in enumerate(lines[2:], start=1):
        if not line:
            continue
        parts = line.split(",")
        # theta[s,k,i] contains commas: re-join the middle fields, dropping CSV quotes
        if len(parts) < 4:
            raise ParseError("expected 4 fields", r)
        try:
            key = (int(parts[0]), int(parts[1]))
            value = float(parts[-1])
        except ValueError:
            raise ParseError("non-numeric chain, iteration or value", r) from None
        name = ",".join(parts[2:-1]).strip('"')
        if key not in rows:
            rows[key] = {}
            order.append(key)
        rows[key][name] = value

    n = len(order)
    out = empty_draws(spec, side.get("config"), side.get("meta"))
    if n == 0:
        return out
    theta = np.zeros((n, cfg.S * cfg.K, cfg.t))
    alpha = np.zeros((n, cfg.t_star))
    scalars = {k: np.full(n, math.nan) for k in SCALARS}
    for d, key in enumerate(order):
        for name, value in rows[key].items():
            m = _THETA.match(name)
            if m:
                s, k, i = map(int, m.groups())
                if not (1 <= s <= cfg.S and 1 <= k <= cfg.K and 1 <= i <= cfg.t):
                    raise SchemaVersionError(f"parameter {name} outside model dimensions")
                theta[d, (s - 1) * cfg.K + k - 1, i - 1] = value
                continue
            m = _ALPHA.match(name)
            if m and 1 <= int(m.group(1)) <= cfg.t_star:
                alpha[d, int(m.group(1)) - 1] = value
                continue
            if name in scalars:
                scalars[name][d] = value
                continue
            raise SchemaVersionError(f"unknown parameter name {name!r}")
    out.theta, out.alpha, out.scalars = theta, alpha, scalars
    out.chain = np.array([k[0] for k in order], dtype=np.int64)
    out.iteration = np.array([k[1] for k in order], dtype=np.int64)
    return out
