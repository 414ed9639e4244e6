"""Flat ``key = value`` run configuration.

Recognised keys (``#`` starts a comment)::

    theorem     1 or 2 (optional for verify-t1 / verify-t2, which imply it)
    dim         1 or 2                      (default 1)
    extent      box side length(s)          (default 1.0)
    nodes       nodes per axis              (default 17)
    gamma alpha beta epsilon                (defaults 1, 1, 1, 1e-3)
    f           zero | constant:C | manufactured[:AMP] | file:PATH
    init        constant:C | cosine:K:AMP | file:PATH   (default constant:0)
    seed        sampling seed               (default 0)
    samples_min samples for the penalized-minimum check (default 500)
    samples_max samples for the local-maximum check     (default 200)
    tol max_iter                            Newton settings (1e-10, 100)
    eps_list    comma-separated, strictly decreasing (sweep only)
    out         output file path

The boundary regime follows the theorem: Neumann for 1, Dirichlet for 2.
Relative file paths are resolved against the config file's directory.
``manufactured`` picks ``u* = AMP prod sin(pi x_i / L_i)`` and the source that
makes it an exact discrete critical point.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .fieldio import read_field
from .grid import DIRICHLET, NEUMANN, GridSpec, ScalarField
from .pipeline import Settings
from .primal import GLParams, manufactured_source

_SECTION = "run"
KNOWN_KEYS = {
    "theorem", "dim", "extent", "nodes", "gamma", "alpha", "beta", "epsilon", "f", "init", "seed",
    "samples_min", "samples_max", "tol", "max_iter", "eps_list", "out",
}


@dataclass
class RunConfig:
    theorem: int = None
    dim: int = 1
    extent: float = 1.0
    nodes: int = 17
    gamma: float = 1.0
    alpha: float = 1.0
    beta: float = 1.0
    epsilon: float = 1e-3
    f: str = "zero"
    init: str = "constant:0"
    seed: int = 0
    samples_min: int = 500
    samples_max: int = 200
    tol: float = 1e-10
    max_iter: int = 100
    eps_list: list = field(default_factory=list)
    out: str = None
    base_dir: Path = field(default_factory=Path.cwd)

    def settings(self):
        return Settings(self.seed, self.samples_min, self.samples_max, self.tol, self.max_iter)

    def describe(self):
        return {
            "theorem": self.theorem,
            "grid": self.grid().describe(),
            "gamma": self.gamma,
            "alpha": self.alpha,
            "beta": self.beta,
            "epsilon": self.epsilon,
            "f": self.f,
            "init": self.init,
            "seed": self.seed,
        }

    def grid(self):
        if self.theorem not in (1, 2):
            raise ConfigError("theorem must be 1 or 2")
        boundary = NEUMANN if self.theorem == 1 else DIRICHLET
        try:
            return GridSpec(self.dim, (self.extent,), (self.nodes,), boundary)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def _path(self, spec):
        path = Path(spec)
        return path if path.is_absolute() else self.base_dir / path

    def _load(self, spec, grid):
        fld = read_field(self._path(spec))
        if fld.grid != grid:
            raise ConfigError(f"field file {spec} is on {fld.grid}, expected {grid}")
        return fld

    def _manufactured(self, grid, amp):
        def shape(*xs):
            out = np.full_like(xs[0], amp)
            for x, ext in zip(xs, grid.extent):
                out = out * np.sin(np.pi * x / ext)
            return out

        return ScalarField.from_function(grid, shape)

    def source(self, grid):
        kind, _, arg = self.f.partition(":")
        if self.theorem == 1:
            if kind != "zero":
                raise ConfigError("theorem 1 has no source term; use f = zero")
            return None
        if kind == "zero":
            return ScalarField.zeros(grid)
        if kind == "constant":
            return ScalarField.constant(grid, _float(arg, "f constant")).restrict()
        if kind == "manufactured":
            amp = _float(arg, "f amplitude") if arg else 1.0
            return manufactured_source(grid, self.gamma, self.alpha, self.beta, self._manufactured(grid, amp))
        if kind == "file":
            return self._load(arg, grid).restrict()
        raise ConfigError(f"unknown f spec {self.f!r}")

    def params(self):
        grid = self.grid()
        try:
            return GLParams(grid, self.gamma, self.alpha, self.beta, self.epsilon, self.source(grid))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def initial_guess(self, grid):
        kind, _, arg = self.init.partition(":")
        if kind == "constant":
            return ScalarField.constant(grid, _float(arg, "init constant")).restrict()
        if kind == "cosine":
            k, _, amp = arg.partition(":")
            k, amp = _float(k, "init wavenumber"), _float(amp or "1", "init amplitude")
            xs = grid.coordinates()
            vals = amp * np.prod([np.cos(k * np.pi * x / e) for x, e in zip(xs, grid.extent)], axis=0)
            return ScalarField(grid, vals).restrict()
        if kind == "file":
            return self._load(arg, grid).restrict()
        raise ConfigError(f"unknown init spec {self.init!r}")


def _float(text, what):
    try:
        return float(text)
    except ValueError as exc:
        raise ConfigError(f"{what}: cannot parse {text!r}") from exc


def _int(text, what):
    try:
        return int(text)
    except ValueError as exc:
        raise ConfigError(f"{what}: cannot parse {text!r}") from exc


def parse_config(text, base_dir=None) -> RunConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None)
    try:
        parser.read_string(f"[{_SECTION}]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    raw = dict(parser[_SECTION])
    unknown = sorted(set(raw) - KNOWN_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    cfg = RunConfig(base_dir=Path(base_dir) if base_dir else Path.cwd())
    for key, val in raw.items():
        if key in ("theorem", "dim", "nodes", "seed", "samples_min", "samples_max", "max_iter"):
            setattr(cfg, key, _int(val, key))
        elif key in ("extent", "gamma", "alpha", "beta", "epsilon", "tol"):
            setattr(cfg, key, _float(val, key))
        elif key == "eps_list":
            cfg.eps_list = [_float(e, key) for e in val.split(",") if e.strip()]
        else:
            setattr(cfg, key, val.strip() or None)
    if cfg.theorem is not None and cfg.theorem not in (1, 2):
        raise ConfigError("theorem must be 1 or 2")
    for key in ("samples_min", "samples_max", "max_iter"):
        if getattr(cfg, key) < 0:
            raise ConfigError(f"{key} must be non-negative")
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, base_dir=path.parent)
