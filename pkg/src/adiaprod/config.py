"""Run configuration: flat INI-style key/value files, one scenario per run.

Sections: [scenario] (kind plus its coefficient expressions), [grid]
(tau, steps), [method] (name, order, substeps), optional [tolerances] and
[output]. Expressions use the language in exprparse; complex coefficients
are given as _re/_im expression pairs.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import exprparse
from .errors import ConfigError

KINDS = ("generic2", "oscillator", "stark", "generic-matrix-tabulated")
METHODS = ("oracle", "adiabatic", "modified", "exact-class", "dyson")


@dataclass
class CompiledExpr:
    source: str
    ast: exprparse.Expr

    def __call__(self, ts):
        return exprparse.evaluate(self.ast, ts)

    def derivative(self) -> "CompiledExpr":
        d = exprparse.derivative(self.ast)
        return CompiledExpr(exprparse.to_source(d), d)


def compile_expr(src: str, where: str) -> CompiledExpr:
    try:
        return CompiledExpr(src, exprparse.parse(src))
    except exprparse.ExprSyntaxError as exc:
        raise ConfigError(f"bad expression for {where}: {exc}") from None


@dataclass
class RunConfig:
    kind: str
    tau: float
    steps: int
    method: str
    order: int
    substeps: int
    scenario: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    propagator_path: Path | None = None
    comparison_path: Path | None = None
    figure_dir: Path | None = None
    seed: int | None = None

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise ConfigError(f"unknown scenario kind {self.kind!r}")
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}")
        if self.tau <= 0:
            raise ConfigError("tau must be positive")
        if self.steps < 3:
            raise ConfigError("steps must be at least 3")
        if self.method == "dyson" and self.kind != "oscillator":
            raise ConfigError("dyson is only available for oscillator scenarios")
        if self.method == "modified" and self.kind not in ("oscillator", "generic2"):
            raise ConfigError("modified expansion needs a two-level scenario")
        if self.method == "exact-class" and self.kind not in ("generic2", "stark"):
            raise ConfigError("exact-class needs a generic2 or stark scenario")
        if self.order < 0:
            raise ConfigError("order must be nonnegative")


def _parse_method(raw: str) -> tuple[str, int | None]:
    # accept "adiabatic", "adiabatic:2", "dyson:3" ...
    name, _, suffix = raw.partition(":")
    if suffix:
        try:
            return name.strip(), int(suffix)
        except ValueError:
            raise ConfigError(f"bad method order in {raw!r}") from None
    return name.strip(), None


def load_config(path: str | Path, overrides: dict | None = None) -> RunConfig:
    """Parse and validate a config file; overrides come from CLI flags."""
    overrides = overrides or {}
    parser = configparser.ConfigParser(interpolation=None)
    read = parser.read(str(path))
    if not read:
        raise ConfigError(f"cannot read config file {path}")
    if "scenario" not in parser:
        raise ConfigError("missing [scenario] section")

    scen = dict(parser["scenario"])
    kind = scen.pop("kind", None)
    if kind is None:
        raise ConfigError("[scenario] needs a 'kind' key")

    grid = parser["grid"] if "grid" in parser else {}
    method_sec = parser["method"] if "method" in parser else {}
    tol = {k: float(v) for k, v in parser["tolerances"].items()} \
        if "tolerances" in parser else {}
    out = parser["output"] if "output" in parser else {}

    raw_method = overrides.get("method") or method_sec.get("name", "oracle")
    method, order_from_method = _parse_method(raw_method)
    order = order_from_method
    if order is None:
        order = int(method_sec.get("order", 2))

    try:
        tau = float(grid.get("tau", scen.pop("tau", 1.0)))
        steps = int(overrides.get("steps") or grid.get("steps", 2000))
        substeps = int(method_sec.get("substeps", 4))
    except ValueError as exc:
        raise ConfigError(f"bad numeric value in config: {exc}") from None

    seed = overrides.get("seed")
    if seed is None and "seed" in scen:
        try:
            seed = int(scen.pop("seed"))
        except ValueError:
            raise ConfigError("seed must be an integer") from None
    else:
        scen.pop("seed", None)

    cfg = RunConfig(
        kind=kind.strip(),
        tau=tau,
        steps=steps,
        method=method,
        order=order,
        substeps=substeps,
        scenario=scen,
        tolerances=tol,
        propagator_path=Path(overrides.get("out") or out.get("propagator", "propagator.csv")),
        comparison_path=Path(out["comparison"]) if "comparison" in out else None,
        figure_dir=Path(out["figures"]) if "figures" in out else None,
        seed=seed,
    )
    cfg.validate()
    if cfg.comparison_path is None and cfg.method != "oracle":
        p = cfg.propagator_path
        cfg.comparison_path = p.with_name(p.stem + ".vs-oracle.csv")
    return cfg


# ---- scenario builders ----------------------------------------------------

def scenario_expr(cfg: RunConfig, key: str, default: str | None = None) -> CompiledExpr:
    src = cfg.scenario.get(key, default)
    if src is None:
        raise ConfigError(f"[scenario] needs key {key!r}")
    return compile_expr(src, key)


def scenario_float(cfg: RunConfig, key: str, default: float | None = None) -> float:
    raw = cfg.scenario.get(key)
    if raw is None:
        if default is None:
            raise ConfigError(f"[scenario] needs key {key!r}")
        return default
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"[scenario] key {key!r} must be a number") from None


def complex_profile(cfg: RunConfig, name: str):
    """(value, derivative) callables for a complex coefficient given as
    name_re / name_im expression pairs (imaginary part optional)."""
    re = scenario_expr(cfg, f"{name}_re", cfg.scenario.get(name, None) or "0")
    im_src = cfg.scenario.get(f"{name}_im", "0")
    im = compile_expr(im_src, f"{name}_im")
    dre, dim = re.derivative(), im.derivative()

    def value(ts):
        ts = np.asarray(ts, dtype=float)
        return re(ts) + 1j * im(ts)

    def deriv(ts):
        ts = np.asarray(ts, dtype=float)
        return dre(ts) + 1j * dim(ts)

    return value, deriv
