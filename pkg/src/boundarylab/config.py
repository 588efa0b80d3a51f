"""Line-oriented experiment configuration.

The config grammar is one dotted ``key = value`` assignment per line,
with ``#`` comments and blank lines ignored:

    experiment = hitting
    domain.kind = unit-disk
    kappa.family = constant
    kappa.value = 1.0
    sim.seed = 42
    sim.dt = 1e-4
    sim.n_paths = 100000
    hitting.x0 = 0.5 0.0

Values are parsed as int, float, a whitespace/comma separated list of
numbers, booleans, or kept as strings.  Command-line overrides use the
same ``key=value`` syntax.  The seed is mandatory: no experiment ever
falls back to wall-clock entropy.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Callable, Dict, List

import numpy as np

from .conductivity import ConductivityField, make_field
from .geometry import Domain, make_domain

__all__ = ["ExperimentConfig", "parse_config_text", "parse_boundary_function",
           "ConfigError", "EXPERIMENTS"]

EXPERIMENTS = [
    "hitting",
    "feynman-dirichlet",
    "feynman-neumann",
    "revuz",
    "cauchy-kernel",
    "generator",
    "spectral",
    "levy-identity",
    "excursion-rate",
    "discriminate",
    "dtn-reference",
    "scaling",
]

# blocks that must be present per experiment (beyond the always-required
# experiment name); sim.seed is checked whenever a sim block is required
_REQUIRED = {
    "hitting": ["domain.kind", "kappa.family", "sim.seed", "sim.dt", "sim.n_paths"],
    "feynman-dirichlet": ["domain.kind", "kappa.family", "sim.seed", "sim.dt", "sim.n_paths"],
    "feynman-neumann": ["domain.kind", "kappa.family", "sim.seed", "sim.dt", "sim.n_paths",
                        "sim.horizon"],
    "revuz": ["domain.kind", "kappa.family", "sim.seed", "sim.dt", "sim.n_paths"],
    "cauchy-kernel": ["domain.kind", "kappa.family", "sim.seed", "sim.dt", "sim.n_paths"],
    "generator": ["domain.kind", "kappa.family", "sim.seed", "sim.dt", "sim.n_paths"],
    "spectral": ["domain.kind", "kappa.family", "sim.seed", "sim.dt", "sim.n_paths"],
    "levy-identity": ["domain.kind", "kappa.family", "sim.seed", "sim.dt", "sim.n_paths"],
    "excursion-rate": ["domain.kind", "kappa.family", "sim.seed", "sim.dt", "sim.n_paths"],
    "discriminate": ["domain.kind", "kappa.family", "kappa2.family", "sim.seed", "sim.dt",
                     "sim.n_paths"],
    "dtn-reference": ["kappa.family", "ref.n_max"],
    "scaling": ["domain.kind", "kappa.family", "sim.seed", "sim.dt"],
}


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key."""


def _parse_value(raw: str):
    raw = raw.strip()
    low = raw.lower()
    if low in ("true", "false"):
        return low == "true"
    parts = raw.replace(",", " ").split()
    if len(parts) > 1:
        try:
            return [_parse_scalar(p) for p in parts]
        except ValueError:
            return raw
    try:
        return _parse_scalar(raw)
    except ValueError:
        return raw


def _parse_scalar(tok: str):
    try:
        return int(tok)
    except ValueError:
        return float(tok)


def parse_config_text(text: str) -> Dict[str, object]:
    values: Dict[str, object] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = stripped.split("=", 1)
        values[key.strip()] = _parse_value(raw)
    return values


def parse_boundary_function(spec, period: float = 2.0 * np.pi) -> Callable:
    """Named boundary data: 'one', 'cos:n', 'sin:n', 'indicator:lo:hi',
    'faces:right-left' (square current pattern), or a constant number."""
    if isinstance(spec, (int, float)):
        c = float(spec)
        return lambda th: np.full_like(np.asarray(th, dtype=float), c)
    name, _, arg = str(spec).partition(":")
    if name == "one":
        return lambda th: np.ones_like(np.asarray(th, dtype=float))
    if name == "zero":
        return lambda th: np.zeros_like(np.asarray(th, dtype=float))
    if name in ("cos", "sin"):
        n = int(arg or 1)
        fn = np.cos if name == "cos" else np.sin
        return lambda th: fn(n * np.asarray(th, dtype=float))
    if name == "indicator":
        lo, hi = (float(v) for v in arg.split(":"))
        return lambda th: (np.mod(np.asarray(th, dtype=float) - lo, period) < (hi - lo)).astype(float)
    raise ConfigError(f"unknown boundary function spec {spec!r}")


@dataclass
class ExperimentConfig:
    """Typed view over the flat key-value config."""

    values: Dict[str, object] = field(default_factory=dict)

    # -- raw access --------------------------------------------------------
    def get(self, key: str, default=None):
        return self.values.get(key, default)

    def require(self, key: str):
        if key not in self.values:
            raise ConfigError(f"missing required key: {key}")
        return self.values[key]

    def override(self, assignments: List[str]) -> "ExperimentConfig":
        vals = dict(self.values)
        for a in assignments:
            if "=" not in a:
                raise ConfigError(f"override must be key=value, got {a!r}")
            k, raw = a.split("=", 1)
            vals[k.strip()] = _parse_value(raw)
        return ExperimentConfig(vals)

    # -- validation ---------------------------------------------------------
    @property
    def experiment(self) -> str:
        return str(self.require("experiment"))

    def validate(self) -> None:
        exp = self.experiment
        if exp not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {exp!r}; see list-experiments")
        for key in _REQUIRED[exp]:
            if key not in self.values:
                raise ConfigError(f"experiment {exp!r} requires key {key}")
        if any(k.startswith("sim.") for k in _REQUIRED[exp]) and "sim.seed" not in self.values:
            raise ConfigError("sim.seed is mandatory (no wall-clock default)")
        # construct the heavyweight objects once to surface bad values early
        if "domain.kind" in self.values:
            self.domain()
        if "kappa.family" in self.values:
            self.field()

    # -- constructed objects ---------------------------------------------------
    def domain(self) -> Domain:
        kind = str(self.get("domain.kind", "unit-disk"))
        coeffs = self.get("domain.rho_coeffs")
        if coeffs is not None and not isinstance(coeffs, list):
            coeffs = [coeffs]
        return make_domain(kind, coeffs)

    def field(self, prefix: str = "kappa") -> ConductivityField:
        fam = str(self.require(f"{prefix}.family"))
        value = self.get(f"{prefix}.value", 1.0)
        coeffs = self.get(f"{prefix}.profile_coeffs")
        if coeffs is not None and not isinstance(coeffs, list):
            coeffs = [coeffs]
        bump = None
        if fam == "bump":
            center = self.get(f"{prefix}.bump_center", [0.0, 0.0])
            bump = {
                "center": tuple(center) if isinstance(center, list) else (float(center), 0.0),
                "width": float(self.get(f"{prefix}.bump_width", 0.5)),
                "height": float(self.get(f"{prefix}.bump_height", 1.0)),
            }
        return make_field(fam, value=value, profile_coeffs=coeffs, bump=bump)

    # -- sim block ------------------------------------------------------------
    @property
    def seed(self) -> int:
        return int(self.require("sim.seed"))

    @property
    def dt(self) -> float:
        return float(self.require("sim.dt"))

    @property
    def n_paths(self) -> int:
        return int(self.require("sim.n_paths"))

    @property
    def c_cal(self):
        v = self.get("sim.c_cal", "auto")
        return None if v == "auto" else float(v)

    def hash(self) -> str:
        lines = sorted(f"{k} = {self.values[k]}" for k in self.values)
        return hashlib.sha256("\n".join(lines).encode()).hexdigest()[:8]
