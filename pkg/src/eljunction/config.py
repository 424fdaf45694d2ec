"""Run configuration: a strict TOML file with one table per concern.

Every key is optional; an empty file reproduces the default study (N=2,
W in {1, 10}, 100 realizations at the resonant drive). Unknown keys are
errors, reported with their full dotted path.
"""
from __future__ import annotations

import dataclasses
import sys
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .classical import omega0
from .errors import ValidationError
from .floquet import PropagatorSettings
from .graph import DEFAULT_CUTOFF
from .model import ModelParams
from .spectral import PER_CONFIGURATION, PER_STATE

OMEGA_SHORTCUT = "2*Omega0"

ANNOTATED_EXAMPLE = """\
# eljunction run configuration (TOML). Every key is optional.

[model]
L = 12                 # sites, must equal 2*M
M = 6                  # sites per domain; disorder acts on sites 1..M
N = 2                  # particle number, or a list such as [1, 2, 3]
h = 1.0                # quasiperiodic potential amplitude (units of g0)
g0 = 1.0               # static hopping, the energy unit
g1 = 0.9               # drive amplitude on the ergodic-side bonds
U = 3.5                # on-site interaction
omega = "2*Omega0"     # drive frequency, a number or the resonance shortcut
W = [1.0, 10.0]        # disorder strength, a number or a list

[propagator]
K = 256                # midpoint steps per period (even, >= 8)
unitarity_tol = 1e-10
convergence_tol = 1e-3 # state-evolution step-doubling check

[ensemble]
realizations = 100
base_seed = 20190501   # seed_i = blake2b(base_seed, i), 64 bits
workers = 0            # 0 = available parallelism (env ELJUNCTION_WORKERS overrides)

[analysis]
pr = true
rstats = true
graph = true
classical = true
spectroscopy = true
jw = true
cutoff = 1e-2          # graph edge threshold on |H_eff|
pr_mode = "per-configuration"   # or "per-state"
r_bins = 20

[classical]
omega_range = [0.5, 6.0]
g1_range = [0.0, 1.0]
n_omega = 300
n_g1 = 200
orbits = 12            # Poincare orbits started along k = 0
n_periods = 300

[spectroscopy]
Q = 700
noise_sigma = 0.0
threshold = 1e-3       # peak threshold relative to the largest peak
realizations = 1       # realizations per W that run the protocol (N = 1)

[output]
out = "out"
"""


@dataclass(frozen=True)
class EnsembleSettings:
    realizations: int = 100
    base_seed: int = 20190501
    workers: int = 0


@dataclass(frozen=True)
class AnalysisToggles:
    pr: bool = True
    rstats: bool = True
    graph: bool = True
    classical: bool = True
    spectroscopy: bool = True
    jw: bool = True
    cutoff: float = DEFAULT_CUTOFF
    pr_mode: str = PER_CONFIGURATION
    r_bins: int = 20


@dataclass(frozen=True)
class ClassicalSettings:
    omega_range: tuple = (0.5, 6.0)
    g1_range: tuple = (0.0, 1.0)
    n_omega: int = 300
    n_g1: int = 200
    orbits: int = 12
    n_periods: int = 300


@dataclass(frozen=True)
class SpectroscopySettings:
    Q: int = 700
    noise_sigma: float = 0.0
    threshold: float = 1e-3
    realizations: int = 1


@dataclass(frozen=True)
class RunConfig:
    model: ModelParams = field(default_factory=ModelParams)
    N_values: tuple = (2,)
    W_values: tuple = (1.0, 10.0)
    propagator: PropagatorSettings = field(default_factory=PropagatorSettings)
    ensemble: EnsembleSettings = field(default_factory=EnsembleSettings)
    analysis: AnalysisToggles = field(default_factory=AnalysisToggles)
    classical: ClassicalSettings = field(default_factory=ClassicalSettings)
    spectroscopy: SpectroscopySettings = field(default_factory=SpectroscopySettings)
    out: str = "out"

    def params(self, N: int, W: float) -> ModelParams:
        return self.model.replace(N=int(N), W=float(W))

    def combinations(self):
        return [(int(N), float(W)) for N in self.N_values for W in self.W_values]

    def to_dict(self) -> dict:
        """Fully resolved values, JSON-friendly."""
        d = {
            "model": dataclasses.asdict(self.model),
            "propagator": dataclasses.asdict(self.propagator),
            "ensemble": dataclasses.asdict(self.ensemble),
            "analysis": dataclasses.asdict(self.analysis),
            "classical": {k: list(v) if isinstance(v, tuple) else v for k, v in dataclasses.asdict(self.classical).items()},
            "spectroscopy": dataclasses.asdict(self.spectroscopy),
            "output": {"out": self.out},
        }
        d["model"]["N"] = list(self.N_values)
        d["model"]["W"] = list(self.W_values)
        return d

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)


_MODEL_KEYS = {"L", "M", "N", "h", "g0", "g1", "U", "omega", "W"}


def _check_keys(table: dict, allowed, path: str):
    for key in table:
        if key not in allowed:
            where = f"{path}.{key}" if path else key
            raise ValidationError(where, f"unknown key (allowed: {', '.join(sorted(allowed))})")


def _number(value, path, integer=False, lo=None, lo_open=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(path, f"expected a number, got {value!r}")
    if integer:
        if isinstance(value, float) and not value.is_integer():
            raise ValidationError(path, f"expected an integer, got {value!r}")
        value = int(value)
    else:
        value = float(value)
    if lo is not None and (value <= lo if lo_open else value < lo):
        raise ValidationError(path, f"must be {'>' if lo_open else '>='} {lo}, got {value}")
    return value


def _bool(value, path):
    if not isinstance(value, bool):
        raise ValidationError(path, f"expected true or false, got {value!r}")
    return value


def _as_list(value):
    return list(value) if isinstance(value, list) else [value]


def _section(cls, table, path, spec):
    """Build dataclass ``cls`` from ``table`` using per-key converters in ``spec``."""
    _check_keys(table, spec.keys(), path)
    values = {}
    for key, conv in spec.items():
        if key in table:
            values[key] = conv(table[key], f"{path}.{key}")
    return cls(**values)


def _pair(value, path):
    if not isinstance(value, list) or len(value) != 2:
        raise ValidationError(path, f"expected [lo, hi], got {value!r}")
    return (_number(value[0], path), _number(value[1], path))


def _model(table: dict):
    _check_keys(table, _MODEL_KEYS, "model")
    kw = {}
    for key in ("L", "M"):
        if key in table:
            kw[key] = _number(table[key], f"model.{key}", integer=True)
    for key in ("h", "g0", "g1", "U"):
        if key in table:
            kw[key] = _number(table[key], f"model.{key}")
    if "M" in kw and "L" not in kw:
        kw["L"] = 2 * kw["M"]
    if "L" in kw and "M" not in kw:
        kw["M"] = kw["L"] // 2
    N_values = tuple(_number(n, "model.N", integer=True, lo=0) for n in _as_list(table.get("N", 2)))
    W_values = tuple(_number(w, "model.W", lo=0.0) for w in _as_list(table.get("W", [1.0, 10.0])))
    if not N_values or not W_values:
        raise ValidationError("model.N" if not N_values else "model.W", "list must not be empty")
    omega = table.get("omega", OMEGA_SHORTCUT)
    with _prefixed("model"):
        base = ModelParams(**kw, N=N_values[0], W=W_values[0], omega=1.0)
        if isinstance(omega, str):
            if omega.replace(" ", "") != OMEGA_SHORTCUT:
                raise ValidationError("omega", f'expected a number or "{OMEGA_SHORTCUT}", got {omega!r}')
            omega = 2.0 * omega0(base)
        else:
            omega = _number(omega, "omega", lo=0.0, lo_open=True)
        model = base.replace(omega=omega)
        for N in N_values:
            for W in W_values:
                model.replace(N=N, W=W)
    return model, N_values, W_values


@contextmanager
def _prefixed(section):
    # re-key errors raised by the domain types with the config path
    try:
        yield
    except ValidationError as exc:
        if exc.key.startswith(section + "."):
            raise
        raise ValidationError(f"{section}.{exc.key}", exc.message) from exc


def config_from_dict(data: dict) -> RunConfig:
    _check_keys(data, {"model", "propagator", "ensemble", "analysis", "classical", "spectroscopy", "output"}, "")
    for name, table in data.items():
        if not isinstance(table, dict):
            raise ValidationError(name, "expected a table")
    model, N_values, W_values = _model(data.get("model", {}))
    integer = lambda lo: lambda v, p: _number(v, p, integer=True, lo=lo)  # noqa: E731
    real = lambda lo, open_=False: lambda v, p: _number(v, p, lo=lo, lo_open=open_)  # noqa: E731
    with _prefixed("propagator"):
        propagator = _section(
            PropagatorSettings,
            data.get("propagator", {}),
            "propagator",
            {"K": integer(8), "unitarity_tol": real(0.0, True), "convergence_tol": real(0.0, True)},
        )
    ensemble = _section(
        EnsembleSettings,
        data.get("ensemble", {}),
        "ensemble",
        {"realizations": integer(1), "base_seed": integer(0), "workers": integer(0)},
    )

    def pr_mode(v, p):
        if v not in (PER_CONFIGURATION, PER_STATE):
            raise ValidationError(p, f"expected {PER_CONFIGURATION!r} or {PER_STATE!r}, got {v!r}")
        return v

    analysis = _section(
        AnalysisToggles,
        data.get("analysis", {}),
        "analysis",
        {
            **{k: _bool for k in ("pr", "rstats", "graph", "classical", "spectroscopy", "jw")},
            "cutoff": real(0.0),
            "pr_mode": pr_mode,
            "r_bins": integer(1),
        },
    )
    classical = _section(
        ClassicalSettings,
        data.get("classical", {}),
        "classical",
        {
            "omega_range": _pair,
            "g1_range": _pair,
            "n_omega": integer(2),
            "n_g1": integer(2),
            "orbits": integer(0),
            "n_periods": integer(1),
        },
    )
    lo, hi = classical.omega_range
    if not 0 < lo < hi:
        raise ValidationError("classical.omega_range", f"need 0 < lo < hi, got {classical.omega_range}")
    lo, hi = classical.g1_range
    if not 0 <= lo <= hi:
        raise ValidationError("classical.g1_range", f"need 0 <= lo <= hi, got {classical.g1_range}")
    spectroscopy = _section(
        SpectroscopySettings,
        data.get("spectroscopy", {}),
        "spectroscopy",
        {"Q": integer(2), "noise_sigma": real(0.0), "threshold": real(0.0), "realizations": integer(0)},
    )
    output = data.get("output", {})
    _check_keys(output, {"out"}, "output")
    out = output.get("out", "out")
    if not isinstance(out, str):
        raise ValidationError("output.out", f"expected a path string, got {out!r}")
    return RunConfig(
        model=model,
        N_values=N_values,
        W_values=W_values,
        propagator=propagator,
        ensemble=ensemble,
        analysis=analysis,
        classical=classical,
        spectroscopy=spectroscopy,
        out=out,
    )


def parse_config(file=None) -> RunConfig:
    """Read a TOML file (None gives the defaults)."""
    if file is None:
        return config_from_dict({})
    path = Path(file)
    if not path.is_file():
        raise ValidationError("config", f"file {path} does not exist")
    try:
        data = tomllib.loads(path.read_text())
    except tomllib.TOMLDecodeError as exc:
        raise ValidationError("config", f"{path}: {exc}") from exc
    return config_from_dict(data)


def parse_config_text(text: str) -> RunConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ValidationError("config", str(exc)) from exc
    return config_from_dict(data)


def reproduction_config(realizations: int = 100, base_seed: int = EnsembleSettings.base_seed) -> RunConfig:
    """N = 1, 2, 3 at both disorder strengths: the inputs behind the acceptance checks."""
    cfg = config_from_dict({})
    return cfg.replace(
        N_values=(1, 2, 3),
        ensemble=EnsembleSettings(realizations=realizations, base_seed=base_seed),
    )
