"""Line-oriented ``key = value`` run configuration.

A file holds run keys (accepted anywhere), exactly one wall-profile section
(or a sequence of ``[segment.<kind>]`` sections forming a piecewise wall) and
optional task sections::

    t_end = 10
    n_basis = 64
    [sinusoidal]
    L0 = 1
    v = 0.05
    omega = 14.7605
    [sweep]
    omega_min = 14.0
    omega_max = 15.5
    n_omega = 31

``#`` starts a comment.  Lists are comma separated; complex numbers use
Python syntax (``0.5+0.5j``).
"""
from __future__ import annotations

import math
from dataclasses import MISSING, dataclass, fields
from typing import Dict, List, Optional, Tuple

from .core import DomainError, PhysicalConstants
from .dynamics import CoefficientState, IntegratorConfig
from .wall import (ConstantVelocity, Exponential, Piecewise, Sinusoidal, Tabulated,
                   WallError)


class ConfigError(ValueError):
    """Malformed or out-of-range configuration; ``line`` is 1-based when known."""

    def __init__(self, message, line: Optional[int] = None):
        super().__init__(f"line {line}: {message}" if line else message)
        self.line = line


# ----------------------------------------------------------------------------
# value parsers

def _float(s):
    return float(s)


def _int(s):
    f = float(s)
    if not f.is_integer():
        raise ValueError(f"expected an integer, got {s!r}")
    return int(f)


def _floats(s):
    return tuple(float(x) for x in s.split(",") if x.strip())


def _complexes(s):
    return tuple(complex(x.replace(" ", "")) for x in s.split(",") if x.strip())


def _str(s):
    return s


def _fmt(value) -> str:
    if isinstance(value, tuple):
        return ", ".join(_fmt(v) for v in value)
    if isinstance(value, complex):
        return repr(value).strip("()")
    if isinstance(value, float):
        return repr(value)
    return str(value)


# key -> (parser, default); default ``...`` means required
PROFILE_KEYS = {
    "constant_velocity": {"L0": (_float, ...), "v": (_float, ...)},
    "exponential": {"L0": (_float, ...), "v": (_float, ...)},
    "sinusoidal": {"L0": (_float, ...), "v": (_float, ...), "omega": (_float, ...),
                   "phase": (_float, 0.0)},
    "tabulated": {"times": (_floats, ...), "lengths": (_floats, ...)},
}
PROFILE_TYPES = {"constant_velocity": ConstantVelocity, "exponential": Exponential,
                 "sinusoidal": Sinusoidal, "tabulated": Tabulated}
PROFILE_NAMES = {v: k for k, v in PROFILE_TYPES.items()}


@dataclass(frozen=True)
class SweepSettings:
    omega_min: float = 1.0
    omega_max: float = 100.0
    n_omega: int = 2000
    samples_per_period: float = 50.0


@dataclass(frozen=True)
class ResonanceSettings:
    state: int = 2
    omega_lo: float = 14.5
    omega_hi: float = 15.0
    tol: float = 1e-4


@dataclass(frozen=True)
class DensitySettings:
    n_x: int = 512
    coordinate: str = "absolute"


@dataclass(frozen=True)
class ConvergeSettings:
    basis_factors: Tuple[float, ...] = (2.0,)
    tolerance_factors: Tuple[float, ...] = (10.0,)
    combined: Tuple[float, ...] = ()   # flattened (basis, tolerance) pairs


TASK_SECTIONS = {"sweep": SweepSettings, "resonance": ResonanceSettings,
                 "density": DensitySettings, "converge": ConvergeSettings}
_TASK_PARSERS = {
    "sweep": {"omega_min": _float, "omega_max": _float, "n_omega": _int,
              "samples_per_period": _float},
    "resonance": {"state": _int, "omega_lo": _float, "omega_hi": _float, "tol": _float},
    "density": {"n_x": _int, "coordinate": _str},
    "converge": {"basis_factors": _floats, "tolerance_factors": _floats, "combined": _floats},
}

# run keys: parser and help text (defaults live on RunConfig)
RUN_KEYS = {
    "t_end": (_float, "integration horizon in units of L0^2 m / hbar (required)"),
    "n_basis": (_int, "basis size; 0 picks 64, or 128 for fast linear/exponential walls"),
    "samples": (_int, "number of uniformly spaced output samples"),
    "n_report": (_int, "number of populations written to tables"),
    "rel_tol": (_float, "relative error tolerance of the integrator"),
    "abs_tol": (_float, "absolute error tolerance of the integrator"),
    "max_step": (_float, "largest step the integrator may take"),
    "initial_step": (_float, "first trial step; 0 selects it automatically"),
    "initial_level": (_int, "start in this eigenstate (1 = ground state)"),
    "initial_state": (_complexes, "explicit initial coefficients, overrides initial_level"),
    "min_length": (_float, "abort if the wall comes closer than this"),
    "hbar": (_float, "reduced Planck constant"),
    "mass": (_float, "particle mass"),
    "output_dir": (_str, "directory for data files and the manifest"),
    "seed": (_int, "reserved; all runs are deterministic"),
}


@dataclass(frozen=True)
class RunConfig:
    profile: object
    t_end: float
    n_basis: int = 0
    samples: int = 1001
    n_report: int = 5
    rel_tol: float = 1e-9
    abs_tol: float = 1e-11
    max_step: float = math.inf
    initial_step: float = 0.0
    initial_level: int = 1
    initial_state: Tuple[complex, ...] = ()
    min_length: float = 0.0
    hbar: float = 1.0
    mass: float = 1.0
    output_dir: str = "out"
    seed: int = 0
    sweep: Optional[SweepSettings] = None
    resonance: Optional[ResonanceSettings] = None
    density: Optional[DensitySettings] = None
    converge: Optional[ConvergeSettings] = None

    def __post_init__(self):
        checks = [
            ("t_end", self.t_end > 0, "> 0"),
            ("n_basis", self.n_basis == 0 or self.n_basis >= 2, ">= 2 (or 0 for automatic)"),
            ("samples", self.samples >= 2, ">= 2"),
            ("n_report", self.n_report >= 1, ">= 1"),
            ("rel_tol", self.rel_tol > 0, "> 0"),
            ("abs_tol", self.abs_tol > 0, "> 0"),
            ("max_step", self.max_step > 0, "> 0"),
            ("initial_step", self.initial_step >= 0, ">= 0"),
            ("initial_level", self.initial_level >= 1, ">= 1"),
            ("min_length", self.min_length >= 0, ">= 0"),
            ("hbar", self.hbar > 0, "> 0"),
            ("mass", self.mass > 0, "> 0"),
        ]
        for name, ok, bound in checks:
            if not ok:
                raise ConfigError(f"{name} = {getattr(self, name)!r} out of range: must be {bound}")
        if self.initial_state and not any(abs(c) > 0 for c in self.initial_state):
            raise ConfigError("initial_state has zero norm")
        if self.n_basis:
            if self.n_report > self.n_basis:
                raise ConfigError(f"n_report = {self.n_report} exceeds n_basis = {self.n_basis}")
            if max(self.initial_level, len(self.initial_state)) > self.n_basis:
                raise ConfigError("initial state does not fit in n_basis")
        s = self.sweep
        if s is not None:
            if not 0 <= s.omega_min < s.omega_max:
                raise ConfigError("omega_min out of range: need 0 <= omega_min < omega_max")
            if s.n_omega < 2:
                raise ConfigError("n_omega out of range: must be >= 2")
            if s.samples_per_period < 1:
                raise ConfigError("samples_per_period out of range: must be >= 1")
        r = self.resonance
        if r is not None:
            if r.state < 1:
                raise ConfigError("state out of range: must be >= 1")
            if not 0 <= r.omega_lo < r.omega_hi:
                raise ConfigError("omega_lo out of range: need 0 <= omega_lo < omega_hi")
            if not r.tol > 0:
                raise ConfigError("tol out of range: must be > 0")
        d = self.density
        if d is not None:
            if d.n_x < 16:
                raise ConfigError("n_x out of range: must be >= 16")
            if d.coordinate not in ("absolute", "fractional"):
                raise ConfigError("coordinate must be 'absolute' or 'fractional'")
        c = self.converge
        if c is not None:
            if any(f < 1 for f in c.basis_factors + c.tolerance_factors + c.combined):
                raise ConfigError("convergence factors out of range: must be >= 1")
            if len(c.combined) % 2:
                raise ConfigError("combined needs (basis, tolerance) pairs")

    # -- derived objects --------------------------------------------------

    @property
    def constants(self) -> PhysicalConstants:
        return PhysicalConstants(self.hbar, self.mass)

    def basis_size(self) -> int:
        if self.n_basis:
            return self.n_basis
        from .experiments import default_basis_size
        return default_basis_size(self.profile)

    def integrator(self, sample_times=None) -> IntegratorConfig:
        return IntegratorConfig(self.rel_tol, self.abs_tol, self.initial_step or None,
                                self.max_step, sample_times)

    def initial(self) -> CoefficientState:
        N = self.basis_size()
        if self.initial_state:
            return CoefficientState.superposition(self.initial_state, N)
        return CoefficientState.eigenstate(self.initial_level, N)


# ----------------------------------------------------------------------------
# parsing


def _split(text: str):
    """Yield ``(section, key, value, line)``; section headers yield ``key=None``."""
    section = None
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]") or len(line) < 3:
                raise ConfigError(f"malformed section header {raw.strip()!r}", no)
            section = line[1:-1].strip()
            yield section, None, None, no
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", no)
        key, value = (s.strip() for s in line.split("=", 1))
        if not key or not value:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", no)
        yield section, key, value, no


def _convert(parser, key, value, line):
    try:
        return parser(value)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {exc}", line) from None


def _build_profile(kind, values, header_line):
    spec = PROFILE_KEYS[kind]
    missing = [k for k, (_, d) in spec.items() if d is ... and k not in values]
    if missing:
        raise ConfigError(f"[{kind}] is missing required keys: {', '.join(missing)}", header_line)
    kwargs = {k: values[k][0] if k in values else d for k, (_, d) in spec.items()}
    try:
        return PROFILE_TYPES[kind](**kwargs)
    except (DomainError, WallError, ValueError) as exc:
        bad = next((values[k][1] for k in values if k in str(exc)), header_line)
        raise ConfigError(f"[{kind}] {exc}", bad) from None


def parse_config(text: str) -> RunConfig:
    """Parse and validate a configuration; raises :class:`ConfigError`."""
    run: Dict[str, Tuple[object, int]] = {}
    profiles: List[Tuple[str, int, Dict[str, Tuple[object, int]]]] = []
    segments: List[Tuple[str, int, Dict[str, Tuple[object, int]]]] = []
    tasks: Dict[str, Dict[str, object]] = {}
    current = None   # (kind of section, name, dict)
    for section, key, value, no in _split(text):
        if key is None:
            if section in PROFILE_KEYS:
                if profiles:
                    raise ConfigError("more than one wall profile section", no)
                profiles.append((section, no, {}))
                current = ("profile", section, profiles[-1][2])
            elif section.startswith("segment."):
                kind = section[len("segment."):]
                if kind not in PROFILE_KEYS:
                    raise ConfigError(f"unknown segment kind {kind!r}", no)
                segments.append((kind, no, {}))
                current = ("segment", kind, segments[-1][2])
            elif section in TASK_SECTIONS:
                if section in tasks:
                    raise ConfigError(f"duplicate section [{section}]", no)
                tasks[section] = {}
                current = ("task", section, tasks[section])
            else:
                raise ConfigError(f"unknown section [{section}]", no)
            continue
        if current is not None:
            kind, name, store = current
            if kind in ("profile", "segment"):
                allowed = dict(PROFILE_KEYS[name])
                if kind == "segment":
                    allowed["start"] = (_float, ...)
                if key in allowed:
                    if key in store:
                        raise ConfigError(f"duplicate key {key}", no)
                    store[key] = (_convert(allowed[key][0], key, value, no), no)
                    continue
            elif key in _TASK_PARSERS[name]:
                if key in store:
                    raise ConfigError(f"duplicate key {key}", no)
                store[key] = _convert(_TASK_PARSERS[name][key], key, value, no)
                continue
        if key in RUN_KEYS:
            if key in run:
                raise ConfigError(f"duplicate key {key}", no)
            run[key] = (_convert(RUN_KEYS[key][0], key, value, no), no)
            continue
        where = f" in [{current[1]}]" if current else ""
        raise ConfigError(f"unknown key {key!r}{where}", no)

    missing = []
    if not profiles and not segments:
        missing.append("a wall profile section ([" + "], [".join(PROFILE_KEYS) + "] or [segment.<kind>])")
    if "t_end" not in run:
        missing.append("t_end")
    if missing:
        raise ConfigError("missing required keys: " + "; ".join(missing))
    if profiles and segments:
        raise ConfigError("use either one profile section or [segment.*] sections", segments[0][1])

    if profiles:
        kind, no, values = profiles[0]
        if kind == "sinusoidal" and "omega" not in values and "sweep" in tasks:
            values["omega"] = (1.0, no)     # the sweep sets omega per point
        profile = _build_profile(kind, values, no)
    else:
        parts = []
        for kind, no, values in segments:
            if "start" not in values:
                raise ConfigError(f"[segment.{kind}] is missing required keys: start", no)
            start = values.pop("start")[0]
            parts.append((start, _build_profile(kind, values, no)))
        try:
            profile = Piecewise(tuple(parts))
        except (DomainError, WallError, ValueError) as exc:
            raise ConfigError(f"piecewise profile: {exc}", segments[0][1]) from None

    kwargs = {k: v for k, (v, _) in run.items()}
    for name, values in tasks.items():
        kwargs[name] = TASK_SECTIONS[name](**values)
    try:
        return RunConfig(profile=profile, **kwargs)
    except ConfigError as exc:
        line = next((ln for k, (_, ln) in run.items() if str(exc).startswith(k + " ")), None)
        raise ConfigError(str(exc), line) from None


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


# ----------------------------------------------------------------------------
# rendering


def _profile_lines(profile, header):
    name = PROFILE_NAMES[type(profile)]
    lines = [f"[{header or name}]"]
    for key in PROFILE_KEYS[name]:
        lines.append(f"{key} = {_fmt(getattr(profile, key))}")
    return lines


def render_config(config: RunConfig) -> str:
    """Inverse of :func:`parse_config`; every field is written explicitly."""
    lines = []
    for f in fields(RunConfig):
        if f.name in RUN_KEYS:
            value = getattr(config, f.name)
            if f.name == "initial_state" and not value:
                continue
            lines.append(f"{f.name} = {_fmt(value)}")
    p = config.profile
    if isinstance(p, Piecewise):
        for start, seg in p.segments:
            lines.append("")
            lines += _profile_lines(seg, f"segment.{PROFILE_NAMES[type(seg)]}")
            lines.append(f"start = {_fmt(float(start))}")
    else:
        lines.append("")
        lines += _profile_lines(p, None)
    for name in TASK_SECTIONS:
        settings = getattr(config, name)
        if settings is None:
            continue
        lines.append("")
        lines.append(f"[{name}]")
        for f in fields(settings):
            value = getattr(settings, f.name)
            if isinstance(value, tuple) and not value:
                continue
            lines.append(f"{f.name} = {_fmt(value)}")
    return "\n".join(lines) + "\n"


def help_text() -> str:
    """Run keys with their defaults, for ``--help``."""
    defaults = {f.name: f.default for f in fields(RunConfig)}
    out = []
    for key, (_, text) in RUN_KEYS.items():
        d = defaults.get(key, MISSING)
        shown = "" if d is MISSING else f" [default {_fmt(d) or 'none'}]"
        out.append(f"  {key:<14} {text}{shown}")
    return "\n".join(out)
