"""Box-length trajectories ``L(t)`` and their time derivatives.

Every profile is an immutable value object with vectorised ``length`` and
``velocity`` methods.  For the integrator each profile also compiles to a
*segment table*: one row per analytic piece, ``[start, kind, origin, p0, p1,
p2, p3]``, evaluated at local time ``tau = t - origin`` by the kernel in
:mod:`movingwall._kernel`.  The row whose ``start`` is the rightmost one not
exceeding ``t`` is active, so at a segment boundary the right-hand piece wins.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Tuple, Union

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from .core import DomainError

KIND_LINEAR, KIND_EXPONENTIAL, KIND_SINE, KIND_CUBIC = 0, 1, 2, 3
DENSE_VALIDATION_POINTS = 10_001


class WallError(ValueError):
    """Base class for wall-profile problems."""


class ProfileRangeError(WallError):
    """Time outside the interval on which a profile is defined."""


class NonPositiveLengthError(WallError):
    """The box length reached zero or became negative."""


def _check_positive(name, value):
    if not (math.isfinite(value) and value > 0):
        raise DomainError(f"{name} must be a finite number > 0, got {value}")


class _Profile:
    """Shared machinery; subclasses provide ``_L``, ``_Ldot`` and ``_rows``."""

    t_min = -math.inf
    t_max = math.inf

    def length(self, t):
        t = self._times(t)
        out = self._L(t)
        if np.any(out <= 0):
            bad = np.atleast_1d(t)[np.atleast_1d(out) <= 0][0]
            raise NonPositiveLengthError(f"L(t) <= 0 at t = {bad:.17g}")
        return _scalarize(out)

    def velocity(self, t):
        return _scalarize(self._Ldot(self._times(t)))

    def _times(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < 0):
            raise ProfileRangeError("profile time must be >= 0")
        if np.any(t < self.t_min) or np.any(t > self.t_max):
            raise ProfileRangeError(
                f"time outside tabulated range [{self.t_min}, {self.t_max}]")
        return t

    def segment_table(self) -> np.ndarray:
        rows = np.array(self._rows(0.0), dtype=float)
        rows[0, 0] = -math.inf
        return rows

    @property
    def breakpoints(self) -> Tuple[float, ...]:
        return ()

    def _critical(self, t_end):
        """Analytic (time, length) candidates for the minimum on [0, t_end]."""
        return []


def _scalarize(a):
    a = np.asarray(a)
    return float(a) if a.ndim == 0 else a


@dataclass(frozen=True)
class ConstantVelocity(_Profile):
    """``L(t) = L0 + v t``."""

    L0: float = 1.0
    v: float = 0.0

    def __post_init__(self):
        _check_positive("L0", self.L0)
        if not math.isfinite(self.v):
            raise DomainError("v must be finite")

    def _L(self, t):
        return self.L0 + self.v * t

    def _Ldot(self, t):
        return np.full_like(np.asarray(t, dtype=float), self.v)

    def _rows(self, offset):
        return [[offset, KIND_LINEAR, offset, self.L0, self.v, 0.0, 0.0]]

    def anchored(self, L_start):
        return ConstantVelocity(L_start, self.v)

    def mirrored(self, T):
        return ConstantVelocity(self.L0 + self.v * T, -self.v)

    def _critical(self, t_end):
        if self.v < 0:
            t0 = -self.L0 / self.v
            if t0 <= t_end:
                return [(t0, 0.0)]
        return []


@dataclass(frozen=True)
class Exponential(_Profile):
    """``L(t) = L0 exp(v t / L0)``; ``v`` is the initial wall speed."""

    L0: float = 1.0
    v: float = 0.0

    def __post_init__(self):
        _check_positive("L0", self.L0)
        if not math.isfinite(self.v):
            raise DomainError("v must be finite")

    @property
    def rate(self):
        return self.v / self.L0

    def _L(self, t):
        return self.L0 * np.exp(self.rate * t)

    def _Ldot(self, t):
        return self.v * np.exp(self.rate * t)

    def _rows(self, offset):
        return [[offset, KIND_EXPONENTIAL, offset, self.L0, self.rate, 0.0, 0.0]]

    def anchored(self, L_start):
        return Exponential(L_start, self.v * L_start / self.L0)

    def mirrored(self, T):
        LT = float(self._L(T))
        return Exponential(LT, -self.rate * LT)


@dataclass(frozen=True)
class Sinusoidal(_Profile):
    """``L(t) = L0 + v sin(omega t + phase)``."""

    L0: float = 1.0
    v: float = 0.05
    omega: float = 1.0
    phase: float = 0.0

    def __post_init__(self):
        _check_positive("L0", self.L0)
        if not (math.isfinite(self.omega) and self.omega >= 0):
            raise DomainError(f"omega must be >= 0, got {self.omega}")
        if not (math.isfinite(self.v) and math.isfinite(self.phase)):
            raise DomainError("v and phase must be finite")

    def _L(self, t):
        return self.L0 + self.v * np.sin(self.omega * t + self.phase)

    def _Ldot(self, t):
        return self.v * self.omega * np.cos(self.omega * t + self.phase)

    def _rows(self, offset):
        return [[offset, KIND_SINE, offset, self.L0, self.v, self.omega, self.phase]]

    def anchored(self, L_start):
        return Sinusoidal(L_start - self.v * math.sin(self.phase), self.v,
                          self.omega, self.phase)

    def mirrored(self, T):
        return Sinusoidal(self.L0, self.v, self.omega,
                          math.pi - self.omega * T - self.phase)

    def _critical(self, t_end):
        if self.v == 0 or self.omega == 0:
            return []
        # troughs where omega t + phase = -pi/2 (v > 0) or +pi/2 (v < 0) mod 2 pi
        target = -math.pi / 2 if self.v > 0 else math.pi / 2
        j0 = math.ceil((self.phase - target) / (2 * math.pi))
        out = []
        low = self.L0 - abs(self.v)
        j = j0
        while True:
            t = (target + 2 * math.pi * j - self.phase) / self.omega
            if t > t_end:
                break
            out.append((t, low))
            j += 1
        return out


@dataclass(frozen=True)
class Tabulated(_Profile):
    """Not-a-knot cubic spline through strictly increasing ``(t, L)`` samples."""

    times: Tuple[float, ...]
    lengths: Tuple[float, ...]

    def __post_init__(self):
        t = tuple(float(x) for x in self.times)
        L = tuple(float(x) for x in self.lengths)
        if len(t) != len(L) or len(t) < 2:
            raise DomainError("tabulated profile needs >= 2 matching (t, L) samples")
        if np.any(np.diff(t) <= 0):
            raise DomainError("tabulated sample times must be strictly increasing")
        if min(L) <= 0:
            raise DomainError("tabulated lengths must all be > 0")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "lengths", L)

    @property
    def spline(self) -> CubicSpline:
        # cheap enough to rebuild; keeps the dataclass hashable
        return CubicSpline(np.array(self.times), np.array(self.lengths))

    @property
    def t_min(self):
        return self.times[0]

    @property
    def t_max(self):
        return self.times[-1]

    def _L(self, t):
        return self.spline(t)

    def _Ldot(self, t):
        return self.spline(t, 1)

    def _rows(self, offset):
        sp = self.spline
        rows = []
        for i in range(len(self.times) - 1):
            c3, c2, c1, c0 = sp.c[:, i]
            x = self.times[i] + offset
            rows.append([x, KIND_CUBIC, x, c0, c1, c2, c3])
        return rows

    def anchored(self, L_start):
        if not self.t_min <= 0.0 <= self.t_max:
            raise ProfileRangeError("tabulated segment must cover local time 0")
        shift = L_start - float(self._L(0.0))
        return Tabulated(self.times, tuple(L + shift for L in self.lengths))

    def mirrored(self, T):
        if T > self.t_max:
            raise ProfileRangeError(f"cannot mirror beyond t_max = {self.t_max}")
        return Tabulated(tuple(T - t for t in reversed(self.times)),
                         tuple(reversed(self.lengths)))


Profile = Union[ConstantVelocity, Exponential, Sinusoidal, Tabulated, "Piecewise"]


@dataclass(frozen=True)
class Piecewise(_Profile):
    """Sequence of profiles switched on at given start times.

    Each segment runs on its own clock starting at zero and is re-anchored so
    that it begins at the length the previous segment ended with.  ``L`` is
    continuous; ``Ldot`` may jump at the starts.
    """

    segments: Tuple[Tuple[float, _Profile], ...]

    def __post_init__(self):
        segs = tuple((float(s), p) for s, p in self.segments)
        if not segs:
            raise DomainError("piecewise profile needs at least one segment")
        if segs[0][0] != 0.0:
            raise DomainError("first piecewise segment must start at t = 0")
        starts = [s for s, _ in segs]
        if np.any(np.diff(starts) <= 0):
            raise DomainError("piecewise start times must be strictly increasing")
        anchored = [segs[0][1]]
        for (s_prev, _), (s, p) in zip(segs[:-1], segs[1:]):
            prev = anchored[-1]
            dur = s - s_prev
            if dur > prev.t_max:
                raise ProfileRangeError("tabulated segment ends before the next segment starts")
            end = float(prev._L(dur))
            if not end > 0:
                raise NonPositiveLengthError(f"L <= 0 at piecewise boundary t = {s}")
            anchored.append(p.anchored(end))
        object.__setattr__(self, "segments", segs)
        object.__setattr__(self, "_anchored", tuple(anchored))

    @property
    def starts(self):
        return np.array([s for s, _ in self.segments])

    @property
    def t_min(self):
        return self._anchored[0].t_min

    @property
    def t_max(self):
        return self.segments[-1][0] + self._anchored[-1].t_max

    def _locate(self, t):
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.starts, t, side="right") - 1
        return t, np.clip(idx, 0, len(self.segments) - 1)

    def _eval(self, t, attr):
        t, idx = self._locate(t)
        out = np.empty(t.shape)
        for i, prof in enumerate(self._anchored):
            mask = idx == i
            if np.any(mask):
                out[mask] = getattr(prof, attr)(t[mask] - self.segments[i][0])
        return out[()] if out.ndim == 0 else out

    def _L(self, t):
        return self._eval(t, "_L")

    def _Ldot(self, t):
        return self._eval(t, "_Ldot")

    def _rows(self, offset):
        rows = []
        for i, (s, prof) in enumerate(zip(self.starts, self._anchored)):
            stop = self.starts[i + 1] if i + 1 < len(self.starts) else math.inf
            child = prof._rows(s + offset)
            # keep child rows that overlap [s, stop), clamping the first start
            kept = [r for j, r in enumerate(child)
                    if (j + 1 == len(child) or child[j + 1][0] > s + offset)
                    and r[0] < stop + offset]
            kept[0] = [max(kept[0][0], s + offset)] + kept[0][1:]
            rows.extend(kept)
        return rows

    def anchored(self, L_start):
        first = self.segments[0][1].anchored(L_start)
        return Piecewise(((0.0, first),) + self.segments[1:])

    def mirrored(self, T):
        starts = list(self.starts)
        ends = starts[1:] + [T]
        out = []
        for s, e, prof in zip(starts, ends, self._anchored):
            if s >= T:
                break
            e = min(e, T)
            out.append((T - e, prof.mirrored(e - s)))
        out.reverse()
        return Piecewise(tuple(out))

    @property
    def breakpoints(self):
        inner = []
        for s, prof in zip(self.starts, self._anchored):
            inner.extend(s + b for b in prof.breakpoints)
        return tuple(sorted(set(list(self.starts[1:]) + inner)))

    def _critical(self, t_end):
        out = []
        starts = list(self.starts) + [math.inf]
        for i, prof in enumerate(self._anchored):
            s = starts[i]
            if s > t_end:
                break
            span = min(starts[i + 1], t_end) - s
            out.extend((s + t, L) for t, L in prof._critical(span) if t <= span)
        return out


# ----------------------------------------------------------------------------
# module-level operations


def length(profile: _Profile, t):
    """Box length at time ``t`` (scalar or array)."""
    return profile.length(t)


def velocity(profile: _Profile, t):
    """Wall velocity ``dL/dt``; right-hand derivative at piecewise boundaries."""
    return profile.velocity(t)


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    time: float = math.nan
    length: float = math.nan
    min_length_seen: float = math.nan

    def __bool__(self):
        return self.ok


def validate(profile: _Profile, t_end: float, min_length: float = 0.0) -> ValidationReport:
    """Check that ``L(t) > min_length`` on ``[0, t_end]``.

    Samples a dense uniform grid plus the analytic minima each profile knows
    about.  Returns a report carrying the first offending time instead of
    raising; only an out-of-range horizon raises.
    """
    if not t_end > 0:
        raise DomainError("t_end must be > 0")
    if min_length < 0:
        raise DomainError("min_length must be >= 0")
    if t_end > profile.t_max or profile.t_min > 0:
        raise ProfileRangeError(
            f"horizon [0, {t_end}] exceeds profile range [{profile.t_min}, {profile.t_max}]")
    grid = np.linspace(0.0, t_end, DENSE_VALIDATION_POINTS)
    crit = profile._critical(t_end)
    extra_t = np.array([t for t, _ in crit] + list(profile.breakpoints), dtype=float)
    extra_t = extra_t[(extra_t >= 0) & (extra_t <= t_end)]
    times = np.concatenate([grid, extra_t])
    values = np.asarray(profile._L(times), dtype=float)
    analytic = {t: L for t, L in crit}
    for i, t in enumerate(times):
        if t in analytic:
            values[i] = min(values[i], analytic[t])
    order = np.argsort(times, kind="stable")
    times, values = times[order], values[order]
    bad = np.nonzero(values <= min_length)[0]
    seen = float(values.min())
    if bad.size == 0:
        return ValidationReport(True, min_length_seen=seen)
    i = int(bad[0])
    t_bad, L_bad = float(times[i]), float(values[i])
    if i > 0:
        f = lambda s: float(profile._L(s)) - min_length
        a = float(times[i - 1])
        if f(a) > 0 and f(t_bad) <= 0:
            t_bad = brentq(f, a, t_bad, xtol=1e-15, rtol=4 * np.finfo(float).eps)
            L_bad = float(profile._L(t_bad))
    return ValidationReport(False, t_bad, L_bad, seen)
