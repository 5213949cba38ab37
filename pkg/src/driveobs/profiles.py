"""Piecewise signal profiles and the PI current controller."""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass
from typing import Tuple


class ProfileDomainError(ValueError):
    """Requested time lies outside the profile's definition interval."""


@dataclass(frozen=True)
class Segment:
    """
    One piece of a signal profile on [t0, t1).

    Kinds: "constant" (``value``), "ramp" (linear ``v0`` at t0 to ``v1`` at
    t1), "sine" (``offset`` plus sinusoid terms ``(amplitude, omega, phase)``
    evaluated at absolute time).
    """

    t0: float
    t1: float
    kind: str
    value: float = 0.0
    v0: float = 0.0
    v1: float = 0.0
    offset: float = 0.0
    terms: Tuple[Tuple[float, float, float], ...] = ()

    def __post_init__(self):
        if self.t1 <= self.t0:
            raise ValueError("segment needs t1 > t0")
        if self.kind not in ("constant", "ramp", "sine"):
            raise ValueError(f"unknown segment kind {self.kind!r}")
        object.__setattr__(self, "terms",
                           tuple(tuple(map(float, trm)) for trm in self.terms))

    @classmethod
    def constant(cls, t0, t1, value):
        return cls(t0=t0, t1=t1, kind="constant", value=value)

    @classmethod
    def ramp(cls, t0, t1, v0, v1):
        return cls(t0=t0, t1=t1, kind="ramp", v0=v0, v1=v1)

    @classmethod
    def sine(cls, t0, t1, offset, terms):
        return cls(t0=t0, t1=t1, kind="sine", offset=offset,
                   terms=tuple(terms))

    def value_at(self, t: float) -> float:
        if self.kind == "constant":
            return self.value
        if self.kind == "ramp":
            frac = (t - self.t0) / (self.t1 - self.t0)
            return self.v0 + (self.v1 - self.v0) * frac
        out = self.offset
        for amp, omega, phase in self.terms:
            out += amp * math.sin(omega * t + phase)
        return out

    def integral_to(self, t: float) -> float:
        """Integral of the segment value from t0 to t (t within the segment)."""
        dt = t - self.t0
        if self.kind == "constant":
            return self.value * dt
        if self.kind == "ramp":
            vt = self.value_at(t)
            return 0.5 * (self.v0 + vt) * dt
        out = self.offset * dt
        for amp, omega, phase in self.terms:
            if omega == 0.0:
                out += amp * math.sin(phase) * dt
            else:
                out += (amp / omega) * (math.cos(omega * self.t0 + phase)
                                        - math.cos(omega * t + phase))
        return out

    def derivative_at(self, t: float) -> float:
        if self.kind == "constant":
            return 0.0
        if self.kind == "ramp":
            return (self.v1 - self.v0) / (self.t1 - self.t0)
        return sum(amp * omega * math.cos(omega * t + phase)
                   for amp, omega, phase in self.terms)


@dataclass(frozen=True)
class SignalProfile:
    """Contiguous, non-overlapping piecewise signal on [start, end]."""

    segments: Tuple[Segment, ...]

    def __post_init__(self):
        segs = tuple(self.segments)
        if not segs:
            raise ValueError("profile needs at least one segment")
        for a, b in zip(segs, segs[1:]):
            if abs(b.t0 - a.t1) > 1e-12:
                raise ValueError("segments must be contiguous")
        object.__setattr__(self, "segments", segs)
        object.__setattr__(self, "_starts", tuple(s.t0 for s in segs))
        # cumulative integral at each segment start
        cum = [0.0]
        for s in segs:
            cum.append(cum[-1] + s.integral_to(s.t1))
        object.__setattr__(self, "_cum", tuple(cum))

    @property
    def start(self) -> float:
        return self.segments[0].t0

    @property
    def end(self) -> float:
        return self.segments[-1].t1

    def _segment_index(self, t: float) -> int:
        if t < self.start - 1e-12 or t > self.end + 1e-12:
            raise ProfileDomainError(
                f"t = {t:g} outside profile domain [{self.start:g}, {self.end:g}]")
        i = bisect_right(self._starts, t) - 1
        return min(max(i, 0), len(self.segments) - 1)

    def value(self, t: float) -> float:
        return self.segments[self._segment_index(t)].value_at(t)

    def integral(self, t: float) -> float:
        """Integral of the signal from the profile start to t."""
        i = self._segment_index(t)
        return self._cum[i] + self.segments[i].integral_to(t)

    def derivative(self, t: float) -> float:
        """Piecewise signal rate (one-sided at segment joins)."""
        return self.segments[self._segment_index(t)].derivative_at(t)

    @classmethod
    def constant(cls, t0, t1, value) -> "SignalProfile":
        return cls((Segment.constant(t0, t1, value),))


class PiController:
    """PI regulator with output saturation and integrator-freeze anti-windup."""

    def __init__(self, k_p: float, k_i: float, out_min: float = -math.inf,
                 out_max: float = math.inf, integral: float = 0.0):
        if out_min >= out_max:
            raise ValueError("out_min must be below out_max")
        self.k_p = k_p
        self.k_i = k_i
        self.out_min = out_min
        self.out_max = out_max
        self.integral = integral
        self.saturated = False

    def update(self, error: float, dt: float) -> float:
        raw = self.k_p * error + self.integral
        if raw > self.out_max:
            self.saturated = True
            return self.out_max
        if raw < self.out_min:
            self.saturated = True
            return self.out_min
        self.saturated = False
        self.integral += self.k_i * error * dt
        return raw

    def preload(self, output: float):
        """Seed the integrator so the controller starts at ``output``."""
        self.integral = output
