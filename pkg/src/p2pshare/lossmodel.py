"""Claim process: one claim or none per node, severities, capped losses."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
from scipy import integrate, stats


@dataclass(frozen=True)
class Point:
    c: float

    def __post_init__(self):
        if not (self.c >= 0 and math.isfinite(self.c)):
            raise ValueError("point severity must be a finite nonnegative value")

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        return np.full(size, float(self.c))

    def cdf(self, y: float) -> float:
        return 1.0 if y >= self.c else 0.0


@dataclass(frozen=True)
class Uniform:
    a: float
    b: float

    def __post_init__(self):
        if not (0 <= self.a < self.b and math.isfinite(self.b)):
            raise ValueError("uniform severity needs 0 <= a < b < inf")

    def sample(self, rng, size):
        return rng.uniform(self.a, self.b, size)

    def cdf(self, y):
        return min(1.0, max(0.0, (y - self.a) / (self.b - self.a)))


@dataclass(frozen=True)
class ShiftedGamma:
    """``shift + Gamma`` with the Gamma part having mean ``mean - shift`` and sd ``sd``."""

    shift: float
    mean: float
    sd: float

    def __post_init__(self):
        if self.shift < 0:
            raise ValueError("gamma shift must be nonnegative")
        if not self.mean > self.shift:
            raise ValueError("gamma mean must exceed the shift")
        if not self.sd > 0:
            raise ValueError("gamma sd must be positive")

    @property
    def shape(self) -> float:
        return (self.mean - self.shift) ** 2 / self.sd ** 2

    @property
    def scale(self) -> float:
        return self.sd ** 2 / (self.mean - self.shift)

    def _frozen(self):
        return stats.gamma(self.shape, scale=self.scale)

    def sample(self, rng, size):
        return self.shift + rng.gamma(self.shape, self.scale, size)

    def cdf(self, y):
        return float(self._frozen().cdf(y - self.shift)) if y > self.shift else 0.0


Severity = Union[Point, Uniform, ShiftedGamma]


def parse_severity(text: str) -> Severity:
    """``point:c``, ``uniform:a,b`` or ``gamma:shift,mean,sd``."""
    kind, _, rest = text.strip().partition(":")
    try:
        vals = [float(v) for v in rest.split(",")] if rest else []
    except ValueError as exc:
        raise ValueError(f"bad severity numbers in {text!r}") from exc
    arity = {"point": 1, "uniform": 2, "gamma": 3}
    if kind not in arity:
        raise ValueError(f"unknown severity kind {kind!r}")
    if len(vals) != arity[kind]:
        raise ValueError(f"{kind} severity takes {arity[kind]} parameter(s)")
    return {"point": Point, "uniform": Uniform, "gamma": ShiftedGamma}[kind](*vals)


def format_severity(sev: Severity) -> str:
    if isinstance(sev, Point):
        return f"point:{sev.c!r}"
    if isinstance(sev, Uniform):
        return f"uniform:{sev.a!r},{sev.b!r}"
    return f"gamma:{sev.shift!r},{sev.mean!r},{sev.sd!r}"


@dataclass(frozen=True)
class LossModel:
    p: float
    severity: Severity
    s: float

    def __post_init__(self):
        if not 0 <= self.p <= 1:
            raise ValueError("claim probability must lie in [0, 1]")
        if not self.s > 0:
            raise ValueError("deductible must be positive")


@dataclass(frozen=True)
class ClaimSample:
    Z: np.ndarray
    Y: np.ndarray
    X: np.ndarray

    @classmethod
    def from_severities(cls, Y, s: float) -> "ClaimSample":
        """Claims from explicit severities; a zero entry means no claim."""
        Y = np.asarray(Y, dtype=float)
        if np.any(Y < 0):
            raise ValueError("severities must be nonnegative")
        Z = (Y > 0).astype(np.int8)
        return cls(Z, Y, Z * np.minimum(s, Y))

    @property
    def n(self) -> int:
        return len(self.X)


def sample_claims(model: LossModel, n: int, rng: np.random.Generator,
                  reps: int | None = None) -> ClaimSample:
    """Draw Z then Y for every node; with ``reps`` the arrays are ``(reps, n)``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    size = n if reps is None else (reps, n)
    Z = (rng.random(size) < model.p).astype(np.int8)
    Y = model.severity.sample(rng, size)
    Y = np.where(Z == 1, Y, 0.0)
    X = Z * np.minimum(model.s, Y)
    return ClaimSample(Z, Y, X)


def expect_capped(sev: Severity, s: float, fn: Callable[[np.ndarray], np.ndarray]) -> float:
    """E[fn(min(s, Y))] for one severity draw Y."""
    if isinstance(sev, Point):
        return float(fn(np.asarray(min(s, sev.c))))
    if isinstance(sev, Uniform):
        hi = min(s, sev.b)
        body = 0.0
        if hi > sev.a:
            body, _ = integrate.quad(lambda y: float(fn(np.asarray(y))), sev.a, hi,
                                     epsabs=1e-12, epsrel=1e-10, limit=200)
            body /= sev.b - sev.a
        tail = (1.0 - sev.cdf(s)) * float(fn(np.asarray(s)))
        return body + tail
    # shifted gamma: integrate on [shift, s] then the atom at s
    if s <= sev.shift:
        return float(fn(np.asarray(s)))
    g = sev._frozen()
    c = s - sev.shift
    body, err = integrate.quad(lambda t: float(fn(np.asarray(sev.shift + t))) * g.pdf(t),
                               0.0, c, epsabs=1e-13, epsrel=1e-10, limit=400)
    if not math.isfinite(body) or err > 1e-6 * max(1.0, abs(body)):
        raise ArithmeticError("quadrature did not converge")
    return body + g.sf(c) * float(fn(np.asarray(s)))


def loss_moments(model: LossModel) -> tuple[float, float]:
    """(E[X], stdev[X]) for X = Z·min(s, Y)."""
    m1 = expect_capped(model.severity, model.s, lambda y: y)
    m2 = expect_capped(model.severity, model.s, lambda y: y * y)
    p = model.p
    var = p * m2 - (p * m1) ** 2
    return float(p * m1), math.sqrt(max(var, 0.0))


def below_deductible_fraction(model: LossModel) -> float:
    """P[Y <= s] for a claim."""
    return float(model.severity.cdf(model.s))
