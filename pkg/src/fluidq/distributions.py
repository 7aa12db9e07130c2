"""Probability laws for interarrival times, service requirements, and deadlines.

Every family exposes the same four primitives:

* ``survival(x)``      -- G(x) = P(X > x), closed form, vectorized;
* ``integrate_survival(a, b)`` -- the exact integral of G over [a, b];
* ``sample(rng, size)``        -- inverse-CDF sampling from a seeded stream;
* ``sup_support()``            -- the exact supremum of the support.

Survival integrals are deliberately closed form per family (never
quadrature): the fluid performance formulas downstream are built from
``integrate_survival`` and need integrand-level exactness to meet 1e-8
tolerances.

Sampling draws one uniform per variate and maps it through the
(generalized) inverse CDF, so two laws related by a change of scale
produce pathwise-coupled samples under the same stream.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class DistributionError(ValueError):
    """Raised for invalid parameters or unsupported operations."""


def stream(seed: int, *path: int) -> np.random.Generator:
    """Deterministic substream: a PCG64 generator keyed by seed plus a path.

    Identical (seed, path) yields the identical sample sequence on every
    platform; distinct paths yield statistically independent streams.
    """
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, *path])))


def mix_seed(base_seed: int, *path: int) -> int:
    """Collapse (base_seed, path...) into a single 64-bit seed, deterministically."""
    return int(np.random.SeedSequence([base_seed, *path]).generate_state(1, np.uint64)[0])


class Distribution:
    """Base class; subclasses are immutable value objects."""

    def survival(self, x):
        """G(x) = P(X > x) for x >= 0 (scalar or ndarray)."""
        raise NotImplementedError

    def cdf(self, x):
        return 1.0 - self.survival(x)

    def integrate_survival(self, a: float, b: float) -> float:
        """Integral of G over [a, b], 0 <= a <= b, in closed form."""
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size: int | None = None):
        """Inverse-CDF sample(s) from the given stream."""
        u = rng.random(size)
        return self._inverse_cdf(u)

    def _inverse_cdf(self, u):
        raise NotImplementedError

    def mean(self) -> float:
        raise NotImplementedError

    def sup_support(self) -> float:
        """Exact supremum of the support (may be math.inf)."""
        raise NotImplementedError

    @property
    def is_continuous(self) -> bool:
        """Whether the CDF is continuous (required of deadline laws)."""
        return True

    def scaled(self, n: float) -> "Distribution":
        """The law of X / n (time acceleration of interarrivals and services)."""
        raise NotImplementedError


def _check_nonneg_x(x) -> None:
    if np.any(np.asarray(x) < 0):
        raise DistributionError("survival is defined on x >= 0")


def _check_interval(a: float, b: float) -> None:
    if not (0 <= a <= b):
        raise DistributionError(f"need 0 <= a <= b, got a={a}, b={b}")


@dataclass(frozen=True)
class Exponential(Distribution):
    rate: float

    def __post_init__(self):
        if not self.rate > 0:
            raise DistributionError(f"rate must be positive, got {self.rate}")

    def survival(self, x):
        _check_nonneg_x(x)
        return np.exp(-self.rate * np.asarray(x, dtype=float)) if np.ndim(x) else math.exp(-self.rate * x)

    def integrate_survival(self, a: float, b: float) -> float:
        _check_interval(a, b)
        r = self.rate
        return (math.exp(-r * a) - math.exp(-r * b)) / r

    def _inverse_cdf(self, u):
        return -np.log1p(-u) / self.rate

    def mean(self) -> float:
        return 1.0 / self.rate

    def sup_support(self) -> float:
        return math.inf

    def scaled(self, n: float) -> "Exponential":
        return Exponential(self.rate * n) if n != 1 else self


@dataclass(frozen=True)
class Deterministic(Distribution):
    """Point mass at ``value``. Not a valid deadline law (discontinuous CDF)."""

    value: float

    def __post_init__(self):
        if not self.value > 0:
            raise DistributionError(f"value must be positive, got {self.value}")

    def survival(self, x):
        _check_nonneg_x(x)
        # Right-continuous: G(value) = 0.
        if np.ndim(x):
            return (np.asarray(x, dtype=float) < self.value).astype(float)
        return 1.0 if x < self.value else 0.0

    def integrate_survival(self, a: float, b: float) -> float:
        _check_interval(a, b)
        return max(0.0, min(b, self.value) - a)

    def _inverse_cdf(self, u):
        return np.full_like(np.asarray(u, dtype=float), self.value) if np.ndim(u) else self.value

    def mean(self) -> float:
        return self.value

    def sup_support(self) -> float:
        return self.value

    @property
    def is_continuous(self) -> bool:
        return False

    def scaled(self, n: float) -> "Deterministic":
        return Deterministic(self.value / n) if n != 1 else self


@dataclass(frozen=True)
class UniformInterval(Distribution):
    """Uniform law on [lo, hi) with 0 <= lo < hi."""

    lo: float
    hi: float

    def __post_init__(self):
        if not (0 <= self.lo < self.hi):
            raise DistributionError(f"need 0 <= lo < hi, got lo={self.lo}, hi={self.hi}")

    def survival(self, x):
        _check_nonneg_x(x)
        lo, hi = self.lo, self.hi
        x = np.asarray(x, dtype=float)
        g = np.clip((hi - x) / (hi - lo), 0.0, 1.0)
        return g if g.ndim else float(g)

    def integrate_survival(self, a: float, b: float) -> float:
        _check_interval(a, b)
        lo, hi = self.lo, self.hi
        # G = 1 on [0, lo), linear down to 0 on [lo, hi), 0 afterwards.
        flat = max(0.0, min(b, lo) - a)
        xa, xb = min(max(a, lo), hi), min(max(b, lo), hi)
        tri = ((hi - xa) ** 2 - (hi - xb) ** 2) / (2.0 * (hi - lo))
        return flat + tri

    def _inverse_cdf(self, u):
        return self.lo + u * (self.hi - self.lo)

    def mean(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def sup_support(self) -> float:
        return self.hi

    def scaled(self, n: float) -> "UniformInterval":
        return UniformInterval(self.lo / n, self.hi / n) if n != 1 else self


@dataclass(frozen=True)
class UniformMixture(Distribution):
    """Mixture of uniform intervals: components are (weight, lo, hi) triples.

    Weights must be positive and sum to 1. Overlapping and disjoint
    components are both allowed; a gap between components produces a flat
    stretch of the survival function, which is exactly what creates a
    nondegenerate equilibrium interval in the fluid model.
    """

    components: tuple[tuple[float, float, float], ...]

    def __post_init__(self):
        comps = tuple((float(w), float(lo), float(hi)) for w, lo, hi in self.components)
        object.__setattr__(self, "components", comps)
        if not comps:
            raise DistributionError("mixture needs at least one component")
        for w, lo, hi in comps:
            if not w > 0:
                raise DistributionError(f"weights must be positive, got {w}")
            if not (0 <= lo < hi):
                raise DistributionError(f"need 0 <= lo < hi, got lo={lo}, hi={hi}")
        total = math.fsum(w for w, _, _ in comps)
        if abs(total - 1.0) > 1e-12:
            raise DistributionError(f"weights must sum to 1, got {total}")
        # Piecewise-linear CDF knots for exact single-draw inversion.
        knots = sorted({lo for _, lo, _ in comps} | {hi for _, _, hi in comps})
        cdf_at = [math.fsum(self._component_cdf(x)) for x in knots]
        cdf_at[-1] = 1.0
        object.__setattr__(self, "_knots", tuple(knots))
        object.__setattr__(self, "_cdf_knots", tuple(cdf_at))

    def _component_cdf(self, x: float):
        return [w * min(max((x - lo) / (hi - lo), 0.0), 1.0) for w, lo, hi in self.components]

    def survival(self, x):
        _check_nonneg_x(x)
        x = np.asarray(x, dtype=float)
        g = sum(w * np.clip((hi - x) / (hi - lo), 0.0, 1.0) for w, lo, hi in self.components)
        return g if g.ndim else float(g)

    def integrate_survival(self, a: float, b: float) -> float:
        _check_interval(a, b)
        return math.fsum(w * UniformInterval(lo, hi).integrate_survival(a, b)
                         for w, lo, hi in self.components)

    def _inverse_cdf(self, u):
        # Generalized inverse of the piecewise-linear CDF: one uniform per
        # sample, exact in closed form, monotone in u.
        scalar = np.ndim(u) == 0
        u = np.atleast_1d(np.asarray(u, dtype=float))
        knots = np.asarray(self._knots)
        cdfs = np.asarray(self._cdf_knots)
        idx = np.searchsorted(cdfs, u, side="right")
        idx = np.clip(idx, 1, len(knots) - 1)
        f0, f1 = cdfs[idx - 1], cdfs[idx]
        x0, x1 = knots[idx - 1], knots[idx]
        with np.errstate(invalid="ignore", divide="ignore"):
            frac = np.where(f1 > f0, (u - f0) / (f1 - f0), 0.0)
        out = x0 + np.clip(frac, 0.0, 1.0) * (x1 - x0)
        return float(out[0]) if scalar else out

    def mean(self) -> float:
        return math.fsum(w * 0.5 * (lo + hi) for w, lo, hi in self.components)

    def sup_support(self) -> float:
        return max(hi for _, _, hi in self.components)

    def scaled(self, n: float) -> "UniformMixture":
        if n == 1:
            return self
        return UniformMixture(tuple((w, lo / n, hi / n) for w, lo, hi in self.components))


@dataclass(frozen=True)
class HyperExponential(Distribution):
    """Mixture of exponentials: components are (weight, rate) pairs."""

    components: tuple[tuple[float, float], ...]

    def __post_init__(self):
        comps = tuple((float(w), float(r)) for w, r in self.components)
        object.__setattr__(self, "components", comps)
        if not comps:
            raise DistributionError("mixture needs at least one component")
        for w, r in comps:
            if not w > 0:
                raise DistributionError(f"weights must be positive, got {w}")
            if not r > 0:
                raise DistributionError(f"rates must be positive, got {r}")
        total = math.fsum(w for w, _ in comps)
        if abs(total - 1.0) > 1e-12:
            raise DistributionError(f"weights must sum to 1, got {total}")

    def survival(self, x):
        _check_nonneg_x(x)
        x = np.asarray(x, dtype=float)
        g = sum(w * np.exp(-r * x) for w, r in self.components)
        return g if g.ndim else float(g)

    def integrate_survival(self, a: float, b: float) -> float:
        _check_interval(a, b)
        return math.fsum(w * (math.exp(-r * a) - math.exp(-r * b)) / r
                         for w, r in self.components)

    def _inverse_cdf(self, u):
        # The mixture CDF has no closed-form inverse; invert numerically by
        # vectorized bisection. The slowest component's quantile brackets the
        # answer from above, so 80 halvings pin the root to full precision.
        scalar = np.ndim(u) == 0
        u = np.atleast_1d(np.asarray(u, dtype=float))
        r_min = min(r for _, r in self.components)
        lo = np.zeros_like(u)
        hi = -np.log1p(-u) / r_min
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            below = self.cdf(mid) < u
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        out = 0.5 * (lo + hi)
        return float(out[0]) if scalar else out

    def mean(self) -> float:
        return math.fsum(w / r for w, r in self.components)

    def sup_support(self) -> float:
        return math.inf

    def scaled(self, n: float) -> "HyperExponential":
        if n == 1:
            return self
        return HyperExponential(tuple((w, r * n) for w, r in self.components))


@dataclass(frozen=True)
class Replay(Distribution):
    """Scripted sample list, for driving hand-computed traces in tests.

    Has no probability law: survival/integration/mean are unavailable, and
    any workflow that needs a law (fluid targets, convergence studies) must
    reject it. ``sample`` consumes the list left to right and fails when it
    runs out; the rng argument is ignored.
    """

    samples: tuple[float, ...]

    def __post_init__(self):
        vals = tuple(float(v) for v in self.samples)
        object.__setattr__(self, "samples", vals)
        if any(v <= 0 for v in vals):
            raise DistributionError("replay samples must be positive")
        object.__setattr__(self, "_cursor", [0])

    def survival(self, x):
        raise DistributionError("replay distribution has no survival function")

    def integrate_survival(self, a: float, b: float) -> float:
        raise DistributionError("replay distribution has no survival function")

    def sample(self, rng: np.random.Generator, size: int | None = None):
        count = 1 if size is None else int(size)
        cur = self._cursor[0]
        if cur + count > len(self.samples):
            raise DistributionError(
                f"replay exhausted: asked for {count}, {len(self.samples) - cur} left")
        self._cursor[0] = cur + count
        out = np.asarray(self.samples[cur:cur + count], dtype=float)
        return float(out[0]) if size is None else out

    def reset(self) -> None:
        self._cursor[0] = 0

    @property
    def remaining(self) -> int:
        return len(self.samples) - self._cursor[0]

    def mean(self) -> float:
        raise DistributionError("replay distribution has no mean")

    def sup_support(self) -> float:
        return max(self.samples)

    @property
    def is_continuous(self) -> bool:
        return False

    def scaled(self, n: float) -> "Replay":
        if n == 1:
            return self
        return Replay(tuple(v / n for v in self.samples))


def require_deadline_law(dist: Distribution) -> Distribution:
    """Validate a law for use as a patience/deadline distribution.

    Deadlines must have a continuous CDF; point masses are rejected.
    """
    if not dist.is_continuous:
        raise DistributionError(
            f"{type(dist).__name__} cannot be a deadline law: deadline CDFs must be continuous")
    return dist
