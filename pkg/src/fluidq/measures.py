"""Finite atomic measures on the quadrant and the half-line.

A 2-D atom sits at (w, p): residual work the server must clear before and
during this job, and residual patience. Atoms drift diagonally at rate
(-1, -1) as time passes; an atom whose first coordinate hits zero leaves
through service, one whose second coordinate hits zero leaves through
abandonment. Atoms with a zero coordinate are never stored, so a measure
only ever describes jobs still in the system.

Boxes are half-open, [a, b) x [c, d), with b and/or d allowed to be
infinite. Half-openness makes additivity over partitions exact for atomic
measures and matches the rectangle family whose evaluations pin down a
measure on the quadrant.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, NamedTuple, Sequence

import numpy as np

SERVICE = "service"
ABANDONMENT = "abandonment"


@dataclass(frozen=True)
class Box:
    """Half-open rectangle [a, b) x [c, d) in the nonnegative quadrant."""

    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        if not (0 <= self.a <= self.b and 0 <= self.c <= self.d):
            raise ValueError(f"malformed box [{self.a}, {self.b}) x [{self.c}, {self.d})")

    def shifted(self, h: float) -> "Box":
        """The set of points y with y - (h, h) in this box."""
        return Box(self.a + h, self.b + h, self.c + h, self.d + h)

    @property
    def area(self) -> float:
        return (self.b - self.a) * (self.d - self.c)


def upper_right(x: float, y: float) -> Box:
    """The rectangle [x, inf) x [y, inf)."""
    return Box(x, math.inf, y, math.inf)


class Exit(NamedTuple):
    """An atom removed by evolve, with the boundary it hit."""

    w: float
    p: float
    mass: float
    cause: str


class AtomicMeasure2D:
    """Point-mass measure on the open quadrant; immutable after construction.

    Atoms with w <= 0 or p <= 0 are silently dropped at construction, so the
    measure never charges the axes.
    """

    __slots__ = ("w", "p", "mass", "class_id")

    def __init__(self, atoms: Iterable[tuple[float, float, float]] = (),
                 class_id: int | None = None):
        rows = np.asarray(list(atoms), dtype=float).reshape(-1, 3)
        keep = (rows[:, 0] > 0) & (rows[:, 1] > 0)
        rows = rows[keep]
        if np.any(rows[:, 2] <= 0):
            raise ValueError("atom masses must be positive")
        self.w = rows[:, 0].copy()
        self.p = rows[:, 1].copy()
        self.mass = rows[:, 2].copy()
        for arr in (self.w, self.p, self.mass):
            arr.flags.writeable = False
        self.class_id = class_id

    @classmethod
    def from_arrays(cls, w: np.ndarray, p: np.ndarray, mass: np.ndarray,
                    class_id: int | None = None) -> "AtomicMeasure2D":
        m = cls.__new__(cls)
        keep = (w > 0) & (p > 0)
        m.w = np.ascontiguousarray(w[keep], dtype=float)
        m.p = np.ascontiguousarray(p[keep], dtype=float)
        m.mass = np.ascontiguousarray(mass[keep], dtype=float)
        for arr in (m.w, m.p, m.mass):
            arr.flags.writeable = False
        m.class_id = class_id
        return m

    def __len__(self) -> int:
        return len(self.w)

    def __call__(self, box: Box) -> float:
        return eval_box(self, box)

    def atoms(self) -> list[tuple[float, float, float]]:
        return list(zip(self.w.tolist(), self.p.tolist(), self.mass.tolist()))

    @property
    def total_mass(self) -> float:
        return float(self.mass.sum())

    def __repr__(self) -> str:
        tag = f", class_id={self.class_id}" if self.class_id is not None else ""
        return f"AtomicMeasure2D({len(self)} atoms, mass={self.total_mass:g}{tag})"


class AtomicMeasure1D:
    """Point-mass measure on the open half-line (0, inf)."""

    __slots__ = ("x", "mass", "class_id")

    def __init__(self, atoms: Iterable[tuple[float, float]] = (),
                 class_id: int | None = None):
        rows = np.asarray(list(atoms), dtype=float).reshape(-1, 2)
        rows = rows[rows[:, 0] > 0]
        if np.any(rows[:, 1] <= 0):
            raise ValueError("atom masses must be positive")
        self.x = rows[:, 0].copy()
        self.mass = rows[:, 1].copy()
        for arr in (self.x, self.mass):
            arr.flags.writeable = False
        self.class_id = class_id

    @classmethod
    def from_arrays(cls, x: np.ndarray, mass: np.ndarray,
                    class_id: int | None = None) -> "AtomicMeasure1D":
        m = cls.__new__(cls)
        keep = x > 0
        m.x = np.ascontiguousarray(x[keep], dtype=float)
        m.mass = np.ascontiguousarray(mass[keep], dtype=float)
        for arr in (m.x, m.mass):
            arr.flags.writeable = False
        m.class_id = class_id
        return m

    def __len__(self) -> int:
        return len(self.x)

    def __call__(self, c: float) -> float:
        return eval_tail(self, c)

    @property
    def total_mass(self) -> float:
        return float(self.mass.sum())

    def __repr__(self) -> str:
        return f"AtomicMeasure1D({len(self)} atoms, mass={self.total_mass:g})"


def eval_box(measure: AtomicMeasure2D, box: Box) -> float:
    """Mass inside the half-open box."""
    inside = ((measure.w >= box.a) & (measure.w < box.b)
              & (measure.p >= box.c) & (measure.p < box.d))
    return float(measure.mass[inside].sum())


def eval_tail(measure: AtomicMeasure1D, c: float) -> float:
    """Mass in [c, inf)."""
    return float(measure.mass[measure.x >= c].sum())


def total_mass(measure: AtomicMeasure2D | AtomicMeasure1D) -> float:
    return measure.total_mass


class EvolveResult(NamedTuple):
    measure: AtomicMeasure2D
    exits: list[Exit]


def evolve(measure: AtomicMeasure2D, h: float) -> EvolveResult:
    """Shift every atom by (-h, -h) and remove the atoms a boundary caught.

    A removed atom left through service if its w coordinate would reach zero
    strictly first, through abandonment otherwise; the tie (both coordinates
    zero together) counts as abandonment, matching the convention that a job
    whose patience equals the workload ahead of it gives up.
    """
    if h < 0:
        raise ValueError(f"h must be nonnegative, got {h}")
    w, p = measure.w - h, measure.p - h
    gone = (w <= 0) | (p <= 0)
    exits = [
        Exit(float(wi), float(pi), float(mi),
             SERVICE if wi < pi else ABANDONMENT)
        for wi, pi, mi in zip(measure.w[gone], measure.p[gone], measure.mass[gone])
    ]
    kept = AtomicMeasure2D.from_arrays(w, p, measure.mass, class_id=measure.class_id)
    return EvolveResult(kept, exits)


def superpose(measures: Sequence[AtomicMeasure2D]) -> AtomicMeasure2D:
    """Sum of the given measures (class tags are not preserved)."""
    if not measures:
        return AtomicMeasure2D()
    w = np.concatenate([m.w for m in measures])
    p = np.concatenate([m.p for m in measures])
    mass = np.concatenate([m.mass for m in measures])
    return AtomicMeasure2D.from_arrays(w, p, mass)


def project(measure: AtomicMeasure2D, axis: int) -> AtomicMeasure1D:
    """Marginal on one coordinate: axis 1 keeps w, axis 2 keeps p."""
    if axis not in (1, 2):
        raise ValueError(f"axis must be 1 or 2, got {axis}")
    coord = measure.w if axis == 1 else measure.p
    return AtomicMeasure1D.from_arrays(coord, measure.mass, class_id=measure.class_id)


def corner_distance(w, p, x: float, y: float):
    """Euclidean distance from (w, p) to the corner set at (x, y).

    The corner set is the pair of rays leaving (x, y) rightward and upward:
    {(s, y) : s >= x} union {(x, s) : s >= y}.
    """
    w = np.asarray(w, dtype=float)
    p = np.asarray(p, dtype=float)
    d_horiz = np.hypot(np.maximum(x - w, 0.0), p - y)
    d_vert = np.hypot(w - x, np.maximum(y - p, 0.0))
    return np.minimum(d_horiz, d_vert)


def corner_mass(measure: AtomicMeasure2D, x: float, y: float, kappa: float) -> float:
    """Mass strictly within distance kappa of the corner set at (x, y)."""
    if not kappa > 0:
        raise ValueError(f"kappa must be positive, got {kappa}")
    if len(measure) == 0:
        return 0.0
    close = corner_distance(measure.w, measure.p, x, y) < kappa
    return float(measure.mass[close].sum())


BoxEvaluator = Callable[[Box], float]


def rect_distance(a: AtomicMeasure2D | BoxEvaluator,
                  b: AtomicMeasure2D | BoxEvaluator,
                  grid: Sequence[Box]) -> float:
    """Largest evaluation gap over a rectangle grid.

    Accepts measures or any callable Box -> mass. Evaluating on a rich grid
    of rectangles is the working surrogate for weak-convergence distance:
    rectangle evaluations determine a finite measure, and the limits being
    compared against charge no rectangle boundaries.
    """
    if not grid:
        raise ValueError("grid must be nonempty")
    fa = a if callable(a) else a.__call__
    fb = b if callable(b) else b.__call__
    return max(abs(fa(box) - fb(box)) for box in grid)


def measure_rows(measure: AtomicMeasure2D) -> list[tuple[int | None, float, float, float]]:
    """(class_id, w, p, mass) rows for CSV export."""
    cid = measure.class_id
    return [(cid, w, p, m) for w, p, m in measure.atoms()]
