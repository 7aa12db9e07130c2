"""Convergence harness: fluid-scaled simulations against fluid predictions.

The n-th system accelerates time by n (interarrivals and services divided
by n, deadlines untouched), so one unit of simulated time carries about n
jobs and masses are compared after division by n. Workload and idle time
are compared unscaled: both are O(1) objects in the accelerated system,
and the theory sends idle time to zero outright.

Weak convergence of measures is probed through evaluations on a grid of
upper-right rectangles; those evaluations determine the limit measure and
the limits charge no rectangle boundary, so shrinking evaluation gaps are
a sound convergence surrogate.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, replace

import numpy as np

from .distributions import mix_seed
from .fluid import (FluidSolution, ZeroInitial, equilibrium_band, eval_fluid,
                    fluid_abandoning, fluid_age_count, fluid_nonabandoning,
                    fluid_queue_length, residual_deadline_limit, solve_fluid)
from .measures import Box, corner_mass, rect_distance, upper_right
from .numerics import sig17
from .simulate import (ClassSpec, SimConfig, SimTrace, _warmup_duration,
                       fluid_model_of, run)


class ScalingError(ValueError):
    """Invalid plan or mismatched comparison request."""


DEFAULT_C_GRID = (0.0, 0.5, 1.0)
DEFAULT_KAPPAS = (0.05, 0.1, 0.2, 0.4)


def offered_load(config: SimConfig) -> float:
    """Total traffic intensity, as a ratio of per-class mean service to
    mean interarrival (invariant under time acceleration)."""
    return math.fsum(
        spec.service.mean() / spec.interarrival.mean() for spec in config.classes)


def build_scaled(base: SimConfig, n: int) -> SimConfig:
    """The n-th accelerated system: interarrival and service laws divided
    by n, deadline laws untouched."""
    if not (isinstance(n, int) and n >= 1):
        raise ScalingError(f"scale must be an integer >= 1, got {n}")
    if n == 1:
        return base
    classes = tuple(
        ClassSpec(spec.interarrival.scaled(n), spec.service.scaled(n), spec.deadline)
        for spec in base.classes)
    return replace(base, classes=classes)


def default_rect_grid(config: SimConfig) -> tuple[Box, ...]:
    """6x6 grid of upper-right rectangles [x, inf) x [y, inf).

    The x knots span the union of supports the fluid state can reach
    (workload band plus deadline scale) and the y knots span the deadline
    scale d~ = min(sup deadline support, 3 * the largest mean deadline).
    """
    model = fluid_model_of(config)
    _, w_u = equilibrium_band(model)
    d_scale = 3.0 * max(c.deadline.mean() for c in model.classes)
    d_tilde = min(model.d_max, d_scale)
    xs = np.linspace(0.0, w_u + d_tilde, 6)
    ys = np.linspace(0.0, d_tilde, 6)
    return tuple(upper_right(float(x), float(y)) for x in xs for y in ys)


def corner_points(grid: tuple[Box, ...]) -> tuple[tuple[float, float], ...]:
    """The distinct lower-left corners of a rectangle grid, used as the
    reference corners for the boundary-regularity probe."""
    return tuple(sorted({(box.a, box.c) for box in grid}))


@dataclass(frozen=True)
class ScalingPlan:
    """One convergence experiment: a base system, scales, replications,
    and the grids everything is compared on."""

    base: SimConfig
    scales: tuple[int, ...]
    replications: int
    time_grid: tuple[float, ...] | None = None
    rect_grid: tuple[Box, ...] | None = None
    ages: tuple[float, ...] = (0.25,)
    tol: float = 1e-10

    def __post_init__(self):
        object.__setattr__(self, "scales", tuple(int(n) for n in self.scales))
        if self.base.scale != 1:
            raise ScalingError("plan base must be the unscaled (n=1) system")
        if not self.scales or any(n < 1 for n in self.scales):
            raise ScalingError("scales must be positive integers")
        if any(b <= a for a, b in zip(self.scales, self.scales[1:])):
            raise ScalingError("scales must be strictly increasing")
        if self.replications < 1:
            raise ScalingError("need at least one replication")
        if self.time_grid is not None:
            grid = tuple(float(t) for t in self.time_grid)
            if any(t < 0 or t > self.base.horizon for t in grid):
                raise ScalingError("time grid must lie within [0, horizon]")
            object.__setattr__(self, "time_grid", grid)

    def seed(self, n: int, rep: int) -> int:
        return mix_seed(self.base.seed, n, rep)

    def resolved_time_grid(self) -> tuple[float, ...]:
        if self.time_grid is not None:
            return self.time_grid
        return tuple(float(t) for t in np.linspace(0.0, self.base.horizon, 13))

    def resolved_rect_grid(self) -> tuple[Box, ...]:
        if self.rect_grid is not None:
            return tuple(self.rect_grid)
        return default_rect_grid(self.base)


@dataclass(frozen=True)
class ReportRow:
    n: int
    rep: int
    t: float
    metric: str
    cls: int | None
    sim_value: float
    fluid_value: float
    abs_err: float


CSV_COLUMNS = ("n", "rep", "t", "metric", "class", "sim_value", "fluid_value", "abs_err")


class ScalingReport:
    """Rows plus per-(n, metric) sup-error summaries."""

    def __init__(self, plan: ScalingPlan, rows: list[ReportRow],
                 footer: tuple[str, ...] = ()):
        self.plan = plan
        self.rows = rows
        self.footer = tuple(footer)

    def sup_errors(self, n: int, metric: str) -> list[float]:
        """Per replication: sup over the time grid (and classes) of the
        absolute error for one metric at one scale."""
        sups: dict[int, float] = {}
        for row in self.rows:
            if row.n == n and row.metric == metric:
                sups[row.rep] = max(sups.get(row.rep, 0.0), row.abs_err)
        return [sups[rep] for rep in sorted(sups)]

    def sup_of_mean_error(self, n: int, metric: str) -> float:
        """Sup over the time grid (and classes) of the replication-averaged
        absolute error: the headline convergence statistic."""
        per_cell: dict[tuple, list[float]] = {}
        for row in self.rows:
            if row.n == n and row.metric == metric:
                per_cell.setdefault((row.t, row.cls), []).append(row.abs_err)
        if not per_cell:
            raise ScalingError(f"no rows for n={n}, metric={metric!r}")
        return max(float(np.mean(errs)) for errs in per_cell.values())

    def metrics(self) -> list[str]:
        seen = dict.fromkeys(row.metric for row in self.rows)
        return list(seen)

    def summary(self) -> list[dict]:
        out = []
        for n in self.plan.scales:
            for metric in self.metrics():
                sups = self.sup_errors(n, metric)
                if not sups:
                    continue
                arr = np.asarray(sups)
                out.append({
                    "n": n,
                    "metric": metric,
                    "reps": len(sups),
                    "sup_mean_err": self.sup_of_mean_error(n, metric),
                    "mean_sup_err": float(arr.mean()),
                    "max_sup_err": float(arr.max()),
                    "std_sup_err": float(arr.std(ddof=1)) if len(sups) > 1 else 0.0,
                })
        return out

    def mean_sup_error(self, n: int, metric: str) -> float:
        sups = self.sup_errors(n, metric)
        if not sups:
            raise ScalingError(f"no rows for n={n}, metric={metric!r}")
        return float(np.mean(sups))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_COLUMNS)
            for r in self.rows:
                writer.writerow([
                    r.n, r.rep, sig17(r.t), r.metric,
                    "" if r.cls is None else r.cls,
                    sig17(r.sim_value), sig17(r.fluid_value), sig17(r.abs_err),
                ])

    def summary_dict(self) -> dict:
        return {"summary": self.summary(), "footer": list(self.footer)}

    def to_summary_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.summary_dict(), fh, indent=2)
            fh.write("\n")


class _FluidTargets:
    """Fluid-side values on the comparison grids, computed once per plan.

    Warm-started simulations are compared against the time-shifted
    empty-start fluid solution: the fluid dynamics are autonomous, so the
    limit of a system warmed up for T0 is the empty-start solution read at
    T0 + t.
    """

    def __init__(self, plan: ScalingPlan):
        self.model = fluid_model_of(plan.base)
        self.t0 = _warmup_duration(plan.base)
        self.solution: FluidSolution = solve_fluid(
            self.model, ZeroInitial(), self.t0 + plan.base.horizon, tol=plan.tol)
        self.K = len(plan.base.classes)
        self._memo: dict = {}

    def _cached(self, key, compute):
        if key not in self._memo:
            self._memo[key] = compute()
        return self._memo[key]

    def workload(self, t: float) -> float:
        return self._cached(("w", t), lambda: self.solution.workload(self.t0 + t))

    def queue_length(self, k: int, t: float) -> float:
        return self._cached(("z", k, t),
                            lambda: fluid_queue_length(self.solution, k, self.t0 + t))

    def nonabandoning(self, k: int, t: float) -> float:
        return self._cached(("n", k, t),
                            lambda: fluid_nonabandoning(self.solution, k, self.t0 + t))

    def abandoning(self, k: int, t: float) -> float:
        return self._cached(("a", k, t),
                            lambda: fluid_abandoning(self.solution, k, self.t0 + t))

    def age_count(self, k: int, t: float, u: float) -> float:
        return self._cached(("age", k, t, u),
                            lambda: fluid_age_count(self.solution, k, self.t0 + t, u))

    def box_values(self, k: int, t: float, grid: tuple[Box, ...]) -> dict[Box, float]:
        def compute():
            shifted = self.t0 + t
            return {box: eval_fluid(self.solution, k, shifted, box) for box in grid}
        return self._cached(("boxes", k, t), compute)

    def residual_tail(self, k: int, t: float, c: float) -> float:
        return self._cached(("rd", k, t, c),
                            lambda: residual_deadline_limit(self.model, k, t, c))


def _row(n, rep, t, metric, cls, sim_value, fluid_value) -> ReportRow:
    return ReportRow(n, rep, float(t), metric, cls, float(sim_value),
                     float(fluid_value), abs(float(sim_value) - float(fluid_value)))


def _workload_rows(n, rep, trace: SimTrace, targets, grid) -> list[ReportRow]:
    rows = []
    for t in grid:
        rows.append(_row(n, rep, t, "workload", None,
                         trace.workload_at(t), targets.workload(t)))
        rows.append(_row(n, rep, t, "idle", None, trace.idle_at(t), 0.0))
    return rows


def _state_rows(n, rep, trace, targets, grid, rect_grid, ages) -> list[ReportRow]:
    rows = []
    for t in grid:
        counts = trace.queue_lengths(t)
        snaps = trace.snapshot(t)
        for k in range(targets.K):
            z, nn, aa = counts[k]
            rows.append(_row(n, rep, t, "queue_length", k, z / n,
                             targets.queue_length(k, t)))
            rows.append(_row(n, rep, t, "nonabandoning", k, nn / n,
                             targets.nonabandoning(k, t)))
            rows.append(_row(n, rep, t, "abandoning", k, aa / n,
                             targets.abandoning(k, t)))
            fluid_boxes = targets.box_values(k, t, rect_grid)
            snap = snaps[k]
            dist = rect_distance(lambda box: snap(box) / n,
                                 fluid_boxes.__getitem__, rect_grid)
            rows.append(_row(n, rep, t, "rect_measure", k, dist, 0.0))
        for u in ages:
            if u > t:
                continue
            old = trace.age_count(t, u)
            for k in range(targets.K):
                rows.append(_row(n, rep, t, f"age_count@{u:g}", k, old[k] / n,
                                 targets.age_count(k, t, u)))
    return rows


def _residual_rows(n, rep, trace, targets, grid, c_grid) -> list[ReportRow]:
    rows = []
    for t in grid:
        per_class = trace.residual_deadline_measures(t)
        for k in range(targets.K):
            meas = per_class[k]
            for c in c_grid:
                target = targets.residual_tail(k, t, c)
                rows.append(_row(n, rep, t, f"A_tail@{c:g}", k,
                                 meas.residual(c) / n, target))
                rows.append(_row(n, rep, t, f"V_tail@{c:g}", k,
                                 meas.residual_with_service(c) / n, target))
    return rows


def _corner_rows(n, rep, trace, grid, corners, kappas) -> list[ReportRow]:
    rows = []
    for t in grid:
        snaps = trace.snapshot(t)
        for kappa in kappas:
            worst = 0.0
            for snap in snaps:
                for (x, y) in corners:
                    worst = max(worst, corner_mass(snap, x, y, kappa) / n)
            rows.append(_row(n, rep, t, f"corner_mass@{kappa:g}", None, worst, 0.0))
    return rows


def _collect(plan: ScalingPlan, sections: frozenset[str],
             c_grid=None, kappas=None) -> ScalingReport:
    targets = _FluidTargets(plan)
    grid = plan.resolved_time_grid()
    rect_grid = plan.resolved_rect_grid()
    corners = corner_points(rect_grid)
    c_grid = DEFAULT_C_GRID if c_grid is None else tuple(float(c) for c in c_grid)
    kappas = DEFAULT_KAPPAS if kappas is None else tuple(float(k) for k in kappas)

    rows: list[ReportRow] = []
    for n in plan.scales:
        scaled = build_scaled(plan.base, n)
        for rep in range(plan.replications):
            trace = run(replace(scaled, seed=plan.seed(n, rep)))
            if "workload" in sections:
                rows.extend(_workload_rows(n, rep, trace, targets, grid))
            if "state" in sections:
                rows.extend(_state_rows(n, rep, trace, targets, grid,
                                        rect_grid, plan.ages))
            if "residual" in sections:
                rows.extend(_residual_rows(n, rep, trace, targets, grid, c_grid))
            if "corner" in sections:
                rows.extend(_corner_rows(n, rep, trace, grid, corners, kappas))

    footer = (
        f"statistical assertions use R={plan.replications} replications",
        "convergence tolerances are empirical (no theoretical rate is available)",
    )
    return ScalingReport(plan, rows, footer)


def compare_workload(plan: ScalingPlan) -> ScalingReport:
    """Rows for metrics 'workload' (W^n vs the fluid workload) and 'idle'
    (I^n vs 0), both unscaled."""
    return _collect(plan, frozenset({"workload"}))


def compare_state(plan: ScalingPlan) -> ScalingReport:
    """Rows for fluid-scaled queue lengths, fate splits, age counts, and
    rectangle-grid measure distances."""
    return _collect(plan, frozenset({"state"}))


def compare_residual_deadlines(plan: ScalingPlan, c_grid=None) -> ScalingReport:
    """Rows for the residual-deadline tails A_tail@c and V_tail@c against
    the common fluid target lambda_k * int_c^{c+t} G_k."""
    return _collect(plan, frozenset({"residual"}), c_grid=c_grid)


def corner_regularity_probe(plan: ScalingPlan, kappas=None) -> ScalingReport:
    """Rows of the worst fluid-scaled mass near any grid corner set, per
    kappa; smaller kappa must not report more mass."""
    return _collect(plan, frozenset({"corner"}), kappas=kappas)


def run_plan(plan: ScalingPlan, c_grid=None, kappas=None) -> ScalingReport:
    """All comparison sections in one pass over the simulated traces."""
    return _collect(plan, frozenset({"workload", "state", "residual", "corner"}),
                    c_grid=c_grid, kappas=kappas)
