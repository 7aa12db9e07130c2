"""Deterministic fluid model of the overloaded multiclass FIFO queue.

The scalar workload w solves the autonomous ODE

    w'(t) = sum_k rho_k G_k(w(t)) - 1,

where rho_k is the class load and G_k the deadline survival function.
Because total load exceeds one, the right side is positive at zero and
falls to -1 at infinity, so the fixed points form the closed interval
where sum_k rho_k G_k equals exactly one: the equilibrium band.

On top of the workload path, the measure-valued fluid state of class k is
evaluated in closed form on boxes: mass that started in the box's
diagonal preimage, plus fluid arrivals whose entry position and residual
patience land in the box. The first-in-first-out frontier map

    tau(t) = inf{ s in [0, t] : w(s) + s >= t }

locates the arrival epoch whose work is reaching the server at time t;
everything downstream (queue lengths, abandonment splits, age profiles)
is an integral with tau in its limits.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.interpolate import PchipInterpolator

from . import numerics
from .distributions import Distribution, require_deadline_law
from .measures import Box, upper_right

QUAD_TOL = 1e-10
TAU_TOL = 1e-10
BAND_TOL = 1e-12


class FluidModelError(ValueError):
    """Invalid fluid-model data or evaluation outside preconditions."""


@dataclass(frozen=True)
class FluidClass:
    """One customer class: arrival rate, service rate, deadline law."""

    arrival_rate: float
    service_rate: float
    deadline: Distribution

    def __post_init__(self):
        if not self.arrival_rate > 0:
            raise FluidModelError(f"arrival rate must be positive, got {self.arrival_rate}")
        if not self.service_rate > 0:
            raise FluidModelError(f"service rate must be positive, got {self.service_rate}")
        require_deadline_law(self.deadline)

    @property
    def rho(self) -> float:
        return self.arrival_rate / self.service_rate


@dataclass(frozen=True)
class FluidModelInput:
    """Supercritical model data: per-class rates and deadline laws."""

    classes: tuple[FluidClass, ...]

    def __post_init__(self):
        object.__setattr__(self, "classes", tuple(self.classes))
        if not self.classes:
            raise FluidModelError("need at least one class")
        if not self.rho > 1:
            raise FluidModelError(
                f"total load must exceed 1 (overloaded regime), got rho={self.rho}")

    @property
    def K(self) -> int:
        return len(self.classes)

    @property
    def rho(self) -> float:
        return math.fsum(c.rho for c in self.classes)

    @property
    def d_max(self) -> float:
        return max(c.deadline.sup_support() for c in self.classes)

    def load_survival(self, u):
        """sum_k rho_k G_k(u); the ODE right side plus one."""
        return sum(c.rho * c.deadline.survival(u) for c in self.classes)


def equilibrium_band(model: FluidModelInput) -> tuple[float, float]:
    """Endpoints of the fixed-point interval {u : sum_k rho_k G_k(u) = 1}.

    The load u -> sum rho_k G_k(u) is nonincreasing from rho > 1 to 0, so
    its level-1 set is a nonempty closed interval; a flat stretch of some
    G_k at the right height makes it nondegenerate. Both endpoints land
    strictly inside (0, d_max).
    """
    load = model.load_survival
    hi = model.d_max
    if not math.isfinite(hi):
        hi = 1.0
        while load(hi) >= 1.0:
            hi *= 2.0
            if hi > 1e12:
                raise FluidModelError("no finite equilibrium; deadline tails too heavy")

    # w_l: leftmost u with load(u) <= 1 (bracket keeps load(a) > 1 >= load(b)).
    a, b = 0.0, hi
    while b - a > BAND_TOL:
        m = 0.5 * (a + b)
        if load(m) <= 1.0:
            b = m
        else:
            a = m
    w_l = b

    # w_u: rightmost u with load(u) >= 1 (bracket keeps load(a) >= 1 > load(b)).
    a, b = 0.0, hi
    while b - a > BAND_TOL:
        m = 0.5 * (a + b)
        if load(m) >= 1.0:
            a = m
        else:
            b = m
    w_u = a

    if w_l > w_u:  # degenerate band: both bisections pinned the same root
        w_l = w_u = 0.5 * (w_l + w_u)
    return w_l, w_u


class WorkloadPath:
    """Workload fluid solution on [0, T] with monotone-safe interpolation."""

    def __init__(self, model: FluidModelInput, w0: float, T: float,
                 ts: np.ndarray, ws: np.ndarray, tol: float):
        self.model = model
        self.w0 = float(w0)
        self.T = float(T)
        self.grid_t = ts
        self.grid_w = ws
        self.tol = tol
        self._interp = PchipInterpolator(ts, ws) if len(ts) > 1 else None

    def __call__(self, t: float) -> float:
        self._check_time(t)
        if self._interp is None:
            return self.w0
        return float(self._interp(min(max(t, 0.0), self.T)))

    def at(self, ts) -> np.ndarray:
        ts = np.asarray(ts, dtype=float)
        if np.any(ts < -1e-9) or np.any(ts > self.T + 1e-9):
            raise FluidModelError(f"time out of range [0, {self.T}]")
        if self._interp is None:
            return np.full_like(ts, self.w0)
        return np.asarray(self._interp(np.clip(ts, 0.0, self.T)), dtype=float)

    def phi(self, s: float) -> float:
        """The strictly increasing frontier map s -> w(s) + s."""
        return self(s) + s

    def tau(self, t: float) -> float:
        """inf{ s in [0, t] : w(s) + s >= t }, by bisection."""
        self._check_time(t)
        if t <= self.w0:
            return 0.0
        return numerics.bisect_leftmost(self.phi, 0.0, t, t, tol=TAU_TOL)

    def tau_clamped(self, x: float, t: float) -> float:
        """min(tau(x), t), valid for any x >= 0 including infinity."""
        if x >= self.phi(t):
            return t
        if x <= self.w0:
            return 0.0
        return numerics.bisect_leftmost(self.phi, 0.0, t, x, tol=TAU_TOL)

    def _check_time(self, t: float) -> None:
        if t < -1e-9 or t > self.T + 1e-9:
            raise FluidModelError(f"time {t} outside the solved horizon [0, {self.T}]")


def solve_workload(model: FluidModelInput, w0: float, T: float,
                   tol: float = 1e-10) -> WorkloadPath:
    """Solve w' = sum rho_k G_k(w) - 1 from w(0) = w0 on [0, T].

    Classical fixed-step RK4, with the step refined until halving it moves
    the solution by less than tol. The initial level must be reachable by
    some deadline: w0 <= d_max (with room to spare when d_max is finite,
    since G vanishes there and mass above it could never have arrived).
    """
    if w0 < 0:
        raise FluidModelError(f"w0 must be nonnegative, got {w0}")
    if T < 0:
        raise FluidModelError(f"horizon must be nonnegative, got {T}")
    if not tol > 0:
        raise FluidModelError(f"tol must be positive, got {tol}")
    d_max = model.d_max
    if w0 > d_max:
        raise FluidModelError(
            f"w0={w0} exceeds the largest deadline support bound {d_max}")
    if T == 0:
        return WorkloadPath(model, w0, 0.0, np.array([0.0]), np.array([float(w0)]), tol)

    def rhs(w):
        return model.load_survival(np.maximum(w, 0.0)) - 1.0

    steps0 = max(64, int(T * 8))
    ts, ws = numerics.rk4_validated(rhs, w0, T, tol, initial_steps=steps0)
    return WorkloadPath(model, w0, T, ts, ws, tol)


# ---------------------------------------------------------------------------
# Initial conditions
# ---------------------------------------------------------------------------

def _rect_overlap_area(ax: float, bx: float, ay: float, by: float,
                       qa: float, qb: float, qc: float, qd: float) -> float:
    """Area of [ax,bx)x[ay,by) intersected with [qa,qb)x[qc,qd)."""
    return max(0.0, min(bx, qb) - max(ax, qa)) * max(0.0, min(by, qd) - max(ay, qc))


def _area_above_diagonal(x1: float, x2: float, y1: float, y2: float) -> float:
    """Area of the rectangle [x1,x2]x[y1,y2] lying strictly above p = w."""
    if x2 <= x1 or y2 <= y1:
        return 0.0
    flat_hi = min(x2, y1)
    area = max(0.0, flat_hi - x1) * (y2 - y1)
    u, v = max(x1, y1), min(x2, y2)
    if v > u:
        area += 0.5 * ((y2 - u) ** 2 - (y2 - v) ** 2)
    return area


class InitialFluidMeasure:
    """Base for the admissible time-zero fluid states.

    Admissibility: no mass on lines (boxes have positive area), a finite
    right support edge w_theta, and w_theta within reach of the deadline
    laws (w_theta <= d_max).
    """

    def validate(self, model: FluidModelInput) -> None:
        raise NotImplementedError

    def support_edge(self, model: FluidModelInput) -> float:
        """w_theta: right edge of the workload-coordinate support."""
        raise NotImplementedError

    def eval0(self, model: FluidModelInput, k: int, box: Box) -> float:
        """Class k initial mass on the box."""
        raise NotImplementedError

    def mass_nonabandoning(self, model: FluidModelInput, k: int, t: float) -> float:
        """Class k initial mass on U_t = {w >= t, p >= t, w < p}."""
        raise NotImplementedError

    def mass_abandoning(self, model: FluidModelInput, k: int, t: float) -> float:
        """Class k initial mass on L_t = {w >= t, p >= t, p <= w}."""
        raise NotImplementedError


@dataclass(frozen=True)
class ZeroInitial(InitialFluidMeasure):
    """Empty system at time zero."""

    def validate(self, model: FluidModelInput) -> None:
        pass

    def support_edge(self, model: FluidModelInput) -> float:
        return 0.0

    def eval0(self, model, k, box) -> float:
        return 0.0

    def mass_nonabandoning(self, model, k, t) -> float:
        return 0.0

    def mass_abandoning(self, model, k, t) -> float:
        return 0.0


@dataclass(frozen=True)
class InvariantInitial(InitialFluidMeasure):
    """The invariant state pinned at workload level w in the equilibrium band.

    Class k carries density lambda_k along the antidiagonal through (w, .):
    offset u in [0, w] puts mass lambda_k du at workload coordinate w - u
    with patience coordinate distributed as (D - u) for D ~ deadline law.
    """

    w: float

    def validate(self, model: FluidModelInput) -> None:
        w_l, w_u = equilibrium_band(model)
        if not (w_l - 1e-9 <= self.w <= w_u + 1e-9):
            raise FluidModelError(
                f"invariant level w={self.w} outside the equilibrium band "
                f"[{w_l:.12g}, {w_u:.12g}]")

    def support_edge(self, model: FluidModelInput) -> float:
        return self.w

    def eval0(self, model, k, box) -> float:
        cls = model.classes[k]
        b = min(box.b, self.w)
        if b <= box.a:
            return 0.0
        lo_u, hi_u = self.w - b, self.w - box.a
        val = cls.deadline.integrate_survival(box.c + lo_u, box.c + hi_u)
        if math.isfinite(box.d):
            val -= cls.deadline.integrate_survival(box.d + lo_u, box.d + hi_u)
        return cls.arrival_rate * val

    def mass_nonabandoning(self, model, k, t) -> float:
        cls = model.classes[k]
        stretch = max(self.w - t, 0.0)
        return cls.arrival_rate * stretch * cls.deadline.survival(self.w)

    def mass_abandoning(self, model, k, t) -> float:
        cls = model.classes[k]
        if t >= self.w:
            return 0.0
        tail = cls.deadline.integrate_survival(t, self.w)
        return cls.arrival_rate * (tail - (self.w - t) * cls.deadline.survival(self.w))


@dataclass(frozen=True)
class BoxMixtureInitial(InitialFluidMeasure):
    """Piecewise-uniform initial state: (class, box, mass) pieces.

    Each piece spreads its mass uniformly over a finite box of positive
    area, so no line is ever charged.
    """

    pieces: tuple[tuple[int, Box, float], ...]

    def __post_init__(self):
        object.__setattr__(self, "pieces", tuple(self.pieces))

    def validate(self, model: FluidModelInput) -> None:
        if not self.pieces:
            raise FluidModelError("box mixture needs at least one piece")
        for k, box, mass in self.pieces:
            if not 0 <= k < model.K:
                raise FluidModelError(f"class index {k} out of range")
            if not (math.isfinite(box.b) and math.isfinite(box.d)):
                raise FluidModelError("initial boxes must be bounded")
            if box.area <= 0:
                raise FluidModelError(
                    f"initial box [{box.a},{box.b})x[{box.c},{box.d}) has zero area; "
                    "mass on lines is not an admissible initial state")
            if not mass > 0:
                raise FluidModelError(f"piece masses must be positive, got {mass}")
        edge = self.support_edge(model)
        if edge > model.d_max:
            raise FluidModelError(
                f"support edge {edge} exceeds the largest deadline bound {model.d_max}")

    def support_edge(self, model: FluidModelInput) -> float:
        return max(box.b for _, box, _ in self.pieces)

    def eval0(self, model, k, box) -> float:
        total = 0.0
        for kk, piece, mass in self.pieces:
            if kk != k:
                continue
            overlap = _rect_overlap_area(piece.a, piece.b, piece.c, piece.d,
                                         box.a, box.b, box.c, box.d)
            total += mass * overlap / piece.area
        return total

    def _split_mass(self, model, k, t, above: bool) -> float:
        total = 0.0
        for kk, piece, mass in self.pieces:
            if kk != k:
                continue
            x1, x2 = max(piece.a, t), piece.b
            y1, y2 = max(piece.c, t), piece.d
            if x2 <= x1 or y2 <= y1:
                continue
            up = _area_above_diagonal(x1, x2, y1, y2)
            area = up if above else (x2 - x1) * (y2 - y1) - up
            total += mass * area / piece.area
        return total

    def mass_nonabandoning(self, model, k, t) -> float:
        return self._split_mass(model, k, t, above=True)

    def mass_abandoning(self, model, k, t) -> float:
        return self._split_mass(model, k, t, above=False)


# ---------------------------------------------------------------------------
# Fluid solution and functionals
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FluidSolution:
    """Workload path plus the data needed to evaluate the fluid state."""

    model: FluidModelInput
    initial: InitialFluidMeasure
    workload: WorkloadPath

    @property
    def T(self) -> float:
        return self.workload.T

    @property
    def w0(self) -> float:
        return self.workload.w0

    @cached_property
    def band(self) -> tuple[float, float]:
        return equilibrium_band(self.model)


def solve_fluid(model: FluidModelInput, initial: InitialFluidMeasure,
                T: float, tol: float = 1e-10) -> FluidSolution:
    """Validate the initial state and solve the workload path it induces."""
    initial.validate(model)
    w0 = initial.support_edge(model)
    path = solve_workload(model, w0, T, tol)
    return FluidSolution(model, initial, path)


def tau(solution: FluidSolution | WorkloadPath, t: float) -> float:
    """First time the moving frontier w(s) + s reaches level t."""
    path = solution.workload if isinstance(solution, FluidSolution) else solution
    return path.tau(t)


def eval_fluid(solution: FluidSolution, k: int, t: float, box: Box) -> float:
    """Class k fluid mass on the box at time t.

    Two contributions: initial mass whose diagonal drift lands it in the
    box, and fluid arrivals. An arrival at time s enters at workload
    coordinate w(s), hence lands in [a, b) at time t exactly when
    w(s) + s is in [a + t, b + t); inverting through tau turns the box
    edges into integration limits, and the patience coordinate
    contributes a survival-difference weight with closed-form integral.
    """
    path = solution.workload
    path._check_time(t)
    cls = solution.model.classes[k]
    init_term = solution.initial.eval0(solution.model, k, box.shifted(t))
    lo = path.tau_clamped(box.a + t, t)
    hi = path.tau_clamped(box.b + t, t)
    if hi <= lo:
        return init_term
    val = cls.deadline.integrate_survival(box.c + t - hi, box.c + t - lo)
    if math.isfinite(box.d):
        val -= cls.deadline.integrate_survival(box.d + t - hi, box.d + t - lo)
    return init_term + cls.arrival_rate * val


def _arrivals_in_system_integral(solution: FluidSolution, k: int,
                                 lo: float, hi: float) -> float:
    """Integral over [lo, hi] of G_k(w(v)) dv: arrivals still waiting."""
    if hi <= lo:
        return 0.0
    path = solution.workload
    surv = solution.model.classes[k].deadline.survival
    return numerics.integrate(lambda v: surv(path.at(v)), lo, hi, tol=QUAD_TOL)


def fluid_queue_length(solution: FluidSolution, k: int, t: float) -> float:
    """z_k(t): class k fluid mass in system at time t."""
    path = solution.workload
    path._check_time(t)
    cls = solution.model.classes[k]
    if t < path.w0:
        head = solution.initial.eval0(solution.model, k, upper_right(t, t))
        return head + cls.arrival_rate * cls.deadline.integrate_survival(0.0, t)
    w_tau = path(path.tau(t))
    return cls.arrival_rate * cls.deadline.integrate_survival(0.0, w_tau)


def fluid_nonabandoning(solution: FluidSolution, k: int, t: float) -> float:
    """n_k(t): fluid mass of jobs that will eventually be served."""
    path = solution.workload
    path._check_time(t)
    cls = solution.model.classes[k]
    if t < path.w0:
        head = solution.initial.mass_nonabandoning(solution.model, k, t)
        return head + cls.arrival_rate * _arrivals_in_system_integral(solution, k, 0.0, t)
    s = path.tau(t)
    return cls.arrival_rate * _arrivals_in_system_integral(solution, k, s, t)


def fluid_abandoning(solution: FluidSolution, k: int, t: float) -> float:
    """a_k(t): fluid mass of jobs that will renege before reaching service."""
    path = solution.workload
    path._check_time(t)
    cls = solution.model.classes[k]
    if t < path.w0:
        head = solution.initial.mass_abandoning(solution.model, k, t)
        window = cls.deadline.integrate_survival(0.0, t)
        waiting = _arrivals_in_system_integral(solution, k, 0.0, t)
        return head + cls.arrival_rate * (window - waiting)
    s = path.tau(t)
    window = cls.deadline.integrate_survival(0.0, t - s)
    waiting = _arrivals_in_system_integral(solution, k, s, t)
    return cls.arrival_rate * (window - waiting)


def fluid_age_count(solution: FluidSolution, k: int, t: float, u: float) -> float:
    """z_k(t, u): class k fluid mass of jobs in system at t with age >= u."""
    if not 0 <= u <= t:
        raise FluidModelError(f"need 0 <= u <= t, got u={u}, t={t}")
    path = solution.workload
    path._check_time(t)
    cls = solution.model.classes[k]
    if t < path.w0:
        edge = max(path(t - u) - u, 0.0)
        head = solution.initial.eval0(solution.model, k,
                                      Box(t, edge + t, t, math.inf))
        return head + cls.arrival_rate * cls.deadline.integrate_survival(u, t)
    w_tau = path(path.tau(t))
    if u >= w_tau:
        return 0.0
    return cls.arrival_rate * cls.deadline.integrate_survival(u, w_tau)


@dataclass(frozen=True)
class InvariantState:
    """The stationary fluid state at workload level w, with box evaluator."""

    model: FluidModelInput
    w: float

    def measure(self, k: int, box: Box) -> float:
        """Class k invariant mass on the box (zero at and beyond level w)."""
        return InvariantInitial(self.w).eval0(self.model, k, box)

    def queue_length(self, k: int) -> float:
        """z^w_k = lambda_k * integral of G_k over [0, w]."""
        cls = self.model.classes[k]
        return cls.arrival_rate * cls.deadline.integrate_survival(0.0, self.w)

    def nonabandoning(self, k: int) -> float:
        """n^w_k = lambda_k * w * G_k(w)."""
        cls = self.model.classes[k]
        return cls.arrival_rate * self.w * cls.deadline.survival(self.w)

    def abandoning(self, k: int) -> float:
        return self.queue_length(k) - self.nonabandoning(k)

    def as_initial(self) -> InvariantInitial:
        return InvariantInitial(self.w)


def invariant_state(model: FluidModelInput, w: float) -> InvariantState:
    """The invariant state at level w; w must lie in the equilibrium band."""
    InvariantInitial(w).validate(model)
    return InvariantState(model, w)


def residual_deadline_limit(model: FluidModelInput, k: int, t: float, c: float) -> float:
    """Limiting residual-deadline tail mass: lambda_k * integral_c^{c+t} G_k."""
    if c < 0:
        raise FluidModelError(f"c must be nonnegative, got {c}")
    if t < 0:
        raise FluidModelError(f"t must be nonnegative, got {t}")
    cls = model.classes[k]
    return cls.arrival_rate * cls.deadline.integrate_survival(c, c + t)


def corner_mass_fluid(solution: FluidSolution, t: float, x: float, y: float,
                      kappa: float) -> float:
    """Upper bound on total fluid mass near the corner set at (x, y).

    The kappa-enlarged corner is covered by a horizontal and a vertical
    strip (boxes), and both are evaluated exactly; overlap is counted
    twice, which only strengthens the bound. Used as a regularity
    diagnostic: the fluid state charges no lines, so this must shrink
    linearly with kappa.
    """
    if not kappa > 0:
        raise FluidModelError(f"kappa must be positive, got {kappa}")
    horiz = Box(max(x - kappa, 0.0), math.inf, max(y - kappa, 0.0), y + kappa)
    vert = Box(max(x - kappa, 0.0), x + kappa, max(y - kappa, 0.0), math.inf)
    return sum(eval_fluid(solution, k, t, horiz) + eval_fluid(solution, k, t, vert)
               for k in range(solution.model.K))
