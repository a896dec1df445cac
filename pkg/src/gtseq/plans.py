"""Sampling plans: lattice boundaries, pmf, random walks, path counts, diagnostics.

A sampling plan is a stopping set of lattice points for a multinomial random
walk from the origin.  Points are tuples ordered with the tracked outcome
counts first and the stopping (reference) class count last, so a
two-dimensional point reads (positives, negatives) for the classic design
that stops at the c-th negative pool.

The inverse multinomial distribution IMN_t(c, mu) arises from the rule-based
plan "stop when the reference coordinate reaches c" with reference-class
probability mu0 = 1 - sum(mu); its pmf over the tracked counts x is

    C(c + sum(x) - 1; c-1, x1, ..., xt) * mu0^c * prod(mu_i^x_i).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Callable, Iterator, NamedTuple, Sequence

import numpy as np

from .errors import DomainError, PlanError, StepCapExceededError
from .numerics import Number, as_fraction, multinomial_coeff

Point = tuple[int, ...]

DEFAULT_STEP_CAP = 10_000_000


# ---------------------------------------------------------------------------
# Plans
# ---------------------------------------------------------------------------


class SamplingPlan:
    """Base class: a boundary membership predicate over lattice points."""

    dim: int
    finite: bool

    def hits_boundary(self, point: Point) -> bool:
        raise NotImplementedError

    def boundary_points(self) -> Iterator[Point]:
        raise PlanError(f"{type(self).__name__} has no finite boundary enumeration")

    def _check_point(self, point: Point) -> Point:
        point = tuple(int(v) for v in point)
        if len(point) != self.dim:
            raise PlanError(f"point {point} has wrong dimension for plan of dim {self.dim}")
        if any(v < 0 for v in point):
            raise PlanError(f"point {point} has negative coordinates")
        return point


@dataclass(frozen=True)
class StopCountPlan(SamplingPlan):
    """Rule-based plan: stop when one coordinate reaches `count`.

    The default stopping axis is the last coordinate (the reference class),
    which yields inverse multinomial sampling.  Stopping on a tracked
    coordinate instead (axis 0 in two dimensions) is the design that counts
    reference draws until `count` tracked observations; it has no boundary
    point on the tracked-coordinate-zero axis.
    """

    dim: int
    count: int
    axis: int | None = None

    def __post_init__(self):
        if self.dim < 2:
            raise PlanError("plan dimension must be >= 2")
        if self.count < 1:
            raise PlanError("stop count must be >= 1")
        axis = self.dim - 1 if self.axis is None else self.axis
        if not 0 <= axis < self.dim:
            raise PlanError(f"axis {axis} out of range for dim {self.dim}")
        object.__setattr__(self, "axis", axis)

    @property
    def finite(self) -> bool:  # type: ignore[override]
        return False

    def hits_boundary(self, point: Point) -> bool:
        return point[self.axis] == self.count


@dataclass(frozen=True)
class FixedTotalPlan(SamplingPlan):
    """Fixed-sample-size design: stop when the total draw count reaches `total`."""

    dim: int
    total: int

    def __post_init__(self):
        if self.dim < 2:
            raise PlanError("plan dimension must be >= 2")
        if self.total < 1:
            raise PlanError("total must be >= 1")

    @property
    def finite(self) -> bool:  # type: ignore[override]
        return True

    def hits_boundary(self, point: Point) -> bool:
        return sum(point) == self.total

    def boundary_points(self) -> Iterator[Point]:
        for head in itertools.product(range(self.total + 1), repeat=self.dim - 1):
            rest = self.total - sum(head)
            if rest >= 0:
                yield head + (rest,)


@dataclass(frozen=True)
class ExplicitPlan(SamplingPlan):
    """Plan given by an explicit finite set of boundary points."""

    dim: int
    points: frozenset[Point]

    def __post_init__(self):
        if self.dim < 2:
            raise PlanError("plan dimension must be >= 2")
        pts = frozenset(tuple(int(v) for v in p) for p in self.points)
        if not pts:
            raise PlanError("explicit plan needs at least one boundary point")
        for p in pts:
            if len(p) != self.dim or any(v < 0 for v in p):
                raise PlanError(f"bad boundary point {p}")
        object.__setattr__(self, "points", pts)

    @property
    def finite(self) -> bool:  # type: ignore[override]
        return True

    def hits_boundary(self, point: Point) -> bool:
        return point in self.points

    def boundary_points(self) -> Iterator[Point]:
        return iter(sorted(self.points))


def imn_plan(t: int, c: int) -> StopCountPlan:
    """The inverse multinomial plan over t tracked classes: stop at c reference draws."""
    return StopCountPlan(dim=t + 1, count=c)


def load_plan(path: str | Path) -> ExplicitPlan:
    """Read an explicit plan: first line "dim <t+1>", then one point per line."""
    lines = Path(path).read_text().splitlines()
    rows = [ln.strip() for ln in lines if ln.strip() and not ln.strip().startswith("#")]
    if not rows or not rows[0].startswith("dim "):
        raise PlanError("plan file must start with a 'dim <t+1>' line")
    try:
        dim = int(rows[0].split()[1])
    except (IndexError, ValueError) as exc:
        raise PlanError(f"bad dim line {rows[0]!r}") from exc
    points = []
    for row in rows[1:]:
        try:
            points.append(tuple(int(tok) for tok in row.split()))
        except ValueError as exc:
            raise PlanError(f"bad boundary point line {row!r}") from exc
    return ExplicitPlan(dim, frozenset(points))


def save_plan(plan: SamplingPlan, path: str | Path) -> None:
    if not plan.finite:
        raise PlanError("only finite plans can be saved")
    lines = [f"dim {plan.dim}"]
    lines += [" ".join(str(v) for v in p) for p in sorted(plan.boundary_points())]
    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# Inverse multinomial pmf
# ---------------------------------------------------------------------------


def _check_mu(mu: Sequence[Number]) -> tuple[Number, ...]:
    mu = tuple(mu)
    if not mu:
        raise DomainError("mu must have at least one component")
    if any(v < 0 for v in mu):
        raise DomainError(f"negative class probability in {mu}")
    if sum(mu) >= 1:
        raise DomainError(f"tracked class probabilities {mu} must sum to less than 1")
    return mu


def imn_pmf(x: Sequence[int], c: int, mu: Sequence[Number]) -> float:
    """P(X = x) under IMN_t(c, mu), evaluated in log space."""
    mu = _check_mu(mu)
    x = tuple(int(v) for v in x)
    if len(x) != len(mu):
        raise DomainError(f"count vector {x} does not match mu of length {len(mu)}")
    if any(v < 0 for v in x):
        raise DomainError(f"negative count in {x}")
    if c < 1:
        raise DomainError("c must be >= 1")
    mu0 = 1 - sum(float(v) for v in mu)
    s = sum(x)
    log_p = math.lgamma(c + s) - math.lgamma(c) + c * math.log(mu0)
    for xi, mui in zip(x, mu):
        if xi == 0:
            continue
        mf = float(mui)
        if mf == 0.0:
            return 0.0
        log_p += xi * math.log(mf) - math.lgamma(xi + 1)
    return math.exp(log_p)


def imn_pmf_exact(x: Sequence[int], c: int, mu: Sequence[Number]) -> Fraction:
    """Exact rational pmf for rational mu."""
    mu = _check_mu(mu)
    x = tuple(int(v) for v in x)
    s = sum(x)
    coeff = multinomial_coeff(c + s - 1, (c - 1,) + x)
    mu0 = 1 - sum(as_fraction(v) for v in mu)
    out = Fraction(coeff) * mu0 ** c
    for xi, mui in zip(x, mu):
        if xi:
            out *= as_fraction(mui) ** xi
    return out


def iter_counts(t: int, max_total: int) -> Iterator[Point]:
    """All tracked-count vectors with total <= max_total, lexicographic."""
    if t == 1:
        for y in range(max_total + 1):
            yield (y,)
        return
    for head in itertools.product(range(max_total + 1), repeat=t - 1):
        s = sum(head)
        if s <= max_total:
            for last in range(max_total - s + 1):
                yield head + (last,)


# ---------------------------------------------------------------------------
# Simulation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WalkOutcome:
    """Terminal state of one simulated walk."""

    terminal: Point
    steps: int
    path: tuple[Point, ...] | None = None


def simulate(
    plan: SamplingPlan,
    step_probs: Sequence[float],
    seed: int,
    replicate_index: int,
    *,
    step_cap: int = DEFAULT_STEP_CAP,
    record_path: bool = False,
) -> WalkOutcome:
    """Run one walk; a pure function of (seed, replicate_index).

    Each replicate draws from its own RNG stream spawned from the master
    seed, so outcomes do not depend on scheduling or batch shape.  The step
    cap guards against non-terminating plans (inverse plans with a positive
    reference probability terminate almost surely).
    """
    probs = np.asarray(step_probs, dtype=float)
    if probs.shape != (plan.dim,):
        raise DomainError(f"step_probs must have length {plan.dim}")
    if (probs < 0).any() or abs(probs.sum() - 1.0) > 1e-9:
        raise DomainError("step_probs must be a probability vector")
    probs = probs / probs.sum()
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(replicate_index,)))
    position = [0] * plan.dim
    trail = [tuple(position)] if record_path else None
    steps = 0
    chunk = 256
    while True:
        draws = rng.choice(plan.dim, size=chunk, p=probs)
        for d in draws:
            position[d] += 1
            steps += 1
            point = tuple(position)
            if trail is not None:
                trail.append(point)
            if plan.hits_boundary(point):
                return WalkOutcome(point, steps, tuple(trail) if trail else None)
            if steps >= step_cap:
                raise StepCapExceededError(
                    f"walk exceeded {step_cap} steps without reaching the boundary"
                )


def simulate_imn_counts(
    c: int,
    mu: Sequence[float],
    n_replicates: int,
    seed: int | np.random.SeedSequence,
) -> np.ndarray:
    """Vectorized terminal tracked counts for the inverse multinomial plan.

    Distributionally identical to stepping walks under :func:`imn_plan`:
    the number of tracked draws before the c-th reference draw is negative
    binomial, and the split across tracked classes is multinomial.
    Deterministic in (seed, n_replicates).
    """
    mu = _check_mu(tuple(float(v) for v in mu))
    t = len(mu)
    rng = np.random.default_rng(
        seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    )
    out = np.zeros((n_replicates, t), dtype=np.int64)
    if n_replicates == 0:
        return out
    tracked = float(sum(mu))
    mu0 = 1.0 - tracked
    totals = rng.negative_binomial(c, mu0, size=n_replicates)
    if tracked > 0.0:
        split = np.asarray(mu, dtype=float) / tracked
        out = rng.multinomial(totals, split)
    return out


# ---------------------------------------------------------------------------
# Path counting
# ---------------------------------------------------------------------------


def path_count(plan: SamplingPlan, point: Point) -> int:
    """Number of admissible walks from the origin that stop exactly at `point`.

    Dynamic programming over the box below the point in exact integers; a
    walk is admissible when no proper prefix hits the boundary.
    """
    point = plan._check_point(point)
    if not plan.hits_boundary(point):
        raise PlanError(f"{point} is not a boundary point of the plan")
    counts: dict[Point, int] = {}
    for q in itertools.product(*(range(v + 1) for v in point)):
        if q == (0,) * plan.dim:
            counts[q] = 0 if plan.hits_boundary(q) and q != point else 1
            continue
        total = 0
        for axis in range(plan.dim):
            if q[axis] == 0:
                continue
            prev = q[:axis] + (q[axis] - 1,) + q[axis + 1 :]
            if plan.hits_boundary(prev):
                continue
            total += counts[prev]
        counts[q] = total
    return counts[point]


# ---------------------------------------------------------------------------
# Truncated expectation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExpectationResult:
    """Partial expectation over sample points with total count <= max_total."""

    value: float
    mass: float
    tail_prob: float
    tail_bound: float | None
    certified: bool
    converged: bool
    max_total: int
    n_points: int
    decay_ratio: float | None = None

    @property
    def flagged(self) -> bool:
        return not self.converged


def negbin_tail(c: int, mu0: float, max_total: int) -> float:
    """P(total tracked count > max_total) when the total is NB(c, mu0).

    Computed as 1 - fsum of pmf terms plus a 1e-12 slack absorbing float
    rounding of the partial sum, so the result is a safe upper bound at
    desk scale.
    """
    q = 1.0 - mu0
    term = mu0 ** c
    terms = [term]
    for s in range(max_total):
        term *= q * (c + s) / (s + 1)
        terms.append(term)
    return max(0.0, 1.0 - math.fsum(terms)) + 1e-12


def truncated_expectation(
    estimator: Callable[[Point], float],
    c: int,
    mu: Sequence[float],
    *,
    tol: float = 1e-8,
    max_total: int = 200,
    estimator_bound: float | None = None,
) -> ExpectationResult:
    """Sum estimator(x) * pmf(x) over all x with total <= max_total.

    With `estimator_bound` (a bound on |estimator| valid on the tail) the
    result carries a certified tail bound; without one the partial sum is
    returned with a shell-decay diagnostic and flagged as uncertified.
    """
    mu = _check_mu(tuple(float(v) for v in mu))
    t = len(mu)
    mu0 = 1.0 - sum(mu)
    contributions: list[float] = []
    masses: list[float] = []
    shell_values: list[float] = []
    n_points = 0
    for total in range(max_total + 1):
        shell = 0.0
        for head in itertools.product(range(total + 1), repeat=t - 1):
            s = sum(head)
            if s > total:
                continue
            x = head + (total - s,)
            p = imn_pmf(x, c, mu)
            masses.append(p)
            term = estimator(x) * p
            contributions.append(term)
            shell += abs(term)
            n_points += 1
        shell_values.append(shell)
    value = math.fsum(contributions)
    mass = math.fsum(masses)
    tail_prob = negbin_tail(c, mu0, max_total)
    if estimator_bound is not None:
        tail_bound = abs(estimator_bound) * tail_prob
        return ExpectationResult(
            value=value,
            mass=mass,
            tail_prob=tail_prob,
            tail_bound=tail_bound,
            certified=True,
            converged=tail_bound <= tol,
            max_total=max_total,
            n_points=n_points,
        )
    nonzero = [v for v in shell_values if v > 0]
    decay = None
    if len(nonzero) >= 2:
        decay = nonzero[-1] / nonzero[-2] if nonzero[-2] > 0 else math.inf
    scale = max(1.0, abs(value))
    converged = bool(
        shell_values
        and shell_values[-1] <= tol * scale
        and (decay is None or decay < 1.0)
    )
    return ExpectationResult(
        value=value,
        mass=mass,
        tail_prob=tail_prob,
        tail_bound=None,
        certified=False,
        converged=converged,
        max_total=max_total,
        n_points=n_points,
        decay_ratio=decay,
    )


# ---------------------------------------------------------------------------
# Diagnostics from the non-existence arguments
# ---------------------------------------------------------------------------


class AxisCheckResult(NamedTuple):
    count_on_axis: int
    passes: bool


def axis_boundary_check(plan: SamplingPlan) -> AxisCheckResult:
    """Count reachable boundary points with first coordinate zero (2-d plans).

    Exactly one such point is necessary for unbiased estimation under the
    plan: the all-reference walk must stop somewhere, and at exactly one
    place.  Designs that stop on the tracked coordinate have none.
    """
    if plan.dim != 2:
        raise PlanError("axis check is defined for 2-dimensional plans")
    if isinstance(plan, StopCountPlan):
        count = 1 if plan.axis == 1 else 0
    elif isinstance(plan, FixedTotalPlan):
        count = 1
    elif isinstance(plan, ExplicitPlan):
        # Only the lowest axis point is reachable; higher ones are shadowed.
        count = 1 if any(p[0] == 0 for p in plan.points) else 0
    else:
        raise PlanError(f"unsupported plan type {type(plan).__name__}")
    return AxisCheckResult(count, count == 1)


@dataclass(frozen=True)
class PolyFitResult:
    max_residual: float
    coefficients: dict[Point, float]
    rank: int
    rank_deficient: bool


def chebyshev_grid(lo: float, hi: float, n: int) -> np.ndarray:
    nodes = np.cos(np.pi * (2 * np.arange(n) + 1) / (2 * n))
    return (lo + hi) / 2 + (hi - lo) / 2 * nodes


def default_theta_domain(
    specificity: float = 1.0, sensitivity: float = 1.0, delta: float = 0.05
) -> tuple[float, float]:
    """Observation-probability range induced by the misclassification bounds."""
    return (1 - specificity + delta, sensitivity - delta)


def poly_representability(
    plan: SamplingPlan,
    target: Callable[[float], float],
    *,
    grid_size: int = 257,
    domain: tuple[float, float] = (0.05, 0.95),
) -> PolyFitResult:
    """Least-squares test of whether any estimator under a finite plan matches `target`.

    An estimator f over the boundary represents exactly the function
    sum_b f(b) K(b) theta^x_b (1-theta)^y_b, a polynomial; the best-fit
    maximum residual against `target` on a Chebyshev grid is therefore ~0
    iff the target is representable, and strictly positive otherwise
    (e.g. k-th roots under fixed designs).
    """
    if not plan.finite:
        raise PlanError("polynomial representability needs a finite plan")
    if plan.dim != 2:
        raise PlanError("representability check is implemented for 2-d plans")
    lo, hi = domain
    if not 0 < lo < hi < 1:
        raise DomainError(f"bad theta domain {domain}")
    boundary = sorted(plan.boundary_points())
    weights = [path_count(plan, b) for b in boundary]
    grid = chebyshev_grid(lo, hi, grid_size)
    design = np.empty((grid_size, len(boundary)))
    for j, (b, w) in enumerate(zip(boundary, weights)):
        x, y = b
        design[:, j] = w * grid ** x * (1 - grid) ** y
    targets = np.array([target(th) for th in grid])
    coeffs, _, rank, _ = np.linalg.lstsq(design, targets, rcond=None)
    residual = float(np.max(np.abs(design @ coeffs - targets)))
    return PolyFitResult(
        max_residual=residual,
        coefficients={b: float(f) for b, f in zip(boundary, coeffs)},
        rank=int(rank),
        rank_deficient=int(rank) < len(boundary),
    )
