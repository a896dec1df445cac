"""Closed-form unbiased estimators, MLE baselines, and the properness scanner.

The closed forms are implemented in their algebraically cancelled shape:
the leading factor of each product equals the reciprocal of its prefactor,
so the cancelled products below are defined everywhere (including the
removable 0/0 at k = 1, c = 1) and evaluate exactly over rationals.

Every closed form here is cross-checked in the test suite against the
series constructor in :mod:`gtseq.series`, which derives the same
estimators independently from Taylor coefficients.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable, NamedTuple

from .errors import IdentifiabilityError, InsufficientOrderError
from .model import MisclassModel, invert_cell_probs
from .numerics import Number, Scale, as_fraction
from .series import estimator_series_two, unbiased_exact, unbiased_from_series


class EstimatorId(enum.Enum):
    UB_ONE_PERFECT = "UB_ONE_PERFECT"
    UB_ONE_MISCLASS = "UB_ONE_MISCLASS"
    UB_TWO_PERFECT = "UB_TWO_PERFECT"
    UB_TWO_MISCLASS_SERIES = "UB_TWO_MISCLASS_SERIES"
    MLE_ONE = "MLE_ONE"
    MLE_TWO = "MLE_TWO"


class ViolationKind(enum.Enum):
    BELOW_ZERO = "below 0"
    ABOVE_ONE = "above 1"
    SIMPLEX_SUM = "simplex sum > 1"


@dataclass(frozen=True)
class PropernessViolation:
    """One estimator value falling outside the parameter space."""

    sample: tuple[int, ...]
    component: str
    value: float
    kind: ViolationKind

    def __post_init__(self):
        ok = {
            ViolationKind.BELOW_ZERO: self.value <= 0,
            ViolationKind.ABOVE_ONE: self.value >= 1,
            ViolationKind.SIMPLEX_SUM: self.value >= 1,
        }[self.kind]
        if not ok:
            raise ValueError(f"value {self.value} does not violate bound {self.kind.value}")


# ---------------------------------------------------------------------------
# One disease
# ---------------------------------------------------------------------------


def unbiased_one(y: int, c: int, k: int) -> Fraction:
    """Unbiased prevalence estimate for a perfect test after y positive pools.

    1 - prod_{i=0}^{y-1} (1 - 1/(k(c+i))), exact.  Values lie in [0, 1); the
    single boundary case k = c = 1 attains exactly 1 for y >= 1.
    """
    if y < 0 or c < 1 or k < 1:
        raise ValueError("require y >= 0, c >= 1, k >= 1")
    q_hat = Fraction(1)
    for i in range(y):
        q_hat *= 1 - Fraction(1, k * (c + i))
    return 1 - q_hat


def _misclass_sum(y: int, c: int, k: int, sensitivity: Fraction) -> Fraction:
    """The rational series part S(y) of the misclassified estimator.

    S(y) = sum_{n=0}^{y} C(y,n) sens^-n prod_{m<n}(m - 1/k) / prod_{u<n}(c+y-1-u),
    accumulated by the exact one-step ratio between consecutive terms.
    """
    xi = Fraction(1, k)
    term = Fraction(1)
    total = Fraction(1)
    for n in range(y):
        term *= Fraction(y - n, n + 1) * (n - xi) / (sensitivity * (c + y - 1 - n))
        total += term
    return total


def unbiased_one_misclass_parts(
    y: int, c: int, k: int, specificity: Number, sensitivity: Number
) -> tuple[Fraction, Scale]:
    """Exact decomposition p_hat = constant + radical of the misclassified estimator.

    The radical part is -(sens/nu)^(1/k) * S(y) carried symbolically, so sign
    and bound checks can be done exactly by comparing k-th powers.
    """
    spec_ = as_fraction(specificity)
    sens = as_fraction(sensitivity)
    nu = spec_ + sens - 1
    if nu <= 0:
        raise IdentifiabilityError(f"specificity + sensitivity - 1 must be positive, got {nu}")
    s = _misclass_sum(y, c, k, sens)
    return Fraction(1), Scale(-s, sens / nu, Fraction(1, k))


def unbiased_one_misclass(
    y: int, c: int, k: int, specificity: Number, sensitivity: Number
) -> Number:
    """Unbiased prevalence estimate under known misclassification.

    Reduces exactly to :func:`unbiased_one` at specificity = sensitivity = 1.
    Improper whenever the test errs: negative at y = 0 for specificity < 1,
    and unbounded in y for specificity = 1, sensitivity < 1.  Returns an
    exact Fraction when the radical collapses (specificity = 1), else float.
    """
    const, radical = unbiased_one_misclass_parts(y, c, k, specificity, sensitivity)
    if radical.is_rational:
        return const + radical.as_fraction()
    return float(const) + float(radical)


class MleOneResult(NamedTuple):
    p_hat: float
    clamped: bool


def mle_one(
    y: int, c: int, k: int, specificity: Number = 1, sensitivity: Number = 1
) -> MleOneResult:
    """Plug-in MLE baseline: invert the observation map at v_hat = y/(c+y).

    Proper by construction; clamping to [0, 1] is reported, not silent.
    """
    spec_ = float(specificity)
    sens = float(sensitivity)
    nu = spec_ + sens - 1
    if nu <= 0:
        raise IdentifiabilityError(f"specificity + sensitivity - 1 must be positive, got {nu}")
    v_hat = y / (c + y)
    radicand = (sens - v_hat) / nu
    if radicand <= 0:
        return MleOneResult(1.0, True)
    p_raw = 1 - radicand ** (1.0 / k)
    if p_raw < 0:
        return MleOneResult(0.0, True)
    if p_raw > 1:
        return MleOneResult(1.0, True)
    return MleOneResult(p_raw, False)


# ---------------------------------------------------------------------------
# Two diseases
# ---------------------------------------------------------------------------


def _descending_pool_product(k: int, c: int, offset: int, count: int) -> Fraction:
    """prod_{j=0}^{count-1} (1 - 1/(k(c + offset + j))), exact; empty product is 1."""
    out = Fraction(1)
    for j in range(count):
        out *= 1 - Fraction(1, k * (c + offset + j))
    return out


def unbiased_two(
    z: tuple[int, int, int], c: int, k: int
) -> tuple[Fraction, Fraction, Fraction, Fraction]:
    """Unbiased estimate of (p00, p10, p01, p11) for two traits, perfect tests.

    Components sum to one exactly (the last is the simplex complement).
    Improper: at z = (1, 1, 0) the three leading components exceed one in
    total for every k > 1.
    """
    z10, z01, z11 = z
    if min(z) < 0 or c < 1 or k < 1:
        raise ValueError("require z >= 0 componentwise, c >= 1, k >= 1")
    total = z10 + z01 + z11
    p00 = _descending_pool_product(k, c, 0, total)
    p10 = _descending_pool_product(k, c, z10, z01 + z11) - p00
    p01 = _descending_pool_product(k, c, z01, z10 + z11) - p00
    return (p00, p10, p01, 1 - p00 - p10 - p01)


@lru_cache(maxsize=64)
def _series_two_cached(k: int, c: int, order: int, misclass: MisclassModel | None):
    return {
        name: estimator_series_two(k, c, order, name, misclass)
        for name in ("00", "10", "01")
    }


def unbiased_two_misclass(
    z: tuple[int, int, int],
    c: int,
    k: int,
    misclass: MisclassModel | None,
    order: int = 64,
) -> tuple[Number, Number, Number, Number]:
    """Series-constructed unbiased estimate of (p00, p10, p01, p11) under misclassification.

    Requires a non-singular contrast matrix and sum(z) <= order.  With the
    identity misclassification model this reduces exactly to
    :func:`unbiased_two`.  Values are exact Fractions when no irrational
    radical survives (e.g. the identity case), floats otherwise.
    """
    z = tuple(int(v) for v in z)
    total = sum(z)
    if total > order:
        raise InsufficientOrderError(f"sum(z)={total} exceeds series order {order}")
    # `order` bounds what may be asked for; the expansion itself is built
    # lazily at the degree actually needed (rounded up to reuse the cache),
    # since truncation never changes lower-degree coefficients.
    build_order = min(order, max(8, -(-total // 8) * 8))
    series_by_component = _series_two_cached(k, c, build_order, misclass)
    out: list[Number] = []
    for name in ("00", "10", "01"):
        g = series_by_component[name]
        exact = unbiased_exact(g, c, z)
        out.append(exact if exact is not None else unbiased_from_series(g, c, z))
    return (out[0], out[1], out[2], 1 - out[0] - out[1] - out[2])


class MleTwoResult(NamedTuple):
    p: tuple[float, float, float, float]
    clamped: bool


def mle_two(z: tuple[int, int, int], c: int, k: int) -> MleTwoResult:
    """Plug-in MLE baseline for two traits: invert at v_hat = z/(c + sum(z)).

    The inversion radicands are strictly positive here, but the complement
    component can go negative; the vector is clamped to [0, 1] and
    renormalized onto the simplex, with clamping reported.
    """
    z10, z01, z11 = z
    total = c + z10 + z01 + z11
    v_hat = (z10 / total, z01 / total, z11 / total)
    raw = invert_cell_probs(v_hat, k)
    clipped = [min(1.0, max(0.0, float(v))) for v in raw]
    clamped = any(abs(a - float(b)) > 0.0 for a, b in zip(clipped, raw))
    s = sum(clipped)
    return MleTwoResult(tuple(v / s for v in clipped), clamped)


# ---------------------------------------------------------------------------
# Properness scanner
# ---------------------------------------------------------------------------


def _one_disease_violation(
    y: int, c: int, k: int, specificity: Fraction, sensitivity: Fraction
) -> PropernessViolation | None:
    """Exact-sign check of the one-disease estimate at sample y."""
    if specificity == 1 and sensitivity == 1:
        p_hat = unbiased_one(y, c, k)
        if p_hat < 0:
            return PropernessViolation((y,), "p", float(p_hat), ViolationKind.BELOW_ZERO)
        if p_hat > 1:
            return PropernessViolation((y,), "p", float(p_hat), ViolationKind.ABOVE_ONE)
        return None
    nu = specificity + sensitivity - 1
    s = _misclass_sum(y, c, k, sensitivity)
    # p_hat = 1 - (sens/nu)^(1/k) * s ; compare via k-th powers, exactly.
    if s < 0:
        value = 1 + float(Scale(-s, sensitivity / nu, Fraction(1, k)))
        return PropernessViolation((y,), "p", value, ViolationKind.ABOVE_ONE)
    if s > 0 and (sensitivity / nu) * s ** k > 1:
        value = 1 + float(Scale(-s, sensitivity / nu, Fraction(1, k)))
        return PropernessViolation((y,), "p", value, ViolationKind.BELOW_ZERO)
    return None


def _iter_simplex_counts(bound: int):
    """All (z10, z01, z11) with total <= bound in lexicographic order."""
    for z10 in range(bound + 1):
        for z01 in range(bound + 1 - z10):
            for z11 in range(bound + 1 - z10 - z01):
                yield (z10, z01, z11)


def scan_properness(
    estimator: EstimatorId,
    c: int,
    k: int,
    *,
    specificity: Number = 1,
    sensitivity: Number = 1,
    misclass: MisclassModel | None = None,
    bound: int = 100,
    max_violations: int | None = None,
    order: int | None = None,
) -> list[PropernessViolation]:
    """Enumerate sample points with total count <= bound and record violations.

    Enumeration is lexicographic, so reports are reproducible.  Bound checks
    are exact (rational comparisons, with radicals compared via k-th powers)
    for all estimators except UB_TWO_MISCLASS_SERIES, whose mixed-radical
    sums are compared in floating point.  `max_violations` stops the scan
    early once that many violations are recorded, which keeps scans of
    divergent estimators affordable.

    MLE baselines are proper by construction and always yield an empty list.
    """
    if bound < 0:
        raise ValueError("bound must be >= 0")
    violations: list[PropernessViolation] = []

    def full() -> bool:
        return max_violations is not None and len(violations) >= max_violations

    if estimator in (EstimatorId.MLE_ONE, EstimatorId.MLE_TWO):
        return violations

    if estimator in (EstimatorId.UB_ONE_PERFECT, EstimatorId.UB_ONE_MISCLASS):
        spec_ = as_fraction(specificity) if estimator is EstimatorId.UB_ONE_MISCLASS else Fraction(1)
        sens = as_fraction(sensitivity) if estimator is EstimatorId.UB_ONE_MISCLASS else Fraction(1)
        for y in range(bound + 1):
            hit = _one_disease_violation(y, c, k, spec_, sens)
            if hit is not None:
                violations.append(hit)
                if full():
                    break
        return violations

    if estimator is EstimatorId.UB_TWO_PERFECT:
        for z in _iter_simplex_counts(bound):
            est = unbiased_two(z, c, k)
            for name, value in zip(("p00", "p10", "p01", "p11"), est):
                if value < 0:
                    violations.append(
                        PropernessViolation(z, name, float(value), ViolationKind.BELOW_ZERO)
                    )
                elif value > 1:
                    violations.append(
                        PropernessViolation(z, name, float(value), ViolationKind.ABOVE_ONE)
                    )
            lead = est[0] + est[1] + est[2]
            if lead > 1:
                violations.append(
                    PropernessViolation(z, "p00+p10+p01", float(lead), ViolationKind.SIMPLEX_SUM)
                )
            if full():
                break
        return violations

    if estimator is EstimatorId.UB_TWO_MISCLASS_SERIES:
        n = order if order is not None else bound
        for z in _iter_simplex_counts(bound):
            est = unbiased_two_misclass(z, c, k, misclass, order=max(n, bound))
            values = [float(v) for v in est]
            for name, value in zip(("p00", "p10", "p01", "p11"), values):
                if value < 0:
                    violations.append(PropernessViolation(z, name, value, ViolationKind.BELOW_ZERO))
                elif value > 1:
                    violations.append(PropernessViolation(z, name, value, ViolationKind.ABOVE_ONE))
            lead = values[0] + values[1] + values[2]
            if lead > 1:
                violations.append(
                    PropernessViolation(z, "p00+p10+p01", lead, ViolationKind.SIMPLEX_SUM)
                )
            if full():
                break
        return violations

    raise ValueError(f"unknown estimator {estimator}")


def simplex_excess_at_one_one_zero(c: int, k: int) -> Fraction:
    """Exact excess sum(leading three estimates) - 1 at z = (1, 1, 0).

    Equals (1/(kc)) * (1 - (c + 1/k)/(c + 1)); positive for every k > 1 and
    zero at k = 1.
    """
    est = unbiased_two((1, 1, 0), c, k)
    return est[0] + est[1] + est[2] - 1


def estimator_callable(
    estimator: EstimatorId,
    c: int,
    k: int,
    *,
    specificity: Number = 1,
    sensitivity: Number = 1,
    misclass: MisclassModel | None = None,
    order: int = 64,
    component: str | None = None,
) -> Callable[[tuple[int, ...]], float]:
    """Uniform sample-point -> float view of any estimator, for expectation sums.

    `component` picks one of p00/p10/p01/p11 for the two-disease estimators
    (or "p" / None for one disease).
    """
    comp_index = {"p00": 0, "p10": 1, "p01": 2, "p11": 3}

    if estimator is EstimatorId.UB_ONE_PERFECT:
        return lambda x: float(unbiased_one(x[0], c, k))
    if estimator is EstimatorId.UB_ONE_MISCLASS:
        return lambda x: float(unbiased_one_misclass(x[0], c, k, specificity, sensitivity))
    if estimator is EstimatorId.MLE_ONE:
        return lambda x: mle_one(x[0], c, k, specificity, sensitivity).p_hat

    if component not in comp_index:
        raise ValueError(f"two-disease estimators need component in {sorted(comp_index)}")
    idx = comp_index[component]
    if estimator is EstimatorId.UB_TWO_PERFECT:
        return lambda x: float(unbiased_two(x, c, k)[idx])
    if estimator is EstimatorId.UB_TWO_MISCLASS_SERIES:
        return lambda x: float(unbiased_two_misclass(x, c, k, misclass, order)[idx])
    if estimator is EstimatorId.MLE_TWO:
        return lambda x: mle_two(x, c, k).p[idx]
    raise ValueError(f"unknown estimator {estimator}")
