"""Unbiasedness verification at desk scale.

Each check sums estimator * pmf over all sample points up to a truncation
total and compares against the true parameter.  Estimators that are provably
bounded get a certified tail (bound times the stopping-class tail
probability); the misclassified one-disease estimator is unbounded, so its
check reports a partial sum with a term-decay diagnostic instead.

The two-disease sums exploit that each component of the estimator depends
on at most two scalar summaries of the count vector, which collapses the
3-d lattice sum into 1-d/2-d sums over exactly the same truncation region
(the collapse identity is itself tested against the generic enumeration).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .estimators import EstimatorId, estimator_callable, unbiased_one_misclass
from .model import OneDiseaseModel, TwoDiseaseModel, observed_pos_prob, pool_cell_probs
from .plans import negbin_tail, truncated_expectation

# Bounds certified by the product structure of the closed forms: the
# perfect-test estimates lie in [0, 1]; each two-disease leading component
# is a difference of two values in (0, 1]; the complement is bounded by 4.
ONE_PERFECT_BOUND = 1.0
TWO_COMPONENT_BOUND = 1.0
TWO_COMPLEMENT_BOUND = 4.0


@dataclass(frozen=True)
class VerifyRow:
    """One truncated-expectation check of estimator against target."""

    estimator: str
    component: str
    target: float
    value: float
    tol: float
    tail_bound: float | None
    certified: bool
    max_total: int
    decay_ratio: float | None = None

    @property
    def error(self) -> float:
        return abs(self.value - self.target)

    @property
    def passed(self) -> bool:
        if self.certified:
            return self.error <= self.tol + (self.tail_bound or 0.0)
        return self.error <= self.tol and (self.decay_ratio or math.inf) < 1.0


def stopping_quantile(c: int, mu0: float, tail_target: float, cap: int = 4000) -> int:
    """Smallest N with P(total > N) <= tail_target for a NB(c, mu0) total."""
    q = 1.0 - mu0
    term = mu0 ** c
    acc = term
    n = 0
    while 1.0 - acc > tail_target and n < cap:
        term *= q * (c + n) / (n + 1)
        n += 1
        acc += term
    return n


def verify_one(
    p: float,
    k: int,
    c: int,
    specificity: float = 1.0,
    sensitivity: float = 1.0,
    *,
    tol: float | None = None,
    cap: int = 4000,
) -> VerifyRow:
    """Check E[p_hat] = p for the one-disease unbiased estimator."""
    model = OneDiseaseModel(p, k, c, specificity, sensitivity)
    theta = float(observed_pos_prob(model))
    mu0 = 1.0 - theta
    if model.is_perfect_test:
        tol = 1e-8 if tol is None else tol
        max_total = stopping_quantile(c, mu0, tol / (2 * ONE_PERFECT_BOUND), cap)
        result = truncated_expectation(
            estimator_callable(EstimatorId.UB_ONE_PERFECT, c, k),
            c,
            (theta,),
            tol=tol,
            max_total=max_total,
            estimator_bound=ONE_PERFECT_BOUND,
        )
        return VerifyRow(
            estimator=EstimatorId.UB_ONE_PERFECT.value,
            component="p",
            target=p,
            value=result.value,
            tol=tol,
            tail_bound=result.tail_bound,
            certified=True,
            max_total=result.max_total,
        )
    # Unbounded estimator: adaptive partial sum with decay diagnostic.
    tol = 1e-6 if tol is None else tol
    pmf = mu0 ** c
    contributions = []
    decay = None
    prev = None
    quiet = 0
    mean_total = c * theta / max(mu0, 1e-12)
    y = 0
    while y <= cap:
        est = float(unbiased_one_misclass(y, c, k, specificity, sensitivity))
        contrib = est * pmf
        contributions.append(contrib)
        magnitude = abs(contrib)
        if prev is not None and prev > 0 and magnitude > 0:
            decay = magnitude / prev
        if magnitude > 0:
            prev = magnitude
        quiet = quiet + 1 if magnitude < tol * 1e-3 else 0
        if quiet >= 8 and y > mean_total:
            break
        pmf *= theta * (c + y) / (y + 1)
        y += 1
    value = math.fsum(contributions)
    return VerifyRow(
        estimator=EstimatorId.UB_ONE_MISCLASS.value,
        component="p",
        target=p,
        value=value,
        tol=tol,
        tail_bound=None,
        certified=False,
        max_total=y,
        decay_ratio=decay,
    )


def _pool_factor_table(k: int, c: int, offset_max: int, count_max: int) -> np.ndarray:
    """T[a, m] = prod_{j<m} (1 - 1/(k(c + a + j))) for 0 <= a <= offset_max."""
    a = np.arange(offset_max + 1)[:, None]
    j = np.arange(count_max)[None, :]
    factors = 1.0 - 1.0 / (k * (c + a + j))
    table = np.ones((offset_max + 1, count_max + 1))
    np.cumprod(factors, axis=1, out=table[:, 1:])
    return table


def _neg_multinomial_2d_logpmf(c: int, mu0: float, pa: float, pb: float, n: int) -> np.ndarray:
    """log P(A=a, B=b) for the two-class collapse of an IMN model, on a (n+1)^2 grid."""
    lf = np.concatenate(([0.0], np.cumsum(np.log(np.arange(1, c + 2 * n + 1)))))
    a = np.arange(n + 1)[:, None]
    b = np.arange(n + 1)[None, :]
    out = (
        lf[c + a + b - 1]
        - lf[c - 1]
        - lf[a]
        - lf[b]
        + c * math.log(mu0)
        + a * math.log(pa)
        + b * math.log(pb)
    )
    return out


def verify_two(
    p10: float,
    p01: float,
    p11: float,
    k: int,
    c: int,
    *,
    tol: float = 1e-8,
    cap: int = 3000,
) -> list[VerifyRow]:
    """Check E[p_hat] = p componentwise for the two-disease unbiased estimator.

    Sums are taken over sum(z) <= N with N chosen so the certified tail is
    below tol/2.  The leading component depends only on the total count and
    each cross component only on (own count, sum of the other two), so the
    sums run over 1-d/2-d collapses of the count lattice.
    """
    model = TwoDiseaseModel(p10, p01, p11, k, c)
    cells = tuple(float(v) for v in pool_cell_probs(model))
    t10, t01, t11, mu0 = cells
    n = stopping_quantile(c, mu0, tol / (2 * TWO_COMPONENT_BOUND), cap)
    tail = negbin_tail(c, mu0, n)

    # Leading component: depends on the total only, NB(c, mu0) sum.
    totals = np.arange(n + 1)
    factors = 1.0 - 1.0 / (k * (c + np.arange(n)))
    p00_table = np.concatenate(([1.0], np.cumprod(factors)))
    log_nb = (
        np.concatenate(([0.0], np.cumsum(np.log(np.arange(1, c + n + 1)))))[c + totals - 1]
        - math.lgamma(c)
        - np.concatenate(([0.0], np.cumsum(np.log(np.arange(1, n + 1)))))[totals]
        + c * math.log(mu0)
        + totals * math.log(1.0 - mu0)
    )
    nb_pmf = np.exp(log_nb)
    e00 = float(p00_table @ nb_pmf)
    mass = float(np.sum(nb_pmf))

    tri = np.arange(n + 1)[:, None] + np.arange(n + 1)[None, :] <= n

    def cross_expectation(own_prob: float, rest_prob: float) -> float:
        logp = _neg_multinomial_2d_logpmf(c, mu0, own_prob, rest_prob, n)
        pmf2 = np.where(tri, np.exp(logp), 0.0)
        table = _pool_factor_table(k, c, n, n)
        own = np.arange(n + 1)[:, None]
        rest = np.arange(n + 1)[None, :]
        est = table[own, rest] - p00_table[np.minimum(own + rest, n)]
        return float(np.sum(est * pmf2))

    e10 = cross_expectation(t10, t01 + t11)
    e01 = cross_expectation(t01, t10 + t11)
    e11 = mass - e00 - e10 - e01

    p00, p10t, p01t, p11t = (float(v) for v in model.prevalences())
    rows = [
        VerifyRow("UB_TWO_PERFECT", "p00", p00, e00, tol, TWO_COMPONENT_BOUND * tail, True, n),
        VerifyRow("UB_TWO_PERFECT", "p10", p10t, e10, tol, TWO_COMPONENT_BOUND * tail, True, n),
        VerifyRow("UB_TWO_PERFECT", "p01", p01t, e01, tol, TWO_COMPONENT_BOUND * tail, True, n),
        VerifyRow("UB_TWO_PERFECT", "p11", p11t, e11, tol, TWO_COMPLEMENT_BOUND * tail, True, n),
    ]
    return rows
