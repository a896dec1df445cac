"""Plans: pmf vs enumeration, path counts vs brute force, walks, diagnostics."""

import math
from fractions import Fraction as F

import numpy as np
import pytest

from gtseq.errors import DomainError, PlanError, StepCapExceededError
from gtseq.estimators import EstimatorId, estimator_callable
from gtseq.plans import (
    ExplicitPlan,
    FixedTotalPlan,
    StopCountPlan,
    axis_boundary_check,
    default_theta_domain,
    imn_plan,
    imn_pmf,
    imn_pmf_exact,
    iter_counts,
    load_plan,
    negbin_tail,
    path_count,
    poly_representability,
    save_plan,
    simulate,
    simulate_imn_counts,
    truncated_expectation,
)


def brute_force_paths(plan, point):
    """DFS over all step sequences that stop exactly at `point`."""
    target_total = sum(point)
    hits = 0

    def walk(pos, steps):
        nonlocal hits
        if plan.hits_boundary(tuple(pos)):
            if tuple(pos) == tuple(point) and steps == target_total:
                hits += 1
            return
        if steps == target_total:
            return
        for axis in range(len(pos)):
            if pos[axis] < point[axis]:
                pos[axis] += 1
                walk(pos, steps + 1)
                pos[axis] -= 1

    walk([0] * plan.dim, 0)
    return hits


class TestPmf:
    def test_worked_examples(self):
        assert imn_pmf((0,), 2, (0.3,)) == pytest.approx(0.49, rel=1e-14)
        assert imn_pmf((1,), 2, (0.3,)) == pytest.approx(0.294, rel=1e-14)
        assert imn_pmf((1, 0, 0), 1, (0.2, 0.3, 0.1)) == pytest.approx(0.08, rel=1e-14)

    def test_exact_matches_log_space(self):
        mu = (F(1, 5), F(3, 10), F(1, 10))
        for x in iter_counts(3, 4):
            exact = imn_pmf_exact(x, 2, mu)
            approx = imn_pmf(x, 2, tuple(float(v) for v in mu))
            assert approx == pytest.approx(float(exact), rel=1e-12)

    def test_brute_force_path_enumeration_oracle(self):
        # P(X = x) equals (paths) * mu-monomial; enumerate the paths directly.
        c, mu = 2, (F(1, 4), F(1, 8))
        plan = imn_plan(2, c)
        for x in iter_counts(2, 3):
            point = x + (c,)
            monomial = (1 - sum(mu)) ** c * mu[0] ** x[0] * mu[1] ** x[1]
            assert imn_pmf_exact(x, c, mu) == brute_force_paths(plan, point) * monomial

    def test_invalid_mu_rejected(self):
        with pytest.raises(DomainError):
            imn_pmf((1,), 1, (1.2,))
        with pytest.raises(DomainError):
            imn_pmf((1, 1), 1, (0.6, 0.5))
        with pytest.raises(DomainError):
            imn_pmf((1,), 1, (-0.1,))

    def test_normalization_monotone(self):
        mu = (0.25, 0.15)
        partial = 0.0
        previous = 0.0
        for total in range(25):
            shell = sum(
                imn_pmf(x, 3, mu)
                for x in iter_counts(2, total)
                if sum(x) == total
            )
            partial += shell
            assert previous <= partial <= 1.0 + 1e-12
            previous = partial
        assert partial == pytest.approx(1.0, abs=1e-5)


class TestPathCount:
    def test_inverse_plan_worked_example(self):
        assert path_count(imn_plan(1, 2), (3, 2)) == 4  # C(4, 3)

    def test_axis_points_have_single_path(self):
        for c in (1, 2, 5):
            assert path_count(imn_plan(1, c), (0, c)) == 1

    def test_fixed_total_is_binomial(self):
        plan = FixedTotalPlan(2, 6)
        for x in range(7):
            assert path_count(plan, (x, 6 - x)) == math.comb(6, x)

    def test_brute_force_agreement_inverse(self):
        plan = imn_plan(1, 3)
        for x in range(5):
            assert path_count(plan, (x, 3)) == brute_force_paths(plan, (x, 3))

    def test_brute_force_agreement_explicit(self):
        plan = ExplicitPlan(2, frozenset({(0, 2), (1, 1), (2, 1), (3, 0)}))
        for point in plan.boundary_points():
            assert path_count(plan, point) == brute_force_paths(plan, point)

    def test_brute_force_agreement_three_dims(self):
        plan = imn_plan(2, 2)
        for point in [(1, 0, 2), (1, 1, 2), (2, 1, 2), (0, 0, 2)]:
            assert path_count(plan, point) == brute_force_paths(plan, point)

    def test_shadowed_point_counts_zero(self):
        plan = ExplicitPlan(2, frozenset({(0, 1), (0, 3)}))
        assert path_count(plan, (0, 1)) == 1
        assert path_count(plan, (0, 3)) == 0

    def test_non_boundary_rejected(self):
        with pytest.raises(PlanError):
            path_count(imn_plan(1, 2), (3, 1))


class TestSimulate:
    def test_deterministic_in_seed_and_replicate(self):
        plan = imn_plan(1, 2)
        a = simulate(plan, (0.3, 0.7), seed=42, replicate_index=11)
        b = simulate(plan, (0.3, 0.7), seed=42, replicate_index=11)
        assert a == b

    def test_replicates_differ(self):
        plan = imn_plan(1, 2)
        outcomes = {
            simulate(plan, (0.5, 0.5), seed=1, replicate_index=i).terminal for i in range(64)
        }
        assert len(outcomes) > 1

    def test_zero_tracked_probability_stops_immediately(self):
        outcome = simulate(imn_plan(1, 1), (0.0, 1.0), seed=3, replicate_index=0)
        assert outcome.terminal == (0, 1) and outcome.steps == 1

    def test_terminal_on_boundary_and_path_recorded(self):
        plan = imn_plan(1, 3)
        outcome = simulate(plan, (0.4, 0.6), seed=5, replicate_index=2, record_path=True)
        assert plan.hits_boundary(outcome.terminal)
        assert outcome.path[0] == (0, 0)
        assert outcome.path[-1] == outcome.terminal
        assert len(outcome.path) == outcome.steps + 1

    def test_step_cap_raises(self):
        blocked = StopCountPlan(2, 5, axis=0)
        with pytest.raises(StepCapExceededError):
            simulate(blocked, (0.0, 1.0), seed=0, replicate_index=0, step_cap=100)

    def test_bad_probs_rejected(self):
        with pytest.raises(DomainError):
            simulate(imn_plan(1, 1), (0.5, 0.4), seed=0, replicate_index=0)

    def test_batch_matches_pmf(self):
        counts = simulate_imn_counts(2, (0.3,), 100_000, seed=2024)[:, 0]
        freq_1 = float(np.mean(counts == 1))
        se = math.sqrt(0.294 * 0.706 / 100_000)
        assert abs(freq_1 - 0.294) < 4 * se

    def test_stepwise_matches_pmf(self):
        plan = imn_plan(1, 2)
        hits = sum(
            simulate(plan, (0.3, 0.7), seed=99, replicate_index=i).terminal[0] == 1
            for i in range(3000)
        )
        se = math.sqrt(0.294 * 0.706 / 3000)
        assert abs(hits / 3000 - 0.294) < 5 * se

    def test_batch_deterministic(self):
        a = simulate_imn_counts(1, (0.2, 0.1, 0.05), 500, seed=7)
        b = simulate_imn_counts(1, (0.2, 0.1, 0.05), 500, seed=7)
        assert (a == b).all()


class TestTruncatedExpectation:
    def test_constant_estimator_recovers_mass(self):
        result = truncated_expectation(lambda x: 1.0, 2, (0.3,), max_total=60, estimator_bound=1.0)
        assert result.certified
        assert result.value + result.tail_prob == pytest.approx(1.0, abs=1e-9)

    def test_unbiasedness_one_disease(self):
        # theta for p=0.1, k=2 perfect: 0.19
        fn = estimator_callable(EstimatorId.UB_ONE_PERFECT, 3, 2)
        result = truncated_expectation(fn, 3, (0.19,), tol=1e-8, max_total=80, estimator_bound=1.0)
        assert result.converged
        assert abs(result.value - 0.1) <= 1e-8 + result.tail_bound

    def test_unbiasedness_two_disease_components(self):
        from gtseq.model import TwoDiseaseModel, pool_cell_probs

        model = TwoDiseaseModel(0.1, 0.1, 0.05, 2, 3)
        cells = tuple(float(v) for v in pool_cell_probs(model))
        truths = dict(zip(("p00", "p10", "p01", "p11"), (float(v) for v in model.prevalences())))
        for component, truth in truths.items():
            fn = estimator_callable(EstimatorId.UB_TWO_PERFECT, 3, 2, component=component)
            result = truncated_expectation(
                fn, 3, cells[:3], max_total=45, estimator_bound=4.0
            )
            assert abs(result.value - truth) <= 1e-6 + result.tail_bound, component

    def test_uncertified_mode_reports_decay(self):
        fn = estimator_callable(
            EstimatorId.UB_ONE_MISCLASS, 2, 2, specificity=0.98, sensitivity=0.95
        )
        result = truncated_expectation(fn, 2, (0.1967,), tol=1e-6, max_total=70)
        assert not result.certified and result.tail_bound is None
        assert result.decay_ratio is not None and result.decay_ratio < 1
        assert result.converged
        assert result.value == pytest.approx(0.1, abs=1e-6)

    def test_unreachable_tolerance_flagged(self):
        result = truncated_expectation(
            lambda x: 1.0, 1, (0.5,), tol=1e-12, max_total=5, estimator_bound=1.0
        )
        assert result.flagged and not result.converged

    def test_negbin_tail_upper_bound(self):
        # exact tail for c=1: theta^(N+1)
        tail = negbin_tail(1, 0.7, 10)
        exact = 0.3 ** 11
        assert tail >= exact
        assert tail == pytest.approx(exact, abs=1e-11)


class TestAxisBoundaryCheck:
    def test_inverse_plan_passes(self):
        assert axis_boundary_check(imn_plan(1, 3)) == (1, True)

    def test_stop_on_tracked_axis_fails(self):
        assert axis_boundary_check(StopCountPlan(2, 3, axis=0)) == (0, False)

    def test_fixed_total_passes_necessary_condition(self):
        assert axis_boundary_check(FixedTotalPlan(2, 5)) == (1, True)

    def test_explicit_with_shadowed_axis_points(self):
        plan = ExplicitPlan(2, frozenset({(0, 2), (0, 5), (1, 1)}))
        assert axis_boundary_check(plan) == (1, True)

    def test_explicit_without_axis_points(self):
        plan = ExplicitPlan(2, frozenset({(1, 1), (2, 0)}))
        assert axis_boundary_check(plan) == (0, False)

    def test_dimension_guard(self):
        with pytest.raises(PlanError):
            axis_boundary_check(imn_plan(2, 1))


class TestPolyRepresentability:
    def test_linear_target_is_representable(self):
        fit = poly_representability(FixedTotalPlan(2, 5), lambda th: 1 - th)
        assert fit.max_residual < 1e-12
        assert not fit.rank_deficient

    def test_sqrt_target_is_not_representable(self):
        fit = poly_representability(FixedTotalPlan(2, 5), lambda th: math.sqrt(1 - th))
        assert fit.max_residual > 1e-4

    def test_misclassified_target_is_not_representable(self):
        spec_, sens = 0.95, 0.9
        nu = spec_ + sens - 1
        domain = default_theta_domain(spec_, sens)
        fit = poly_representability(
            FixedTotalPlan(2, 5),
            lambda th: ((sens - th) / nu) ** 0.5,
            domain=domain,
        )
        assert fit.max_residual > 1e-4

    def test_requires_finite_plan(self):
        with pytest.raises(PlanError):
            poly_representability(imn_plan(1, 2), lambda th: th)

    def test_rank_deficiency_reported(self):
        fit = poly_representability(FixedTotalPlan(2, 5), lambda th: th, grid_size=3)
        assert fit.rank_deficient


class TestPlanIO:
    def test_round_trip(self, tmp_path):
        plan = ExplicitPlan(2, frozenset({(0, 2), (1, 1), (2, 0)}))
        path = tmp_path / "plan.txt"
        save_plan(plan, path)
        loaded = load_plan(path)
        assert loaded == plan
        assert path.read_text().splitlines()[0] == "dim 2"

    def test_fixed_total_exports(self, tmp_path):
        plan = FixedTotalPlan(2, 3)
        path = tmp_path / "fixed.txt"
        save_plan(plan, path)
        loaded = load_plan(path)
        assert set(loaded.points) == set(plan.boundary_points())

    def test_malformed_files_rejected(self, tmp_path):
        bad = tmp_path / "bad.txt"
        bad.write_text("1 2\n")
        with pytest.raises(PlanError):
            load_plan(bad)
        bad.write_text("dim 2\n1 x\n")
        with pytest.raises(PlanError):
            load_plan(bad)

    def test_infinite_plan_not_savable(self, tmp_path):
        with pytest.raises(PlanError):
            save_plan(imn_plan(1, 2), tmp_path / "nope.txt")
