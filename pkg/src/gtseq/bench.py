"""Benchmark harness and record output.

Grid points are data-parallel: every point draws its replicates from an RNG
stream spawned as (master seed, grid index), and records are emitted sorted
by grid index, so output is byte-identical regardless of the worker count.
"""

from __future__ import annotations

import csv
import io
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields

import numpy as np

from .config import ExperimentConfig, GridPoint
from .errors import ConfigError
from .estimators import (
    EstimatorId,
    mle_one,
    mle_two,
    scan_properness,
    unbiased_one,
    unbiased_one_misclass,
    unbiased_two,
    unbiased_two_misclass,
)
from .model import (
    IndepErrorParams,
    identifiability,
    independent_errors,
    observed_cell_probs,
    observed_pos_prob,
    pool_cell_probs,
)
from .plans import simulate_imn_counts
from .verify import verify_one, verify_two

CSV_HEADER = [
    "estimator", "p", "p10", "p01", "p11", "k", "c",
    "pi0", "pi1", "pi0_2", "pi1_2",
    "component", "sample", "replicates",
    "estimate", "bias", "mse", "se", "flags",
]


@dataclass
class EstimateRecord:
    """One output row: an estimator evaluation or a Monte Carlo summary."""

    estimator: str
    k: int
    c: int
    component: str
    p: float | None = None
    p10: float | None = None
    p01: float | None = None
    p11: float | None = None
    pi0: float | None = None
    pi1: float | None = None
    pi0_2: float | None = None
    pi1_2: float | None = None
    sample: str = ""
    replicates: int | None = None
    estimate: float | None = None
    bias: float | None = None
    mse: float | None = None
    se: float | None = None
    flags: str = ""

    def as_row(self) -> list[str]:
        def fmt(value) -> str:
            if value is None:
                return ""
            if isinstance(value, float):
                return format(value, ".17g")
            return str(value)

        return [fmt(getattr(self, name)) for name in CSV_HEADER]

    def as_json_obj(self) -> dict:
        return {name: getattr(self, name) for name in CSV_HEADER}


_FIELD_NAMES = {f.name for f in fields(EstimateRecord)}
assert set(CSV_HEADER) == _FIELD_NAMES, "CSV header out of sync with record fields"


def write_records(records, fmt: str, path: str | None) -> None:
    """Write CSV (fixed header) or JSON lines with identical field names.

    Floats are rendered with 17 significant digits, so values round-trip.
    """
    text = render_records(records, fmt)
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def render_records(records, fmt: str) -> str:
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for record in records:
            writer.writerow(record.as_row())
        return buf.getvalue()
    if fmt == "jsonl":
        return "".join(json.dumps(r.as_json_obj(), sort_keys=False) + "\n" for r in records)
    raise ValueError(f"unknown format {fmt!r}")


# ---------------------------------------------------------------------------
# Estimator resolution and tables
# ---------------------------------------------------------------------------


def _resolve_estimators(point: GridPoint, names: tuple[str, ...]) -> list[EstimatorId]:
    perfect = point.misclass is None or all(v == 1 for v in point.misclass)
    out: list[EstimatorId] = []
    for name in names:
        if name == "ub":
            if point.family == "one":
                out.append(EstimatorId.UB_ONE_PERFECT if perfect else EstimatorId.UB_ONE_MISCLASS)
            else:
                out.append(
                    EstimatorId.UB_TWO_PERFECT if perfect else EstimatorId.UB_TWO_MISCLASS_SERIES
                )
        elif name == "mle":
            out.append(EstimatorId.MLE_ONE if point.family == "one" else EstimatorId.MLE_TWO)
        else:
            est = EstimatorId(name)
            one_family = est in (
                EstimatorId.UB_ONE_PERFECT, EstimatorId.UB_ONE_MISCLASS, EstimatorId.MLE_ONE
            )
            if one_family != (point.family == "one"):
                raise ConfigError(f"estimator {name} does not match family '{point.family}'")
            out.append(est)
    return out


def _ub_one_perfect_table(max_y: int, c: int, k: int) -> np.ndarray:
    factors = 1.0 - 1.0 / (k * (c + np.arange(max(max_y, 0))))
    q_hat = np.concatenate(([1.0], np.cumprod(factors)))
    return 1.0 - q_hat


def _ub_one_misclass_table(max_y: int, c: int, k: int, spec_: float, sens: float) -> np.ndarray:
    return np.array(
        [float(unbiased_one_misclass(y, c, k, spec_, sens)) for y in range(max_y + 1)]
    )


def _summary(values: np.ndarray, truth: float) -> tuple[float, float, float, float]:
    n = len(values)
    mean = float(values.mean())
    bias = mean - truth
    mse = float(np.mean((values - truth) ** 2))
    se = float(values.std(ddof=1) / math.sqrt(n)) if n > 1 else math.nan
    return mean, bias, mse, se


def _base_record(point: GridPoint, estimator: str, component: str, **kw) -> EstimateRecord:
    common = dict(estimator=estimator, k=point.k, c=point.c, component=component)
    if point.family == "one":
        common["p"] = point.p[0]
        if point.misclass is not None:
            common["pi0"], common["pi1"] = point.misclass
    else:
        common["p10"], common["p01"], common["p11"] = point.p
        if point.misclass is not None:
            common["pi0"], common["pi1"], common["pi0_2"], common["pi1_2"] = point.misclass
    common.update(kw)
    return EstimateRecord(**common)


def _flags(**counts) -> str:
    return ";".join(f"{name}={n}" for name, n in counts.items() if n)


# ---------------------------------------------------------------------------
# Mode runners
# ---------------------------------------------------------------------------


def _bench_point_one(point: GridPoint, config: ExperimentConfig) -> list[EstimateRecord]:
    model = point.one_disease_model()
    theta = float(observed_pos_prob(model))
    seed_seq = np.random.SeedSequence(config.seed, spawn_key=(point.index,))
    counts = simulate_imn_counts(point.c, (theta,), config.replicates, seed_seq)[:, 0]
    records = []
    truth = point.p[0]
    if config.replicates == 0:
        return records
    for est in _resolve_estimators(point, config.estimators):
        max_y = int(counts.max())
        clamped = improper = 0
        if est is EstimatorId.UB_ONE_PERFECT:
            values = _ub_one_perfect_table(max_y, point.c, point.k)[counts]
        elif est is EstimatorId.UB_ONE_MISCLASS:
            spec_, sens = point.misclass
            table = _ub_one_misclass_table(max_y, point.c, point.k, spec_, sens)
            values = table[counts]
            improper = int(((values < 0) | (values > 1)).sum())
        else:
            spec_, sens = point.misclass if point.misclass else (1.0, 1.0)
            pairs = [mle_one(y, point.c, point.k, spec_, sens) for y in range(max_y + 1)]
            table = np.array([p.p_hat for p in pairs])
            clamp_table = np.array([p.clamped for p in pairs])
            values = table[counts]
            clamped = int(clamp_table[counts].sum())
        mean, bias, mse, se = _summary(values, truth)
        records.append(
            _base_record(
                point, est.value, "p",
                replicates=config.replicates, estimate=mean, bias=bias, mse=mse, se=se,
                flags=_flags(clamped=clamped, improper=improper),
            )
        )
    return records


def _two_component_tables(max_z: int, c: int, k: int) -> tuple[np.ndarray, np.ndarray]:
    """(total -> leading estimate, (offset, count) -> cross product table)."""
    factors = 1.0 - 1.0 / (k * (c + np.arange(max_z)))
    p00 = np.concatenate(([1.0], np.cumprod(factors)))
    offs = np.arange(max_z + 1)[:, None]
    j = np.arange(max_z)[None, :]
    cross_factors = 1.0 - 1.0 / (k * (c + offs + j))
    cross = np.ones((max_z + 1, max_z + 1))
    np.cumprod(cross_factors, axis=1, out=cross[:, 1:])
    return p00, cross


def _bench_point_two(point: GridPoint, config: ExperimentConfig) -> list[EstimateRecord]:
    model = point.two_disease_model()
    if model.misclass is None:
        cells = tuple(float(v) for v in pool_cell_probs(model))
    else:
        cells = tuple(float(v) for v in observed_cell_probs(model))
    step_probs = cells[:3]
    seed_seq = np.random.SeedSequence(config.seed, spawn_key=(point.index,))
    counts = simulate_imn_counts(point.c, step_probs, config.replicates, seed_seq)
    truths = [float(v) for v in model.prevalences()]
    component_names = ("p00", "p10", "p01", "p11")
    records = []
    if config.replicates == 0:
        return records
    for est in _resolve_estimators(point, config.estimators):
        z10, z01, z11 = counts[:, 0], counts[:, 1], counts[:, 2]
        totals = counts.sum(axis=1)
        max_z = int(totals.max())
        clamped = improper = 0
        if est is EstimatorId.UB_TWO_PERFECT:
            p00_table, cross = _two_component_tables(max_z, point.c, point.k)
            v00 = p00_table[totals]
            v10 = cross[z10, z01 + z11] - v00
            v01 = cross[z01, z10 + z11] - v00
            v11 = 1.0 - v00 - v10 - v01
            value_arrays = [v00, v10, v01, v11]
            improper = int(sum(((v < 0) | (v > 1)).sum() for v in value_arrays))
        elif est is EstimatorId.UB_TWO_MISCLASS_SERIES:
            if max_z > config.order:
                for name in component_names:
                    records.append(
                        _base_record(
                            point, est.value, name, replicates=config.replicates,
                            flags=f"error=order-exceeded({max_z}>{config.order})",
                        )
                    )
                continue
            cache: dict[tuple[int, int, int], tuple[float, ...]] = {}
            for z in map(tuple, np.unique(counts, axis=0)):
                cache[z] = tuple(
                    float(v)
                    for v in unbiased_two_misclass(
                        z, point.c, point.k, model.misclass, order=config.order
                    )
                )
            stacked = np.array([cache[tuple(z)] for z in counts])
            value_arrays = [stacked[:, i] for i in range(4)]
            improper = int(sum(((v < 0) | (v > 1)).sum() for v in value_arrays))
        else:  # MLE_TWO
            results = {}
            for z in map(tuple, np.unique(counts, axis=0)):
                results[z] = mle_two(z, point.c, point.k)
            stacked = np.array([results[tuple(z)].p for z in counts])
            clamp_arr = np.array([results[tuple(z)].clamped for z in counts])
            value_arrays = [stacked[:, i] for i in range(4)]
            clamped = int(clamp_arr.sum())
        for name, truth, values in zip(component_names, truths, value_arrays):
            mean, bias, mse, se = _summary(np.asarray(values, dtype=float), truth)
            records.append(
                _base_record(
                    point, est.value, name,
                    replicates=config.replicates, estimate=mean, bias=bias, mse=mse, se=se,
                    flags=_flags(clamped=clamped, improper=improper),
                )
            )
    return records


def _estimate_point(point: GridPoint, config: ExperimentConfig) -> list[EstimateRecord]:
    records = []
    for est in _resolve_estimators(point, config.estimators):
        for sample in config.samples:
            label = ":".join(str(v) for v in sample)
            if point.family == "one":
                y = sample[0]
                if est is EstimatorId.UB_ONE_PERFECT:
                    value, clamped = float(unbiased_one(y, point.c, point.k)), False
                elif est is EstimatorId.UB_ONE_MISCLASS:
                    spec_, sens = point.misclass
                    value = float(unbiased_one_misclass(y, point.c, point.k, spec_, sens))
                    clamped = False
                else:
                    spec_, sens = point.misclass if point.misclass else (1.0, 1.0)
                    value, clamped = mle_one(y, point.c, point.k, spec_, sens)
                flags = _flags(improper=int(not 0 <= value <= 1), clamped=int(clamped))
                records.append(
                    _base_record(point, est.value, "p", sample=label, estimate=value, flags=flags)
                )
            else:
                misclass = point.misclass_model()
                if est is EstimatorId.UB_TWO_PERFECT:
                    values = [float(v) for v in unbiased_two(sample, point.c, point.k)]
                    clamped = False
                elif est is EstimatorId.UB_TWO_MISCLASS_SERIES:
                    values = [
                        float(v)
                        for v in unbiased_two_misclass(
                            sample, point.c, point.k, misclass, order=config.order
                        )
                    ]
                    clamped = False
                else:
                    result = mle_two(sample, point.c, point.k)
                    values, clamped = list(result.p), result.clamped
                for name, value in zip(("p00", "p10", "p01", "p11"), values):
                    flags = _flags(improper=int(not 0 <= value <= 1), clamped=int(clamped))
                    records.append(
                        _base_record(
                            point, est.value, name, sample=label, estimate=value, flags=flags
                        )
                    )
    return records


def _scan_point(point: GridPoint, config: ExperimentConfig) -> list[EstimateRecord]:
    records = []
    for est in _resolve_estimators(point, config.estimators):
        kwargs = {}
        if point.family == "one" and point.misclass is not None:
            kwargs["specificity"], kwargs["sensitivity"] = point.misclass
        if point.family == "two":
            kwargs["misclass"] = point.misclass_model()
            kwargs["order"] = config.order
        violations = scan_properness(
            est, point.c, point.k,
            bound=config.bound, max_violations=config.max_violations, **kwargs,
        )
        for v in violations:
            records.append(
                _base_record(
                    point, est.value, v.component,
                    sample=":".join(str(i) for i in v.sample),
                    estimate=v.value, flags=f"violates={v.kind.value}",
                )
            )
    return records


def _verify_point(point: GridPoint, config: ExperimentConfig) -> list[EstimateRecord]:
    rows = []
    if point.family == "one":
        spec_, sens = point.misclass if point.misclass else (1.0, 1.0)
        rows = [verify_one(point.p[0], point.k, point.c, spec_, sens, tol=config.tol)]
    else:
        if point.misclass is not None:
            raise ConfigError("verify-unbiased mode covers perfect tests for family 'two'")
        rows = verify_two(*point.p, point.k, point.c, tol=config.tol or 1e-8)
    records = []
    for row in rows:
        detail = (
            f"certified-tail={row.tail_bound:.3g}"
            if row.certified
            else f"uncertified;decay={row.decay_ratio if row.decay_ratio else math.nan:.3g}"
        )
        records.append(
            _base_record(
                point, row.estimator, row.component,
                estimate=row.value, bias=row.value - row.target,
                flags=("ok;" if row.passed else "FAIL;") + detail,
            )
        )
    return records


def _simulate_point(point: GridPoint, config: ExperimentConfig) -> list[EstimateRecord]:
    if point.family == "one":
        model = point.one_disease_model()
        step_probs: tuple[float, ...] = (float(observed_pos_prob(model)),)
    else:
        model = point.two_disease_model()
        probs = pool_cell_probs(model) if model.misclass is None else observed_cell_probs(model)
        step_probs = tuple(float(v) for v in probs[:3])
    seed_seq = np.random.SeedSequence(config.seed, spawn_key=(point.index,))
    counts = simulate_imn_counts(point.c, step_probs, config.replicates, seed_seq)
    records = []
    for index, row in enumerate(counts):
        records.append(
            _base_record(
                point, "WALK", "terminal",
                sample=":".join(str(int(v)) for v in row),
                replicates=index,
                estimate=float(point.c + int(row.sum())),
            )
        )
    return records


def run_identify(config: ExperimentConfig) -> tuple[list[EstimateRecord], bool]:
    records = []
    for mis in config.misclass_grid:
        if mis is None:
            continue
        params = IndepErrorParams(*mis) if len(mis) == 4 else IndepErrorParams(mis[0], mis[1], 1.0, 1.0)
        ok, det = identifiability(independent_errors(params))
        records.append(
            EstimateRecord(
                estimator="IDENTIFIABILITY", k=0, c=0, component="det_contrast",
                pi0=params.specificity1, pi1=params.sensitivity1,
                pi0_2=params.specificity2, pi1_2=params.sensitivity2,
                estimate=float(det),
                flags="identifiable" if ok else "not-identifiable",
            )
        )
    return records, True


_POINT_RUNNERS = {
    "estimate": _estimate_point,
    "scan-properness": _scan_point,
    "verify-unbiased": _verify_point,
    "simulate": _simulate_point,
}


def run_mode(config: ExperimentConfig) -> tuple[list[EstimateRecord], bool]:
    """Dispatch a validated config; returns (records, all-checks-passed)."""
    if config.mode == "identify":
        return run_identify(config)
    if config.mode == "bench":
        runner = _bench_point_one if config.family == "one" else _bench_point_two
    else:
        runner = _POINT_RUNNERS[config.mode]
    points = config.grid_points()
    threads = config.threads or 1
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(lambda pt: runner(pt, config), points))
    else:
        chunks = [runner(pt, config) for pt in points]
    records = [record for chunk in chunks for record in chunk]
    ok = not any("FAIL" in record.flags for record in records)
    return records, ok
