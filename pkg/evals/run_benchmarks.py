#!/usr/bin/env python3
"""
run_benchmarks.py - Acceptance benchmarks for the sparse PLS toolkit.

Measures four dimensions:
  1. Model 1 direction: sparse fit MSE, selection size, support precision, components
  2. Model 2 sparsity: jointly sparse fit against the l1 baseline
  3. Determinism: byte-identical reports from repeated runs
  4. Full-scale Model 1 at p=5000                                  [LONG]

Usage:
  # From project root:
  python -m evals.run_benchmarks                       # desk-scale benchmarks
  python -m evals.run_benchmarks --long                # include the p=5000 profile
  python -m evals.run_benchmarks --category determinism --verbose
  python -m evals.run_benchmarks --trials 3 --output out.json

--trials overrides the trial count of every case for a quick smoke run;
thresholds are still checked but are noisier with fewer trials.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
import traceback
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Dict, List, Tuple

# ---------------------------------------------------------------------------
# Bootstrap: ensure project root is on sys.path so `sparsepls` can be imported
# ---------------------------------------------------------------------------

_HERE = os.path.dirname(os.path.abspath(__file__))
_ROOT = os.path.dirname(_HERE)
if _ROOT not in sys.path:
    sys.path.insert(0, _ROOT)

from evals.cases import ALL_CASES, LONG_CATEGORIES, TOTAL  # noqa: E402


# ---------------------------------------------------------------------------
# Result primitives
# ---------------------------------------------------------------------------

@dataclass
class CaseResult:
    id: str
    category: str
    label: str
    passed: bool
    details: Dict[str, Any] = field(default_factory=dict)
    seconds: float = 0.0

    def summary(self) -> str:
        icon = "PASS" if self.passed else "FAIL"
        return f"  [{icon}] [{self.id}] {self.label}  ({self.seconds:.1f}s)"


@dataclass
class CategoryMetrics:
    category: str
    total: int = 0
    passed: int = 0

    @property
    def accuracy(self) -> float:
        return self.passed / self.total if self.total else 0.0


def _config(case: dict, trials: int | None, threads: int | None):
    from sparsepls.schemas import ExperimentConfig

    payload = dict(case["config"])
    if trials is not None:
        payload["trials"] = trials
    if threads is not None:
        payload["threads"] = threads
    return ExperimentConfig.model_validate(payload)


def _check(details: Dict[str, Any], name: str, ok: bool, **values) -> bool:
    details[name] = {"ok": ok, **values}
    return ok


# ---------------------------------------------------------------------------
# Category runners
# ---------------------------------------------------------------------------

def check_model1(case: dict, report) -> Tuple[bool, Dict[str, Any]]:
    exp = case["expected"]
    sparse = report.aggregate(exp["sparse"])
    dense = report.aggregate(exp["dense"])
    details: Dict[str, Any] = {}
    results = [
        _check(details, "mse_not_worse", sparse.mean_test_mse is not None and dense.mean_test_mse is not None
               and sparse.mean_test_mse <= dense.mean_test_mse,
               sparse=sparse.mean_test_mse, dense=dense.mean_test_mse),
        _check(details, "selected", sparse.mean_selected is not None
               and sparse.mean_selected <= exp["max_mean_selected"],
               got=sparse.mean_selected, limit=exp["max_mean_selected"]),
        _check(details, "support_fraction", sparse.mean_support_fraction is not None
               and sparse.mean_support_fraction >= exp["min_support_fraction"],
               got=sparse.mean_support_fraction, limit=exp["min_support_fraction"]),
        _check(details, "components", sparse.mean_components is not None
               and sparse.mean_components <= exp["max_mean_components"],
               got=sparse.mean_components, limit=exp["max_mean_components"]),
    ]
    details["failed_trials"] = sparse.n_failed + dense.n_failed
    return all(results), details


def check_model2(case: dict, report) -> Tuple[bool, Dict[str, Any]]:
    exp = case["expected"]
    fewer = report.aggregate(exp["fewer"])
    more = report.aggregate(exp["more"])
    details: Dict[str, Any] = {}
    ok = _check(details, "fewer_selected", fewer.mean_selected is not None and more.mean_selected is not None
                and fewer.mean_selected < more.mean_selected,
                **{exp["fewer"]: fewer.mean_selected, exp["more"]: more.mean_selected})
    details["mse"] = {exp["fewer"]: fewer.mean_test_mse, exp["more"]: more.mean_test_mse}
    return ok, details


def check_full_scale(case: dict, report) -> Tuple[bool, Dict[str, Any]]:
    exp = case["expected"]
    agg = report.aggregate(exp["method"])
    lo, hi = exp["selected_range"]
    details: Dict[str, Any] = {}
    results = [
        _check(details, "mse", agg.mean_test_mse is not None
               and abs(agg.mean_test_mse - exp["mse_target"]) <= exp["mse_tolerance"],
               got=agg.mean_test_mse, target=exp["mse_target"]),
        _check(details, "selected", agg.mean_selected is not None and lo <= agg.mean_selected <= hi,
               got=agg.mean_selected, range=[lo, hi]),
    ]
    return all(results), details


CHECKS: Dict[str, Callable] = {
    "model1_direction": check_model1,
    "model2_sparsity": check_model2,
    "full_scale": check_full_scale,
}


def run_experiment_category(category: str, cases: list, trials: int | None, threads: int | None,
                            verbose: bool) -> Tuple[CategoryMetrics, List[CaseResult]]:
    from sparsepls.experiment import render_table, run_experiment

    metrics = CategoryMetrics(category=category, total=len(cases))
    results = []
    for c in cases:
        t0 = time.perf_counter()
        try:
            report = run_experiment(_config(c, trials, threads))
            passed, details = CHECKS[category](c, report)
            if verbose:
                print(render_table(report))
        except Exception:
            passed, details = False, {"exception": traceback.format_exc()}
        if passed:
            metrics.passed += 1
        results.append(CaseResult(id=c["id"], category=category, label=c["label"], passed=passed,
                                  details=details, seconds=time.perf_counter() - t0))
    return metrics, results


def run_determinism(cases: list, trials: int | None, threads: int | None,
                    verbose: bool) -> Tuple[CategoryMetrics, List[CaseResult]]:
    from sparsepls.experiment import run_experiment

    metrics = CategoryMetrics(category="determinism", total=len(cases))
    results = []
    for c in cases:
        t0 = time.perf_counter()
        details: Dict[str, Any] = {}
        try:
            config = _config(c, trials, threads)
            first = run_experiment(config).model_dump_json(indent=2)
            second = run_experiment(config).model_dump_json(indent=2)
            passed = _check(details, "identical", first == second, bytes=len(first.encode()))
        except Exception:
            passed = False
            details["exception"] = traceback.format_exc()
        if passed:
            metrics.passed += 1
        results.append(CaseResult(id=c["id"], category="determinism", label=c["label"], passed=passed,
                                  details=details, seconds=time.perf_counter() - t0))
    return metrics, results


# ---------------------------------------------------------------------------
# Report
# ---------------------------------------------------------------------------

def render_report(all_metrics: List[CategoryMetrics], all_results: List[CaseResult], elapsed: float) -> str:
    lines = ["", "=" * 64, "  Sparse PLS benchmarks", "=" * 64]
    for m in all_metrics:
        lines.append(f"  {m.category:<20} {m.passed}/{m.total}  ({m.accuracy * 100:.1f}%)")
    failed = [r for r in all_results if not r.passed]
    if failed:
        lines += ["", "  Failures:"]
        for r in failed:
            lines.append(r.summary())
            for name, value in r.details.items():
                if isinstance(value, dict) and value.get("ok") is False:
                    lines.append(f"      {name}: {json.dumps(value, default=str)}")
                elif name == "exception":
                    lines.append(f"      {value.strip().splitlines()[-1]}")
    passed = sum(m.passed for m in all_metrics)
    total = sum(m.total for m in all_metrics)
    lines += ["", f"  {passed}/{total} cases passed of {TOTAL} defined, {elapsed:.1f}s", "=" * 64]
    return "\n".join(lines)


def main():
    parser = argparse.ArgumentParser(
        description="Run sparse PLS acceptance benchmarks",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=__doc__,
    )
    parser.add_argument(
        "--long", action="store_true",
        help="Include the full-scale p=5000 profile",
    )
    parser.add_argument(
        "--category", default=None,
        choices=sorted(ALL_CASES.keys()),
        help="Run a single category only",
    )
    parser.add_argument(
        "--trials", type=int, default=None,
        help="Override the trial count of every case",
    )
    parser.add_argument(
        "--threads", type=int, default=None,
        help="Worker threads for trials",
    )
    parser.add_argument(
        "--output", default=None, metavar="FILE",
        help="Save full results as JSON to FILE",
    )
    parser.add_argument(
        "--verbose", action="store_true",
        help="Print each case result and its experiment table",
    )
    args = parser.parse_args()

    from sparsepls.logging_utils import configure_logging
    from sparsepls.settings import get_settings

    configure_logging(get_settings().log_level)

    t0 = time.time()
    all_metrics: List[CategoryMetrics] = []
    all_results: List[CaseResult] = []

    categories_to_run = [args.category] if args.category else list(ALL_CASES.keys())

    for cat in categories_to_run:
        cases = ALL_CASES[cat]
        if cat in LONG_CATEGORIES and not args.long:
            print(f"  [SKIP] {cat}  (pass --long to enable)")
            continue

        print(f"  Running {cat} ({len(cases)} cases)...", flush=True)
        if cat == "determinism":
            m, r = run_determinism(cases, args.trials, args.threads, args.verbose)
        else:
            m, r = run_experiment_category(cat, cases, args.trials, args.threads, args.verbose)
        all_metrics.append(m)
        all_results.extend(r)

        if args.verbose:
            for res in r:
                print(res.summary())

    elapsed = time.time() - t0
    print(render_report(all_metrics, all_results, elapsed))

    if args.output:
        payload = {
            "elapsed_s": round(elapsed, 2),
            "include_long": args.long,
            "metrics": [asdict(m) for m in all_metrics],
            "results": [asdict(r) for r in all_results],
        }
        with open(args.output, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, default=str)
        print(f"  Results saved -> {args.output}")

    sys.exit(0 if all(r.passed for r in all_results) else 1)


if __name__ == "__main__":
    main()
