"""
cases.py - Benchmark definitions for the sparse PLS toolkit.

Four categories:
  1. model1_direction   (1)  - Model 1 at n=100, p=500: sparse fit beats dense SIMPLS
  2. model2_sparsity    (1)  - Model 2 at n=100, p=500: jointly sparse fit selects fewer
                               variables than the l1 baseline
  3. determinism        (1)  - identical config and seed give byte-identical reports
  4. full_scale         (1)  - Model 1 at p=5000 against published magnitudes   [LONG]

Each case is a dict with:
  id        unique string identifier
  label     short description
  config    keyword arguments for ExperimentConfig (source given as a dict)
  expected  what the benchmark runner checks

LONG cases take hours and are skipped unless --long is passed.
"""

# ---------------------------------------------------------------------------
# Shared protocol: 10 seeded trials, 10-fold CV, K in {1,2,3}, 8-point
# relative lambda grid log-spaced over [0.002, 0.05] * lambda_max. With
# mu0 = 2000 the useful penalties sit two decades below lambda_max, where
# the library default grid places only two points.
# ---------------------------------------------------------------------------

_DESK = {
    "k_grid": [1, 2, 3],
    "folds": 10,
    "trials": 10,
    "seed": 2024,
    "lambda_grid": [0.002, 0.00317, 0.00502, 0.00796, 0.0126, 0.02, 0.0317, 0.05],
    "lambda_mode": "relative",
}

MODEL1_CASES = [
    {
        "id": "m1_001",
        "label": "Model 1, n=100, p=500: global_simpls vs simpls",
        "config": {**_DESK, "source": {"kind": "sim", "model_id": 1, "n": 100, "p": 500},
                   "methods": ["simpls", "global_simpls"]},
        "expected": {
            "sparse": "global_simpls",
            "dense": "simpls",
            "max_mean_selected": 150.0,
            "min_support_fraction": 0.6,
            "max_mean_components": 2.0,
        },
    },
]

MODEL2_CASES = [
    {
        "id": "m2_001",
        "label": "Model 2, n=100, p=500: global_simpls vs l1_spls selection size",
        "config": {**_DESK, "source": {"kind": "sim", "model_id": 2, "n": 100, "p": 500},
                   "methods": ["l1_spls", "global_simpls"]},
        "expected": {"fewer": "global_simpls", "more": "l1_spls"},
    },
]

DETERMINISM_CASES = [
    {
        "id": "det_001",
        "label": "Two runs of the same config serialize identically",
        "config": {"source": {"kind": "sim", "model_id": 4, "n": 60, "p": 400},
                   "methods": ["pls", "simpls", "l1_spls", "global_simpls"],
                   "k_grid": [1, 2], "folds": 5, "trials": 2, "seed": 7},
        "expected": {"identical": True},
    },
]

FULL_SCALE_CASES = [
    {
        "id": "full_001",
        "label": "Model 1, n=100, p=5000: published test MSE and selection size",
        "config": {**_DESK, "source": {"kind": "sim", "model_id": 1, "n": 100, "p": 5000},
                   "methods": ["pls", "global_simpls"], "threads": 4},
        "expected": {
            "method": "global_simpls",
            "mse_target": 2.82,
            "mse_tolerance": 0.4,
            "selected_range": [100.0, 600.0],
        },
    },
]

ALL_CASES = {
    "model1_direction": MODEL1_CASES,
    "model2_sparsity": MODEL2_CASES,
    "determinism": DETERMINISM_CASES,
    "full_scale": FULL_SCALE_CASES,
}

LONG_CATEGORIES = frozenset({"full_scale"})

TOTAL = sum(len(v) for v in ALL_CASES.values())
