#!/usr/bin/env python3
"""Smoke test for the tdr_py extension module.

Build the module first:

    cargo build -p tdr-py --release

then run this script from the repository root (or any directory):

    python3 python/smoke_test.py
"""
import math
import shutil
import sys
import tempfile
from pathlib import Path


def import_extension():
    root = Path(__file__).resolve().parent.parent
    candidates = [
        root / "target" / "release" / "libtdr_py.so",
        root / "target" / "debug" / "libtdr_py.so",
        root / "target" / "release" / "libtdr_py.dylib",
        root / "target" / "debug" / "libtdr_py.dylib",
    ]
    built = next((p for p in candidates if p.exists()), None)
    if built is None:
        sys.exit("build the extension first: cargo build -p tdr-py --release")
    staging = Path(tempfile.mkdtemp(prefix="tdr_py_"))
    suffix = ".so" if built.suffix == ".so" else ".so"
    shutil.copy2(built, staging / f"tdr_py{suffix}")
    sys.path.insert(0, str(staging))
    import tdr_py

    return tdr_py


def main():
    tdr = import_extension()

    params = tdr.NetworkParams(density=0.1, p=0.5, alpha=3.0, beta=3.0)
    assert abs(params.rate - 2.0) < 1e-12, "beta = 3 gives 2 bits/sec/Hz"

    # Geometry constant: alpha = 4 gives pi^2 / 2 exactly.
    p4 = tdr.NetworkParams(0.1, 0.5, 4.0, 3.0)
    assert abs(tdr.outage_constant(p4) - math.pi**2 / 2) < 1e-12

    # Outage at the reference point.
    q = tdr.per_slot_outage(1.0, params)
    assert abs(q - 0.54623908739877) < 1e-10, q

    # Exact curve sits inside the bound bracket and increases with budget.
    last = 0.0
    for budget in range(5):
        exact = tdr.success_prob_single(budget, 1.0, params)
        lower = tdr.success_lower_bound_single(budget, 1.0, params)
        upper = tdr.success_upper_bound_single(budget, 1.0, params)
        assert lower <= exact + 1e-9 <= upper + 2e-9, (budget, lower, exact, upper)
        assert exact >= last
        last = exact

    profile = tdr.success_profile_single(4, 1.0, params)
    assert abs(sum(profile.per_slot) - profile.total) < 1e-12
    assert 1.0 <= profile.expected_delay <= 5.0

    tc = tdr.transmission_capacity_single(4, 1.0, params)
    assert tc.provenance == "exact"
    assert abs(tc.capacity * tc.delay - tc.density_rate * tc.success) < 1e-12

    # Budget allocation matches the known splits.
    assert tdr.allocate_budgets([1.0, 1.0], 4, params).integer_budgets == [2, 2]
    assert tdr.allocate_budgets([0.5, 1.5], 4, params).integer_budgets == [1, 3]

    # Hop-count scan prefers a single hop at this density.
    best, rows = tdr.optimal_hop_count(1.0, 10, params, 1.0, 8)
    assert best == 1 and len(rows) == 8

    # Reproducible simulation: identical seeds give identical estimates.
    plan = tdr.HopPlan.equidistant(1.0, 1, 4)
    a = tdr.estimate_success(plan, params, trials=2000, seed=11, region_radius=60.0)
    b = tdr.estimate_success(plan, params, trials=2000, seed=11, region_radius=60.0)
    assert a.p_success == b.p_success and a.mean_delay == b.mean_delay
    lo, hi = a.p_success_ci
    assert 0.0 <= lo < hi <= 1.0

    # Two-hop exact value is symmetric.
    ab = tdr.success_prob_two_hop_exact(1, 3, 0.5, 1.5, params)
    ba = tdr.success_prob_two_hop_exact(3, 1, 1.5, 0.5, params)
    assert abs(ab - ba) < 1e-12

    print("tdr_py smoke test: OK")


if __name__ == "__main__":
    main()
