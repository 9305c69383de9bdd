import json
import math
import os
import tempfile

import numpy as np

from ..errors import ValidationError
from ..potential import PotentialGrid
from ..verify import (
    CHECKS,
    CheckResult,
    ball_law_margins,
    check_ball_laws,
    check_constant,
    check_hea,
    check_nls,
    check_p9,
    check_p17,
    check_radius,
    check_roundtrip,
    check_zero,
    json_ready,
    report_json,
    run_suite,
    write_report,
)


def test_registry_order():
    assert list(CHECKS) == [
        "zero",
        "constant",
        "ball-laws",
        "radius",
        "p9",
        "p17",
        "hea",
        "roundtrip",
        "bm",
        "nls",
    ]


def test_zero_and_constant_checks_pass():
    for check in (check_zero, check_constant):
        result = check()
        assert result.passed, (result.check, result.residual)
        assert result.residual <= result.tolerance


def test_ball_laws_quick():
    result = check_ball_laws(seed=1, quick=True)
    assert result.passed, result.detail
    assert result.detail["potentials"] == 10
    assert set(result.detail["margins"]) == {"nesting", "rho_l_bound", "rho_r_bound", "non_expansive"}


def test_ball_law_margins_for_one_potential():
    grid = PotentialGrid.random_smooth(3, 2, 1.0, 60, seed=2)
    margins = ball_law_margins(grid, 0.2 + 3j, np.random.default_rng(0))
    assert min(margins.values()) >= -1e-9, margins
    assert margins["nesting"] > 0, "members of the outer ball lie strictly inside inner balls"


def test_radius_check_on_supplied_potential():
    grid = PotentialGrid.random_smooth(2, 2, 1.0, 50, seed=4)
    result = check_radius(grid=grid, z=1 + 2.5j)
    assert result.passed, result.residual


def test_p9_quick():
    result = check_p9(quick=True)
    assert result.passed, result.detail
    assert result.detail["min_eigenvalue"] > 0
    assert len(result.detail["orders"]) == 2


def test_p17_random_potential_converges_under_refinement():
    result = check_p17(seed=0)
    assert result.passed, result.detail
    random = result.detail["random"]
    assert len(random["residuals"]) == 2
    assert random["ratio"] >= 1.5, random
    assert result.detail["ratio"] >= 1.5


def test_roundtrip_error_shrinks_under_refinement():
    result = check_roundtrip(seed=0)
    assert result.passed, result.detail
    assert result.detail["levels"] == [(200, 100.0), (400, 200.0)]
    assert result.detail["random_ratio"] >= 1.5
    assert result.detail["random"]["relative_l2"] <= 5e-2


def test_hea_and_nls_checks():
    hea = check_hea()
    assert hea.passed, hea.detail
    assert hea.residual >= 1.6
    nls = check_nls()
    assert nls.passed, nls.detail


def test_run_suite_rejects_unknown_names():
    try:
        run_suite(["zero", "spectral-gap"])
    except ValidationError as exc:
        assert "spectral-gap" in str(exc)
    else:
        raise AssertionError("unknown checks must be rejected")


def test_run_suite_follows_registry_order():
    results = run_suite(["radius", "zero"], seed=0, quick=True)
    assert [result.check for result in results] == ["zero", "radius"]


def test_structural_tolerance_reaches_checks():
    results = run_suite(["radius"], seed=0, quick=True, tol_structural=1e-6)
    assert results[0].tolerance == 1e-6
    laws = check_ball_laws(seed=1, quick=True, tol=1e-4)
    assert laws.tolerance == -1e-4
    assert laws.passed


def test_report_is_deterministic():
    first = report_json(run_suite(["zero", "ball-laws"], seed=5, quick=True))
    second = report_json(run_suite(["zero", "ball-laws"], seed=5, quick=True))
    assert first == second
    entries = json.loads(first)
    assert set(entries[0]) == {"check", "residual", "tolerance", "pass", "detail"}


def test_json_ready_values():
    cleaned = json_ready({"a": np.float64(0.1), "b": [np.int64(2), math.inf], "c": np.bool_(True)})
    assert cleaned == {"a": 0.1, "b": [2, "inf"], "c": True}
    assert type(cleaned["c"]) is bool


def test_write_report():
    results = [CheckResult("zero", 0.0, 1e-10, True)]
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "report.json")
        write_report(results, path)
        with open(path) as fh:
            entries = json.load(fh)
    assert entries == [{"check": "zero", "detail": {}, "pass": True, "residual": 0.0, "tolerance": 1e-10}]


if __name__ == "__main__":
    test_registry_order()
    test_zero_and_constant_checks_pass()
    test_ball_laws_quick()
    test_ball_law_margins_for_one_potential()
    test_radius_check_on_supplied_potential()
    test_p9_quick()
    test_p17_random_potential_converges_under_refinement()
    test_roundtrip_error_shrinks_under_refinement()
    test_hea_and_nls_checks()
    test_run_suite_rejects_unknown_names()
    test_run_suite_follows_registry_order()
    test_structural_tolerance_reaches_checks()
    test_report_is_deterministic()
    test_json_ready_values()
    test_write_report()
    print("============ ALL TESTS PASSED ============")
