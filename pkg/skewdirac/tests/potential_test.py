import json
import os
import tempfile

import numpy as np

from ..errors import DomainError, ValidationError
from ..potential import (
    PotentialGrid,
    Signature,
    SpectralPoint,
    format_number,
    parse_value,
    read_numeric_csv,
)


def test_signature_blocks():
    signature = Signature(2, 1)
    assert np.allclose(np.diag(signature.j), [1, 1, -1])
    v = np.array([[1 + 2j], [3 - 1j]])
    big = signature.assemble(v)
    assert big.shape == (3, 3)
    assert np.allclose(big, big.conj().T), "V must be self-adjoint"
    assert np.allclose(big[:2, :2], 0) and np.allclose(big[2:, 2:], 0)

    stacked = signature.assemble(np.stack([v, 2 * v]))
    assert stacked.shape == (2, 3, 3)
    assert np.allclose(stacked[1], 2 * big)


def test_signature_rejects_empty_blocks():
    try:
        Signature(0, 1)
    except ValidationError:
        pass
    else:
        raise AssertionError("m1 = 0 must be rejected")


def test_coefficient_is_skew_for_real_z():
    signature = Signature(1, 2)
    v = np.array([[0.3 + 0.1j, -0.2j]])
    coefficient = signature.coefficient(v, 1.7)
    assert np.allclose(coefficient + coefficient.conj().T, 0)


def test_spectral_point_margin():
    point = SpectralPoint(1 + 2j, 1.5)
    assert abs(point.margin - 0.5) < 1e-15
    point.require_margin(0.25)
    try:
        point.require_margin(1.0, index=7)
    except DomainError as exc:
        assert exc.index == 7
        assert exc.exit_code == 3
    else:
        raise AssertionError("margin below the minimum must raise")


def test_constant_grid_defaults_norm_bound():
    grid = PotentialGrid.constant(0.5, 1, 1, 2.0, 10)
    assert grid.norm_bound == 0.5
    assert grid.h == 0.2
    assert grid.nodes[-1] == 2.0
    assert grid.midpoints.shape == (10, 1, 1)
    assert grid.cell_matrices().shape == (10, 2, 2)


def test_grid_rejects_small_bound():
    try:
        PotentialGrid.constant(0.5, 1, 1, 1.0, 10, norm_bound=0.4)
    except ValidationError as exc:
        assert "norm bound" in str(exc)
    else:
        raise AssertionError("M below max ||v|| must be rejected")


def test_grid_rejects_bad_shapes():
    for kwargs in (
        dict(m1=1, m2=1, l=1.0, n=1, samples=np.zeros((2, 1, 1))),
        dict(m1=1, m2=1, l=0.0, n=4, samples=np.zeros((5, 1, 1))),
        dict(m1=1, m2=2, l=1.0, n=4, samples=np.zeros((5, 1, 1))),
    ):
        try:
            PotentialGrid(**kwargs)
        except ValidationError:
            continue
        raise AssertionError(f"{kwargs} should be rejected")


def test_grid_reports_non_finite_node():
    samples = np.zeros((6, 1, 1), dtype=complex)
    samples[3] = np.nan
    try:
        PotentialGrid(1, 1, 1.0, 5, samples)
    except ValidationError as exc:
        assert exc.index == 3
    else:
        raise AssertionError("NaN samples must be rejected")


def test_from_function_uses_true_midpoints():
    grid = PotentialGrid.from_function(lambda x: x**2, 1, 1, 1.0, 4)
    assert np.allclose(grid.midpoints[:, 0, 0], (np.arange(4) + 0.5) ** 2 / 16)
    assert np.allclose(grid.samples[:, 0, 0], np.linspace(0, 1, 5) ** 2)


def test_step_switches_after_cut():
    grid = PotentialGrid.step(0.0, 1.0, 0.5, 1, 1, 1.0, 10)
    assert np.all(grid.samples[:6, 0, 0] == 0)
    assert np.all(grid.samples[6:, 0, 0] == 1)
    assert grid.norm_bound == 1.0


def test_random_smooth_respects_bound():
    for seed in range(3):
        grid = PotentialGrid.random_smooth(2, 3, 1.0, 50, norm_bound=2.0, seed=seed)
        assert abs(grid.peak_norm() - 1.8) < 1e-12
        assert grid.norm_bound == 2.0
    first = PotentialGrid.random_smooth(1, 1, 1.0, 20, seed=4)
    second = PotentialGrid.random_smooth(1, 1, 1.0, 20, seed=4)
    assert np.array_equal(first.samples, second.samples), "same seed, same potential"


def test_descriptor_kinds():
    zero = PotentialGrid.from_descriptor({"kind": "zero", "m1": 1, "m2": 2, "l": 1, "n": 8})
    assert zero.samples.shape == (9, 1, 2)
    assert zero.norm_bound == 0.0

    constant = PotentialGrid.from_descriptor(
        {"kind": "constant", "m1": 1, "m2": 1, "l": 1, "n": 8, "value": {"re": 0.3, "im": 0.4}}
    )
    assert np.allclose(constant.samples, 0.3 + 0.4j)
    assert abs(constant.norm_bound - 0.5) < 1e-15

    step = PotentialGrid.from_descriptor(
        {"kind": "step", "m1": 1, "m2": 1, "l": 1, "n": 8, "after": 1.0, "cut": 0.5}
    )
    assert step.samples[-1, 0, 0] == 1.0

    try:
        PotentialGrid.from_descriptor({"kind": "spline", "m1": 1, "m2": 1, "l": 1, "n": 8})
    except ValidationError:
        pass
    else:
        raise AssertionError("unknown kinds must be rejected")

    try:
        PotentialGrid.from_descriptor({"kind": "zero", "m1": 1, "l": 1, "n": 8})
    except ValidationError as exc:
        assert "m2" in str(exc)
    else:
        raise AssertionError("missing keys must be rejected")


def test_csv_descriptor_resolves_relative_path():
    grid = PotentialGrid.random_smooth(1, 2, 1.0, 12, seed=1)
    with tempfile.TemporaryDirectory() as tmp:
        grid.to_csv(os.path.join(tmp, "v.csv"))
        descriptor = os.path.join(tmp, "v.json")
        with open(descriptor, "w") as fh:
            json.dump({"kind": "csv", "m1": 1, "m2": 2, "l": 1.0, "path": "v.csv"}, fh)
        loaded = PotentialGrid.from_descriptor(descriptor)
    assert loaded.n == 12
    assert np.array_equal(loaded.samples, grid.samples), "17 digits reproduce every double"


def test_read_numeric_csv_skips_header():
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "table.csv")
        with open(path, "w") as fh:
            fh.write("a,b\n1,2\n3,4.5\n")
        table = read_numeric_csv(path)
    assert table.shape == (2, 2)
    assert table[1, 1] == 4.5


def test_parse_value_and_format():
    assert parse_value(2) == 2
    assert parse_value({"re": 1, "im": -1}) == 1 - 1j
    assert np.asarray(parse_value([[1, 2]])).shape == (1, 2)
    assert format_number(-0.0) == "0"
    assert format_number(0.1) == "0.10000000000000001"
    assert float(format_number(np.pi)) == np.pi


if __name__ == "__main__":
    test_signature_blocks()
    test_signature_rejects_empty_blocks()
    test_coefficient_is_skew_for_real_z()
    test_spectral_point_margin()
    test_constant_grid_defaults_norm_bound()
    test_grid_rejects_small_bound()
    test_grid_rejects_bad_shapes()
    test_grid_reports_non_finite_node()
    test_from_function_uses_true_midpoints()
    test_step_switches_after_cut()
    test_random_smooth_respects_bound()
    test_descriptor_kinds()
    test_csv_descriptor_resolves_relative_path()
    test_read_numeric_csv_skips_header()
    test_parse_value_and_format()
    print("============ ALL TESTS PASSED ============")
