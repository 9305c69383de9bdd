import numpy as np

from ..dirac import (
    Propagator,
    boundary_rows,
    inverse_identity_defect,
    propagate,
    weyl_gram,
)
from ..errors import OverflowDomainError, ValidationError
from ..potential import PotentialGrid


def test_zero_potential_is_diagonal_exponential():
    grid = PotentialGrid.zero(1, 2, 1.0, 20)
    z = 0.7 + 1.3j
    u = propagate(grid, 20, z)
    expected = np.diag([np.exp(1j * z), np.exp(-1j * z), np.exp(-1j * z)])
    assert np.allclose(u, expected, rtol=1e-12, atol=1e-14)


def test_constant_potential_matches_dense_exponential():
    from scipy.linalg import expm

    grid = PotentialGrid.constant(0.5, 1, 1, 1.0, 40)
    z = 2j
    coefficient = grid.signature.coefficient(np.array([[0.5]]), z)
    assert np.allclose(propagate(grid, 40, z), expm(coefficient), rtol=1e-10)


def test_inverse_is_conjugate_transpose_at_conj_z():
    grid = PotentialGrid.random_smooth(2, 1, 1.0, 60, seed=3)
    z = 0.4 + 2.5j
    assert inverse_identity_defect(grid, z) < 1e-9
    propagator = Propagator(grid)
    product = propagator.inverse_at(30, z) @ propagator.at(30, z)
    assert np.allclose(product, np.eye(3), atol=1e-9)


def test_gram_starts_at_j_and_decreases():
    grid = PotentialGrid.random_smooth(1, 2, 1.0, 80, norm_bound=1.0, seed=5)
    z = 0.3 + 2.0j
    gram = Propagator(grid).gram_profile(z)
    assert np.allclose(gram[0], grid.signature.j)
    assert np.allclose(gram, np.conj(np.swapaxes(gram, -1, -2)))
    # Im z > M makes the form non-increasing in x
    steps = gram[1:] - gram[:-1]
    largest = np.linalg.eigvalsh(steps).max()
    assert largest < 1e-9, f"gram increased by {largest}"
    assert np.allclose(weyl_gram(grid, 40, z), gram[40])


def test_real_z_is_unitary():
    grid = PotentialGrid.random_smooth(2, 2, 1.0, 50, seed=2)
    u = Propagator(grid).fundamental(1.5)
    products = np.conj(np.swapaxes(u, -1, -2)) @ u
    assert np.allclose(products, np.eye(4), atol=1e-10)


def test_boundary_rows_are_orthonormal():
    grid = PotentialGrid.random_smooth(1, 3, 1.0, 50, seed=8)
    rows = boundary_rows(grid)
    assert rows.beta.shape == (51, 1, 4)
    assert rows.gamma.shape == (51, 3, 4)
    assert max(rows.defects().values()) < 1e-10


def test_refinement_is_second_order():
    def potential(x):
        return [[0.4 * np.cos(3 * x), 0.1 + 0.3j * np.sin(2 * x)]]

    z = 0.5 + 1.5j
    ends = [
        propagate(PotentialGrid.from_function(potential, 1, 2, 1.0, n), n, z)
        for n in (25, 50, 100)
    ]
    first = np.linalg.norm(ends[1] - ends[0], 2)
    second = np.linalg.norm(ends[2] - ends[1], 2)
    assert second < first
    assert first / second >= 3, first / second


def test_boundary_rows_do_not_drift():
    grid = PotentialGrid.random_smooth(1, 2, 1.0, 400, seed=4)
    rows = boundary_rows(grid)
    beta_h = np.conj(np.swapaxes(rows.beta, -1, -2))
    gamma_h = np.conj(np.swapaxes(rows.gamma, -1, -2))
    beta_slope = np.gradient(rows.beta, grid.h, axis=0, edge_order=2)
    gamma_slope = np.gradient(rows.gamma, grid.h, axis=0, edge_order=2)
    assert np.abs(beta_slope @ beta_h).max() < 1e-4
    assert np.abs(gamma_slope @ gamma_h).max() < 1e-4
    # the off-diagonal product is the potential itself
    assert np.abs(beta_slope @ gamma_h - grid.samples).max() < 1e-3


def test_overflow_names_the_cell():
    grid = PotentialGrid.zero(1, 1, 1.0, 100)
    try:
        Propagator(grid).fundamental(800j)
    except OverflowDomainError as exc:
        assert exc.index is not None and 80 <= exc.index < 100, exc.index
        assert exc.exit_code == 3
    else:
        raise AssertionError("e^{800} must overflow")


def test_cache_is_bounded():
    grid = PotentialGrid.zero(1, 1, 1.0, 10)
    propagator = Propagator(grid, cache_size=2)
    first = propagator.fundamental(1j)
    propagator.fundamental(2j)
    propagator.fundamental(3j)
    assert len(propagator._cache) == 2
    assert 1j not in propagator._cache
    assert np.array_equal(propagator.fundamental(1j), first)


def test_index_is_checked():
    grid = PotentialGrid.zero(1, 1, 1.0, 10)
    try:
        propagate(grid, 11, 1j)
    except ValidationError as exc:
        assert exc.index == 11
    else:
        raise AssertionError("node 11 does not exist on a 10-cell grid")


if __name__ == "__main__":
    test_zero_potential_is_diagonal_exponential()
    test_constant_potential_matches_dense_exponential()
    test_inverse_is_conjugate_transpose_at_conj_z()
    test_gram_starts_at_j_and_decreases()
    test_real_z_is_unitary()
    test_boundary_rows_are_orthonormal()
    test_refinement_is_second_order()
    test_boundary_rows_do_not_drift()
    test_overflow_names_the_cell()
    test_cache_is_bounded()
    test_index_is_checked()
    print("============ ALL TESTS PASSED ============")
