import numpy as np

from ..errors import ValidationError
from ..potential import PotentialGrid
from ..snode import (
    Phi1Profile,
    SNodeTriple,
    factorization_check,
    filon_coefficients,
    forward_transform,
    identity_residual,
    observed_orders,
    resolvent_A,
    s_kernel,
    transfer_matrix,
    trapezoid_weights,
)


def _smooth_profile(n: int, l: float = 1.0) -> Phi1Profile:
    x = np.linspace(0.0, l, n + 1)
    samples = np.stack(
        [np.sin(x) + 0.3j * x**2, 0.5 * x * np.cos(2 * x)], axis=-1
    ).reshape(n + 1, 2, 1)
    return Phi1Profile.from_samples(samples, l / n)


def test_filon_series_matches_closed_form():
    for theta in (0.05, 0.08j, 0.03 - 0.06j):
        first, second = filon_coefficients(theta)
        decay = np.exp(-theta)
        exact_first = (1 - (1 + theta) * decay) / theta**2
        exact_second = (1 - decay) / theta - exact_first
        assert abs(first - exact_first) < 1e-10
        assert abs(second - exact_second) < 1e-10
    assert np.allclose(filon_coefficients(0.0), (0.5, 0.5))


def test_trapezoid_weights():
    assert np.allclose(trapezoid_weights(3, 0.5), [0.25, 0.5, 0.5, 0.25])
    assert np.allclose(trapezoid_weights(0, 0.5), [0.0])


def test_resolvent_of_constant_is_exact():
    h, n, z = 0.01, 100, 1.5 + 2j
    x = np.arange(n + 1) * h
    resolved = resolvent_A(np.ones((n + 1, 1, 1)), z, h)
    assert np.allclose(resolved[:, 0, 0], np.exp(-1j * x * z), atol=1e-12)
    same = np.arange(5.0)
    assert np.array_equal(resolvent_A(same, 0.0, h), same)


def test_forward_transform_of_linear_profile():
    l, z = 1.0, 0.5 + 3j
    profile = Phi1Profile.linear(np.array([[2.0 - 1j]]), l, 50)
    kappa = 2j * z
    exact = (2.0 - 1j) * (np.exp(kappa * l) * (l / kappa - 1 / kappa**2) + 1 / kappa**2)
    assert abs(forward_transform(profile, z)[0, 0] - exact) < 1e-12


def test_constant_potential_profile():
    profile = Phi1Profile.constant_potential(0.5, 1.0, 400)
    assert profile.samples[0, 0, 0] == 0
    assert abs(profile.derivative[0, 0, 0] + 0.5) < 1e-15
    slope = np.gradient(profile.samples[:, 0, 0], profile.h, edge_order=2)
    assert np.allclose(slope, profile.derivative[:, 0, 0], atol=1e-5)
    try:
        Phi1Profile.constant_potential(0.5j, 1.0, 10)
    except ValidationError:
        pass
    else:
        raise AssertionError("complex c has no exact profile here")


def test_profile_must_vanish_at_origin():
    samples = np.ones((5, 1, 1), dtype=complex)
    try:
        Phi1Profile(samples, samples, 0.25)
    except ValidationError:
        pass
    else:
        raise AssertionError("Φ1(0) != 0 must be rejected")


def test_zero_profile_gives_identity_kernel():
    kernel = s_kernel(Phi1Profile.zero(1, 2, 1.0, 10))
    assert np.allclose(kernel.blocks, 0)
    rhs = np.arange(22.0).reshape(11, 2)
    assert np.allclose(kernel.solve_leading(10, rhs), rhs)
    assert abs(kernel.min_eigenvalue() - 1) < 1e-12


def test_leading_solves_match_dense_systems():
    profile = _smooth_profile(40)
    kernel = s_kernel(profile)
    m2 = profile.m2
    rng = np.random.default_rng(1)
    for k in (1, 17, 40):
        weights = np.repeat(trapezoid_weights(k, profile.h), m2)
        size = (k + 1) * m2
        dense = np.eye(size) + kernel.dense_kernel()[:size, :size] * weights[None, :]
        rhs = rng.normal(size=(k + 1, m2, 3)) + 1j * rng.normal(size=(k + 1, m2, 3))
        solved = kernel.solve_leading(k, rhs)
        expected = np.linalg.solve(dense, rhs.reshape(size, 3)).reshape(k + 1, m2, 3)
        assert np.allclose(solved, expected, atol=1e-10), f"leading block {k}"
    assert np.allclose(kernel.solve_leading(0, np.ones((1, m2))), 1)


def test_kernel_is_hermitian_and_positive():
    kernel = s_kernel(Phi1Profile.constant_potential(0.5, 1.0, 100))
    dense = kernel.dense_kernel()
    assert np.allclose(dense, dense.conj().T)
    assert kernel.min_eigenvalue() > 0


def test_identity_residual_is_first_order():
    ns = [50, 100, 200]
    residuals = [
        identity_residual(SNodeTriple.from_profile(Phi1Profile.constant_potential(0.5, 1.0, n)))
        for n in ns
    ]
    orders = observed_orders(ns, residuals)
    assert min(orders) >= 0.9, orders
    assert np.allclose(observed_orders([10, 20], [1.0, 0.25]), [2.0])


def test_transfer_matrix_is_identity_at_origin():
    triple = SNodeTriple.from_profile(_smooth_profile(20))
    assert np.allclose(transfer_matrix(triple, 0, 1 + 1j), np.eye(3))
    assert np.allclose(transfer_matrix(triple, 20, 0.0), np.eye(3))


def test_factorization_converges():
    residuals = []
    for n in (100, 200):
        grid = PotentialGrid.constant(0.5, 1, 1, 1.0, n)
        profile = Phi1Profile.constant_potential(0.5, 1.0, n)
        residuals.append(factorization_check(grid, profile, n, 3j))
    assert residuals[1] < 1e-2, residuals
    assert residuals[0] / residuals[1] >= 1.5, residuals


def test_factorization_needs_matching_grids():
    grid = PotentialGrid.constant(0.5, 1, 1, 1.0, 20)
    try:
        factorization_check(grid, Phi1Profile.constant_potential(0.5, 1.0, 40), 20, 1j)
    except ValidationError:
        pass
    else:
        raise AssertionError("grids of different size must be rejected")


if __name__ == "__main__":
    test_filon_series_matches_closed_form()
    test_trapezoid_weights()
    test_resolvent_of_constant_is_exact()
    test_forward_transform_of_linear_profile()
    test_constant_potential_profile()
    test_profile_must_vanish_at_origin()
    test_zero_profile_gives_identity_kernel()
    test_leading_solves_match_dense_systems()
    test_kernel_is_hermitian_and_positive()
    test_identity_residual_is_first_order()
    test_transfer_matrix_is_identity_at_origin()
    test_factorization_converges()
    test_factorization_needs_matching_grids()
    print("============ ALL TESTS PASSED ============")
