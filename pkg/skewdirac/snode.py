import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.linalg import LinAlgError, cholesky, solve_triangular
from scipy.special import iv

from .dirac import Propagator
from .errors import CholeskyError, ValidationError
from .potential import PotentialGrid

logging.basicConfig(level=logging.INFO, format="%(levelname)s: %(message)s")
logger = logging.getLogger(__name__)

SERIES_THRESHOLD = 0.1
SERIES_TERMS = 12


def filon_coefficients(theta: complex) -> Tuple[complex, complex]:
    """
    Weights of e^{-theta v} against v and 1 - v on [0, 1].

    Returns:
        Tuple[complex, complex]: (int v e^{-theta v} dv, int (1 - v) e^{-theta v} dv).
    """
    theta = complex(theta)
    if abs(theta) < SERIES_THRESHOLD:
        first, second = 0j, 0j
        term = 1.0 + 0j
        for k in range(SERIES_TERMS):
            first += term / (k + 2)
            second += term / ((k + 1) * (k + 2))
            term *= -theta / (k + 1)
        return first, second
    decay = np.exp(-theta)
    first = (1.0 - (1.0 + theta) * decay) / theta**2
    return first, (1.0 - decay) / theta - first


@dataclass
class Phi1Profile:
    """Samples of the m2 x m1 profile Φ1 and of its derivative on the nodes of [0, l]."""

    samples: np.ndarray
    derivative: np.ndarray
    h: float
    diagnostics: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=complex)
        self.derivative = np.asarray(self.derivative, dtype=complex)
        if self.samples.ndim != 3 or self.samples.shape != self.derivative.shape:
            raise ValidationError(
                f"profile arrays must share a (n + 1, m2, m1) shape, got "
                f"{self.samples.shape} and {self.derivative.shape}",
                module=__name__,
            )
        if self.samples.shape[0] < 3:
            raise ValidationError("profile needs at least two cells", module=__name__)
        if np.abs(self.samples[0]).max() > 1e-12:
            raise ValidationError("profile must vanish at x = 0", module=__name__)

    @property
    def n(self) -> int:
        return self.samples.shape[0] - 1

    @property
    def m1(self) -> int:
        return self.samples.shape[2]

    @property
    def m2(self) -> int:
        return self.samples.shape[1]

    @property
    def l(self) -> float:
        return self.n * self.h

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.n + 1) * self.h

    def pi_columns(self) -> np.ndarray:
        """Values of [Φ1(x) I] at every node, shape (n + 1, m2, m)."""
        identity = np.broadcast_to(np.eye(self.m2), (self.n + 1, self.m2, self.m2))
        return np.concatenate([self.samples, identity], axis=-1)

    @classmethod
    def from_samples(cls, samples: np.ndarray, h: float) -> "Phi1Profile":
        """Snap Φ1(0) to zero and differentiate to second order, one-sided at the ends."""
        samples = np.array(samples, dtype=complex)
        samples[0] = 0.0
        derivative = np.gradient(samples, h, axis=0, edge_order=2)
        return cls(samples, derivative, h)

    @classmethod
    def zero(cls, m1: int, m2: int, l: float, n: int) -> "Phi1Profile":
        samples = np.zeros((n + 1, m2, m1), dtype=complex)
        return cls(samples, samples.copy(), l / n)

    @classmethod
    def linear(cls, slope: np.ndarray, l: float, n: int) -> "Phi1Profile":
        slope = np.atleast_2d(np.asarray(slope, dtype=complex))
        x = np.linspace(0.0, l, n + 1)
        samples = x[:, None, None] * slope
        derivative = np.broadcast_to(slope, samples.shape).copy()
        return cls(samples, derivative, l / n)

    @classmethod
    def constant_potential(
        cls, c: float, l: float, n: int, terms: int = 80
    ) -> "Phi1Profile":
        """
        Exact profile of the scalar potential v = c (real).

        Φ1'(x) = -I_1(2 c x) / x, so Φ1 is the odd power series
        -sum c^{2k+1} x^{2k+1} / ((2k + 1) k! (k + 1)!).
        """
        if np.iscomplexobj(c) and np.imag(c) != 0:
            raise ValidationError(
                "exact profile is available for real c only", module=__name__
            )
        c = float(np.real(c))
        x = np.linspace(0.0, l, n + 1)
        cx = c * x
        term = cx.copy()
        total = term.copy()
        for k in range(terms):
            term = term * cx**2 * (2 * k + 1) / ((2 * k + 3) * (k + 1) * (k + 2))
            total += term
        with np.errstate(divide="ignore", invalid="ignore"):
            derivative = np.where(x > 0, -iv(1, 2 * cx) / np.where(x > 0, x, 1.0), -c)
        return cls(
            (-total).reshape(n + 1, 1, 1).astype(complex),
            derivative.reshape(n + 1, 1, 1).astype(complex),
            l / n,
        )


def trapezoid_weights(k: int, h: float) -> np.ndarray:
    """Trapezoid weights on nodes 0..k; a single node carries weight zero."""
    weights = np.full(k + 1, h)
    weights[0] = weights[-1] = h / 2
    if k == 0:
        weights[0] = 0.0
    return weights


class SKernel:
    """
    Nyström realization of S = I + int s(x, t) . dt on the profile grid.

    One Cholesky factor L of B = I + W^{1/2} s W^{1/2}, with W built from the
    weights (h/2, h, ..., h), serves every leading interval [0, x_k]: the true
    trapezoid matrix on [0, x_k] is D (B_k + E_kk) D, where D scales the last
    node by 1/sqrt(2) and E_kk is the identity on that node, so only the last
    diagonal Cholesky block changes.
    """

    def __init__(self, profile: Phi1Profile, blocks: np.ndarray, factor: np.ndarray):
        self.profile = profile
        self.blocks = blocks
        self.factor = factor
        m2 = profile.m2
        self._corrections = [np.eye(m2, dtype=complex)]
        for k in range(1, profile.n + 1):
            block = factor[k * m2 : (k + 1) * m2, k * m2 : (k + 1) * m2]
            try:
                self._corrections.append(
                    cholesky(block @ block.conj().T + np.eye(m2), lower=True)
                )
            except LinAlgError as exc:
                raise CholeskyError(str(exc), module=__name__, index=k)

    @property
    def n(self) -> int:
        return self.profile.n

    @property
    def h(self) -> float:
        return self.profile.h

    @property
    def m2(self) -> int:
        return self.profile.m2

    def dense_kernel(self) -> np.ndarray:
        """s(x_a, x_b) as one ((n + 1) m2)^2 matrix."""
        size = (self.n + 1) * self.m2
        return self.blocks.transpose(0, 2, 1, 3).reshape(size, size)

    def dense_operator(self) -> np.ndarray:
        """Symmetrized trapezoid matrix W^{1/2} S W^{-1/2} on the whole interval."""
        root = np.sqrt(np.repeat(trapezoid_weights(self.n, self.h), self.m2))
        matrix = np.eye(root.size) + root[:, None] * self.dense_kernel() * root[None, :]
        return 0.5 * (matrix + matrix.conj().T)

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.dense_operator()).min())

    def _factor_solve(self, k: int, rhs: np.ndarray) -> np.ndarray:
        m2 = self.m2
        head = k * m2
        size = head + m2
        lower = self.factor[:head, :head]
        coupling = self.factor[head:size, :head]
        corner = self._corrections[k]

        first = solve_triangular(lower, rhs[:head], lower=True)
        second = solve_triangular(corner, rhs[head:size] - coupling @ first, lower=True)
        second = solve_triangular(corner, second, lower=True, trans="C")
        first = solve_triangular(
            lower, first - coupling.conj().T @ second, lower=True, trans="C"
        )
        return np.vstack([first, second])

    def solve_leading(self, k: int, rhs: np.ndarray) -> np.ndarray:
        """
        Solve S_{x_k} f = rhs on nodes 0..k.

        Args:
            k (int): Last node of the leading interval.
            rhs (np.ndarray): Shape (k + 1, m2) or (k + 1, m2, r).

        Returns:
            np.ndarray: f with the shape of ``rhs``.
        """
        if not 0 <= k <= self.n:
            raise ValidationError("leading block out of range", module=__name__, index=k)
        rhs = np.asarray(rhs, dtype=complex)
        if k == 0:
            return rhs.copy()
        vector = rhs.ndim == 2
        if vector:
            rhs = rhs[..., None]
        m2, columns = self.m2, rhs.shape[-1]
        size = (k + 1) * m2

        root = np.sqrt(np.repeat(trapezoid_weights(k, self.h), m2))
        scale = np.ones(size)
        scale[-m2:] = 1.0 / np.sqrt(2.0)

        stacked = rhs.reshape(size, columns)
        solved = self._factor_solve(k, (root[:, None] * stacked) / scale[:, None])
        result = (solved / scale[:, None] / root[:, None]).reshape(k + 1, m2, columns)
        return result[..., 0] if vector else result

    def pair(self, k: int, g: np.ndarray, f: np.ndarray) -> np.ndarray:
        """Trapezoid value of int_0^{x_k} g(t)^* f(t) dt for matrix-valued g, f."""
        weights = trapezoid_weights(k, self.h)
        return np.einsum("t,tia,tib->ab", weights, np.conj(g[: k + 1]), f[: k + 1])


def s_kernel(profile: Phi1Profile) -> SKernel:
    """
    Assemble s(x, t) = int_0^{min(x,t)} Φ1'(x - ζ) Φ1'(t - ζ)^* dζ and factor S.

    For x_a <= x_b the kernel only depends on the offset d = b - a through
    int_0^{x_a} Φ1'(σ) Φ1'(σ + d h)^* dσ, so one cumulative trapezoid per offset
    fills a whole diagonal; the lower half is the mirror s(t, x) = s(x, t)^*.

    Raises:
        CholeskyError: If the assembled operator is not positive definite.
    """
    n, m2, h = profile.n, profile.m2, profile.h
    derivative = profile.derivative
    blocks = np.zeros((n + 1, n + 1, m2, m2), dtype=complex)
    for d in range(n + 1):
        products = derivative[: n + 1 - d] @ np.conj(
            np.swapaxes(derivative[d:], -1, -2)
        )
        running = cumulative_trapezoid(products, dx=h, axis=0, initial=0)
        rows = np.arange(n + 1 - d)
        blocks[rows, rows + d] = running
        if d:
            blocks[rows + d, rows] = np.conj(np.swapaxes(running, -1, -2))

    size = (n + 1) * m2
    weights = np.full(n + 1, h)
    weights[0] = h / 2
    root = np.sqrt(np.repeat(weights, m2))
    dense = blocks.transpose(0, 2, 1, 3).reshape(size, size)
    matrix = np.eye(size) + root[:, None] * dense * root[None, :]
    matrix = 0.5 * (matrix + matrix.conj().T)
    try:
        factor = cholesky(matrix, lower=True)
    except LinAlgError as exc:
        raise CholeskyError(
            f"S is not positive definite ({exc}); "
            "the profile is corrupted or the grid too coarse",
            module=__name__,
        )
    logger.debug(f"factored S kernel of size {size}")
    return SKernel(profile, blocks, factor)


def resolvent_A(f: np.ndarray, z: complex, h: float) -> np.ndarray:
    """
    (I - z A)^{-1} f = f - i z int_0^x e^{i (t - x) z} f(t) dt on a uniform grid.

    The integral is advanced cell by cell, I_{k+1} = e^{-θ} I_k + α f_k + β f_{k+1}
    with θ = i h z, which is exact when f is linear on each cell.
    """
    f = np.asarray(f, dtype=complex)
    z = complex(z)
    if z == 0:
        return f.copy()
    theta = 1j * h * z
    older, newer = filon_coefficients(theta)
    shift = np.exp(-theta)
    integral = np.zeros_like(f)
    for k in range(f.shape[0] - 1):
        integral[k + 1] = shift * integral[k] + h * (older * f[k] + newer * f[k + 1])
    return f - 1j * z * integral


def forward_transform(profile: Phi1Profile, z: complex) -> np.ndarray:
    """int_0^l e^{2 i x z} Φ1(x) dx, exact for piecewise-linear Φ1."""
    kappa = 2j * complex(z)
    psi = kappa * profile.h
    older, newer = filon_coefficients(psi)
    ends = np.exp(kappa * profile.nodes[1:])
    cells = older * profile.samples[:-1] + newer * profile.samples[1:]
    return profile.h * np.einsum("k,kij->ij", ends, cells)


@dataclass
class SNodeTriple:
    """The operators A = -i int_0^x, S and Π = [Φ1 Φ2] on one grid."""

    profile: Phi1Profile
    kernel: SKernel

    @classmethod
    def from_profile(cls, profile: Phi1Profile) -> "SNodeTriple":
        return cls(profile, s_kernel(profile))


def transfer_matrix(triple: SNodeTriple, r_index: int, z: complex) -> np.ndarray:
    """w_A(r, z) = I - i z Π^* S_r^{-1} (I - z A_r)^{-1} P_r Π."""
    profile = triple.profile
    m = profile.m1 + profile.m2
    if not 0 <= r_index <= profile.n:
        raise ValidationError("r index out of range", module=__name__, index=r_index)
    if r_index == 0:
        return np.eye(m, dtype=complex)
    columns = profile.pi_columns()[: r_index + 1]
    resolved = resolvent_A(columns, z, profile.h)
    solved = triple.kernel.solve_leading(r_index, resolved)
    return np.eye(m) - 1j * complex(z) * triple.kernel.pair(r_index, columns, solved)


def factorization_check(
    grid: PotentialGrid,
    profile: Phi1Profile,
    x_index: int,
    z: complex,
    triple: Optional[SNodeTriple] = None,
) -> float:
    """Relative residual of u(x, z) = e^{i x z} u(x, 0) w_A(x, 2 z)."""
    if profile.n != grid.n or abs(profile.h - grid.h) > 1e-12 * grid.h:
        raise ValidationError(
            "profile and potential must share the same grid", module=__name__
        )
    triple = triple or SNodeTriple.from_profile(profile)
    propagator = Propagator(grid)
    lhs = propagator.at(x_index, z)
    rhs = (
        np.exp(1j * x_index * grid.h * complex(z))
        * propagator.at(x_index, 0.0)
        @ transfer_matrix(triple, x_index, 2 * complex(z))
    )
    return float(np.linalg.norm(lhs - rhs, 2) / np.linalg.norm(lhs, 2))


def identity_residual(triple: SNodeTriple) -> float:
    """Weighted operator norm of A S - S A^* + i Π Π^* on the Nyström grid."""
    profile, kernel = triple.profile, triple.kernel
    n, m2, h = profile.n, profile.m2, profile.h
    weights = np.repeat(trapezoid_weights(n, h), m2)

    cumulative = np.tril(np.full((n + 1, n + 1), h))
    np.fill_diagonal(cumulative, h / 2)
    cumulative[:, 0] = h / 2
    cumulative[0, 0] = 0.0
    a_matrix = -1j * np.kron(cumulative, np.eye(m2))
    a_adjoint = (a_matrix.conj().T * weights[None, :]) / weights[:, None]
    s_matrix = np.eye(weights.size) + kernel.dense_kernel() * weights[None, :]
    columns = profile.pi_columns().reshape(weights.size, -1)
    pi_pi = (columns @ columns.conj().T) * weights[None, :]

    residual = a_matrix @ s_matrix - s_matrix @ a_adjoint + 1j * pi_pi
    root = np.sqrt(weights)
    return float(np.linalg.norm(root[:, None] * residual / root[None, :], 2))


def observed_orders(ns: Sequence[int], residuals: Sequence[float]) -> List[float]:
    """Convergence orders log(r_i / r_{i+1}) / log(n_{i+1} / n_i) between refinements."""
    orders = []
    for (n0, r0), (n1, r1) in zip(zip(ns, residuals), zip(ns[1:], residuals[1:])):
        orders.append(float(np.log(r0 / r1) / np.log(n1 / n0)))
    return orders
