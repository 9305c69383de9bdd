import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.integrate import trapezoid
from scipy.linalg import LinAlgError, schur

from .dirac import Propagator
from .errors import DomainError, PairError, ValidationError
from .potential import PotentialGrid, Signature, SpectralPoint

logging.basicConfig(level=logging.INFO, format="%(levelname)s: %(message)s")
logger = logging.getLogger(__name__)

EIGEN_CLAMP = 1e-14
DEFAULT_MARGIN = 0.25


def hermitian_power(
    matrix: np.ndarray, power: float, clamp: float = EIGEN_CLAMP
) -> np.ndarray:
    """Power of a Hermitian matrix, eigenvalues clamped below at ``clamp``."""
    matrix = 0.5 * (matrix + matrix.conj().T)
    values, vectors = np.linalg.eigh(matrix)
    values = np.maximum(values, clamp)
    return (vectors * values**power) @ vectors.conj().T


@dataclass
class MatrixBall:
    """The Weyl disc {rho_l w rho_r + center : w^* w <= I} at (x, z)."""

    center: np.ndarray
    rho_l: np.ndarray
    rho_r: np.ndarray
    x: Optional[float] = None
    z: Optional[complex] = None

    @property
    def radius(self) -> float:
        return float(np.linalg.norm(self.rho_l, 2) * np.linalg.norm(self.rho_r, 2))

    def member(self, omega: np.ndarray) -> np.ndarray:
        return self.rho_l @ omega @ self.rho_r + self.center


def matrix_ball(
    gram: np.ndarray,
    m1: int,
    gram_conj: Optional[np.ndarray] = None,
    x: Optional[float] = None,
    z: Optional[complex] = None,
    clamp: float = EIGEN_CLAMP,
) -> MatrixBall:
    """
    Center and semi-radii of the ball described by 𝔄(x, z).

    Args:
        gram (np.ndarray): 𝔄(x, z).
        m1 (int): Size of the first block.
        gram_conj (Optional[np.ndarray]): 𝔄(x, conj z). Since 𝔄(x, z)^{-1} = 𝔄(x, conj z),
            its leading block is the inverse Schur complement, which gives rho_r
            without the cancellation of A11 - A12 A22^{-1} A21.
        x (Optional[float]): Abscissa, recorded on the ball.
        z (Optional[complex]): Spectral parameter, recorded on the ball.
        clamp (float): Eigenvalue floor for the square roots.

    Returns:
        MatrixBall: center, rho_l, rho_r.

    Raises:
        DomainError: If -A22 is not positive definite.
    """
    a11, a12 = gram[:m1, :m1], gram[:m1, m1:]
    a21, a22 = gram[m1:, :m1], gram[m1:, m1:]
    minus_a22 = -0.5 * (a22 + a22.conj().T)
    smallest = np.linalg.eigvalsh(minus_a22).min()
    if not smallest > 0:
        raise DomainError(
            f"-A22 is not positive definite (smallest eigenvalue {smallest:.3g}) at z={z}",
            module=__name__,
        )
    rho_l = hermitian_power(minus_a22, -0.5, clamp)
    center = np.linalg.solve(minus_a22, a21)
    if gram_conj is not None:
        rho_r = hermitian_power(gram_conj[:m1, :m1], -0.5, clamp)
    else:
        schur_complement = a11 + a12 @ center
        rho_r = hermitian_power(schur_complement, 0.5, 0.0)
    return MatrixBall(center=center, rho_l=rho_l, rho_r=rho_r, x=x, z=z)


def hermitian_form(gram: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """[I phi^*] 𝔄 [I; phi], Hermitian m1 x m1."""
    m1 = phi.shape[1]
    stacked = np.vstack([np.eye(m1), phi])
    form = stacked.conj().T @ gram @ stacked
    return 0.5 * (form + form.conj().T)


def form_margin(gram: np.ndarray, phi: np.ndarray) -> float:
    """Smallest eigenvalue of the ball-membership form; >= 0 means phi is in the ball."""
    return float(np.linalg.eigvalsh(hermitian_form(gram, phi)).min())


def mobius(
    u_inv: np.ndarray, pair_value: np.ndarray, cond_limit: float = 1e12
) -> np.ndarray:
    """
    Möbius image [0 I] u^{-1} P ([I 0] u^{-1} P)^{-1}.

    Raises:
        PairError: If the denominator is singular beyond ``cond_limit``.
    """
    m1 = pair_value.shape[1]
    image = u_inv @ pair_value
    top, bottom = image[:m1], image[m1:]
    if np.linalg.cond(top) > cond_limit:
        raise PairError(
            "denominator [I 0] u^{-1} P is singular; the pair is not property-j "
            "or z lies outside the half-plane",
            module=__name__,
        )
    return np.linalg.solve(top.T, bottom.T).T


@dataclass
class PropertyJPair:
    """A matrix function P(z) of size m x m1 with P^* P > 0 and P^* j P >= 0."""

    value: Callable[[complex], np.ndarray]
    m1: int
    m2: int

    def evaluate(self, z: complex, tol: float = 1e-9) -> np.ndarray:
        p = np.asarray(self.value(z), dtype=complex)
        if p.shape != (self.m1 + self.m2, self.m1):
            raise ValidationError(f"pair has shape {p.shape}", module=__name__)
        gram = p.conj().T @ p
        if np.linalg.eigvalsh(gram).min() <= tol:
            raise ValidationError(f"pair is rank deficient at z={z}", module=__name__)
        j = Signature(self.m1, self.m2).j
        if np.linalg.eigvalsh(p.conj().T @ j @ p).min() < -tol:
            raise ValidationError(f"pair violates P^* j P >= 0 at z={z}", module=__name__)
        return p

    @classmethod
    def canonical(cls, m1: int, m2: int) -> "PropertyJPair":
        block = np.vstack([np.eye(m1), np.zeros((m2, m1))]).astype(complex)
        return cls(lambda z: block, m1, m2)

    @classmethod
    def from_contraction(cls, alpha: np.ndarray) -> "PropertyJPair":
        alpha = np.atleast_2d(np.asarray(alpha, dtype=complex))
        m2, m1 = alpha.shape
        block = np.vstack([np.eye(m1), alpha])
        return cls(lambda z: block, m1, m2)


@dataclass
class WeylSample:
    z: complex
    phi: np.ndarray
    error_bound: float
    x: float
    truncated: bool
    ball: Optional[MatrixBall] = None


def weyl_function(
    grid: PotentialGrid,
    z: complex,
    target_radius: float = 1e-8,
    margin: float = DEFAULT_MARGIN,
    propagator: Optional[Propagator] = None,
) -> WeylSample:
    """
    Weyl function as the center of the first ball whose radius reaches ``target_radius``.

    When no node on [0, l] reaches the target, the ball at x = l is used and
    the sample is flagged as truncated.

    Raises:
        DomainError: If Im z - M is below ``margin``.
    """
    SpectralPoint(complex(z), grid.norm_bound).require_margin(margin, module=__name__)
    propagator = propagator or Propagator(grid)
    m1 = grid.m1
    gram = propagator.gram_profile(z)
    gram_conj = propagator.gram_profile(np.conj(z))

    lam_l = np.linalg.eigvalsh(-gram[:, m1:, m1:]).min(axis=-1)
    lam_r = np.linalg.eigvalsh(gram_conj[:, :m1, :m1]).min(axis=-1)
    radii = 1.0 / np.sqrt(np.maximum(lam_l, EIGEN_CLAMP) * np.maximum(lam_r, EIGEN_CLAMP))

    hits = np.flatnonzero(radii <= target_radius)
    truncated = hits.size == 0
    k = grid.n if truncated else int(hits[0])
    ball = matrix_ball(gram[k], m1, gram_conj[k], x=k * grid.h, z=z)
    if truncated:
        logger.debug(
            f"target radius {target_radius:.1e} not reached on [0, {grid.l}] at z={z}; "
            f"achieved {radii[-1]:.3e}"
        )
    return WeylSample(
        z=complex(z),
        phi=ball.center,
        error_bound=float(radii[k]),
        x=k * grid.h,
        truncated=truncated,
        ball=ball,
    )


def l2_criterion(
    grid: PotentialGrid,
    phi: np.ndarray,
    z: complex,
    propagator: Optional[Propagator] = None,
) -> float:
    """Trapezoid value of the integral of tr([I phi^*] u^* u [I; phi]) over [0, l]."""
    propagator = propagator or Propagator(grid)
    u = propagator.fundamental(z)
    stacked = np.vstack([np.eye(grid.m1), np.atleast_2d(phi)])
    solutions = u @ stacked
    integrand = np.sum(np.abs(solutions) ** 2, axis=(-2, -1))
    return float(trapezoid(integrand, dx=grid.h))


def closed_form_weyl(c: complex, z: complex) -> complex:
    """i (sqrt(z^2 + |c|^2) - z) / c for a constant scalar potential c."""
    if c == 0:
        return 0j
    root = np.sqrt(complex(z) ** 2 + abs(c) ** 2)
    if root.imag < 0:
        root = -root
    return 1j * (root - z) / c


def constant_weyl_function(v0: np.ndarray, z: complex) -> np.ndarray:
    """
    Weyl function of a constant matrix potential on the semi-axis.

    The L2 solutions of y' = (i z j + j V0) y span the stable invariant subspace
    of the coefficient, taken from a sorted complex Schur form.
    """
    v0 = np.atleast_2d(np.asarray(v0, dtype=complex))
    m1, m2 = v0.shape
    coefficient = Signature(m1, m2).coefficient(v0, z)
    try:
        _, vectors, stable = schur(coefficient, output="complex", sort="lhp")
    except LinAlgError as exc:
        raise DomainError(f"Schur decomposition failed at z={z}: {exc}", module=__name__)
    if stable != m1:
        raise DomainError(
            f"stable subspace has dimension {stable}, expected {m1} (z={z})",
            module=__name__,
        )
    basis = vectors[:, :m1]
    return np.linalg.solve(basis[:m1].T, basis[m1:].T).T


def continuation_pair(
    grid: PotentialGrid, z: complex, continuation: str = "constant"
) -> np.ndarray:
    """
    Property-j pair at x = l describing how the potential is continued beyond l.

    ``zero`` continues by v = 0 (pair [I; 0]); ``constant`` continues by v(l).
    """
    if continuation == "zero":
        phi_tail = np.zeros((grid.m2, grid.m1), dtype=complex)
    elif continuation == "constant":
        phi_tail = constant_weyl_function(grid.samples[-1], z)
    else:
        raise ValidationError(f"unknown continuation '{continuation}'", module=__name__)
    return np.vstack([np.eye(grid.m1), phi_tail])


def pair_representative(
    grid: PotentialGrid,
    z: complex,
    continuation: str = "constant",
    propagator: Optional[Propagator] = None,
) -> np.ndarray:
    """
    Analytic member of the Weyl disc at x = l.

    Equals the Weyl function of the potential continued past l, hence it is
    analytic and contractive throughout Im z > M.
    """
    SpectralPoint(complex(z), grid.norm_bound).require_margin(0.0, module=__name__)
    propagator = propagator or Propagator(grid)
    u_inv = propagator.inverse_at(grid.n, z)
    return mobius(u_inv, continuation_pair(grid, z, continuation))
