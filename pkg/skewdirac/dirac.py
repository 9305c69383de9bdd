import logging
from collections import OrderedDict
from dataclasses import dataclass
from typing import Dict

import numpy as np
from scipy.linalg import expm

from .errors import OverflowDomainError, ValidationError
from .potential import PotentialGrid

logging.basicConfig(level=logging.INFO, format="%(levelname)s: %(message)s")
logger = logging.getLogger(__name__)

OVERFLOW_LIMIT = 1e300


class Propagator:
    """
    Fundamental solution u(x, z) of y' = (i z j + j V) y on the nodes of a grid.

    Each cell contributes the exact exponential exp(h (i z j + j V_mid)); the
    cumulative products for a given z are cached so that repeated queries at
    several nodes cost one sweep.

    Args:
        grid (PotentialGrid): The sampled potential.
        cache_size (int): Number of distinct z values kept in memory.
    """

    def __init__(self, grid: PotentialGrid, cache_size: int = 8):
        self.grid = grid
        self.cache_size = cache_size
        self._j = grid.signature.j
        self._jv = self._j @ grid.cell_matrices()
        self._cache: "OrderedDict[complex, np.ndarray]" = OrderedDict()

    def cell_factors(self, z: complex) -> np.ndarray:
        """Per-cell transfer factors, shape (n, m, m)."""
        generators = self.grid.h * (1j * complex(z) * self._j + self._jv)
        return expm(generators)

    def fundamental(self, z: complex) -> np.ndarray:
        """
        u(x_k, z) for every node k, shape (n + 1, m, m).

        Raises:
            OverflowDomainError: If an entry exceeds 1e300 or stops being finite.
        """
        z = complex(z)
        if z in self._cache:
            self._cache.move_to_end(z)
            return self._cache[z]

        factors = self.cell_factors(z)
        m = self.grid.m
        u = np.empty((self.grid.n + 1, m, m), dtype=complex)
        u[0] = np.eye(m)
        for k in range(self.grid.n):
            u[k + 1] = factors[k] @ u[k]
            peak = np.abs(u[k + 1]).max()
            if not np.isfinite(peak) or peak > OVERFLOW_LIMIT:
                raise OverflowDomainError(
                    f"fundamental solution overflows at z={z}", module=__name__, index=k
                )

        self._cache[z] = u
        if len(self._cache) > self.cache_size:
            self._cache.popitem(last=False)
        return u

    def at(self, x_index: int, z: complex) -> np.ndarray:
        check_index(self.grid, x_index)
        return self.fundamental(z)[x_index]

    def inverse_at(self, x_index: int, z: complex) -> np.ndarray:
        """u(x, z)^{-1}, taken as u(x, conj z)^* instead of a numerical inverse."""
        return self.at(x_index, np.conj(z)).conj().T

    def gram_profile(self, z: complex) -> np.ndarray:
        """𝔄(x_k, z) = u^* j u at every node, shape (n + 1, m, m)."""
        u = self.fundamental(z)
        gram = np.conj(np.swapaxes(u, -1, -2)) @ self._j @ u
        return 0.5 * (gram + np.conj(np.swapaxes(gram, -1, -2)))


def check_index(grid: PotentialGrid, x_index: int) -> None:
    if not 0 <= x_index <= grid.n:
        raise ValidationError(
            f"node index must lie in [0, {grid.n}]", module=__name__, index=x_index
        )


def propagate(grid: PotentialGrid, x_index: int, z: complex) -> np.ndarray:
    """
    Fundamental solution at node ``x_index``.

    Args:
        grid (PotentialGrid): The sampled potential.
        x_index (int): Node index in [0, n].
        z (complex): Spectral parameter.

    Returns:
        np.ndarray: The m x m matrix u(x_k, z).
    """
    if not np.isfinite(complex(z)):
        raise ValidationError(f"z must be finite, got {z}", module=__name__)
    return Propagator(grid).at(x_index, z)


def weyl_gram(grid: PotentialGrid, x_index: int, z: complex) -> np.ndarray:
    """Hermitian matrix 𝔄(x, z) = u(x, z)^* j u(x, z)."""
    check_index(grid, x_index)
    return Propagator(grid).gram_profile(z)[x_index]


def inverse_identity_defect(grid: PotentialGrid, z: complex) -> float:
    """max_k ||u(x_k, conj z)^* u(x_k, z) - I||."""
    propagator = Propagator(grid)
    u = propagator.fundamental(z)
    u_conj = propagator.fundamental(np.conj(z))
    product = np.conj(np.swapaxes(u_conj, -1, -2)) @ u
    return float(np.abs(product - np.eye(grid.m)).max())


@dataclass
class BoundaryRows:
    """Rows beta = [I 0] u(x, 0) and gamma = [0 I] u(x, 0) on every node."""

    beta: np.ndarray
    gamma: np.ndarray

    def defects(self) -> Dict[str, float]:
        m1, m2 = self.beta.shape[1], self.gamma.shape[1]
        beta_h = np.conj(np.swapaxes(self.beta, -1, -2))
        gamma_h = np.conj(np.swapaxes(self.gamma, -1, -2))
        return {
            "beta_unitarity": float(np.abs(self.beta @ beta_h - np.eye(m1)).max()),
            "gamma_unitarity": float(np.abs(self.gamma @ gamma_h - np.eye(m2)).max()),
            "orthogonality": float(np.abs(self.beta @ gamma_h).max()),
        }


def boundary_rows(grid: PotentialGrid) -> BoundaryRows:
    u0 = Propagator(grid).fundamental(0.0)
    return BoundaryRows(beta=u0[:, : grid.m1, :].copy(), gamma=u0[:, grid.m1 :, :].copy())
