import csv
import logging
import math
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import trapezoid
from scipy.linalg import null_space

from .batch import map_ordered
from .errors import (
    ContinuityError,
    DomainError,
    RankError,
    TruncationError,
    ValidationError,
)
from .potential import PotentialGrid, format_number, read_csv_header, read_numeric_csv
from .snode import Phi1Profile, SKernel, forward_transform, s_kernel
from .weyl import pair_representative

logging.basicConfig(level=logging.INFO, format="%(levelname)s: %(message)s")
logger = logging.getLogger(__name__)


@dataclass
class WeylLineData:
    """Weyl function samples on the line Im z = eta, xi uniform over [-a, a]."""

    eta: float
    xi: np.ndarray
    phi: np.ndarray
    a: float
    norm_bound: float = 0.0

    def __post_init__(self):
        self.xi = np.asarray(self.xi, dtype=float)
        self.phi = np.asarray(self.phi, dtype=complex)
        if self.phi.ndim != 3 or self.phi.shape[0] != self.xi.size:
            raise ValidationError(
                f"phi has shape {self.phi.shape} for {self.xi.size} xi samples",
                module=__name__,
            )
        if self.xi.size < 5:
            raise ValidationError("need at least five xi samples", module=__name__)
        steps = np.diff(self.xi)
        if np.abs(steps - steps.mean()).max() > 1e-9 * max(1.0, self.a):
            raise ValidationError("xi samples must be uniform", module=__name__)
        if self.eta <= self.norm_bound:
            raise DomainError(
                f"eta = {self.eta} must exceed the norm bound {self.norm_bound}",
                module=__name__,
            )
        norms = np.linalg.norm(self.phi, ord=2, axis=(-2, -1))
        worst = int(np.argmax(norms))
        if norms[worst] > 1 + 1e-6:
            raise ValidationError(
                f"Weyl samples must be contractive, found norm {norms[worst]:.6g}",
                module=__name__,
                index=worst,
            )

    @property
    def m1(self) -> int:
        return self.phi.shape[2]

    @property
    def m2(self) -> int:
        return self.phi.shape[1]

    @property
    def step(self) -> float:
        return float(self.xi[1] - self.xi[0])

    @property
    def z(self) -> np.ndarray:
        return self.xi + 1j * self.eta

    def to_csv(self, path: str) -> None:
        write_weyl_csv(path, self.z, self.phi)

    @classmethod
    def from_csv(cls, path: str, norm_bound: float = 0.0) -> "WeylLineData":
        """Read samples written by ``direct`` or ``to_csv``; all rows must share Im z."""
        m1, m2 = shape_from_header(read_csv_header(path))
        rows = read_numeric_csv(path)
        z = rows[:, 0] + 1j * rows[:, 1]
        order = np.argsort(z.real, kind="stable")
        z = z[order]
        values = rows[order, 2 : 2 + 2 * m1 * m2]
        phi = (values[:, 0::2] + 1j * values[:, 1::2]).reshape(-1, m2, m1)
        if np.ptp(z.imag) > 1e-12 * max(1.0, abs(z.imag[0])):
            raise ValidationError(
                f"{path}: samples do not share one Im z", module=__name__
            )
        return cls(
            eta=float(z.imag[0]),
            xi=z.real,
            phi=phi,
            a=float(np.abs(z.real).max()),
            norm_bound=norm_bound,
        )


def shape_from_header(header: Sequence[str]) -> Tuple[int, int]:
    entries = [name.split("_")[2:] for name in header if name.startswith("re_phi_")]
    if not entries:
        raise ValidationError("CSV header has no re_phi_<i>_<j> columns", module=__name__)
    m2 = 1 + max(int(i) for i, _ in entries)
    m1 = 1 + max(int(j) for _, j in entries)
    return m1, m2


def write_weyl_csv(
    path: str,
    z: Sequence[complex],
    phi: Sequence[np.ndarray],
    error_bound: Optional[Sequence[float]] = None,
) -> None:
    """Weyl samples as CSV: re_z, im_z, then re/im of every phi entry, row-major."""
    m2, m1 = np.shape(phi[0])
    header = ["re_z", "im_z"]
    for i in range(m2):
        for k in range(m1):
            header += [f"re_phi_{i}_{k}", f"im_phi_{i}_{k}"]
    if error_bound is not None:
        header.append("error_bound")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for index, (point, value) in enumerate(zip(z, phi)):
            row = [format_number(np.real(point)), format_number(np.imag(point))]
            for entry in np.asarray(value).reshape(-1):
                row += [format_number(entry.real), format_number(entry.imag)]
            if error_bound is not None:
                row.append(format_number(error_bound[index]))
            writer.writerow(row)


def _pair_at(grid: PotentialGrid, continuation: str, z: complex) -> np.ndarray:
    return pair_representative(grid, z, continuation)


def weyl_line_data(
    grid: PotentialGrid,
    eta: Optional[float] = None,
    a: float = 200.0,
    xi_step: Optional[float] = None,
    continuation: str = "constant",
    processes: int = 1,
    progress: bool = False,
) -> WeylLineData:
    """
    Synthesize Weyl line data from a potential.

    Args:
        grid (PotentialGrid): Planted potential on [0, l].
        eta (Optional[float]): Height of the line. Defaults to M + 1.
        a (float): Half-length of the xi window. Defaults to 200.
        xi_step (Optional[float]): Sample spacing. Defaults to pi / (8 l).
        continuation (str): How the potential is continued beyond l.
        processes (int): Worker processes.
        progress (bool): Show a progress bar.

    Returns:
        WeylLineData: Samples on a symmetric grid containing +-a/2 as nodes.
    """
    eta = grid.norm_bound + 1.0 if eta is None else float(eta)
    xi_step = math.pi / (8 * grid.l) if xi_step is None else float(xi_step)
    half = int(math.ceil(a / xi_step))
    half += half % 2
    xi = np.linspace(-a, a, 2 * half + 1)
    logger.info(f"Sampling the Weyl function at {xi.size} points on Im z = {eta:.6g}")
    values = map_ordered(
        partial(_pair_at, grid, continuation),
        list(xi + 1j * eta),
        processes=processes,
        desc="weyl line",
        progress=progress,
    )
    return WeylLineData(
        eta=eta,
        xi=xi,
        phi=np.stack(values),
        a=float(a),
        norm_bound=grid.norm_bound,
    )


def _tail_basis(z: np.ndarray, moments: int) -> np.ndarray:
    return np.stack([(1.0 - 2j * z) ** -(k + 1) for k in range(1, moments + 1)], axis=1)


def _tail_profile(coeffs: np.ndarray, y: np.ndarray, m2: int, m1: int) -> np.ndarray:
    powers = np.stack(
        [y**k * np.exp(-y) / math.factorial(k) for k in range(1, coeffs.shape[0] + 1)],
        axis=1,
    )
    return (powers @ coeffs).reshape(y.size, m2, m1)


def _invert(
    transform: np.ndarray, z: np.ndarray, y: np.ndarray, step: float
) -> np.ndarray:
    """(1/pi) e^{2 y eta} int e^{-2 i y xi} F dxi by trapezoid, one exponential per (y, xi)."""
    weights = np.full(z.size, step)
    weights[0] = weights[-1] = step / 2
    kernel = np.exp(-2j * np.outer(y, z)) * weights[None, :] / np.pi
    flat = transform.reshape(z.size, -1)
    out = np.empty((y.size, flat.shape[1]), dtype=complex)
    for column in range(flat.shape[1]):
        out[:, column] = np.sum(kernel * flat[None, :, column], axis=1)
    return out.reshape((y.size,) + transform.shape[1:])


def recover_phi1(
    data: WeylLineData,
    l: float,
    n: int,
    tol_fourier: float = 0.05,
    tail_moments: int = 2,
) -> Phi1Profile:
    """
    Recover Φ1 on the nodes of [0, l] from Weyl line data.

    Φ1(y) = (1/pi) e^{2 y eta} int e^{-2 i y xi} φ(xi + i eta) / (2 i (xi + i eta)) dxi.
    The leading high-frequency behaviour is first removed with the model
    sum_k κ_k / (1 - 2 i z)^{k+1}, whose inverse transform sum_k κ_k y^k e^{-y} / k!
    is added back exactly. Convergence is certified by repeating the inversion
    on the half window [-a/2, a/2].

    Raises:
        DomainError: If eta does not exceed the norm bound.
        ValidationError: If the xi spacing exceeds pi / (2 l).
        TruncationError: If the half-window result changes by more than ``tol_fourier``.
    """
    if data.eta <= data.norm_bound:
        raise DomainError("eta must exceed the norm bound", module=__name__)
    if data.step > math.pi / (2 * l) * (1 + 1e-9):
        raise ValidationError(
            f"xi spacing {data.step:.4g} exceeds pi/(2l) = {math.pi / (2 * l):.4g}",
            module=__name__,
        )
    h = l / n
    y = np.arange(n + 1) * h
    z = data.z
    transform = data.phi / (2j * z)[:, None, None]

    model = np.zeros((y.size, data.m2, data.m1), dtype=complex)
    if tail_moments > 0:
        outer = np.abs(data.xi) >= 0.75 * data.a
        basis = _tail_basis(z[outer], tail_moments)
        target = transform[outer].reshape(basis.shape[0], -1)
        coeffs, *_ = np.linalg.lstsq(basis, target, rcond=None)
        tail = _tail_basis(z, tail_moments) @ coeffs
        transform = transform - tail.reshape(transform.shape)
        model = _tail_profile(coeffs, y, data.m2, data.m1)

    full = _invert(transform, z, y, data.step) + model
    inner = np.abs(data.xi) <= 0.5 * data.a + 1e-12 * data.a
    half = _invert(transform[inner], z[inner], y, data.step) + model

    scale = max(float(np.abs(full).max()), 1e-6)
    change = float(np.abs(full - half).max()) / scale
    if change > tol_fourier:
        raise TruncationError(
            f"half-window change {change:.3g} exceeds {tol_fourier:.3g}; increase a",
            module=__name__,
        )
    if change > 0.5 * tol_fourier:
        logger.warning(f"Fourier certificate passes with little slack ({change:.3g})")
    profile = Phi1Profile.from_samples(full, h)
    profile.diagnostics["fourier_change"] = change
    return profile


def recover_beta(profile: Phi1Profile, kernel: Optional[SKernel] = None) -> np.ndarray:
    """β(x) = [I 0] - int_0^x (S_x^{-1} Φ1')(t)^* [Φ1(t) I] dt at every node."""
    kernel = kernel or s_kernel(profile)
    m1, m2 = profile.m1, profile.m2
    columns = profile.pi_columns()
    start = np.hstack([np.eye(m1), np.zeros((m1, m2))]).astype(complex)
    beta = np.empty((profile.n + 1, m1, m1 + m2), dtype=complex)
    beta[0] = start
    for k in range(1, profile.n + 1):
        solved = kernel.solve_leading(k, profile.derivative[: k + 1])
        beta[k] = start - kernel.pair(k, solved, columns)
    return beta


def _rows_defect(rows: np.ndarray) -> float:
    size = rows.shape[1]
    return float(np.abs(rows @ np.conj(np.swapaxes(rows, -1, -2)) - np.eye(size)).max())


def complete_gamma(
    beta: np.ndarray, h: float, tol: float = 1e-2
) -> Tuple[np.ndarray, Dict[str, float]]:
    """
    Complete β to a unitary matrix with rows γ satisfying γ' γ^* = 0.

    A continuous orthonormal basis γ~ of ker β is built node by node, each
    basis rotated onto the previous one by its polar factor, starting from
    [0 I]. Then ϰ' = -ϰ γ~' γ~^* is integrated with RK4 and γ = ϰ γ~.

    Raises:
        ValidationError: If β β^* deviates from I by more than ``tol``.
        RankError: If ker β(x_k) has the wrong dimension.
        ContinuityError: If consecutive bases are nearly orthogonal.
    """
    nodes, m1, m = beta.shape
    m2 = m - m1
    defect = _rows_defect(beta)
    if defect > tol:
        raise ValidationError(f"β β^* - I reaches {defect:.3g}", module=__name__)

    tilde = np.empty((nodes, m2, m), dtype=complex)
    previous = np.hstack([np.zeros((m2, m1)), np.eye(m2)]).astype(complex)
    for k in range(nodes):
        basis = null_space(beta[k])
        if basis.shape[1] != m2:
            raise RankError(
                f"kernel of β has dimension {basis.shape[1]}, expected {m2}",
                module=__name__,
                index=k,
            )
        left, singular, right = np.linalg.svd(previous @ basis)
        if singular.min() < 0.5:
            raise ContinuityError(
                f"basis alignment degenerates (σ_min = {singular.min():.3g})",
                module=__name__,
                index=k,
            )
        tilde[k] = (left @ right) @ basis.conj().T
        previous = tilde[k]

    slope = np.gradient(tilde, h, axis=0, edge_order=2)
    coeff = slope @ np.conj(np.swapaxes(tilde, -1, -2))
    coeff = 0.5 * (coeff - np.conj(np.swapaxes(coeff, -1, -2)))

    kappa = np.empty((nodes, m2, m2), dtype=complex)
    kappa[0] = np.eye(m2)
    for k in range(nodes - 1):
        middle = 0.5 * (coeff[k] + coeff[k + 1])
        current = kappa[k]
        k1 = -current @ coeff[k]
        k2 = -(current + 0.5 * h * k1) @ middle
        k3 = -(current + 0.5 * h * k2) @ middle
        k4 = -(current + h * k3) @ coeff[k + 1]
        kappa[k + 1] = current + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)

    gamma = kappa @ tilde
    slope = np.gradient(gamma, h, axis=0, edge_order=2)
    drift = slope @ np.conj(np.swapaxes(gamma, -1, -2))
    diagnostics = {
        "beta_unitarity": defect,
        "gamma_unitarity": _rows_defect(gamma),
        "orthogonality": float(np.abs(beta @ np.conj(np.swapaxes(gamma, -1, -2))).max()),
        "gamma_drift": float(np.abs(drift[1:-1]).max()) if nodes > 2 else 0.0,
    }
    return gamma, diagnostics


@dataclass
class RecoveredPotential:
    x: np.ndarray
    v: np.ndarray
    diagnostics: Dict[str, float] = field(default_factory=dict)
    low_confidence: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.low_confidence is None:
            self.low_confidence = np.zeros(self.x.size, dtype=bool)
            self.low_confidence[[0, -1]] = True

    @property
    def h(self) -> float:
        return float(self.x[1] - self.x[0])


def recover_potential(
    beta: np.ndarray, gamma: np.ndarray, h: float
) -> RecoveredPotential:
    """v = β' γ^*, second-order differences inside, one-sided at the ends."""
    slope = np.gradient(beta, h, axis=0, edge_order=2)
    v = slope @ np.conj(np.swapaxes(gamma, -1, -2))
    return RecoveredPotential(x=np.arange(beta.shape[0]) * h, v=v)


def inverse_pipeline(
    data: WeylLineData,
    l: float,
    n: int,
    tol_fourier: float = 0.05,
    tail_moments: int = 2,
    gamma_tol: float = 1e-2,
) -> RecoveredPotential:
    """Weyl line data -> Φ1 -> S -> β -> γ -> v."""
    logger.info(f"Recovering Φ1 on [0, {l}] with n = {n} from {data.xi.size} samples")
    profile = recover_phi1(data, l, n, tol_fourier=tol_fourier, tail_moments=tail_moments)
    kernel = s_kernel(profile)
    logger.info("Recovering β from the S kernel")
    beta = recover_beta(profile, kernel)
    gamma, diagnostics = complete_gamma(beta, profile.h, tol=gamma_tol)
    recovered = recover_potential(beta, gamma, profile.h)
    recovered.diagnostics.update(profile.diagnostics)
    recovered.diagnostics.update(diagnostics)
    recovered.diagnostics["kernel_min_eigenvalue"] = kernel.min_eigenvalue()
    if data.norm_bound > 0:
        peak = np.linalg.norm(recovered.v[1:-1], ord=2, axis=(-2, -1)).max()
        recovered.diagnostics["peak_over_bound"] = float(peak / data.norm_bound)
    _log_nodes(recovered, beta, gamma)
    return recovered


def _log_nodes(
    recovered: RecoveredPotential, beta: np.ndarray, gamma: np.ndarray
) -> None:
    flagged = np.flatnonzero(recovered.low_confidence)
    if flagged.size:
        where = ", ".join(format_number(recovered.x[k]) for k in flagged)
        logger.warning(
            f"{flagged.size} low-confidence node(s) at x = {where}; max_error skips them"
        )
    if not logger.isEnabledFor(logging.DEBUG):
        return
    norms = np.linalg.norm(recovered.v, ord=2, axis=(-2, -1))
    overlap = np.abs(beta @ np.conj(np.swapaxes(gamma, -1, -2))).max(axis=(-2, -1))
    for k, x in enumerate(recovered.x):
        logger.debug(
            f"node {k}: x = {x:.6g}, ||v|| = {norms[k]:.6g}, |β γ^*| = {overlap[k]:.3g}"
        )


def compare_potentials(
    recovered: RecoveredPotential, planted: PotentialGrid, interior: float = 0.9
) -> Dict[str, float]:
    """
    Errors of a recovered potential against the planted one on shared nodes.

    Args:
        recovered (RecoveredPotential): Output of the pipeline.
        planted (PotentialGrid): Reference potential on the same grid.
        interior (float): Fraction of [0, l] used for the relative L2 error.

    Returns:
        Dict[str, float]: ``max_error`` over non-endpoint nodes and ``relative_l2``.
    """
    if recovered.v.shape != planted.samples.shape:
        raise ValidationError("recovered and planted grids differ", module=__name__)
    difference = np.linalg.norm(recovered.v - planted.samples, axis=(-2, -1))
    reference = np.linalg.norm(planted.samples, axis=(-2, -1))
    confident = ~recovered.low_confidence
    cut = int(math.floor(interior * planted.n)) + 1
    error_l2 = math.sqrt(trapezoid(difference[:cut] ** 2, dx=planted.h))
    norm_l2 = math.sqrt(trapezoid(reference[:cut] ** 2, dx=planted.h))
    return {
        "max_error": float(difference[confident].max()),
        "relative_l2": error_l2 / norm_l2 if norm_l2 > 0 else error_l2,
    }


def hea_residual(phi: np.ndarray, profile: Phi1Profile, z: complex) -> float:
    """||φ(z) - 2 i z int_0^l e^{2 i x z} Φ1(x) dx||."""
    main_term = 2j * complex(z) * forward_transform(profile, z)
    return float(np.linalg.norm(np.atleast_2d(phi) - main_term, 2))


@dataclass
class HeaReport:
    re_values: List[float]
    eta: float
    factor: float
    residual_low: List[float]
    residual_high: List[float]
    ratios: List[float]
    min_ratio: float

    @property
    def passed(self) -> bool:
        return all(ratio >= self.min_ratio for ratio in self.ratios)


def hea_decay_report(
    phi_fn: Callable[[complex], np.ndarray],
    profile: Phi1Profile,
    re_values: Sequence[float],
    eta: float,
    factor: float = 4.0,
    min_ratio: float = 1.6,
) -> HeaReport:
    """
    Compare the high-energy remainder at heights eta and factor * eta.

    A ratio of at least 1.6 per fourfold height means the remainder decays at
    least like (Im z)^{-1/2}, uniformly over the real parts.
    """
    low, high, ratios = [], [], []
    for re in re_values:
        r_low = hea_residual(phi_fn(re + 1j * eta), profile, re + 1j * eta)
        z_high = re + 1j * factor * eta
        r_high = hea_residual(phi_fn(z_high), profile, z_high)
        low.append(r_low)
        high.append(r_high)
        ratios.append(r_low / r_high if r_high > 0 else math.inf)
    return HeaReport(list(re_values), eta, factor, low, high, ratios, min_ratio)


@dataclass
class BorgMarchenkoReport:
    r_grid: List[float]
    heights: List[float]
    ray_c: float
    statistics: np.ndarray
    agreeing: List[bool]
    growth: List[float]

    @property
    def threshold(self) -> float:
        """Largest r flagged as agreeing, or 0 when none is."""
        agreeing = [r for r, ok in zip(self.r_grid, self.agreeing) if ok]
        return max(agreeing) if agreeing else 0.0


def borg_marchenko_check(
    phi_a: Callable[[complex], np.ndarray],
    phi_b: Callable[[complex], np.ndarray],
    ray_c: float,
    r_grid: Sequence[float],
    heights: Sequence[float],
    bound_factor: float = 1.5,
) -> BorgMarchenkoReport:
    """
    Decay of ||φ_a - φ_b|| e^{2 r Im z} along the ray Re z = c Im z.

    For every r the statistic is "bounded" when its maximum over the last
    third of the heights is at most ``bound_factor`` times its maximum over
    the first third. ``growth`` is the factor gained over the last height
    doubling available on the grid.
    """
    heights = np.asarray(sorted(heights), dtype=float)
    if heights.size < 3 or heights[0] <= 0:
        raise ValidationError("need at least three positive heights", module=__name__)
    distance = np.empty(heights.size)
    for index, height in enumerate(heights):
        z = height * (ray_c + 1j)
        distance[index] = np.linalg.norm(
            np.atleast_2d(phi_a(z)) - np.atleast_2d(phi_b(z)), 2
        )

    third = max(1, heights.size // 3)
    previous = int(np.argmin(np.abs(heights - heights[-1] / 2)))
    statistics = np.empty((len(r_grid), heights.size))
    agreeing, growth = [], []
    for row, r in enumerate(r_grid):
        values = distance * np.exp(2 * r * heights)
        statistics[row] = values
        agreeing.append(bool(values[-third:].max() <= bound_factor * values[:third].max()))
        growth.append(float(values[-1] / values[previous]) if values[previous] > 0 else 0.0)
    return BorgMarchenkoReport(
        list(map(float, r_grid)),
        heights.tolist(),
        float(ray_c),
        statistics,
        agreeing,
        growth,
    )
