import logging
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np
from scipy.linalg import expm

from .errors import ConditioningError, OverflowDomainError, ValidationError
from .potential import Signature, read_numeric_csv

logging.basicConfig(level=logging.INFO, format="%(levelname)s: %(message)s")
logger = logging.getLogger(__name__)

Field = Callable[[float, float], np.ndarray]


@dataclass
class SolutionModel:
    """A solution v(x, t) of 2 v_t + i (v_xx + 2 v v^* v) = 0 and its x-derivative."""

    kind: str
    m1: int
    m2: int
    field: Field
    field_x: Field
    norm_bound: float = 0.0
    amplitude: Optional[np.ndarray] = None
    frequency: float = 0.0

    @property
    def signature(self) -> Signature:
        return Signature(self.m1, self.m2)

    def v(self, x: float, t: float) -> np.ndarray:
        return np.asarray(self.field(x, t), dtype=complex).reshape(self.m1, self.m2)

    def v_x(self, x: float, t: float) -> np.ndarray:
        return np.asarray(self.field_x(x, t), dtype=complex).reshape(self.m1, self.m2)

    @classmethod
    def zero(cls, m1: int = 1, m2: int = 1) -> "SolutionModel":
        block = np.zeros((m1, m2), dtype=complex)
        return cls("zero", m1, m2, lambda x, t: block, lambda x, t: block)

    @classmethod
    def plane_wave(cls, amplitude) -> "SolutionModel":
        """v = A e^{-i |A|^2 t}; requires A A^* A = |A|^2 A."""
        amplitude = np.atleast_2d(np.asarray(amplitude, dtype=complex))
        m1, m2 = amplitude.shape
        sigma2 = float(np.linalg.norm(amplitude, 2) ** 2)
        cubic = amplitude @ amplitude.conj().T @ amplitude
        if np.abs(cubic - sigma2 * amplitude).max() > 1e-12 * (1 + sigma2) ** 1.5:
            raise ValidationError(
                "plane-wave amplitude must satisfy A A^* A = |A|^2 A", module=__name__
            )
        zero = np.zeros((m1, m2), dtype=complex)
        return cls(
            "plane-wave",
            m1,
            m2,
            lambda x, t: amplitude * np.exp(-1j * sigma2 * t),
            lambda x, t: zero,
            norm_bound=np.sqrt(sigma2),
            amplitude=amplitude,
            frequency=sigma2,
        )

    @classmethod
    def from_callables(
        cls, field: Field, field_x: Field, m1: int, m2: int, norm_bound: float = 0.0
    ) -> "SolutionModel":
        return cls("sampled", m1, m2, field, field_x, norm_bound=norm_bound)

    @classmethod
    def from_boundary_csv(cls, path: str, m1: int, m2: int) -> "SolutionModel":
        """
        Boundary data at x = 0: columns t, Re/Im v_ij, Re/Im (v_x)_ij.

        Values are interpolated linearly in t; away from x = 0 the field is
        extended linearly with the supplied slope.
        """
        rows = read_numeric_csv(path)
        width = 2 * m1 * m2
        if rows.shape[1] != 1 + 2 * width:
            raise ValidationError(
                f"{path}: expected {1 + 2 * width} columns, found {rows.shape[1]}",
                module=__name__,
            )
        times = rows[:, 0]
        if np.any(np.diff(times) <= 0):
            raise ValidationError(f"{path}: times must increase", module=__name__)
        values = rows[:, 1 : 1 + width]
        slopes = rows[:, 1 + width :]
        v0 = (values[:, 0::2] + 1j * values[:, 1::2]).reshape(-1, m1, m2)
        vx = (slopes[:, 0::2] + 1j * slopes[:, 1::2]).reshape(-1, m1, m2)

        def interpolate(table: np.ndarray, t: float) -> np.ndarray:
            flat = table.reshape(times.size, -1)
            re = [np.interp(t, times, flat[:, k].real) for k in range(flat.shape[1])]
            im = [np.interp(t, times, flat[:, k].imag) for k in range(flat.shape[1])]
            return (np.asarray(re) + 1j * np.asarray(im)).reshape(m1, m2)

        peak = float(np.linalg.norm(v0, ord=2, axis=(-2, -1)).max())
        return cls(
            "sampled",
            m1,
            m2,
            lambda x, t: interpolate(v0, t) + x * interpolate(vx, t),
            lambda x, t: interpolate(vx, t),
            norm_bound=peak,
        )


class ZeroCurvaturePair:
    """G = i z j + j V and F = i (z^2 j - i z j V - (V_x + j V^2) / 2)."""

    def __init__(self, model: SolutionModel):
        self.model = model
        self.signature = model.signature
        self.j = self.signature.j

    def G(self, x: float, t: float, z: complex) -> np.ndarray:
        return self.signature.coefficient(self.model.v(x, t), z)

    def F(self, x: float, t: float, z: complex) -> np.ndarray:
        big_v = self.signature.assemble(self.model.v(x, t))
        big_vx = self.signature.assemble(self.model.v_x(x, t))
        j = self.j
        return 1j * (
            z**2 * j - 1j * z * j @ big_v - 0.5 * (big_vx + j @ big_v @ big_v)
        )


def zero_curvature_residual(
    model: SolutionModel, x: float, t: float, z: complex, h: float = 1e-3
) -> float:
    """||G_t - F_x + [G, F]|| with central differences of step h."""
    pair = ZeroCurvaturePair(model)
    g_t = (pair.G(x, t + h, z) - pair.G(x, t - h, z)) / (2 * h)
    f_x = (pair.F(x + h, t, z) - pair.F(x - h, t, z)) / (2 * h)
    g, f = pair.G(x, t, z), pair.F(x, t, z)
    return float(np.linalg.norm(g_t - f_x + g @ f - f @ g, 2))


def nls_residual(model: SolutionModel, x: float, t: float, h: float = 1e-3) -> float:
    """||2 v_t + i (v_xx + 2 v v^* v)|| with central differences."""
    v = model.v(x, t)
    v_t = (model.v(x, t + h) - model.v(x, t - h)) / (2 * h)
    v_xx = (model.v(x + h, t) - 2 * v + model.v(x - h, t)) / h**2
    return float(np.linalg.norm(2 * v_t + 1j * (v_xx + 2 * v @ v.conj().T @ v), 2))


@dataclass
class TimePropagator:
    """R(t, z) on a uniform grid of [t0, t0 + T], R(t0, z) = I."""

    z: complex
    times: np.ndarray
    R: np.ndarray

    @property
    def final(self) -> np.ndarray:
        return self.R[-1]


def evolve_R(
    model: SolutionModel,
    z: complex,
    T: float,
    nt: int,
    t0: float = 0.0,
    x: float = 0.0,
) -> TimePropagator:
    """
    Integrate R_t = F(x, t, z) R from t0 with classical RK4.

    Raises:
        OverflowDomainError: If R stops being finite or exceeds 1e300.
    """
    if nt < 1 or T < 0:
        raise ValidationError("need nt >= 1 and T >= 0", module=__name__)
    pair = ZeroCurvaturePair(model)
    m = model.m1 + model.m2
    dt = T / nt
    times = t0 + dt * np.arange(nt + 1)
    R = np.empty((nt + 1, m, m), dtype=complex)
    R[0] = np.eye(m)
    for k in range(nt):
        t = times[k]
        current = R[k]
        f_start = pair.F(x, t, z)
        f_mid = pair.F(x, t + dt / 2, z)
        f_end = pair.F(x, t + dt, z)
        k1 = f_start @ current
        k2 = f_mid @ (current + 0.5 * dt * k1)
        k3 = f_mid @ (current + 0.5 * dt * k2)
        k4 = f_end @ (current + dt * k3)
        R[k + 1] = current + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        peak = np.abs(R[k + 1]).max()
        if not np.isfinite(peak) or peak > 1e300:
            raise OverflowDomainError(f"R overflows at z={z}", module=__name__, index=k)
    return TimePropagator(complex(z), times, R)


def transition(
    model: SolutionModel, z: complex, t0: float, t1: float, nt: int
) -> np.ndarray:
    """R(t1, z) R(t0, z)^{-1}, integrated directly from t0."""
    return evolve_R(model, z, t1 - t0, nt, t0=t0).final


def plane_wave_propagator(model: SolutionModel, z: complex, t: float) -> np.ndarray:
    """R(t, z) for a plane wave from the gauge R = D(t) exp(t (F_0 + i ω j / 2))."""
    if model.kind != "plane-wave":
        raise ValidationError("gauge oracle needs a plane-wave model", module=__name__)
    j = model.signature.j
    f0 = ZeroCurvaturePair(model).F(0.0, 0.0, z)
    gauge = np.diag(np.exp(-0.5j * model.frequency * t * np.diag(j).real))
    return gauge @ expm(t * (f0 + 0.5j * model.frequency * j))


@dataclass
class WeylEvolution:
    phi: np.ndarray
    cond: float


def evolve_weyl(phi0: np.ndarray, R: np.ndarray, cond_cap: float = 1e8) -> WeylEvolution:
    """
    φ(t) = (R21 + R22 φ0)(R11 + R12 φ0)^{-1}.

    Raises:
        ConditioningError: If the denominator's condition number exceeds ``cond_cap``.
    """
    phi0 = np.atleast_2d(np.asarray(phi0, dtype=complex))
    m1 = phi0.shape[1]
    denominator = R[:m1, :m1] + R[:m1, m1:] @ phi0
    numerator = R[m1:, :m1] + R[m1:, m1:] @ phi0
    cond = float(np.linalg.cond(denominator))
    if not np.isfinite(cond) or cond > cond_cap:
        raise ConditioningError(
            f"LFT denominator condition number {cond:.3g} exceeds {cond_cap:.3g}",
            module=__name__,
        )
    return WeylEvolution(np.linalg.solve(denominator.T, numerator.T).T, cond)


@dataclass
class ContractivityPoint:
    z: complex
    defect: float
    in_region: bool


def contractivity_scan(
    model: SolutionModel,
    z_values: Sequence[complex],
    T: float,
    nt: int,
    tol: float = 1e-9,
) -> List[ContractivityPoint]:
    """Largest eigenvalue of R(t, z)^* j R(t, z) - j over the time grid, per z."""
    j = model.signature.j
    points = []
    for z in z_values:
        R = evolve_R(model, z, T, nt).R
        forms = np.conj(np.swapaxes(R, -1, -2)) @ j @ R - j
        forms = 0.5 * (forms + np.conj(np.swapaxes(forms, -1, -2)))
        defect = float(np.linalg.eigvalsh(forms).max())
        points.append(ContractivityPoint(complex(z), defect, defect <= tol))
    inside = sum(point.in_region for point in points)
    logger.info(f"j-contractivity holds at {inside} of {len(points)} points")
    return points
