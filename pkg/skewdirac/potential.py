import csv
import json
import logging
import os
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Union

import numpy as np

from .errors import DomainError, ValidationError

logging.basicConfig(level=logging.INFO, format="%(levelname)s: %(message)s")
logger = logging.getLogger(__name__)

ComplexLike = Union[complex, float, np.ndarray]


@dataclass(frozen=True)
class Signature:
    """
    Block sizes of a Dirac system.

    Defines j = diag(I_{m1}, -I_{m2}) and the self-adjoint block potential
    V = [[0, v], [v*, 0]].
    """

    m1: int
    m2: int

    def __post_init__(self):
        if self.m1 < 1 or self.m2 < 1:
            raise ValidationError(
                f"block sizes must be positive, got m1={self.m1}, m2={self.m2}",
                module=__name__,
            )

    @property
    def m(self) -> int:
        return self.m1 + self.m2

    @property
    def j(self) -> np.ndarray:
        return np.diag(np.concatenate([np.ones(self.m1), -np.ones(self.m2)])).astype(
            complex
        )

    def assemble(self, v: np.ndarray) -> np.ndarray:
        """
        Assemble V from one or a stack of m1 x m2 blocks.

        Args:
            v (np.ndarray): Array of shape (..., m1, m2).

        Returns:
            np.ndarray: Array of shape (..., m, m).
        """
        v = np.asarray(v, dtype=complex)
        big = np.zeros(v.shape[:-2] + (self.m, self.m), dtype=complex)
        big[..., : self.m1, self.m1 :] = v
        big[..., self.m1 :, : self.m1] = np.conj(np.swapaxes(v, -1, -2))
        return big

    def coefficient(self, v: np.ndarray, z: complex) -> np.ndarray:
        """Return the coefficient matrix i z j + j V of the Dirac system."""
        j = self.j
        return 1j * z * j + j @ self.assemble(v)


@dataclass(frozen=True)
class SpectralPoint:
    """A spectral parameter together with its distance to the half-plane boundary."""

    z: complex
    norm_bound: float

    @property
    def margin(self) -> float:
        return self.z.imag - self.norm_bound

    def require_margin(self, minimum: float, module: str = __name__, index=None):
        if self.margin < minimum or self.margin <= 0:
            raise DomainError(
                f"z={self.z} has Im z - M = {self.margin:.6g}, "
                f"need at least {minimum:.6g}",
                module=module,
                index=index,
            )


def operator_norms(samples: np.ndarray) -> np.ndarray:
    """Spectral norms of a stack of matrices."""
    return np.linalg.norm(samples, ord=2, axis=(-2, -1))


@dataclass
class PotentialGrid:
    """
    A matrix potential sampled on a uniform grid of [0, l].

    ``samples[k]`` is v(x_k) with x_k = k l / n. ``midpoints[k]`` is v at the
    centre of cell k; when not supplied it is the average of the two end nodes.
    The propagator only ever reads the midpoints.
    """

    m1: int
    m2: int
    l: float
    n: int
    samples: np.ndarray
    norm_bound: Optional[float] = None
    midpoints: Optional[np.ndarray] = None
    label: str = field(default="potential")

    def __post_init__(self):
        if self.n < 2:
            raise ValidationError(f"need n >= 2 cells, got {self.n}", module=__name__)
        if not self.l > 0:
            raise ValidationError(
                f"interval length must be positive, got {self.l}", module=__name__
            )
        self.signature = Signature(self.m1, self.m2)
        self.samples = np.asarray(self.samples, dtype=complex)
        expected = (self.n + 1, self.m1, self.m2)
        if self.samples.shape != expected:
            raise ValidationError(
                f"samples have shape {self.samples.shape}, expected {expected}",
                module=__name__,
            )
        if self.midpoints is None:
            self.midpoints = 0.5 * (self.samples[:-1] + self.samples[1:])
        else:
            self.midpoints = np.asarray(self.midpoints, dtype=complex)
            if self.midpoints.shape != (self.n, self.m1, self.m2):
                raise ValidationError(
                    f"midpoints have shape {self.midpoints.shape}, "
                    f"expected {(self.n, self.m1, self.m2)}",
                    module=__name__,
                )
        for name, values in (("samples", self.samples), ("midpoints", self.midpoints)):
            finite = np.isfinite(values).reshape(values.shape[0], -1).all(axis=1)
            bad = np.flatnonzero(~finite)
            if bad.size:
                raise ValidationError(
                    f"non-finite {name}", module=__name__, index=int(bad[0])
                )

        peak = self.peak_norm()
        if self.norm_bound is None:
            self.norm_bound = float(peak)
        elif self.norm_bound < 0 or peak > self.norm_bound * (1 + 1e-12) + 1e-14:
            raise ValidationError(
                f"norm bound M={self.norm_bound} is below max ||v|| = {peak:.17g}",
                module=__name__,
            )
        self.norm_bound = float(self.norm_bound)

    @property
    def h(self) -> float:
        return self.l / self.n

    @property
    def m(self) -> int:
        return self.m1 + self.m2

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.l, self.n + 1)

    def peak_norm(self) -> float:
        return float(
            max(operator_norms(self.samples).max(), operator_norms(self.midpoints).max())
        )

    def cell_matrices(self) -> np.ndarray:
        """Assembled V at every cell midpoint, shape (n, m, m)."""
        return self.signature.assemble(self.midpoints)

    @classmethod
    def zero(cls, m1: int, m2: int, l: float, n: int, norm_bound: float = 0.0):
        samples = np.zeros((n + 1, m1, m2), dtype=complex)
        return cls(m1, m2, l, n, samples, norm_bound=norm_bound, label="zero")

    @classmethod
    def constant(
        cls,
        value: ComplexLike,
        m1: int,
        m2: int,
        l: float,
        n: int,
        norm_bound: Optional[float] = None,
    ):
        block = _as_block(value, m1, m2)
        samples = np.broadcast_to(block, (n + 1, m1, m2)).copy()
        return cls(m1, m2, l, n, samples, norm_bound=norm_bound, label="constant")

    @classmethod
    def from_function(
        cls,
        fn: Callable[[float], ComplexLike],
        m1: int,
        m2: int,
        l: float,
        n: int,
        norm_bound: Optional[float] = None,
        label: str = "function",
    ):
        """Sample ``fn`` at the nodes and at the true cell midpoints."""
        h = l / n
        nodes = np.linspace(0.0, l, n + 1)
        centres = (np.arange(n) + 0.5) * h
        samples = np.stack([_as_block(fn(x), m1, m2) for x in nodes])
        midpoints = np.stack([_as_block(fn(x), m1, m2) for x in centres])
        return cls(
            m1, m2, l, n, samples, norm_bound=norm_bound, midpoints=midpoints, label=label
        )

    @classmethod
    def step(
        cls,
        before: ComplexLike,
        after: ComplexLike,
        cut: float,
        m1: int,
        m2: int,
        l: float,
        n: int,
        norm_bound: Optional[float] = None,
    ):
        """Piecewise-constant potential switching from ``before`` to ``after`` at ``cut``."""
        first = _as_block(before, m1, m2)
        second = _as_block(after, m1, m2)
        return cls.from_function(
            lambda x: first if x <= cut + 1e-12 * l else second,
            m1,
            m2,
            l,
            n,
            norm_bound=norm_bound,
            label="step",
        )

    @classmethod
    def random_smooth(
        cls,
        m1: int,
        m2: int,
        l: float,
        n: int,
        norm_bound: float = 1.0,
        seed: int = 0,
        modes: int = 4,
    ):
        """Random trigonometric potential whose peak norm is 0.9 times ``norm_bound``."""
        rng = np.random.default_rng(seed)
        decay = (1.0 + np.arange(modes)) ** 2
        coeffs = (
            rng.normal(size=(modes, m1, m2)) + 1j * rng.normal(size=(modes, m1, m2))
        ) / decay[:, None, None]
        phases = rng.uniform(0.0, 2 * np.pi, size=modes)
        freqs = np.pi * np.arange(modes) / l

        def series(xs: np.ndarray) -> np.ndarray:
            waves = np.cos(np.outer(freqs, xs) + phases[:, None])
            return np.einsum("kx,kij->xij", waves, coeffs)

        h = l / n
        nodes = np.linspace(0.0, l, n + 1)
        centres = (np.arange(n) + 0.5) * h
        samples, midpoints = series(nodes), series(centres)
        peak = max(operator_norms(samples).max(), operator_norms(midpoints).max())
        scale = 0.9 * norm_bound / peak if peak > 0 else 0.0
        return cls(
            m1,
            m2,
            l,
            n,
            samples * scale,
            norm_bound=norm_bound,
            midpoints=midpoints * scale,
            label=f"random-{seed}",
        )

    @classmethod
    def from_csv(
        cls,
        path: str,
        m1: int,
        m2: int,
        l: float,
        n: Optional[int] = None,
        norm_bound: Optional[float] = None,
    ):
        """Read node samples, one row per node, columns Re v_ij, Im v_ij row-major."""
        rows = read_numeric_csv(path)
        if rows.shape[1] != 2 * m1 * m2:
            raise ValidationError(
                f"{path}: expected {2 * m1 * m2} columns, found {rows.shape[1]}",
                module=__name__,
            )
        if n is None:
            n = rows.shape[0] - 1
        if rows.shape[0] != n + 1:
            raise ValidationError(
                f"{path}: expected {n + 1} rows, found {rows.shape[0]}", module=__name__
            )
        samples = (rows[:, 0::2] + 1j * rows[:, 1::2]).reshape(n + 1, m1, m2)
        return cls(
            m1, m2, l, n, samples, norm_bound=norm_bound, label=os.path.basename(path)
        )

    def to_csv(self, path: str) -> None:
        header = []
        for i in range(self.m1):
            for k in range(self.m2):
                header += [f"re_v_{i}_{k}", f"im_v_{i}_{k}"]
        flat = self.samples.reshape(self.n + 1, -1)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for row in flat:
                out = []
                for value in row:
                    out += [format_number(value.real), format_number(value.imag)]
                writer.writerow(out)

    @classmethod
    def from_descriptor(cls, descriptor: Union[str, Dict[str, Any]]):
        """
        Build a grid from a JSON descriptor (a path or an already-parsed dict).

        Recognised kinds are ``zero``, ``constant``, ``csv``, ``random`` and ``step``.

        Raises:
            ValidationError: If a required key is missing or the kind is unknown.
        """
        base_dir = ""
        if isinstance(descriptor, str):
            base_dir = os.path.dirname(os.path.abspath(descriptor))
            try:
                with open(descriptor, "r") as fh:
                    descriptor = json.load(fh)
            except (OSError, json.JSONDecodeError) as exc:
                raise ValidationError(f"cannot read descriptor: {exc}", module=__name__)

        try:
            m1, m2 = int(descriptor["m1"]), int(descriptor["m2"])
            l = float(descriptor["l"])
            n = int(descriptor["n"]) if "n" in descriptor else None
            kind = descriptor["kind"]
        except KeyError as exc:
            raise ValidationError(f"descriptor is missing {exc}", module=__name__)
        norm_bound = descriptor.get("norm_bound")
        if norm_bound is not None:
            norm_bound = float(norm_bound)

        if kind == "csv":
            path = descriptor.get("path")
            if path is None:
                raise ValidationError("csv descriptor needs a path", module=__name__)
            if not os.path.isabs(path):
                path = os.path.join(base_dir, path)
            return cls.from_csv(path, m1, m2, l, n, norm_bound=norm_bound)

        if n is None:
            raise ValidationError(f"'{kind}' descriptor needs n", module=__name__)
        if kind == "zero":
            return cls.zero(m1, m2, l, n, norm_bound=norm_bound or 0.0)
        if kind == "constant":
            return cls.constant(
                parse_value(descriptor.get("value", 0.0)), m1, m2, l, n, norm_bound
            )
        if kind == "random":
            return cls.random_smooth(
                m1,
                m2,
                l,
                n,
                norm_bound=norm_bound if norm_bound is not None else 1.0,
                seed=int(descriptor.get("seed", 0)),
                modes=int(descriptor.get("modes", 4)),
            )
        if kind == "step":
            return cls.step(
                parse_value(descriptor.get("value", 0.0)),
                parse_value(descriptor.get("after", 0.0)),
                float(descriptor.get("cut", l / 2)),
                m1,
                m2,
                l,
                n,
                norm_bound=norm_bound,
            )
        raise ValidationError(f"unknown potential kind '{kind}'", module=__name__)


def parse_value(value: Any) -> ComplexLike:
    """Decode a descriptor value: a number, ``{"re": .., "im": ..}`` or a nested list."""
    if isinstance(value, dict):
        re = np.asarray(value.get("re", 0.0), dtype=float)
        im = np.asarray(value.get("im", 0.0), dtype=float)
        return re + 1j * im
    if isinstance(value, (list, tuple)):
        return np.asarray(value, dtype=complex)
    return complex(value)


def _as_block(value: ComplexLike, m1: int, m2: int) -> np.ndarray:
    arr = np.asarray(value, dtype=complex)
    if arr.ndim == 0:
        return arr * np.eye(m1, m2, dtype=complex)
    if arr.size == m1 * m2:
        return arr.reshape(m1, m2)
    raise ValidationError(
        f"value of shape {arr.shape} does not fit an {m1}x{m2} block", module=__name__
    )


def read_csv_header(path: str) -> List[str]:
    """First row of a CSV file."""
    try:
        with open(path, "r", newline="") as fh:
            header = next(csv.reader(fh), None)
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc}", module=__name__)
    if not header:
        raise ValidationError(f"{path} is empty", module=__name__)
    return header


def read_numeric_csv(path: str) -> np.ndarray:
    """Read a comma separated table of floats, skipping one optional header row."""
    try:
        with open(path, "r", newline="") as fh:
            rows = [row for row in csv.reader(fh) if row]
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc}", module=__name__)
    if not rows:
        raise ValidationError(f"{path} is empty", module=__name__)
    try:
        [float(cell) for cell in rows[0]]
    except ValueError:
        rows = rows[1:]
    try:
        return np.array([[float(cell) for cell in row] for row in rows], dtype=float)
    except ValueError as exc:
        raise ValidationError(f"{path}: {exc}", module=__name__)


def format_number(value: float) -> str:
    """Locale independent 17 significant digit rendering."""
    text = format(float(value), ".17g")
    return "0" if text == "-0" else text
