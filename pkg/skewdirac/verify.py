import json
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
from tqdm import tqdm

from .dirac import Propagator
from .errors import ValidationError
from .inverse import (
    borg_marchenko_check,
    compare_potentials,
    hea_decay_report,
    inverse_pipeline,
    recover_phi1,
    weyl_line_data,
)
from .nls import SolutionModel, evolve_R, evolve_weyl, transition
from .potential import PotentialGrid
from .snode import (
    Phi1Profile,
    SNodeTriple,
    factorization_check,
    identity_residual,
    observed_orders,
)
from .weyl import (
    closed_form_weyl,
    form_margin,
    matrix_ball,
    pair_representative,
    weyl_function,
)

logging.basicConfig(level=logging.INFO, format="%(levelname)s: %(message)s")
logger = logging.getLogger(__name__)


@dataclass
class CheckResult:
    check: str
    residual: float
    tolerance: float
    passed: bool
    detail: Dict[str, Any] = field(default_factory=dict)

    def as_dict(self) -> Dict[str, Any]:
        return {
            "check": self.check,
            "residual": json_ready(self.residual),
            "tolerance": json_ready(self.tolerance),
            "pass": bool(self.passed),
            "detail": json_ready(self.detail),
        }


def json_ready(value: Any) -> Any:
    """JSON-safe copy: numpy scalars to float, non-finite floats to strings."""
    if isinstance(value, dict):
        return {str(key): json_ready(item) for key, item in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [json_ready(item) for item in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(format(float(value), ".17g"))
        return value if math.isfinite(value) else str(value)
    return value


def check_zero(seed: int = 0, quick: bool = False, **_) -> CheckResult:
    """φ = 0 for v = 0, with error bound at most 2 e^{-2 Im z l}."""
    grid = PotentialGrid.zero(1, 1, 1.0, 100)
    worst, bound_ok = 0.0, True
    for z in (2j, 4j, 1 + 3j):
        sample = weyl_function(grid, z)
        worst = max(worst, float(np.abs(sample.phi).max()))
        bound_ok &= sample.error_bound <= 2 * math.exp(-2 * z.imag * grid.l)
    return CheckResult("zero", worst, 1e-10, worst <= 1e-10 and bound_ok)


def check_constant(seed: int = 0, quick: bool = False, **_) -> CheckResult:
    """Ball centers against i (sqrt(z^2 + c^2) - z) / c for c = 0.5 on l (η - M) >= 8."""
    c = 0.5
    grid = PotentialGrid.constant(c, 1, 1, 8.0, 400)
    propagator = Propagator(grid, cache_size=2)
    worst = 0.0
    for re in np.linspace(-2.0, 2.0, 5):
        for im in (1.5, 2.0, 3.0, 4.0):
            z = complex(re, im)
            phi = weyl_function(grid, z, target_radius=1e-9, propagator=propagator).phi
            worst = max(worst, abs(phi[0, 0] - closed_form_weyl(c, z)))
    return CheckResult("constant", worst, 1e-6, worst <= 1e-6)


def _random_contraction(
    rng: np.random.Generator, m2: int, m1: int, unit: bool
) -> np.ndarray:
    omega = rng.normal(size=(m2, m1)) + 1j * rng.normal(size=(m2, m1))
    omega /= np.linalg.norm(omega, 2)
    return omega if unit else omega * rng.uniform()


def ball_law_margins(
    grid: PotentialGrid, z: complex, rng: np.random.Generator, members: int = 8
) -> Dict[str, float]:
    """
    Signed margins of nesting, the semi-radius bounds and non-expansiveness.

    Every entry is >= 0 when the law holds.
    """
    propagator = Propagator(grid, cache_size=2)
    gram = propagator.gram_profile(z)
    gram_conj = propagator.gram_profile(np.conj(z))
    m1, m2 = grid.m1, grid.m2
    eta_gap = z.imag - grid.norm_bound

    radius_margin, right_margin = math.inf, math.inf
    for k, x in enumerate(grid.nodes):
        ball = matrix_ball(gram[k], m1, gram_conj[k])
        bound = (1 + 2 * eta_gap * x) ** -0.5
        radius_margin = min(radius_margin, bound - np.linalg.norm(ball.rho_l, 2))
        right_margin = min(right_margin, 1.0 - np.linalg.norm(ball.rho_r, 2))

    outer, inner = grid.n, grid.n // 2
    ball = matrix_ball(gram[outer], m1, gram_conj[outer])
    nesting = math.inf
    for index in range(members):
        member = ball.member(_random_contraction(rng, m2, m1, unit=index % 2 == 0))
        nesting = min(nesting, form_margin(gram[inner], member))
    return {
        "nesting": nesting,
        "rho_l_bound": radius_margin,
        "rho_r_bound": right_margin,
        "non_expansive": 1.0 - np.linalg.norm(ball.center, 2),
    }


def check_ball_laws(
    seed: int = 0,
    quick: bool = False,
    grid: Optional[PotentialGrid] = None,
    z: Optional[complex] = None,
    tol: float = 1e-9,
    **_,
) -> CheckResult:
    """Nesting, semi-radius bounds and non-expansiveness, each down to -tol."""
    rng = np.random.default_rng(seed)
    margins: Dict[str, float] = {}
    count = 1 if grid is not None else (10 if quick else 50)
    for index in range(count):
        if grid is None:
            m1, m2 = (int(value) for value in rng.choice([1, 2, 3], size=2))
            sample = PotentialGrid.random_smooth(m1, m2, 1.0, 100, 1.0, seed=seed + index)
        else:
            sample = grid
        point = z
        if point is None:
            point = complex(rng.uniform(-1.0, 1.0), sample.norm_bound + 2.0)
        for key, value in ball_law_margins(sample, point, rng).items():
            margins[key] = min(margins.get(key, math.inf), value)
    worst = min(margins.values())
    return CheckResult(
        "ball-laws",
        worst,
        -tol,
        worst >= -tol,
        detail={"margins": margins, "potentials": count},
    )


def check_radius(
    seed: int = 0,
    quick: bool = False,
    grid: Optional[PotentialGrid] = None,
    z: Optional[complex] = None,
    tol: float = 1e-9,
    **_,
) -> CheckResult:
    """||ρ_l(x, z)|| <= (1 + 2 (Im z - M) x)^{-1/2} at every node."""
    grid = grid or PotentialGrid.random_smooth(1, 2, 1.0, 200, 1.0, seed=seed)
    z = z if z is not None else 3j
    margins = ball_law_margins(grid, z, np.random.default_rng(seed), members=1)
    excess = -margins["rho_l_bound"]
    return CheckResult("radius", excess, tol, excess <= tol)


def _profile_for(grid: Optional[PotentialGrid], n: int, quick: bool) -> Phi1Profile:
    if grid is None:
        return Phi1Profile.constant_potential(0.5, 1.0, n)
    data = weyl_line_data(grid, a=100.0 if quick else 200.0)
    return recover_phi1(data, grid.l, n)


def check_p9(
    seed: int = 0,
    quick: bool = False,
    grid: Optional[PotentialGrid] = None,
    **_,
) -> CheckResult:
    """AS - SA^* + iΠΠ^* = O(h) with observed order >= 0.9 and S > 0."""
    ns = [50, 100, 200] if quick else [100, 200, 400]
    if grid is not None:
        data = weyl_line_data(grid, a=100.0 if quick else 200.0)
        profiles = [recover_phi1(data, grid.l, n) for n in ns]
    else:
        profiles = [_profile_for(None, n, quick) for n in ns]
    residuals, smallest = [], math.inf
    for profile in profiles:
        triple = SNodeTriple.from_profile(profile)
        residuals.append(identity_residual(triple))
        smallest = min(smallest, triple.kernel.min_eigenvalue())
    orders = observed_orders(ns, residuals)
    tolerance = residuals[0] * (ns[0] / ns[-1]) ** 0.9
    passed = residuals[-1] <= tolerance and min(orders) >= 0.9 and smallest > 0
    return CheckResult(
        "p9",
        residuals[-1],
        tolerance,
        passed,
        detail={
            "n": ns,
            "residuals": residuals,
            "orders": orders,
            "min_eigenvalue": smallest,
        },
    )


def _ratio(coarse: float, fine: float) -> float:
    return coarse / fine if fine > 0 else math.inf


def check_p17(
    seed: int = 0,
    quick: bool = False,
    grid: Optional[PotentialGrid] = None,
    z: Optional[complex] = None,
    **_,
) -> CheckResult:
    """
    u(x, z) = e^{ixz} u(x, 0) w_A(x, 2z) at x = l, for n and 2n.

    The constant potential uses its exact profile, the random smooth one goes
    through the Fourier recovery, and both must gain a factor 1.5 per doubling.
    A supplied potential only has to meet the residual bound.
    """
    z = z if z is not None else 3j
    ns = [100, 200] if quick else [200, 400]
    detail: Dict[str, Any] = {"n": ns}
    if grid is None:
        residuals = [
            factorization_check(
                PotentialGrid.constant(0.5, 1, 1, 1.0, n),
                Phi1Profile.constant_potential(0.5, 1.0, n),
                n,
                z,
            )
            for n in ns
        ]
        ratio = _ratio(residuals[0], residuals[1])
        detail.update(residuals=residuals, ratio=ratio)
        worst = residuals[-1]
        passed = worst <= 5e-3 and ratio >= 1.5
        if not quick:
            smooth = []
            for n in ns:
                planted = PotentialGrid.random_smooth(1, 1, 1.0, n, 1.0, seed=seed)
                smooth.append(factorization_check(planted, _profile_for(planted, n, quick), n, z))
            smooth_ratio = _ratio(smooth[0], smooth[1])
            detail["random"] = {"residuals": smooth, "ratio": smooth_ratio}
            worst = max(worst, smooth[-1])
            passed = passed and smooth[-1] <= 5e-3 and smooth_ratio >= 1.5
        return CheckResult("p17", worst, 5e-3, passed, detail=detail)

    residuals = []
    for n in ns:
        planted = PotentialGrid.from_function(
            lambda x: _interpolate(grid, x), grid.m1, grid.m2, grid.l, n, grid.norm_bound
        )
        profile = _profile_for(planted, n, quick)
        residuals.append(factorization_check(planted, profile, n, z))
    detail["residuals"] = residuals
    return CheckResult("p17", residuals[-1], 5e-3, residuals[-1] <= 5e-3, detail=detail)


def _interpolate(grid: PotentialGrid, x: float) -> np.ndarray:
    flat = grid.samples.reshape(grid.n + 1, -1)
    re = [np.interp(x, grid.nodes, flat[:, k].real) for k in range(flat.shape[1])]
    im = [np.interp(x, grid.nodes, flat[:, k].imag) for k in range(flat.shape[1])]
    return (np.asarray(re) + 1j * np.asarray(im)).reshape(grid.m1, grid.m2)


def check_hea(seed: int = 0, quick: bool = False, **_) -> CheckResult:
    """Remainder of φ against its main term shrinks by at least 1.6 from η to 4η."""
    c = 0.5
    profile = Phi1Profile.constant_potential(c, 1.0, 400)
    report = hea_decay_report(
        lambda z: np.array([[closed_form_weyl(c, z)]]),
        profile,
        re_values=np.linspace(-2.0, 2.0, 5).tolist(),
        eta=1.0,
    )
    worst = min(report.ratios)
    return CheckResult(
        "hea",
        worst,
        report.min_ratio,
        report.passed,
        detail={
            "ratios": report.ratios,
            "low": report.residual_low,
            "high": report.residual_high,
        },
    )


def _roundtrip_errors(planted: PotentialGrid, a: float) -> Dict[str, float]:
    data = weyl_line_data(planted, a=a)
    recovered = inverse_pipeline(data, planted.l, planted.n)
    return compare_potentials(recovered, planted)


def check_roundtrip(
    seed: int = 0,
    quick: bool = False,
    grid: Optional[PotentialGrid] = None,
    **_,
) -> CheckResult:
    """
    Direct then inverse; interior relative L2 error of v at most 5e-2.

    The full run repeats both planted potentials at (200, 100) and (400, 200)
    for (n, a); the random smooth one must shrink its error by 1.5 or more.
    """
    levels = [(200, 100.0)] if quick else [(200, 100.0), (400, 200.0)]
    if grid is not None:
        errors = _roundtrip_errors(grid, levels[-1][1])
        error = errors["relative_l2"]
        return CheckResult("roundtrip", error, 5e-2, error <= 5e-2, detail=errors)

    constant = [
        _roundtrip_errors(PotentialGrid.constant(0.5, 1, 1, 1.0, n), a)
        for n, a in levels
    ]
    detail: Dict[str, Any] = {"levels": levels, "constant": constant[-1]}
    worst = constant[-1]["relative_l2"]
    passed = worst <= 5e-2 and constant[-1]["max_error"] <= 2e-2
    if not quick:
        detail["constant_ratio"] = _ratio(
            constant[0]["relative_l2"], constant[-1]["relative_l2"]
        )
        random = [
            _roundtrip_errors(PotentialGrid.random_smooth(1, 2, 1.0, n, 1.0, seed=seed), a)
            for n, a in levels
        ]
        ratio = _ratio(random[0]["relative_l2"], random[-1]["relative_l2"])
        detail.update(random=random[-1], random_ratio=ratio)
        worst = max(worst, random[-1]["relative_l2"])
        passed = passed and random[-1]["relative_l2"] <= 5e-2 and ratio >= 1.5
    return CheckResult("roundtrip", worst, 5e-2, passed, detail=detail)


def bm_pair(n: int = 200):
    """Two potentials that agree on [0, 0.5] of [0, 1]."""
    first = PotentialGrid.zero(1, 1, 1.0, n, norm_bound=1.0)
    second = PotentialGrid.step(0.0, 1.0, 0.5, 1, 1, 1.0, n, norm_bound=1.0)
    return first, second


def check_bm(seed: int = 0, quick: bool = False, **_) -> CheckResult:
    first, second = bm_pair()
    report = borg_marchenko_check(
        lambda z: pair_representative(first, z),
        lambda z: pair_representative(second, z),
        ray_c=1.0,
        r_grid=[0.4, 0.6],
        heights=np.linspace(4.0, 48.0, 12),
    )
    passed = report.agreeing == [True, False] and report.growth[1] >= 10
    return CheckResult(
        "bm",
        report.growth[1],
        10.0,
        passed,
        detail={"agreeing": report.agreeing, "growth": report.growth},
    )


def check_nls(seed: int = 0, quick: bool = False, **_) -> CheckResult:
    """Zero model exactness, plane-wave consistency and the LFT group property."""
    z = 4j
    rng = np.random.default_rng(seed)
    phi0 = _random_contraction(rng, 1, 1, unit=False)
    zero = SolutionModel.zero()
    t = 0.1
    lft = evolve_weyl(phi0, evolve_R(zero, z, t, 2000).final).phi
    zero_error = float(np.abs(lft - np.exp(-2j * z**2 * t) * phi0).max())

    wave = SolutionModel.plane_wave(1.0)
    start = np.array([[closed_form_weyl(1.0, z)]])
    evolved = evolve_weyl(start, evolve_R(wave, z, t, 200).final).phi
    wave_error = abs(evolved[0, 0] - closed_form_weyl(np.exp(-0.1j), z))

    halfway = evolve_weyl(start, evolve_R(wave, z, t / 2, 100).final).phi
    composed = evolve_weyl(halfway, transition(wave, z, t / 2, t, 100)).phi
    group_error = float(np.abs(composed - evolved).max())

    passed = zero_error <= 1e-12 and wave_error <= 1e-4 and group_error <= 1e-6
    worst = max(zero_error / 1e-12, wave_error / 1e-4, group_error / 1e-6)
    return CheckResult(
        "nls",
        worst,
        1.0,
        passed,
        detail={"zero": zero_error, "plane_wave": wave_error, "group": group_error},
    )


CHECKS: Dict[str, Callable[..., CheckResult]] = {
    "zero": check_zero,
    "constant": check_constant,
    "ball-laws": check_ball_laws,
    "radius": check_radius,
    "p9": check_p9,
    "p17": check_p17,
    "hea": check_hea,
    "roundtrip": check_roundtrip,
    "bm": check_bm,
    "nls": check_nls,
}


def run_suite(
    names: Optional[Sequence[str]] = None,
    seed: int = 0,
    quick: bool = False,
    grid: Optional[PotentialGrid] = None,
    z: Optional[complex] = None,
    progress: bool = False,
    tol_structural: float = 1e-9,
) -> List[CheckResult]:
    """
    Run the named checks (all when None) in their registry order.

    ``tol_structural`` bounds the sign violations the structural checks
    (ball laws, radius bound) tolerate.
    """
    names = list(CHECKS) if not names else list(names)
    unknown = [name for name in names if name not in CHECKS]
    if unknown:
        raise ValidationError(
            f"unknown checks {unknown}; choose from {list(CHECKS)}", module=__name__
        )
    results = []
    for name in tqdm([name for name in CHECKS if name in names], disable=not progress):
        logger.info(f"Running check {name}")
        result = CHECKS[name](
            seed=seed, quick=quick, grid=grid, z=z, tol=tol_structural
        )
        level = logging.INFO if result.passed else logging.WARNING
        logger.log(level, f"{name}: residual {result.residual:.3e}, pass={result.passed}")
        results.append(result)
    return results


def report_json(results: Sequence[CheckResult]) -> str:
    entries = [result.as_dict() for result in results]
    return json.dumps(entries, indent=2, sort_keys=True) + "\n"


def write_report(results: Sequence[CheckResult], path: str) -> None:
    with open(path, "w") as fh:
        fh.write(report_json(results))
