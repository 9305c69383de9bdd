import logging
from dataclasses import dataclass
from typing import List, Optional

from omegaconf import OmegaConf
from omegaconf.errors import OmegaConfBaseException

from .errors import ValidationError

logging.basicConfig(level=logging.INFO, format="%(levelname)s: %(message)s")
logger = logging.getLogger(__name__)

CONTINUATIONS = ("constant", "zero")
MODELS = ("zero", "plane-wave", "sampled")


@dataclass
class RunConfig:
    """Every knob a run can set; defaults are the documented ones."""

    subcommand: str = "direct"
    potential: Optional[str] = None
    m1: int = 1
    m2: int = 1
    norm_bound: Optional[float] = None
    zgrid: str = "0:0:1,2:2:1"
    n: int = 400
    a: float = 200.0
    eta: Optional[float] = None
    l: Optional[float] = None
    margin: float = 0.25
    target_radius: float = 1e-8
    tol_structural: float = 1e-9
    tol_fourier: float = 0.05
    tail_moments: int = 2
    xi_step: Optional[float] = None
    continuation: str = "constant"
    cond_cap: float = 1e8
    roundtrip_tolerance: float = 5e-2
    model: str = "zero"
    amplitude: float = 1.0
    T: float = 0.1
    nt: int = 200
    phi0: str = "direct"
    boundary: Optional[str] = None
    weyl: Optional[str] = None
    weyl_b: Optional[str] = None
    ray_c: float = 1.0
    r_grid: str = "0.4:0.6:2"
    heights: str = "4:48:12"
    checks: str = "all"
    z: Optional[str] = None
    workers: int = 1
    seed: int = 0
    quick: bool = False
    out: Optional[str] = None


POSITIVE_KNOBS = (
    "n",
    "a",
    "margin",
    "target_radius",
    "tol_structural",
    "tol_fourier",
    "cond_cap",
    "roundtrip_tolerance",
    "nt",
    "workers",
    "m1",
    "m2",
)


def load_config(
    path: Optional[str] = None, overrides: Optional[List[str]] = None, **explicit
) -> RunConfig:
    """
    Layer dataclass defaults, a YAML file, dotlist overrides and explicit values.

    Args:
        path (Optional[str]): YAML file with any subset of the RunConfig keys.
        overrides (Optional[List[str]]): ``key=value`` strings.
        **explicit: Values from CLI flags; None entries are ignored.

    Returns:
        RunConfig: The validated configuration.

    Raises:
        ValidationError: On unknown keys, bad types or invalid values.
    """
    try:
        merged = OmegaConf.structured(RunConfig)
        if path:
            merged = OmegaConf.merge(merged, OmegaConf.load(path))
        if overrides:
            merged = OmegaConf.merge(merged, OmegaConf.from_dotlist(list(overrides)))
        given = {key: value for key, value in explicit.items() if value is not None}
        if given:
            merged = OmegaConf.merge(merged, OmegaConf.create(given))
        config = OmegaConf.to_object(merged)
    except (OmegaConfBaseException, OSError) as exc:
        raise ValidationError(f"invalid configuration: {exc}", module=__name__)
    validate_config(config)
    return config


def validate_config(config: RunConfig) -> None:
    for key in POSITIVE_KNOBS:
        value = getattr(config, key)
        if not value > 0:
            raise ValidationError(f"{key} must be positive, got {value}", module=__name__)
    for key in ("eta", "l", "xi_step"):
        value = getattr(config, key)
        if value is not None and not value > 0:
            raise ValidationError(f"{key} must be positive, got {value}", module=__name__)
    if config.n < 2:
        raise ValidationError("n must be at least 2", module=__name__)
    if config.tail_moments < 0:
        raise ValidationError("tail_moments must be non-negative", module=__name__)
    if config.continuation not in CONTINUATIONS:
        raise ValidationError(
            f"continuation must be one of {CONTINUATIONS}", module=__name__
        )
    if config.model not in MODELS:
        raise ValidationError(f"model must be one of {MODELS}", module=__name__)


def describe(config: RunConfig) -> str:
    """Printable key: value block of the non-empty settings."""
    lines = ["*** RUN CONFIG"]
    for key, value in OmegaConf.to_container(OmegaConf.structured(config)).items():
        if value is not None:
            lines.append(f"{key}: {value}")
    return "\n".join(lines)
