"""Validated command configuration.

Values are layered: model defaults, then the command's section of a JSON
config file, then command-line flags that were actually given.
"""
import json
import logging
import math
import typing as tp

from pydantic import BaseModel, ConfigDict, Field

from chiralroute.errors import ValidationError
from chiralroute.types import AveragingMeasure, Objective, ParamKind

logger = logging.getLogger(__name__)

CONFIG_ENV = "CHIRALROUTE_CONFIG"
DB_ENV = "CHIRALROUTE_DB"

# state routed in the noise comparisons: 0.7|1⟩ − i√(1 − 0.7²)|2⟩
DEFAULT_NOISE_ALPHA = 0.7
DEFAULT_NOISE_CHI = 1.5 * math.pi


class CommandConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    output: tp.Optional[str] = None


class RouterFields(CommandConfig):
    n: int = Field(20, ge=2)
    beta: float = 1.0
    phi: float = 0.0


class SuperpositionGridFields(BaseModel):
    alpha_points: int = Field(41, ge=1)
    chi_points: int = Field(64, ge=1)
    measure: AveragingMeasure = AveragingMeasure.UNIFORM


class HamiltonianConfig(RouterFields):
    n: int = Field(2, ge=2)
    full: bool = False
    input_port: int = Field(0, ge=0)
    output_port: int = Field(1, ge=0)


class ScanConfig(RouterFields, SuperpositionGridFields):
    kind: ParamKind = ParamKind.PHASE
    n: int = Field(40, ge=2)
    objective: Objective = Objective.LOCALIZED
    t_min: float = 0.0
    t_max: float = 50.0
    t_steps: int = 501
    # None picks the default axis for the scanned parameter
    param_min: tp.Optional[float] = None
    param_max: tp.Optional[float] = None
    param_steps: tp.Optional[int] = None
    threshold: tp.Optional[float] = Field(None, gt=0.0, lt=1.0)
    peaks_output: tp.Optional[str] = None
    workers: int = Field(1, ge=1)

    def param_axis(self) -> tp.Tuple[float, float, int]:
        if self.kind is ParamKind.PHASE:
            defaults = (0.0, 2.0 * math.pi, 256)
        else:
            defaults = (0.0, 40.0, 401)
        given = (self.param_min, self.param_max, self.param_steps)
        lo, hi, steps = (d if g is None else g for g, d in zip(given, defaults))
        return float(lo), float(hi), int(steps)


class Table1Config(CommandConfig, SuperpositionGridFields):
    row: str = "all"
    refine: bool = False
    check: bool = False


class NoiseConfig(RouterFields):
    model: tp.Literal["vonmises", "ou"] = "vonmises"
    phi: float = 4.712
    alpha: float = Field(DEFAULT_NOISE_ALPHA, ge=0.0, le=1.0)
    chi: float = DEFAULT_NOISE_CHI
    k: float = Field(12.5, ge=0.0)
    quadrature_points: int = Field(129, ge=8)
    theta: float = Field(1.0, gt=0.0)
    sigma: float = Field(0.4, ge=0.0)
    mu: tp.Optional[float] = None
    dt: float = Field(0.01, gt=0.0)
    trajectories: int = Field(2000, ge=2)
    seed: int = Field(0, ge=0, lt=2**64)
    t_min: float = Field(0.0, ge=0.0)
    t_max: float = 50.0
    t_steps: int = Field(501, ge=2)
    workers: int = Field(1, ge=1)


class VerifyConfig(CommandConfig):
    n_max: int = Field(8, ge=2)
    samples: int = Field(50, ge=1)
    seed: int = Field(0, ge=0)
    tolerance: float = Field(1e-9, gt=0.0)
    corrupt_isometry: bool = False


class OptimizeConfig(RouterFields, SuperpositionGridFields):
    kind: ParamKind = ParamKind.PHASE
    objective: Objective = Objective.AVERAGE
    phi: float = 4.712
    t_start: float = 18.55
    param_start: tp.Optional[float] = None
    t_min: tp.Optional[float] = None
    t_max: tp.Optional[float] = None
    param_min: tp.Optional[float] = None
    param_max: tp.Optional[float] = None
    tolerance: float = Field(1e-4, gt=0.0)


COMMAND_CONFIGS: tp.Dict[str, tp.Type[CommandConfig]] = {
    "hamiltonian": HamiltonianConfig,
    "scan": ScanConfig,
    "table1": Table1Config,
    "noise": NoiseConfig,
    "verify-reduction": VerifyConfig,
    "optimize": OptimizeConfig,
}


def read_config_file(path: tp.Optional[str]) -> tp.Dict[str, dict]:
    """Parse a JSON config file keyed by command name.

    Raises:
        ValidationError: unreadable file, non-object document or unknown command
    """
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            document = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read config file {path}: {exc}") from exc

    if not isinstance(document, dict):
        raise ValidationError("config file must contain a JSON object")
    unknown = sorted(set(document) - set(COMMAND_CONFIGS) - {"db"})
    if unknown:
        raise ValidationError(f"unknown config sections: {', '.join(unknown)}")
    for name, section in document.items():
        if name != "db" and not isinstance(section, dict):
            raise ValidationError(f"config section {name!r} must be an object")
    logger.debug("loaded config sections %s from %s", sorted(document), path)
    return document


_C = tp.TypeVar("_C", bound=CommandConfig)


def resolve(
    model: tp.Type[_C], file_section: tp.Optional[dict], flags: tp.Dict[str, tp.Any]
) -> _C:
    """Layer defaults < file section < flags that are not None.

    Raises:
        pydantic.ValidationError: unknown keys or invalid values
    """
    values = dict(file_section or {})
    values.update({key: value for key, value in flags.items() if value is not None})
    return model(**values)
