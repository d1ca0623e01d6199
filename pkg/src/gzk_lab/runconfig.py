"""
Run configuration: INI-style sectioned text parsed into validated pydantic models.
"""

import configparser
import hashlib
import io
import json
import logging
from typing import Any, Dict, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .analyticity import MZK_ALPHA, ZK_THETA, LedgerConstants, RadiusFitConfig
from .config import settings
from .dynamics import EquationSpec
from .errors import ConfigError
from .integrator import IntegratorConfig
from .probes.report import ProbeParams
from .spectral import Grid2D

logger = logging.getLogger(__name__)

Sections = Dict[str, Dict[str, str]]


def _split_floats(v: Any) -> Any:
    if isinstance(v, str):
        return [float(item) for item in v.split(",") if item.strip()]
    return v


class GevreySection(BaseModel):
    """sigma values tracked by M_sigma/E_sigma and the Gevrey index s."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    sigma_list: List[float] = [1e-3, 1e-2, 1e-1]
    s: float = 0.0
    track_radius: bool = True

    @field_validator("sigma_list", mode="before")
    @classmethod
    def _split_list(cls, v: Any) -> Any:
        return _split_floats(v)

    @field_validator("sigma_list")
    @classmethod
    def _nonnegative(cls, v: List[float]) -> List[float]:
        if any(sigma < 0 for sigma in v):
            raise ValueError("sigma values must be >= 0")
        return v


class LedgerSection(BaseModel):
    """Continuation constants plus the horizons and bound curves of radius-track."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    C: float = Field(default=1.0, gt=0)
    c0: float = Field(default=1.0, gt=0)
    d: Optional[float] = None
    theta: float = ZK_THETA
    alpha: float = MZK_ALPHA
    s: Optional[float] = None
    T_list: List[float] = [2.0, 4.0, 8.0, 16.0, 32.0]
    bound_c: float = Field(default=1.0, gt=0)
    bound_eps: float = Field(default=1e-2, gt=0)

    @field_validator("T_list", mode="before")
    @classmethod
    def _split_list(cls, v: Any) -> Any:
        return _split_floats(v)

    @field_validator("T_list")
    @classmethod
    def _positive_horizons(cls, v: List[float]) -> List[float]:
        if not v or any(T <= 0 for T in v):
            raise ValueError("T_list must be a nonempty list of positive horizons")
        return sorted(v)

    def constants(self, kind: Literal["zk", "mzk"]) -> LedgerConstants:
        """LedgerConstants for the kind; s defaults to 0 for ZK and 1 for mZK."""
        s = self.s if self.s is not None else (0.0 if kind == "zk" else 1.0)
        return LedgerConstants(
            C=self.C, c0=self.c0, d=self.d, theta=self.theta, alpha=self.alpha, s=s
        )


class GaussianData(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["gaussian"] = "gaussian"
    amplitude: float = 0.5
    width: float = Field(default=2.0, gt=0)


class SolitonData(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["soliton"] = "soliton"
    K: float = Field(default=0.5, gt=0)
    # Box centre when omitted
    x0: Optional[float] = None


class RandomData(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["random"] = "random"
    seed: int = 0
    taper: float = 4.0
    amplitude: float = 0.5


class FileData(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["file"] = "file"
    path: str


InitialData = Union[GaussianData, SolitonData, RandomData, FileData]

INITIAL_DATA_KINDS: Dict[str, type] = {
    "gaussian": GaussianData,
    "soliton": SolitonData,
    "random": RandomData,
    "file": FileData,
}


class RunSection(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    output_dir: str = settings.default_output_dir
    seed: int = 0


class RunConfig(BaseModel):
    """Everything one experiment needs; each section maps to one INI section."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    run: RunSection = RunSection()
    equation: EquationSpec = EquationSpec()
    grid: Grid2D = Grid2D()
    integrator: IntegratorConfig = IntegratorConfig()
    gevrey: GevreySection = GevreySection()
    radius: RadiusFitConfig = RadiusFitConfig()
    probes: ProbeParams = ProbeParams()
    ledger: LedgerSection = LedgerSection()
    initial_data: InitialData = Field(default_factory=GaussianData, discriminator="kind")

    @property
    def output_dir(self) -> str:
        return self.run.output_dir


SECTIONS: Dict[str, type] = {
    "run": RunSection,
    "equation": EquationSpec,
    "grid": Grid2D,
    "integrator": IntegratorConfig,
    "gevrey": GevreySection,
    "radius": RadiusFitConfig,
    "probes": ProbeParams,
    "ledger": LedgerSection,
}

SECTION_ORDER = [*SECTIONS, "initial_data"]


def _section_model(section: str, values: Dict[str, str]) -> type:
    if section == "initial_data":
        kind = values.get("kind", "gaussian")
        if kind not in INITIAL_DATA_KINDS:
            raise ConfigError(
                f"initial_data.kind: unknown kind '{kind}', expected one of "
                f"{', '.join(INITIAL_DATA_KINDS)}"
            )
        return INITIAL_DATA_KINDS[kind]
    if section not in SECTIONS:
        raise ConfigError(f"{section}: unknown section")
    return SECTIONS[section]


def _format_error(error: Dict[str, Any]) -> str:
    loc = [str(part) for part in error["loc"]]
    # Drop the union tag pydantic inserts after initial_data
    if loc[:1] == ["initial_data"] and len(loc) > 2 and loc[1] in INITIAL_DATA_KINDS:
        loc.pop(1)
    key = ".".join(part for part in loc if not part.isdigit())
    message = str(error["msg"]).removeprefix("Value error, ")
    return f"{key}: {message}"


def _new_parser() -> configparser.ConfigParser:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # type: ignore[assignment,method-assign]
    return parser


def _read_sections(text: str) -> Sections:
    parser = _new_parser()
    try:
        parser.read_string(text)
    except configparser.Error as e:
        raise ConfigError(f"unreadable config: {e}") from e
    return {section: dict(parser.items(section)) for section in parser.sections()}


def _validate(sections: Sections) -> RunConfig:
    data: Dict[str, Any] = {}
    for section, values in sections.items():
        model = _section_model(section, values)
        unknown = sorted(set(values) - set(model.model_fields))
        if unknown:
            raise ConfigError(f"{section}.{unknown[0]}: unknown key")
        if section == "initial_data":
            values = {"kind": "gaussian", **values}
        data[section] = values
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError("; ".join(_format_error(err) for err in e.errors())) from e


def parse_config(text: str) -> RunConfig:
    """
    Parse sectioned key-value text into a RunConfig.

    Missing sections and keys take their defaults; each default is logged.

    Args:
        text: INI-style text

    Returns:
        Validated RunConfig

    Raises:
        ConfigError: On an unknown section or key, a type mismatch or a broken invariant;
            the message starts with the dotted key
    """
    sections = _read_sections(text)
    cfg = _validate(sections)
    for section in SECTION_ORDER:
        given = sections.get(section, {})
        for key, value in getattr(cfg, section).model_dump(mode="json").items():
            if key not in given:
                logger.info(f"default {section}.{key} = {value}")
    return cfg


def _format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, list):
        return ", ".join(_format_value(v) for v in value)
    return str(value)


def _section_dicts(cfg: RunConfig) -> Sections:
    out: Sections = {}
    for section in SECTION_ORDER:
        values = getattr(cfg, section).model_dump(mode="json")
        out[section] = {k: _format_value(v) for k, v in values.items() if v is not None}
    return out


def _to_text(sections: Sections) -> str:
    parser = _new_parser()
    parser.read_dict(sections)
    buffer = io.StringIO()
    parser.write(buffer)
    return buffer.getvalue()


def serialize_config(cfg: RunConfig) -> str:
    """Canonical INI text; parse_config(serialize_config(cfg)) == cfg."""
    return _to_text(_section_dicts(cfg))


def config_hash(cfg: RunConfig) -> str:
    """SHA-256 of the sorted-key JSON dump; independent of key order in the source text."""
    canonical = json.dumps(cfg.model_dump(mode="json"), sort_keys=True)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def load_config(path: Optional[str]) -> RunConfig:
    """Read and parse a config file; None gives the all-default config."""
    if path is None:
        return parse_config("")
    try:
        with open(path, encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}") from e
    return parse_config(text)


def with_override(cfg: RunConfig, key: str, value: Any) -> RunConfig:
    """
    Copy of cfg with one dotted key replaced, revalidated.

    Raises:
        ConfigError: If the key is unknown or the value breaks a section invariant
    """
    section, _, field = key.partition(".")
    if not field:
        raise ConfigError(f"{key}: expected a dotted key <section>.<field>")
    sections = _section_dicts(cfg)
    values = {**sections.get(section, {}), field: _format_value(value)}
    if field not in _section_model(section, values).model_fields:
        raise ConfigError(f"{key}: unknown key")
    sections[section] = values
    return _validate(_read_sections(_to_text(sections)))


def check_key(key: str) -> None:
    """
    Raises:
        ConfigError: If key is not a dotted <section>.<field> of RunConfig
    """
    section, _, field = key.partition(".")
    if not field:
        raise ConfigError(f"{key}: expected a dotted key <section>.<field>")
    if section == "initial_data":
        fields = {name for model in INITIAL_DATA_KINDS.values() for name in model.model_fields}
    else:
        fields = set(_section_model(section, {}).model_fields)
    if field not in fields:
        raise ConfigError(f"{key}: unknown key")
