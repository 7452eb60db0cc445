"""
Model-description documents.

A document is a YAML mapping. Every physical quantity is written as
``{value: ..., units: ...}``; accepted units are converted to SI on ingest.
Unknown keys are rejected and validation errors name the offending field
and, when known, its line in the file.
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path
from typing import Annotated, List, Literal, Optional, Tuple, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .errors import ConfigurationError
from .fe_piezo_beam import BeamSection, PiezoSection, VoltageTopology, assemble
from .titop import DEFAULT_ZETA, DampingSpec

#: SI factor of each accepted unit, grouped by dimension
UNITS = {
    "length": {"m": 1.0, "cm": 1e-2, "mm": 1e-3, "um": 1e-6},
    "density": {"kg/m^3": 1.0, "kg/m3": 1.0, "g/cm^3": 1e3, "g/cm3": 1e3},
    "modulus": {"Pa": 1.0, "kPa": 1e3, "MPa": 1e6, "GPa": 1e9},
    "strain_constant": {"m/V": 1.0, "C/N": 1.0, "pm/V": 1e-12, "pC/N": 1e-12},
    "permittivity": {"F/m": 1.0, "nF/m": 1e-9, "pF/m": 1e-12},
}

PRESETS = ("table1",)


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class Quantity(_Strict):
    value: float
    units: str

    def si(self, dimension: str) -> float:
        table = UNITS[dimension]
        if self.units not in table:
            raise ValueError(f"units {self.units!r} not accepted for a {dimension}; "
                             f"use one of {sorted(table)}")
        return self.value * table[self.units]


def _check_units(q: Quantity, dimension: str) -> Quantity:
    q.si(dimension)
    return q


class BeamDoc(_Strict):
    length: Quantity
    n_elements: int = Field(gt=0)
    thickness: Quantity
    width: Quantity
    rho: Quantity
    E: Quantity

    @field_validator("length", "thickness", "width")
    @classmethod
    def _length(cls, q):
        return _check_units(q, "length")

    @field_validator("rho")
    @classmethod
    def _density(cls, q):
        return _check_units(q, "density")

    @field_validator("E")
    @classmethod
    def _modulus(cls, q):
        return _check_units(q, "modulus")

    def section(self) -> BeamSection:
        return BeamSection(self.length.si("length"), self.n_elements,
                           self.thickness.si("length"), self.width.si("length"),
                           self.rho.si("density"), self.E.si("modulus"))


class PiezoDoc(_Strict):
    thickness: Quantity
    width: Quantity
    rho: Quantity
    E: Quantity
    d31: Quantity
    eps33: Quantity
    coverage: Union[Literal["all"], List[int]] = "all"
    ip_formula: Literal["paper", "parallel_axis"] = "paper"

    @field_validator("thickness", "width")
    @classmethod
    def _length(cls, q):
        return _check_units(q, "length")

    @field_validator("rho")
    @classmethod
    def _density(cls, q):
        return _check_units(q, "density")

    @field_validator("E")
    @classmethod
    def _modulus(cls, q):
        return _check_units(q, "modulus")

    @field_validator("d31")
    @classmethod
    def _d31(cls, q):
        return _check_units(q, "strain_constant")

    @field_validator("eps33")
    @classmethod
    def _eps(cls, q):
        return _check_units(q, "permittivity")

    def section(self, ip_formula: Optional[str] = None) -> PiezoSection:
        cov = None if self.coverage == "all" else tuple(self.coverage)
        return PiezoSection(self.thickness.si("length"), self.width.si("length"),
                            self.rho.si("density"), self.E.si("modulus"),
                            self.d31.si("strain_constant"), self.eps33.si("permittivity"),
                            covered_elements=cov, ip_formula=ip_formula or self.ip_formula)


class DampingDoc(_Strict):
    zeta: float = Field(DEFAULT_ZETA, ge=0.0, lt=1.0)


class ChainDoc(_Strict):
    components: int = Field(1, ge=1)
    base: Literal["clamped_with_excitation", "fixed"] = "clamped_with_excitation"
    tip: Literal["free", "loaded"] = "free"


class ControlDoc(_Strict):
    sensor: str = "b2.acc_Q.w"
    actuator: str = "b1.v.0"
    gain: Optional[float] = Field(None, ge=0.0)


class SignalDoc(_Strict):
    channel: str
    kind: Literal["impulse", "step", "sine_burst", "table"] = "step"
    amplitude: float = 1.0
    frequency: float = 0.0
    cycles: float = 1.0
    times: Optional[List[float]] = None
    values: Optional[List[float]] = None


class BuildExp(_Strict):
    op: Literal["build", "export"]


class BodeExp(_Strict):
    op: Literal["bode"]
    omega_min: float = Field(1.0, gt=0.0)
    omega_max: float = Field(1e5, gt=0.0)
    points: int = Field(400, ge=2)
    spacing: Literal["log", "linear"] = "log"
    pairs: Optional[List[Tuple[str, str]]] = None


class LocusExp(_Strict):
    op: Literal["locus"]
    gains: Optional[str] = None


class SimulateExp(_Strict):
    op: Literal["simulate"]
    signals: Optional[List[SignalDoc]] = None
    t_end: float = Field(1.0, gt=0.0)
    dt: Optional[float] = Field(None, gt=0.0)
    record_every: int = Field(1, ge=1)
    closed_loop: bool = False


Experiment = Annotated[Union[BuildExp, BodeExp, LocusExp, SimulateExp],
                       Field(discriminator="op")]
OPS = ("build", "export", "bode", "locus", "simulate")


class ModelDoc(_Strict):
    beam: BeamDoc
    piezo: Optional[PiezoDoc] = None
    topology: Literal["shared", "per_element"] = "shared"
    damping: DampingDoc = DampingDoc()
    retain: Union[Literal["all"], int] = "all"
    chain: ChainDoc = ChainDoc()
    control: ControlDoc = ControlDoc()
    experiments: List[Experiment] = []
    output_dir: str = "out"

    @field_validator("retain")
    @classmethod
    def _retain(cls, v):
        if v != "all" and v < 1:
            raise ValueError("retain must be 'all' or a positive integer")
        return v

    # -- derived objects ---------------------------------------------------

    def fe_model(self, ip_formula: Optional[str] = None):
        beam = self.beam.section()
        if self.piezo is None:
            return assemble(beam)
        piezo = self.piezo.section(ip_formula)
        topo = VoltageTopology.from_mode(self.topology, piezo.coverage(beam))
        return assemble(beam, piezo, topo)

    def damping_spec(self) -> DampingSpec:
        return DampingSpec.uniform(self.damping.zeta)

    @property
    def m_retain(self) -> Optional[int]:
        return None if self.retain == "all" else int(self.retain)

    def experiment(self, op: str):
        for e in self.experiments:
            if e.op == op:
                return e
        return None


# -- loading ------------------------------------------------------------------

def _line_of(node, loc) -> Optional[int]:
    """Line (1-based) of the YAML node addressed by a pydantic error location."""
    line = node.start_mark.line + 1 if node is not None else None
    for key in loc:
        if isinstance(node, yaml.MappingNode):
            nxt = next((v for k, v in node.value if k.value == key), None)
        elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
            nxt = node.value[key]
        else:
            nxt = None
        if nxt is None:
            break
        node = nxt
        line = node.start_mark.line + 1
    return line


def _describe(exc: ValidationError, root, source: str) -> str:
    lines = []
    for err in exc.errors():
        raw = err["loc"]
        # drop the discriminator tag pydantic inserts after a list index
        loc = tuple(p for i, p in enumerate(raw)
                    if not (p in OPS and i and isinstance(raw[i - 1], int)))
        where = ".".join(str(p) for p in loc) or "<document>"
        line = _line_of(root, loc)
        at = f"{source}:{line}: " if line else f"{source}: "
        if err["type"] == "missing":
            lines.append(f"{at}missing required field '{where}'")
        elif err["type"] == "extra_forbidden":
            lines.append(f"{at}unknown key '{where}'")
        else:
            lines.append(f"{at}field '{where}': {err['msg']}")
    return "\n".join(dict.fromkeys(lines))


def parse(text: str, source: str = "<string>") -> ModelDoc:
    """Validate a YAML document; raises :class:`ConfigurationError`."""
    try:
        root = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"{source}: not valid YAML: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigurationError(f"{source}: top level must be a mapping")
    try:
        return ModelDoc.model_validate(data)
    except ValidationError as exc:
        raise ConfigurationError(_describe(exc, root, source)) from None


def load(path) -> ModelDoc:
    """Read a document from ``path`` or a bundled preset name (``table1``)."""
    if str(path) in PRESETS:
        return parse(preset_text(str(path)), f"preset:{path}")
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read {p}: {exc.strerror}") from None
    return parse(text, str(p))


def preset_text(name: str = "table1") -> str:
    if name not in PRESETS:
        raise ConfigurationError(f"unknown preset {name!r}; available: {PRESETS}")
    return resources.files("piezotitop.presets").joinpath(f"{name}.yaml").read_text()
