"""Scenario configuration: a line-oriented ``dotted.key = value`` format.

Values are JSON where they parse as JSON and bare strings otherwise, so
``scenario = yeast`` and ``scenario = "yeast"`` mean the same thing.  A ``#``
starts a comment outside quoted strings.  Validation reports every problem
at once, each tagged with its line number.
"""

import hashlib
import json
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from squeezetrack.errors import ConfigError, DomainError
from squeezetrack.io import fmt
from squeezetrack.signal_chain import CARRIER_FREQ, OUTPUT_RATE, DemodConfig


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ChainSection(_Section):
    carrier_freq: float = Field(CARRIER_FREQ, gt=0)
    raw_rate: float = Field(4 * CARRIER_FREQ, gt=0)
    output_rate: float = Field(OUTPUT_RATE, gt=0)
    lowpass_cutoff: float = Field(5e4, gt=0)
    filter_taps: int = Field(140, ge=2)
    window: str = "hann"

    @model_validator(mode="after")
    def _buildable(self):
        if self.raw_rate <= 2 * self.carrier_freq:
            raise ValueError("raw_rate must exceed twice carrier_freq")
        try:
            self.demod().taps(self.raw_rate)
        except (DomainError, ValueError) as exc:
            raise ValueError(str(exc)) from None
        return self

    def demod(self):
        return DemodConfig(self.carrier_freq, self.output_rate, self.lowpass_cutoff, self.filter_taps, self.window)


class DetectionSection(_Section):
    efficiency: float = Field(0.85, gt=0, le=1)
    mode_overlap: float = Field(1.0e6, gt=0)  # 1/m
    scattered_flux: float = Field(4.2e9, gt=0)  # photons/s
    noiseless: bool = False


class NoiseSection(_Section):
    source_squeezing_db: float = Field(6.0, ge=0)
    loss: float = Field(0.19, ge=0, lt=1)
    # measured detected squeezing; null falls back to the loss model
    detected_db: Optional[float] = Field(2.8, ge=0)
    local_oscillator_power: float = Field(100e-6, gt=0)
    trap_power: float = Field(0.170, ge=0)
    trap_leak_fraction: float = Field(7e-5, ge=0, le=1)
    technical_corner: float = Field(0.0, ge=0)
    technical_amplitude: float = Field(0.0, ge=0)
    lock_tone_freq: Optional[float] = Field(None, gt=0)
    lock_tone_amplitude: float = Field(0.0, ge=0)


class TrapSection(_Section):
    stiffness: float = Field(1e-7, gt=0)
    drag: float = Field(1.8849555921538759e-08, gt=0)
    temperature: float = Field(295.0, gt=0)


class DiffusionSection(_Section):
    diffusion_constant: float = Field(1e-14, gt=0)
    alpha_mean: float = Field(0.81, gt=0, lt=2)
    alpha_min: float = Field(0.6, gt=0, lt=2)
    alpha_max: float = Field(1.0, gt=0, lt=2)
    alpha_sd: float = Field(0.1, ge=0)
    segment_duration: float = Field(0.05, gt=0)

    @model_validator(mode="after")
    def _ordered(self):
        if not (self.alpha_min <= self.alpha_mean <= self.alpha_max):
            raise ValueError("need alpha_min <= alpha_mean <= alpha_max")
        if self.alpha_sd == 0 and self.alpha_min != self.alpha_max and self.alpha_mean in (self.alpha_min, self.alpha_max):
            raise ValueError("alpha_mean on a bound needs alpha_sd > 0 or alpha_min == alpha_max")
        return self


class RecordSection(_Section):
    duration: float = Field(0.1, gt=0)


class EstimationSection(_Section):
    lag_min: Optional[float] = Field(None, gt=0)  # null: one output sample
    lag_max: float = Field(0.01, gt=0)
    lags_per_decade: int = Field(10, ge=1)
    window_length: float = Field(0.05, gt=0)
    hop: float = Field(0.01, gt=0)
    window_lag_max: Optional[float] = Field(None, gt=0)  # null: window_length / 10
    subtract_noise_offset: bool = True

    @model_validator(mode="after")
    def _windows(self):
        if self.lag_min is not None and self.lag_min >= self.lag_max:
            raise ValueError("lag_min must be below lag_max")
        if self.window_lag_max is not None and self.window_length < 10 * self.window_lag_max:
            raise ValueError("window_length must be at least 10x window_lag_max")
        return self


class SeedsSection(_Section):
    trajectory: int = Field(ge=0, lt=2**64)
    noise: int = Field(ge=0, lt=2**64)


class SpectraSection(_Section):
    raw_duration: float = Field(0.005, gt=0)
    raw_segment: int = Field(4096, ge=8)
    demod_segment: int = Field(1024, ge=8)
    sweep_max_power: float = Field(0.5, gt=0)
    sweep_points: int = Field(51, ge=2)
    technical_scale: float = Field(2.0, gt=0)


class BudgetSection(_Section):
    measured_db: float = Field(2.8, ge=0)
    margin_db: float = 2.4
    precision_gain: float = Field(0.22, ge=0, lt=1)


class ScenarioConfig(_Section):
    scenario: Literal["beads", "yeast", "spectra", "budget"]
    replicate_count: int = Field(1, ge=1)
    output_dir: Optional[str] = None
    seeds: SeedsSection
    record: RecordSection = RecordSection()
    chain: ChainSection = ChainSection()
    detection: DetectionSection = DetectionSection()
    noise: NoiseSection = NoiseSection()
    trap: TrapSection = TrapSection()
    diffusion: DiffusionSection = DiffusionSection()
    estimation: EstimationSection = EstimationSection()
    spectra: SpectraSection = SpectraSection()
    budget: BudgetSection = BudgetSection()

    @model_validator(mode="after")
    def _record_fits(self):
        demod = self.chain.demod()
        dt = demod.decimation(self.chain.raw_rate) / self.chain.raw_rate
        if self.scenario in ("beads", "yeast"):
            if self.record.duration < 10 * dt:
                raise ValueError("record.duration is shorter than ten output samples")
            if self.estimation.lag_max >= self.record.duration:
                raise ValueError("estimation.lag_max must be shorter than record.duration")
        if self.scenario == "yeast" and self.estimation.window_length > self.record.duration:
            raise ValueError("estimation.window_length exceeds record.duration")
        return self

    def canonical_text(self):
        """Every setting, defaults included, one sorted ``key = value`` per line.

        ``output_dir`` is left out: where a run is written does not change it.
        """
        flat = _flatten(self.model_dump(exclude={"output_dir"}))
        return "".join(f"{k} = {fmt(v)}\n" for k, v in sorted(flat.items()))

    def config_hash(self):
        return hashlib.sha256(self.canonical_text().encode()).hexdigest()

    def with_overrides(self, overrides):
        """Copy with ``{"dotted.key": value}`` settings replaced and revalidated."""
        data = self.model_dump()
        for key, value in overrides.items():
            node = data
            *parents, leaf = key.split(".")
            for p in parents:
                node = node[p]
            node[leaf] = value
        return ScenarioConfig.model_validate(data)


def _flatten(data, prefix=""):
    out = {}
    for key, value in data.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            out.update(_flatten(value, name + "."))
        else:
            out[name] = value
    return out


def _parse_value(text):
    text = text.strip()
    try:
        value, end = json.JSONDecoder().raw_decode(text)
    except json.JSONDecodeError:
        return text.split("#", 1)[0].strip()
    rest = text[end:].strip()
    if rest and not rest.startswith("#"):
        # e.g. "1e-3 s" or "yeast-like": not JSON after all
        return text.split("#", 1)[0].strip()
    return value


def parse_lines(text):
    """Parse config text into ``(nested_dict, line_of_key, errors)``."""
    data, lines, errors = {}, {}, []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or not key:
            errors.append(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
            continue
        parts = key.split(".")
        if not all(p.isidentifier() for p in parts):
            errors.append(f"line {lineno}: invalid key {key!r}")
            continue
        if key in lines:
            errors.append(f"line {lineno}: {key}: duplicate (first set on line {lines[key]})")
            continue
        node = data
        clash = False
        for p in parts[:-1]:
            child = node.setdefault(p, {})
            if not isinstance(child, dict):
                clash = True
                break
            node = child
        if clash or isinstance(node.get(parts[-1]), dict):
            errors.append(f"line {lineno}: {key}: conflicts with another key")
            continue
        node[parts[-1]] = _parse_value(value)
        lines[key] = lineno
    return data, lines, errors


def _locate(loc, lines):
    key = ".".join(str(p) for p in loc)
    if key in lines:
        return f"line {lines[key]}: {key}"
    # section-level problems: point at the first line inside the section
    inside = [n for k, n in lines.items() if not key or k.startswith(key + ".")]
    where = f"line {min(inside)}: " if inside else ""
    return f"{where}{key or '<config>'}"


def validate_config(text):
    """Return a validated :class:`ScenarioConfig` or raise ConfigError listing every problem."""
    data, lines, errors = parse_lines(text)
    try:
        cfg = ScenarioConfig.model_validate(data)
    except ValidationError as exc:
        for err in exc.errors():
            msg = err["msg"]
            if err["type"] == "missing":
                msg = "required field is missing"
            elif err["type"] == "extra_forbidden":
                msg = "unknown field"
            elif msg.startswith("Value error, "):
                msg = msg[len("Value error, "):]
            errors.append(f"{_locate(err['loc'], lines)}: {msg}")
        cfg = None
    if errors:
        raise ConfigError(errors)
    return cfg


def load_config(path):
    with open(path) as fh:
        return validate_config(fh.read())
