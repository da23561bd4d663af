"""Quantum-limited displacement sensitivity.

All quantities are plain floats in SI units.  Decibel values are noise-power
decibels, ``dB = -10 log10(variance)``, so a squeezed variance of 0.525 is
2.8 dB of squeezing.
"""

from dataclasses import dataclass
import math

from squeezetrack.errors import DomainError


def _require_positive(**values):
    for name, v in values.items():
        if not (v > 0) or not math.isfinite(v):
            raise DomainError(f"{name} must be finite and > 0, got {v!r}")


@dataclass(frozen=True)
class DetectionModel:
    """Everything that fixes the displacement sensitivity per detected photon.

    ``mode_overlap`` is the overlap between the position-derivative of the
    scattered mode and the detection mode, in 1/m.
    """

    efficiency: float
    mode_overlap: float
    scattered_flux: float
    squeezed_variance: float = 1.0

    def __post_init__(self):
        if not (0 < self.efficiency <= 1):
            raise DomainError(f"efficiency must be in (0, 1], got {self.efficiency!r}")
        _require_positive(
            mode_overlap=self.mode_overlap,
            scattered_flux=self.scattered_flux,
            squeezed_variance=self.squeezed_variance,
        )


@dataclass(frozen=True)
class ScatteringGeometry:
    cross_section: float  # m^2
    incident_flux: float  # photons/s
    beam_width: float  # m

    def __post_init__(self):
        _require_positive(
            cross_section=self.cross_section,
            incident_flux=self.incident_flux,
            beam_width=self.beam_width,
        )


@dataclass(frozen=True)
class SqueezingBudget:
    """Squeezing source and the losses between it and the detector.

    Powers are in watts.  ``trap_leak_power`` is the trapping-laser power that
    reaches the detector (see :func:`leak_power`).
    """

    source_squeezing_db: float
    loss: float
    local_oscillator_power: float
    trap_leak_power: float = 0.0

    def __post_init__(self):
        if not (self.source_squeezing_db >= 0) or not math.isfinite(self.source_squeezing_db):
            raise DomainError(
                f"source_squeezing_db must be finite and >= 0, got {self.source_squeezing_db!r}"
            )
        if not (0 <= self.loss < 1):
            raise DomainError(f"loss must be in [0, 1), got {self.loss!r}")
        _require_positive(local_oscillator_power=self.local_oscillator_power)
        if not (self.trap_leak_power >= 0) or not math.isfinite(self.trap_leak_power):
            raise DomainError(f"trap_leak_power must be finite and >= 0, got {self.trap_leak_power!r}")

    @property
    def efficiency(self):
        return 1.0 - self.loss

    @property
    def source_variance(self):
        return db_to_variance(self.source_squeezing_db)


def leak_power(trap_power, leak_fraction):
    """Trap power reaching the detector."""
    if trap_power < 0 or leak_fraction < 0:
        raise DomainError("trap_power and leak_fraction must be >= 0")
    return trap_power * leak_fraction


def scattered_flux(geom):
    """Photon flux scattered by a particle centred in a Gaussian beam (photons/s)."""
    return geom.cross_section * geom.incident_flux / (4.0 * math.pi * geom.beam_width**2)


def qnl(model):
    """Quantum noise limit on displacement sensitivity, m/sqrt(Hz)."""
    return 1.0 / (math.sqrt(model.efficiency) * math.sqrt(model.scattered_flux) * model.mode_overlap)


def detected_variance(efficiency, variance):
    """Squeezed variance left after detection with the given efficiency."""
    if not (0 < efficiency <= 1):
        raise DomainError(f"efficiency must be in (0, 1], got {efficiency!r}")
    if not (variance > 0):
        raise DomainError(f"variance must be > 0, got {variance!r}")
    return 1.0 - efficiency * (1.0 - variance)


def measured_sensitivity(model):
    """Achievable sensitivity with squeezed variance ``model.squeezed_variance``.

    Reduces to :func:`qnl` exactly when the variance is 1.
    """
    factor = 1.0 - model.efficiency * (1.0 - model.squeezed_variance)
    if not (factor > 0):
        raise DomainError(f"1 - efficiency*(1 - V) = {factor!r} is not positive")
    if factor == 1.0:
        return qnl(model)
    return math.sqrt(factor) * qnl(model)


def stringent_qnl(model):
    """Quantum limit assuming perfect detection efficiency in the classical case."""
    return 1.0 / (math.sqrt(model.scattered_flux) * model.mode_overlap)


def leak_admixture(variance, lo_power, leak_power):
    """Variance after mixing shot-noise-limited leak light into the detected field.

    The leaked photons carry shot noise (variance 1) and are weighted by power
    against the local oscillator.
    """
    if not (variance > 0):
        raise DomainError(f"variance must be > 0, got {variance!r}")
    if not (lo_power > 0):
        raise DomainError(f"lo_power must be > 0, got {lo_power!r}")
    if leak_power < 0:
        raise DomainError(f"leak_power must be >= 0, got {leak_power!r}")
    if leak_power == 0:
        return variance
    if math.isinf(leak_power):
        return 1.0
    # (V P_lo + P_leak) / (P_lo + P_leak), arranged so that rounding keeps it
    # monotone in leak_power and never pushes V <= 1 above 1
    weight = 1.0 / (1.0 + lo_power / leak_power)
    mixed = variance + (1.0 - variance) * weight
    return min(mixed, 1.0) if variance <= 1 else mixed


def trap_leak_variance(budget, efficiency=None, detected=None):
    """Effective variance at the detector including trap-light leakage.

    ``efficiency`` defaults to ``1 - budget.loss``.  ``detected`` overrides the
    loss-model detected variance with a measured value.
    """
    if detected is None:
        eta = budget.efficiency if efficiency is None else efficiency
        detected = detected_variance(eta, budget.source_variance)
    return leak_admixture(detected, budget.local_oscillator_power, budget.trap_leak_power)


def variance_to_db(variance):
    if not (variance > 0):
        raise DomainError(f"variance must be > 0, got {variance!r}")
    return -10.0 * math.log10(variance)


def db_to_variance(db):
    return 10.0 ** (-db / 10.0)


def power_reduction(db):
    """Fractional probe-power reduction that squeezing of ``db`` affords at equal sensitivity."""
    return 1.0 - db_to_variance(db)


def stringent_margin_db(margin_db, efficiency):
    """Margin below the perfect-efficiency quantum limit, given a margin below the QNL."""
    if not (0 < efficiency <= 1):
        raise DomainError(f"efficiency must be in (0, 1], got {efficiency!r}")
    return margin_db + 10.0 * math.log10(efficiency)


def measurement_rate_gain(precision_gain):
    """Extra measurement rate at fixed precision, given a fractional precision gain.

    An averaged estimate's error scales as (number of measurements)^(-1/2).
    """
    if not (0 <= precision_gain < 1):
        raise DomainError(f"precision gain must be in [0, 1), got {precision_gain!r}")
    return (1.0 - precision_gain) ** -2 - 1.0


def budget_report(
    measured_db=2.8,
    yeast_margin_db=2.4,
    efficiency=0.85,
    precision_gain=0.22,
):
    """Headline numbers derived from the measured squeezing figures."""
    return {
        "detected_variance": db_to_variance(measured_db),
        "power_reduction": power_reduction(yeast_margin_db),
        "stringent_margin_db": stringent_margin_db(yeast_margin_db, efficiency),
        "rate_gain": measurement_rate_gain(precision_gain),
    }
