"""Per-frame exposure time and rolling-shutter readout duration."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

from utils.errors import UsageError
from utils.seeding import stream

MAX_EXPOSURE = 0.1


class BadSensorModel(UsageError):
    code = "BAD_SENSOR_MODEL"


@dataclass(frozen=True)
class ExposureModel:
    """Fixed exposure, or uniform in ``range`` seconds."""

    mode: Literal["fixed", "uniform"] = "fixed"
    value: float = 0.02
    range: tuple[float, float] = (0.0, MAX_EXPOSURE)
    cap: float = MAX_EXPOSURE

    @staticmethod
    def fixed(value: float) -> "ExposureModel":
        return ExposureModel("fixed", value=value)

    @staticmethod
    def uniform(lo: float, hi: float) -> "ExposureModel":
        return ExposureModel("uniform", range=(lo, hi))

    def validate(self) -> None:
        lo, hi = self.range
        if self.mode == "fixed":
            if not 0.0 <= self.value <= self.cap:
                raise BadSensorModel(f"fixed exposure {self.value!r} s must lie in [0, {self.cap!r}]")
        elif self.mode == "uniform":
            if not 0.0 <= lo <= hi <= self.cap:
                raise BadSensorModel(f"exposure range [{lo!r}, {hi!r}] s must satisfy 0 <= lo <= hi <= {self.cap!r}")
        else:
            raise BadSensorModel(f"unknown exposure mode '{self.mode}'")


@dataclass(frozen=True)
class RollingShutterModel:
    """Readout duration in seconds, normal(mu, sigma) per frame."""

    mu: float = 0.015
    sigma: float = 0.006

    def validate(self) -> None:
        if self.mu < 0 or self.sigma < 0:
            raise BadSensorModel(f"rolling shutter mu={self.mu!r} and sigma={self.sigma!r} must be non-negative")


def sample_exposure(model: ExposureModel, seed: int, frame: int) -> float:
    model.validate()
    if model.mode == "fixed":
        return float(model.value)
    lo, hi = model.range
    if lo == hi:
        return float(lo)
    return float(stream(seed, "exposure", frame).uniform(lo, hi))


def sample_readout(model: RollingShutterModel, seed: int, frame: int) -> float:
    """Clamped at zero."""
    model.validate()
    if model.sigma == 0:
        return float(model.mu)
    return max(0.0, float(stream(seed, "readout", frame).normal(model.mu, model.sigma)))
