import math
from typing import List, Literal, Tuple

from pydantic import BaseModel, Field, field_validator, model_validator

from config import config


class PhasorSpec(BaseModel):
    """Sinusoidal n-phase signal: V_k cos(ωt + φ_k) on every phase"""

    omega: float = Field(gt=0)  # Angular frequency in rad/s
    phases: List[Tuple[float, float]]  # (amplitude V_k, phase φ_k in rad)

    @field_validator("phases")
    @classmethod
    def check_phases(cls, phases):
        if len(phases) < 2:
            raise ValueError("a phasor spec needs at least two phases")
        if any(amplitude < 0 for amplitude, _ in phases):
            raise ValueError("phase amplitudes must be non-negative")
        return phases

    @classmethod
    def from_frequency(
        cls, frequency: float, phases: List[Tuple[float, float]]
    ) -> "PhasorSpec":
        return cls(omega=2.0 * math.pi * frequency, phases=phases)

    @classmethod
    def parse(cls, text: str, frequency: float) -> "PhasorSpec":
        """Parse ``"V1:phi1,V2:phi2,..."`` (phases in radians)"""
        phases = []
        for item in text.split(","):
            amplitude, sep, angle = item.strip().partition(":")
            if not sep:
                raise ValueError(f"phasor {item.strip()!r} is not of the form V:phi")
            phases.append((float(amplitude), float(angle)))
        return cls.from_frequency(frequency, phases)

    @property
    def n(self) -> int:
        return len(self.phases)

    @property
    def frequency(self) -> float:
        return self.omega / (2.0 * math.pi)

    @property
    def period(self) -> float:
        return 2.0 * math.pi / self.omega

    @property
    def amplitudes(self) -> List[float]:
        return [amplitude for amplitude, _ in self.phases]

    @property
    def angles(self) -> List[float]:
        return [angle for _, angle in self.phases]


class EstimatorConfig(BaseModel):
    """Recursive plane estimation from samples κ steps apart"""

    kappa: int = Field(default=config.DEFAULT_KAPPA, ge=1)
    Ts: float = Field(default=1.0 / config.DEFAULT_FS, gt=0)  # Sampling period
    tau_collinear: float = Field(default=config.TAU_COLLINEAR, gt=0)
    hold_last_on_degenerate: bool = True


class PRParams(BaseModel):
    """Proportional-resonant regulator kp + 2 ki s / (s² + 2ρωs + ω²)"""

    kp: float = Field(default=10.0, ge=0)
    ki: float = Field(default=1000.0, ge=0)
    rho: float = Field(default=0.01, gt=0, lt=1)
    omega: float = Field(default=2.0 * math.pi * config.DEFAULT_FREQ, gt=0)


class PowerStep(BaseModel):
    """Geometric power reference M = p0 + N applied from time t onwards"""

    t: float = Field(ge=0)
    p0_ref: float
    N_ref: float = 0.0


class SimConfig(BaseModel):
    """Converter current-loop scenario"""

    Ts: float = Field(default=1e-4, gt=0)
    horizon: float = Field(default=0.2, gt=0)
    Lf: float = Field(default=5e-3, gt=0)  # Filter inductance in H
    Rf: float = Field(default=0.05, ge=0)  # Filter resistance in Ω
    Rg: float = Field(default=1.0, ge=0)  # Nominal grid series resistance per phase
    grid_before: PhasorSpec
    grid_after: PhasorSpec
    unbalance_time: float = Field(default=0.02, ge=0)
    impedance_scaling: List[float] = Field(default_factory=list)  # After the step
    power_schedule: List[PowerStep] = Field(default_factory=list)
    frame: Literal["PS", "Clarke"] = "PS"
    pr: PRParams = Field(default_factory=PRParams)
    estimator: EstimatorConfig = Field(default_factory=EstimatorConfig)
    open_loop: bool = False  # Converter voltage = open_loop_gain * measured voltage
    open_loop_gain: float = Field(default=1.0, gt=0)

    @model_validator(mode="after")
    def check_consistency(self):
        n = self.grid_before.n
        if self.grid_after.n != n:
            raise ValueError("grid before and after the step differ in phase count")
        if not self.impedance_scaling:
            self.impedance_scaling = [1.0] * n
        if len(self.impedance_scaling) != n:
            raise ValueError(f"impedance_scaling needs {n} entries")
        if any(z < 0 for z in self.impedance_scaling):
            raise ValueError("impedance scaling must be non-negative")
        if self.frame == "Clarke" and n != 3:
            raise ValueError("the Clarke frame is defined for three phases only")
        if self.unbalance_time > self.horizon:
            if "unbalance_time" in self.model_fields_set:
                raise ValueError("unbalance step lies beyond the simulation horizon")
            # Default step time past a short run: no step within the horizon
            self.unbalance_time = self.horizon
        if any(step.t > self.horizon for step in self.power_schedule):
            raise ValueError("power reference step lies beyond the horizon")
        self.power_schedule = sorted(self.power_schedule, key=lambda step: step.t)
        if not math.isclose(self.estimator.Ts, self.Ts):
            self.estimator = self.estimator.model_copy(update={"Ts": self.Ts})
        return self

    @property
    def steps(self) -> int:
        return int(round(self.horizon / self.Ts))
