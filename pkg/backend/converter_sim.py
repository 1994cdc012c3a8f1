"""Averaged grid-following converter current loop in the ps (or Clarke) frame.

Per phase k the converter drives its filter towards the point of common
coupling, ``Lf di/dt = v_conv − v_pcc − Rf i``, where the grid behind the
coupling point is an ideal source ``e`` with series resistance ``Rg z_k``.
The controller measures ``v_pcc``, rotates voltage and current into the
estimated frame, derives the current reference from a geometric power
reference, regulates both axes with PR regulators and feeds the measured
voltage forward.
"""

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np
from dotenv import dotenv_values
from pydantic import ValidationError
from scipy import signal

from algebra import Multivector, geometric_product, vector
from config import config
from estimator import FrameEstimator
from frame_identifier import (
    CLARKE_MATRIX,
    SIGMA_12,
    clarke_transform,
    inverse_transform,
    transform_sample,
)
from models import EstimatorConfig, PhasorSpec, PowerStep, PRParams, SimConfig
from waveforms import synthesize

logger = logging.getLogger(__name__)

NAN = float("nan")

PathLike = Union[str, Path]


class DegenerateVoltageError(ValueError):
    """Voltage too small to derive a current reference from"""


class ScenarioConfigError(ValueError):
    """Scenario file could not be turned into a SimConfig"""


# -- regulator ---------------------------------------------------------------------


def pr_coefficients(params: PRParams, Ts: float) -> Tuple[np.ndarray, np.ndarray]:
    """Tustin coefficients of kp + 2 ki s/(s² + 2ρωs + ω²), prewarped at ω"""
    omega, rho = params.omega, params.rho
    numerator = [
        params.kp,
        2.0 * params.kp * rho * omega + 2.0 * params.ki,
        params.kp * omega**2,
    ]
    denominator = [1.0, 2.0 * rho * omega, omega**2]
    warped_fs = omega / (2.0 * math.tan(omega * Ts / 2.0))
    b, a = signal.bilinear(numerator, denominator, fs=warped_fs)
    return b / a[0], a / a[0]


class PRController:
    """One axis of the proportional-resonant regulator (transposed direct form II)"""

    def __init__(self, params: PRParams, Ts: float):
        self.params = params
        self.Ts = Ts
        self.b, self.a = pr_coefficients(params, Ts)
        self.state = np.zeros(2)

    def step(self, error: float) -> float:
        b, a, z = self.b, self.a, self.state
        output = b[0] * error + z[0]
        z[0] = b[1] * error - a[1] * output + z[1]
        z[1] = b[2] * error - a[2] * output
        return float(output)

    def reset(self):
        self.state = np.zeros(2)


def pr_step(controller: PRController, error: float) -> float:
    return controller.step(error)


# -- geometric power ------------------------------------------------------------------


@dataclass(frozen=True)
class GeometricPower:
    """M = p0 + N σ12 in the ps plane"""

    p0: float
    N: float = 0.0

    def multivector(self) -> Multivector:
        return Multivector(2, {0: self.p0, SIGMA_12: self.N})


def _plane_vector(v) -> Multivector:
    if isinstance(v, Multivector):
        return v
    return vector(np.asarray(v, dtype=float).reshape(2))


def geometric_power(v_ps, i_ps) -> GeometricPower:
    """Geometric product of voltage and current: scalar p0 = v·i, bivector N = v∧i"""
    product = geometric_product(_plane_vector(v_ps), _plane_vector(i_ps))
    return GeometricPower(p0=product.scalar, N=product[SIGMA_12])


def reference_currents(M_ref: GeometricPower, v_ps) -> np.ndarray:
    """The current i = v⁻¹ M whose geometric power with ``v_ps`` is ``M_ref``"""
    v = _plane_vector(v_ps)
    magnitude_sq = sum(c * c for c in v.terms.values())
    if magnitude_sq <= config.TAU_ZERO**2:
        raise DegenerateVoltageError("voltage vanishes, no current reference exists")
    current = geometric_product(v / magnitude_sq, M_ref.multivector())
    return current.vector_part()


# -- trace ---------------------------------------------------------------------------


@dataclass
class SimTrace:
    """One record per sampling period"""

    columns: List[str]
    records: List[Dict[str, float]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def column(self, name: str) -> np.ndarray:
        return np.array([record[name] for record in self.records], dtype=float)

    def window(self, name: str, start: float, stop: float) -> np.ndarray:
        """Values of ``name`` for start <= t < stop"""
        t = self.column("t")
        return self.column(name)[(t >= start) & (t < stop)]


def write_trace(trace: SimTrace, path: PathLike):
    """One CSV row per record, columns in ``trace.columns`` order"""
    spec = f".{config.CSV_DIGITS}g"
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=trace.columns, lineterminator="\n")
        writer.writeheader()
        for record in trace.records:
            writer.writerow(
                {name: format(float(value), spec) for name, value in record.items()}
            )


def rms(values: Sequence[float]) -> float:
    values = np.asarray(values, dtype=float)
    return float(np.sqrt(np.mean(values**2))) if values.size else 0.0


# -- simulation ----------------------------------------------------------------------


class ConverterSimulation:
    """Orchestrates grid, plant, estimator and regulators for one scenario"""

    def __init__(self, cfg: SimConfig):
        self.cfg = cfg
        self.n = cfg.grid_before.n
        self.estimator = FrameEstimator(cfg.estimator)
        self.regulators = [PRController(cfg.pr, cfg.Ts) for _ in range(2)]
        self.current = np.zeros(self.n)

        bivector_names = [
            f"r_{i + 1}{j + 1}" for i in range(self.n) for j in range(i + 1, self.n)
        ]
        phases = range(1, self.n + 1)
        self.columns = (
            ["t"]
            + [f"v{k}" for k in phases]
            + [f"i{k}" for k in phases]
            + ["v_p", "v_s", "v_res", "i_p", "i_s", "i_res", "i_p_ref", "i_s_ref"]
            + ["v_alpha", "v_beta", "v0", "p0", "p0_ref", "r_0"]
            + bivector_names
            + ["transition"]
        )

    def _grid_at(self, t: float) -> Tuple[PhasorSpec, np.ndarray]:
        if t < self.cfg.unbalance_time:
            return self.cfg.grid_before, np.ones(self.n)
        return self.cfg.grid_after, np.array(self.cfg.impedance_scaling)

    def _power_reference(self, t: float) -> GeometricPower:
        active = PowerStep(t=0.0, p0_ref=0.0)
        for step in self.cfg.power_schedule:
            if step.t <= t:
                active = step
        return GeometricPower(p0=active.p0_ref, N=active.N_ref)

    def run(self) -> SimTrace:
        cfg = self.cfg
        trace = SimTrace(columns=self.columns)
        logger.info(
            "running %d steps of %.3g s in the %s frame", cfg.steps, cfg.Ts, cfg.frame
        )
        for k in range(cfg.steps):
            trace.records.append(self.step(k * cfg.Ts))
        return trace

    def step(self, t: float) -> Dict[str, float]:
        """Advance one sampling period from time ``t`` and return its record"""
        cfg = self.cfg
        spec, scaling = self._grid_at(t)
        source = synthesize(spec, t)
        i = self.current
        v_meas = source + cfg.Rg * scaling * i

        estimate = self.estimator.push(v_meas, t)
        frame = estimate.transform
        record = dict.fromkeys(self.columns, NAN)
        record["t"] = t
        record["transition"] = float(estimate.transition)
        record.update({f"v{j + 1}": x for j, x in enumerate(v_meas)})
        record.update({f"i{j + 1}": x for j, x in enumerate(i)})

        if frame is not None:
            v_p, v_s, v_res = transform_sample(frame, v_meas)
            i_p, i_s, i_res = transform_sample(frame, i)
            record.update(
                v_p=v_p,
                v_s=v_s,
                v_res=float(np.max(np.abs(v_res), initial=0.0)),
                i_p=i_p,
                i_s=i_s,
                i_res=float(np.max(np.abs(i_res), initial=0.0)),
            )
            record.update(
                (name, value)
                for name, value in frame.rotor_terms().items()
                if name in record
            )

        i_alpha = i_beta = NAN
        if self.n == 3:
            record["v_alpha"], record["v_beta"], record["v0"] = clarke_transform(v_meas)
            i_alpha, i_beta, _ = clarke_transform(i)

        if cfg.frame == "PS":
            axes_v = (record["v_p"], record["v_s"])
            axes_i = (record["i_p"], record["i_s"])
            active = frame is not None
        else:
            axes_v = (record["v_alpha"], record["v_beta"])
            axes_i = (i_alpha, i_beta)
            active = True

        reference = self._power_reference(t)
        record["p0_ref"] = reference.p0
        correction = np.zeros(self.n)
        if active:
            record["p0"] = geometric_power(axes_v, axes_i).p0
            try:
                i_ref = tuple(reference_currents(reference, axes_v))
            except DegenerateVoltageError:
                logger.warning("no current reference at t=%.6g", t)
                i_ref = (0.0, 0.0)
            record["i_p_ref"], record["i_s_ref"] = i_ref
            if not cfg.open_loop:
                u = [
                    regulator.step(ref - measured)
                    for regulator, ref, measured in zip(self.regulators, i_ref, axes_i)
                ]
                if cfg.frame == "PS":
                    correction = inverse_transform(frame, u[0], u[1])
                else:
                    correction = CLARKE_MATRIX.T @ np.array([u[0], u[1], 0.0])

        if cfg.open_loop:
            v_conv = cfg.open_loop_gain * v_meas
        else:
            v_conv = v_meas + correction
        self.current = self._plant_step(v_conv, source, scaling)
        return record

    def _plant_step(
        self, v_conv: np.ndarray, source: np.ndarray, scaling: np.ndarray
    ) -> np.ndarray:
        """Exact zero-order-hold update of Lf di/dt = v_conv − e − (Rf + Rg z) i"""
        cfg = self.cfg
        resistance = cfg.Rf + cfg.Rg * scaling
        decay = np.exp(-resistance * cfg.Ts / cfg.Lf)
        with np.errstate(divide="ignore", invalid="ignore"):
            gain = np.where(
                resistance > 0, (1.0 - decay) / resistance, cfg.Ts / cfg.Lf
            )
        return decay * self.current + gain * (v_conv - source)


def run_scenario(cfg: SimConfig) -> SimTrace:
    return ConverterSimulation(cfg).run()


# -- scenario files ----------------------------------------------------------------

SCENARIO_KEYS = frozenset(
    [
        "TS",
        "HORIZON",
        "LF",
        "RF",
        "RG",
        "FREQ",
        "GRID_BEFORE",
        "GRID_AFTER",
        "UNBALANCE_TIME",
        "IMPEDANCE_SCALING",
        "POWER_SCHEDULE",
        "FRAME",
        "KP",
        "KI",
        "RHO",
        "KAPPA",
        "HOLD_LAST",
        "OPEN_LOOP",
        "OPEN_LOOP_GAIN",
    ]
)

# Scenario key -> SimConfig field, for plain float settings
_FLOAT_FIELDS = {
    "HORIZON": "horizon",
    "LF": "Lf",
    "RF": "Rf",
    "RG": "Rg",
    "UNBALANCE_TIME": "unbalance_time",
    "OPEN_LOOP_GAIN": "open_loop_gain",
}


def _parse_floats(text: str) -> List[float]:
    return [float(item) for item in text.split(",") if item.strip()]


def _parse_schedule(text: str) -> List[PowerStep]:
    """``t:p0[:N];t:p0[:N];...``"""
    steps = []
    for item in text.split(";"):
        if not item.strip():
            continue
        parts = [float(part) for part in item.split(":")]
        if len(parts) not in (2, 3):
            raise ValueError(f"power step {item.strip()!r} is not t:p0[:N]")
        N_ref = parts[2] if len(parts) == 3 else 0.0
        steps.append(PowerStep(t=parts[0], p0_ref=parts[1], N_ref=N_ref))
    return steps


def _parse_bool(text: str) -> bool:
    return text.strip().lower() in ("1", "true", "yes", "on")


def load_scenario(path: PathLike) -> SimConfig:
    """Build a SimConfig from a flat ``KEY=value`` scenario file"""
    if not Path(path).is_file():
        raise FileNotFoundError(f"scenario file not found: {path}")
    values = {key.upper(): value for key, value in dotenv_values(path).items()}
    unknown = set(values) - SCENARIO_KEYS
    if unknown:
        raise ScenarioConfigError(
            f"unknown scenario keys: {', '.join(sorted(unknown))}"
        )
    empty = [key for key, value in values.items() if value is None or not value.strip()]
    if empty:
        raise ScenarioConfigError(f"scenario keys without value: {', '.join(empty)}")
    if "GRID_BEFORE" not in values:
        raise ScenarioConfigError("scenario needs GRID_BEFORE")

    try:
        frequency = float(values.get("FREQ", config.DEFAULT_FREQ))
        grid_before = PhasorSpec.parse(values["GRID_BEFORE"], frequency)
        grid_after = PhasorSpec.parse(
            values.get("GRID_AFTER", values["GRID_BEFORE"]), frequency
        )
        Ts = float(values.get("TS", 1e-4))
        settings = dict(
            Ts=Ts,
            grid_before=grid_before,
            grid_after=grid_after,
            frame=values.get("FRAME", "PS"),
            pr=PRParams(
                kp=float(values.get("KP", 10.0)),
                ki=float(values.get("KI", 1000.0)),
                rho=float(values.get("RHO", 0.01)),
                omega=grid_before.omega,
            ),
            estimator=EstimatorConfig(
                kappa=int(values.get("KAPPA", config.DEFAULT_KAPPA)),
                Ts=Ts,
                hold_last_on_degenerate=_parse_bool(values.get("HOLD_LAST", "true")),
            ),
            open_loop=_parse_bool(values.get("OPEN_LOOP", "false")),
        )
        for key, name in _FLOAT_FIELDS.items():
            if key in values:
                settings[name] = float(values[key])
        if "IMPEDANCE_SCALING" in values:
            settings["impedance_scaling"] = _parse_floats(values["IMPEDANCE_SCALING"])
        if "POWER_SCHEDULE" in values:
            settings["power_schedule"] = _parse_schedule(values["POWER_SCHEDULE"])
        scenario = SimConfig(**settings)
    except (ValidationError, ValueError) as exc:
        raise ScenarioConfigError(f"invalid scenario {path}: {exc}") from exc

    logger.debug("loaded scenario %s: %d steps", path, scenario.steps)
    return scenario
