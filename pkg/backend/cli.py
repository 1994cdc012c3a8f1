"""Command line front door: waveform generation, frame identification and
simulation runs. Machine-readable results go to stdout as ``key=value`` lines,
logs go to stderr.

Exit codes: 0 success, 2 usage, 3 degenerate data, 4 I/O or file format.
"""

import csv
import logging
import math
from typing import Dict, List, Optional, Tuple

import click
import numpy as np
from pydantic import ValidationError

from algebra import blade_name, norm
from config import config
from converter_sim import (
    ScenarioConfigError,
    load_scenario,
    rms,
    run_scenario,
    write_trace,
)
from estimator import FrameEstimator
from frame_identifier import (
    DegenerateSamplesError,
    FrameError,
    FrameTransform,
    assess_pair,
    clarke_transform,
    identify,
    transform_sample,
    unbalance_diagnostic,
    vector_angle,
)
from models import EstimatorConfig, PhasorSpec
from waveforms import (
    SampleSeries,
    SeriesFormatError,
    read_csv,
    sample_series,
    write_csv,
)

logger = logging.getLogger(__name__)


class DegenerateDataError(click.ClickException):
    exit_code = 3


class FileAccessError(click.ClickException):
    exit_code = 4


class PhasorListType(click.ParamType):
    """``V1:phi1,V2:phi2,...`` with phases in radians"""

    name = "phasors"

    def convert(self, value, param, ctx):
        if isinstance(value, list):
            return value
        try:
            return PhasorSpec.parse(value, config.DEFAULT_FREQ).phases
        except (ValidationError, ValueError) as exc:
            self.fail(f"{value!r} is not a phasor list V1:phi1,V2:phi2,... ({exc})")


PHASOR_LIST = PhasorListType()


def _fmt(value: float) -> str:
    return format(float(value), f".{config.OUTPUT_DIGITS}g")


def _emit(pairs: Dict[str, object]):
    for key, value in pairs.items():
        text = _fmt(value) if isinstance(value, (float, np.floating)) else str(value)
        click.echo(f"{key}={text}")


def _load(path: str) -> SampleSeries:
    try:
        return read_csv(path)
    except SeriesFormatError as exc:
        raise FileAccessError(f"{path}: {exc}") from exc
    except OSError as exc:
        raise FileAccessError(f"cannot read {path}: {exc.strerror or exc}") from exc


def _degenerate(exc: DegenerateSamplesError):
    _emit({"kind": exc.report.kind.value, "conditioning": exc.report.conditioning})
    raise DegenerateDataError(str(exc)) from exc


def _check_index(series: SampleSeries, index: int, name: str):
    if not 0 <= index < len(series):
        raise click.BadParameter(
            f"row {index} outside 0..{len(series) - 1}", param_hint=name
        )


def _wedge(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.outer(a, b) - np.outer(b, a)


def _partner_row(series: SampleSeries, first: int) -> int:
    """Later row forming the best conditioned pair with ``first``

    The search stops once v_first ∧ v_k flips orientation (half a period on),
    so the plane keeps the direction of travel. Ties go to the earliest row.
    """
    anchor = series.samples[first]
    best, best_score, reference = None, None, None
    for index in range(first + 1, len(series)):
        row = series.samples[index]
        wedge = _wedge(anchor, row)
        if reference is None:
            if np.any(wedge):
                reference = wedge
        elif np.sum(wedge * reference) <= 0.0:
            break
        report = assess_pair(anchor, row, tau_collinear=1.0)
        score = report.conditioning if report else 1.0
        if best_score is None or score > best_score:
            best, best_score = index, score
    if best is None:
        raise click.UsageError(
            "no row after --t1 to pair with; pass --t2 or an earlier --t1"
        )
    return best


def _frozen_frame(
    series: SampleSeries, t1: Optional[int], t2: Optional[int]
) -> FrameTransform:
    first = 0 if t1 is None else t1
    _check_index(series, first, "--t1")
    second = _partner_row(series, first) if t2 is None else t2
    _check_index(series, second, "--t2")
    logger.info("identifying the plane from rows %d and %d", first, second)
    try:
        return identify(
            series.samples[first],
            series.samples[second],
            source=(series.timestamps[first], series.timestamps[second]),
        )
    except DegenerateSamplesError as exc:
        _degenerate(exc)


def _frames(
    series: SampleSeries, kappa: Optional[int], t1: Optional[int], t2: Optional[int]
) -> List[Optional[FrameTransform]]:
    """One transform per row: frozen unless a window length is given"""
    if kappa is None:
        frame = _frozen_frame(series, t1, t2)
        return [frame] * len(series)
    estimator = FrameEstimator(EstimatorConfig(kappa=kappa, Ts=_spacing(series)))
    frames = estimator.replay(series)
    if estimator.current_frame() is None and estimator.degenerate_count:
        first, last = series.samples[0], series.samples[-1]
        report = assess_pair(first, last)
        if report is not None:
            _degenerate(DegenerateSamplesError(report))
        raise DegenerateDataError("no sample pair defined a plane")
    return frames


def _spacing(series: SampleSeries) -> float:
    if len(series) > 1:
        return float(np.median(np.diff(series.timestamps)))
    return 1.0 / config.DEFAULT_FS


def _write_rows(path: str, header: List[str], rows: List[List[float]]):
    spec = f".{config.CSV_DIGITS}g"
    try:
        with open(path, "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([format(float(value), spec) for value in row])
    except OSError as exc:
        raise FileAccessError(f"cannot write {path}: {exc.strerror or exc}") from exc


def _ps_row(frame: Optional[FrameTransform], v: np.ndarray) -> List[float]:
    if frame is None:
        return [math.nan] * v.shape[0]
    p, s, residual = transform_sample(frame, v)
    return [p, s] + list(residual)


@click.group()
@click.option("-v", "--verbose", count=True, help="-v for info, -vv for debug logs.")
def cli(verbose: int):
    """Geometric-algebra reference frames for unbalanced n-phase signals."""
    level = {0: config.LOG_LEVEL, 1: "INFO"}.get(verbose, "DEBUG")
    logging.basicConfig(
        level=level, format="%(levelname)s %(name)s: %(message)s", force=True
    )


@cli.command()
@click.option("--phases", type=PHASOR_LIST, required=True, help="V1:phi1,V2:phi2,...")
@click.option("--freq", type=float, default=config.DEFAULT_FREQ, show_default=True)
@click.option("--fs", type=float, default=config.DEFAULT_FS, show_default=True)
@click.option("--dur", type=float, required=True, help="Duration in seconds.")
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def gen(
    phases: List[Tuple[float, float]], freq: float, fs: float, dur: float, out: str
):
    """Sample a phasor spec on a uniform grid and write it as CSV."""
    try:
        spec = PhasorSpec.from_frequency(freq, phases)
    except ValidationError as exc:
        raise click.BadParameter(str(exc), param_hint="--freq") from exc
    if fs <= 0:
        raise click.BadParameter("must be positive", param_hint="--fs")
    if dur < 0:
        raise click.BadParameter("must not be negative", param_hint="--dur")

    series = sample_series(spec, fs, dur) if dur > 0 else SampleSeries.empty(spec.n)
    try:
        write_csv(series, out)
    except OSError as exc:
        raise FileAccessError(f"cannot write {out}: {exc.strerror or exc}") from exc
    logger.info("wrote %d rows to %s", len(series), out)


@cli.command("identify")
@click.option("--in", "path", type=click.Path(dir_okay=False), required=True)
@click.option("--t1", type=click.IntRange(min=0), default=0, show_default=True)
@click.option("--t2", type=click.IntRange(min=0), default=1, show_default=True)
def identify_command(path: str, t1: int, t2: int):
    """Identify the plane and rotor from rows T1 and T2 of a CSV file."""
    series = _load(path)
    _check_index(series, t1, "--t1")
    _check_index(series, t2, "--t2")
    v1, v2 = series.samples[t1], series.samples[t2]
    try:
        frame = identify(v1, v2, source=(series.timestamps[t1], series.timestamps[t2]))
    except DegenerateSamplesError as exc:
        _degenerate(exc)
    except FrameError as exc:
        raise DegenerateDataError(str(exc)) from exc

    report = assess_pair(v1, v2)
    output = {
        "t1": series.timestamps[t1],
        "t2": series.timestamps[t2],
        "method": frame.method.value,
        "norm_v1": float(np.linalg.norm(v1)),
        "norm_v2": float(np.linalg.norm(v2)),
        # 73.05° for rows 0 and T/4 of the (0, -2.1, 2.2) example
        "angle_v1_v2_deg": math.degrees(vector_angle(v1, v2)),
    }
    n = series.n
    for i in range(n):
        for j in range(i + 1, n):
            mask = (1 << i) | (1 << j)
            output[f"B_{blade_name(mask)[1:]}"] = frame.B[mask]
    output["norm_B"] = norm(frame.B)
    output["theta_rad"] = frame.theta
    output["theta_deg"] = math.degrees(frame.theta)
    output.update(frame.rotor_terms())
    output["residual_b"] = frame.alignment_residual()
    output["kind"] = report.kind.value if report else "None"
    output["conditioning"] = (
        report.conditioning if report else _conditioning(v1, v2)
    )
    _emit(output)


def _conditioning(v1: np.ndarray, v2: np.ndarray) -> float:
    return math.sin(vector_angle(v1, v2))


@cli.command()
@click.option("--in", "path", type=click.Path(dir_okay=False), required=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@click.option("--frozen-frame", is_flag=True, help="One frame for every row (default).")
@click.option("--kappa", type=click.IntRange(min=1), help="Re-estimate per row.")
@click.option("--t1", type=click.IntRange(min=0), help="First row of a frozen frame.")
@click.option("--t2", type=click.IntRange(min=0), help="Second row of a frozen frame.")
def transform(
    path: str,
    out: str,
    frozen_frame: bool,
    kappa: Optional[int],
    t1: Optional[int],
    t2: Optional[int],
):
    """Write p, s and residual coordinates of every row."""
    if frozen_frame and kappa is not None:
        raise click.UsageError("--frozen-frame and --kappa are mutually exclusive")
    series = _load(path)
    if len(series) < 2:
        raise click.UsageError("at least two rows are needed to identify a plane")
    frames = _frames(series, kappa, t1, t2)

    header = ["t", "p", "s"] + [f"res{k}" for k in range(1, series.n - 1)]
    rows = [
        [t] + _ps_row(frame, v)
        for t, v, frame in zip(series.timestamps, series.samples, frames)
    ]
    _write_rows(out, header, rows)
    logger.info("transformed %d rows into %s", len(rows), out)


@cli.command()
@click.option("--in", "path", type=click.Path(dir_okay=False), required=True)
@click.option("--t1", type=click.IntRange(min=0))
@click.option("--t2", type=click.IntRange(min=0))
def analyze(path: str, t1: Optional[int], t2: Optional[int]):
    """Print the tilt of the signal plane against σ12."""
    series = _load(path)
    if len(series) < 2:
        raise click.UsageError("at least two rows are needed to identify a plane")
    frame = _frozen_frame(series, t1, t2)
    theta, degree = unbalance_diagnostic(frame.B)
    _emit(
        {
            "theta_rad": theta,
            "theta_deg": math.degrees(theta),
            "sin_theta": degree,
            "method": frame.method.value,
        }
    )


@cli.command("compare-clarke")
@click.option("--in", "path", type=click.Path(dir_okay=False), required=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@click.option("--kappa", type=click.IntRange(min=1), help="Re-estimate per row.")
def compare_clarke(path: str, out: str, kappa: Optional[int]):
    """Side-by-side ps and Clarke coordinates of a three-phase file."""
    series = _load(path)
    if series.n != 3:
        raise click.UsageError("the Clarke comparison needs three phases")
    if len(series) < 2:
        raise click.UsageError("at least two rows are needed to identify a plane")
    frames = _frames(series, kappa, None, None)

    rows = []
    for t, v, frame in zip(series.timestamps, series.samples, frames):
        rows.append([t] + _ps_row(frame, v) + list(clarke_transform(v)))
    _write_rows(out, ["t", "p", "s", "residual", "alpha", "beta", "zero"], rows)

    table = np.array(rows)
    valid = ~np.isnan(table[:, 1])
    summary = {}
    for column, name in enumerate(["p", "s", "residual", "alpha", "beta", "zero"], 1):
        summary[f"rms_{name}"] = rms(table[valid, column])
    _emit(summary)


@cli.command()
@click.option("--config", "scenario", type=click.Path(dir_okay=False), required=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def simulate(scenario: str, out: str):
    """Run the converter current loop for a scenario file."""
    try:
        cfg = load_scenario(scenario)
    except ScenarioConfigError as exc:
        raise click.UsageError(str(exc)) from exc
    except OSError as exc:
        raise FileAccessError(str(exc)) from exc

    trace = run_scenario(cfg)
    try:
        write_trace(trace, out)
    except OSError as exc:
        raise FileAccessError(f"cannot write {out}: {exc.strerror or exc}") from exc

    after = trace.window("v_res", cfg.unbalance_time, cfg.horizon)
    v0 = trace.window("v0", cfg.unbalance_time, cfg.horizon)
    _emit(
        {
            "frame": cfg.frame,
            "steps": len(trace),
            "rms_v_res": rms(after[~np.isnan(after)]),
            "rms_v0": rms(v0[~np.isnan(v0)]),
            "transitions": int(trace.column("transition").sum()),
        }
    )
