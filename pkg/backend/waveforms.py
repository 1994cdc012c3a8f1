"""Multi-phase sinusoidal signal model, p/s decomposition and CSV interchange.

A signal ``v_k(t) = V_k cos(ωt + φ_k)`` can be written as
``v(t) = cos(ωt) p − sin(ωt) s`` with ``p = Σ V_k cos φ_k σ_k`` and
``s = Σ V_k sin φ_k σ_k``; its locus is an ellipse in the ps-plane.
"""

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np

from algebra import Multivector, outer_product, vector
from config import config
from models import PhasorSpec

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


class SpecError(ValueError):
    """Invalid sampling request"""


class SeriesFormatError(ValueError):
    """Malformed sample file; ``line`` is 1-based (0 when unknown)"""

    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


@dataclass(frozen=True)
class PSDecomposition:
    """In-phase vector p and quadrature vector s of a phasor spec"""

    p: Multivector
    s: Multivector

    def at(self, omega: float, t: float) -> Multivector:
        return self.p * math.cos(omega * t) - self.s * math.sin(omega * t)


@dataclass(frozen=True, eq=False)
class SampleSeries:
    """Time-stamped n-phase samples, one row per timestamp"""

    timestamps: np.ndarray
    samples: np.ndarray
    n: int = field(default=0)

    def __post_init__(self):
        timestamps = np.asarray(self.timestamps, dtype=float).reshape(-1)
        n = self.n or (np.shape(self.samples)[1] if np.ndim(self.samples) == 2 else 0)
        samples = np.asarray(self.samples, dtype=float).reshape(-1, n) if n else None
        if n < 2 or samples is None:
            raise SpecError("a sample series needs at least two phases")
        if samples.shape[0] != timestamps.shape[0]:
            raise SpecError(
                f"{timestamps.shape[0]} timestamps for {samples.shape[0]} rows"
            )
        if timestamps.size > 1 and not np.all(np.diff(timestamps) > 0):
            raise SpecError("timestamps must be strictly increasing")
        object.__setattr__(self, "timestamps", timestamps)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "n", n)

    def __len__(self) -> int:
        return self.timestamps.shape[0]

    def __eq__(self, other):
        if not isinstance(other, SampleSeries):
            return NotImplemented
        return (
            self.n == other.n
            and np.array_equal(self.timestamps, other.timestamps)
            and np.array_equal(self.samples, other.samples)
        )

    __hash__ = None

    @classmethod
    def empty(cls, n: int) -> "SampleSeries":
        return cls(timestamps=np.zeros(0), samples=np.zeros((0, n)), n=n)


def phasor_to_ps(spec: PhasorSpec) -> PSDecomposition:
    amplitudes = np.array(spec.amplitudes)
    angles = np.array(spec.angles)
    return PSDecomposition(
        p=vector(amplitudes * np.cos(angles)),
        s=vector(amplitudes * np.sin(angles)),
    )


def synthesize(spec: PhasorSpec, t: float) -> np.ndarray:
    """Instantaneous sample: component k is V_k cos(ωt + φ_k)"""
    amplitudes = np.array(spec.amplitudes)
    angles = np.array(spec.angles)
    return amplitudes * np.cos(spec.omega * t + angles)


def locus_plane(spec: PhasorSpec) -> Multivector:
    """Closed-form plane ``v(0) ∧ v(T/4)``: B_ij = V_i V_j sin(φ_i − φ_j)"""
    ps = phasor_to_ps(spec)
    return outer_product(ps.p, -ps.s)


def sample_series(spec: PhasorSpec, fs: float, duration: float) -> SampleSeries:
    """Uniform grid t_i = i/fs covering [0, duration)"""
    if fs <= 0:
        raise SpecError(f"sampling frequency must be positive, got {fs}")
    if duration <= 0:
        raise SpecError(f"duration must be positive, got {duration}")
    if fs <= 2.0 * spec.frequency:
        logger.warning(
            "sampling at %.6g Hz does not exceed twice the %.6g Hz signal frequency",
            fs,
            spec.frequency,
        )
    count = int(math.floor(duration * fs + 1e-9))
    timestamps = np.arange(count) / fs
    amplitudes = np.array(spec.amplitudes)
    angles = np.array(spec.angles)
    samples = amplitudes * np.cos(spec.omega * timestamps[:, None] + angles)
    return SampleSeries(timestamps=timestamps, samples=samples, n=spec.n)


# -- CSV interchange -------------------------------------------------------------


def header_for(n: int) -> list:
    return ["t"] + [f"v{k}" for k in range(1, n + 1)]


def _format(value: float) -> str:
    return format(float(value), f".{config.CSV_DIGITS}g")


def write_csv(series: SampleSeries, path: PathLike):
    """Write ``t,v1,...,vn`` rows with lossless decimal text"""
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header_for(series.n))
        for t, row in zip(series.timestamps, series.samples):
            writer.writerow([_format(t)] + [_format(v) for v in row])


def _decode(raw: bytes) -> str:
    try:
        return raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        line = raw[: exc.start].count(b"\n") + 1
        raise SeriesFormatError(line, "not valid UTF-8 text") from exc


def read_csv(path: PathLike) -> SampleSeries:
    """Read a ``t,v1,...,vn`` file, reporting the offending line on errors"""
    timestamps = []
    rows = []
    text = _decode(Path(path).read_bytes())
    with io.StringIO(text, newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None:
            raise SeriesFormatError(1, "empty file, expected header t,v1,...,vn")
        header = [name.strip() for name in header]
        n = len(header) - 1
        if n < 2 or header != header_for(n):
            raise SeriesFormatError(
                1, f"malformed header {','.join(header)!r}, expected t,v1,...,vn"
            )
        previous = -math.inf
        for record in reader:
            line = reader.line_num
            if not record or all(not field.strip() for field in record):
                continue
            if len(record) != n + 1:
                raise SeriesFormatError(
                    line, f"expected {n + 1} fields, found {len(record)}"
                )
            try:
                values = [float(field) for field in record]
            except ValueError as exc:
                raise SeriesFormatError(line, f"non-numeric field ({exc})") from exc
            if not all(math.isfinite(value) for value in values):
                raise SeriesFormatError(line, "non-finite field (nan or inf)")
            if not values[0] > previous:
                raise SeriesFormatError(
                    line, f"timestamp {record[0]} does not increase"
                )
            previous = values[0]
            timestamps.append(values[0])
            rows.append(values[1:])

    logger.debug("read %d rows of %d phases from %s", len(rows), n, path)
    if not rows:
        return SampleSeries.empty(n)
    return SampleSeries(timestamps=np.array(timestamps), samples=np.array(rows), n=n)
