import logging
from collections import deque
from dataclasses import dataclass
from typing import Deque, List, Optional, Tuple

import numpy as np

from config import config
from frame_identifier import (
    DegenerateSamplesError,
    FrameTransform,
    Method,
    identify,
    transform_sample,
)
from models import EstimatorConfig
from waveforms import SampleSeries

logger = logging.getLogger(__name__)


class TimestampOrderError(ValueError):
    """Samples must arrive with strictly increasing timestamps"""


@dataclass(frozen=True)
class EstimatorStep:
    """Outcome of one pushed sample"""

    t: float
    transform: Optional[FrameTransform]  # Fresh, held, or None
    fresh: bool = False  # Computed from this step's sample pair
    degenerate: bool = False
    transition: bool = False  # Newest sample left the previous plane


class FrameEstimator:
    """Recursive plane estimation from the pair (v(t - κTs), v(t))"""

    def __init__(
        self,
        settings: Optional[EstimatorConfig] = None,
        method: Optional[Method] = None,
    ):
        self.settings = settings or EstimatorConfig()
        self.method = method
        self.buffer: Deque[Tuple[float, np.ndarray]] = deque(
            maxlen=self.settings.kappa + 1
        )
        self.last_frame: Optional[FrameTransform] = None
        self.degenerate_count = 0

    def push(self, v, t: float) -> EstimatorStep:
        """Add a sample and re-estimate the frame once κ+1 samples are held"""
        t = float(t)
        if self.buffer and not t > self.buffer[-1][0]:
            raise TimestampOrderError(
                f"timestamp {t!r} does not follow {self.buffer[-1][0]!r}"
            )
        sample = np.asarray(v, dtype=float).reshape(-1)
        if self.buffer:
            spacing = t - self.buffer[-1][0]
            if abs(spacing - self.settings.Ts) > 0.01 * self.settings.Ts:
                logger.debug(
                    "sample spacing %.6g s differs from Ts = %.6g s",
                    spacing,
                    self.settings.Ts,
                )
        self.buffer.append((t, sample))
        if len(self.buffer) < self.buffer.maxlen:
            return EstimatorStep(t=t, transform=None)

        t_old, v_old = self.buffer[0]
        transition = self._left_previous_plane(sample)
        try:
            frame = identify(
                v_old,
                sample,
                source=(t_old, t),
                method=self.method,
                tau_collinear=self.settings.tau_collinear,
            )
        except DegenerateSamplesError as exc:
            self.degenerate_count += 1
            log = logger.warning if self.degenerate_count == 1 else logger.debug
            log("degenerate sample pair at t=%.6g: %s", t, exc)
            held = self.last_frame if self.settings.hold_last_on_degenerate else None
            return EstimatorStep(t=t, transform=held, degenerate=True)

        if transition:
            logger.info("plane transition at t=%.6g", t)
        self.last_frame = frame
        return EstimatorStep(t=t, transform=frame, fresh=True, transition=transition)

    def push_sample(self, v, t: float) -> Optional[FrameTransform]:
        return self.push(v, t).transform

    def current_frame(self) -> Optional[FrameTransform]:
        """Last valid transform, if any"""
        return self.last_frame

    def replay(self, series: SampleSeries) -> List[Optional[FrameTransform]]:
        """Push every row of a series, returning the transform emitted per row"""
        return [
            self.push_sample(row, t)
            for t, row in zip(series.timestamps, series.samples)
        ]

    def _left_previous_plane(self, sample: np.ndarray) -> bool:
        if self.last_frame is None:
            return False
        magnitude = float(np.linalg.norm(sample))
        if magnitude == 0.0:
            return False
        _, _, residual = transform_sample(self.last_frame, sample)
        spread = float(np.max(np.abs(residual))) if residual.size else 0.0
        return spread > config.TRANSITION_THRESHOLD * magnitude
