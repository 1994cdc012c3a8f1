import os
import sys

import numpy as np
import pytest
from pydantic import ValidationError

# Add backend to path for imports
sys.path.append(os.path.join(os.path.dirname(__file__), ".."))

from estimator import FrameEstimator, TimestampOrderError
from frame_identifier import Method, transform_sample
from models import EstimatorConfig, PhasorSpec
from tests.conftest import BALANCED, LAB_V1, LAB_V2
from waveforms import sample_series, synthesize

pytestmark = pytest.mark.unit

UNBALANCED_AFTER = [(325.0, 0.0), (260.0, -2.2), (295.0, 2.0)]


@pytest.fixture
def estimator():
    return FrameEstimator(EstimatorConfig(kappa=8, Ts=1e-4))


class TestWarmUp:
    """Behaviour before κ+1 samples are buffered"""

    def test_first_kappa_samples_have_no_frame(self, estimator, three_phase_spec):
        """Test rows 0..κ-1 emit nothing and row κ emits a fresh frame"""
        series = sample_series(three_phase_spec, 10000.0, 0.002)
        steps = [
            estimator.push(row, t) for t, row in zip(series.timestamps, series.samples)
        ]
        assert all(step.transform is None for step in steps[:8])
        assert not any(step.fresh for step in steps[:8])
        assert steps[8].fresh and steps[8].transform is not None
        assert steps[8].transform.source == pytest.approx((0.0, 8e-4))

    def test_current_frame_starts_empty(self, estimator):
        """Test no frame exists before warm-up"""
        assert estimator.current_frame() is None
        estimator.push([1.0, 0.0, -1.0], 0.0)
        assert estimator.current_frame() is None

    def test_kappa_must_be_positive(self):
        """Test κ = 0 is rejected"""
        with pytest.raises(ValidationError):
            EstimatorConfig(kappa=0)


class TestTracking:
    """Steady-state estimation on a fixed plane"""

    def test_residual_vanishes_after_warm_up(self, estimator, three_phase_spec):
        """Test every sample lies in the estimated plane"""
        series = sample_series(three_phase_spec, 10000.0, 0.04)
        frames = estimator.replay(series)
        for k in range(8, len(series)):
            _, _, residual = transform_sample(frames[k], series.samples[k])
            assert abs(residual[0]) <= 1e-9

    def test_rotor_is_steady(self, estimator, three_phase_spec):
        """Test successive frames of a fixed plane agree"""
        series = sample_series(three_phase_spec, 10000.0, 0.02)
        frames = estimator.replay(series)[8:]
        reference = frames[0].rotor
        for frame in frames[1:]:
            assert frame.rotor.isclose(reference, 1e-9)

    def test_six_phase_uses_two_step(self):
        """Test six phases are aligned with the two-step rotor"""
        phases = [(1.0, 0.1 * k) for k in range(3)]
        phases += [(0.5, -1.0 - k) for k in range(3)]
        spec = PhasorSpec.from_frequency(50.0, phases)
        series = sample_series(spec, 10000.0, 0.005)
        frames = FrameEstimator(EstimatorConfig(kappa=8, Ts=1e-4)).replay(series)
        assert frames[-1].method == Method.TWO_STEP_ND
        _, _, residual = transform_sample(frames[-1], series.samples[-1])
        assert np.max(np.abs(residual)) <= 1e-9

    def test_lab_pair_with_kappa_one(self):
        """Test the two lab samples 1.6 ms apart give θ = 2.1863"""
        estimator = FrameEstimator(EstimatorConfig(kappa=1, Ts=0.0016))
        assert estimator.push_sample(LAB_V1, 0.0) is None
        frame = estimator.push_sample(LAB_V2, 0.0016)
        assert frame.theta == pytest.approx(2.1863, abs=5e-4)
        assert frame.source == (0.0, 0.0016)
        assert frame.rotor.scalar == pytest.approx(0.4597, abs=5e-4)

    def test_streaming_equals_batch(self, three_phase_spec):
        """Test pushing rows one by one equals replaying the series"""
        series = sample_series(three_phase_spec, 10000.0, 0.01)
        batch = FrameEstimator(EstimatorConfig(kappa=5, Ts=1e-4)).replay(series)
        streaming = FrameEstimator(EstimatorConfig(kappa=5, Ts=1e-4))
        for t, row, expected in zip(series.timestamps, series.samples, batch):
            frame = streaming.push_sample(row, t)
            if expected is None:
                assert frame is None
            else:
                assert frame.rotor == expected.rotor


class TestDegeneracy:
    """Collinear pairs and held frames"""

    def test_zero_sequence_never_yields_a_frame(self, estimator):
        """Test identical phases only produce degenerate steps"""
        spec = PhasorSpec.from_frequency(50.0, [(1.0, 0.3)] * 3)
        series = sample_series(spec, 10000.0, 0.01)
        frames = estimator.replay(series)
        assert all(frame is None for frame in frames)
        assert estimator.degenerate_count == len(series) - 8

    def test_hold_last_frame(self, balanced_spec):
        """Test a degenerate pair re-emits the previous frame"""
        estimator = FrameEstimator(EstimatorConfig(kappa=1, Ts=1e-3))
        estimator.push(synthesize(balanced_spec, 0.0), 0.0)
        good = estimator.push_sample(synthesize(balanced_spec, 0.001), 0.001)
        assert good is not None
        step = estimator.push([0.0, 0.0, 0.0], 0.002)
        assert step.degenerate and not step.fresh
        assert step.transform is good
        assert estimator.current_frame() is good

    def test_drop_frame_when_not_holding(self, balanced_spec):
        """Test hold_last_on_degenerate = False emits None"""
        settings = EstimatorConfig(kappa=1, Ts=1e-3, hold_last_on_degenerate=False)
        estimator = FrameEstimator(settings)
        estimator.push(synthesize(balanced_spec, 0.0), 0.0)
        estimator.push(synthesize(balanced_spec, 0.001), 0.001)
        step = estimator.push([0.0, 0.0, 0.0], 0.002)
        assert step.degenerate and step.transform is None
        assert estimator.degenerate_count == 1

    def test_recovers_after_degenerate_pair(self, balanced_spec):
        """Test a fresh frame follows once the pair is well conditioned"""
        estimator = FrameEstimator(EstimatorConfig(kappa=1, Ts=1e-3))
        estimator.push([0.0, 0.0, 0.0], 0.0)
        assert estimator.push([1.0, -0.5, -0.5], 0.001).degenerate
        step = estimator.push(synthesize(balanced_spec, 0.004), 0.002)
        assert step.fresh and not step.degenerate


class TestTimestamps:
    def test_rejects_repeated_timestamp(self, estimator):
        """Test timestamps must strictly increase"""
        estimator.push([1.0, 0.0, -1.0], 0.001)
        with pytest.raises(TimestampOrderError):
            estimator.push([0.0, 1.0, -1.0], 0.001)

    def test_rejects_backwards_timestamp(self, estimator):
        estimator.push([1.0, 0.0, -1.0], 0.001)
        with pytest.raises(TimestampOrderError):
            estimator.push([0.0, 1.0, -1.0], 0.0)


class TestTransition:
    """Plane change at an unbalance step"""

    def test_transition_flags_the_step(self, estimator):
        """Test the first sample of the new plane raises the transition flag"""
        before = PhasorSpec.from_frequency(
            50.0, [(325.0, angle) for _, angle in BALANCED]
        )
        after = PhasorSpec.from_frequency(50.0, UNBALANCED_AFTER)
        flagged = []
        for k in range(400):
            t = k * 1e-4
            spec = before if k < 200 else after
            if estimator.push(synthesize(spec, t), t).transition:
                flagged.append(k)
        assert flagged[0] == 200
        assert all(200 <= k <= 208 for k in flagged)

    def test_no_transition_on_fixed_plane(self, estimator, three_phase_spec):
        series = sample_series(three_phase_spec, 10000.0, 0.04)
        steps = [
            estimator.push(row, t) for t, row in zip(series.timestamps, series.samples)
        ]
        assert not any(step.transition for step in steps)
