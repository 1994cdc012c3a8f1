import os
import sys

import numpy as np
import pytest

# Add backend to path for imports
sys.path.append(os.path.join(os.path.dirname(__file__), ".."))

from algebra import geometric_product, normalize, reverse
from frame_identifier import identify, identify_plane, transform_sample
from tests.conftest import brute_force_product, random_multivector, random_spec
from waveforms import synthesize

pytestmark = pytest.mark.slow

SPECS_PER_DIMENSION = 200


def sample_pair(spec, t1):
    """Samples a quarter period apart, the best conditioned spacing"""
    return synthesize(spec, t1), synthesize(spec, t1 + spec.period / 4.0)


@pytest.mark.parametrize("n", [3, 4, 5, 6, 8])
class TestRandomSignals:
    """Frame properties over randomly unbalanced signals"""

    def test_rotor_properties(self, n):
        """Test unitarity, isometry and planarity for every random signal"""
        rng = np.random.default_rng(1000 + n)
        for _ in range(SPECS_PER_DIMENSION):
            spec = random_spec(rng, n)
            t1 = rng.uniform(0.0, spec.period)
            frame = identify(*sample_pair(spec, t1))

            unit = geometric_product(frame.rotor, reverse(frame.rotor)) - 1.0
            assert unit.max_abs() <= 1e-12

            scale = max(spec.amplitudes)
            for t in np.linspace(0.0, 2.0 * spec.period, 41):
                v = synthesize(spec, t)
                p, s, residual = transform_sample(frame, v)
                magnitude = np.linalg.norm([p, s, *residual])
                assert magnitude == pytest.approx(np.linalg.norm(v), abs=1e-10 * scale)
                if residual.size:
                    assert np.max(np.abs(residual)) <= 1e-9 * scale

    def test_pairwise_angles_preserved(self, n):
        """Test inner products between samples survive the rotation"""
        rng = np.random.default_rng(5000 + n)
        for _ in range(SPECS_PER_DIMENSION // 4):
            spec = random_spec(rng, n)
            v1, v2 = sample_pair(spec, rng.uniform(0.0, spec.period))
            frame = identify(v1, v2)
            times = rng.uniform(0.0, spec.period, size=4)
            originals = [synthesize(spec, t) for t in times]
            rotated = []
            for v in originals:
                p, s, residual = transform_sample(frame, v)
                rotated.append(np.concatenate(([p, s], residual)))
            scale = max(spec.amplitudes) ** 2
            for i in range(len(times)):
                for j in range(i + 1, len(times)):
                    assert np.dot(rotated[i], rotated[j]) == pytest.approx(
                        np.dot(originals[i], originals[j]), abs=1e-10 * scale
                    )

    def test_identification_is_idempotent(self, n):
        """Test transformed samples already lie in σ12"""
        rng = np.random.default_rng(2000 + n)
        for _ in range(SPECS_PER_DIMENSION // 4):
            spec = random_spec(rng, n)
            v1, v2 = sample_pair(spec, rng.uniform(0.0, spec.period))
            frame = identify(v1, v2)
            rotated = []
            for v in (v1, v2):
                p, s, residual = transform_sample(frame, v)
                rotated.append(np.concatenate(([p, s], residual)))
            again = identify(*rotated)
            assert (again.rotor - 1.0).max_abs() <= 1e-9

    def test_plane_independent_of_pair(self, n):
        """Test any two well separated samples span the same oriented plane"""
        rng = np.random.default_rng(3000 + n)
        for _ in range(SPECS_PER_DIMENSION // 4):
            spec = random_spec(rng, n)
            first = identify_plane(*sample_pair(spec, rng.uniform(0.0, spec.period)))
            second = identify_plane(*sample_pair(spec, rng.uniform(0.0, spec.period)))
            assert normalize(first).isclose(normalize(second), 1e-9)


@pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
def test_product_matches_oracle(n):
    """Test the bitmask product against explicit factor reordering"""
    rng = np.random.default_rng(4000 + n)
    for _ in range(10000 // 5):
        a = random_multivector(rng, n)
        b = random_multivector(rng, n)
        assert geometric_product(a, b).isclose(brute_force_product(a, b), 1e-12)
