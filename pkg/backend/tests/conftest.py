import math
import os
import sys
from collections import defaultdict

import numpy as np
import pytest

sys.path.append(os.path.join(os.path.dirname(__file__), ".."))

from algebra import Multivector
from config import Config
from models import PhasorSpec

# Unbalanced three-phase example; phase c leads by 2.2 rad
THREE_PHASE = [(1.70, 0.0), (0.70, -2.1), (1.40, 2.2)]

# Two lab samples 1.6 ms apart
LAB_V1 = [333.2031, -198.0469, -135.1562]
LAB_V2 = [270.3125, -297.2656, 26.9531]

# Synthetic six-phase measurement pair; v2[4] = -0.39 reproduces the listed plane
SIX_PHASE_V1 = [1.0, 1.7, -0.5, -0.5, 0.5, -1.0]
SIX_PHASE_V2 = [0.37, 0.7, 0.9, -0.1, -0.39, 1.0]

BALANCED = [(1.0, 0.0), (1.0, -2.0 * math.pi / 3.0), (1.0, 2.0 * math.pi / 3.0)]


@pytest.fixture
def test_config():
    """Fresh configuration with the default tolerances"""
    return Config()


@pytest.fixture
def three_phase_spec():
    return PhasorSpec.from_frequency(50.0, THREE_PHASE)


@pytest.fixture
def three_phase_samples(three_phase_spec):
    """Samples at t = 0 and t = T/4"""
    from waveforms import synthesize

    quarter = three_phase_spec.period / 4.0
    return synthesize(three_phase_spec, 0.0), synthesize(three_phase_spec, quarter)


@pytest.fixture
def balanced_spec():
    return PhasorSpec.from_frequency(50.0, BALANCED)


@pytest.fixture
def lab_samples():
    return np.array(LAB_V1), np.array(LAB_V2)


@pytest.fixture
def six_phase_samples():
    return np.array(SIX_PHASE_V1), np.array(SIX_PHASE_V2)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# -- independent product oracle -------------------------------------------------


def _factors(mask: int):
    return [i for i in range(mask.bit_length()) if mask >> i & 1]


def _multiply_blades(left, right):
    """Sign and mask of a product of factor lists, by bubble sort and contraction"""
    word = list(left) + list(right)
    sign = 1
    changed = True
    while changed:
        changed = False
        for k in range(len(word) - 1):
            if word[k] > word[k + 1]:
                word[k], word[k + 1] = word[k + 1], word[k]
                sign = -sign
                changed = True
    reduced = []
    for index in word:
        if reduced and reduced[-1] == index:
            reduced.pop()
        else:
            reduced.append(index)
    mask = 0
    for index in reduced:
        mask |= 1 << index
    return sign, mask


def brute_force_product(a: Multivector, b: Multivector) -> Multivector:
    """Geometric product by explicit expansion of every blade pair"""
    out = defaultdict(float)
    for mask_a, coeff_a in a.terms.items():
        for mask_b, coeff_b in b.terms.items():
            sign, mask = _multiply_blades(_factors(mask_a), _factors(mask_b))
            out[mask] += sign * coeff_a * coeff_b
    return Multivector(a.sig, out)


def random_multivector(rng, n: int, density: float = 0.3, grades=None) -> Multivector:
    """Sparse random multivector; ``grades`` restricts the blades drawn"""
    terms = {}
    for mask in range(1 << n):
        if grades is not None and mask.bit_count() not in grades:
            continue
        if rng.random() < density:
            terms[mask] = rng.uniform(-2.0, 2.0)
    if not terms:
        terms[int(rng.integers(0, 1 << n))] = 1.0
    return Multivector(n, terms)


def random_spec(rng, n: int, frequency: float = 50.0) -> PhasorSpec:
    """Arbitrary unbalance including dead phases and 0 or π phase differences"""
    amplitudes = rng.uniform(0.1, 2.0, size=n)
    angles = rng.uniform(-math.pi, math.pi, size=n)
    roll = rng.random()
    if roll < 0.15:
        amplitudes[rng.integers(0, n)] = 0.0
    elif roll < 0.3:
        i, j = rng.choice(n, size=2, replace=False)
        angles[j] = angles[i] + (math.pi if rng.random() < 0.5 else 0.0)
    phases = list(zip(amplitudes.tolist(), angles.tolist()))
    return PhasorSpec.from_frequency(frequency, phases)
