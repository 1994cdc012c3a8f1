"""Identify the plane of a sinusoidal locus and rotate it onto σ12.

Two non-collinear samples span the ps-plane ``B = v1 ∧ v2``. In three
dimensions a single rotor ``exp(θ L̂ / 2)`` about the intersection line of
``B`` and ``σ12`` aligns the planes. In n dimensions the planes may not
intersect, so ``v1`` is first turned onto ``σ1`` and the resulting plane,
which then shares ``σ1`` with ``σ12``, is turned onto ``σ12``.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np

from algebra import (
    DegenerateMagnitudeError,
    Multivector,
    Rotor,
    basis_blade,
    blade_angle,
    blade_name,
    exp_simple_bivector,
    grade_of,
    norm,
    normalize,
    outer_product,
    rotation_matrix,
    rotor_between,
    sandwich,
    vector,
)
from config import config

logger = logging.getLogger(__name__)

VectorLike = Union[Multivector, Sequence[float], np.ndarray]

SIGMA_12 = 0b11
SIGMA_13 = 0b101
SIGMA_23 = 0b110

# Power-invariant Clarke matrix: rows give alpha, beta and the zero component
CLARKE_MATRIX = np.array(
    [
        [math.sqrt(2.0 / 3.0), -math.sqrt(1.0 / 6.0), -math.sqrt(1.0 / 6.0)],
        [0.0, math.sqrt(0.5), -math.sqrt(0.5)],
        [1.0 / math.sqrt(3.0)] * 3,
    ]
)


class Method(str, Enum):
    DIRECT_3D = "Direct3D"
    TWO_STEP_ND = "TwoStepND"


class DegeneracyKind(str, Enum):
    COLLINEAR = "Collinear"
    ZERO_VECTOR = "ZeroVector"
    NEAR_HALF_PERIOD = "NearHalfPeriod"


@dataclass(frozen=True)
class DegeneracyReport:
    """Why a sample pair cannot (or can only poorly) define a plane"""

    kind: DegeneracyKind
    conditioning: float  # sin of the angle between the two samples, in [0, 1]


class FrameError(ValueError):
    """Base class for frame identification errors"""


class DegenerateSamplesError(FrameError):
    def __init__(self, report: DegeneracyReport):
        self.report = report
        super().__init__(
            f"{report.kind.value} samples (conditioning {report.conditioning:.3e})"
        )


class AlreadyAlignedError(FrameError):
    """The plane already is σ12 (up to orientation)"""


class InconsistentInputError(FrameError):
    """Vector does not lie in the given plane"""


class OrientationError(FrameError):
    """Reversed orientation cannot be undone by a rotation in two dimensions"""


@dataclass(frozen=True, eq=False)
class FrameTransform:
    """Identified plane and the rotor that maps it onto σ12"""

    B: Multivector
    theta: float
    L_hat: Optional[Multivector]
    rotor: Rotor
    method: Method
    source: Tuple[float, float] = (0.0, 0.0)
    stages: Tuple[Rotor, ...] = ()  # R1, R2 of the two-step construction
    coordinates: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "coordinates", rotation_matrix(self.rotor))
        residual = self.alignment_residual()
        if residual > config.TAU_ALIGN:
            raise FrameError(f"rotor leaves alignment residual {residual:.3e}")

    @property
    def n(self) -> int:
        return self.B.dimension

    def alignment_residual(self) -> float:
        aligned = sandwich(self.rotor, normalize(self.B))
        return (aligned - basis_blade(self.B.sig, 1, 2)).max_abs()

    def rotor_terms(self) -> Dict[str, float]:
        """Rotor coefficients keyed ``r_0``, ``r_12``, ``r_13``, ... (grade order)"""
        n = self.n
        masks = {0} | {
            (1 << i) | (1 << j) for i in range(n) for j in range(i + 1, n)
        }
        masks |= set(self.rotor.terms)
        ordered = sorted(masks, key=lambda m: (grade_of(m), _index_key(m)))
        return {
            "r_" + ("0" if m == 0 else blade_name(m)[1:]): self.rotor[m]
            for m in ordered
        }


def _index_key(mask: int) -> Tuple[int, ...]:
    return tuple(i for i in range(mask.bit_length()) if mask >> i & 1)


def _as_vector(v: VectorLike) -> Multivector:
    if isinstance(v, Multivector):
        if v.grades() - {1}:
            raise FrameError("samples must be grade-1 vectors")
        return v
    return vector(np.asarray(v, dtype=float).reshape(-1))


def _check_bivector(B: Multivector):
    if B.grades() - {2}:
        raise FrameError("plane must be a pure bivector")
    if norm(B) <= config.TAU_ZERO:
        raise DegenerateMagnitudeError("zero bivector does not define a plane")


def assess_pair(
    v1: VectorLike, v2: VectorLike, tau_collinear: Optional[float] = None
) -> Optional[DegeneracyReport]:
    """Degeneracy report for a sample pair, or None when well conditioned"""
    tau = config.TAU_COLLINEAR if tau_collinear is None else tau_collinear
    a, b = _as_vector(v1), _as_vector(v2)
    norm_a, norm_b = norm(a), norm(b)
    if norm_a <= config.TAU_ZERO or norm_b <= config.TAU_ZERO:
        return DegeneracyReport(DegeneracyKind.ZERO_VECTOR, 0.0)
    conditioning = min(1.0, norm(outer_product(a, b)) / (norm_a * norm_b))
    if conditioning <= tau:
        return DegeneracyReport(DegeneracyKind.COLLINEAR, conditioning)
    if conditioning <= math.sqrt(tau):
        return DegeneracyReport(DegeneracyKind.NEAR_HALF_PERIOD, conditioning)
    return None


def vector_angle(v1: VectorLike, v2: VectorLike) -> float:
    return blade_angle(_as_vector(v1), _as_vector(v2))


def identify_plane(
    v1: VectorLike, v2: VectorLike, tau_collinear: Optional[float] = None
) -> Multivector:
    """Bivector ``v1 ∧ v2`` of the plane holding both samples"""
    report = assess_pair(v1, v2, tau_collinear)
    if report is not None and report.kind != DegeneracyKind.NEAR_HALF_PERIOD:
        raise DegenerateSamplesError(report)
    if report is not None:
        logger.warning(
            "poorly conditioned sample pair (sin = %.3e)", report.conditioning
        )
    return outer_product(_as_vector(v1), _as_vector(v2))


def plane_angle(B: Multivector) -> float:
    """Angle in [0, π] between ``B`` and σ12"""
    _check_bivector(B)
    off_plane = math.hypot(*(c for m, c in B.terms.items() if m != SIGMA_12))
    return math.atan2(off_plane, B[SIGMA_12])


def rotation_plane(B: Multivector) -> Multivector:
    """Unit plane perpendicular to both ``B`` and σ12 (three phases only)"""
    if B.dimension != 3:
        raise FrameError("rotation_plane is defined for three dimensions")
    _check_bivector(B)
    b13, b23 = B[SIGMA_13], B[SIGMA_23]
    radius = math.hypot(b13, b23)
    if radius <= config.TAU_ZERO * norm(B):
        raise AlreadyAlignedError("plane already coincides with σ12")
    return Multivector(B.sig, {SIGMA_13: -b23 / radius, SIGMA_23: b13 / radius})


def rotor_align_3d(
    B: Multivector, source: Tuple[float, float] = (0.0, 0.0)
) -> FrameTransform:
    """``R = exp(θ L̂ / 2)`` turning the plane ``B`` onto σ12"""
    if B.dimension != 3:
        raise FrameError("the direct rotor needs three phases")
    theta = plane_angle(B)
    try:
        L_hat = rotation_plane(B)
        rotor = exp_simple_bivector(theta, L_hat)
    except AlreadyAlignedError:
        if B[SIGMA_12] > 0:
            L_hat, rotor = None, Rotor.identity(B.sig)
        else:
            # Antipodal plane: half-turn about σ1
            logger.debug("plane is -σ12, using the σ23 half-turn")
            L_hat = basis_blade(B.sig, 2, 3)
            rotor = exp_simple_bivector(math.pi, L_hat)
    return FrameTransform(
        B=B,
        theta=theta,
        L_hat=L_hat,
        rotor=rotor,
        method=Method.DIRECT_3D,
        source=source,
    )


def rotor_align_nd(
    v1: VectorLike, B: Multivector, source: Tuple[float, float] = (0.0, 0.0)
) -> FrameTransform:
    """Two-step rotor: ``R1`` turns v1 onto σ1, ``R2`` turns ``R1 B R1†`` to σ12"""
    v1 = _as_vector(v1)
    _check_bivector(B)
    if v1.sig != B.sig:
        raise FrameError("sample and plane live in different dimensions")
    if norm(v1) <= config.TAU_ZERO:
        raise DegenerateSamplesError(DegeneracyReport(DegeneracyKind.ZERO_VECTOR, 0.0))
    off_plane = norm(outer_product(v1, B))
    if off_plane > 1e-9 * norm(v1) * norm(B):
        raise InconsistentInputError(
            f"v1 leaves the plane (|v1 ∧ B| = {off_plane:.3e})"
        )
    n = B.dimension
    if n == 2 and B[SIGMA_12] < 0:
        raise OrientationError("plane orientation opposes σ12 in two dimensions")

    sigma_1 = basis_blade(B.sig, 1)
    sigma_12 = basis_blade(B.sig, 1, 2)
    r1 = rotor_between(sigma_1, v1, half_turn_plane=sigma_12)
    crossed = sandwich(r1, normalize(B))
    r2 = rotor_between(
        sigma_12, crossed, half_turn_plane=basis_blade(B.sig, 2, 3) if n > 2 else None
    )
    rotor = Rotor(r2 * r1)
    return FrameTransform(
        B=B,
        theta=plane_angle(B),
        L_hat=None,
        rotor=rotor,
        method=Method.TWO_STEP_ND,
        source=source,
        stages=(r1, r2),
    )


def identify(
    v1: VectorLike,
    v2: VectorLike,
    source: Tuple[float, float] = (0.0, 0.0),
    method: Optional[Method] = None,
    tau_collinear: Optional[float] = None,
) -> FrameTransform:
    """Plane and rotor from two samples; Direct3D for three phases by default"""
    B = identify_plane(v1, v2, tau_collinear)
    if method is None:
        method = Method.DIRECT_3D if B.dimension == 3 else Method.TWO_STEP_ND
    if method == Method.DIRECT_3D:
        return rotor_align_3d(B, source)
    return rotor_align_nd(v1, B, source)


def transform_sample(
    ft: FrameTransform, v: VectorLike
) -> Tuple[float, float, np.ndarray]:
    """Coordinates of ``R v R†``: (p, s, remaining n−2 components)"""
    if isinstance(v, Multivector):
        v = v.vector_part()
    rotated = ft.coordinates @ np.asarray(v, dtype=float).reshape(-1)
    return float(rotated[0]), float(rotated[1]), rotated[2:]


def inverse_transform(
    ft: FrameTransform, p: float, s: float, residual: Optional[Sequence[float]] = None
) -> np.ndarray:
    """Phase coordinates of the vector with ps coordinates (p, s, residual)"""
    rotated = np.zeros(ft.n)
    rotated[0], rotated[1] = p, s
    if residual is not None:
        rotated[2:] = residual
    return ft.coordinates.T @ rotated


def clarke_transform(v: VectorLike) -> Tuple[float, float, float]:
    """Power-invariant Clarke transform (alpha, beta, zero) of a 3-phase sample"""
    if isinstance(v, Multivector):
        v = v.vector_part()
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.shape != (3,):
        raise FrameError("the Clarke transform is defined for three phases")
    alpha, beta, zero = CLARKE_MATRIX @ v
    return float(alpha), float(beta), float(zero)


def unbalance_diagnostic(B: Multivector) -> Tuple[float, float]:
    """Tilt θ of the locus plane against σ12 and the degree sin θ"""
    theta = plane_angle(B)
    return theta, math.sin(theta)
