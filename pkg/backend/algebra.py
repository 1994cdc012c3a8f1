"""Euclidean geometric algebra over R^n with sparse blade-bitmask storage.

Basis blades are encoded as bitmasks: bit ``i`` set means ``σ_{i+1}`` is a
factor, factors always in ascending index order. ``σ31`` is therefore stored
as ``-1 * σ13``; the sign lives in the coefficient, never in the blade.
"""

import logging
import math
from collections import defaultdict
from dataclasses import dataclass
from functools import lru_cache
from types import MappingProxyType
from typing import Iterable, Mapping, Optional, Sequence, Union

import numpy as np

from config import config

logger = logging.getLogger(__name__)

MAX_DIMENSION = 16

Scalar = Union[int, float]


class AlgebraError(ValueError):
    """Base class for geometric algebra errors"""


class SignatureMismatchError(AlgebraError):
    """Operands belong to algebras of different dimension"""


class DegenerateMagnitudeError(AlgebraError):
    """Magnitude too small to normalize"""


class NotSimpleError(AlgebraError):
    """Bivector is not a single oriented plane"""


class UnitViolationError(AlgebraError):
    """Rotor is not unit within tolerance"""


@dataclass(frozen=True)
class AlgebraSig:
    """Signature of the Euclidean algebra: n orthonormal basis vectors"""

    n: int

    def __post_init__(self):
        if not isinstance(self.n, int) or not 2 <= self.n <= MAX_DIMENSION:
            raise AlgebraError(
                f"dimension must be an integer in [2, {MAX_DIMENSION}], got {self.n!r}"
            )

    @property
    def pseudoscalar_mask(self) -> int:
        return (1 << self.n) - 1


def grade_of(mask: int) -> int:
    return mask.bit_count()


@lru_cache(maxsize=None)
def blade_sign(mask_a: int, mask_b: int) -> int:
    """Sign of the canonical reordering of ``blade(a) * blade(b)``.

    Counts, for every factor of ``a``, the factors of ``b`` with a lower index
    it has to hop over. σi σi = +1, so no metric factor appears.
    """
    swaps = 0
    mask_a >>= 1
    while mask_a:
        swaps += (mask_a & mask_b).bit_count()
        mask_a >>= 1
    return -1 if swaps & 1 else 1


def blade_name(mask: int) -> str:
    """Human readable blade label, ``"1"`` for the scalar, ``"s13"`` for σ13"""
    if mask == 0:
        return "1"
    digits = [str(i + 1) for i in range(mask.bit_length()) if mask >> i & 1]
    separator = "_" if any(len(d) > 1 for d in digits) else ""
    return "s" + separator.join(digits)


def blade_mask(indices: Iterable[int]) -> int:
    """Bitmask for 1-based factor indices (order ignored)"""
    mask = 0
    for index in indices:
        mask |= 1 << (index - 1)
    return mask


def _as_sig(sig: Union["AlgebraSig", int]) -> AlgebraSig:
    return sig if isinstance(sig, AlgebraSig) else AlgebraSig(sig)


class Multivector:
    """Immutable sparse multivector: map from blade bitmask to coefficient"""

    __slots__ = ("_sig", "_terms")

    def __init__(
        self,
        sig: Union[AlgebraSig, int],
        terms: Optional[Mapping[int, Scalar]] = None,
    ):
        sig = _as_sig(sig)
        clean = {}
        for mask, coefficient in (terms or {}).items():
            if mask < 0 or mask >> sig.n:
                raise AlgebraError(f"blade {mask:#x} outside R^{sig.n}")
            coefficient = float(coefficient)
            if coefficient != 0.0:
                clean[mask] = coefficient
        object.__setattr__(self, "_sig", sig)
        object.__setattr__(self, "_terms", clean)

    def __setattr__(self, name, value):
        raise AttributeError("Multivector is immutable")

    # -- accessors -----------------------------------------------------------

    @property
    def sig(self) -> AlgebraSig:
        return self._sig

    @property
    def dimension(self) -> int:
        return self._sig.n

    @property
    def terms(self) -> Mapping[int, float]:
        return MappingProxyType(self._terms)

    @property
    def scalar(self) -> float:
        return self._terms.get(0, 0.0)

    def grades(self) -> set:
        return {grade_of(mask) for mask in self._terms}

    def is_zero(self) -> bool:
        return not self._terms

    def __getitem__(self, mask: int) -> float:
        return self._terms.get(mask, 0.0)

    def coefficient(self, *indices: int) -> float:
        """Coefficient of the blade σ_{i j ...} given 1-based indices.

        Unsorted indices pick up the permutation sign, so
        ``coefficient(3, 1) == -coefficient(1, 3)``.
        """
        if len(set(indices)) != len(indices):
            return 0.0
        sign = 1
        running = 0
        for index in indices:
            bit = 1 << (index - 1)
            sign *= blade_sign(running, bit)
            running |= bit
        return sign * self._terms.get(running, 0.0)

    def vector_part(self) -> np.ndarray:
        """Grade-1 coefficients as a length-n array"""
        return np.array(
            [self._terms.get(1 << i, 0.0) for i in range(self.dimension)], dtype=float
        )

    def max_abs(self) -> float:
        return max((abs(c) for c in self._terms.values()), default=0.0)

    # -- arithmetic ----------------------------------------------------------

    def _check_sig(self, other: "Multivector"):
        if other._sig != self._sig:
            raise SignatureMismatchError(
                f"cannot combine R^{self.dimension} with R^{other.dimension}"
            )

    def __add__(self, other):
        if isinstance(other, (int, float)):
            other = Multivector(self._sig, {0: other})
        if not isinstance(other, Multivector):
            return NotImplemented
        self._check_sig(other)
        terms = dict(self._terms)
        for mask, coefficient in other._terms.items():
            terms[mask] = terms.get(mask, 0.0) + coefficient
        return Multivector(self._sig, terms)

    __radd__ = __add__

    def __neg__(self):
        return Multivector(self._sig, {m: -c for m, c in self._terms.items()})

    def __sub__(self, other):
        if isinstance(other, (int, float)):
            return self + (-other)
        if not isinstance(other, Multivector):
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return Multivector(
                self._sig, {m: c * other for m, c in self._terms.items()}
            )
        if not isinstance(other, Multivector):
            return NotImplemented
        return geometric_product(self, other)

    def __rmul__(self, other):
        if isinstance(other, (int, float)):
            return self * other
        return NotImplemented

    def __truediv__(self, other):
        if not isinstance(other, (int, float)):
            return NotImplemented
        return self * (1.0 / other)

    def __xor__(self, other):
        if not isinstance(other, Multivector):
            return NotImplemented
        return outer_product(self, other)

    def __invert__(self):
        return reverse(self)

    def __eq__(self, other):
        if not isinstance(other, Multivector):
            return NotImplemented
        return self._sig == other._sig and self._terms == other._terms

    __hash__ = None

    def isclose(self, other: "Multivector", tol: float = 1e-12) -> bool:
        """True when every coefficient of ``self - other`` is within ``tol``"""
        return (self - other).max_abs() <= tol

    def __repr__(self):
        if not self._terms:
            body = "0"
        else:
            parts = []
            for mask in sorted(self._terms, key=lambda m: (grade_of(m), m)):
                coefficient = self._terms[mask]
                label = "" if mask == 0 else f"*{blade_name(mask)}"
                parts.append(f"{coefficient:+.6g}{label}")
            body = " ".join(parts)
        return f"{type(self).__name__}(R^{self.dimension}: {body})"


class Rotor(Multivector):
    """Even-grade unit multivector R with R R† = 1"""

    __slots__ = ()

    def __init__(self, value: Multivector, tolerance: Optional[float] = None):
        super().__init__(value.sig, value.terms)
        tolerance = config.TAU_UNIT if tolerance is None else tolerance
        odd = [m for m in self._terms if grade_of(m) % 2]
        if odd:
            raise AlgebraError(
                f"rotor has odd-grade terms: {[blade_name(m) for m in odd]}"
            )
        defect = (geometric_product(self, reverse(self)) - 1.0).max_abs()
        if defect > tolerance:
            raise UnitViolationError(f"R R† deviates from 1 by {defect:.3e}")

    @classmethod
    def identity(cls, sig: Union[AlgebraSig, int]) -> "Rotor":
        return cls(Multivector(sig, {0: 1.0}))


# -- constructors --------------------------------------------------------------


def scalar(sig: Union[AlgebraSig, int], value: Scalar) -> Multivector:
    return Multivector(sig, {0: value})


def vector(coordinates: Sequence[Scalar]) -> Multivector:
    """Grade-1 multivector with one coordinate per basis vector"""
    coordinates = list(coordinates)
    return Multivector(
        len(coordinates), {1 << i: c for i, c in enumerate(coordinates)}
    )


def basis_blade(sig: Union[AlgebraSig, int], *indices: int) -> Multivector:
    """Unit blade σ_{i j ...} from 1-based indices, e.g. ``basis_blade(3, 3, 1)``

    gives ``-σ13``.
    """
    sig = _as_sig(sig)
    if any(not 1 <= i <= sig.n for i in indices):
        raise AlgebraError(f"blade indices {indices} outside R^{sig.n}")
    if len(set(indices)) != len(indices):
        return Multivector(sig)
    sign = 1
    running = 0
    for index in indices:
        bit = 1 << (index - 1)
        sign *= blade_sign(running, bit)
        running |= bit
    return Multivector(sig, {running: float(sign)})


# -- products --------------------------------------------------------------------


def _check_pair(a: Multivector, b: Multivector):
    if a.sig != b.sig:
        raise SignatureMismatchError(
            f"cannot combine R^{a.dimension} with R^{b.dimension}"
        )


def _blade_products(a: Multivector, b: Multivector, keep=None) -> Multivector:
    _check_pair(a, b)
    out = defaultdict(float)
    for mask_a, coeff_a in a.terms.items():
        for mask_b, coeff_b in b.terms.items():
            if keep is not None and not keep(mask_a, mask_b):
                continue
            out[mask_a ^ mask_b] += blade_sign(mask_a, mask_b) * coeff_a * coeff_b
    return Multivector(a.sig, out)


def geometric_product(a: Multivector, b: Multivector) -> Multivector:
    return _blade_products(a, b)


def outer_product(a: Multivector, b: Multivector) -> Multivector:
    """Grade-raising part: blade pairs sharing no factor"""
    return _blade_products(a, b, keep=lambda ma, mb: not ma & mb)


def left_contraction(a: Multivector, b: Multivector) -> Multivector:
    """Grade-lowering part: blades of ``a`` fully contained in blades of ``b``"""
    return _blade_products(a, b, keep=lambda ma, mb: not ma & ~mb)


def commutator_product(a: Multivector, b: Multivector) -> Multivector:
    return (geometric_product(a, b) - geometric_product(b, a)) * 0.5


def reverse(a: Multivector) -> Multivector:
    terms = {}
    for mask, coefficient in a.terms.items():
        k = grade_of(mask)
        terms[mask] = -coefficient if (k * (k - 1) // 2) % 2 else coefficient
    return Multivector(a.sig, terms)


def grade_project(a: Multivector, k: int) -> Multivector:
    if not 0 <= k <= a.dimension:
        raise AlgebraError(f"grade {k} outside [0, {a.dimension}]")
    return Multivector(
        a.sig, {m: c for m, c in a.terms.items() if grade_of(m) == k}
    )


def norm(a: Multivector) -> float:
    """Euclidean norm of the coefficient vector"""
    return math.hypot(*a.terms.values())


def normalize(a: Multivector, tolerance: Optional[float] = None) -> Multivector:
    tolerance = config.TAU_ZERO if tolerance is None else tolerance
    magnitude = norm(a)
    if magnitude <= tolerance:
        raise DegenerateMagnitudeError(
            f"cannot normalize multivector of norm {magnitude:.3e}"
        )
    return a / magnitude


# -- rotors ----------------------------------------------------------------------


def is_simple_bivector(plane: Multivector, tolerance: Optional[float] = None) -> bool:
    tolerance = config.TAU_UNIT if tolerance is None else tolerance
    if plane.grades() - {2}:
        return False
    return norm(outer_product(plane, plane)) <= tolerance * max(norm(plane) ** 2, 1.0)


def exp_simple_bivector(theta: float, plane: Multivector) -> Rotor:
    """Half-angle exponential ``cos(θ/2) + sin(θ/2) L̂`` of a unit simple plane"""
    magnitude = norm(plane)
    if abs(magnitude - 1.0) > config.TAU_UNIT:
        raise UnitViolationError(f"rotation plane has norm {magnitude:.12g}, not 1")
    if not is_simple_bivector(plane):
        raise NotSimpleError("rotation plane must be a simple bivector")
    return Rotor(
        scalar(plane.sig, math.cos(theta / 2.0)) + plane * math.sin(theta / 2.0)
    )


def sandwich(rotor: Multivector, x: Multivector) -> Multivector:
    """``R X R†`` with numerically-zero cross-grade residue removed"""
    if not isinstance(rotor, Rotor):
        rotor = Rotor(rotor)
    raw = geometric_product(geometric_product(rotor, x), reverse(rotor))
    floor = config.TAU_PRUNE * raw.max_abs()
    keep_grades = x.grades()
    return Multivector(
        raw.sig,
        {
            m: c
            for m, c in raw.terms.items()
            if grade_of(m) in keep_grades or abs(c) > floor
        },
    )


def blade_angle(a: Multivector, b: Multivector) -> float:
    """Angle between two blades of equal grade, ``arccos⟨â b̂†⟩₀``"""
    cosine = geometric_product(normalize(a), reverse(normalize(b))).scalar
    return math.acos(min(1.0, max(-1.0, cosine)))


def rotor_between(
    target: Multivector,
    source: Multivector,
    half_turn_plane: Optional[Multivector] = None,
) -> Rotor:
    """Rotor ``(1 + â b̂†)/‖1 + â b̂†‖`` turning ``source`` onto ``target``.

    When the denominator vanishes (antipodal blades) and ``half_turn_plane`` is
    given, ``source`` is first turned by the half-turn ``exp((π/2) P)`` and the
    regular formula is applied to the result.
    """
    target_hat = normalize(target)
    source_hat = normalize(source)
    numerator = geometric_product(target_hat, reverse(source_hat)) + 1.0
    denominator = norm(numerator)
    if denominator > config.TAU_ANTIPODAL:
        return Rotor(numerator / denominator)

    if half_turn_plane is None:
        raise AlgebraError("antipodal blades and no half-turn plane supplied")
    logger.debug(
        "antipodal rotor (denominator %.3e), pre-rotating in %r",
        denominator,
        half_turn_plane,
    )
    half_turn = exp_simple_bivector(math.pi, half_turn_plane)
    turned = sandwich(half_turn, source_hat)
    numerator = geometric_product(target_hat, reverse(turned)) + 1.0
    denominator = norm(numerator)
    if denominator <= config.TAU_ANTIPODAL:
        raise AlgebraError("half-turn plane does not resolve the antipodal pair")
    return Rotor(geometric_product(numerator / denominator, half_turn))


def rotation_matrix(rotor: Multivector) -> np.ndarray:
    """Matrix of ``x ↦ R x R†`` built from the images of the basis vectors"""
    n = rotor.dimension
    matrix = np.zeros((n, n))
    for j in range(n):
        image = sandwich(rotor, Multivector(rotor.sig, {1 << j: 1.0}))
        matrix[:, j] = image.vector_part()
    return matrix
