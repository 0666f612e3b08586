"""Shared data model for random Bell operators and the closed-form bounds.

Conventions used throughout the package:

* settings are 0-based, ``k_j in [0, r-1]``;
* multi-indices are ranked little-endian, ``rank(k) = sum_j k_j r**(j-1)``, so
  site 1 is the least significant digit;
* angles are radians, reduced mod 2*pi on ingestion;
* every coefficient vector has unit Euclidean norm.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DegenerateCoefficientsError,
    DomainError,
    InvalidIndexError,
    ShapeError,
    SizeLimitError,
    UnsupportedConfigurationError,
)

TWO_PI = 2.0 * math.pi
NORM_TOL = 1e-12
MAX_TERMS = 2**30
LOG_BASE = "natural"

_MASK64 = (1 << 64) - 1


# ---------------------------------------------------------------------------
# multi-indices
# ---------------------------------------------------------------------------

def rank(settings: Sequence[int], r: int) -> int:
    """Little-endian rank of a multi-index: site 1 is the least significant."""
    out = 0
    scale = 1
    for k in settings:
        k = int(k)
        if not 0 <= k < r:
            raise InvalidIndexError(f"setting {k} outside [0, {r - 1}]")
        out += k * scale
        scale *= r
    return out


def unrank(index: int, n: int, r: int) -> tuple[int, ...]:
    if not 0 <= index < r**n:
        raise InvalidIndexError(f"rank {index} outside [0, {r**n - 1}]")
    digits = []
    for _ in range(n):
        index, k = divmod(index, r)
        digits.append(k)
    return tuple(digits)


def digit_table(n: int, r: int) -> np.ndarray:
    """Array of shape (r**n, n) whose row ``m`` is ``unrank(m, n, r)``."""
    idx = np.arange(r**n, dtype=np.int64)
    return np.stack([(idx // r**j) % r for j in range(n)], axis=1)


def as_tensor(values: np.ndarray, n: int, r: int) -> np.ndarray:
    """View a rank-ordered vector as an n-way array indexed ``[k_1, ..., k_n]``."""
    return np.asarray(values).reshape((r,) * n, order="F")


def _check_terms(n: int, r: int) -> int:
    if n < 1 or r < 1:
        raise DomainError(f"need n >= 1 and r >= 1, got n={n}, r={r}")
    if r**n > MAX_TERMS:
        raise SizeLimitError(f"r**n = {r}**{n} exceeds {MAX_TERMS} terms")
    return r**n


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype)
    arr.setflags(write=False)
    return arr


# ---------------------------------------------------------------------------
# seeding
# ---------------------------------------------------------------------------

def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def derive_seed(master_seed: int, index: int) -> int:
    """Stable 64-bit seed for item ``index`` of a campaign."""
    return splitmix64(splitmix64(int(master_seed) & _MASK64) ^ (int(index) & _MASK64))


class Stream(int, Enum):
    """Independent Philox key lanes derived from one 64-bit seed."""

    SIGNS = 0
    COEFFICIENTS = 1
    OPTIMIZER = 2
    ANGLES = 3
    STATE = 4
    HEURISTIC = 5
    ORACLE = 6


def generator(seed: int, stream: Stream | int = Stream.OPTIMIZER) -> np.random.Generator:
    """Counter-based generator keyed by ``(seed, stream)``."""
    key = np.array([int(seed) & _MASK64, int(stream)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def random_bits(seed: int, count: int, stream: Stream | int = Stream.SIGNS) -> np.ndarray:
    """``count`` uniform bits drawn from raw Philox words, little-endian within each word."""
    bg = np.random.Philox(key=np.array([int(seed) & _MASK64, int(stream)], dtype=np.uint64))
    words = np.asarray(bg.random_raw(-(-count // 64)), dtype="<u8")
    return np.unpackbits(words.view(np.uint8), bitorder="little")[:count]


# ---------------------------------------------------------------------------
# data model
# ---------------------------------------------------------------------------

class Scheme(str, Enum):
    UNIFORM = "uniform"
    RANDOM_NORMALIZED = "random_normalized"
    EXPLICIT = "explicit"


def _check_unit(values: np.ndarray, what: str) -> None:
    total = float(np.sum(values * values))
    if abs(total - 1.0) > NORM_TOL:
        raise DegenerateCoefficientsError(f"{what}: sum of squares is {total!r}, expected 1")


@dataclass(frozen=True)
class CoefficientTensor:
    values: np.ndarray
    n: int
    r: int

    def __post_init__(self):
        vals = _frozen(self.values)
        if vals.shape != (self.r**self.n,):
            raise ShapeError(f"expected {self.r**self.n} coefficients, got shape {vals.shape}")
        if np.any(vals < 0):
            raise DomainError("coefficients must be nonnegative")
        _check_unit(vals, "CoefficientTensor")
        object.__setattr__(self, "values", vals)


@dataclass(frozen=True)
class SignAssignment:
    signs: np.ndarray
    seed: int

    def __post_init__(self):
        s = _frozen(self.signs, dtype=np.int8)
        if not np.all((s == 1) | (s == -1)):
            raise DomainError("signs must be exactly +1 or -1")
        object.__setattr__(self, "signs", s)


@dataclass(frozen=True)
class SignedCoefficients:
    values: np.ndarray
    n: int
    r: int

    def __post_init__(self):
        vals = _frozen(self.values)
        if vals.shape != (self.r**self.n,):
            raise ShapeError(f"expected {self.r**self.n} coefficients, got shape {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise DomainError("coefficients must be finite")
        _check_unit(vals, "SignedCoefficients")
        object.__setattr__(self, "values", vals)

    @classmethod
    def combine(cls, coeffs: CoefficientTensor, signs: SignAssignment) -> "SignedCoefficients":
        if signs.signs.shape != coeffs.values.shape:
            raise ShapeError("sign and coefficient arrays differ in length")
        return cls(coeffs.values * signs.signs, coeffs.n, coeffs.r)

    def tensor(self) -> np.ndarray:
        return as_tensor(self.values, self.n, self.r)

    @property
    def l1(self) -> float:
        return float(np.sum(np.abs(self.values)))


@dataclass(frozen=True)
class BellSpec:
    """Coefficients of a Bell operator; directions are supplied separately."""

    coeffs: SignedCoefficients
    n: int = field(default=-1)
    r: int = field(default=-1)

    def __post_init__(self):
        if self.n == -1:
            object.__setattr__(self, "n", self.coeffs.n)
        if self.r == -1:
            object.__setattr__(self, "r", self.coeffs.r)
        if (self.n, self.r) != (self.coeffs.n, self.coeffs.r):
            raise ShapeError(
                f"spec dimensions (n={self.n}, r={self.r}) disagree with coefficients "
                f"(n={self.coeffs.n}, r={self.coeffs.r})"
            )

    @classmethod
    def from_values(cls, values: Iterable[float], n: int, r: int) -> "BellSpec":
        return cls(SignedCoefficients(np.asarray(list(values), dtype=float), n, r))

    @classmethod
    def from_parts(cls, coeffs: CoefficientTensor, signs: SignAssignment) -> "BellSpec":
        return cls(SignedCoefficients.combine(coeffs, signs))

    @property
    def values(self) -> np.ndarray:
        return self.coeffs.values

    def negated(self) -> "BellSpec":
        return BellSpec.from_values(-self.values, self.n, self.r)


def _canonical_angles(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("angles must be finite")
    arr = np.mod(arr, TWO_PI)
    # mod can round up to exactly 2*pi for tiny negative inputs
    arr[arr >= TWO_PI] = 0.0
    return arr


@dataclass(frozen=True)
class AngleConfig:
    """Coplanar directions: ``angles[k, j]`` is the in-plane angle of setting k at site j."""

    angles: np.ndarray

    def __post_init__(self):
        arr = _canonical_angles(self.angles)
        if arr.ndim != 2:
            raise ShapeError(f"angles must be an r x n array, got shape {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "angles", arr)

    @property
    def r(self) -> int:
        return self.angles.shape[0]

    @property
    def n(self) -> int:
        return self.angles.shape[1]

    @classmethod
    def from_sites(cls, per_site: Sequence[Sequence[float]]) -> "AngleConfig":
        """Build from one row of r angles per site, e.g. ``[(0, pi/2), (-pi/4, pi/4)]``."""
        return cls(np.asarray(per_site, dtype=float).T)

    def to_polar(self) -> "PolarConfig":
        """Embed in the x-y plane: theta = pi/2, phi = t."""
        return PolarConfig(np.full(self.angles.shape, math.pi / 2), self.angles)


@dataclass(frozen=True)
class PolarConfig:
    thetas: np.ndarray
    phis: np.ndarray

    def __post_init__(self):
        th = np.array(self.thetas, dtype=float)
        ph = np.array(self.phis, dtype=float)
        if th.shape != ph.shape or th.ndim != 2:
            raise ShapeError("thetas and phis must be r x n arrays of equal shape")
        if not (np.all(np.isfinite(th)) and np.all(np.isfinite(ph))):
            raise DomainError("angles must be finite")
        th.setflags(write=False)
        ph.setflags(write=False)
        object.__setattr__(self, "thetas", th)
        object.__setattr__(self, "phis", ph)

    @property
    def r(self) -> int:
        return self.thetas.shape[0]

    @property
    def n(self) -> int:
        return self.thetas.shape[1]

    def directions(self) -> np.ndarray:
        """Unit vectors, shape (r, n, 3)."""
        st = np.sin(self.thetas)
        return np.stack(
            [st * np.cos(self.phis), st * np.sin(self.phis), np.cos(self.thetas)], axis=-1
        )


# ---------------------------------------------------------------------------
# constructors
# ---------------------------------------------------------------------------

def make_coefficients(
    scheme: Scheme | str = Scheme.UNIFORM,
    n: int = 2,
    r: int = 2,
    seed: int | None = None,
    values: Sequence[float] | np.ndarray | None = None,
) -> CoefficientTensor:
    """Nonnegative, unit-norm coefficient tensor built by ``scheme``.

    ``random_normalized`` needs ``seed``; ``explicit`` needs ``values`` and
    rescales them to unit sum of squares.
    """
    scheme = Scheme(scheme)
    size = _check_terms(n, r)
    if scheme is Scheme.UNIFORM:
        vals = np.full(size, float(r) ** (-n / 2))
    elif scheme is Scheme.RANDOM_NORMALIZED:
        if seed is None:
            raise DomainError("random_normalized coefficients need a seed")
        vals = np.abs(generator(seed, Stream.COEFFICIENTS).standard_normal(size))
        vals /= math.sqrt(float(np.sum(vals * vals)))
    else:
        if values is None:
            raise DomainError("explicit coefficients need a values array")
        vals = np.asarray(values, dtype=float)
        if vals.shape != (size,):
            raise ShapeError(f"expected {size} explicit coefficients, got shape {vals.shape}")
        if np.any(vals < 0):
            raise DomainError("explicit coefficients must be nonnegative")
        norm = math.sqrt(float(np.sum(vals * vals)))
        if norm == 0.0:
            raise DegenerateCoefficientsError("explicit coefficients are all zero")
        vals = vals / norm
    return CoefficientTensor(vals, n, r)


def sample_signs(master_seed: int, n: int, r: int) -> SignAssignment:
    """``r**n`` i.i.d. uniform signs, a pure function of ``(master_seed, n, r)``."""
    size = _check_terms(n, r)
    bits = random_bits(master_seed, size, Stream.SIGNS)
    return SignAssignment(1 - 2 * bits.astype(np.int8), int(master_seed))


def random_spec(seed: int, n: int, r: int, scheme: Scheme | str = Scheme.UNIFORM) -> BellSpec:
    """Random Bell operator coefficients: fixed ``scheme`` magnitudes, random signs."""
    coeffs = make_coefficients(scheme, n, r, seed=seed)
    return BellSpec.from_parts(coeffs, sample_signs(seed, n, r))


# ---------------------------------------------------------------------------
# bounds
# ---------------------------------------------------------------------------

class PropKind(str, Enum):
    PROP1 = "prop1"
    PROP2 = "prop2"
    PROP3 = "prop3"


def szk_bound(s: int, N: int, weight: float = 1.0) -> float:
    """Salem-Zygmund-Kahane sup-norm bound ``9 * sqrt(s * weight * ln N)``."""
    if s < 1:
        raise DomainError(f"s must be >= 1, got {s}")
    if N < 2:
        raise DomainError(f"degree N must be >= 2, got {N}")
    if not weight > 0:
        raise DomainError(f"weight must be positive, got {weight}")
    return 9.0 * math.sqrt(s * weight * math.log(N))


def szk_confidence(s: int, N: int) -> float:
    """Probability floor ``1 - 1/(N**2 e**s)`` attached to :func:`szk_bound`."""
    if s < 1 or N < 2:
        raise DomainError(f"need s >= 1 and N >= 2, got s={s}, N={N}")
    return 1.0 - math.exp(-s - 2.0 * math.log(N))


def prop_bound(kind: PropKind | str, n: int, r: int = 2) -> float:
    kind = PropKind(kind)
    if n < 2:
        raise DomainError(f"bounds need n >= 2, got n={n}")
    if kind is PropKind.PROP1:
        return szk_bound(r * n, n, 1.0)
    if kind is PropKind.PROP2:
        return 36.0 * math.sqrt(r * n * math.log(n))
    if r != 2:
        raise UnsupportedConfigurationError("the Werner-Wolf bound is defined for r = 2 only")
    return 13.0 * math.sqrt(n)


def ww_direct_bound(n: int) -> float:
    """Direct SZK instantiation for R(t): s = 1, N = 2**n, i.e. ``9 sqrt(n ln 2)``."""
    return szk_bound(1, 2**n, 1.0)


def tail_probability(n: int, r: int) -> float:
    """Lower bound ``1 - 1/(n**2 e**(r n))`` on P(max ||Q|| <= prop1 bound)."""
    if n < 2:
        raise DomainError(f"tail probability needs n >= 2, got n={n}")
    if r < 1:
        raise DomainError(f"r must be >= 1, got r={r}")
    return szk_confidence(r * n, n)


def mk_reference(n: int) -> float:
    """Largest Bell violation for n qubits, ``2**((n-1)/2)``."""
    return 2.0 ** ((n - 1) / 2)
