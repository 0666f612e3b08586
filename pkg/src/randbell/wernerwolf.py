"""Werner-Wolf family: r = 2 Bell expressions generated by sign functions on {0,1}^n.

A sign function ``f`` is stored as a length-2**n array of +-1 indexed by
``rank(eps) = sum_j eps_j 2**(j-1)``.  Its coefficient vector is the
normalized Walsh-Hadamard transform ``beta = H f / 2**n``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .core import (
    AngleConfig,
    BellSpec,
    NORM_TOL,
    Stream,
    derive_seed,
    random_bits,
)
from .coplanar import OptimizerConfig, all_mu, canonical_omegas, max_norm_over_angles
from .errors import DomainError, NotSignFunctionError, ShapeError, SizeLimitError

MAX_SITES = 24
MAX_ENUM_SITES = 4


def fwht(a: np.ndarray) -> np.ndarray:
    """Unnormalized Walsh-Hadamard transform along the last axis (butterfly, O(N log N))."""
    a = np.array(a, dtype=float)
    size = a.shape[-1]
    if size < 1 or size & (size - 1):
        raise ShapeError(f"length must be a power of two, got {size}")
    lead = a.shape[:-1]
    h = 1
    while h < size:
        v = a.reshape(lead + (size // (2 * h), 2, h))
        lo = v[..., 0, :].copy()
        hi = v[..., 1, :]
        v[..., 0, :] += hi
        v[..., 1, :] = lo - hi
        h *= 2
    return a


def _sites(size: int) -> int:
    if size < 2 or size & (size - 1):
        raise ShapeError(f"length must be a power of two >= 2, got {size}")
    return size.bit_length() - 1


@dataclass(frozen=True)
class SignFunction:
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.int8)
        _sites(v.size)
        if v.ndim != 1 or not np.all((v == 1) | (v == -1)):
            raise NotSignFunctionError("sign function entries must be +-1")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.size.bit_length() - 1

    def to_hex(self) -> str:
        """Hex-packed bits, bit = (1 - f)/2, little-endian within each byte."""
        bits = ((1 - self.values) // 2).astype(np.uint8)
        return np.packbits(bits, bitorder="little").tobytes().hex()

    @classmethod
    def from_hex(cls, text: str, n: int) -> "SignFunction":
        raw = np.frombuffer(bytes.fromhex(text), dtype=np.uint8)
        bits = np.unpackbits(raw, bitorder="little")[: 2**n]
        if bits.size != 2**n:
            raise ShapeError(f"hex string too short for n={n}")
        return cls(1 - 2 * bits.astype(np.int8))


@dataclass(frozen=True)
class WWCoefficients:
    beta: np.ndarray

    def __post_init__(self):
        b = np.array(self.beta, dtype=float)
        _sites(b.size)
        if abs(float(np.sum(b * b)) - 1.0) > NORM_TOL:
            raise DomainError("Werner-Wolf coefficients must have unit sum of squares")
        b.setflags(write=False)
        object.__setattr__(self, "beta", b)

    @property
    def n(self) -> int:
        return self.beta.size.bit_length() - 1

    def spec(self) -> BellSpec:
        return BellSpec.from_values(self.beta, self.n, 2)


@dataclass(frozen=True)
class ProductCoefficients:
    c: np.ndarray
    theta0: np.ndarray
    theta1: np.ndarray

    @property
    def n(self) -> int:
        return self.theta0.size


def beta_from_f(f: SignFunction | np.ndarray) -> WWCoefficients:
    vals = f.values if isinstance(f, SignFunction) else np.asarray(f)
    n = _sites(vals.size)
    return WWCoefficients(fwht(vals) / 2**n)


def f_from_beta(beta: WWCoefficients | np.ndarray, tol: float = 1e-9) -> SignFunction:
    b = beta.beta if isinstance(beta, WWCoefficients) else np.asarray(beta, dtype=float)
    _sites(b.size)
    g = fwht(b)
    if np.max(np.abs(np.abs(g) - 1.0)) > tol:
        raise NotSignFunctionError("inverse transform is not a +-1 function; beta is not extremal")
    return SignFunction(np.where(g > 0, 1, -1))


def _angles(theta0, theta1) -> AngleConfig:
    t0 = np.asarray(theta0, dtype=float)
    t1 = np.asarray(theta1, dtype=float)
    if t0.shape != t1.shape or t0.ndim != 1:
        raise ShapeError("theta0 and theta1 must be length-n arrays")
    return AngleConfig(np.stack([t0, t1]))


def ww_eigenvalue_magnitudes(f: SignFunction, theta0, theta1) -> list[tuple[tuple[int, ...], float]]:
    """``(omega, |mu(omega)|)`` for every canonical parity vector."""
    if f.n > MAX_SITES:
        raise SizeLimitError(f"n must be <= {MAX_SITES}")
    angles = _angles(theta0, theta1)
    if angles.n != f.n:
        raise ShapeError("angle arrays must have length n")
    mags = np.abs(all_mu(beta_from_f(f).spec(), angles)[0::2])
    return [(tuple(int(x) for x in w), float(m)) for w, m in zip(canonical_omegas(f.n), mags)]


def ww_norm_fixed_angles(f: SignFunction, theta0, theta1) -> float:
    angles = _angles(theta0, theta1)
    return float(np.max(np.abs(all_mu(beta_from_f(f).spec(), angles)[0::2])))


def product_coefficients(theta0, theta1) -> ProductCoefficients:
    """``c(eps) = 2**-n prod_j (e^{i theta0_j} + (-1)**eps_j e^{i theta1_j})``."""
    t0 = np.asarray(theta0, dtype=float)
    t1 = np.asarray(theta1, dtype=float)
    if t0.shape != t1.shape or t0.ndim != 1:
        raise ShapeError("theta0 and theta1 must be length-n arrays")
    c = np.ones(1, dtype=complex)
    for j in range(t0.size):
        a, b = np.exp(1j * t0[j]), np.exp(1j * t1[j])
        # site j becomes the most significant bit
        c = np.concatenate([c * (a + b) / 2.0, c * (a - b) / 2.0])
    return ProductCoefficients(c, t0, t1)


def lambda_via_product(f: SignFunction, pc: ProductCoefficients) -> complex:
    if f.values.size != pc.c.size:
        raise ShapeError("sign function and product coefficients differ in n")
    return complex(np.sum(f.values * pc.c))


def r_poly_eval(f: SignFunction, pc: ProductCoefficients, t: float) -> complex:
    """``R(t) = sum_eps f(eps) c(eps) exp(i rank(eps) t)``, summed in rank order."""
    if f.values.size != pc.c.size:
        raise ShapeError("sign function and product coefficients differ in n")
    freq = np.arange(f.values.size)
    return complex(np.sum(f.values * pc.c * np.exp(1j * freq * t)))


def r_poly_sup(f: SignFunction, pc: ProductCoefficients, grid: int | None = None) -> float:
    """Max of ``|R|`` on a uniform grid (FFT; default 4x oversampling of the degree)."""
    size = f.values.size
    grid = grid or 4 * size
    coeffs = np.zeros(grid, dtype=complex)
    coeffs[:size] = f.values * pc.c
    return float(np.max(np.abs(np.fft.ifft(coeffs) * grid)))


def ww_max_norm_over_angles(f: SignFunction, opt: OptimizerConfig | None = None) -> tuple[float, AngleConfig]:
    if f.n > MAX_SITES:
        raise SizeLimitError(f"n must be <= {MAX_SITES}")
    return max_norm_over_angles(beta_from_f(f).spec(), opt)


def enumerate_f(n: int) -> Iterator[SignFunction]:
    """All 2**(2**n) sign functions; function m has bit i of m at rank i."""
    if n > MAX_ENUM_SITES:
        raise SizeLimitError(f"enumeration needs n <= {MAX_ENUM_SITES}, got {n}")
    if n < 1:
        raise DomainError("n must be >= 1")
    for m in range(2 ** (2**n)):
        yield f_from_index(m, n)


def f_from_index(m: int, n: int) -> SignFunction:
    """The ``m``-th sign function in enumeration order."""
    if not 0 <= m < 2 ** (2**n):
        raise DomainError(f"function index {m} out of range for n={n}")
    shifts = np.arange(2**n, dtype=np.int64)
    return SignFunction(1 - 2 * ((m >> shifts) & 1))


def sample_f(seed: int, n: int) -> SignFunction:
    if not 1 <= n <= MAX_SITES:
        raise SizeLimitError(f"sampling needs 1 <= n <= {MAX_SITES}, got {n}")
    return SignFunction(1 - 2 * random_bits(seed, 2**n, Stream.SIGNS).astype(np.int8))


def sample_f_stream(master_seed: int, n: int) -> Iterator[SignFunction]:
    i = 0
    while True:
        yield sample_f(derive_seed(master_seed, i), n)
        i += 1
