"""Pure-state n-qubit simulator for Bell expectations at arbitrary directions.

Basis index ``b = sum_j bit_j 2**(j-1)``; bit 0 is spin up along z.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce

import numpy as np

from .core import (
    NORM_TOL,
    TWO_PI,
    AngleConfig,
    BellSpec,
    PolarConfig,
    Stream,
    as_tensor,
    generator,
)
from .errors import DomainError, NumericError, ShapeError, SizeLimitError

MAX_STATE_SITES = 24
MAX_EXPECTATION_SITES = 14
_CHUNK = 2**22

PAULI = np.array(
    [[[0, 1], [1, 0]], [[0, -1j], [1j, 0]], [[1, 0], [0, -1]]], dtype=complex
)


@dataclass(frozen=True)
class QuantumState:
    amplitudes: np.ndarray

    def __post_init__(self):
        a = np.array(self.amplitudes, dtype=complex)
        if a.ndim != 1 or a.size < 2 or a.size & (a.size - 1):
            raise ShapeError(f"state length must be a power of two >= 2, got {a.shape}")
        total = float(np.vdot(a, a).real)
        if abs(total - 1.0) > NORM_TOL:
            raise DomainError(f"state norm squared is {total!r}, expected 1")
        a.setflags(write=False)
        object.__setattr__(self, "amplitudes", a)

    @property
    def n(self) -> int:
        return self.amplitudes.size.bit_length() - 1

    @classmethod
    def normalized(cls, amplitudes) -> "QuantumState":
        a = np.asarray(amplitudes, dtype=complex)
        return cls(a / np.linalg.norm(a))

    def to_pairs(self) -> list[list[float]]:
        return [[float(z.real), float(z.imag)] for z in self.amplitudes]

    @classmethod
    def from_pairs(cls, pairs) -> "QuantumState":
        arr = np.asarray(pairs, dtype=float)
        return cls(arr[:, 0] + 1j * arr[:, 1])


def spin_matrix(theta, phi) -> np.ndarray:
    """``sigma(a)`` for a = (sin t cos p, sin t sin p, cos t); broadcasts, shape (..., 2, 2)."""
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    c, s = np.cos(theta), np.sin(theta)
    out = np.empty(theta.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = c
    out[..., 0, 1] = s * np.exp(-1j * phi)
    out[..., 1, 0] = s * np.exp(1j * phi)
    out[..., 1, 1] = -c
    return out


def ghz(n: int) -> QuantumState:
    if not 1 <= n <= MAX_STATE_SITES:
        raise SizeLimitError(f"ghz needs 1 <= n <= {MAX_STATE_SITES}, got {n}")
    a = np.zeros(2**n, dtype=complex)
    a[0] = a[-1] = 1.0 / math.sqrt(2.0)
    return QuantumState(a)


def _apply(psi: np.ndarray, n: int, site: int, mat: np.ndarray) -> np.ndarray:
    """Apply a 2x2 matrix (or a stack of them) to 0-based ``site`` of ``psi`` (..., 2**n).

    With ``mat`` of shape (m, 2, 2) the result gains a new leading axis of size m.
    """
    lead = psi.shape[:-1]
    x = psi.reshape(lead + (2 ** (n - site - 1), 2, 2**site))
    if mat.ndim == 2:
        return np.einsum("ab,...xbz->...xaz", mat, x).reshape(psi.shape)
    y = np.einsum("mab,...xbz->m...xaz", mat, x)
    return y.reshape((mat.shape[0],) + psi.shape)


def apply_spin(state: QuantumState, site: int, direction: tuple[float, float]) -> QuantumState:
    """Apply ``sigma(theta, phi)`` on 1-based ``site``."""
    n = state.n
    if not 1 <= site <= n:
        raise DomainError(f"site {site} outside [1, {n}]")
    out = _apply(state.amplitudes, n, site - 1, spin_matrix(*direction))
    return QuantumState(out)


def _stack(psi: np.ndarray, n: int, sites: range, mats: np.ndarray) -> np.ndarray:
    """Apply every setting at each site in ``sites``; rows come out rank ordered."""
    x = psi[None, :]
    for j in sites:
        x = _apply(x, n, j, mats[:, j]).reshape(-1, psi.size)
    return x


def _check_expectation(spec: BellSpec, state: QuantumState, polar: PolarConfig) -> None:
    if (polar.r, polar.n) != (spec.r, spec.n) or state.n != spec.n:
        raise ShapeError("spec, state and direction grid disagree in size")
    if spec.n > MAX_EXPECTATION_SITES or spec.r**spec.n * 2**spec.n > 2**32:
        raise SizeLimitError(f"expectation budget exceeded for n={spec.n}, r={spec.r}")


def _expectation(values: np.ndarray, psi: np.ndarray, n: int, r: int, mats: np.ndarray) -> complex:
    # inner block of m sites is batched, the outer n - m sites are looped over
    m = n
    while m > 1 and r**m * psi.size > _CHUNK:
        m -= 1
    block = r**m
    total = 0j
    outer = r ** (n - m)
    for q in range(outer):
        phi = psi
        digits = q
        for j in range(m, n):
            digits, k = divmod(digits, r)
            phi = _apply(phi, n, j, mats[k, j])
        rows = _stack(phi, n, range(m), mats)
        total += np.dot(values[q * block:(q + 1) * block], rows @ np.conj(psi))
    return total


def bell_expectation(spec: BellSpec, state: QuantumState, polar: PolarConfig | AngleConfig) -> float:
    """``<phi| Q |phi>`` for directions ``polar``; coplanar grids embed in the x-y plane."""
    if isinstance(polar, AngleConfig):
        polar = polar.to_polar()
    _check_expectation(spec, state, polar)
    mats = spin_matrix(polar.thetas, polar.phis)
    value = _expectation(np.asarray(spec.values), state.amplitudes, spec.n, spec.r, mats)
    if abs(value.imag) > 1e-10:
        raise NumericError(f"expectation has imaginary part {value.imag:.3e}")
    return float(value.real)


MAX_CORRELATION_SITES = 11


def correlation_tensor(state: QuantumState) -> np.ndarray:
    """``T[p_1, ..., p_n] = <phi| sigma_p1 x ... x sigma_pn |phi>`` with p in (x, y, z); axis j is site j + 1."""
    n = state.n
    if n > MAX_CORRELATION_SITES:
        raise SizeLimitError(f"correlation tensor needs n <= {MAX_CORRELATION_SITES}, got {n}")
    psi = state.amplitudes.reshape((2,) * n).transpose(range(n - 1, -1, -1))
    # rho[a_1, b_1, a_2, b_2, ...] with each (a_j, b_j) pair fused into one axis of size 4
    rho = np.multiply.outer(psi, np.conj(psi))
    order = [ax for j in range(n) for ax in (j, n + j)]
    x = rho.transpose(order).reshape((4,) * n)
    # tr(rho sigma) = sum_ab rho[a, b] sigma[b, a]
    proj = PAULI.transpose(0, 2, 1).reshape(3, 4)
    for j in range(n):
        x = np.moveaxis(np.tensordot(proj, x, axes=([1], [j])), 0, j)
    return x.real.copy()


def _site_fields(tensor: np.ndarray, corr: np.ndarray, dirs: np.ndarray, j: int) -> np.ndarray:
    """Linear coefficients of the expectation in the site-j directions, shape (starts, r, 3).

    ``dirs`` has shape (starts, r, n, 3); every other site is contracted into
    the correlation tensor, then the coefficient tensor is applied.
    """
    n = tensor.ndim
    x = np.broadcast_to(corr, (dirs.shape[0],) + corr.shape)
    for i in range(n):
        if i == j:
            continue
        moved = np.moveaxis(x, 1 + i, -1)
        y = np.matmul(moved.reshape(moved.shape[0], -1, 3), dirs[:, :, i].transpose(0, 2, 1))
        x = np.moveaxis(y.reshape(moved.shape[:-1] + (dirs.shape[1],)), -1, 1 + i)
    x = np.moveaxis(x, 1 + j, -1).reshape(dirs.shape[0], -1, 3)
    t = np.moveaxis(tensor, j, -1).reshape(-1, tensor.shape[j])
    return np.einsum("mk,smp->skp", t, x)


def _to_polar(vec: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    z = np.clip(vec[..., 2], -1.0, 1.0)
    return np.arccos(z), np.mod(np.arctan2(vec[..., 1], vec[..., 0]), TWO_PI)


def max_expectation_over_angles(spec: BellSpec, state: QuantumState, opt=None) -> tuple[float, PolarConfig]:
    """Attained lower bound on ``max |<phi|Q|phi>|`` over all directions.

    The expectation is linear in each site's block of direction vectors, so each
    block step sets every direction to its normalized local field (the exact
    block maximizer).  Fields come from the state's correlation tensor, built
    once.  Starts: up to 8 in-plane grid configurations, then uniformly random
    directions.  The winner is re-evaluated on the statevector.
    """
    from .coplanar import OptimizerConfig, _grid_starts

    opt = opt or OptimizerConfig(starts=16, max_iters=500)
    polar0 = PolarConfig(np.zeros((spec.r, spec.n)), np.zeros((spec.r, spec.n)))
    _check_expectation(spec, state, polar0)
    n, r = spec.n, spec.r
    if n > 10 or r > 3:
        raise SizeLimitError(f"expectation maximization supports n <= 10 and r <= 3, got n={n}, r={r}")
    tensor = as_tensor(np.asarray(spec.values, dtype=float), n, r)
    n_grid = min(8, opt.starts)
    rng = generator(opt.seed, Stream.OPTIMIZER)
    starts = []
    for phis in _grid_starts(n_grid, r, n):
        starts.append((np.full((r, n), math.pi / 2), phis))
    for _ in range(opt.starts - n_grid):
        starts.append((np.arccos(1.0 - 2.0 * rng.uniform(size=(r, n))), rng.uniform(0.0, TWO_PI, (r, n))))

    corr = correlation_tensor(state)
    thetas = np.stack([t for t, _ in starts])
    phis = np.stack([p for _, p in starts])
    st = np.sin(thetas)
    # dirs[s, k, j] is the unit direction of setting k at site j in start s
    dirs = np.stack([st * np.cos(phis), st * np.sin(phis), np.cos(thetas)], axis=-1)
    value = np.full(len(starts), -np.inf)
    active = np.arange(len(starts))
    for _ in range(max(opt.max_iters, 1)):
        d = dirs[active]
        for j in range(n):
            field = _site_fields(tensor, corr, d, j)
            norms = np.linalg.norm(field, axis=2, keepdims=True)
            d[:, :, j] = np.where(norms > 0, field / np.where(norms > 0, norms, 1.0), d[:, :, j])
        dirs[active] = d
        last = np.sum(field * d[:, :, n - 1], axis=(1, 2))
        converged = last - value[active] <= 1e-13 * np.maximum(np.abs(last), 1.0)
        value[active] = last
        active = active[~converged]
        if active.size == 0:
            break
    if not np.all(np.isfinite(value)):
        raise NumericError("objective became non-finite")
    best = int(np.argmax(value))
    best_val, best_dirs = float(value[best]), dirs[best]
    th, ph = _to_polar(best_dirs)
    polar = PolarConfig(th, ph)
    checked = bell_expectation(spec, state, polar)
    if abs(checked - best_val) > 1e-8 * max(1.0, abs(best_val)):
        raise NumericError(f"re-evaluated expectation {checked} differs from tracked {best_val}")
    return abs(checked), polar


# ---------------------------------------------------------------------------
# Mermin-Klyshko baseline
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MKSpec:
    spec: BellSpec
    optimal_angles: AngleConfig


def mk_coefficients(n: int) -> np.ndarray:
    """MK recursion: new site m splits beta into (beta + beta')/2 and (beta - beta')/2."""
    beta = np.array([1.0, 0.0])
    for _ in range(2, n + 1):
        flipped = beta[::-1]  # complementing every bit reverses rank order
        beta = np.concatenate([(beta + flipped) / 2.0, (beta - flipped) / 2.0])
    return beta


def mk_spec(n: int) -> MKSpec:
    """MK coefficients plus in-plane angles (0, pi/2) at each site, phased so GHZ is optimal."""
    if not 2 <= n <= 20:
        raise DomainError(f"mk_spec needs 2 <= n <= 20, got {n}")
    beta = mk_coefficients(n)
    spec = BellSpec.from_values(beta, n, 2)
    t = np.tile(np.array([[0.0], [math.pi / 2]]), (1, n))
    phases = reduce(lambda acc, u: np.kron(u, acc), [np.exp(1j * t[:, j]) for j in range(n)])
    shift = -np.angle(np.dot(beta, phases))
    t[:, 0] += shift
    return MKSpec(spec, AngleConfig(t))


def haar_product_rotation(state: QuantumState, seed: int) -> QuantumState:
    """Apply an independent Haar-random SU(2) rotation to every qubit."""
    rng = generator(seed, Stream.STATE)
    psi = state.amplitudes
    for j in range(state.n):
        z = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        q, rr = np.linalg.qr(z)
        q = q * (np.diag(rr) / np.abs(np.diag(rr)))
        psi = _apply(psi, state.n, j, q)
    return QuantumState.normalized(psi)
