"""Exact spectra of Bell operators whose directions are coplanar at every site.

If the r directions at site j lie in a plane, the operator maps the computational
basis state |w> (w in {-1,+1}^n, +1 = spin up = bit 0) to
``mu(w) |-w>`` with

    mu(w) = sum_k c_k exp(i sum_j w_j t[k_j, j])

so it is block diagonal with 2x2 blocks on span{|w>, |-w>} and eigenvalues
``+-|mu(w)|``.  The norm is therefore the largest ``|mu(w)|``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, asdict
from typing import Sequence

import numpy as np

from .core import (
    TWO_PI,
    AngleConfig,
    BellSpec,
    PolarConfig,
    Stream,
    generator,
)
from .errors import ConvergenceError, NumericError, ShapeError, SizeLimitError
from .statevector import QuantumState, spin_matrix

logger = logging.getLogger(__name__)

MAX_OMEGA_SITES = 24
MAX_DENSE_SITES = 12


@dataclass(frozen=True)
class EigenRecord:
    """``magnitude * exp(i * phase)`` is the raw complex sum ``mu(omega)``."""

    omega: tuple[int, ...]
    magnitude: float
    phase: float

    @property
    def theta(self) -> float:
        """Relative phase of the eigenvector, ``-arg mu`` reduced to [0, 2 pi)."""
        return float(np.mod(-self.phase, TWO_PI))


@dataclass(frozen=True)
class OptimizerConfig:
    starts: int = 64
    max_iters: int = 10_000
    grad_tol: float = 1e-9
    seed: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "OptimizerConfig":
        return cls(**{k: d[k] for k in ("starts", "max_iters", "grad_tol", "seed") if k in d})


def canonical_omegas(n: int) -> np.ndarray:
    """All parity vectors with omega_1 = +1, shape (2**(n-1), n), rank order."""
    idx = np.arange(2 ** (n - 1))
    bits = np.stack([np.zeros_like(idx)] + [(idx >> j) & 1 for j in range(n - 1)], axis=1)
    return (1 - 2 * bits).astype(np.int8)


def _check_dims(spec: BellSpec, angles: AngleConfig) -> None:
    if (angles.r, angles.n) != (spec.r, spec.n):
        raise ShapeError(
            f"angle grid is {angles.r} x {angles.n}, spec needs {spec.r} x {spec.n}"
        )


def contract_sites(values: np.ndarray, n: int, r: int, site_mats: Sequence[np.ndarray]) -> np.ndarray:
    """Contract a rank-ordered coefficient vector with one ``(r, W_j)`` matrix per site.

    Returns a vector of length ``prod W_j`` indexed little-endian by the
    per-site output columns.
    """
    x = np.asarray(values, dtype=complex).reshape(-1, r, 1)
    width = 1
    for j in range(n):
        m = site_mats[j]
        # x: (remaining sites, r for site j, outputs so far)
        x = np.einsum("akw,kv->avw", x, m)
        width *= m.shape[1]
        x = x.reshape(-1, r, width) if j < n - 1 else x.reshape(width)
    return x


def all_mu(spec: BellSpec, angles: AngleConfig) -> np.ndarray:
    """``mu(w)`` for all 2**n parity vectors, index ``sum_j ((1 - w_j)/2) 2**(j-1)``."""
    _check_dims(spec, angles)
    if spec.n > MAX_OMEGA_SITES:
        raise SizeLimitError(f"parity enumeration needs n <= {MAX_OMEGA_SITES}, got {spec.n}")
    t = angles.angles
    mats = [np.stack([np.exp(1j * t[:, j]), np.exp(-1j * t[:, j])], axis=1) for j in range(spec.n)]
    return contract_sites(spec.values, spec.n, spec.r, mats)


def mu(spec: BellSpec, angles: AngleConfig, omega: Sequence[int]) -> complex:
    _check_dims(spec, angles)
    omega = np.asarray(omega)
    if omega.shape != (spec.n,) or not np.all(np.abs(omega) == 1):
        raise ShapeError(f"omega must be {spec.n} entries of +-1")
    t = angles.angles
    mats = [np.exp(1j * omega[j] * t[:, j])[:, None] for j in range(spec.n)]
    return complex(contract_sites(spec.values, spec.n, spec.r, mats)[0])


def eigenvalue_magnitude(spec: BellSpec, angles: AngleConfig, omega: Sequence[int]) -> EigenRecord:
    value = mu(spec, angles, omega)
    phase = float(np.mod(np.angle(value), TWO_PI))
    if phase >= TWO_PI:
        phase = 0.0
    return EigenRecord(tuple(int(w) for w in omega), abs(value), phase)


def eigen_records(spec: BellSpec, angles: AngleConfig) -> list[EigenRecord]:
    """Records for every canonical parity vector, in rank order."""
    values = all_mu(spec, angles)[0::2]
    omegas = canonical_omegas(spec.n)
    out = []
    for w, v in zip(omegas, values):
        phase = float(np.mod(np.angle(v), TWO_PI))
        out.append(EigenRecord(tuple(int(x) for x in w), abs(v), 0.0 if phase >= TWO_PI else phase))
    return out


def norm_fixed_angles(spec: BellSpec, angles: AngleConfig) -> float:
    """Exact operator norm: the largest ``|mu(w)|`` over canonical parity vectors."""
    return float(np.max(np.abs(all_mu(spec, angles)[0::2])))


def eigenvector(omega: Sequence[int], theta: float, n: int) -> QuantumState:
    """``(exp(i theta)|w> + |-w>)/sqrt(2)`` in the little-endian computational basis."""
    omega = np.asarray(omega)
    if omega.shape != (n,) or not np.all(np.abs(omega) == 1):
        raise ShapeError(f"omega must be {n} entries of +-1")
    bits = (1 - omega) // 2
    idx = int(np.sum(bits << np.arange(n)))
    amps = np.zeros(2**n, dtype=complex)
    amps[idx] = np.exp(1j * theta) / math.sqrt(2.0)
    amps[(2**n - 1) ^ idx] += 1.0 / math.sqrt(2.0)
    return QuantumState(amps)


# ---------------------------------------------------------------------------
# maximization over angles
# ---------------------------------------------------------------------------

class _TorusAscent:
    """Block-coordinate projected ascent of |S(t)| for a batch of starts.

    ``S(t) = sum_k c_k prod_j u_j[k_j]`` with ``u_j = exp(i t[:, j])``.  For one
    site the objective is linear in ``u_j``; projecting its gradient onto the
    unit circle gives the exact block maximizer ``u_j[k] = e^{i psi} conj(b_k)/|b_k|``
    where ``b`` is the site environment.
    """

    def __init__(self, values: np.ndarray, n: int, r: int):
        self.values = np.asarray(values, dtype=complex)
        self.n = n
        self.r = r

    def _suffixes(self, U: list[np.ndarray]) -> list[np.ndarray]:
        """``suf[j]`` has sites j+1..n contracted; shape (B, r**(j+1))."""
        n, r = self.n, self.r
        B = U[0].shape[0]
        suf: list[np.ndarray] = [None] * n  # type: ignore[list-item]
        top = self.values.reshape(r, -1)
        suf[n - 1] = np.broadcast_to(self.values, (B, self.values.size))
        if n >= 2:
            suf[n - 2] = U[n - 1] @ top
        for j in range(n - 3, -1, -1):
            prev = suf[j + 1]
            suf[j] = np.einsum("bkm,bk->bm", prev.reshape(B, r, -1), U[j + 1])
        return suf

    def _env(self, suffix: np.ndarray, U: list[np.ndarray], j: int) -> np.ndarray:
        B, r = suffix.shape[0], self.r
        x = suffix
        for i in range(j):
            x = np.einsum("bmk,bk->bm", x.reshape(B, -1, r), U[i])
        return x  # (B, r): environment of site j

    def sweep(self, U: list[np.ndarray]) -> np.ndarray:
        """One Gauss-Seidel pass over the sites, in place; returns S per start."""
        suf = self._suffixes(U)
        S = None
        for j in range(self.n):
            env = self._env(suf[j], U, j)
            S = np.sum(env * U[j], axis=1)
            mag = np.abs(env)
            psi = np.where(np.abs(S) > 0, S / np.where(np.abs(S) > 0, np.abs(S), 1.0), 1.0)
            ok = mag > 0
            new = np.where(ok, np.conj(env) / np.where(ok, mag, 1.0) * psi[:, None], U[j])
            U[j] = new
            S = np.sum(env * U[j], axis=1)
        return S

    def value_and_grad(self, U: list[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
        """S and the gradient of |S|**2 w.r.t. the angles, shape (B, r, n)."""
        suf = self._suffixes(U)
        grads = []
        S = None
        for j in range(self.n):
            env = self._env(suf[j], U, j)
            terms = env * U[j]
            S = np.sum(terms, axis=1)
            grads.append(-2.0 * np.imag(np.conj(S)[:, None] * terms))
        return S, np.stack(grads, axis=2)


def _grid_starts(count: int, r: int, n: int) -> np.ndarray:
    g = np.arange(count)[:, None, None]
    k = np.arange(r)[None, :, None]
    return np.broadcast_to(np.mod(g * k * (math.pi / 4), TWO_PI), (count, r, n)).copy()


def _start_angles(opt: OptimizerConfig, r: int, n: int) -> np.ndarray:
    n_grid = min(8, opt.starts)
    rng = generator(opt.seed, Stream.OPTIMIZER)
    rand = rng.uniform(0.0, TWO_PI, size=(opt.starts - n_grid, r, n))
    return np.concatenate([_grid_starts(n_grid, r, n), rand], axis=0)


def maximize_modulus(
    values: np.ndarray, n: int, r: int, opt: OptimizerConfig
) -> tuple[float, np.ndarray, dict]:
    """Multi-start maximization of ``|sum_k c_k exp(i sum_j t[k_j, j])|`` over the torus.

    Returns the best modulus, its angles (r x n) and run statistics.
    """
    if opt.starts < 1:
        raise ValueError("optimizer needs at least one start")
    values = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(values)):
        raise NumericError("non-finite coefficients")
    t0 = _start_angles(opt, r, n)
    asc = _TorusAscent(values, n, r)
    U_all = [np.exp(1j * t0[:, :, j]) for j in range(n)]
    best = np.abs(asc.value_and_grad(U_all)[0])
    active = np.arange(opt.starts)
    final_S = np.zeros(opt.starts, dtype=complex)
    final_U = [u.copy() for u in U_all]
    converged = np.zeros(opt.starts, dtype=bool)
    sweeps = 0
    prev = best.copy()
    stall = np.zeros(opt.starts, dtype=int)
    while active.size and sweeps < opt.max_iters:
        U = [u[active] for u in final_U]
        S = asc.sweep(U)
        sweeps += 1
        if not np.all(np.isfinite(S)):
            raise NumericError("objective became non-finite")
        val = np.abs(S)
        for j in range(n):
            final_U[j][active] = U[j]
        final_S[active] = S
        gain = val - prev[active]
        prev[active] = val
        near = gain <= 1e-8 * np.maximum(val, 1.0)
        done = np.zeros(active.size, dtype=bool)
        if np.any(near):
            sub = [u[near] for u in U]
            Sg, g = asc.value_and_grad(sub)
            gnorm = np.max(np.abs(g.reshape(g.shape[0], -1)), axis=1)
            ok = gnorm <= opt.grad_tol
            converged[active[near]] = ok
            done[np.flatnonzero(near)[ok]] = True
        stall[active] = np.where(gain <= 0, stall[active] + 1, 0)
        done |= stall[active] >= 3
        # abandon starts far below the leader; the result stays an attained value
        if sweeps >= 5:
            done |= val < (1.0 - 1e-2) * np.max(np.abs(final_S))
        active = active[~done]

    vals = np.abs(final_S)
    top = np.max(vals)
    angles = np.stack([np.mod(np.angle(u), TWO_PI) for u in final_U], axis=2)  # (B, r, n)
    tied = np.flatnonzero(vals == top)
    # lexicographically smallest angle vector among exact ties
    keys = angles[tied].reshape(tied.size, -1)
    order = np.lexsort(keys.T[::-1])
    pick = tied[order[0]]
    stats = {"sweeps": sweeps, "converged_starts": int(converged.sum()), "starts": opt.starts}
    return float(top), angles[pick], stats


def max_norm_over_angles(spec: BellSpec, opt: OptimizerConfig | None = None) -> tuple[float, AngleConfig]:
    """Attained lower bound on the supremum of ||Q|| over coplanar directions.

    Only the all-ones parity vector is optimized; every other parity vector is
    the same function of reflected angles.  The returned value is
    re-evaluated with :func:`norm_fixed_angles` at the returned angles.
    """
    opt = opt or OptimizerConfig()
    _, t, stats = maximize_modulus(spec.values, spec.n, spec.r, opt)
    angles = AngleConfig(t)
    value = norm_fixed_angles(spec, angles)
    logger.debug("coplanar ascent: %s, value %.12g", stats, value)
    return value, angles


# ---------------------------------------------------------------------------
# dense oracle
# ---------------------------------------------------------------------------

def _site_matrices(config: AngleConfig | PolarConfig) -> np.ndarray:
    """Spin matrices, shape (r, n, 2, 2)."""
    if isinstance(config, AngleConfig):
        config = config.to_polar()
    return spin_matrix(config.thetas, config.phis)


def dense_operator(spec: BellSpec, config: AngleConfig | PolarConfig) -> np.ndarray:
    """The 2**n x 2**n Bell operator; site 1 is the least significant tensor factor."""
    if (config.r, config.n) != (spec.r, spec.n):
        raise ShapeError(f"direction grid is {config.r} x {config.n}, spec needs {spec.r} x {spec.n}")
    if spec.n > MAX_DENSE_SITES:
        raise SizeLimitError(f"dense operator needs n <= {MAX_DENSE_SITES}, got {spec.n}")
    mats = _site_matrices(config)
    n, r = spec.n, spec.r

    def build(vals: np.ndarray, m: int) -> np.ndarray:
        # operator on sites 1..m for coefficient slice vals (length r**m)
        if m == 1:
            return np.einsum("k,kab->ab", vals.astype(complex), mats[:, 0])
        block = vals.reshape(r, -1)  # row = setting of site m
        return sum(np.kron(mats[k, m - 1], build(block[k], m - 1)) for k in range(r))

    return build(np.asarray(spec.values), n)


def power_norm(
    A: np.ndarray,
    rtol: float = 1e-12,
    max_iter: int = 100_000,
    seed: int = 0,
) -> float:
    """Spectral norm of a Hermitian matrix by power iteration on ``A @ A``.

    Every 64 unconverged steps the iteration matrix is squared, so slow
    spectral ratios are raised to ever higher powers; the residual is always
    measured against ``A @ A`` itself.
    """
    A2 = A @ A
    scale = np.linalg.norm(A2, ord="fro")
    if scale == 0.0:
        return 0.0
    rng = generator(seed, Stream.ORACLE)
    dim = A.shape[0]

    def fresh():
        v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
        return v / np.linalg.norm(v)

    v = fresh()
    P = A2 / scale
    best_res = np.inf
    since_best = 0
    for it in range(1, max_iter + 1):
        w = A2 @ v
        rho = float(np.vdot(v, w).real)
        wn = np.linalg.norm(w)
        if wn == 0.0:
            v = fresh()
            continue
        res = np.linalg.norm(w - rho * v) / max(rho, 1e-300)
        if res <= rtol:
            return math.sqrt(max(rho, 0.0))
        if res < best_res * 0.999:
            best_res, since_best = res, 0
        else:
            since_best += 1
        if since_best > 1000:
            logger.debug("power iteration stagnated at residual %.3g; restarting", res)
            v, best_res, since_best = fresh(), np.inf, 0
            P = A2 / scale
            continue
        if it % 64 == 0:
            P = P @ P
            P /= np.linalg.norm(P, ord="fro")
        v = P @ v
        nv = np.linalg.norm(v)
        if nv == 0.0:
            v = fresh()
        else:
            v /= nv
    raise ConvergenceError(f"power iteration did not reach residual {rtol} in {max_iter} steps")


def dense_norm_oracle(spec: BellSpec, config: AngleConfig | PolarConfig, seed: int = 0) -> float:
    """Independent check of ||Q||: dense matrix plus power iteration."""
    return power_norm(dense_operator(spec, config), seed=seed)
