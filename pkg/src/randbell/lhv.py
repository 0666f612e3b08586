"""Classical (local hidden variable) value of a Bell expression.

``C(X) = sum_k c_k prod_j X[k_j, j]`` with every ``X[k, j] = +-1``; the
classical norm is ``max_X |C(X)|``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .core import BellSpec, Stream, as_tensor, digit_table, generator
from .errors import SizeLimitError

MAX_EXACT_BITS = 24


@dataclass(frozen=True)
class LhvResult:
    value: float
    argmax: np.ndarray  # (r, n) of +-1
    exact: bool


def classical_value(spec: BellSpec, x: np.ndarray) -> float:
    """``C(X)`` by direct summation in rank order."""
    x = np.asarray(x)
    digits = digit_table(spec.n, spec.r)
    prods = np.prod(x[digits, np.arange(spec.n)], axis=1)
    return float(np.sum(spec.values * prods))


def _flip_index_table(n: int, r: int) -> np.ndarray:
    """Row ``j*r + k`` lists the ranks of the terms containing ``X[k, j]``."""
    digits = digit_table(n, r)
    rows = []
    for j in range(n):
        for k in range(r):
            rows.append(np.flatnonzero(digits[:, j] == k))
    return np.array(rows, dtype=np.int64)


@numba.njit(cache=True)
def _gray_max(terms, table, nbits):
    # terms: signed products for the all-(+1) assignment; mutated in place.
    # Variable 0 (X[0, site 1]) is pinned to +1: flipping all of site 1 negates C.
    total = 0.0
    for v in terms:
        total += v
    best = abs(total)
    best_step = 0
    m = table.shape[1]
    for step in range(1, 1 << nbits):
        low = step & -step
        var = 1
        while low > 1:
            low >>= 1
            var += 1
        delta = 0.0
        for i in range(m):
            idx = table[var, i]
            delta += terms[idx]
            terms[idx] = -terms[idx]
        total -= 2.0 * delta
        a = abs(total)
        if a > best:
            best = a
            best_step = step
    return best, best_step


def _assignment_from_step(step: int, n: int, r: int) -> np.ndarray:
    gray = step ^ (step >> 1)
    x = np.ones(r * n, dtype=np.int8)
    for b in range(r * n - 1):
        if (gray >> b) & 1:
            x[b + 1] = -1
    return x.reshape(n, r).T.copy()


def lhv_norm_exact(spec: BellSpec) -> LhvResult:
    """Exact ``max |C|`` by Gray-code enumeration with incremental term flips."""
    n, r = spec.n, spec.r
    if r * n > MAX_EXACT_BITS:
        raise SizeLimitError(f"exact enumeration needs r*n <= {MAX_EXACT_BITS}, got {r * n}")
    terms = np.array(spec.values, dtype=float)
    table = _flip_index_table(n, r)
    _, step = _gray_max(terms, table, r * n - 1)
    x = _assignment_from_step(step, n, r)
    return LhvResult(abs(classical_value(spec, x)), x, True)


def _flip_gains(tensor: np.ndarray, x: np.ndarray, n: int, r: int) -> tuple[float, np.ndarray]:
    """Current C and, for each variable (j-major order), C after flipping it."""
    p = tensor.copy()
    for j in range(n):
        shape = [1] * n
        shape[j] = r
        p = p * x[:, j].reshape(shape)
    c = float(p.sum())
    parts = np.empty(n * r)
    for j in range(n):
        axes = tuple(i for i in range(n) if i != j)
        parts[j * r:(j + 1) * r] = p.sum(axis=axes)
    return c, c - 2.0 * parts


def lhv_norm_heuristic(spec: BellSpec, restarts: int = 32, seed: int = 0) -> LhvResult:
    """Best of ``restarts`` steepest-ascent single-flip local searches."""
    n, r = spec.n, spec.r
    tensor = as_tensor(np.asarray(spec.values, dtype=float), n, r)
    rng = generator(seed, Stream.HEURISTIC)
    best_val, best_x = -1.0, None
    for _ in range(restarts):
        x = (1 - 2 * rng.integers(0, 2, size=(r, n))).astype(np.int8)
        while True:
            c, after = _flip_gains(tensor, x, n, r)
            gains = np.abs(after) - abs(c)
            v = int(np.argmax(gains))  # first maximum = lowest (j, k)
            if gains[v] <= 1e-15 * max(1.0, abs(c)):
                break
            j, k = divmod(v, r)
            x[k, j] = -x[k, j]
        val = abs(classical_value(spec, x))
        if val > best_val:
            best_val, best_x = val, x.copy()
    return LhvResult(best_val, best_x, False)


def lhv_norm(spec: BellSpec, restarts: int = 32, seed: int = 0) -> LhvResult:
    if spec.r * spec.n <= MAX_EXACT_BITS:
        return lhv_norm_exact(spec)
    return lhv_norm_heuristic(spec, restarts, seed)
