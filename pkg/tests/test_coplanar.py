import cmath
import itertools
import math

import numpy as np
import pytest

from randbell.coplanar import (
    OptimizerConfig,
    all_mu,
    canonical_omegas,
    dense_norm_oracle,
    dense_operator,
    eigen_records,
    eigenvalue_magnitude,
    eigenvector,
    max_norm_over_angles,
    maximize_modulus,
    norm_fixed_angles,
    power_norm,
)
from randbell.core import AngleConfig, BellSpec, random_spec, make_coefficients, sample_signs
from randbell.errors import ShapeError, SizeLimitError
from randbell.statevector import mk_spec

PI = math.pi
CHSH = BellSpec.from_values([0.5, 0.5, 0.5, -0.5], 2, 2)
CHSH_ANGLES = AngleConfig.from_sites([(0, PI / 2), (-PI / 4, PI / 4)])


def direct_mu(values, n, r, t, omega):
    """Term-by-term sum over all r**n multi-indices."""
    total = 0j
    for m, ks in enumerate(itertools.product(range(r), repeat=n)):
        k = ks[::-1]  # itertools varies the last slot fastest; site 1 is least significant
        total += values[m] * cmath.exp(1j * sum(omega[j] * t[k[j], j] for j in range(n)))
    return total


def random_specs(count, nmax=4, rmax=3, seed=0):
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        n = int(rng.integers(1, nmax + 1))
        r = int(rng.integers(1, rmax + 1))
        scheme = "random_normalized" if i % 2 else "uniform"
        spec = BellSpec.from_parts(make_coefficients(scheme, n, r, seed=i), sample_signs(i, n, r))
        out.append((spec, AngleConfig(rng.uniform(0, 2 * PI, (r, n)))))
    return out


def test_chsh_eigenvalues():
    assert eigenvalue_magnitude(CHSH, CHSH_ANGLES, (1, 1)).magnitude == pytest.approx(math.sqrt(2), abs=1e-12)
    assert eigenvalue_magnitude(CHSH, CHSH_ANGLES, (1, -1)).magnitude == pytest.approx(0.0, abs=1e-12)
    ref = direct_mu(CHSH.values, 2, 2, CHSH_ANGLES.angles, (1, 1))
    assert abs(ref) == pytest.approx(math.sqrt(2), abs=1e-12)


def test_single_term_magnitude():
    spec = BellSpec.from_values([1.0], 1, 1)
    rec = eigenvalue_magnitude(spec, AngleConfig([[0.3]]), (1,))
    assert rec.magnitude == pytest.approx(1.0, abs=1e-15)
    assert rec.phase == pytest.approx(0.3)


def test_record_phase_matches_raw_sum():
    spec, angles = random_specs(1, seed=4)[0]
    for w in itertools.product((1, -1), repeat=spec.n):
        rec = eigenvalue_magnitude(spec, angles, w)
        raw = direct_mu(spec.values, spec.n, spec.r, angles.angles, w)
        assert abs(rec.magnitude * cmath.exp(1j * rec.phase) - raw) < 1e-12
        assert 0 <= rec.phase < 2 * PI


def test_chsh_norm_at_fixed_angles():
    assert norm_fixed_angles(CHSH, CHSH_ANGLES) == pytest.approx(math.sqrt(2), abs=1e-12)
    assert norm_fixed_angles(CHSH, AngleConfig(np.zeros((2, 2)))) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("spec,angles", random_specs(30, nmax=5, seed=1))
def test_all_mu_matches_direct_sum(spec, angles):
    mus = all_mu(spec, angles)
    for idx in range(2**spec.n):
        w = [1 - 2 * ((idx >> j) & 1) for j in range(spec.n)]
        assert abs(mus[idx] - direct_mu(spec.values, spec.n, spec.r, angles.angles, w)) < 1e-12
    assert norm_fixed_angles(spec, angles) <= np.sum(np.abs(spec.values)) + 1e-12


def test_conjugate_pairs_exhaustive():
    for n in range(1, 11):
        spec = random_spec(n, n, 2, "random_normalized")
        t = AngleConfig(np.random.default_rng(n).uniform(0, 2 * PI, (2, n)))
        mus = all_mu(spec, t)
        full = 2**n - 1
        idx = np.arange(2**n)
        np.testing.assert_allclose(np.abs(mus), np.abs(mus[full ^ idx]), rtol=0, atol=1e-12)
        np.testing.assert_allclose(mus, np.conj(mus[full ^ idx]), rtol=0, atol=1e-12)


def test_reflection_invariance():
    spec, angles = random_specs(1, nmax=4, seed=9)[0]
    ones = (1,) * spec.n
    for w in itertools.product((1, -1), repeat=spec.n):
        reflected = AngleConfig(angles.angles * np.asarray(w)[None, :])
        a = eigenvalue_magnitude(spec, angles, w).magnitude
        b = eigenvalue_magnitude(spec, reflected, ones).magnitude
        assert abs(a - b) <= 1e-12


def test_canonical_omegas():
    w = canonical_omegas(3)
    assert w.shape == (4, 3)
    assert np.all(w[:, 0] == 1)
    assert {tuple(x) for x in w} == {(1, a, b) for a in (1, -1) for b in (1, -1)}


def test_dimension_mismatch():
    with pytest.raises(ShapeError):
        norm_fixed_angles(CHSH, AngleConfig(np.zeros((2, 3))))
    with pytest.raises(ShapeError):
        eigenvalue_magnitude(CHSH, CHSH_ANGLES, (1, 0))


# --- eigenvectors ---------------------------------------------------------------

def test_eigenvector_examples():
    np.testing.assert_allclose(eigenvector((1,), 0.0, 1).amplitudes, [2**-0.5, 2**-0.5])
    np.testing.assert_allclose(
        eigenvector((1, 1), PI, 2).amplitudes, [-(2**-0.5), 0, 0, 2**-0.5], atol=1e-16
    )


@pytest.mark.parametrize("spec,angles", random_specs(20, nmax=4, seed=2) + [(CHSH, CHSH_ANGLES)])
def test_eigen_residual(spec, angles):
    Q = dense_operator(spec, angles)
    for rec in eigen_records(spec, angles):
        v = eigenvector(rec.omega, rec.theta, spec.n).amplitudes
        assert np.linalg.norm(Q @ v - rec.magnitude * v) <= 1e-9
        # the partner state carries the negative eigenvalue
        u = eigenvector(rec.omega, rec.theta + PI, spec.n).amplitudes
        assert np.linalg.norm(Q @ u + rec.magnitude * u) <= 1e-9


# --- dense oracle ----------------------------------------------------------------

def test_dense_oracle_examples():
    assert dense_norm_oracle(CHSH, CHSH_ANGLES) == pytest.approx(math.sqrt(2), abs=1e-8)
    assert dense_norm_oracle(BellSpec.from_values([1.0], 1, 1), AngleConfig([[0.0]])) == pytest.approx(1.0, abs=1e-12)


def test_dense_operator_hermitian_and_matches_eigh():
    spec, angles = random_specs(1, nmax=4, rmax=3, seed=12)[0]
    Q = dense_operator(spec, angles)
    np.testing.assert_allclose(Q, Q.conj().T, atol=1e-14)
    top = np.max(np.abs(np.linalg.eigvalsh(Q)))
    assert power_norm(Q) == pytest.approx(top, rel=1e-10)


@pytest.mark.parametrize("spec,angles", random_specs(40, seed=3))
def test_oracle_equivalence(spec, angles):
    a = norm_fixed_angles(spec, angles)
    b = dense_norm_oracle(spec, angles)
    assert abs(a - b) <= 1e-8 * max(1.0, a)


def test_power_norm_near_degenerate():
    # spectral ratio 1 - 1e-6: plain power iteration would need ~1e7 steps
    d = np.diag([1.0, 1.0 - 1e-6, 0.5, -0.2])
    rng = np.random.default_rng(0)
    q, _ = np.linalg.qr(rng.standard_normal((4, 4)))
    assert power_norm(q @ d @ q.T) == pytest.approx(1.0, rel=1e-10)


def test_power_norm_zero_matrix():
    assert power_norm(np.zeros((4, 4))) == 0.0


def test_dense_size_limit():
    spec = random_spec(0, 13, 1)
    with pytest.raises(SizeLimitError):
        dense_operator(spec, AngleConfig(np.zeros((1, 13))))


# --- optimizer -------------------------------------------------------------------

def test_chsh_optimum():
    value, angles = max_norm_over_angles(CHSH, OptimizerConfig(starts=64))
    assert value == pytest.approx(math.sqrt(2), abs=1e-6)
    assert norm_fixed_angles(CHSH, angles) == pytest.approx(value, abs=1e-9)


def test_mermin_optimum():
    spec = BellSpec.from_values([0, 0.5, 0.5, 0, 0.5, 0, 0, -0.5], 3, 2)
    value, _ = max_norm_over_angles(spec)
    assert value == pytest.approx(2.0, abs=1e-6)


def test_single_site_optimum():
    # |e^{i t0} + e^{i t1}| / sqrt 2 = sqrt 2 |cos((t0 - t1)/2)|, maximal at t0 = t1
    spec = BellSpec.from_values([2**-0.5, 2**-0.5], 1, 2)
    value, angles = max_norm_over_angles(spec)
    assert value == pytest.approx(math.sqrt(2), abs=1e-9)
    t0, t1 = angles.angles[:, 0]
    assert abs(math.cos((t0 - t1) / 2)) == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("seed", range(6))
def test_optimizer_beats_grid_search(seed):
    # brute force over a 48^3 grid; t[0, site 1] = 0 by global phase invariance
    spec = random_spec(seed, 2, 2, "random_normalized")
    v = spec.values
    g = np.linspace(0, 2 * PI, 48, endpoint=False)
    a, b = np.meshgrid(g, g, indexing="ij")  # site 2 settings 0 and 1
    best = 0.0
    for t11 in g:
        s = (
            v[0] * np.exp(1j * a)
            + v[1] * np.exp(1j * (t11 + a))
            + v[2] * np.exp(1j * b)
            + v[3] * np.exp(1j * (t11 + b))
        )
        best = max(best, float(np.max(np.abs(s))))
    value, _ = max_norm_over_angles(spec)
    assert value >= best - 1e-12


@pytest.mark.parametrize("spec,angles", random_specs(15, nmax=5, seed=5))
def test_optimizer_dominates_fixed_angles(spec, angles):
    value, best = max_norm_over_angles(spec, OptimizerConfig(starts=32))
    assert value >= norm_fixed_angles(spec, angles) - 1e-12
    assert norm_fixed_angles(spec, best) == pytest.approx(value, abs=1e-9)


def test_optimizer_is_deterministic():
    spec = random_spec(3, 6, 2)
    a = max_norm_over_angles(spec, OptimizerConfig(starts=16, seed=5))
    b = max_norm_over_angles(spec, OptimizerConfig(starts=16, seed=5))
    assert a[0] == b[0]
    np.testing.assert_array_equal(a[1].angles, b[1].angles)


def test_optimizer_reaches_stationarity():
    spec = random_spec(8, 5, 2)
    _, _, stats = maximize_modulus(spec.values, 5, 2, OptimizerConfig(starts=8))
    assert stats["converged_starts"] >= 1


@pytest.mark.parametrize("n", range(2, 9))
def test_mk_optimal_angles(n):
    mk = mk_spec(n)
    assert norm_fixed_angles(mk.spec, mk.optimal_angles) == pytest.approx(2 ** ((n - 1) / 2), abs=1e-9)
