import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from rbmdos import ensemble as ens
from rbmdos.landscape import semicircle


def test_single_site_covariance():
    assert ens.build_covariance(1, 7.0).J.tolist() == [[1.0]]


def test_two_site_covariance():
    J = ens.build_covariance(2, 1.0).J
    assert np.allclose(J, [[2 / 3, 1 / 3], [1 / 3, 2 / 3]], atol=1e-15)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 120), st.floats(1.0, 60.0))
def test_covariance_invariants(n, W):
    cov = ens.build_covariance(n, W)
    J = cov.J
    assert np.abs(J.sum(axis=1) - 1).max() <= 1e-12
    assert np.array_equal(J, J.T)
    assert np.abs(ens.apply_precision(cov, J) - np.eye(n)).max() <= 1e-12
    assert (J > 0).all()
    for i in range(n):
        assert np.all(np.diff(J[i, i:]) <= 1e-15)
        assert np.all(np.diff(J[i, : i + 1]) >= -1e-15)


def test_zero_width_is_identity():
    assert np.array_equal(ens.build_covariance(4, 0.0).J, np.eye(4))


def test_row_sums_n5_w3():
    J = ens.build_covariance(5, 3.0).J
    assert np.abs(J.sum(axis=1) - 1).max() <= 1e-12


@pytest.mark.parametrize("n,W", [(0, 2.0), (-1, 2.0), (3, float("inf")), (3, float("nan")),
                                 (2.5, 3.0)])
def test_covariance_rejects(n, W):
    with pytest.raises(ValueError):
        ens.build_covariance(n, W)


def test_params_validation():
    ens.ModelParams(1.0, 8, 10)
    for bad in [dict(E=0.1, W=8, n=1), dict(E=1.0, W=1.5, n=1), dict(E=1.0, W=8, n=0),
                dict(E=1.0, W=8, n=1, eps=-1.0), dict(E=1.9, W=8, n=1)]:
        with pytest.raises(ValueError):
            ens.ModelParams(**bad)
    ens.ModelParams(3.0, 8, 5, 0.1, check_window=False)


def test_default_n():
    assert ens.default_n(8) == math.ceil(32 * math.log(8))
    assert ens.default_n(32) == 444


def test_one_by_one_sample_is_real_normal():
    cov = ens.build_covariance(1, 2.0)
    H = ens.sample_matrix(cov, 5)
    assert H.shape == (1, 1) and H[0, 0].imag == 0


def test_sampling_hermitian_and_deterministic():
    cov = ens.build_covariance(30, 4.0)
    H1 = ens.sample_matrix(cov, 11, 3)
    H2 = ens.sample_matrix(cov, 11, 3)
    assert np.array_equal(H1, H2)
    assert np.array_equal(H1, H1.conj().T)
    assert not np.array_equal(H1, ens.sample_matrix(cov, 11, 4))


def test_offdiagonal_variance():
    cov = ens.build_covariance(2, 1.0)
    m = 100_000
    h12 = np.array([ens.sample_matrix(cov, 1, k)[0, 1] for k in range(m)])
    x = np.abs(h12) ** 2
    assert abs(x.mean() - 1 / 3) <= 3 * x.std() / math.sqrt(m)
    # real and imaginary parts each carry half the variance
    re = h12.real**2
    assert abs(re.mean() - 1 / 6) <= 3 * re.std() / math.sqrt(m)


def test_mc_single_site_against_quadrature():
    E, eps = 1.0, 0.5
    z = complex(E, -eps)
    phi = lambda x: math.exp(-x * x / 2) / math.sqrt(2 * math.pi)  # noqa: E731
    ref = complex(quad(lambda x: (1 / (z - x)).real * phi(x), -np.inf, np.inf)[0],
                  quad(lambda x: (1 / (z - x)).imag * phi(x), -np.inf, np.inf)[0])
    st_ = ens.stieltjes_mc(ens.ModelParams(E, 2, 1, eps), 100_000, 3)
    assert abs(st_.g_mean.real - ref.real) <= 3 * st_.g_stderr
    assert abs(st_.g_mean.imag - ref.imag) <= 3 * st_.g_stderr


def test_single_sample_stderr_is_infinite():
    st_ = ens.stieltjes_mc(ens.ModelParams(1.0, 4, 10, 0.1), 1, 0)
    assert st_.g_stderr == math.inf
    assert st_.samples == 1


def test_mc_requires_positive_eps():
    with pytest.raises(ValueError):
        ens.stieltjes_mc(ens.ModelParams(1.0, 4, 10, 0.0), 5, 0)


def test_mc_reproducible_and_worker_independent():
    p = ens.ModelParams(1.0, 4, 40, 0.1)
    a = ens.stieltjes_mc(p, 12, 9)
    b = ens.stieltjes_mc(p, 12, 9, workers=3)
    assert a == b
    assert a.g_stderr >= 0 and a.g_mean.imag > 0


def test_energy_mirror_symmetry():
    rows = ens.stieltjes_mc_sweep(64, 4, [0.8, -0.8], 0.2, 200, 4)
    g, gm = rows[0].g_mean, rows[1].g_mean
    se = max(rows[0].g_stderr, rows[1].g_stderr)
    assert abs(gm + g.conjugate()) <= 6 * se


def test_mc_near_semicircle_moderate_size():
    st_ = ens.stieltjes_mc(ens.ModelParams(1.0, 16, 256, 0.1), 10, 1)
    assert abs(st_.g_mean - semicircle(1.0, 0.1)) < 0.05


def test_histogram_normalised():
    h = ens.empirical_dos(ens.ModelParams(1.0, 8, 200), 4, 40, 0)
    assert h.mass.sum() == pytest.approx(1.0, abs=1e-15)
    assert np.allclose(np.diff(h.edges), 6 / 40)
    assert h.csv_rows()[0][:2] == [-3.0, -2.85]
    with pytest.raises(ValueError):
        ens.empirical_dos(ens.ModelParams(1.0, 8, 20), 1, 9, 0)


def test_tail_mass_and_semicircle_fit():
    h = ens.empirical_dos(ens.ModelParams(1.0, 64, 1024), 5, 60, 2)
    assert ens.tail_mass(h) <= 0.01
    assert ens.sup_density_distance(h) <= 0.05


def test_semicircle_bin_mass_sums_to_one():
    edges = np.linspace(-3, 3, 61)
    assert ens.semicircle_bin_mass(edges).sum() == pytest.approx(1.0)
