import numpy as np
import pytest
import scipy.sparse as sp

from rbmdos import grid as gr
from rbmdos import landscape as ls
from rbmdos import spectral as S
from rbmdos import transfer as T
from rbmdos.ensemble import ModelParams


def test_diagonal_operator():
    d = 0.5 ** np.arange(400)
    pairs = S.top_eigs(sp.diags(d), 2, seed=3)
    assert abs(pairs[0].value - 1) < 1e-10
    assert abs(pairs[1].value - 0.5) < 1e-10
    assert all(p.residual < 1e-8 for p in pairs)


def test_diagonal_operator_as_field_callable():
    d = (0.5 ** np.arange(30 * 20)).reshape(30, 20)
    pairs = S.top_eigs(lambda v: (d * v.reshape(30, 20)).ravel(), 2, dim=600)
    assert abs(pairs[0].value - 1) < 1e-10 and abs(pairs[1].value - 0.5) < 1e-10


def test_deterministic_given_seed():
    rng = np.random.default_rng(0)
    A = rng.standard_normal((200, 200))
    a = S.top_eigs(A, 3, seed=5)
    b = S.top_eigs(A, 3, seed=5)
    assert [p.value for p in a] == [p.value for p in b]
    assert abs(a[0].value) >= abs(a[1].value) >= abs(a[2].value)


def test_bad_krylov_dim():
    with pytest.raises(ValueError):
        S.top_eigs(np.eye(100), 2, krylov_dim=5)


def test_non_convergence_reported():
    rng = np.random.default_rng(1)
    A = rng.standard_normal((400, 400))
    with pytest.raises(S.SpectralConvergenceError) as exc:
        S.top_eigs(A, 6, krylov_dim=16, maxiter=1, restarts=0)
    assert exc.value.best is not None


def test_model_operator_top_eigenvalue():
    c, W = 1.0, 10
    ax = gr.model_axis(c, W, 4)
    top = S.top_eigs(gr.model_operator_sparse(c, W, ax), 1)[0]
    assert abs(top.value - gr.model_lambda0(c, W)) < 1e-6


def test_kernel_headline_w16():
    k = S.kernel_top(gr.build_grid(1.0, 16))
    assert k.deviation * 16**1.5 <= 5
    assert max(k.residual_A, k.residual_A1) < 1e-8


def test_window_contains_saddles(quick_grid_w8):
    ia, ib = S.saddle_window(quick_grid_w8)
    sd = ls.saddle_data(1.0, 8)
    a, b = quick_grid_w8.axis_a.nodes[ia], quick_grid_w8.axis_b.nodes[ib]
    assert a.min() < sd.a_minus < sd.a_plus < a.max()
    assert b.min() < sd.b_s < b.max()


def test_windowed_operator_matches_full_sweep(quick_grid_w8):
    g = quick_grid_w8
    op = S.WindowedTransfer(g)
    s = T.initial_state(g)
    full = T.apply_transfer(s).to_dense()
    dense = s.to_dense()[:, op.ia][:, :, op.ib]
    win = op.matvec(dense.ravel()).reshape((2,) + op.shape2)
    # interior of the window sees the same operator
    ref = full[:, op.ia][:, :, op.ib]
    inner_a = slice(40, -40)
    inner_b = slice(40, -40)
    scale = np.abs(ref).max()
    assert np.abs(win[:, inner_a, inner_b] - ref[:, inner_a, inner_b]).max() < 1e-6 * scale


@pytest.fixture(scope="module")
def spectrum_w8(quick_grid_w8):
    return S.transfer_spectrum(ModelParams(1.0, 8, 1), quick_grid_w8, top=3)


def test_leading_eigenvalue_is_one(spectrum_w8):
    r = spectrum_w8
    assert abs(r.lambda0 - 1) <= 1e-3
    assert r.residual0 <= 1e-8 and r.residual1 <= 1e-8
    assert abs(r.lambda0) >= abs(r.lambda1)
    assert 0 < r.gap < 1


def test_energy_reflection(spectrum_w8):
    g = gr.quick_grid(-1.0, 8)
    r = S.transfer_spectrum(ModelParams(-1.0, 8, 1), g)
    assert abs(abs(r.lambda0) - abs(spectrum_w8.lambda0)) < 1e-6


def test_sweep_growth_matches_lambda0(quick_grid_w8, spectrum_w8):
    zs = T.normalization_curve(quick_grid_w8, [64, 128])
    rate = abs(zs[128] / zs[64]) ** (1 / 64)
    assert abs(rate - abs(spectrum_w8.lambda0)) < 1e-4


def test_grid_mismatch(quick_grid_w8):
    with pytest.raises(ValueError):
        S.transfer_spectrum(ModelParams(1.0, 9, 1), quick_grid_w8)
