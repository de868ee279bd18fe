import math

import numpy as np
import pytest

from rbmdos import grid as gr
from rbmdos import landscape as ls
from rbmdos import oracle
from rbmdos import transfer as T
from rbmdos.ensemble import ModelParams
from rbmdos.factored import LowRankField


@pytest.fixture(scope="module")
def small():
    return gr.quick_grid(1.0, 4)


def random_state(grid, rng, rank=3):
    na, nb = grid.shape
    comps = []
    for _ in range(2):
        P = (rng.standard_normal((na, rank)) + 1j * rng.standard_normal((na, rank))) * grid.F0[:, None]
        Q = (rng.standard_normal((nb, rank)) + 1j * rng.standard_normal((nb, rank))) * grid.F1[:, None]
        comps.append(LowRankField(P, Q))
    return T.TransferState(comps[0], comps[1], grid)


def test_apply_S_matches_pointwise_matrix(small):
    rng = np.random.default_rng(0)
    s = random_state(small, rng)
    u = s.to_dense()
    L = small.Lfield
    W = small.W
    for sign in (1, -1):
        out = T.apply_S(s, sign, rank_tol=None).to_dense()
        S = [[1, -L / W], [-1 / W, 1 + L / W**2]]
        if sign == -1:
            S = [[S[0][0], S[1][0]], [S[0][1], S[1][1]]]
        ref = [S[0][0] * u[0] + S[0][1] * u[1], S[1][0] * u[0] + S[1][1] * u[1]]
        assert np.abs(out - np.array(ref)).max() <= 1e-12 * np.abs(u).max()
    with pytest.raises(ValueError):
        T.apply_S(s, 0)


def test_apply_S_second_component_only(small):
    u = LowRankField.outer(small.F0, small.F1)
    s = T.TransferState(LowRankField.zeros(*small.shape), u, small)
    out = T.apply_S(s, 1).to_dense()
    assert np.allclose(out[0], -(small.Lfield / small.W) * u.dense(), atol=1e-14)


def test_S_then_inverse_restores(small):
    rng = np.random.default_rng(1)
    s = random_state(small, rng)
    u = s.to_dense()
    v = T.apply_S(s, 1).to_dense()
    L, W = small.Lfield, small.W
    back = np.array([(1 + L / W**2) * v[0] + (L / W) * v[1], v[0] / W + v[1]])
    assert np.abs(back - u).max() <= 1e-12 * np.abs(u).max()


def test_S_reduces_where_L_vanishes():
    sd = ls.saddle_data(1.0, 8)
    S = ls.S_matrix(ls.eval_L(sd.a_minus, sd.b_s, 1.0), 8)
    assert np.allclose(S, [[1, 0], [-1 / 8, 1]], atol=1e-15)


def test_apply_K_matches_dense(small):
    rng = np.random.default_rng(2)
    s = random_state(small, rng, rank=2)
    u = s.to_dense()
    Aa, Ab = small.A_a.toarray(), small.A_b.toarray()
    out = T.apply_K(s).to_dense()
    for c in range(2):
        assert np.abs(out[c] - Aa @ u[c] @ Ab.T).max() <= 1e-12 * np.abs(u).max()


def test_apply_K_linear_and_symmetric(small):
    rng = np.random.default_rng(3)
    s, t = random_state(small, rng), random_state(small, rng)
    lhs = T.apply_K(T.TransferState.from_dense(small, 2.0 * s.to_dense() - 1j * t.to_dense()))
    rhs = 2.0 * T.apply_K(s).to_dense() - 1j * T.apply_K(t).to_dense()
    assert np.abs(lhs.to_dense() - rhs).max() <= 1e-12 * np.abs(rhs).max()
    a, b = T.pairing(T.apply_K(s), t), T.pairing(s, T.apply_K(t))
    assert abs(a - b) <= 1e-11 * abs(a)


def test_gaussian_bump_stays_at_saddle():
    g = gr.quick_grid(1.0, 8)
    sd = ls.saddle_data(1.0, 8)
    a, b = g.axis_a.nodes, g.axis_b.nodes
    bump_a = np.exp(-((a - sd.a_plus) * 8) ** 2 / 2)
    bump_b = np.exp(-((b - sd.b_s) * 8) ** 2 / 2)
    s = T.TransferState(LowRankField.outer(bump_a, bump_b), LowRankField.zeros(*g.shape), g)
    out = np.abs(T.apply_K(s).to_dense()[0])
    i, j = np.unravel_index(out.argmax(), out.shape)
    ia = np.abs(a - sd.a_plus).argmin()
    jb = np.abs(b - sd.b_s).argmin()
    assert abs(i - ia) <= 1 and abs(j - jb) <= 1


def test_adjoint_identity(small):
    rng = np.random.default_rng(4)
    for _ in range(5):
        s, t = random_state(small, rng), random_state(small, rng)
        a = T.pairing(T.apply_transfer_T(s, None), t)
        b = T.pairing(s, T.apply_transfer(t, None))
        assert abs(a - b) <= 1e-11 * abs(a)


def test_norm_bound(small):
    rng = np.random.default_rng(5)
    C0 = 2 + ls.L_bound(1.0)
    for _ in range(5):
        s = random_state(small, rng)
        assert T.state_norm(T.apply_transfer(s)) <= (1 + C0 / small.W) * T.state_norm(s)


def test_power_iteration_modulus():
    g = gr.quick_grid(1.0, 16)
    s = T.initial_state(g)
    logs = []
    for _ in range(120):
        s = T.renormalize(T.apply_transfer(s))
        logs.append(s.log_scale)
    rate = math.exp((logs[-1] - logs[-41]) / 40)
    assert 0.9 < rate < 1.01


def test_initial_and_ell_states(small):
    s0 = T.initial_state(small).to_dense()
    assert np.all(s0[0] == 0)
    assert np.allclose(s0[1], small.F)
    ell = T.ell_state(small).to_dense()
    assert np.allclose(ell[0], small.F)
    assert np.allclose(ell[1], -small.F * small.Lfield / small.W)


def test_normalization_single_site(small):
    z = T.normalization(ModelParams(1.0, 4, 1), small)
    direct = np.sum(small.weights * small.F**2 * small.Lfield) / (2 * math.pi)
    assert abs(z - 1) < 1e-6
    assert abs(z - direct) < 1e-13


def test_normalization_w8(quick_grid_w8):
    zs = T.normalization_curve(quick_grid_w8, [16, 64, 256])
    assert abs(zs[64] - 1) <= 1e-4
    assert max(abs(zs[a] - zs[b]) for a in zs for b in zs) <= 1e-4


def test_wrong_sign_breaks_normalization(small):
    z = T.normalization(ModelParams(1.0, 4, 3), small, ell_sign=-T.ELL_SIGN)
    assert abs(z + 1) < 1e-6


def test_sign_calibration_unique(small):
    assert abs(T.check_sign_calibration(small) - 1) < 1e-6
    with pytest.raises(AssertionError):
        T.check_sign_calibration(small, ell_sign=-T.ELL_SIGN)


def test_dos_single_site_equals_oracle(small):
    r = T.dos(ModelParams(1.0, 4, 1), small)
    ref = oracle.field_integral(1, small, 1.0, 4.0)
    assert abs(r.g_n - ref.value_g) <= 1e-10 * abs(ref.value_g)
    assert abs(r.Z - ref.value_Z) <= 1e-10


def test_dos_normalised_assembly(quick_grid_w8):
    r = T.dos(ModelParams(1.0, 8, 20), quick_grid_w8)
    assert r.g_sc == ls.semicircle(1.0)
    assert abs(r.g_n_normalized - (r.g_centered / r.Z + r.g_sc)) < 1e-15
    # centring is linear: raw = centred + g_sc Z
    assert abs(r.g_n - (r.g_centered + r.g_sc * r.Z)) < 1e-12
    assert r.abs_err == abs(r.g_n_normalized - r.g_sc)


def test_dos_w8_close_to_semicircle(quick_grid_w8):
    r = T.dos(ModelParams(1.0, 8, 67), quick_grid_w8)
    assert r.abs_err <= 0.5 / 8
    assert abs(r.Z - 1) <= 1e-4


def test_renormalisation_is_transparent(small):
    p = ModelParams(1.0, 4, 12)
    a = T.dos(p, small, renorm=True)
    b = T.dos(p, small, renorm=False)
    assert abs(a.g_n - b.g_n) <= 1e-12 * abs(b.g_n)
    assert abs(a.Z - b.Z) <= 1e-12


@pytest.mark.parametrize("stride", [1, 3, 17])
def test_checkpoint_stride_independent(small, stride):
    p = ModelParams(1.0, 4, 17)
    ref = T.dos(p, small)
    r = T.dos(p, small, stride=stride)
    assert abs(r.g_n - ref.g_n) <= 1e-12 * abs(ref.g_n)


def test_memory_budget(small):
    with pytest.raises(T.MemoryBudgetError, match="bytes"):
        T.dos(ModelParams(1.0, 4, 30), small, mem_budget=1000)


def test_grid_mismatch(small):
    with pytest.raises(ValueError):
        T.dos(ModelParams(1.0, 5, 3), small)
    with pytest.raises(ValueError):
        T.normalization(ModelParams(0.5, 4, 3), small)


@pytest.mark.parametrize("E", [-1.7, -0.6, 0.25, 0.9, 1.5, 1.85])
def test_density_positive(E):
    g = gr.quick_grid(E, 8)
    r = T.dos(ModelParams(E, 8, 40), g)
    assert r.g_n_normalized.imag > 0


def test_grid_refinement_stability():
    p = ModelParams(1.0, 8, 64)
    a = T.dos(p, gr.build_grid(1.0, 8, refine=6))
    b = T.dos(p, gr.build_grid(1.0, 8, refine=8))
    assert abs(a.g_n - b.g_n) <= 1e-5
