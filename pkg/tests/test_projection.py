import numpy as np
import pytest

from lrvlasov.errors import DimensionError
from lrvlasov.grids import GaussianWeight, make_velocity_grid, weighted_inner
from lrvlasov.lowrank import LowRankMatrix, add, recompress, scale, zero
from lrvlasov.projection import (MomentBasis, Moments1D, lift_moments, moment_split,
                                 moments, truncate_conservative, truncate_to_moments)

from reference import dense_carrier, dense_moments, dense_weighted_projection

NV = 33
NX = 16


@pytest.fixture(scope="module")
def vgrid():
    return make_velocity_grid(NV, 6.0)


@pytest.fixture(scope="module")
def basis(vgrid):
    return MomentBasis.build(vgrid)


def random_lr(rng, rank=4, nx=NX, nv=NV):
    return LowRankMatrix(np.abs(rng.standard_normal(rank)) + 0.1,
                         rng.standard_normal((nx, rank)),
                         rng.standard_normal((nv, rank)))


def test_basis_orthogonality(vgrid, basis):
    b1, b2, b3 = basis.vectors()
    assert abs(weighted_inner(b1, b2, vgrid)) < 1e-12
    assert abs(weighted_inner(b1, b3, vgrid)) < 1e-12 * basis.norm1_sq
    assert abs(weighted_inner(b2, b3, vgrid)) < 1e-12
    assert basis.c > 0


def test_moments_zero(vgrid):
    m = moments(zero(NX, NV), vgrid)
    assert np.all(m.rho == 0) and np.all(m.J == 0) and np.all(m.kappa == 0)


def test_moments_maxwellian_profile(vgrid):
    # dense quadrature oracle for a separable product g(x) x Maxwellian
    rng = np.random.default_rng(1)
    gx = 1.0 + 0.3 * rng.standard_normal(NX)
    maxw = np.exp(-vgrid.v**2 / 2.0)
    f = LowRankMatrix(np.ones(1), gx[:, None], maxw[:, None])
    m = moments(f, vgrid)
    rho_d, j_d, k_d = dense_moments(f.dense(), vgrid)
    assert np.allclose(m.rho, rho_d, atol=1e-14)
    assert np.allclose(m.J, j_d, atol=1e-14)
    assert np.allclose(m.kappa, k_d, atol=1e-14)
    # J vanishes for the even profile; kappa tracks the discrete second moment
    assert np.max(np.abs(m.J)) < 1e-14
    mass_g = vgrid.h * maxw.sum()
    second = 0.5 * vgrid.h * np.dot(maxw, vgrid.v**2)
    assert np.allclose(m.rho, gx * mass_g, atol=1e-14)
    assert np.allclose(m.kappa, m.rho * (second / mass_g), atol=1e-13)


def test_moments_match_dense_random(rng, vgrid):
    f = random_lr(rng, rank=6)
    m = moments(f, vgrid)
    rho_d, j_d, k_d = dense_moments(f.dense(), vgrid)
    scale_ref = np.abs(rho_d).max() + 1.0
    assert np.allclose(m.rho, rho_d, atol=1e-13 * scale_ref)
    assert np.allclose(m.J, j_d, atol=1e-13 * scale_ref)
    assert np.allclose(m.kappa, k_d, atol=1e-13 * scale_ref)


def test_moments_grid_mismatch(rng, vgrid):
    f = random_lr(rng, nv=NV + 1)
    with pytest.raises(DimensionError):
        moments(f, vgrid)


def test_lift_zero_moments(basis):
    m = Moments1D(np.zeros(NX), np.zeros(NX), np.zeros(NX))
    out = lift_moments(m, basis)
    assert np.max(np.abs(out.dense())) == 0.0


def test_lift_degenerate_third_term(rng, basis, vgrid):
    # kappa = c rho / 2 makes the third carrier term vanish identically
    rho = np.abs(rng.standard_normal(NX)) + 1.0
    m = Moments1D(rho, np.zeros(NX), 0.5 * basis.c * rho)
    out = lift_moments(m, basis)
    assert recompress(out, droptol=1e-13).rank <= 1


def test_lift_roundtrip_random(rng, basis, vgrid):
    for _ in range(30):
        m = Moments1D(rng.standard_normal(NX) * 3.0, rng.standard_normal(NX),
                      rng.standard_normal(NX))
        got = moments(lift_moments(m, basis), vgrid)
        ref = max(np.abs(m.rho).max(), np.abs(m.J).max(), np.abs(m.kappa).max())
        assert np.allclose(got.rho, m.rho, atol=1e-12 * ref)
        assert np.allclose(got.J, m.J, atol=1e-12 * ref)
        assert np.allclose(got.kappa, m.kappa, atol=1e-12 * ref)


def test_lift_matches_dense_carrier(rng, basis, vgrid):
    m = Moments1D(rng.standard_normal(NX), rng.standard_normal(NX),
                  rng.standard_normal(NX))
    lifted = lift_moments(m, basis).dense()
    oracle = dense_carrier(m.rho, m.J, m.kappa, vgrid)
    assert np.allclose(lifted, oracle, atol=1e-13 * np.abs(oracle).max())


def test_split_carrier_exactness_on_subspace(rng, basis, vgrid):
    # f entirely inside the weighted moment subspace leaves no remainder
    wp = vgrid.w_points
    v = vgrid.v
    coeff = rng.standard_normal((NX, 3))
    dense = coeff @ np.stack([wp, wp * v, wp * v**2])
    u, s, vt = np.linalg.svd(dense, full_matrices=False)
    f = LowRankMatrix(s[:3], u[:, :3], vt[:3].T)
    carrier, remainder = moment_split(f, basis)
    assert np.max(np.abs(remainder.dense())) < 1e-12 * np.abs(dense).max()


def test_split_moment_bookkeeping(rng, basis, vgrid):
    f = random_lr(rng, rank=6)
    carrier, remainder = moment_split(f, basis)
    m_f = moments(f, vgrid)
    m_c = moments(carrier, vgrid)
    ref = m_f.max_abs() + 1.0
    assert np.allclose(m_c.rho, m_f.rho, atol=1e-12 * ref)
    m_r = moments(remainder, vgrid)
    assert m_r.max_abs() < 1e-11 * ref


def test_split_matches_dense_projection(rng, basis, vgrid):
    # dense projection oracle: carrier = w * (projection of f/w onto the basis)
    f = random_lr(rng, rank=6)
    carrier, _ = moment_split(f, basis)
    oracle = dense_weighted_projection(f.dense(), vgrid)
    assert np.allclose(carrier.dense(), oracle, atol=1e-11 * np.abs(oracle).max())


def test_projector_idempotence(rng, basis, vgrid):
    f = random_lr(rng)
    carrier, _ = moment_split(f, basis)
    carrier2, rem2 = moment_split(carrier, basis)
    assert np.allclose(carrier2.dense(), carrier.dense(),
                       atol=1e-11 * np.abs(carrier.dense()).max())
    assert np.max(np.abs(rem2.dense())) < 1e-11 * np.abs(carrier.dense()).max()


def test_conservative_truncate_eps_zero(rng, basis, vgrid):
    f = random_lr(rng)
    out = truncate_conservative(f, basis, 0.0)
    assert np.allclose(out.dense(), f.dense(), atol=1e-11 * np.abs(f.dense()).max())


def test_conservative_truncate_moment_preservation(rng, basis, vgrid):
    from lrvlasov.lowrank import truncate_weighted

    for _ in range(100):
        f = random_lr(rng, rank=int(rng.integers(1, 7)))
        eps = 10.0 ** rng.uniform(-8, -2)
        out = truncate_conservative(f, basis, eps)
        m_in, m_out = moments(f, vgrid), moments(out, vgrid)
        ref = m_in.max_abs() + 1e-3
        assert np.max(np.abs(m_out.rho - m_in.rho)) < 1e-12 * ref
        assert np.max(np.abs(m_out.J - m_in.J)) < 1e-12 * ref
        assert np.max(np.abs(m_out.kappa - m_in.kappa)) < 1e-12 * ref
        # rank bound: three carrier terms plus the truncated remainder
        _, remainder = moment_split(f, basis)
        r2 = truncate_weighted(remainder, vgrid.w_points, eps).rank
        assert out.rank <= 3 + r2 + 3  # +3 covers one re-projection pass


def test_conservative_truncate_weighted_error_bound(rng, basis, vgrid):
    # constructed fast-decaying remainder spectrum; dense weighted-SVD oracle
    f = add(random_lr(rng, rank=2), scale(random_lr(rng, rank=3), 1e-5))
    eps = 1e-3
    out = truncate_conservative(f, basis, eps)
    err = (out.dense() - f.dense()) / np.sqrt(vgrid.w_points)[None, :]
    assert np.linalg.norm(err) <= eps * (1 + 1e-8)


def test_pinned_moments_definitional_match(rng, basis, vgrid):
    f = random_lr(rng)
    eps = 1e-4
    own = moments(f, vgrid)
    a = truncate_conservative(f, basis, eps)
    b = truncate_to_moments(f, own, basis, eps)
    assert np.allclose(a.dense(), b.dense(), atol=1e-13 * np.abs(a.dense()).max())


def test_pinned_moments_zero_target(rng, basis, vgrid):
    f = random_lr(rng)
    m0 = Moments1D(np.zeros(NX), np.zeros(NX), np.zeros(NX))
    out = truncate_to_moments(f, m0, basis, 1e-4)
    m_out = moments(out, vgrid)
    assert m_out.max_abs() < 1e-12 * (moments(f, vgrid).max_abs() + 1.0)


def test_pinned_moments_track_target(rng, basis, vgrid):
    for _ in range(30):
        f = random_lr(rng)
        own = moments(f, vgrid)
        delta = 1e-3 * rng.standard_normal(NX)
        target = Moments1D(own.rho + delta, own.J + delta, own.kappa + delta)
        out = truncate_to_moments(f, target, basis, 1e-5)
        got = moments(out, vgrid)
        ref = target.max_abs() + 1.0
        assert np.max(np.abs(got.rho - target.rho)) < 1e-12 * ref
        assert np.max(np.abs(got.J - target.J)) < 1e-12 * ref
        assert np.max(np.abs(got.kappa - target.kappa)) < 1e-12 * ref


def test_bump_weight_basis_still_orthogonal():
    g = make_velocity_grid(64, 10.0, GaussianWeight(3.0))
    b = MomentBasis.build(g)
    b1, b2, b3 = b.vectors()
    assert abs(weighted_inner(b1, b3, g)) < 1e-12 * b.norm1_sq
