import numpy as np
import pytest

import lrvlasov.htucker as ht
from lrvlasov.config import from_preset
from lrvlasov.driver import (History, _current_field, advance, initialize,
                             select_dt, step_multistep_1d, step_multistep_2d)
from lrvlasov.errors import RankOverflowError
from lrvlasov.lowrank import LowRankMatrix
from lrvlasov.macro import MacroState1D, MacroState2D
from lrvlasov.poisson import field_energy, solve_poisson
from lrvlasov.projection import moments
from lrvlasov.driver import run

from reference import dense_moments, dense_moments_2d, dense_step_1d
import reference


def test_select_dt_formula_and_monotonicity():
    cfg = from_preset("weak_landau_1d")
    problem, hist = initialize(cfg)
    field = _current_field(problem, hist.fs[-1])
    dt = select_dt(problem, field, cfg.cfl)
    # frozen regression baseline for the default weak Landau configuration
    assert dt == pytest.approx(0.00974941329769426, rel=1e-12)
    assert select_dt(problem, field, 2 * cfg.cfl) == pytest.approx(2 * dt, rel=1e-14)
    # with no field the bound reduces to cfl h_x / v_max
    zero_field = solve_poisson(np.ones(cfg.nx), problem.sgrid)
    (hx,) = problem.sgrid.h
    assert select_dt(problem, zero_field, cfg.cfl) == pytest.approx(
        cfg.cfl * hx / cfg.v_max, rel=1e-14)


def test_initial_macro_state_consistency():
    cfg = from_preset("weak_landau_1d")
    problem, hist = initialize(cfg)
    f0, u0 = hist.fs[-1], hist.us[-1]
    m0 = moments(f0, problem.vgrid)
    field = solve_poisson(m0.rho, problem.sgrid)
    assert np.allclose(u0.rho, m0.rho)
    assert np.allclose(u0.e, m0.kappa + 0.5 * field.E[0] ** 2)


def test_multistep_ready_logic():
    h = History()
    h.fs = [1, 2, 3]
    h.us = [None, None, None]
    h.dts = [0.1, 0.1]
    assert h.multistep_ready(0.1)
    assert not h.multistep_ready(0.05)
    h.dts = [0.1, 0.05]
    assert not h.multistep_ready(0.05)


def test_end_time_zero_single_record():
    cfg = from_preset("weak_landau_1d", t_end=0.0)
    series = run(cfg)
    assert len(series) == 1
    assert series[0].t == 0.0
    assert series[0].ranks == (2,)


def test_startup_second_order():
    # Heun startup against the manufactured solution with the truncation
    # floor pushed out of the way; dt stays below the CFL limit (~6e-3 at
    # this mesh).  The spatial error floor is common to all runs, so the
    # Richardson-style differences isolate the O(dt^2) time error
    errs = []
    for dt in (4e-3, 2e-3, 1e-3):
        cfg = from_preset("forced", nx=64, nv=128, eps=1e-12)
        problem, hist = initialize(cfg)
        nsteps = int(round(1.6e-2 / dt))
        for _ in range(nsteps):
            advance(problem, hist, dt)
        exact = problem.preset.exact_f(hist.t, problem.sgrid.nodes(0), problem.vgrid.v)
        errs.append(np.max(np.abs(hist.fs[-1].dense() - exact)))
    assert (errs[0] - errs[2]) / (errs[1] - errs[2]) > 3.0


def test_startup_primes_multistep():
    from lrvlasov.driver import startup_steps

    cfg = from_preset("weak_landau_1d", nx=32, nv=65)
    problem, hist = initialize(cfg)
    dt = 5e-3
    assert not hist.multistep_ready(dt)
    startup_steps(problem, hist, dt)
    assert hist.step == 2
    assert len(hist.fs) == 3
    assert hist.multistep_ready(dt)
    # conservation honored during startup for the macro method
    m0 = moments(hist.fs[0], problem.vgrid)
    m2 = moments(hist.fs[-1], problem.vgrid)
    vol = problem.sgrid.cell_volume
    assert vol * m2.rho.sum() == pytest.approx(vol * m0.rho.sum(), rel=1e-13)


def test_startup_rank_four_forced():
    # at the preset's default mesh the remainder stays a single term, so the
    # stored rank settles at 3 + 1 after startup
    cfg = from_preset("forced")
    problem, hist = initialize(cfg)
    dt = select_dt(problem, _current_field(problem, hist.fs[-1]), cfg.cfl)
    for _ in range(12):
        advance(problem, hist, dt)
    assert hist.fs[-1].rank == 4


def test_macro_moments_pinned_each_step():
    cfg = from_preset("weak_landau_1d", t_end=0.0)
    problem, hist = initialize(cfg)
    dt = 5e-3
    for _ in range(4):
        advance(problem, hist, dt)
    m = moments(hist.fs[-1], problem.vgrid)
    u = hist.us[-1]
    field = solve_poisson(u.rho, problem.sgrid, cfg.poisson_sign)
    kappa_u = u.e - 0.5 * field.E[0] ** 2
    ref = np.abs(u.rho).max()
    assert np.max(np.abs(m.rho - u.rho)) < 1e-12 * ref
    assert np.max(np.abs(m.J - u.J)) < 1e-12 * ref
    assert np.max(np.abs(m.kappa - kappa_u)) < 1e-12 * ref


def test_macro_moments_pinned_2d():
    cfg = from_preset("weak_landau_2d2v", nx=8, nv=16, t_end=0.0)
    problem, hist = initialize(cfg)
    dt = 4e-3
    for _ in range(4):
        advance(problem, hist, dt)
    m = ht.ht_moments(hist.fs[-1], problem.vgrids)
    u = hist.us[-1]
    field = solve_poisson(u.rho, problem.sgrid, cfg.poisson_sign)
    kappa_u = u.e - 0.5 * field.magnitude_squared()
    ref = np.abs(u.rho).max()
    assert np.max(np.abs(m.rho - u.rho)) < 1e-12 * ref
    assert np.max(np.abs(m.J1 - u.J1)) < 1e-12 * ref
    assert np.max(np.abs(m.J2 - u.J2)) < 1e-12 * ref
    assert np.max(np.abs(m.kappa - kappa_u)) < 1e-12 * ref


def test_rank_cap_aborts():
    cfg = from_preset("strong_landau_1d", nx=32, nv=64, rank_cap=3, t_end=1.0)
    with pytest.raises(RankOverflowError):
        run(cfg)


def test_run_deterministic():
    cfg = from_preset("weak_landau_1d", t_end=0.3)
    a = run(cfg)
    b = run(cfg)
    for ra, rb in zip(a, b):
        assert ra.t == rb.t
        assert ra.ranks == rb.ranks
        assert ra.mass == rb.mass
        assert ra.momentum == rb.momentum
        assert ra.energy == rb.energy
        assert ra.efield_energy == rb.efield_energy


# ---------------------------------------------------------------------------
# dense full-grid equivalence with eps = 0 (one multistep step per variant)


def _smooth_lowrank(problem, shift):
    x = problem.sgrid.nodes(0)
    v = problem.vgrid.v
    ux = np.column_stack([1.0 + 0.1 * np.cos(x + shift), 0.05 * np.sin(2 * x)])
    uv = np.column_stack([np.exp(-v**2 / 2.0), 0.5 * v * np.exp(-v**2 / 2.0)])
    return LowRankMatrix(np.ones(2), ux, uv)


def _macro_of(problem, f):
    m = moments(f, problem.vgrid)
    field = solve_poisson(m.rho, problem.sgrid)
    return MacroState1D(m.rho, m.J, m.kappa + 0.5 * field.E[0] ** 2)


@pytest.mark.parametrize("method", ["plain", "conservative", "macro"])
def test_dense_scheme_equivalence_1d(method):
    cfg = from_preset("weak_landau_1d", nx=16, nv=32, eps=0.0, method=method)
    problem, _ = initialize(cfg)
    f_n = _smooth_lowrank(problem, 0.0)
    f_nm2 = _smooth_lowrank(problem, 0.3)
    hist = History()
    dt = 1e-3
    for f in (f_nm2, _smooth_lowrank(problem, 0.15), f_n):
        hist.fs.append(f)
        hist.us.append(_macro_of(problem, f))
    hist.dts = [dt, dt]

    f_new, _ = step_multistep_1d(problem, hist, dt)
    u_n = hist.us[-1]
    u_nm2 = hist.us[-3]
    dense_new, _ = dense_step_1d(
        f_n.dense(), f_nm2.dense(),
        [u_n.rho, u_n.J, u_n.e], [u_nm2.rho, u_nm2.J, u_nm2.e],
        method, 0.0, problem.sgrid, problem.vgrid, dt=dt)
    ref = np.linalg.norm(dense_new)
    assert np.linalg.norm(f_new.dense() - dense_new) < 1e-11 * ref


def _smooth_ht(problem, shift):
    x1 = problem.sgrid.nodes(0)[:, None]
    x2 = problem.sgrid.nodes(1)[None, :]
    spatial = 1.0 + 0.05 * np.cos(x1 + shift) + 0.04 * np.sin(x2 + 0.0 * x1)
    g1 = problem.vgrids[0]
    uv1 = np.column_stack([np.exp(-g1.v**2 / 2.0), 0.3 * g1.v * np.exp(-g1.v**2 / 2.0)])
    uv2 = np.column_stack([np.exp(-g1.v**2 / 2.0), 0.2 * (g1.v**2 - 1) * np.exp(-g1.v**2 / 2.0)])
    rng = np.random.default_rng(12)
    bvv = rng.standard_normal((2, 2, 2)) * 0.2 + np.stack([np.eye(2), np.zeros((2, 2))], axis=2)
    ux = np.column_stack([spatial.reshape(-1), 0.02 * (spatial**2).reshape(-1)])
    return ht.HtTensor(ux, np.eye(2), bvv, uv1, uv2, problem.sgrid.n)


def _macro_of_2d(problem, f):
    m = ht.ht_moments(f, problem.vgrids)
    field = solve_poisson(m.rho, problem.sgrid)
    return MacroState2D(m.rho, m.J1, m.J2,
                        m.kappa + 0.5 * field.magnitude_squared())


@pytest.mark.parametrize("method", ["plain", "conservative", "macro"])
def test_dense_scheme_equivalence_2d(method):
    cfg = from_preset("weak_landau_2d2v", nx=8, nv=16, eps=0.0, method=method)
    problem, _ = initialize(cfg)
    f_n = _smooth_ht(problem, 0.0)
    f_nm2 = _smooth_ht(problem, 0.2)
    hist = History()
    dt = 1e-3
    for f in (f_nm2, _smooth_ht(problem, 0.1), f_n):
        hist.fs.append(f)
        hist.us.append(_macro_of_2d(problem, f))
    hist.dts = [dt, dt]

    f_new, _ = step_multistep_2d(problem, hist, dt)

    # dense reference, mirroring the scheme on the full 4D array
    g1, g2 = problem.vgrids
    dn, dm2 = f_n.dense(), f_nm2.dense()
    rho_n = dense_moments_2d(dn, g1, g2)[0]
    field_n = solve_poisson(rho_n, problem.sgrid)
    fstar = 0.25 * dm2 + 0.75 * dn + 1.5 * dt * reference.dense_transport_rhs_2d(
        dn, field_n, problem.sgrid, g1, g2)
    if method == "plain":
        dense_new = fstar  # eps = 0: truncation is the identity
    else:
        basis, _ = reference.dense_pair_basis(g1)
        wwp = np.outer(g1.w_points, g2.w_points)
        remainder = reference.dense_remove_moments_2d(fstar, g1)
        carrier_own = fstar - remainder
        if method == "conservative":
            dense_new = carrier_own + remainder
        else:
            u_n, u_nm2 = hist.us[-1], hist.us[-3]
            fluxes = __import__("lrvlasov.macro", fromlist=["kfvs_fluxes_2d"])
            fs = fluxes.kfvs_fluxes_2d(f_n, problem.vgrids)
            u_new = fluxes.macro_step_2d(u_n, u_nm2, fs, field_n, dt, problem.sgrid)
            field_new = solve_poisson(u_new.rho, problem.sgrid)
            kappa = u_new.e - 0.5 * field_new.magnitude_squared()
            m_target = ht.Moments2D(u_new.rho, u_new.J1, u_new.J2, kappa)
            basis2 = problem.basis2
            carrier = ht.ht_lift_moments(m_target, basis2, problem.sgrid.n).dense()
            dense_new = carrier + remainder
    ref = np.linalg.norm(dense_new.ravel())
    assert np.linalg.norm((f_new.dense() - dense_new).ravel()) < 1e-11 * ref


def test_forced_one_step_residual_small():
    # manufactured-solution residual: a single multistep step from exact data
    # leaves an O(dt^3 + h^5) defect
    residuals = []
    for dt in (2e-3, 1e-3):
        cfg = from_preset("forced", nx=64, nv=128)
        problem, _ = initialize(cfg)
        x = problem.sgrid.nodes(0)
        v = problem.vgrid.v
        hist = History()
        for k in (-2, -1, 0):
            t_k = 0.5 + k * dt
            fk = problem.preset.exact_f(t_k, x, v)
            u, s, vt = np.linalg.svd(fk, full_matrices=False)
            f = LowRankMatrix(s[:3], u[:, :3], vt[:3].T)
            hist.fs.append(f)
            hist.us.append(_macro_of(problem, f))
        hist.dts = [dt, dt]
        hist.t = 0.5
        f_new, _ = step_multistep_1d(problem, hist, dt)
        exact = problem.preset.exact_f(0.5 + dt, x, v)
        residuals.append(np.max(np.abs(f_new.dense() - exact)))
    # one-step error should shrink at least like dt^3 until the h^5 floor
    assert residuals[0] / residuals[1] > 4.0
