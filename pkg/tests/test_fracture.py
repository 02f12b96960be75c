"""Degradation, toughness, history, phase-field and momentum solves."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from ecmfrac import fracture as fr
from ecmfrac import mesh as M
from ecmfrac.params import ElasticParams, FractureParams, R_GAS


def strip_mesh(half_len, height, dx, dy=None):
    """Rectangular strip centred on y = 0 .. height, x in [-half_len, half_len]."""
    dy = dy or dx
    nx = max(1, int(round(2 * half_len / dx)))
    ny = max(1, int(round(height / dy)))
    return M.rect_grid(np.linspace(-half_len, half_len, nx + 1),
                       np.linspace(0.0, height, ny + 1))


def setup(mesh):
    dm = M.build_dof_map(mesh)
    return dm, fr.MetalBlocks.from_mesh(mesh)


# ---------------------------------------------------------------------------
# scalar laws
# ---------------------------------------------------------------------------

def test_degradation_values():
    assert fr.degradation(0.0) == 1.0
    assert_allclose(fr.degradation(1.0), 1e-10, rtol=1e-12)
    assert_allclose(fr.degradation(0.5), 0.25 + 7.5e-11, rtol=1e-12)
    phi = np.linspace(0, 1, 50)
    assert (np.diff(fr.degradation(phi)) < 0).all()


def test_crack_density_values():
    assert fr.crack_density(0.0, np.zeros(2), 1e-3) == 0.0
    assert_allclose(fr.crack_density(1.0, np.zeros(2), 1e-3), 500.0)


def test_crack_density_profile_integral_is_one():
    # 1D analytic profile: integral of gamma over the line equals 1
    ell = 1e-3
    x = np.linspace(-8 * ell, 8 * ell, 4001)
    phi = np.exp(-np.abs(x) / ell)
    grad = np.gradient(phi, x)[:, None]
    gam = fr.crack_density(phi, grad, ell)
    assert_allclose(np.trapezoid(gam, x), 1.0, rtol=2e-3)


def test_toughness_values():
    frac = FractureParams()
    assert_allclose(fr.toughness(0.0, frac), 2000.0)
    assert_allclose(fr.toughness(1e30, frac), 200.0, rtol=1e-6)
    half = frac.N_L * np.exp(-frac.dg_b / (R_GAS * frac.T))
    assert_allclose(fr.toughness(half, frac), 1100.0, rtol=1e-12)
    c = np.linspace(0, 10, 30)
    assert (np.diff(fr.toughness(c, frac)) < 0).all()


def test_update_history_irreversible():
    frac = FractureParams()
    H = np.zeros(3)
    H = fr.update_history(H, np.zeros(3), np.zeros(3), frac)
    assert_allclose(H, 0.0)
    H = fr.update_history(H, np.full(3, 6000.0), np.zeros(3), frac)
    assert_allclose(H, 3.0)
    # rising C_L lowers Gc, so the driving force grows
    H2 = fr.update_history(H, np.full(3, 6000.0), np.full(3, 50.0), frac)
    assert (H2 > H).all()
    # dropping the load keeps the history
    H3 = fr.update_history(H2, np.zeros(3), np.zeros(3), frac)
    assert_allclose(H3, H2)


def test_critical_stress():
    sc = fr.critical_stress(200e9, 2000.0, 0.5e-3)
    assert_allclose(sc, 9 / 16 * np.sqrt(200e9 * 2000 / (6 * 0.5e-3)), rtol=1e-14)
    assert abs(sc - 2.05e8) / 2.05e8 < 0.01
    assert_allclose(fr.critical_stress(200e9, 2000.0, 2e-3), sc / 2, rtol=1e-14)
    assert_allclose(fr.critical_stress(200e9, 200.0, 0.5e-3), sc * np.sqrt(0.1),
                    rtol=1e-14)


# ---------------------------------------------------------------------------
# hydrostatic stress gradient
# ---------------------------------------------------------------------------

def test_grad_sigma_h_rigid_body_and_uniform_strain():
    mesh = strip_mesh(0.5, 1.0, 0.25)
    _, metal = setup(mesh)
    el = ElasticParams()
    # rigid body: translation + rotation
    ux = 0.1 - 0.05 * mesh.nodes[:, 1]
    uy = 0.2 + 0.05 * mesh.nodes[:, 0]
    g = fr.grad_sigma_h(metal.data[0], ux, uy, el)
    assert np.abs(g).max() < 1e-9 * el.E
    # uniform uniaxial strain -> constant stress -> zero gradient
    g = fr.grad_sigma_h(metal.data[0], np.zeros(mesh.n_nodes),
                        1e-3 * mesh.nodes[:, 1], el)
    assert np.abs(g).max() < 1e-9 * el.E


def test_grad_sigma_h_quadratic_displacement():
    # u_x = x^2: grad sigma_H = (2 E/(3(1-2nu)), 0), hand-evaluated
    mesh = strip_mesh(0.5, 1.0, 0.25)
    _, metal = setup(mesh)
    el = ElasticParams(E=200e9, nu=0.3)
    ux = mesh.nodes[:, 0] ** 2
    g = fr.grad_sigma_h(metal.data[0], ux, np.zeros(mesh.n_nodes), el)
    expect = 2.0 * 200e9 / (3.0 * 0.4)
    assert_allclose(g[..., 0], expect, rtol=1e-9)
    assert np.abs(g[..., 1]).max() < 1e-6 * expect


def test_hydrostatic_stress_gradient_pointwise():
    mesh = strip_mesh(0.5, 1.0, 0.5)
    el = ElasticParams(E=200e9, nu=0.3)
    se = M.shape_eval(mesh.nodes[mesh.quads[0]], M.Q9, (0.2, -0.1))
    X = mesh.nodes[mesh.quads[0]]
    u = np.zeros(18)
    u[0::2] = X[:, 0] ** 2
    g = fr.hydrostatic_stress_gradient(u, se, el)
    assert_allclose(g, [2 * 200e9 / 1.2, 0.0], atol=1e-3)
    # degradation scales the mapping pointwise
    g2 = fr.hydrostatic_stress_gradient(u, se, el, d_value=0.5)
    assert_allclose(g2, 0.5 * g, rtol=1e-14)


# ---------------------------------------------------------------------------
# phase-field solve
# ---------------------------------------------------------------------------

def test_phasefield_zero_history_gives_zero():
    mesh = strip_mesh(0.5, 0.5, 0.25)
    dm, metal = setup(mesh)
    phi = fr.solve_phasefield(mesh, dm, metal, metal.ip_zeros(), ell=0.1)
    assert np.abs(phi).max() < 1e-12


def test_phasefield_uniform_history_fixed_point():
    # uniform H: 1/ell * phi = 2 (1-k0)(1-phi) H  ->  scalar fixed point
    mesh = strip_mesh(0.5, 0.5, 0.25)
    dm, metal = setup(mesh)
    ell, k0, Hval = 0.2, 1e-10, 4.0
    phi = fr.solve_phasefield(mesh, dm, metal, metal.ip_like(Hval), ell, k0)
    a = 2 * (1 - k0) * Hval
    expect = a / (1.0 / ell + a)
    assert_allclose(phi, expect, rtol=1e-10)


def test_phasefield_1d_profile_recovery():
    # initialized crack solves back to exp(-|x|/ell) within 2 % L2 at h = ell/4
    ell = 1e-3
    mesh = strip_mesh(6 * ell, ell / 4, ell / 4)
    dm, metal = setup(mesh)
    phi0, hist = fr.init_phasefield(mesh, dm, metal, [(0.0, 0.0), (0.0, ell / 4)],
                                    ell, calibrate="profile")
    # crack line is x = 0 across the strip
    phi = fr.solve_phasefield(mesh, dm, metal, hist, ell)
    exact = np.exp(-np.abs(mesh.nodes[:, 0]) / ell)
    err = np.linalg.norm(phi - exact) / np.linalg.norm(exact)
    assert err < 0.02


# ---------------------------------------------------------------------------
# momentum solve
# ---------------------------------------------------------------------------

def test_momentum_zero_loads():
    mesh = strip_mesh(0.5, 1.0, 0.25)
    dm, metal = setup(mesh)
    res = fr.solve_momentum(mesh, dm, metal, ElasticParams(),
                            np.zeros(mesh.n_nodes),
                            disp_bcs=[("bottom", "ux", 0.0), ("bottom", "uy", 0.0)])
    assert np.abs(res.ux).max() < 1e-15
    assert np.abs(res.uy).max() < 1e-15


def test_momentum_uniaxial_plane_strain():
    el = ElasticParams(E=200e9, nu=0.3)
    mesh = strip_mesh(0.5, 1.0, 0.25)
    dm, metal = setup(mesh)
    eyy = 1e-3
    bcs = [("bottom", "uy", 0.0), ("top", "uy", eyy),
           ("bottom", "ux", 0.0), ("top", "ux", 0.0),
           ("left", "ux", 0.0), ("right", "ux", 0.0)]
    res = fr.solve_momentum(mesh, dm, metal, el, np.zeros(mesh.n_nodes), bcs)
    sigma_yy = el.E * (1 - el.nu) / ((1 + el.nu) * (1 - 2 * el.nu)) * eyy
    # reaction on top edge over width 1
    R = res.reaction_on(mesh, dm, "top", "uy")
    assert_allclose(R, sigma_yy, rtol=1e-9)
    assert res.residual_rel < 1e-10


def test_momentum_fully_degraded_scales_by_k0():
    el = ElasticParams(E=200e9, nu=0.3)
    mesh = strip_mesh(0.5, 1.0, 0.25)
    dm, metal = setup(mesh)
    eyy = 1e-3
    bcs = [("bottom", "uy", 0.0), ("top", "uy", eyy),
           ("bottom", "ux", 0.0), ("top", "ux", 0.0),
           ("left", "ux", 0.0), ("right", "ux", 0.0)]
    intact = fr.solve_momentum(mesh, dm, metal, el, np.zeros(mesh.n_nodes), bcs)
    broken = fr.solve_momentum(mesh, dm, metal, el, np.ones(mesh.n_nodes), bcs)
    r0 = intact.reaction_on(mesh, dm, "top", "uy")
    r1 = broken.reaction_on(mesh, dm, "top", "uy")
    assert_allclose(r1, el.k0 * r0, rtol=1e-6)


def test_momentum_patch_test_distorted():
    # linear displacement reproduced exactly on a distorted mesh
    mesh = strip_mesh(0.5, 1.0, 0.25)
    rng = np.random.default_rng(2)
    interior = np.all((mesh.nodes - mesh.nodes.min(0) > 1e-9)
                      & (mesh.nodes.max(0) - mesh.nodes > 1e-9), axis=1)
    nodes = mesh.nodes.copy()
    nodes[interior] += 0.02 * rng.uniform(-1, 1, (interior.sum(), 2))
    mesh = M.Mesh(nodes=nodes, quads=mesh.quads, quad_region=mesh.quad_region,
                  tris=mesh.tris, tri_region=mesh.tri_region,
                  boundaries=mesh.boundaries)
    dm, metal = setup(mesh)
    a, b, c, d = 2e-4, -1e-4, 3e-4, 1.5e-4
    fux = lambda x, y: a * x + b * y
    fuy = lambda x, y: c * x + d * y
    # prescribe the exact field on the entire boundary, componentwise
    bcs = []
    for g in ("left", "right", "top", "bottom"):
        for comp in ("ux", "uy"):
            pass
    # prescribing non-uniform values per group needs nodewise handling:
    # emulate with one group per node is overkill; instead fix all boundary
    # nodes directly through the solver's internal interface.
    mech = dm.mech()
    from ecmfrac.sparsetools import CooBuilder, solve_dirichlet
    bld = CooBuilder(mech.ndof)
    el = ElasticParams()
    for block in metal.data:
        B = fr.build_b_matrices(block)
        Ke = np.einsum("eq,eqai,ab,eqbj->eij", block["wdet"], B, el.d_matrix, B)
        ed = fr.mech_edofs(block, mech)
        bld.add_blocks(ed, ed, Ke)
    K = bld.tocsr()
    bnodes = np.unique(np.concatenate([mesh.boundaries[g].ravel()
                                       for g in ("left", "right", "top", "bottom")]))
    fixed = np.zeros(mech.ndof, dtype=bool)
    vals = np.zeros(mech.ndof)
    fixed[mech.eq["ux"][bnodes]] = True
    fixed[mech.eq["uy"][bnodes]] = True
    vals[mech.eq["ux"][bnodes]] = fux(*nodes[bnodes].T)
    vals[mech.eq["uy"][bnodes]] = fuy(*nodes[bnodes].T)
    u, _ = solve_dirichlet(K, np.zeros(mech.ndof), fixed, vals)
    exact = np.empty(mech.ndof)
    exact[mech.eq["ux"]] = fux(*nodes.T)
    exact[mech.eq["uy"]] = fuy(*nodes.T)
    rel = np.abs(u - exact).max() / np.abs(exact).max()
    assert rel < 1e-10


def test_momentum_unconstrained_raises():
    mesh = strip_mesh(0.5, 1.0, 0.5)
    dm, metal = setup(mesh)
    with pytest.raises(Exception, match="load case|constraint"):
        fr.solve_momentum(mesh, dm, metal, ElasticParams(),
                          np.zeros(mesh.n_nodes), disp_bcs=[],
                          load_case="no constraints")


# ---------------------------------------------------------------------------
# initialization and crack metrics
# ---------------------------------------------------------------------------

def test_init_phasefield_values():
    ell = 1e-3
    mesh = strip_mesh(5 * ell, 2 * ell, ell / 4)
    dm, metal = setup(mesh)
    crack = [(-2 * ell, ell), (2 * ell, ell)]
    phi, hist = fr.init_phasefield(mesh, dm, metal, crack, ell)
    on = np.isclose(mesh.nodes[:, 1], ell) & (np.abs(mesh.nodes[:, 0]) <= 2 * ell)
    assert_allclose(phi[on], 1.0)
    at = np.isclose(mesh.nodes[:, 1], ell + ell * np.log(2))
    assert_allclose(phi[at & (np.abs(mesh.nodes[:, 0]) < ell)], 0.5, rtol=1e-12)
    far = phi[np.abs(mesh.nodes[:, 0]) > 4.5 * ell]
    assert far.max() < np.exp(-2.49)
    assert all((h >= 0).all() for h in hist)


def test_init_phasefield_bad_ell():
    mesh = strip_mesh(1, 1, 0.5)
    dm, metal = setup(mesh)
    with pytest.raises(ValueError):
        fr.init_phasefield(mesh, dm, metal, [(0, 0), (1, 0)], ell=0.0)


def test_estimate_crack_length():
    # tip rounding adds ~pi*ell/4, so the 2 % figure needs a small ell
    ell = 0.125e-3
    a0 = 5e-3
    ys = M.graded_edges([0.0, 4e-3, 6e-3, 10e-3], [4e-4, ell / 4, 4e-4])
    mesh = M.rect_grid(np.linspace(0, 10e-3, 101), ys)
    dm = M.build_dof_map(mesh)
    metal = fr.MetalBlocks.from_mesh(mesh)
    assert fr.estimate_crack_length(mesh, metal, np.zeros(mesh.n_nodes), ell) == 0.0
    phi = fr.crack_phi_nodal(mesh, dm, [(0.0, 5e-3), (a0, 5e-3)], ell)
    a = fr.estimate_crack_length(mesh, metal, phi, ell)
    assert abs(a - a0) / a0 < 0.02
    phi2 = fr.crack_phi_nodal(mesh, dm, [(0.0, 5e-3), (2 * a0, 5e-3)], ell)
    a2 = fr.estimate_crack_length(mesh, metal, phi2, ell)
    assert abs(a2 - 2 * a) / (2 * a) < 0.02
