"""Shape functions, quadrature, structured meshes and DOF numbering."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from ecmfrac import mesh as M
from ecmfrac.mesh import L3, Q9, T6, Mesh


def unit_square(n=2):
    e = np.linspace(0.0, 1.0, n + 1)
    return M.rect_grid(e, e)


def distorted_square(n=3, seed=0, amp=0.15):
    m = unit_square(n)
    rng = np.random.default_rng(seed)
    h = 1.0 / (2 * n)
    interior = np.all((m.nodes > 1e-12) & (m.nodes < 1 - 1e-12), axis=1)
    nodes = m.nodes.copy()
    nodes[interior] += amp * h * rng.uniform(-1, 1, (interior.sum(), 2))
    return Mesh(nodes=nodes, quads=m.quads, quad_region=m.quad_region,
                tris=m.tris, tri_region=m.tri_region, boundaries=m.boundaries)


def mixed_mesh(n=2):
    m = unit_square(n)
    return M.split_quads_to_tris(m, [0])


# ---------------------------------------------------------------------------
# shape functions
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("kind", [Q9, T6])
def test_partition_of_unity_and_gradient_sum(kind):
    mesh = distorted_square(3)
    if kind == T6:
        mesh = M.split_quads_to_tris(mesh, range(mesh.quads.shape[0]))
    for k, conn, _ in mesh.blocks():
        data = mesh.element_data(k, conn)
        ones = np.einsum("qn->q", data["N"])
        assert_allclose(ones, 1.0, atol=1e-12)
        gsum = np.abs(data["dNdx"].sum(axis=-1))
        assert gsum.max() < 1e-12 / (1.0 / (2 * 3))  # scaled by 1/h


@pytest.mark.parametrize("kind,corners", [
    (Q9, [(-1, -1), (1, -1), (1, 1), (-1, 1), (0, -1), (1, 0), (0, 1), (-1, 0), (0, 0)]),
    (T6, [(0, 0), (1, 0), (0, 1), (0.5, 0), (0.5, 0.5), (0, 0.5)]),
])
def test_kronecker_property(kind, corners):
    for a, pt in enumerate(corners):
        N, _, _ = M.shape_at(kind, pt)
        expect = np.zeros(len(corners))
        expect[a] = 1.0
        assert_allclose(N, expect, atol=1e-14)


def test_linear_field_gradient_exact():
    # u(x) = x interpolated on a distorted element has gradient exactly (1, 0)
    mesh = distorted_square(2, seed=3)
    conn = mesh.quads
    data = mesh.element_data(Q9, conn)
    vals = mesh.nodes[:, 0][conn]  # (E, 9)
    grad = np.einsum("eqin,en->eqi", data["dNdx"], vals)
    assert_allclose(grad[..., 0], 1.0, atol=1e-11)
    assert_allclose(grad[..., 1], 0.0, atol=1e-11)


def test_interpolation_patch_linear_any_field():
    mesh = distorted_square(3, seed=5)
    f = lambda x, y: 2.0 + 3.0 * x - 1.5 * y
    nodal = f(mesh.nodes[:, 0], mesh.nodes[:, 1])
    data = mesh.element_data(Q9, mesh.quads)
    vals_ip = np.einsum("qn,en->eq", data["N"], nodal[mesh.quads])
    exact = f(data["ipx"][..., 0], data["ipx"][..., 1])
    rel = np.abs(vals_ip - exact) / np.abs(exact).max()
    assert rel.max() < 1e-12


# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------

def test_quadrature_weights_sum_to_reference_measure():
    assert_allclose(M.quadrature(Q9).weights.sum(), 4.0, rtol=1e-14)
    assert_allclose(M.quadrature(T6).weights.sum(), 0.5, rtol=1e-14)
    assert_allclose(M.quadrature(L3).weights.sum(), 2.0, rtol=1e-14)


def test_quadrature_exact_x2y2_on_affine_elements():
    mesh = unit_square(2)
    data = mesh.element_data(Q9, mesh.quads)
    x, y = data["ipx"][..., 0], data["ipx"][..., 1]
    val = (data["wdet"] * x ** 2 * y ** 2).sum()
    assert abs(val - 1.0 / 9.0) < 1e-12

    tri = M.split_quads_to_tris(unit_square(1), [0])
    data = tri.element_data(T6, tri.tris)
    x, y = data["ipx"][..., 0], data["ipx"][..., 1]
    val = (data["wdet"] * x ** 2 * y ** 2).sum()
    assert abs(val - 1.0 / 9.0) < 1e-12


def test_segment_weights_sum_to_length():
    mesh = unit_square(3)
    assert_allclose(mesh.boundary_length("bottom"), 1.0, rtol=1e-14)


# ---------------------------------------------------------------------------
# point evaluation / errors
# ---------------------------------------------------------------------------

def test_shape_eval_matches_batched_data():
    mesh = distorted_square(2, seed=8)
    rule = M.quadrature(Q9)
    data = mesh.element_data(Q9, mesh.quads)
    se = M.shape_eval(mesh.nodes[mesh.quads[1]], Q9, rule.points[4])
    assert_allclose(se.dNdx, data["dNdx"][1, 4], rtol=1e-12)
    assert_allclose(se.N, data["N"][4], rtol=1e-12)


def test_singular_jacobian_reports_element():
    coords = np.zeros((9, 2))  # fully degenerate element
    with pytest.raises(M.MeshError, match="element 7"):
        M.shape_eval(coords, Q9, (0.0, 0.0), elem_id=7)


def test_b_matrix_symmetric_gradient():
    mesh = unit_square(1)
    se = M.shape_eval(mesh.nodes[mesh.quads[0]], Q9, (0.1, -0.4))
    # displacement u = (a*x + b*y, c*x + d*y) -> strain via B
    a, b, c, d = 0.3, -0.2, 0.7, 0.12
    X = mesh.nodes[mesh.quads[0]]
    u = np.empty(18)
    u[0::2] = a * X[:, 0] + b * X[:, 1]
    u[1::2] = c * X[:, 0] + d * X[:, 1]
    eps = se.B_u @ u
    assert_allclose(eps, [a, d, b + c], atol=1e-12)


def test_second_derivative_map_quadratic_field():
    # x^2 lies in the Q9 space only for affine maps, where B* is exact
    mesh = unit_square(2)
    se = M.shape_eval(mesh.nodes[mesh.quads[2]], Q9, (0.2, 0.3))
    X = mesh.nodes[mesh.quads[2]]
    u = np.zeros(18)
    u[0::2] = X[:, 0] ** 2  # u_x = x^2
    # grad(div u) = (2, 0)
    g = se.B_ustar @ u
    assert_allclose(g, [2.0, 0.0], atol=1e-9)


# ---------------------------------------------------------------------------
# dof map
# ---------------------------------------------------------------------------

def test_dofmap_single_metal_element_all_fields():
    mesh = unit_square(1)
    dm = M.build_dof_map(mesh)
    counts = dm.counts()
    assert all(c == mesh.n_nodes for c in counts.values())
    assert len(counts) == 12


def test_dofmap_pure_electrolyte_element():
    e = np.linspace(0, 1, 2)
    mesh = M.rect_grid(e, e, region_of=lambda x, y: Mesh.ELEC)
    dm = M.build_dof_map(mesh)
    counts = dm.counts()
    for f in ("ux", "uy", "phi", "CL", "theta"):
        assert counts[f] == 0
    for f in ("pot",) + M.SPECIES_FIELDS:
        assert counts[f] == mesh.n_nodes


def test_dofmap_mixed_regions_interface_union():
    # two-element strip: left metal, right electrolyte
    mesh = M.rect_grid([0, 1, 2], [0, 1],
                       region_of=lambda x, y: Mesh.METAL if x < 1 else Mesh.ELEC)
    dm = M.build_dof_map(mesh)
    assert "interface" in mesh.boundaries
    iface_nodes = np.unique(mesh.boundaries["interface"])
    # interface nodes carry the union: mechanical/metal fields AND species
    for f in ("ux", "phi", "CL", "theta", "pot", "C_H"):
        assert dm.active[f][iface_nodes].all()
    # a pure-electrolyte node (right edge) has no metal fields
    right = np.unique(mesh.boundaries["right"])
    assert not dm.active["CL"][right].any()
    assert dm.active["C_Na"][right].all()


def test_dofmap_deterministic_numbering():
    mesh = mixed_mesh(2)
    a = M.build_dof_map(mesh).chem()
    b = M.build_dof_map(mesh).chem()
    for f in a.fields:
        assert np.array_equal(a.eq[f], b.eq[f])


# ---------------------------------------------------------------------------
# mesh io / generation
# ---------------------------------------------------------------------------

def test_mesh_file_roundtrip(tmp_path):
    mesh = mixed_mesh(2)
    p = tmp_path / "m.msh"
    M.write_mesh(mesh, p)
    back = M.read_mesh(p)
    assert_allclose(back.nodes, mesh.nodes)
    assert np.array_equal(back.quads, mesh.quads)
    assert np.array_equal(back.tris, mesh.tris)
    assert sorted(back.boundaries) == sorted(mesh.boundaries)


def test_graded_edges():
    e = M.graded_edges([0.0, 1.0, 3.0], [0.5, 1.0])
    assert_allclose(e, [0, 0.5, 1.0, 2.0, 3.0])


def test_split_quads_preserves_area():
    mesh = mixed_mesh(2)
    area = 0.0
    for kind, conn, _ in mesh.blocks():
        area += mesh.element_data(kind, conn)["wdet"].sum()
    assert_allclose(area, 1.0, rtol=1e-13)


def test_validate_catches_bad_connectivity():
    mesh = unit_square(1)
    bad = mesh.quads.copy()
    bad[0, 0] = 999
    broken = Mesh(nodes=mesh.nodes, quads=bad, quad_region=mesh.quad_region,
                  tris=mesh.tris, tri_region=mesh.tri_region)
    with pytest.raises(M.MeshError):
        broken.validate()
