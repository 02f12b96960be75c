"""Quadratic 2D meshes: geometry, shape functions, quadrature, DOF numbering.

Element library: 9-node quadrilaterals ("q9"), 6-node triangles ("t6") and
3-node boundary lines ("l3"), all with VTK node ordering (corners first,
then mid-edge nodes, then the quad center).  Two element regions exist:
metal (``Mesh.METAL``) and free electrolyte (``Mesh.ELEC``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

Q9 = "q9"
T6 = "t6"
L3 = "l3"

N_NODES = {Q9: 9, T6: 6, L3: 3}

# Local edges (corner, corner, mid) of area elements, traversed CCW.
EDGES = {
    Q9: ((0, 1, 4), (1, 2, 5), (2, 3, 6), (3, 0, 7)),
    T6: ((0, 1, 3), (1, 2, 4), (2, 0, 5)),
}


class MeshError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Shape functions on the reference element
# ---------------------------------------------------------------------------

def _lag1d(x):
    """1D quadratic Lagrange basis at nodes -1, 0, +1: values, d, d2."""
    n = np.array([0.5 * x * (x - 1.0), 1.0 - x * x, 0.5 * x * (x + 1.0)])
    d = np.array([x - 0.5, -2.0 * x, x + 0.5])
    d2 = np.array([1.0, -2.0, 1.0])
    return n, d, d2


# Q9 node -> (index into 1D basis along xi, along eta)
_Q9_IJ = [(0, 0), (2, 0), (2, 2), (0, 2), (1, 0), (2, 1), (1, 2), (0, 1), (1, 1)]


def shape_q9(xi, eta):
    """Shape values, reference gradients and second derivatives for Q9.

    Returns (N (9,), dN (2,9), d2N (3,9)); second-derivative rows are
    ordered (xi,xi), (eta,eta), (xi,eta).
    """
    nx, dx, d2x = _lag1d(xi)
    ny, dy, d2y = _lag1d(eta)
    N = np.empty(9)
    dN = np.empty((2, 9))
    d2N = np.empty((3, 9))
    for a, (i, j) in enumerate(_Q9_IJ):
        N[a] = nx[i] * ny[j]
        dN[0, a] = dx[i] * ny[j]
        dN[1, a] = nx[i] * dy[j]
        d2N[0, a] = d2x[i] * ny[j]
        d2N[1, a] = nx[i] * d2y[j]
        d2N[2, a] = dx[i] * dy[j]
    return N, dN, d2N


def shape_t6(xi, eta):
    """Shape values, gradients and second derivatives for T6."""
    l1 = 1.0 - xi - eta
    l2, l3 = xi, eta
    N = np.array(
        [
            l1 * (2 * l1 - 1),
            l2 * (2 * l2 - 1),
            l3 * (2 * l3 - 1),
            4 * l1 * l2,
            4 * l2 * l3,
            4 * l3 * l1,
        ]
    )
    dN = np.array(
        [
            [1 - 4 * l1, 4 * l2 - 1, 0.0, 4 * (l1 - l2), 4 * l3, -4 * l3],
            [1 - 4 * l1, 0.0, 4 * l3 - 1, -4 * l2, 4 * l2, 4 * (l1 - l3)],
        ]
    )
    d2N = np.array(
        [
            [4.0, 4.0, 0.0, -8.0, 0.0, 0.0],
            [4.0, 0.0, 4.0, 0.0, 0.0, -8.0],
            [4.0, 0.0, 0.0, -4.0, 4.0, -4.0],
        ]
    )
    return N, dN, d2N


def shape_l3(xi):
    """Shape values and reference derivative for the 3-node line."""
    N = np.array([0.5 * xi * (xi - 1.0), 0.5 * xi * (xi + 1.0), 1.0 - xi * xi])
    dN = np.array([xi - 0.5, xi + 0.5, -2.0 * xi])
    return N, dN


def shape_at(kind, pt):
    if kind == Q9:
        return shape_q9(pt[0], pt[1])
    if kind == T6:
        return shape_t6(pt[0], pt[1])
    raise MeshError(f"unknown element kind {kind!r}")


# ---------------------------------------------------------------------------
# Quadrature rules (exact for polynomial degree >= 4 on the reference element)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray  # (q, dim)
    weights: np.ndarray  # (q,)


def _gauss_1d(n=3):
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


@lru_cache(maxsize=None)
def quadrature(kind) -> QuadratureRule:
    if kind == Q9:
        x, w = _gauss_1d(3)
        pts = np.array([(a, b) for b in x for a in x])
        wts = np.array([wb * wa for wb in w for wa in w])
        return QuadratureRule(pts, wts)
    if kind == T6:
        # Degree-5 symmetric rule, 7 points; weights sum to the area 1/2.
        a1, w1 = 0.059715871789770, 0.132394152788506
        b1 = 0.470142064105115
        a2, w2 = 0.797426985353087, 0.125939180544827
        b2 = 0.101286507323456
        pts = np.array(
            [
                (1 / 3, 1 / 3),
                (a1, b1), (b1, a1), (b1, b1),
                (a2, b2), (b2, a2), (b2, b2),
            ]
        )
        wts = 0.5 * np.array([0.225, w1, w1, w1, w2, w2, w2])
        return QuadratureRule(pts, wts)
    if kind == L3:
        x, w = _gauss_1d(3)
        return QuadratureRule(x.reshape(-1, 1), w.copy())
    raise MeshError(f"no quadrature for kind {kind!r}")


# ---------------------------------------------------------------------------
# Point-wise isoparametric evaluation
# ---------------------------------------------------------------------------

@dataclass
class ShapeEval:
    """Shape data at one integration point of an area element."""

    N: np.ndarray  # (n,)
    dNdx: np.ndarray  # (2, n) spatial gradients
    det_j: float
    B_u: np.ndarray  # (3, 2n) strain-displacement map, Voigt (xx, yy, xy)
    B_ustar: np.ndarray  # (2, 2n) maps u -> grad(eps_xx + eps_yy)


def _second_derivatives(J, dNdx, d2N_ref, coords):
    """Spatial second derivatives (3, n) in rows (xx, yy, xy)."""
    G = coords.T @ d2N_ref.T  # (2, 3): d2 x_i / dxi_a dxi_b
    A = d2N_ref - np.einsum("in,ic->cn", dNdx, G)
    J00, J01, J10, J11 = J[0, 0], J[0, 1], J[1, 0], J[1, 1]
    T = np.array(
        [
            [J00 * J00, J10 * J10, 2 * J00 * J10],
            [J01 * J01, J11 * J11, 2 * J01 * J11],
            [J00 * J01, J10 * J11, J00 * J11 + J01 * J10],
        ]
    )
    return np.linalg.solve(T, A)


def shape_eval(coords, kind, local_pt, elem_id=-1) -> ShapeEval:
    """Evaluate shape data of one element at one reference point.

    Parameters
    ----------
    coords : (n, 2) nodal coordinates of the element.
    kind : "q9" or "t6".
    local_pt : reference coordinates (xi, eta).
    """
    N, dN, d2N = shape_at(kind, local_pt)
    J = coords.T @ dN.T  # J[i, j] = d x_i / d xi_j
    det = J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
    if det <= 0.0:
        raise MeshError(
            f"singular or inverted Jacobian (det={det:.3e}) in element "
            f"{elem_id} at local point {tuple(local_pt)}"
        )
    inv = np.array([[J[1, 1], -J[0, 1]], [-J[1, 0], J[0, 0]]]) / det
    dNdx = inv.T @ dN
    n = len(N)
    B = np.zeros((3, 2 * n))
    B[0, 0::2] = dNdx[0]
    B[1, 1::2] = dNdx[1]
    B[2, 0::2] = dNdx[1]
    B[2, 1::2] = dNdx[0]
    d2 = _second_derivatives(J, dNdx, d2N, coords)
    Bs = np.zeros((2, 2 * n))
    Bs[0, 0::2] = d2[0]  # d2N/dx2
    Bs[0, 1::2] = d2[2]  # d2N/dxdy
    Bs[1, 0::2] = d2[2]
    Bs[1, 1::2] = d2[1]
    return ShapeEval(N=N, dNdx=dNdx, det_j=det, B_u=B, B_ustar=Bs)


# ---------------------------------------------------------------------------
# Mesh container
# ---------------------------------------------------------------------------

@dataclass
class Mesh:
    """Quadratic 2D mesh with element regions and named boundary groups.

    ``quads``/``tris`` hold connectivity in VTK order; ``boundaries`` maps a
    group name to an (S, 3) array of line segments (end, end, mid).
    """

    nodes: np.ndarray
    quads: np.ndarray
    quad_region: np.ndarray
    tris: np.ndarray
    tri_region: np.ndarray
    boundaries: dict = field(default_factory=dict)

    METAL = 0
    ELEC = 1

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=float)
        self.quads = np.asarray(self.quads, dtype=np.int64).reshape(-1, 9)
        self.tris = np.asarray(self.tris, dtype=np.int64).reshape(-1, 6)
        self.quad_region = np.asarray(self.quad_region, dtype=np.int8)
        self.tri_region = np.asarray(self.tri_region, dtype=np.int8)
        self.boundaries = {
            k: np.asarray(v, dtype=np.int64).reshape(-1, 3)
            for k, v in self.boundaries.items()
        }
        self._cache = {}

    # -- basic queries ------------------------------------------------
    @property
    def n_nodes(self):
        return self.nodes.shape[0]

    @property
    def n_elements(self):
        return self.quads.shape[0] + self.tris.shape[0]

    def blocks(self, region=None):
        """Yield (kind, connectivity, region) element blocks, filtered."""
        for kind, conn, reg in ((Q9, self.quads, self.quad_region),
                                (T6, self.tris, self.tri_region)):
            if conn.shape[0] == 0:
                continue
            if region is None:
                yield kind, conn, reg
            else:
                sel = reg == region
                if sel.any():
                    yield kind, conn[sel], reg[sel]

    def node_touches(self, region):
        """Boolean mask of nodes referenced by elements of a region."""
        mask = np.zeros(self.n_nodes, dtype=bool)
        for _, conn, _ in self.blocks(region):
            mask[conn.ravel()] = True
        return mask

    def validate(self):
        """Check connectivity ranges, region tags and Jacobian positivity."""
        for kind, conn, reg in self.blocks():
            if conn.size and (conn.min() < 0 or conn.max() >= self.n_nodes):
                raise MeshError("element references missing node")
            if not np.isin(reg, (self.METAL, self.ELEC)).all():
                raise MeshError("unknown element region tag")
        for name, segs in self.boundaries.items():
            if segs.size and (segs.min() < 0 or segs.max() >= self.n_nodes):
                raise MeshError(f"boundary group {name!r} references missing node")
        for kind, conn, _ in self.blocks():
            self.element_data(kind, conn)  # raises on det(J) <= 0
        return self

    # -- batched element data ------------------------------------------
    def element_data(self, kind, conn):
        """Precompute batched shape data for an element block.

        Returns a dict with N (q, n), dNdx (E, q, 2, n), wdet (E, q),
        ipx (E, q, 2) and d2 (E, q, 3, n) spatial second derivatives.
        """
        key = (kind, conn.tobytes())
        if key in self._cache:
            return self._cache[key]
        rule = quadrature(kind)
        q = len(rule.weights)
        n = N_NODES[kind]
        N = np.empty((q, n))
        dNr = np.empty((q, 2, n))
        d2r = np.empty((q, 3, n))
        for i, pt in enumerate(rule.points):
            N[i], dNr[i], d2r[i] = shape_at(kind, pt)
        X = self.nodes[conn]  # (E, n, 2)
        J = np.einsum("eni,qjn->eqij", X, dNr)
        det = J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]
        if (det <= 0).any():
            e, qq = np.argwhere(det <= 0)[0]
            raise MeshError(
                f"singular or inverted Jacobian in {kind} element {e} "
                f"(block-local) at integration point {qq}"
            )
        inv = np.empty_like(J)
        inv[..., 0, 0] = J[..., 1, 1]
        inv[..., 1, 1] = J[..., 0, 0]
        inv[..., 0, 1] = -J[..., 0, 1]
        inv[..., 1, 0] = -J[..., 1, 0]
        inv /= det[..., None, None]
        dNdx = np.einsum("eqji,qjn->eqin", inv, dNr)
        wdet = det * rule.weights[None, :]
        ipx = np.einsum("qn,eni->eqi", N, X)
        # second derivatives
        G = np.einsum("eni,qcn->eqic", X, d2r)  # (E, q, 2, 3)
        A = d2r[None] - np.einsum("eqin,eqic->eqcn", dNdx, G)
        J00, J01 = J[..., 0, 0], J[..., 0, 1]
        J10, J11 = J[..., 1, 0], J[..., 1, 1]
        T = np.empty(J.shape[:2] + (3, 3))
        T[..., 0, 0], T[..., 0, 1], T[..., 0, 2] = J00 ** 2, J10 ** 2, 2 * J00 * J10
        T[..., 1, 0], T[..., 1, 1], T[..., 1, 2] = J01 ** 2, J11 ** 2, 2 * J01 * J11
        T[..., 2, 0], T[..., 2, 1] = J00 * J01, J10 * J11
        T[..., 2, 2] = J00 * J11 + J01 * J10
        d2 = np.linalg.solve(T, A)
        data = {"N": N, "dNdx": dNdx, "wdet": wdet, "ipx": ipx, "d2": d2,
                "conn": conn, "kind": kind}
        self._cache[key] = data
        return data

    def segment_data(self, segs):
        """Batched shape data for line segments: N (q, 3), wdet (S, q)."""
        key = (L3, segs.tobytes())
        if key in self._cache:
            return self._cache[key]
        rule = quadrature(L3)
        q = len(rule.weights)
        N = np.empty((q, 3))
        dN = np.empty((q, 3))
        for i, pt in enumerate(rule.points):
            N[i], dN[i] = shape_l3(pt[0])
        X = self.nodes[segs]  # (S, 3, 2)
        tang = np.einsum("sni,qn->sqi", X, dN)  # (S, q, 2)
        jac = np.linalg.norm(tang, axis=-1)
        wdet = jac * rule.weights[None, :]
        data = {"N": N, "wdet": wdet, "segs": segs,
                "ipx": np.einsum("qn,sni->sqi", N, X)}
        self._cache[key] = data
        return data

    def boundary_length(self, name):
        d = self.segment_data(self.boundaries[name])
        return float(d["wdet"].sum())


# ---------------------------------------------------------------------------
# Structured generation
# ---------------------------------------------------------------------------

def graded_edges(breaks, sizes):
    """Element edge coordinates over intervals with target element sizes."""
    breaks = np.asarray(breaks, dtype=float)
    out = [breaks[0]]
    for a, b, s in zip(breaks[:-1], breaks[1:], sizes):
        n = max(1, int(round((b - a) / s)))
        out.extend(np.linspace(a, b, n + 1)[1:])
    return np.array(out)


def rect_grid(x_edges, y_edges, region_of=None) -> Mesh:
    """Structured Q9 mesh on a tensor grid of element edges.

    ``region_of(cx, cy)`` maps an element centroid to ``Mesh.METAL`` or
    ``Mesh.ELEC`` (default: all metal).  Boundary groups "left", "right",
    "bottom", "top" are created, plus "interface" for edges shared between
    metal and electrolyte elements, and per-region outer-edge groups
    ("left_metal", "left_elec", ... where nonempty).
    """
    x_edges = np.asarray(x_edges, dtype=float)
    y_edges = np.asarray(y_edges, dtype=float)
    nex, ney = len(x_edges) - 1, len(y_edges) - 1
    xs = np.empty(2 * nex + 1)
    xs[0::2] = x_edges
    xs[1::2] = 0.5 * (x_edges[:-1] + x_edges[1:])
    ys = np.empty(2 * ney + 1)
    ys[0::2] = y_edges
    ys[1::2] = 0.5 * (y_edges[:-1] + y_edges[1:])
    nxn = len(xs)
    XX, YY = np.meshgrid(xs, ys, indexing="xy")
    nodes = np.column_stack([XX.ravel(), YY.ravel()])

    def nid(ix, iy):
        return iy * nxn + ix

    quads = np.empty((nex * ney, 9), dtype=np.int64)
    region = np.zeros(nex * ney, dtype=np.int8)
    e = 0
    for j in range(ney):
        for i in range(nex):
            bx, by = 2 * i, 2 * j
            quads[e] = [
                nid(bx, by), nid(bx + 2, by), nid(bx + 2, by + 2), nid(bx, by + 2),
                nid(bx + 1, by), nid(bx + 2, by + 1), nid(bx + 1, by + 2),
                nid(bx, by + 1), nid(bx + 1, by + 1),
            ]
            if region_of is not None:
                cx = 0.5 * (x_edges[i] + x_edges[i + 1])
                cy = 0.5 * (y_edges[j] + y_edges[j + 1])
                region[e] = region_of(cx, cy)
            e += 1

    def eidx(i, j):
        return j * nex + i

    groups = {"left": [], "right": [], "bottom": [], "top": [], "interface": []}
    per_region = {}

    def add_outer(side, seg, reg):
        groups[side].append(seg)
        key = f"{side}_{'metal' if reg == Mesh.METAL else 'elec'}"
        per_region.setdefault(key, []).append(seg)

    for j in range(ney):
        add_outer("left", [nid(0, 2 * j), nid(0, 2 * j + 2), nid(0, 2 * j + 1)],
                  region[eidx(0, j)])
        add_outer("right",
                  [nid(2 * nex, 2 * j), nid(2 * nex, 2 * j + 2), nid(2 * nex, 2 * j + 1)],
                  region[eidx(nex - 1, j)])
    for i in range(nex):
        add_outer("bottom", [nid(2 * i, 0), nid(2 * i + 2, 0), nid(2 * i + 1, 0)],
                  region[eidx(i, 0)])
        add_outer("top",
                  [nid(2 * i, 2 * ney), nid(2 * i + 2, 2 * ney), nid(2 * i + 1, 2 * ney)],
                  region[eidx(i, ney - 1)])
    # interfaces between horizontally / vertically adjacent elements
    for j in range(ney):
        for i in range(nex - 1):
            if region[eidx(i, j)] != region[eidx(i + 1, j)]:
                bx = 2 * (i + 1)
                groups["interface"].append(
                    [nid(bx, 2 * j), nid(bx, 2 * j + 2), nid(bx, 2 * j + 1)])
    for j in range(ney - 1):
        for i in range(nex):
            if region[eidx(i, j)] != region[eidx(i, j + 1)]:
                by = 2 * (j + 1)
                groups["interface"].append(
                    [nid(2 * i, by), nid(2 * i + 2, by), nid(2 * i + 1, by)])
    groups.update(per_region)
    groups = {k: np.asarray(v, dtype=np.int64).reshape(-1, 3)
              for k, v in groups.items() if len(v)}
    return Mesh(nodes=nodes, quads=quads, quad_region=region,
                tris=np.empty((0, 6), dtype=np.int64),
                tri_region=np.empty(0, dtype=np.int8), boundaries=groups)


def split_quads_to_tris(mesh: Mesh, quad_ids) -> Mesh:
    """Convert selected Q9 quads into pairs of T6 triangles (reusing nodes)."""
    quad_ids = np.asarray(sorted(set(int(i) for i in quad_ids)))
    keep = np.ones(mesh.quads.shape[0], dtype=bool)
    keep[quad_ids] = False
    new_tris = []
    new_reg = []
    for qi in quad_ids:
        a, b, c, d, mab, mbc, mcd, mda, o = mesh.quads[qi]
        new_tris.append([a, b, c, mab, mbc, o])
        new_tris.append([a, c, d, o, mcd, mda])
        new_reg.extend([mesh.quad_region[qi]] * 2)
    tris = np.vstack([mesh.tris.reshape(-1, 6), np.asarray(new_tris, dtype=np.int64)])
    tri_region = np.concatenate([mesh.tri_region, np.asarray(new_reg, dtype=np.int8)])
    return Mesh(nodes=mesh.nodes, quads=mesh.quads[keep],
                quad_region=mesh.quad_region[keep], tris=tris,
                tri_region=tri_region, boundaries=mesh.boundaries)


# ---------------------------------------------------------------------------
# Plain-text mesh file format
# ---------------------------------------------------------------------------

def write_mesh(mesh: Mesh, path):
    """Write the plain-text node/element/group format (see README)."""
    lines = ["# ecmfrac mesh", "NODES"]
    for i, (x, y) in enumerate(mesh.nodes):
        lines.append(f"{i} {x:.17g} {y:.17g}")
    lines.append("ELEMENTS")
    eid = 0
    for kind, conn, reg in ((Q9, mesh.quads, mesh.quad_region),
                            (T6, mesh.tris, mesh.tri_region)):
        for c, r in zip(conn, reg):
            tag = "metal" if r == Mesh.METAL else "electrolyte"
            lines.append(f"{eid} {kind} {' '.join(map(str, c))} {tag}")
            eid += 1
    for name, segs in mesh.boundaries.items():
        lines.append(f"BOUNDARY {name}")
        for sid, s in enumerate(segs):
            lines.append(f"{sid} l3 {' '.join(map(str, s))}")
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def read_mesh(path) -> Mesh:
    """Read the plain-text mesh format written by :func:`write_mesh`."""
    nodes = []
    quads, qreg, tris, treg = [], [], [], []
    boundaries = {}
    mode, current = None, None
    with open(path) as f:
        for raw in f:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if line == "NODES":
                mode = "nodes"
                continue
            if line == "ELEMENTS":
                mode = "elems"
                continue
            if line.startswith("BOUNDARY"):
                mode = "bnd"
                current = line.split(None, 1)[1].strip()
                boundaries[current] = []
                continue
            parts = line.split()
            if mode == "nodes":
                nodes.append((float(parts[1]), float(parts[2])))
            elif mode == "elems":
                kind = parts[1]
                reg = parts[-1]
                conn = list(map(int, parts[2:-1]))
                rid = Mesh.METAL if reg == "metal" else Mesh.ELEC
                if kind == Q9:
                    quads.append(conn)
                    qreg.append(rid)
                elif kind == T6:
                    tris.append(conn)
                    treg.append(rid)
                else:
                    raise MeshError(f"unknown element kind {kind!r} in {path}")
            elif mode == "bnd":
                boundaries[current].append(list(map(int, parts[2:5])))
            else:
                raise MeshError(f"unexpected line in {path}: {line!r}")
    return Mesh(
        nodes=np.asarray(nodes), quads=np.asarray(quads, dtype=np.int64).reshape(-1, 9),
        quad_region=np.asarray(qreg, dtype=np.int8),
        tris=np.asarray(tris, dtype=np.int64).reshape(-1, 6),
        tri_region=np.asarray(treg, dtype=np.int8),
        boundaries={k: np.asarray(v, dtype=np.int64).reshape(-1, 3)
                    for k, v in boundaries.items()},
    ).validate()


# ---------------------------------------------------------------------------
# DOF numbering
# ---------------------------------------------------------------------------

FIELDS = ("ux", "uy", "phi", "CL", "theta",
          "C_H", "C_OH", "C_Na", "C_Cl", "C_Fe", "C_FeOH", "pot")
SPECIES_FIELDS = ("C_H", "C_OH", "C_Na", "C_Cl", "C_Fe", "C_FeOH")
CHEM_FIELDS = ("CL", "theta") + SPECIES_FIELDS + ("pot",)


@dataclass
class Block:
    """Global equation numbering of a set of fields over active nodes."""

    fields: tuple
    eq: dict  # field -> (n_nodes,) int array, -1 where inactive
    ndof: int

    def pack(self, state: dict) -> np.ndarray:
        x = np.zeros(self.ndof)
        for f in self.fields:
            m = self.eq[f] >= 0
            x[self.eq[f][m]] = state[f][m]
        return x

    def unpack(self, x: np.ndarray, state: dict):
        for f in self.fields:
            m = self.eq[f] >= 0
            state[f][m] = x[self.eq[f][m]]


class DofMap:
    """Field activity masks and per-solve equation numbering.

    Displacements, phase field, lattice hydrogen and coverage live on metal
    nodes; electrolyte potential and ionic species live on every node (the
    crack electrolyte is smeared over the metal).
    """

    def __init__(self, mesh: Mesh):
        self.mesh = mesh
        metal = mesh.node_touches(Mesh.METAL)
        everywhere = np.ones(mesh.n_nodes, dtype=bool)
        self.active = {
            "ux": metal, "uy": metal, "phi": metal, "CL": metal, "theta": metal,
            "pot": everywhere,
        }
        for s in SPECIES_FIELDS:
            self.active[s] = everywhere
        self._blocks = {}

    def counts(self):
        return {f: int(m.sum()) for f, m in self.active.items()}

    def block(self, fields) -> Block:
        fields = tuple(fields)
        if fields in self._blocks:
            return self._blocks[fields]
        eq = {}
        if fields == ("ux", "uy"):
            nodes = np.flatnonzero(self.active["ux"])
            e = np.full(self.mesh.n_nodes, -1, dtype=np.int64)
            e[nodes] = 2 * np.arange(len(nodes))
            eq["ux"] = e
            e2 = np.full(self.mesh.n_nodes, -1, dtype=np.int64)
            e2[nodes] = 2 * np.arange(len(nodes)) + 1
            eq["uy"] = e2
            ndof = 2 * len(nodes)
        else:
            off = 0
            for f in fields:
                nodes = np.flatnonzero(self.active[f])
                e = np.full(self.mesh.n_nodes, -1, dtype=np.int64)
                e[nodes] = off + np.arange(len(nodes))
                eq[f] = e
                off += len(nodes)
            ndof = off
        b = Block(fields=fields, eq=eq, ndof=ndof)
        self._blocks[fields] = b
        return b

    def mech(self) -> Block:
        return self.block(("ux", "uy"))

    def pf(self) -> Block:
        return self.block(("phi",))

    def chem(self) -> Block:
        return self.block(CHEM_FIELDS)


def build_dof_map(mesh: Mesh) -> DofMap:
    """Construct the field-activity DOF map for a validated mesh."""
    for name, segs in mesh.boundaries.items():
        if segs.size and segs.max() >= mesh.n_nodes:
            raise MeshError(f"boundary group {name!r} references missing nodes")
    return DofMap(mesh)
