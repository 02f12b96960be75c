"""Gauss and lumped (nodal) integration of reaction and transfer terms.

Stiff interfacial reactions assembled with consistent Gauss quadrature
couple neighbouring nodes and produce spurious oscillations; the lumped
scheme first integrates consistent nodal weights (integrals of the shape
functions, optionally distributor-weighted) and then evaluates every
reaction node-by-node, which confines the couplings to co-located DOFs.
Only reaction/transfer terms are lumped; capacity and diffusion operators
keep their consistent form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fracture import MetalBlocks
from .mesh import L3, quadrature, shape_l3


@dataclass
class LumpedWeights:
    """Per-node lumped weights for the four reaction-term families.

    L_ss: smeared crack surface (beta_s-weighted area integral; beta_s
    already counts both crack faces); L_sv: smeared crack volume (beta_c
    weighted); L_ev: free-electrolyte volume; L_eint: explicit
    metal-electrolyte interface lines.
    """

    L_ss: np.ndarray
    L_sv: np.ndarray
    L_ev: np.ndarray
    L_eint: np.ndarray

    def reactive_smeared(self, tol=0.0):
        return np.flatnonzero(self.L_ss > tol)

    def reactive_interface(self, tol=0.0):
        return np.flatnonzero(self.L_eint > tol)


def shape_integrals(block, weight_ip=None):
    """Sum of w * N per node of one element block, scattered to (n_nodes,)."""
    w = block["wdet"] if weight_ip is None else block["wdet"] * weight_ip
    return np.einsum("eq,qn->en", w, block["N"])


def compute_lumped_weights(n_nodes, metal: MetalBlocks, distributors,
                           elec_blocks, iface_data) -> LumpedWeights:
    """Accumulate all nodal weights by Gauss quadrature of shape functions.

    ``distributors`` is the per-metal-block DistributorSet list (or None
    when no crack electrolyte is active); ``elec_blocks`` a list of
    element_data dicts for the free electrolyte; ``iface_data`` the
    segment_data of the reactive interface lines (or None).
    """
    L_ss = np.zeros(n_nodes)
    L_sv = np.zeros(n_nodes)
    L_ev = np.zeros(n_nodes)
    L_eint = np.zeros(n_nodes)
    if distributors is not None:
        for block, dist in zip(metal.data, distributors):
            np.add.at(L_ss, block["conn"].ravel(),
                      shape_integrals(block, dist.beta_s).ravel())
            np.add.at(L_sv, block["conn"].ravel(),
                      shape_integrals(block, dist.beta_c).ravel())
    for block in elec_blocks:
        np.add.at(L_ev, block["conn"].ravel(), shape_integrals(block).ravel())
    if iface_data is not None:
        contrib = np.einsum("sq,qn->sn", iface_data["wdet"], iface_data["N"])
        np.add.at(L_eint, iface_data["segs"].ravel(), contrib.ravel())
    return LumpedWeights(L_ss=L_ss, L_sv=L_sv, L_ev=L_ev, L_eint=L_eint)


# ---------------------------------------------------------------------------
# Generic single-block Gauss/lumped reaction assembly (tests and demo)
# ---------------------------------------------------------------------------

def gauss_reaction_assembly(N, wdet, weight_ip, source_fn, nodal, fields):
    """Consistent Gauss assembly of a reaction term on one element.

    N (q, n) shape values, wdet (q,) quadrature weights, weight_ip (q,)
    extra weighting (e.g. a surface distributor).  ``source_fn(**state)``
    returns {target_field: (value, {var: derivative})}; ``nodal`` maps
    field -> (n,) nodal values.  The term enters residuals as f -= w * N^T
    * value.  Returns (f: {field: (n,)}, K: {(ftgt, fvar): (n, n)}).
    """
    states = {k: N @ v for k, v in nodal.items()}
    out = source_fn(**states)
    w = wdet * weight_ip
    f = {}
    K = {}
    for tgt, (val, ders) in out.items():
        f[tgt] = -np.einsum("q,qi->i", w * val, N)
        for var, dv in ders.items():
            K[(tgt, var)] = K.get((tgt, var), 0.0) - np.einsum(
                "q,qi,qj->ij", w * dv, N, N)
    return f, K


def lumped_reaction_assembly(weights, source_fn, nodal):
    """Nodal (lumped) assembly of a reaction term.

    ``weights`` (n,) are the consistent nodal weights; reactions are
    evaluated from nodal states directly, so every tangent contribution
    couples only DOFs co-located at one node (diagonal blocks).
    Returns (f: {field: (n,)}, K: {(ftgt, fvar): (n,) diagonal}).
    """
    out = source_fn(**nodal)
    f = {}
    K = {}
    for tgt, (val, ders) in out.items():
        f[tgt] = -weights * val
        for var, dv in ders.items():
            K[(tgt, var)] = K.get((tgt, var), 0.0) - weights * dv
    return f, K


# ---------------------------------------------------------------------------
# Absorption demo on one quadratic line element
# ---------------------------------------------------------------------------

def absorption_demo_matrices(length=1.0, k_A=3.0, kp_A=3.0, N_L=1.0,
                             beta_s=1.0, C_L=None, theta=None):
    """Gauss vs lumped tangent of the absorption term on a line element.

    DOF ordering: [C_L at nodes 0..2, theta at nodes 0..2] with nodes
    (end, end, mid).  Returns a dict with the raw 6x6 matrices, the
    per-node weight-normalized pair (each node's rows divided by its
    lumped diagonal), and the lumped nodal weights.
    """
    rule = quadrature(L3)
    q = len(rule.weights)
    N = np.empty((q, 3))
    for i, pt in enumerate(rule.points):
        N[i], _ = shape_l3(pt[0])
    wdet = rule.weights * (length / 2.0)
    nodal = {
        "C_L": np.zeros(3) if C_L is None else np.asarray(C_L, dtype=float),
        "theta": np.zeros(3) if theta is None else np.asarray(theta, dtype=float),
    }

    def source(C_L, theta):
        # net absorption into the lattice, doubled for the two crack faces
        val = 2.0 * (k_A * (N_L - C_L) * theta - kp_A * C_L * (1.0 - theta))
        d = {"C_L": 2.0 * (-k_A * theta - kp_A * (1.0 - theta)),
             "theta": 2.0 * (k_A * (N_L - C_L) + kp_A * C_L)}
        # lattice gains what the surface loses
        return {"C_L": (val, d),
                "theta": (-val, {k: -v for k, v in d.items()})}

    _, Kg = gauss_reaction_assembly(N, wdet, np.full(q, beta_s), source,
                                    nodal, ("C_L", "theta"))
    weights = np.einsum("q,qn->n", wdet * beta_s, N)
    _, Kl = lumped_reaction_assembly(weights, source, nodal)

    def full(Kdict, diag):
        K = np.zeros((6, 6))
        idx = {"C_L": slice(0, 3), "theta": slice(3, 6)}
        for (tgt, var), block in Kdict.items():
            K[idx[tgt], idx[var]] = np.diag(block) if diag else block
        return K

    K_gauss = full(Kg, diag=False)
    K_lumped = full(Kl, diag=True)
    scale = np.tile(np.abs(np.diag(K_lumped)[:3]), 2)
    K_gauss_n = K_gauss / scale[:, None]
    K_lumped_n = K_lumped / scale[:, None]
    return {
        "gauss": K_gauss, "lumped": K_lumped,
        "gauss_normalized": K_gauss_n, "lumped_normalized": K_lumped_n,
        "weights": weights,
    }
