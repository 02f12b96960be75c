"""Smeared representation of electrolyte inside phase-field cracks.

Two interchangeable distributor models map the crack electrolyte onto the
bulk mesh: a distributed-diffusion form (phi^m weights, opening-height
independent) and a physics-based form whose capacity and tangential
diffusion scale with the reconstructed crack opening height h while the
normal direction is flooded so no gradients survive across the crack.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fracture import MetalBlocks, crack_density, interp_grad, interp_nodal
from .params import DISTRIBUTED_DIFFUSION, PHYSICS_BASED, CrackModelParams


@dataclass
class DistributorSet:
    """Per-integration-point distributor fields for one element block.

    beta_c: capacity weight (m for physics-based, dimensionless for
    distributed diffusion); T_d: assembled 2x2 diffusion weight tensor in
    global coordinates (R^T beta_d R); beta_s: surface weight, equal to
    2*gamma (two crack faces).
    """

    beta_c: np.ndarray  # (E, q)
    T_d: np.ndarray  # (E, q, 2, 2)
    beta_s: np.ndarray  # (E, q)


def crack_frame(grad_phi, tol=1e-12):
    """Orthonormal (tangent, normal) frame from a phase-field gradient.

    Returns (R, degenerate): R rows are the crack tangent and normal; for
    |grad phi| <= tol the frame is the identity and flagged degenerate.
    """
    g = np.asarray(grad_phi, dtype=float)
    norm = np.linalg.norm(g)
    if norm <= tol:
        return np.eye(2), True
    n = g / norm
    t = np.array([-n[1], n[0]])
    return np.array([t, n]), False


def _frames_batch(grad_phi, tol):
    """Vectorized tangent/normal unit vectors; flags degenerate points."""
    norm = np.linalg.norm(grad_phi, axis=-1)
    degen = norm <= tol
    safe = np.maximum(norm, 1e-300)
    n = grad_phi / safe[..., None]
    t = np.stack([-n[..., 1], n[..., 0]], axis=-1)
    return t, n, degen


def _tensor(bt, bn, t, n, degen):
    """Assemble beta_t * t@t + beta_n * n@n; isotropic beta_t if degenerate."""
    T = (bt[..., None, None] * np.einsum("...i,...j->...ij", t, t)
         + bn[..., None, None] * np.einsum("...i,...j->...ij", n, n))
    if degen.any():
        iso = bt[..., None, None] * np.eye(2)
        T = np.where(degen[..., None, None], iso, T)
    return T


def distributors_distributed_diffusion(phi, grad_phi, ell, m_exp, D2_ratio,
                                       activity_tol=1e-6):
    """Distributed-diffusion distributors (independent of opening height)."""
    phi = np.clip(np.asarray(phi, dtype=float), 0.0, 1.0)
    grad_phi = np.asarray(grad_phi, dtype=float)
    gamma = crack_density(phi, grad_phi, ell)
    active = gamma * ell > activity_tol
    beta_c = np.where(active, phi ** m_exp, 0.0)
    t, n, degen = _frames_batch(grad_phi, tol=1e-12)
    bt = np.where(active, phi ** m_exp * D2_ratio, 0.0)
    bn = np.zeros_like(bt)
    T_d = _tensor(bt, bn, t, n, degen)
    beta_s = np.where(active, 2.0 * gamma, 0.0)
    return DistributorSet(beta_c=beta_c, T_d=T_d, beta_s=beta_s)


def distributors_physics_based(phi, grad_phi, h, ell, D_inf,
                               activity_tol=1e-6):
    """Physics-based distributors scaling with the opening height h (m)."""
    phi = np.clip(np.asarray(phi, dtype=float), 0.0, 1.0)
    grad_phi = np.asarray(grad_phi, dtype=float)
    h = np.maximum(np.asarray(h, dtype=float), 0.0)
    gamma = crack_density(phi, grad_phi, ell)
    active = gamma * ell > activity_tol
    beta_c = np.where(active, gamma * h, 0.0)
    t, n, degen = _frames_batch(grad_phi, tol=1e-12)
    bt = np.where(active, gamma * h, 0.0)
    bn = np.where(active, gamma * D_inf, 0.0)
    T_d = _tensor(bt, bn, t, n, degen)
    beta_s = np.where(active, 2.0 * gamma, 0.0)
    return DistributorSet(beta_c=beta_c, T_d=T_d, beta_s=beta_s)


def compute_distributors(metal: MetalBlocks, phi_nodal, h_field, params,
                         ell) -> list:
    """DistributorSet per metal block from nodal phi and cached h."""
    cm: CrackModelParams = params.crack_model
    out = []
    for block, h in zip(metal.data, h_field):
        p = interp_nodal(block, phi_nodal)
        g = interp_grad(block, phi_nodal)
        if cm.model == PHYSICS_BASED:
            out.append(distributors_physics_based(
                p, g, h, ell, cm.d_inf_for(ell), cm.activity_tol))
        elif cm.model == DISTRIBUTED_DIFFUSION:
            out.append(distributors_distributed_diffusion(
                p, g, ell, cm.m_exp, cm.D2_ratio, cm.activity_tol))
        else:
            raise ValueError(f"unknown crack electrolyte model {cm.model!r}")
    return out


# ---------------------------------------------------------------------------
# Opening-height reconstruction
# ---------------------------------------------------------------------------

def compute_opening_heights(mesh, metal: MetalBlocks, ux, uy, phi_nodal, ell,
                            activity_tol=1e-6, line_extent=5.0,
                            line_step=0.1):
    """Crack opening height h at every metal integration point.

    For each active point (gamma*ell above threshold) a line along the
    crack normal n = grad phi / |grad phi| is sampled over +-line_extent
    * ell with step line_step * ell; h = -integral of u . grad phi along
    it, clamped to >= 0.  Displacements and phase-field gradients are
    interpolated from integration-point data by linear scattered
    interpolation with a nearest-point fallback outside the hull.
    """
    from scipy.interpolate import LinearNDInterpolator, NearestNDInterpolator

    # gather integration point sites and data over all metal blocks
    sites, u_ip, g_ip = [], [], []
    per_block = []
    for block in metal.data:
        p = interp_nodal(block, phi_nodal)
        g = interp_grad(block, phi_nodal)
        gamma = crack_density(p, g, ell)
        act = gamma * ell > activity_tol
        per_block.append((p, g, act))
        sites.append(block["ipx"].reshape(-1, 2))
        uu = np.stack([interp_nodal(block, ux), interp_nodal(block, uy)],
                      axis=-1)
        u_ip.append(uu.reshape(-1, 2))
        g_ip.append(g.reshape(-1, 2))
    sites = np.vstack(sites)
    data = np.hstack([np.vstack(u_ip), np.vstack(g_ip)])  # (P, 4)

    heights = [np.zeros(b["wdet"].shape) for b in metal.data]
    n_active = sum(act.sum() for _, _, act in per_block)
    if n_active == 0:
        return heights

    lin = LinearNDInterpolator(sites, data)
    near = NearestNDInterpolator(sites, data)

    ts = np.arange(-line_extent, line_extent + 0.5 * line_step,
                   line_step) * ell
    nt = len(ts)
    pts = []
    for block, (p, g, act) in zip(metal.data, per_block):
        if not act.any():
            continue
        ipx = block["ipx"][act]  # (A, 2)
        gact = g[act]
        norm = np.linalg.norm(gact, axis=-1)
        n_hat = gact / np.maximum(norm, 1e-300)[:, None]
        # degenerate gradient: no usable normal, sample in place
        n_hat[norm <= 1e-300] = 0.0
        pts.append(ipx[:, None, :] + ts[None, :, None] * n_hat[:, None, :])
    pts = np.vstack(pts)  # (A_total, nt, 2)
    flat = pts.reshape(-1, 2)
    vals = lin(flat)
    missing = np.isnan(vals[:, 0])
    if missing.any():
        vals[missing] = near(flat[missing])
    vals = vals.reshape(-1, nt, 4)
    integrand = -np.einsum("atk,atk->at", vals[..., 0:2], vals[..., 2:4])
    h_act = np.trapezoid(integrand, dx=line_step * ell, axis=1)
    h_act = np.maximum(h_act, 0.0)

    ofs = 0
    for heights_b, (p, g, act) in zip(heights, per_block):
        na = int(act.sum())
        if na:
            heights_b[act] = h_act[ofs:ofs + na]
            ofs += na
    return heights
