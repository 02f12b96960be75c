"""Residual and tangent assembly for the coupled electrochemical system.

Unknown block: lattice hydrogen C_L, surface coverage theta, six ionic
concentrations and the electrolyte potential.  The residual convention is

    f = capacity + transport - sources,

so production/influx terms enter negatively and Newton solves K dx = -f.
Capacity and diffusion use consistent Gauss integration; every reaction
and interface-transfer term is integrated with the lumped nodal scheme.
The regularization offset eps enters the tangent only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import electrolyte as echem
from . import hydrogen as hyd
from . import reactions as rx
from .fracture import MetalBlocks, element_u, interp_grad, interp_nodal
from .lumped import LumpedWeights, compute_lumped_weights
from .mesh import CHEM_FIELDS, SPECIES_FIELDS, Mesh
from .params import FARADAY, R_GAS
from .sparsetools import CooBuilder


@dataclass
class ChemBCs:
    """Dirichlet data for the electrochemical solve."""

    fixed: np.ndarray  # bool per chem equation
    values: np.ndarray  # prescribed values per chem equation


class ChemSystem:
    """Assembles the coupled electrochemical residual and tangent."""

    def __init__(self, mesh: Mesh, dofmap, params,
                 interface_groups=("interface",), flux_bcs=()):
        self.mesh = mesh
        self.dofmap = dofmap
        self.params = params
        self.chem = dofmap.block(CHEM_FIELDS)
        self.metal = MetalBlocks.from_mesh(mesh)
        self.elec_blocks = [mesh.element_data(kind, conn)
                            for kind, conn, _ in mesh.blocks(Mesh.ELEC)]
        segs = [mesh.boundaries[g] for g in interface_groups
                if g in mesh.boundaries and mesh.boundaries[g].size]
        self.iface = (mesh.segment_data(np.vstack(segs)) if segs else None)
        self.flux_bcs = tuple(flux_bcs)  # (group, field, value_into_domain)
        self.species = params.species

    # -- lumped weights -------------------------------------------------
    def lumped_weights(self, distributors) -> LumpedWeights:
        return compute_lumped_weights(self.mesh.n_nodes, self.metal,
                                      distributors, self.elec_blocks,
                                      self.iface)

    # -- assembly --------------------------------------------------------
    def assemble(self, state, state_old, dt, *, distributors, weights,
                 grad_sig_h, E_m, eps, with_tangent=True):
        """Build (f, K) for the current Newton iterate.

        state/state_old: field dicts of nodal arrays; distributors: per
        metal block DistributorSet; weights: LumpedWeights; grad_sig_h:
        per metal block (E, q, 2) hydrostatic stress gradients.
        """
        p = self.params
        chem = self.chem
        f = np.zeros(chem.ndof)
        bld = CooBuilder(chem.ndof) if with_tangent else None

        self._lattice_bulk(f, bld, state, state_old, dt, grad_sig_h, eps)
        self._coverage_capacity(f, bld, state, state_old, dt, distributors, eps)
        self._species_bulk(f, bld, state, state_old, dt, distributors, eps)
        self._electroneutrality(f, bld, state, distributors, eps)
        self._lumped_reactions(f, bld, state, weights, E_m)
        self._external_fluxes(f)
        K = bld.tocsr() if with_tangent else None
        return f, K

    # -- individual terms -------------------------------------------------
    def _lattice_bulk(self, f, bld, state, state_old, dt, grad_sig_h, eps):
        hp = self.params.hydrogen
        eq_all = self.chem.eq["CL"]
        for bi, block in enumerate(self.metal.data):
            conn = block["conn"]
            eq = eq_all[conn]
            N, dNdx, w = block["N"], block["dNdx"], block["wdet"]
            C = interp_nodal(block, state["CL"])
            C0 = interp_nodal(block, state_old["CL"])
            gC = interp_grad(block, state["CL"])
            cap = hyd.capacity_factor(C, hp)
            # capacity
            fe = np.einsum("eq,eq,qi->ei", w / dt * cap, C - C0, N)
            enh = hp.D_L / (1.0 - np.clip(C, None, 0.999999 * hp.N_L) / hp.N_L)
            fe += np.einsum("eq,eqa,eqai->ei", w * enh, gC, dNdx)
            gsh = grad_sig_h[bi]
            drift = hp.D_L * hp.V_H / (R_GAS * hp.T)
            fe -= drift * np.einsum("eq,eqa,eqai->ei", w * C, gsh, dNdx)
            np.add.at(f, eq.ravel(), fe.ravel())
            if bld is None:
                continue
            capd = hyd.capacity_factor_derivative(C, hp)
            coef = w / dt * (cap + capd * (C - C0))
            Ke = np.einsum("eq,qi,qj->eij", coef, N, N)
            Ke += np.einsum("eq,eqai,eqaj->eij", w * enh, dNdx, dNdx)
            enh2 = enh ** 2 / (hp.N_L * hp.D_L)
            Ke += np.einsum("eq,eqa,eqai,qj->eij",
                            w * hp.D_L * enh2, gC, dNdx, N)
            Ke -= drift * np.einsum("eq,eqa,eqai,qj->eij", w, gsh, dNdx, N)
            bld.add_blocks(eq, eq, Ke)

    def _coverage_capacity(self, f, bld, state, state_old, dt, distributors,
                           eps):
        sc = self.params.surface
        eq_all = self.chem.eq["theta"]
        dth = state["theta"] - state_old["theta"]
        for block, dist in zip(self.metal.data, distributors):
            conn = block["conn"]
            eq = eq_all[conn]
            N, w = block["N"], block["wdet"]
            d_ip = interp_nodal(block, dth)
            coef = w * dist.beta_s * sc.N_ads / dt
            fe = np.einsum("eq,eq,qi->ei", coef, d_ip, N)
            np.add.at(f, eq.ravel(), fe.ravel())
            if bld is not None:
                coef_t = w * (dist.beta_s + eps) * sc.N_ads / dt
                bld.add_blocks(eq, eq, np.einsum("eq,qi,qj->eij", coef_t, N, N))
        if self.iface is not None:
            segs = self.iface["segs"]
            eq = eq_all[segs]
            N, w = self.iface["N"], self.iface["wdet"]
            d_ip = np.einsum("qn,sn->sq", N, dth[segs])
            coef = w * sc.N_ads / dt
            fe = np.einsum("sq,sq,qi->si", coef, d_ip, N)
            np.add.at(f, eq.ravel(), fe.ravel())
            if bld is not None:
                bld.add_blocks(eq, eq, np.einsum("sq,qi,qj->sij", coef, N, N))

    def _species_bulk(self, f, bld, state, state_old, dt, distributors, eps):
        fRT = FARADAY / (R_GAS * self.params.surface.T)
        eqpot = self.chem.eq["pot"]
        eye = np.eye(2)
        # smeared crack electrolyte over the metal
        for block, dist in zip(self.metal.data, distributors):
            conn = block["conn"]
            N, dNdx, w = block["N"], block["dNdx"], block["wdet"]
            gpot = interp_grad(block, state["pot"])
            T = dist.T_d
            Teps = T + eps * eye if bld is not None else None
            m = np.einsum("eqab,eqb->eqa", T, gpot)  # T grad(pot)
            if bld is not None:
                m_eps = np.einsum("eqab,eqb->eqa", Teps, gpot)
                Mcap = np.einsum("eq,qi,qj->eij", w * (dist.beta_c + eps) / dt,
                                 N, N)
                Kdiff_geo = np.einsum("eq,eqai,eqab,eqbj->eij", w, dNdx, Teps,
                                      dNdx)
                Kmig_geo = np.einsum("eq,eqa,eqai,qj->eij", w, m_eps, dNdx, N)
            for sp in self.species:
                eq = self.chem.eq[sp.name][conn]
                C = interp_nodal(block, state[sp.name])
                C0 = interp_nodal(block, state_old[sp.name])
                gC = interp_grad(block, state[sp.name])
                fe = np.einsum("eq,eq,qi->ei", w * dist.beta_c / dt, C - C0, N)
                fe += sp.D * np.einsum("eq,eqab,eqb,eqai->ei", w, T, gC, dNdx)
                fac = sp.z * fRT * sp.D
                fe += fac * np.einsum("eq,eqa,eqai->ei", w * C, m, dNdx)
                np.add.at(f, eq.ravel(), fe.ravel())
                if bld is None:
                    continue
                Ke = Mcap + sp.D * Kdiff_geo + fac * Kmig_geo
                bld.add_blocks(eq, eq, Ke)
                Kpot = fac * np.einsum("eq,eqai,eqab,eqbj->eij", w * C, dNdx,
                                       Teps, dNdx)
                bld.add_blocks(eq, eqpot[conn], Kpot)

        # free electrolyte
        for block in self.elec_blocks:
            conn = block["conn"]
            N, dNdx, w = block["N"], block["dNdx"], block["wdet"]
            gpot = interp_grad(block, state["pot"])
            if bld is not None:
                Mcap = np.einsum("eq,qi,qj->eij", w / dt, N, N)
                Kdiff_geo = np.einsum("eq,eqai,eqaj->eij", w, dNdx, dNdx)
                Kmig_geo = np.einsum("eq,eqa,eqai,qj->eij", w, gpot, dNdx, N)
            for sp in self.species:
                eq = self.chem.eq[sp.name][conn]
                C = interp_nodal(block, state[sp.name])
                C0 = interp_nodal(block, state_old[sp.name])
                gC = interp_grad(block, state[sp.name])
                fe = np.einsum("eq,eq,qi->ei", w / dt, C - C0, N)
                fe += sp.D * np.einsum("eq,eqa,eqai->ei", w, gC, dNdx)
                fac = sp.z * fRT * sp.D
                fe += fac * np.einsum("eq,eqa,eqai->ei", w * C, gpot, dNdx)
                np.add.at(f, eq.ravel(), fe.ravel())
                if bld is None:
                    continue
                Ke = Mcap + sp.D * Kdiff_geo + fac * Kmig_geo
                bld.add_blocks(eq, eq, Ke)
                Kpot = fac * np.einsum("eq,eqai,eqaj->eij", w * C, dNdx, dNdx)
                bld.add_blocks(eq, eqpot[conn], Kpot)

    def _electroneutrality(self, f, bld, state, distributors, eps):
        eqpot = self.chem.eq["pot"]
        for block, dist in zip(self.metal.data, distributors):
            conn = block["conn"]
            N, w = block["N"], block["wdet"]
            eqp = eqpot[conn]
            for sp in self.species:
                C = interp_nodal(block, state[sp.name])
                fe = sp.z * np.einsum("eq,eq,qi->ei", w * dist.beta_c, C, N)
                np.add.at(f, eqp.ravel(), fe.ravel())
                if bld is not None:
                    Ke = sp.z * np.einsum("eq,qi,qj->eij",
                                          w * (dist.beta_c + eps), N, N)
                    bld.add_blocks(eqp, self.chem.eq[sp.name][conn], Ke)
        for block in self.elec_blocks:
            conn = block["conn"]
            N, w = block["N"], block["wdet"]
            eqp = eqpot[conn]
            for sp in self.species:
                C = interp_nodal(block, state[sp.name])
                fe = sp.z * np.einsum("eq,eq,qi->ei", w, C, N)
                np.add.at(f, eqp.ravel(), fe.ravel())
                if bld is not None:
                    Ke = sp.z * np.einsum("eq,qi,qj->eij", w, N, N)
                    bld.add_blocks(eqp, self.chem.eq[sp.name][conn], Ke)

    def _lumped_reactions(self, f, bld, state, weights: LumpedWeights, E_m):
        p = self.params
        # surface reactions on smeared crack faces and explicit interfaces
        for wvec in (weights.L_ss, weights.L_eint):
            nodes = np.flatnonzero(wvec != 0.0)
            if not nodes.size:
                continue
            wn = wvec[nodes]
            r = rx.surface_rates(
                p.surface, E_m, state["theta"][nodes], state["C_H"][nodes],
                state["C_OH"][nodes], state["C_Fe"][nodes],
                state["CL"][nodes], p.hydrogen.N_L, state["pot"][nodes])
            targets = dict(rx.interface_fluxes(r))
            targets["theta"] = rx.coverage_source(r)
            var_field = {"theta": "theta", "C_H": "C_H", "C_OH": "C_OH",
                         "C_Fe": "C_Fe", "C_L": "CL", "pot": "pot"}
            for tgt, (val, ders) in targets.items():
                eq_t = self.chem.eq[tgt][nodes]
                np.add.at(f, eq_t, -wn * val)
                if bld is None:
                    continue
                for var, dv in ders.items():
                    eq_v = self.chem.eq[var_field[var]][nodes]
                    bld.add(eq_t, eq_v, -wn * dv)
        # homogeneous reactions, lumped over smeared and free volumes
        for wvec in (weights.L_sv, weights.L_ev):
            nodes = np.flatnonzero(wvec != 0.0)
            if not nodes.size:
                continue
            wn = wvec[nodes]
            rates = echem.bulk_rates(p.bulk, state["C_H"][nodes],
                                     state["C_OH"][nodes],
                                     state["C_Fe"][nodes],
                                     state["C_FeOH"][nodes])
            for tgt, (val, ders) in rates.items():
                eq_t = self.chem.eq[tgt][nodes]
                np.add.at(f, eq_t, -wn * val)
                if bld is None:
                    continue
                for var, dv in ders.items():
                    eq_v = self.chem.eq[var][nodes]
                    bld.add(eq_t, eq_v, -wn * dv)

    def _external_fluxes(self, f):
        for group, field, value in self.flux_bcs:
            segs = self.mesh.boundaries[group]
            sd = self.mesh.segment_data(segs)
            fe = value * np.einsum("sq,qn->sn", sd["wdet"], sd["N"])
            eq = self.chem.eq[field][segs]
            np.add.at(f, eq.ravel(), -fe.ravel())

    # -- helpers ----------------------------------------------------------
    def pack(self, state):
        return self.chem.pack(state)

    def unpack(self, x, state):
        self.chem.unpack(x, state)

    def electroneutrality_violation(self, state):
        """max over nodes of |sum_z C| relative to the largest concentration."""
        q = np.zeros(self.mesh.n_nodes)
        cmax = 0.0
        for sp in self.species:
            q += sp.z * state[sp.name]
            cmax = max(cmax, np.abs(state[sp.name]).max())
        return np.abs(q).max(), cmax
