"""Lattice hydrogen constitutive relations: trapping and stress enrichment.

Traps are in local equilibrium with the lattice (occupancy ratio
theta_T/(1-theta_T) = theta_L/(1-theta_L) exp(dg/RT), dilute lattice), so
the trapped concentration follows the lattice one instantaneously and
enters the mass balance through an effective capacity factor.
"""

from __future__ import annotations

import numpy as np

from .params import R_GAS, HydrogenParams


def trapped_concentration(C_L, hp: HydrogenParams):
    """Total trapped hydrogen concentration (mol/m^3) at equilibrium."""
    C_L = np.asarray(C_L, dtype=float)
    if np.any(C_L < 0) or np.any(C_L >= hp.N_L):
        raise ValueError("C_L must satisfy 0 <= C_L < N_L")
    total = np.zeros_like(C_L)
    for trap in hp.traps:
        x = (C_L / hp.N_L) * np.exp(trap.dg / (R_GAS * hp.T))
        total = total + trap.N_T * x / (1.0 + x)
    return total


def capacity_factor(C_L, hp: HydrogenParams):
    """1 + d C_T / d C_L, the transient capacity multiplier (>= 1)."""
    theta_L = np.asarray(C_L, dtype=float) / hp.N_L
    cap = np.ones_like(theta_L)
    for trap in hp.traps:
        e = np.exp(-trap.dg / (R_GAS * hp.T))
        cap = cap + (trap.N_T / hp.N_L) * e / (theta_L + e) ** 2
    return cap


def capacity_factor_derivative(C_L, hp: HydrogenParams):
    """d/dC_L of the capacity factor (for consistent tangents)."""
    theta_L = np.asarray(C_L, dtype=float) / hp.N_L
    out = np.zeros_like(theta_L)
    for trap in hp.traps:
        e = np.exp(-trap.dg / (R_GAS * hp.T))
        out = out - 2.0 * (trap.N_T / hp.N_L ** 2) * e / (theta_L + e) ** 3
    return out


def steady_state_enrichment(C_0, sigma_H, hp: HydrogenParams):
    """Dilute steady-state lattice concentration under hydrostatic stress."""
    return C_0 * np.exp(hp.V_H * np.asarray(sigma_H, dtype=float)
                        / (R_GAS * hp.T))
