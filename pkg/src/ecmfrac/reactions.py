"""Electrochemical surface kinetics at metal-electrolyte interfaces.

Forward/backward rate pairs for the hydrogen evolution steps (Volmer and
Heyrovsky in acid and base variants, Tafel recombination, absorption into
the lattice) and the iron corrosion reaction, with analytic partial
derivatives with respect to the local state.  All functions are pure and
vectorized over arrays of interface nodes.
"""

from __future__ import annotations

import numpy as np

from .params import FARADAY, R_GAS, SurfaceReactionConstants

RATE_KEYS = ("Va", "Va_b", "Ha", "Ha_b", "Vb", "Vb_b", "Hb", "Hb_b",
             "T", "T_b", "A", "A_b", "c", "c_b")

# state variables a rate may depend on
STATE_VARS = ("theta", "C_H", "C_OH", "C_Fe", "C_L", "pot")

_EXP_CLIP = 60.0  # guard on Butler-Volmer exponents


def overpotential(E_m, pot, E_eq):
    """Overpotential driving a surface reaction (V)."""
    return E_m - pot - E_eq


def _bv(eta, alpha, f):
    """Forward/backward Butler-Volmer factors exp(-a f eta), exp((1-a) f eta)."""
    fwd = np.exp(np.clip(-alpha * f * eta, -_EXP_CLIP, _EXP_CLIP))
    bwd = np.exp(np.clip((1.0 - alpha) * f * eta, -_EXP_CLIP, _EXP_CLIP))
    return fwd, bwd


class RateSet:
    """Reaction rates and their partial derivatives at interface nodes.

    ``nu[key]`` is the rate array (mol/(m^2 s)); ``d[key][var]`` holds the
    nonzero partials with respect to the state variables.
    """

    def __init__(self, n):
        self.n = n
        self.nu = {k: np.zeros(n) for k in RATE_KEYS}
        self.d = {k: {} for k in RATE_KEYS}

    def combine(self, coeffs):
        """Signed sum of rates: returns (value, {var: derivative})."""
        val = np.zeros(self.n)
        der = {}
        for key, c in coeffs.items():
            val = val + c * self.nu[key]
            for var, dv in self.d[key].items():
                der[var] = der.get(var, 0.0) + c * dv
        return val, der


# signed combinations: species flux into the electrolyte / metal, and the
# net production of adsorbed coverage
FLUX_H = {"Va": -1.0, "Va_b": 1.0, "Ha": -1.0}
FLUX_OH = {"Vb": 1.0, "Vb_b": -1.0, "Hb": 1.0}
FLUX_FE = {"c_b": 1.0, "c": -1.0}
FLUX_L = {"A": 1.0, "A_b": -1.0}
COVERAGE_SOURCE = {"Va": 1.0, "Va_b": -1.0, "Ha": -1.0, "T": -2.0,
                   "A": -1.0, "A_b": 1.0, "Vb": 1.0, "Vb_b": -1.0, "Hb": -1.0}


def surface_rates(sc: SurfaceReactionConstants, E_m, theta, C_H, C_OH,
                  C_Fe, C_L, N_L, pot) -> RateSet:
    """Evaluate all fourteen surface reaction rates and their partials."""
    theta, C_H, C_OH, C_Fe, C_L, pot = np.broadcast_arrays(
        *(np.atleast_1d(np.asarray(v, dtype=float))
          for v in (theta, C_H, C_OH, C_Fe, C_L, pot)))
    n = theta.shape[0]
    r = RateSet(n)
    f = FARADAY / (R_GAS * sc.T)

    # Volmer (acid): H+ + M + e- <-> MH_ads
    eta = overpotential(E_m, pot, sc.Eeq_Va)
    fwd, bwd = _bv(eta, sc.alpha_Va, f)
    r.nu["Va"] = sc.k_Va * C_H * (1.0 - theta) * fwd
    r.d["Va"] = {"theta": -sc.k_Va * C_H * fwd,
                 "C_H": sc.k_Va * (1.0 - theta) * fwd,
                 "pot": r.nu["Va"] * sc.alpha_Va * f}
    r.nu["Va_b"] = sc.kp_Va * theta * bwd
    r.d["Va_b"] = {"theta": sc.kp_Va * bwd,
                   "pot": -r.nu["Va_b"] * (1.0 - sc.alpha_Va) * f}

    # Heyrovsky (acid): H+ + e- + MH_ads <-> M + H2
    eta = overpotential(E_m, pot, sc.Eeq_Ha)
    fwd, bwd = _bv(eta, sc.alpha_Ha, f)
    r.nu["Ha"] = sc.k_Ha * C_H * theta * fwd
    r.d["Ha"] = {"theta": sc.k_Ha * C_H * fwd,
                 "C_H": sc.k_Ha * theta * fwd,
                 "pot": r.nu["Ha"] * sc.alpha_Ha * f}
    r.nu["Ha_b"] = sc.kp_Ha * (1.0 - theta) * sc.p_H2 * bwd
    r.d["Ha_b"] = {"theta": -sc.kp_Ha * sc.p_H2 * bwd,
                   "pot": -r.nu["Ha_b"] * (1.0 - sc.alpha_Ha) * f}

    # Volmer (base): H2O + M + e- <-> MH_ads + OH-
    eta = overpotential(E_m, pot, sc.Eeq_Vb)
    fwd, bwd = _bv(eta, sc.alpha_Vb, f)
    r.nu["Vb"] = sc.k_Vb * (1.0 - theta) * fwd
    r.d["Vb"] = {"theta": -sc.k_Vb * fwd,
                 "pot": r.nu["Vb"] * sc.alpha_Vb * f}
    r.nu["Vb_b"] = sc.kp_Vb * C_OH * theta * bwd
    r.d["Vb_b"] = {"theta": sc.kp_Vb * C_OH * bwd,
                   "C_OH": sc.kp_Vb * theta * bwd,
                   "pot": -r.nu["Vb_b"] * (1.0 - sc.alpha_Vb) * f}

    # Heyrovsky (base): H2O + e- + MH_ads <-> M + H2 + OH-
    eta = overpotential(E_m, pot, sc.Eeq_Hb)
    fwd, bwd = _bv(eta, sc.alpha_Hb, f)
    r.nu["Hb"] = sc.k_Hb * theta * fwd
    r.d["Hb"] = {"theta": sc.k_Hb * fwd,
                 "pot": r.nu["Hb"] * sc.alpha_Hb * f}
    r.nu["Hb_b"] = sc.kp_Hb * (1.0 - theta) * sc.p_H2 * C_OH * bwd
    r.d["Hb_b"] = {"theta": -sc.kp_Hb * sc.p_H2 * C_OH * bwd,
                   "C_OH": sc.kp_Hb * (1.0 - theta) * sc.p_H2 * bwd,
                   "pot": -r.nu["Hb_b"] * (1.0 - sc.alpha_Hb) * f}

    # Tafel: 2 MH_ads <-> 2 M + H2 (|theta| theta keeps it smooth at 0)
    r.nu["T"] = sc.k_T * np.abs(theta) * theta
    r.d["T"] = {"theta": 2.0 * sc.k_T * np.abs(theta)}
    r.nu["T_b"] = sc.kp_T * (1.0 - theta) * sc.p_H2
    r.d["T_b"] = {"theta": np.full(n, -sc.kp_T * sc.p_H2)}

    # Absorption: MH_ads <-> MH_abs (lattice)
    r.nu["A"] = sc.k_A * (N_L - C_L) * theta
    r.d["A"] = {"theta": sc.k_A * (N_L - C_L),
                "C_L": -sc.k_A * theta}
    r.nu["A_b"] = sc.kp_A * C_L * (1.0 - theta)
    r.d["A_b"] = {"theta": -sc.kp_A * C_L,
                  "C_L": sc.kp_A * (1.0 - theta)}

    # Corrosion: Fe2+ + 2e- <-> Fe
    eta = overpotential(E_m, pot, sc.Eeq_c)
    fwd, bwd = _bv(eta, sc.alpha_c, f)
    r.nu["c"] = sc.k_c * C_Fe * fwd
    r.d["c"] = {"C_Fe": sc.k_c * fwd,
                "pot": r.nu["c"] * sc.alpha_c * f}
    r.nu["c_b"] = sc.kp_c * bwd
    r.d["c_b"] = {"pot": -r.nu["c_b"] * (1.0 - sc.alpha_c) * f}
    return r


def interface_fluxes(r: RateSet):
    """Species fluxes into the electrolyte and the lattice hydrogen influx.

    Returns a dict with keys "C_H", "C_OH", "C_Fe", "CL", each mapping to
    (value, partials).  Positive values add the species to its domain.
    """
    return {
        "C_H": r.combine(FLUX_H),
        "C_OH": r.combine(FLUX_OH),
        "C_Fe": r.combine(FLUX_FE),
        "CL": r.combine(FLUX_L),
    }


def coverage_source(r: RateSet):
    """Net production rate of adsorbed hydrogen: N_ads dtheta/dt source."""
    return r.combine(COVERAGE_SOURCE)


def absorption_equilibrium_theta(C_L, sc: SurfaceReactionConstants, N_L):
    """Coverage balancing absorption: k_A (N_L - C_L) theta = k_A' C_L (1-theta)."""
    a = sc.k_A * (N_L - C_L)
    b = sc.kp_A * C_L
    return b / (a + b)
