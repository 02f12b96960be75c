"""Homogeneous electrolyte chemistry: water autoionization, Fe hydrolysis.

Rates are production rates in mol/(m^3 s): positive values create the
species.  Partial derivatives with respect to the participating
concentrations are returned alongside for tangent assembly.
"""

from __future__ import annotations

import numpy as np

from .params import BulkReactionConstants

# species participating in bulk reactions; Na+ and Cl- are inert
REACTIVE = ("C_H", "C_OH", "C_Fe", "C_FeOH")


def bulk_rates(bc: BulkReactionConstants, C_H, C_OH, C_Fe, C_FeOH):
    """Production rates and partials for H+, OH-, Fe2+, FeOH+.

    Returns {species: (rate, {species: d rate / d C})}.  The water
    reaction is driven to C_H * C_OH = K_w by the penalty constant k_eq;
    the two hydrolysis steps convert Fe2+ -> FeOH+ -> Fe(OH)2, releasing
    H+ (the final precipitate is not tracked).
    """
    C_H, C_OH, C_Fe, C_FeOH = np.broadcast_arrays(
        *(np.atleast_1d(np.asarray(v, dtype=float))
          for v in (C_H, C_OH, C_Fe, C_FeOH)))

    R_w = bc.k_eq * (bc.K_w - C_H * C_OH)
    dRw = {"C_H": -bc.k_eq * C_OH, "C_OH": -bc.k_eq * C_H}

    R_fe = -bc.k_fe * C_Fe + bc.k_fe_back * C_FeOH * C_H
    dRfe = {"C_Fe": np.full_like(C_Fe, -bc.k_fe),
            "C_FeOH": bc.k_fe_back * C_H,
            "C_H": bc.k_fe_back * C_FeOH}

    R_feoh = bc.k_fe * C_Fe - C_FeOH * (bc.k_feoh + bc.k_fe_back * C_H)
    dRfeoh = {"C_Fe": np.full_like(C_Fe, bc.k_fe),
              "C_FeOH": -(bc.k_feoh + bc.k_fe_back * C_H),
              "C_H": -bc.k_fe_back * C_FeOH}

    R_h_fe = bc.k_fe * C_Fe - C_FeOH * (bc.k_fe_back * C_H - bc.k_feoh)
    dRh = {"C_Fe": np.full_like(C_Fe, bc.k_fe),
           "C_FeOH": -(bc.k_fe_back * C_H - bc.k_feoh),
           "C_H": -bc.k_fe_back * C_FeOH + dRw["C_H"],
           "C_OH": dRw["C_OH"]}

    return {
        "C_H": (R_w + R_h_fe, dRh),
        "C_OH": (R_w, dRw),
        "C_Fe": (R_fe, dRfe),
        "C_FeOH": (R_feoh, dRfeoh),
    }


def ph_of(C_H, floor=1e-300):
    """pH from an H+ concentration in mol/m^3."""
    return -np.log10(np.maximum(np.asarray(C_H, dtype=float), floor) / 1000.0)
