"""Physical constants and parameter containers.

All quantities are SI: m, s, Pa, J, mol, V, K.  Concentrations are mol/m^3
throughout; the water equilibrium constant is therefore (mol/m^3)^2.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

R_GAS = 8.314462618  # J/(mol K)
FARADAY = 96485.33212  # C/mol


@dataclass(frozen=True)
class ElasticParams:
    """Plane-strain linear elasticity of the metal."""

    E: float = 200e9  # Young's modulus (Pa)
    nu: float = 0.3  # Poisson ratio
    k0: float = 1e-10  # residual stiffness factor

    def __post_init__(self):
        if not self.E > 0:
            raise ValueError("E must be positive")
        if not 0 < self.nu < 0.5:
            raise ValueError("nu must lie in (0, 0.5)")
        if not 0 < self.k0 < 1:
            raise ValueError("k0 must lie in (0, 1)")

    @property
    def d_matrix(self) -> np.ndarray:
        """Plane-strain stiffness in Voigt order (xx, yy, xy)."""
        c = self.E / ((1.0 + self.nu) * (1.0 - 2.0 * self.nu))
        return c * np.array(
            [
                [1.0 - self.nu, self.nu, 0.0],
                [self.nu, 1.0 - self.nu, 0.0],
                [0.0, 0.0, 0.5 * (1.0 - 2.0 * self.nu)],
            ]
        )

    @property
    def bulk_2d(self) -> float:
        """Hydrostatic-stress factor: sigma_H = bulk_2d * (eps_xx + eps_yy)."""
        return self.E / (3.0 * (1.0 - 2.0 * self.nu))


@dataclass(frozen=True)
class FractureParams:
    """Phase-field fracture and hydrogen-dependent toughness."""

    Gc0: float = 2e3  # baseline toughness (J/m^2)
    ell: float = 0.5e-3  # phase-field length scale (m)
    chi: float = 0.9  # hydrogen degradation factor
    dg_b: float = 30e3  # trap/interface binding energy (J/mol)
    N_L: float = 1e6  # lattice site concentration (mol/m^3)
    T: float = 293.15  # temperature (K)

    def __post_init__(self):
        if not self.Gc0 > 0:
            raise ValueError("Gc0 must be positive")
        if not self.ell > 0:
            raise ValueError("ell must be positive")
        if not 0.0 <= self.chi <= 1.0:
            raise ValueError("chi must lie in [0, 1]")


@dataclass(frozen=True)
class TrapFamily:
    """One population of trapping sites."""

    N_T: float  # trap site concentration (mol/m^3)
    dg: float  # binding energy (J/mol), positive = attractive


@dataclass(frozen=True)
class HydrogenParams:
    """Stress-assisted lattice hydrogen transport with equilibrium trapping."""

    D_L: float = 1e-9  # lattice diffusivity (m^2/s)
    N_L: float = 1e6  # lattice site concentration (mol/m^3)
    traps: tuple[TrapFamily, ...] = (TrapFamily(N_T=1e2, dg=30e3),)
    V_H: float = 2e-6  # partial molar volume (m^3/mol)
    T: float = 293.15  # temperature (K)
    mu0: float = 0.0  # reference chemical potential; drops out of gradients

    def __post_init__(self):
        for name in ("D_L", "N_L", "V_H", "T"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


# Canonical species order used everywhere (DOF blocks, outputs, configs).
SPECIES_NAMES = ("C_H", "C_OH", "C_Na", "C_Cl", "C_Fe", "C_FeOH")
SPECIES_CHARGES = (1, -1, 1, -1, 2, 1)


@dataclass(frozen=True)
class IonSpecies:
    name: str
    z: int  # charge number
    D: float  # diffusivity (m^2/s)
    C0: float  # initial / bulk concentration (mol/m^3)


def default_species(
    D=(9.3e-9, 5.3e-9, 1.3e-9, 2e-9, 1.4e-9, 1e-9),
    C0=(1e-2, 1e-6, 600.0, None, 0.0, 0.0),
) -> tuple[IonSpecies, ...]:
    """Seawater-like six-species set; Cl- (None) is balanced for neutrality."""
    vals = list(C0)
    if vals[3] is None:
        vals[3] = electroneutral_chloride(vals)
    return tuple(
        IonSpecies(n, z, d, c)
        for n, z, d, c in zip(SPECIES_NAMES, SPECIES_CHARGES, D, vals)
    )


def electroneutral_chloride(C0) -> float:
    """Cl- concentration balancing the other five species charges."""
    zc = sum(
        z * c
        for z, c, n in zip(SPECIES_CHARGES, C0, SPECIES_NAMES)
        if n != "C_Cl" and c is not None
    )
    cl = zc / 1.0  # z_Cl = -1
    if cl < 0:
        raise ValueError("electroneutral Cl- would be negative")
    return cl


@dataclass(frozen=True)
class BulkReactionConstants:
    """Homogeneous electrolyte reactions: water autoionization, Fe hydrolysis."""

    k_eq: float = 1e6  # penalty rate for water equilibrium (m^3/(mol s))
    K_w: float = 1e-8  # water equilibrium constant ((mol/m^3)^2)
    k_fe: float = 0.1  # Fe2+ hydrolysis forward (1/s)
    k_fe_back: float = 1e-3  # Fe2+ hydrolysis backward (m^3/(mol s))
    k_feoh: float = 1e-3  # FeOH+ consumption (1/s)


@dataclass(frozen=True)
class SurfaceReactionConstants:
    """Rate constants for the metal-electrolyte surface reactions.

    Units follow the per-reaction rate expressions: forward/backward pairs
    (k, kp), charge-transfer coefficients alpha and equilibrium potentials
    for the electrochemical steps.
    """

    k_Va: float = 1e-4  # m/s
    kp_Va: float = 1e-10  # mol/(m^2 s)
    alpha_Va: float = 0.5
    Eeq_Va: float = 0.0  # V_SHE

    k_Ha: float = 1e-10  # m/s
    kp_Ha: float = 0.0  # mol/(m^2 Pa s)
    alpha_Ha: float = 0.3
    Eeq_Ha: float = 0.0

    k_Vb: float = 1e-8  # mol/(m^2 s)
    kp_Vb: float = 1e-13  # m/s
    alpha_Vb: float = 0.5
    Eeq_Vb: float = 0.0

    k_Hb: float = 1e-10  # mol/(m^2 s)
    kp_Hb: float = 0.0  # m/(Pa s)
    alpha_Hb: float = 0.3
    Eeq_Hb: float = 0.0

    k_T: float = 1e-6  # mol/(m^2 s)
    kp_T: float = 0.0  # mol/(m^2 s Pa)

    k_A: float = 1e1  # m/s
    kp_A: float = 7e5  # m/s

    k_c: float = 1.5e-10  # mol/(m^2 s)
    kp_c: float = 1.5e-10  # m/s
    alpha_c: float = 0.5
    Eeq_c: float = -0.4  # V_SHE

    N_ads: float = 1e-5  # adsorption site density (mol/m^2)
    p_H2: float = 0.0  # hydrogen gas pressure (Pa)
    T: float = 293.15


PHYSICS_BASED = "physics_based"
DISTRIBUTED_DIFFUSION = "distributed_diffusion"


@dataclass(frozen=True)
class CrackModelParams:
    """Crack-contained electrolyte model selection and its distributors."""

    model: str = PHYSICS_BASED
    m_exp: float = 2.0  # distributed-diffusion exponent
    D2_ratio: float = 1.0  # D_{pi,2}/D_pi for distributed diffusion
    D_inf: float | None = None  # normal-entry length (m); None -> 1e3 * ell
    activity_tol: float = 1e-6  # crack activity threshold on gamma*ell
    line_extent: float = 5.0  # opening-height line half-extent, in ell
    line_step: float = 0.1  # opening-height integration step, in ell

    def __post_init__(self):
        if self.model not in (PHYSICS_BASED, DISTRIBUTED_DIFFUSION):
            raise ValueError(f"unknown crack electrolyte model {self.model!r}")
        if not self.m_exp > 0:
            raise ValueError("m_exp must be positive")

    def d_inf_for(self, ell: float) -> float:
        return 1e3 * ell if self.D_inf is None else self.D_inf


@dataclass(frozen=True)
class SolverConfig:
    """Time stepping and nonlinear solver control."""

    dt0: float = 30.0  # initial time increment (s)
    growth: float = 1.05  # increment growth per accepted step
    duration: float = 72000.0  # total simulated time (s)
    dt_min: float = 1e-3  # abort threshold on the increment (s)
    energy_tol: float = 1e-6  # energy convergence criterion
    newton_tight: float = 1e-9  # extra relative-update tolerance
    max_newton: int = 25
    max_staggered: int = 25
    eps: float = 1e-12  # tangent-only regularization offset
    max_halvings: int = 40  # line-search limit per Newton iteration

    def __post_init__(self):
        if not self.energy_tol > 0:
            raise ValueError("energy_tol must be positive")
        if not self.growth >= 1.0:
            raise ValueError("growth must be >= 1")


@dataclass(frozen=True)
class ParameterSet:
    """Full material / electrolyte / reaction / solver parameter bundle."""

    elastic: ElasticParams = field(default_factory=ElasticParams)
    fracture: FractureParams = field(default_factory=FractureParams)
    hydrogen: HydrogenParams = field(default_factory=HydrogenParams)
    species: tuple[IonSpecies, ...] = field(default_factory=default_species)
    bulk: BulkReactionConstants = field(default_factory=BulkReactionConstants)
    surface: SurfaceReactionConstants = field(default_factory=SurfaceReactionConstants)
    crack_model: CrackModelParams = field(default_factory=CrackModelParams)
    solver: SolverConfig = field(default_factory=SolverConfig)

    def with_(self, **kw) -> "ParameterSet":
        return replace(self, **kw)

    @property
    def d_inf(self) -> float:
        return self.crack_model.d_inf_for(self.fracture.ell)
