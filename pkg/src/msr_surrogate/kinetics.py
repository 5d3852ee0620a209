"""Kinetic-regime reformer model.

Methane reforming follows a power-law rate with an Arrhenius constant
evaluated at inlet partial pressures (differential reactor); the water-gas
shift is closed at equilibrium. The reforming extent is capped at the
equilibrium extent so the model saturates at large catalyst loadings.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from msr_surrogate import thermo
from msr_surrogate.errors import ModelInconsistencyError
from msr_surrogate.state import (
    Conversions,
    GasComposition,
    OperatingPoint,
    dry_composition,
    outlet_moles,
)

__all__ = [
    "KineticParams",
    "KineticConversion",
    "rate_constant",
    "reaction_rate",
    "kinetic_reforming_conversion",
    "shift_extent",
    "kinetic_state",
    "kinetic_composition",
    "outlet_moles",
    "dry_composition",
]

DEGENERATE_K = 1e-12
ROOT_TOL = 1e-14


@dataclass(frozen=True)
class KineticParams:
    """Rate-law constants; ``A`` in mol/(g Pa^(a+b) s), ``E`` in J/mol."""

    A: float = 2.582e-4
    E: float = 115255.0
    a: float = 1.0
    b: float = 0.0

    def __post_init__(self):
        if not (self.A > 0 and self.E > 0):
            raise ValueError(f"A and E must be positive, got A={self.A}, E={self.E}")


@dataclass(frozen=True)
class KineticConversion:
    x_st: float
    clamped: bool
    x_kinetic: float  # unclamped r_st / f_CH4
    x_eq: float


def rate_constant(params: KineticParams, T: float) -> float:
    if not T > 0:
        raise ValueError("T must be positive")
    return params.A * math.exp(-params.E / (thermo.R_GAS * T))


def inlet_partial_pressures(op: OperatingPoint) -> tuple[float, float]:
    total = 1.0 + op.SC + op.NC + op.CC
    return op.P / total, op.P * op.SC / total


def reaction_rate(params: KineticParams, op: OperatingPoint) -> float:
    """Methane consumption rate over the whole catalyst charge [mol/s]."""
    p_ch4, p_h2o = inlet_partial_pressures(op)
    return op.m_cat * rate_constant(params, op.T) * p_ch4**params.a * p_h2o**params.b


def kinetic_reforming_conversion(
    params: KineticParams,
    op: OperatingPoint,
    x_eq: float | None = None,
    **equilibrium_kw,
) -> KineticConversion:
    """Reforming extent ``min(r_st / f_CH4, x_eq)``.

    ``x_eq`` is computed with :func:`msr_surrogate.equilibrium.solve_equilibrium`
    unless supplied.
    """
    x_kin = reaction_rate(params, op) / op.f_CH4
    if x_eq is None:
        from msr_surrogate.equilibrium import solve_equilibrium

        x_eq = solve_equilibrium(op, **equilibrium_kw).conv.x_st
    if x_kin > x_eq:
        return KineticConversion(x_eq, True, x_kin, x_eq)
    return KineticConversion(x_kin, False, x_kin, x_eq)


def shift_bounds(x_st: float, SC: float, CC: float) -> tuple[float, float]:
    """Interval of shift extents keeping every outlet amount non-negative."""
    return max(-CC, -3.0 * x_st), min(x_st, SC - x_st)


def shift_residual(x_sh: float, x_st: float, SC: float, CC: float, K_sh: float) -> float:
    """``K_sh (CO)(H2O) - (CO2)(H2)``; decreasing in ``x_sh`` on the feasible interval."""
    return K_sh * (x_st - x_sh) * (SC - x_st - x_sh) - (CC + x_sh) * (3.0 * x_st + x_sh)


def shift_extent(x_st: float, SC: float, CC: float, K_sh: float) -> float:
    """Shift extent at water-gas-shift equilibrium for a given reforming extent.

    Solves ``(CC + x)(3 x_st + x) = K_sh (x_st - x)(SC - x_st - x)``, i.e.

        (1 - K) x^2 + (3 x_st + CC + K SC) x + 3 x_st CC - K x_st (SC - x_st) = 0

    and returns the root lying in :func:`shift_bounds`. The residual is
    monotone on that interval, so the admissible root is unique.
    """
    if not K_sh > 0:
        raise ValueError("K_sh must be positive")
    lo, hi = shift_bounds(x_st, SC, CC)
    if hi < lo:
        raise ModelInconsistencyError(f"empty shift interval for x_st={x_st}, SC={SC}, CC={CC}")
    qa = 1.0 - K_sh
    qb = 3.0 * x_st + CC + K_sh * SC
    qc = 3.0 * x_st * CC - K_sh * x_st * (SC - x_st)

    if abs(qa) < DEGENERATE_K:
        roots = [-qc / qb]
    else:
        disc = max(qb * qb - 4.0 * qa * qc, 0.0)
        q = -0.5 * (qb + math.copysign(math.sqrt(disc), qb))
        roots = [q / qa]
        if q != 0.0:
            roots.append(qc / q)
        else:
            roots.append(0.0)

    tol = ROOT_TOL * max(1.0, SC + CC)
    admissible = [r for r in roots if lo - tol <= r <= hi + tol]
    if not admissible:
        raise ModelInconsistencyError(
            f"no shift root in [{lo}, {hi}]: roots {roots} (x_st={x_st}, SC={SC}, CC={CC}, K_sh={K_sh})"
        )
    root = min(admissible, key=lambda r: abs(shift_residual(r, x_st, SC, CC, K_sh)))
    return min(max(root, lo), hi)


def kinetic_state(
    params: KineticParams,
    op: OperatingPoint,
    x_eq: float | None = None,
    table: thermo.SpeciesThermoTable | None = None,
) -> tuple[Conversions, KineticConversion]:
    kc = kinetic_reforming_conversion(params, op, x_eq=x_eq, table=table)
    k_sh = thermo.k_equilibrium(thermo.ReactionId.WGSR, op.T, table=table)
    x_sh = shift_extent(kc.x_st, op.SC, op.CC, k_sh)
    return Conversions(kc.x_st, x_sh), kc


def kinetic_composition(
    params: KineticParams,
    op: OperatingPoint,
    x_eq: float | None = None,
    table: thermo.SpeciesThermoTable | None = None,
) -> GasComposition:
    conv, _ = kinetic_state(params, op, x_eq=x_eq, table=table)
    return dry_composition(outlet_moles(conv, op.SC, op.NC, op.CC))
