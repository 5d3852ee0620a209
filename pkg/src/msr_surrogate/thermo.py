"""Standard Gibbs energies and equilibrium constants of the reforming reactions.

Species properties come from Shomate polynomials shipped in
``data/shomate.dat``. Enthalpies are absolute (formation enthalpy included),
so a reaction's Gibbs energy is simply ``sum(nu_i * (H_i - T * S_i))``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path

from msr_surrogate.errors import DataError, TemperatureRangeError
from msr_surrogate.state import ATM

R_GAS = 8.314472  # J/(mol K)

SPECIES = ("CH4", "H2O", "H2", "CO", "CO2")


class ReactionId(enum.Enum):
    """Gas-phase reactions with stoichiometric coefficients over ``SPECIES``."""

    MSRR = {"CH4": -1, "H2O": -1, "H2": 3, "CO": 1}
    WGSR = {"CO": -1, "H2O": -1, "H2": 1, "CO2": 1}
    DRR = {"CH4": -1, "H2O": -2, "H2": 4, "CO2": 1}

    @property
    def stoichiometry(self) -> dict[str, int]:
        return dict(self.value)

    @property
    def mole_change(self) -> int:
        return sum(self.value.values())


@dataclass(frozen=True)
class ShomateRange:
    T_min: float
    T_max: float
    coeffs: tuple[float, ...]  # A..G in NIST order, F in kJ/mol

    def enthalpy(self, T: float) -> float:
        A, B, C, D, E, F, _ = self.coeffs
        t = T / 1000.0
        return 1000.0 * (A * t + B * t**2 / 2 + C * t**3 / 3 + D * t**4 / 4 - E / t + F)

    def entropy(self, T: float) -> float:
        A, B, C, D, E, _, G = self.coeffs
        t = T / 1000.0
        return A * math.log(t) + B * t + C * t**2 / 2 + D * t**3 / 3 - E / (2 * t**2) + G


class SpeciesThermoTable:
    """Piecewise Shomate data per species.

    ``enthalpy`` returns absolute H(T) in J/mol and ``entropy`` S(T) in
    J/(mol K). Ranges must be contiguous; at a shared boundary the lower
    range is used.
    """

    def __init__(self, ranges: dict[str, list[ShomateRange]]):
        for sp, rs in ranges.items():
            rs.sort(key=lambda r: r.T_min)
            for lo, hi in zip(rs, rs[1:]):
                if lo.T_max != hi.T_min:
                    raise DataError(f"{sp}: gap between {lo.T_max} K and {hi.T_min} K")
        missing = set(SPECIES) - set(ranges)
        if missing:
            raise DataError(f"thermo table lacks species {sorted(missing)}")
        self.ranges = ranges

    @classmethod
    def from_file(cls, path) -> "SpeciesThermoTable":
        text = Path(path).read_text(encoding="utf-8")
        return cls.from_text(text, source=str(path))

    @classmethod
    def from_text(cls, text: str, source: str = "<text>") -> "SpeciesThermoTable":
        ranges: dict[str, list[ShomateRange]] = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 11:
                raise DataError(f"{source}:{lineno}: expected 11 fields, got {len(parts)}")
            try:
                nums = [float(p) for p in parts[1:]]
            except ValueError as exc:
                raise DataError(f"{source}:{lineno}: {exc}") from None
            # The trailing formation enthalpy is informational; F already carries it.
            ranges.setdefault(parts[0], []).append(ShomateRange(nums[0], nums[1], tuple(nums[2:9])))
        return cls(ranges)

    def bounds(self, species: str) -> tuple[float, float]:
        rs = self.ranges[species]
        return rs[0].T_min, rs[-1].T_max

    def _segment(self, species: str, T: float) -> ShomateRange:
        for r in self.ranges[species]:
            if r.T_min <= T <= r.T_max:
                return r
        lo, hi = self.bounds(species)
        raise TemperatureRangeError(f"T={T} K outside the {species} data range [{lo}, {hi}] K")

    def enthalpy(self, species: str, T: float) -> float:
        return self._segment(species, T).enthalpy(T)

    def entropy(self, species: str, T: float) -> float:
        return self._segment(species, T).entropy(T)

    def gibbs(self, species: str, T: float) -> float:
        seg = self._segment(species, T)
        return seg.enthalpy(T) - T * seg.entropy(T)


@lru_cache(maxsize=None)
def default_table() -> SpeciesThermoTable:
    text = resources.files("msr_surrogate").joinpath("data/shomate.dat").read_text(encoding="utf-8")
    return SpeciesThermoTable.from_text(text, source="shomate.dat")


def gibbs_reaction(reaction: ReactionId, T: float, table: SpeciesThermoTable | None = None) -> float:
    """Standard Gibbs energy change of ``reaction`` at ``T`` [J/mol]."""
    table = table or default_table()
    return math.fsum(nu * table.gibbs(sp, T) for sp, nu in reaction.value.items())


def k_equilibrium(
    reaction: ReactionId,
    T: float,
    p_ref: float = ATM,
    table: SpeciesThermoTable | None = None,
) -> float:
    """Pressure-basis equilibrium constant ``exp(-dG/RT) * p_ref**dn``.

    For MSRR (dn = +2) the result carries Pa^2; WGSR is dimensionless.
    """
    if not p_ref > 0:
        raise ValueError("p_ref must be positive")
    dG = gibbs_reaction(reaction, T, table)
    return math.exp(-dG / (R_GAS * T)) * p_ref ** reaction.mole_change
