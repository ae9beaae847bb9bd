"""Square-law MOSFET and memristor cell primitives.

All quantities are SI. PMOS devices are evaluated with the standard sign
flips so a single set of formulas covers both polarities; reported currents
are magnitudes in that flipped convention.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum


class Polarity(Enum):
    NMOS = "nmos"
    PMOS = "pmos"


class Region(Enum):
    CUTOFF = "cutoff"
    TRIODE = "triode"
    SATURATION = "saturation"


@dataclass(frozen=True)
class MosParams:
    """Square-law transistor parameters.

    beta is the full transconductance parameter (A/V^2), i.e. the drain
    current in saturation is (beta/2)*(vgs-vt)^2*(1+lam*vds).
    """

    beta: float
    vt: float
    lam: float = 0.0
    polarity: Polarity = Polarity.NMOS

    def __post_init__(self):
        if not (self.beta > 0.0 and math.isfinite(self.beta)):
            raise ValueError(f"beta must be positive and finite, got {self.beta}")
        if self.lam < 0.0 or not math.isfinite(self.lam):
            raise ValueError(f"lambda must be >= 0 and finite, got {self.lam}")
        if not math.isfinite(self.vt):
            raise ValueError(f"vt must be finite, got {self.vt}")

    def perturbed(self, dvt: float, dbeta_rel: float) -> "MosParams":
        """Return a copy with vt shifted and beta scaled (beta kept > 0)."""
        beta = max(self.beta * (1.0 + dbeta_rel), 1e-15)
        return replace(self, vt=self.vt + dvt, beta=beta)


@dataclass(frozen=True)
class MosEval:
    """Operating-region evaluation of a square-law device."""

    current: float
    region: Region
    gm: float
    gds: float

    @property
    def ro(self) -> float:
        return math.inf if self.gds == 0.0 else 1.0 / self.gds


def mos_eval(p: MosParams, vgs: float, vds: float) -> MosEval:
    """Evaluate drain current and its analytic partial derivatives.

    vgs/vds are the physical terminal voltages; for PMOS they are flipped
    internally. Requires vds >= 0 in the flipped convention. Subthreshold
    conduction is zero. The (1+lam*vds) factor applies in saturation only,
    so with lam > 0 there is a small documented discontinuity at the
    triode/saturation boundary.
    """
    if p.polarity is Polarity.PMOS:
        vgs, vds = -vgs, -vds
    if vds < 0.0:
        raise ValueError(f"vds must be >= 0 in the flipped-sign convention, got {vds}")
    vov = vgs - p.vt
    if vov <= 0.0:
        return MosEval(0.0, Region.CUTOFF, 0.0, 0.0)
    if vds < vov:
        i = p.beta * (vov * vds - 0.5 * vds * vds)
        gm = p.beta * vds
        gds = p.beta * (vov - vds)
        return MosEval(i, Region.TRIODE, gm, gds)
    i = 0.5 * p.beta * vov * vov * (1.0 + p.lam * vds)
    gm = p.beta * vov * (1.0 + p.lam * vds)
    gds = 0.5 * p.beta * vov * vov * p.lam
    return MosEval(i, Region.SATURATION, gm, gds)


def mos_current_signed(p: MosParams, vgs: float, vds: float) -> tuple[float, float, float]:
    """Drain current and partials (di/dvgs, di/dvds) valid for either vds sign.

    NMOS convention only; used by nonlinear solvers whose Newton iterates may
    transiently reverse a drain-source pair. Negative vds is handled by the
    usual source/drain swap: i(vgs, vds) = -i(vgs - vds, -vds).
    """
    if p.polarity is not Polarity.NMOS:
        raise ValueError("signed evaluation is defined for NMOS devices only")
    if vds >= 0.0:
        e = mos_eval(p, vgs, vds)
        return e.current, e.gm, e.gds
    e = mos_eval(p, vgs - vds, -vds)
    # chain rule through the swap
    return -e.current, -e.gm, e.gm + e.gds


@dataclass(frozen=True)
class MemristorCell:
    """A programmable resistive cross-point element."""

    g: float
    g_min: float
    g_max: float
    clamped: bool = False

    def __post_init__(self):
        if not (0.0 < self.g_min <= self.g_max):
            raise ValueError(
                f"need 0 < g_min <= g_max, got g_min={self.g_min}, g_max={self.g_max}"
            )
        if not (self.g_min <= self.g <= self.g_max):
            raise ValueError(f"g={self.g} outside [{self.g_min}, {self.g_max}]")


def clamp_conductance(g_raw: float, g_min: float, g_max: float) -> MemristorCell:
    """Clamp a raw conductance into the programmable window.

    The returned cell reports whether clamping occurred.
    """
    if not (0.0 < g_min <= g_max):
        raise ValueError(
            f"need 0 < g_min <= g_max, got g_min={g_min}, g_max={g_max}"
        )
    g = min(max(g_raw, g_min), g_max)
    return MemristorCell(g=g, g_min=g_min, g_max=g_max, clamped=(g != g_raw))
