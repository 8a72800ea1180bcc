# agents/diagnostics_agent.py
"""
DiagnosticsAgent

Responsibilities
- Discrete energies E and E~ (edge-based gradient term, trapezoidal potential term).
- Nehari residual <dE(u), u>, fiber maps Phi_u(s) = E~(s u) and Phi_u'(s).
- Bifurcation threshold kappa_c = (1 - theta)/lambda_1 and the eigenfunction bound s_phi.
- Equilibrium classification with human-readable reasons, plus the maximum-principle
  checks applied to nontrivial positive equilibria.

Quadrature
- gradient part: (kappa/2) * sum over x- and y-edges of (difference/h)^2 * h^2
- potential part: sum over nodes of W(u_ij) * w_ij * h^2 with w = 1 inside, 1/2 on edges,
  1/4 at corners.
With a zero boundary these satisfy the discrete Green identity
  sum_ij v (Lap_h u) h^2 = -sum_edges (du)(dv),
so the Nehari residual equals -sum u (kappa Lap_h u - W'(u)) w h^2.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from tools.errors import ValidationError
from tools.flory_huggins import (
    DEFAULT_C,
    ModifiedPotential,
    PotentialParams,
    build_modified_potential,
    modified_values,
    w_prime,
    w_value,
)
from tools.grid import (
    GridGeometry,
    ScalarField,
    continuum_lambda1,
    edge_gradient_sum,
    laplacian_array,
    trapezoid_weights,
)

logger = logging.getLogger(__name__)
logger.addHandler(logging.NullHandler())

TRIVIAL = "trivial"
NONTRIVIAL_POSITIVE = "nontrivial-positive"
NONTRIVIAL_NEGATIVE = "nontrivial-negative"
MIXED_SIGN = "mixed-sign"
CLASSIFICATIONS = (TRIVIAL, NONTRIVIAL_POSITIVE, NONTRIVIAL_NEGATIVE, MIXED_SIGN)

DEFAULT_TRIVIAL_TOL = 1e-3
MIN_U_FLOOR = -1e-12
MAX_U_BAND = 1e-4


@dataclass(frozen=True)
class EnergyReport:
    gradient_part: float
    potential_part: float
    total: float
    modified_total: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class PhiScan:
    s_values: List[float]
    phi: List[float]
    dphi: List[float]
    sign_change: Optional[Tuple[float, float]] = None

    def to_dict(self) -> Dict[str, Any]:
        out = asdict(self)
        out["sign_change"] = list(self.sign_change) if self.sign_change else None
        return out

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"s": self.s_values, "phi": self.phi, "dphi": self.dphi})

    def to_csv(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False, float_format="%.17g")
        return path


# -------------------------
# Energies and residuals
# -------------------------
def _area_weights(g: GridGeometry) -> np.ndarray:
    return trapezoid_weights(g) * (g.h * g.h)


def energy(
    u: ScalarField,
    kappa: float,
    p: PotentialParams,
    m: Optional[ModifiedPotential] = None,
) -> EnergyReport:
    """
    Discrete E(u), and E~(u) when a modified potential is supplied.

    Raises PotentialDomainError if any |u| > 1 (exact part only).
    """
    wts = _area_weights(u.geometry)
    gradient_part = 0.5 * kappa * edge_gradient_sum(u.values)
    potential_part = float(np.sum(w_value(u.values, p) * wts))
    modified_total = None
    if m is not None:
        wt, _ = modified_values(u.values, m)
        modified_total = gradient_part + float(np.sum(wt * wts))
    return EnergyReport(gradient_part, potential_part, gradient_part + potential_part, modified_total)


def modified_energy(u: ScalarField, kappa: float, m: ModifiedPotential) -> float:
    """E~(u); defined for any field, including |u| > 1."""
    wt, _ = modified_values(u.values, m)
    return 0.5 * kappa * edge_gradient_sum(u.values) + float(np.sum(wt * _area_weights(u.geometry)))


def nehari_residual(u: ScalarField, kappa: float, p: PotentialParams, guard: str = "strict") -> float:
    """kappa * int |grad u|^2 + int W'(u) u, discretized like the energy."""
    wts = _area_weights(u.geometry)
    return kappa * edge_gradient_sum(u.values) + float(np.sum(w_prime(u.values, p, guard) * u.values * wts))


def nehari_residual_modified(u: ScalarField, kappa: float, m: ModifiedPotential) -> float:
    """<dE~(u), u>; equals Phi_u'(1)."""
    _, dwt = modified_values(u.values, m)
    return kappa * edge_gradient_sum(u.values) + float(np.sum(dwt * u.values * _area_weights(u.geometry)))


def flow_residual(values: np.ndarray, h: float, kappa: float, dw: np.ndarray, out: np.ndarray = None) -> np.ndarray:
    """kappa * Lap_h u - W'(u) on interior nodes, 0 on the boundary."""
    r = laplacian_array(values, h, out=out)
    r *= kappa
    r[1:-1, 1:-1] -= dw[1:-1, 1:-1]
    return r


# -------------------------
# Fiber maps
# -------------------------
def phi_scan(
    u: ScalarField,
    kappa: float,
    p: PotentialParams,
    m: ModifiedPotential,
    s_grid: Sequence[float],
) -> PhiScan:
    """
    Phi_u(s) = E~(s u) and Phi_u'(s) = s * kappa * |grad u|^2 + int W~'(s u) u on s_grid.

    E~ coincides with E wherever |s u| <= u_hat, so every s >= 0 is admissible.
    """
    s_arr = np.asarray(list(s_grid), dtype=np.float64)
    if s_arr.size == 0 or not np.all(np.isfinite(s_arr)) or np.any(s_arr < 0):
        raise ValidationError("s_grid must be a nonempty list of finite, nonnegative values")
    if p.theta != m.theta:
        raise ValidationError(f"modified potential built for theta={m.theta}, not {p.theta}")

    wts = _area_weights(u.geometry)
    grad = edge_gradient_sum(u.values)
    phi: List[float] = []
    dphi: List[float] = []
    for s in s_arr:
        wt, dwt = modified_values(s * u.values, m)
        phi.append(0.5 * kappa * s * s * grad + float(np.sum(wt * wts)))
        dphi.append(s * kappa * grad + float(np.sum(dwt * u.values * wts)))

    sign_change = None
    for i in range(len(dphi) - 1):
        if dphi[i] * dphi[i + 1] < 0:
            sign_change = (float(s_arr[i]), float(s_arr[i + 1]))
            break
    return PhiScan([float(s) for s in s_arr], phi, dphi, sign_change)


# -------------------------
# Thresholds
# -------------------------
def kappa_c(theta: float, lambda1: float) -> float:
    """(1 - theta)/lambda_1: nontrivial minimizers exist iff kappa is below it."""
    if not (0.0 < theta < 1.0):
        raise ValidationError(f"theta must lie in (0, 1), got {theta!r}")
    if not lambda1 > 0:
        raise ValidationError(f"lambda1 must be positive, got {lambda1!r}")
    return (1.0 - theta) / lambda1


def s_phi_bound(theta: float, kappa: float, g: GridGeometry) -> float:
    """
    Scale beyond which Phi_phi' > 0 for the principal eigenfunction phi of the square:
    sqrt(3 (1 - theta - kappa lambda_1) int phi^2 / (theta int phi^4)) with
    int phi^2 = L^2/4 and int phi^4 = 9 L^2/64, i.e. 4 sqrt((1 - theta - kappa lambda_1)/(3 theta)).
    """
    lam = continuum_lambda1(g)
    kc = kappa_c(theta, lam)
    if not kappa < kc:
        raise ValidationError(f"s_phi bound undefined for kappa={kappa} >= kappa_c={kc}")
    return 4.0 * math.sqrt((1.0 - theta - kappa * lam) / (3.0 * theta))


# -------------------------
# Classification
# -------------------------
def classify_with_reasons(max_u: float, min_u: float, tol_trivial: float = DEFAULT_TRIVIAL_TOL) -> Tuple[str, List[str]]:
    peak = max(abs(max_u), abs(min_u))
    if peak < tol_trivial:
        return TRIVIAL, [f"max|u| = {peak:.3e} below trivial tolerance {tol_trivial:g}"]
    if min_u > -tol_trivial:
        return NONTRIVIAL_POSITIVE, [f"max u = {max_u:.6f} with min u = {min_u:.3e} above -{tol_trivial:g}"]
    if max_u < tol_trivial:
        return NONTRIVIAL_NEGATIVE, [f"min u = {min_u:.6f} with max u = {max_u:.3e} below {tol_trivial:g}"]
    return MIXED_SIGN, [f"both signs beyond tolerance: max u = {max_u:.6f}, min u = {min_u:.6f}"]


def classify(max_u: float, min_u: float, u_theta: Optional[float] = None, tol_trivial: float = DEFAULT_TRIVIAL_TOL) -> str:
    """Label an equilibrium by its extreme values; u_theta is accepted for symmetry with the checks."""
    return classify_with_reasons(max_u, min_u, tol_trivial)[0]


def check_maximum_principle(classification: str, max_u: float, min_u: float, u_theta: float) -> List[str]:
    """
    Flags for 0 <= u <= u_theta on a nontrivial positive equilibrium (negated for negative ones).

    "min_below_zero" and "max_above_u_theta" are failures; "max_within_tolerance_band"
    marks u_theta < max u <= u_theta + 1e-4, which discretization can produce.
    """
    if classification == NONTRIVIAL_NEGATIVE:
        max_u, min_u = -min_u, -max_u
    elif classification != NONTRIVIAL_POSITIVE:
        return []
    flags: List[str] = []
    if min_u < MIN_U_FLOOR:
        flags.append("min_below_zero")
    if max_u > u_theta + MAX_U_BAND:
        flags.append("max_above_u_theta")
    elif max_u > u_theta:
        flags.append("max_within_tolerance_band")
    return flags


FAILURE_FLAGS = frozenset({"min_below_zero", "max_above_u_theta"})


class DiagnosticsAgent:
    """
    Evaluates fields for one (theta, kappa) pair.

    Parameters
    ----------
    theta, kappa: float
        Potential temperature and gradient coefficient.
    C: float
        Threshold constant of the modified potential; construction failures leave
        the modified quantities unavailable instead of failing the evaluation.
    trivial_tol: float
        max|u| below which an equilibrium is called trivial.
    """

    DEFAULT_TRIVIAL_TOL = DEFAULT_TRIVIAL_TOL

    def __init__(self, theta: float, kappa: float, C: float = DEFAULT_C, trivial_tol: float = DEFAULT_TRIVIAL_TOL,
                 modified: Optional[ModifiedPotential] = None):
        self.params = PotentialParams(theta)
        if not kappa > 0:
            raise ValidationError(f"kappa must be positive, got {kappa!r}")
        self.kappa = float(kappa)
        self.trivial_tol = float(trivial_tol)
        self.modified = modified
        if self.modified is None:
            try:
                self.modified = build_modified_potential(self.params, C)
            except ValidationError:
                raise
            except ValueError as exc:
                logger.warning("DiagnosticsAgent: modified potential unavailable (%s)", exc)

    def energy(self, u: ScalarField) -> EnergyReport:
        return energy(u, self.kappa, self.params, self.modified)

    def nehari(self, u: ScalarField, guard: str = "strict") -> float:
        return nehari_residual(u, self.kappa, self.params, guard)

    def phi_scan(self, u: ScalarField, s_grid: Iterable[float]) -> PhiScan:
        if self.modified is None:
            raise ValidationError("phi_scan needs a modified potential; lower C for this theta")
        return phi_scan(u, self.kappa, self.params, self.modified, list(s_grid))

    def evaluate(self, u: ScalarField, u_theta: float) -> Dict[str, Any]:
        """
        Full report for one field: energy breakdown, Nehari residual, classification,
        maximum-principle flags and the reasons behind the label.
        """
        report = self.energy(u)
        label, reasons = classify_with_reasons(u.max_value, u.min_value, self.trivial_tol)
        flags = check_maximum_principle(label, u.max_value, u.min_value, u_theta)
        for flag in flags:
            reasons.append(f"maximum principle: {flag}")
        if report.total >= 0.5 * u.geometry.area and label != TRIVIAL:
            reasons.append("energy not below |Omega|/2 although the field is nontrivial")
        return {
            "classification": label,
            "energy": report.to_dict(),
            "nehari_residual": self.nehari(u, guard="clamped"),
            "max_u": u.max_value,
            "min_u": u.min_value,
            "flags": flags,
            "reasons": reasons,
        }

    def evaluate_batch(self, fields: Iterable[ScalarField], u_theta: float) -> List[Dict[str, Any]]:
        """One report per field, in order; a field that cannot be evaluated gets an error entry."""
        results = []
        failed = 0
        for i, u in enumerate(fields):
            try:
                report = self.evaluate(u, u_theta)
            except Exception as e:
                logger.exception("DiagnosticsAgent: error evaluating field %d: %s", i, e)
                report = {"classification": None, "error": f"{type(e).__name__}: {e}"}
                failed += 1
            report["index"] = i
            results.append(report)
        logger.info("DiagnosticsAgent: evaluated %d fields (%d failed)", len(results), failed)
        return results

    def summary_metrics(self, reports: Iterable[Dict[str, Any]]) -> Dict[str, Any]:
        """Counts per classification and the lowest energy seen; error entries are counted apart."""
        items = list(reports)
        ok = [it for it in items if "error" not in it]
        counts = {c: 0 for c in CLASSIFICATIONS}
        for it in ok:
            counts[it["classification"]] += 1
        lowest = min((it["energy"]["total"] for it in ok), default=None)
        return {"count": len(ok), "errors": len(items) - len(ok), "classifications": counts, "lowest_energy": lowest}
