"""Explicit stability and convergence constants for the SGLD chain.

Everything here is a deterministic function of the model's declared
regularity constants, the Monte-Carlo data moments, the dimension and the
inverse temperature.  Quantities at risk of overflow are evaluated in log
space; a bound whose value exceeds the floating range is reported as +inf and
flagged vacuous rather than raising, since a vacuous bound is still a bound.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import quad

from .models import AssumptionConstants
from .verify import ModelMoments

__all__ = [
    "ConstantsReport",
    "BudgetResult",
    "BudgetOverflowError",
    "QuadratureError",
    "compute_lambda_max",
    "compute_moment_constants",
    "compute_discretization_constants",
    "compute_contraction_rate",
    "compute_theorem_constants",
    "compute_constants_report",
    "drift_constants",
    "budget",
]

_LOG_MAX = math.log(np.finfo(float).max)   # ~709.78
_TINY = np.nextafter(0.0, 1.0)             # smallest positive subnormal


class QuadratureError(RuntimeError):
    pass


class BudgetOverflowError(ValueError):
    """Raised when the required iteration count exceeds the 64-bit range."""

    def __init__(self, log_requirement: float, lam_star: float):
        super().__init__(
            "required step count overflows 64 bits: "
            f"lam*n >= {log_requirement:.6g} at lam = {lam_star:.6g}"
        )
        self.log_requirement = log_requirement
        self.lam_star = lam_star


def compute_lambda_max(a: float, L1: float, E_one_plus_eta_4: float) -> float:
    """Largest admissible stepsize for the moment and convergence bounds."""
    if not (a > 0 and L1 > 0 and E_one_plus_eta_4 > 0):
        raise ValueError("a, L1 and E[(1+eta)^4] must be positive")
    cap = min(a, a ** (1.0 / 3.0)) / (
        16.0 * (1.0 + L1) ** 2 * math.sqrt(E_one_plus_eta_4)
    )
    return min(cap, 1.0 / a)


def compute_moment_constants(
    c: AssumptionConstants,
    m: ModelMoments,
    d: int,
    beta: float,
    lambda_max: float,
) -> dict:
    """Second/fourth-moment drift constants c0..c3 and the radius M."""
    if d < 1 or beta <= 0 or lambda_max <= 0:
        raise ValueError("need d >= 1, beta > 0, lambda_max > 0")
    for name in ("E_etabar_sq", "E_etabar_3", "E_one_plus_etabar_4"):
        if getattr(m, name) is None:
            raise ValueError(f"missing moment field {name}")
    c0 = 4.0 * lambda_max * c.L2**2 * m.E_etabar_sq + 4.0 * lambda_max * c.H_star**2 + 2.0 * c.b
    c1 = c0 + 2.0 * d / beta
    M = max(
        math.sqrt(
            8.0 * c.b / c.a
            + 48.0 * lambda_max * (c.L2**2 * m.E_etabar_sq + c.H_star**2) / c.a
        ),
        (
            128.0 * lambda_max**2 * (c.L2**3 * m.E_etabar_3 + c.H_star**3) / c.a
        ) ** (1.0 / 3.0),
    )
    c2 = 4.0 * c.b * M**2 + 152.0 * (1.0 + lambda_max) ** 3 * (
        (1.0 + c.L2) ** 4 * m.E_one_plus_etabar_4 + (1.0 + c.H_star) ** 4
    ) * (1.0 + M) ** 2
    c3 = (1.0 + c.a * lambda_max) * c2 + 12.0 * d**2 / beta**2 * (
        lambda_max + 9.0 / c.a
    )
    return {"c0": c0, "c1": c1, "M": M, "c2": c2, "c3": c3}


def drift_constants(p: int, a: float, b: float, d: int, beta: float) -> dict:
    """Lyapunov drift pair for the diffusion: rates a*p/4 and level offsets."""
    Mbar = math.sqrt(
        1.0 / 3.0 + 4.0 * b / (3.0 * a) + 4.0 * d / (3.0 * a * beta)
        + 4.0 * (p - 2) / (3.0 * a * beta)
    )
    v_p = (1.0 + Mbar**2) ** (p / 2.0)
    return {
        "Mbar": Mbar,
        "v_p": v_p,
        "cbar": a * p / 4.0,
        "ctilde": 0.75 * a * p * v_p,
    }


def compute_discretization_constants(
    c: AssumptionConstants,
    m: ModelMoments,
    d: int,
    beta: float,
    lambda_max: float,
    c1: float,
    vbar_M2: float,
) -> dict:
    """One-step and gradient-noise variance terms plus the first pair of
    discretization prefactors (reported +inf when the exponential envelope
    leaves the floating range)."""
    warnings = []
    sY_bar = 2.0 * lambda_max * c.L1**2 * m.E_eta_sq
    sY_tilde = (
        sY_bar * c1 * (lambda_max + 1.0 / c.a)
        + 4.0 * lambda_max * c.L2**2 * m.E_etabar_sq
        + 4.0 * lambda_max * c.H_star**2
        + 2.0 * d / beta
    )
    sZ_bar = 8.0 * c.L2**2 * m.sigma_hat
    sZ_tilde = sZ_bar * (3.0 * vbar_M2 + c1 * (lambda_max + 1.0 / c.a) + 1.0)
    expo = 4.0 * c.L1**2 * m.E_eta_sq
    if expo > 700.0:
        warnings.append(
            f"exp({expo:.3g}) overflows: discretization prefactors are vacuous (+inf)"
        )
        C21 = C22 = math.inf
    else:
        e = math.exp(expo)
        C21 = 4.0 * e * (c.L1**2 * m.E_eta_sq * sY_bar + sZ_bar)
        C22 = 4.0 * e * (c.L1**2 * m.E_eta_sq * sY_tilde + sZ_tilde)
    return {
        "sigmaY_bar": sY_bar,
        "sigmaY_tilde": sY_tilde,
        "sigmaZ_bar": sZ_bar,
        "sigmaZ_tilde": sZ_tilde,
        "C21": C21,
        "C22": C22,
        "warnings": warnings,
    }


def _growth_exponent(s: float, K1: float) -> float:
    return (s * math.sqrt(K1) / 2.0 + 2.0 / math.sqrt(K1)) ** 2


def _growth_exponent_drop(t: float, b_tilde: float, K1: float) -> float:
    """g(b_tilde - t) - g(b_tilde) in product form (no cancellation)."""
    c1 = math.sqrt(K1) / 2.0
    c2 = 2.0 / math.sqrt(K1)
    return -(c1 * t) * (c1 * (2.0 * b_tilde - t) + 2.0 * c2)


def _log_integral_exp(b_tilde: float, K1: float, epsrel: float = 1e-8) -> float:
    """log of int_0^{b_tilde} exp((s sqrt(K1)/2 + 2/sqrt(K1))^2) ds.

    The integrand is scaled by its maximum (at the right endpoint) so the
    quadrature runs on values in (0, 1].  Relative to that maximum the mass
    sits in a boundary layer; everything below e^-60 of the peak is cut off
    analytically so the adaptive rule always sees the layer.
    """
    gmax = _growth_exponent(b_tilde, K1)
    cut = b_tilde
    if gmax > 60.0:
        # find where the scaled integrand drops to e^-60: solve the
        # product-form drop for t (quadratic in t, smaller root)
        c1 = math.sqrt(K1) / 2.0
        c2 = 2.0 / math.sqrt(K1)
        peak = c1 * b_tilde + c2
        t_cut = (peak - math.sqrt(max(peak**2 - 60.0, 0.0))) / c1
        if 0.0 < t_cut < b_tilde:
            cut = t_cut
    val, err = quad(
        lambda t: math.exp(_growth_exponent_drop(t, b_tilde, K1)),
        0.0,
        cut,
        epsabs=0.0,
        epsrel=epsrel,
        limit=200,
        full_output=1,
    )[:2]
    err += (b_tilde - cut) * math.exp(-60.0)
    if val <= 0 or err > 10.0 * epsrel * val:
        raise QuadratureError(
            f"contraction integral did not converge: value={val:.6g}, err={err:.3g}"
        )
    return gmax + math.log(val)


def compute_contraction_rate(
    a: float, b: float, d: int, beta: float, K1: float
) -> dict:
    """Contraction rate of the diffusion in the weighted truncated metric.

    Runs entirely in log space; when the admissible mixing constant underflows
    the result is clamped to the smallest positive float and flagged vacuous.
    """
    if min(a, b, K1, beta) <= 0 or d < 1:
        raise ValueError("a, b, K1, beta must be positive and d >= 1")
    warnings = []
    drift = drift_constants(2, a, b, d, beta)
    cbar, ctilde = drift["cbar"], drift["ctilde"]
    b_tilde = math.sqrt(2.0 * ctilde / cbar - 1.0)
    b_bar = math.sqrt(4.0 * ctilde * (1.0 + cbar) / cbar - 1.0)

    log_phibar = -(
        0.5 * math.log(4.0 * math.pi / K1)
        + math.log(b_bar)
        + _growth_exponent(b_bar, K1)
    )
    phi_bar = math.exp(log_phibar) if log_phibar > -745.0 else 0.0

    # largest admissible epsilon: 1 wedge the reciprocal of the integral term
    log_int = _log_integral_exp(b_tilde, K1)
    log_inv_eps = (
        math.log(8.0 * ctilde) + 0.5 * math.log(math.pi / K1) + log_int
    )
    log_eps = min(0.0, -log_inv_eps)
    epsilon = math.exp(log_eps) if log_eps > -745.0 else 0.0
    log_term3 = math.log(4.0 * ctilde * cbar) + log_eps

    log_cdot = min(log_phibar, math.log(cbar), log_term3) - math.log(2.0)
    c_dot = math.exp(log_cdot) if log_cdot > -745.0 else 0.0
    if c_dot == 0.0:
        warnings.append(
            "contraction rate underflows the floating range; reported as the "
            "smallest positive float (bounds using it are vacuous)"
        )
        c_dot = _TINY
    if epsilon == 0.0:
        epsilon = _TINY
    if phi_bar == 0.0:
        phi_bar = _TINY
    return {
        "Mbar2": drift["Mbar"],
        "vbar_M2": drift["v_p"],
        "cbar2": cbar,
        "ctilde2": ctilde,
        "K1": K1,
        "b_tilde": b_tilde,
        "b_bar": b_bar,
        "phi_bar": phi_bar,
        "epsilon": epsilon,
        "c_dot": c_dot,
        "log_c_dot": log_cdot,
        "warnings": warnings,
    }


def _sqrt_or_inf(x: float) -> float:
    return math.inf if math.isinf(x) else math.sqrt(x)


def compute_theorem_constants(
    c: AssumptionConstants,
    m: ModelMoments,
    d: int,
    beta: float,
    lambda_max: float,
    mom: dict,
    disc: dict,
    contr: dict,
    c_hat: float,
    int_V2_pi: float,
    vbar_M4: float,
    E_theta0_2: float = 0.0,
    E_theta0_4: float = 0.0,
) -> dict:
    """Convergence-bound prefactors in both transport metrics plus the
    excess-risk constants."""
    if c_hat <= 0:
        raise ValueError(
            "c_hat must be a positive user-supplied contraction prefactor"
        )
    if int_V2_pi < 1.0:
        raise ValueError("int_V2_pi must be >= 1 (the weight function is >= 1)")
    warnings = []
    c_dot = contr["c_dot"]
    cap = min(c_dot, c.a / 4.0)
    C21, C22 = disc["C21"], disc["C22"]
    c3 = mom["c3"]
    c1 = mom["c1"]
    tail = lambda_max + 1.0 / c.a

    one_minus = -math.expm1(-c_dot)          # 1 - e^{-c_dot}, exact for tiny c_dot
    one_minus_half = -math.expm1(-c_dot / 2.0)

    def div(num: float, den: float) -> float:
        # a contraction rate at the floating floor makes these prefactors
        # overflow; +inf keeps the bound valid, merely vacuous
        return num / den if den > 0 and math.isfinite(num / den) else math.inf

    with np.errstate(over="ignore"):
        C23 = c_hat * (1.0 + div(2.0, cap)) * (math.exp(min(cap, _LOG_MAX)) * C21 + 12.0)
        C24 = div(c_hat, one_minus) * (C22 + 12.0 * c3 * tail + 9.0 * vbar_M4 + 15.0)
        C23_star = math.sqrt(2.0 * c_hat) * (1.0 + div(4.0, cap)) * (
            math.exp(min(cap / 2.0, _LOG_MAX)) * _sqrt_or_inf(C21) + 2.0 * math.sqrt(2.0)
        )
        C24_star = div(math.sqrt(2.0 * c_hat), one_minus_half) * (
            _sqrt_or_inf(C22)
            + 2.0 * math.sqrt(2.0 * c3) * math.sqrt(tail)
            + math.sqrt(3.0 * vbar_M4)
            + math.sqrt(15.0)
        )
    Cbar2 = _sqrt_or_inf(C21) + _sqrt_or_inf(C22)
    Cbar3 = C23 + C24
    Ctilde2 = lambda_max**0.25 * Cbar2
    Ctilde3 = math.sqrt(2.0) * (C23_star + C24_star)

    C0 = c_dot / 2.0
    C1 = 2.0 * (
        (math.sqrt(lambda_max) * (Cbar2 + Cbar3) + c_hat)
        + c_hat * (1.0 + int_V2_pi)
    )
    C2, C3 = Cbar2, Cbar3
    C4 = c_dot / 4.0
    C5 = 2.0 * (
        (lambda_max**0.25 * (Ctilde2 + Ctilde3) + math.sqrt(2.0 * c_hat))
        + math.sqrt(c_hat) * (1.0 + int_V2_pi)
    )
    C6, C7 = Ctilde2, Ctilde3

    growth = (
        c.L1 * m.E_eta * (E_theta0_2 + c1 * tail) + c.L2 * m.E_etabar + c.H_star
    )
    Csharp0 = C4
    Csharp1 = C5 * growth * (E_theta0_4 + 1.0)
    Csharp2 = (C6 + C7) * growth
    Csharp3 = d / (2.0 * beta) * math.log(
        math.e * c.L1 * m.E_eta / c.a * (c.b * beta / d + 1.0)
    )
    for name, val in (("C1", C1), ("C3", C3), ("C5", C5), ("C7", C7)):
        if math.isinf(val):
            warnings.append(f"{name} is +inf: the corresponding bound is vacuous")
    return {
        "C23": C23, "C24": C24, "C23_star": C23_star, "C24_star": C24_star,
        "Cbar2": Cbar2, "Cbar3": Cbar3, "Ctilde2": Ctilde2, "Ctilde3": Ctilde3,
        "C0": C0, "C1": C1, "C2": C2, "C3": C3,
        "C4": C4, "C5": C5, "C6": C6, "C7": C7,
        "Csharp0": Csharp0, "Csharp1": Csharp1,
        "Csharp2": Csharp2, "Csharp3": Csharp3,
        "warnings": warnings,
    }


# formula tag for every reported constant (the provenance column of the table)
FORMULAS = {
    "lambda_max": "min{min(a, a^(1/3)) / (16 (1+L1)^2 sqrt(E[(1+eta)^4])), 1/a}",
    "c0": "4 lam_max L2^2 E[etabar^2] + 4 lam_max H*^2 + 2 b",
    "c1": "c0 + 2 d / beta",
    "M": "max{sqrt(8b/a + 48 lam_max (L2^2 E[etabar^2] + H*^2)/a), (128 lam_max^2 (L2^3 E[etabar^3] + H*^3)/a)^(1/3)}",
    "c2": "4 b M^2 + 152 (1+lam_max)^3 ((1+L2)^4 E[(1+etabar)^4] + (1+H*)^4) (1+M)^2",
    "c3": "(1 + a lam_max) c2 + 12 d^2 beta^-2 (lam_max + 9/a)",
    "sigma_hat": "E[(eta(X) + eta(E X))^2 |X - E X|^2]",
    "sigmaY_bar": "2 lam_max L1^2 E[eta^2]",
    "sigmaY_tilde": "sigmaY_bar c1 (lam_max + 1/a) + 4 lam_max L2^2 E[etabar^2] + 4 lam_max H*^2 + 2 d/beta",
    "sigmaZ_bar": "8 L2^2 sigma_hat",
    "sigmaZ_tilde": "sigmaZ_bar (3 v2(Mbar2) + c1 (lam_max + 1/a) + 1)",
    "Mbar2": "sqrt(1/3 + 4b/(3a) + 4d/(3 a beta))",
    "Mbar4": "sqrt(1/3 + 4b/(3a) + 4d/(3 a beta) + 8/(3 a beta))",
    "vbar_M2": "(1 + Mbar2^2)",
    "vbar_M4": "(1 + Mbar4^2)^2",
    "cbar2": "a/2", "ctilde2": "(3/2) a v2(Mbar2)",
    "cbar4": "a", "ctilde4": "3 a v4(Mbar4)",
    "K1": "L1 E[eta]",
    "b_tilde": "sqrt(2 ctilde2 / cbar2 - 1)",
    "b_bar": "sqrt(4 ctilde2 (1 + cbar2) / cbar2 - 1)",
    "phi_bar": "1 / (sqrt(4 pi / K1) b_bar exp((b_bar sqrt(K1)/2 + 2/sqrt(K1))^2))",
    "epsilon": "1 wedge (8 ctilde2 sqrt(pi/K1) int_0^{b_tilde} exp((s sqrt(K1)/2 + 2/sqrt(K1))^2) ds)^-1",
    "c_dot": "min{phi_bar, cbar2, 4 ctilde2 epsilon cbar2} / 2",
    "c_hat": "user-supplied contraction prefactor (not derived here); default 1.0",
    "C21": "4 exp(4 L1^2 E[eta^2]) (L1^2 E[eta^2] sigmaY_bar + sigmaZ_bar)",
    "C22": "4 exp(4 L1^2 E[eta^2]) (L1^2 E[eta^2] sigmaY_tilde + sigmaZ_tilde)",
    "C23": "c_hat (1 + 2/min{c_dot, a/4}) (exp(min{c_dot, a/4}) C21 + 12)",
    "C24": "c_hat / (1 - exp(-c_dot)) (C22 + 12 c3 (lam_max + 1/a) + 9 vbar_M4 + 15)",
    "C23_star": "sqrt(2 c_hat) (1 + 4/min{c_dot, a/4}) (exp(min{c_dot, a/4}/2) sqrt(C21) + 2 sqrt(2))",
    "C24_star": "sqrt(2 c_hat)/(1 - exp(-c_dot/2)) (sqrt(C22) + 2 sqrt(2 c3 (lam_max + 1/a)) + sqrt(3 vbar_M4) + sqrt(15))",
    "Cbar2": "sqrt(C21) + sqrt(C22)",
    "Cbar3": "C23 + C24",
    "Ctilde2": "lam_max^(1/4) (sqrt(C21) + sqrt(C22))",
    "Ctilde3": "sqrt(2) (C23_star + C24_star)",
    "C0": "c_dot / 2",
    "C1": "2 [(sqrt(lam_max)(Cbar2 + Cbar3) + c_hat) + c_hat (1 + int V2 dpi)]",
    "C2": "Cbar2",
    "C3": "Cbar3",
    "C4": "c_dot / 4",
    "C5": "2 [(lam_max^(1/4)(Ctilde2 + Ctilde3) + sqrt(2 c_hat)) + sqrt(c_hat)(1 + int V2 dpi)]",
    "C6": "Ctilde2",
    "C7": "Ctilde3",
    "Csharp0": "C4",
    "Csharp1": "C5 (L1 E[eta](E|theta0|^2 + c1 (lam_max + 1/a)) + L2 E[etabar] + H*) (E|theta0|^4 + 1)",
    "Csharp2": "(C6 + C7) (L1 E[eta](E|theta0|^2 + c1 (lam_max + 1/a)) + L2 E[etabar] + H*)",
    "Csharp3": "d/(2 beta) log(e L1 E[eta] / a (b beta / d + 1))",
    "int_V2_pi": "int (1 + |theta|^2) dpi; default bound 1 + b/a + d/(a beta)",
}

_REPORT_FIELDS = [
    "lambda_max", "c0", "c1", "M", "c2", "c3",
    "sigmaY_bar", "sigmaY_tilde", "sigma_hat", "sigmaZ_bar", "sigmaZ_tilde",
    "Mbar2", "Mbar4", "vbar_M2", "vbar_M4",
    "cbar2", "ctilde2", "cbar4", "ctilde4",
    "K1", "b_tilde", "b_bar", "phi_bar", "epsilon", "c_dot",
    "C21", "C22", "C23", "C24", "C23_star", "C24_star",
    "Cbar2", "Cbar3", "Ctilde2", "Ctilde3",
    "C0", "C1", "C2", "C3", "C4", "C5", "C6", "C7",
    "Csharp0", "Csharp1", "Csharp2", "Csharp3",
    "c_hat", "int_V2_pi",
]


@dataclass
class ConstantsReport:
    """Every computed constant with its defining formula and input echo."""

    values: dict
    inputs: dict
    warnings: list = field(default_factory=list)

    def __getattr__(self, name):
        try:
            return self.__dict__["values"][name]
        except KeyError:
            raise AttributeError(name) from None

    def formula(self, name: str) -> str:
        return FORMULAS[name]

    def to_json(self, **kw) -> str:
        return json.dumps(
            {"values": self.values, "inputs": self.inputs, "warnings": self.warnings},
            **kw,
        )

    @classmethod
    def from_json(cls, text: str) -> "ConstantsReport":
        obj = json.loads(text)
        return cls(values=obj["values"], inputs=obj["inputs"], warnings=obj["warnings"])

    def table(self) -> str:
        """Human-readable table: one row per constant (name, value, formula)."""
        width = max(len(k) for k in _REPORT_FIELDS)
        lines = [f"{'constant':<{width}}  {'value':>14}  formula"]
        for k in _REPORT_FIELDS:
            lines.append(f"{k:<{width}}  {self.values[k]:>14.6g}  {FORMULAS[k]}")
        return "\n".join(lines)


def compute_constants_report(
    c: AssumptionConstants,
    m: ModelMoments,
    d: int,
    beta: float,
    c_hat: float = 1.0,
    int_V2_pi: Optional[float] = None,
    E_theta0_2: float = 0.0,
    E_theta0_4: float = 0.0,
) -> ConstantsReport:
    """Assemble the full report from declared constants and estimated moments."""
    warnings: list[str] = []
    lam_max = compute_lambda_max(c.a, c.L1, m.E_one_plus_eta_4)
    mom = compute_moment_constants(c, m, d, beta, lam_max)
    contr = compute_contraction_rate(c.a, c.b, d, beta, K1=c.L1 * m.E_eta)
    warnings += contr.pop("warnings")
    d4 = drift_constants(4, c.a, c.b, d, beta)
    disc = compute_discretization_constants(
        c, m, d, beta, lam_max, mom["c1"], contr["vbar_M2"]
    )
    warnings += disc.pop("warnings")
    if int_V2_pi is None:
        int_V2_pi = 1.0 + c.b / c.a + d / (c.a * beta)
        int_v2_source = "dissipativity bound"
    else:
        int_v2_source = "user-supplied / Monte-Carlo"
    thm = compute_theorem_constants(
        c, m, d, beta, lam_max, mom, disc, contr, c_hat, int_V2_pi,
        vbar_M4=d4["v_p"], E_theta0_2=E_theta0_2, E_theta0_4=E_theta0_4,
    )
    warnings += thm.pop("warnings")

    values = {"lambda_max": lam_max, "sigma_hat": m.sigma_hat}
    values.update(mom)
    values.update({k: v for k, v in disc.items()})
    values.update({k: v for k, v in contr.items() if k != "log_c_dot"})
    values.update(
        {"Mbar4": d4["Mbar"], "vbar_M4": d4["v_p"],
         "cbar4": d4["cbar"], "ctilde4": d4["ctilde"]}
    )
    values.update(thm)
    values.update({"c_hat": c_hat, "int_V2_pi": int_V2_pi})
    inputs = {
        "L1": c.L1, "L2": c.L2, "a": c.a, "b": c.b,
        "H_star": c.H_star, "eta0": c.eta0,
        "d": d, "beta": beta,
        "E_theta0_2": E_theta0_2, "E_theta0_4": E_theta0_4,
        "moments": {k: getattr(m, k) for k in (
            "E_eta", "E_eta_sq", "E_one_plus_eta_4", "E_etabar", "E_etabar_sq",
            "E_etabar_3", "E_etabar_4", "E_one_plus_etabar_4", "sigma_hat", "E_b",
        )},
        "n_mc": m.n_mc,
        "int_V2_pi_source": int_v2_source,
        "c_hat_note": FORMULAS["c_hat"],
        "log_c_dot": contr["log_c_dot"],
    }
    return ConstantsReport(values=values, inputs=inputs, warnings=warnings)


@dataclass(frozen=True)
class BudgetResult:
    metric: str
    epsilon: float
    lam_star: float
    n_star: int
    log_requirement: float    # required lam * n


def budget(
    epsilon_target: float,
    report: ConstantsReport,
    metric: str = "W1",
    E_theta0_4: float = 0.0,
) -> BudgetResult:
    """Stepsize and iteration budget reaching the target accuracy.

    The exponential term is split against half the target; the returned pair
    satisfies the displayed sufficient conditions after rounding up.
    """
    if epsilon_target <= 0:
        raise ValueError("epsilon_target must be positive")
    v = report.values
    if metric == "W1":
        tail, rate, pref = v["C2"] + v["C3"], v["C0"], v["C1"]
        lam_star = min(epsilon_target**2 / (4.0 * tail**2), v["lambda_max"])
    elif metric == "W2":
        tail, rate, pref = v["C6"] + v["C7"], v["C4"], v["C5"]
        lam_star = min(epsilon_target**4 / (16.0 * tail**4), v["lambda_max"])
    else:
        raise ValueError("metric must be 'W1' or 'W2'")
    if not (lam_star > 0 and math.isfinite(lam_star)):
        raise ValueError(
            f"{metric} tail constant is not finite; the budget is undefined"
        )
    log_req = math.log(2.0 * pref * (1.0 + E_theta0_4) / epsilon_target) / rate
    n_real = log_req / lam_star
    if not math.isfinite(n_real) or n_real >= 2**63 - 1:
        raise BudgetOverflowError(log_req, lam_star)
    return BudgetResult(
        metric=metric,
        epsilon=epsilon_target,
        lam_star=lam_star,
        n_star=max(1, math.ceil(n_real)),
        log_requirement=log_req,
    )
