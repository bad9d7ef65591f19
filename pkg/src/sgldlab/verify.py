"""Numerical validation of the regularity conditions a gradient model declares.

The checks are one-sided pointwise inequalities (unbiasedness aside), so they
need no tolerance beyond floating-point slack: a trial fails only if the left
side exceeds the right side by more than 1e-9 relative.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .models import GradientModel

__all__ = [
    "ModelMoments",
    "CheckResult",
    "VerificationReport",
    "verify_assumptions",
    "estimate_moments",
    "unbiasedness_test",
    "REL_SLACK",
]

REL_SLACK = 1e-9


@dataclass
class ModelMoments:
    """Monte-Carlo estimates of the data-law moments the constants need.

    ``eta_bar`` denotes (eta(x) + eta(0)) |x|; ``sigma_hat`` is the mixed
    moment E[(eta(X) + eta(E X))^2 |X - E X|^2].  Standard errors accompany
    every estimate, keyed by field name.
    """

    E_eta: float
    E_eta_sq: float
    E_one_plus_eta_4: float
    E_etabar: float
    E_etabar_sq: float
    E_etabar_3: float
    E_etabar_4: float
    E_one_plus_etabar_4: float
    sigma_hat: float
    E_b: float
    n_mc: int
    std_errors: dict = field(default_factory=dict)
    saturated_draws: int = 0
    warnings: list = field(default_factory=list)

    def to_json(self, **kw) -> str:
        return json.dumps(asdict(self), **kw)


@dataclass
class CheckResult:
    name: str
    passed: bool
    trials: int
    worst_margin: float          # min over trials of rhs - lhs (scaled slack applied)
    worst_ratio: float           # max over trials of lhs / rhs-without-constant
    witness: Optional[dict] = None


@dataclass
class VerificationReport:
    model: str
    seed: int
    trials: int
    region_radius_theta: float
    region_radius_x: float
    lipschitz_theta: CheckResult
    lipschitz_x: CheckResult
    dissipativity: CheckResult
    growth_bound: CheckResult
    unbiasedness: Optional[CheckResult] = None

    @property
    def all_passed(self) -> bool:
        checks = [
            self.lipschitz_theta,
            self.lipschitz_x,
            self.dissipativity,
            self.growth_bound,
        ]
        if self.unbiasedness is not None:
            checks.append(self.unbiasedness)
        return all(c.passed for c in checks)

    def to_json(self, **kw) -> str:
        return json.dumps(asdict(self), **kw)


def _uniform_ball(rng: np.random.Generator, dim: int, radius: float) -> np.ndarray:
    v = rng.standard_normal(dim)
    v /= np.linalg.norm(v)
    return radius * rng.random() ** (1.0 / dim) * v


def _sample_data_truncated(model, rng, radius: float, max_tries: int = 1000):
    for _ in range(max_tries):
        x = model.sample_data(rng)
        if model.data_norm(x) <= radius:
            return x
    raise RuntimeError(
        f"{model.name}: no data draw with |x| <= {radius} in {max_tries} tries"
    )


def _violates(lhs: float, rhs: float) -> bool:
    return lhs > rhs + REL_SLACK * max(1.0, abs(lhs), abs(rhs))


def verify_assumptions(
    model: GradientModel,
    region_radius_theta: float = 10.0,
    region_radius_x: float = np.inf,
    trials: int = 10_000,
    seed: int = 0,
    n_mc_unbiased: int = 20_000,
) -> VerificationReport:
    """Check every declared pointwise inequality at ``trials`` random tuples.

    theta, theta' are uniform in the ball of radius ``region_radius_theta``;
    x, x' follow the model's data law truncated to |x| <= ``region_radius_x``.
    """
    if trials < 1000:
        raise ValueError("trials must be >= 1000")
    c = model.constants
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    d = model.dim_theta

    worst = {k: np.inf for k in ("lip_theta", "lip_x", "diss", "growth")}
    ratio = {k: 0.0 for k in ("lip_theta", "lip_x", "diss", "growth")}
    witness = {k: None for k in ("lip_theta", "lip_x", "diss", "growth")}
    fails = {k: 0 for k in ("lip_theta", "lip_x", "diss", "growth")}

    def record(key, lhs, rhs, scale, info):
        margin = rhs - lhs
        if margin < worst[key]:
            worst[key] = margin
            witness[key] = info
        if scale > 0:
            ratio[key] = max(ratio[key], lhs / scale)
        if _violates(lhs, rhs):
            fails[key] += 1

    for _ in range(trials):
        theta = _uniform_ball(rng, d, region_radius_theta)
        theta_p = _uniform_ball(rng, d, region_radius_theta)
        x = _sample_data_truncated(model, rng, region_radius_x)
        x_p = _sample_data_truncated(model, rng, region_radius_x)
        h = model.stoch_grad(theta, x)
        eta_x = model.eta(x)
        tup = {
            "theta": theta.tolist(),
            "theta_p": theta_p.tolist(),
            "x_norm": model.data_norm(x),
            "x_p_norm": model.data_norm(x_p),
        }

        # |H(t,x) - H(t',x)| <= L1 eta(x) |t - t'|
        lhs = float(np.linalg.norm(h - model.stoch_grad(theta_p, x)))
        scale = eta_x * float(np.linalg.norm(theta - theta_p))
        record("lip_theta", lhs, c.L1 * scale, scale, tup)

        # |H(t,x) - H(t,x')| <= L2 (eta(x)+eta(x')) (1+|t|) |x - x'|
        lhs = float(np.linalg.norm(h - model.stoch_grad(theta, x_p)))
        scale = (
            (eta_x + model.eta(x_p))
            * (1.0 + float(np.linalg.norm(theta)))
            * model.data_diff_norm(x, x_p)
        )
        record("lip_x", lhs, c.L2 * scale, scale, tup)

        # <H(t,x), t> >= <t, A(x) t> - b(x)
        lhs = model.dissipativity_quad(theta, x) - model.b_of(x)
        record("diss", lhs, float(h @ theta), 0.0, tup)

        # |H(t,x)| <= L1 eta(x) |t| + L2 eta_bar(x) + H_star
        lhs = float(np.linalg.norm(h))
        rhs = (
            c.L1 * eta_x * float(np.linalg.norm(theta))
            + c.L2 * model.eta_bar(x)
            + c.H_star
        )
        record("growth", lhs, rhs, rhs, tup)

    def result(key, name):
        return CheckResult(
            name=name,
            passed=fails[key] == 0,
            trials=trials,
            worst_margin=float(worst[key]),
            worst_ratio=float(ratio[key]),
            witness=witness[key] if fails[key] else None,
        )

    unbias = None
    if model.has_exact_full_gradient:
        thetas = [_uniform_ball(rng, d, region_radius_theta) for _ in range(5)]
        z = unbiasedness_test(model, thetas, n_mc_unbiased, seed + 1)
        zmax = float(np.max(np.abs(z)))
        unbias = CheckResult(
            name="unbiasedness",
            passed=zmax <= 4.0,
            trials=n_mc_unbiased,
            worst_margin=4.0 - zmax,
            worst_ratio=zmax,
        )

    return VerificationReport(
        model=model.name,
        seed=seed,
        trials=trials,
        region_radius_theta=region_radius_theta,
        region_radius_x=float(region_radius_x),
        lipschitz_theta=result("lip_theta", "lipschitz_theta"),
        lipschitz_x=result("lip_x", "lipschitz_x"),
        dissipativity=result("diss", "dissipativity"),
        growth_bound=result("growth", "growth_bound"),
        unbiasedness=unbias,
    )


def unbiasedness_test(
    model: GradientModel,
    thetas,
    n_mc: int,
    seed: int = 0,
) -> np.ndarray:
    """Per-theta, per-coordinate z-scores of the MC gradient mean vs exact.

    A constant-in-x gradient yields zero standard error; that case degrades
    to an exact comparison (z = 0 on match, inf on mismatch).
    """
    if not model.has_exact_full_gradient:
        raise ValueError(f"{model.name} declares no exact full gradient")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    out = np.zeros((len(thetas), model.dim_theta))
    for i, theta in enumerate(thetas):
        draws = model.sample_data_batch(rng, n_mc)
        vals = model.stoch_grad_many(np.asarray(theta, dtype=float), draws)
        mean = vals.mean(axis=0)
        se = vals.std(axis=0, ddof=1) / np.sqrt(n_mc)
        h = model.full_grad(np.asarray(theta, dtype=float))
        diff = mean - h
        # a constant H (deterministic gradient) leaves only summation
        # round-off in both diff and se; treat that as an exact match
        exact = np.abs(diff) <= 1e-12 * (1.0 + np.abs(h))
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.where(se > 0, diff / se, np.inf)
        out[i] = np.where(exact, 0.0, z)
    return out


def _mc_field(values: np.ndarray) -> tuple[float, float]:
    values = np.asarray(values, dtype=float)
    n = values.size
    return float(values.mean()), float(values.std(ddof=1) / np.sqrt(n))


def estimate_moments(
    model: GradientModel,
    n_mc: int = 100_000,
    seed: int = 0,
) -> ModelMoments:
    """Plain Monte-Carlo moments of the data law with standard errors.

    E[x] is estimated on a first stream, then every moment (including the
    mixed one that needs eta(E x)) is computed on a fresh second stream.
    """
    if n_mc < 10_000:
        raise ValueError("n_mc must be >= 10^4")
    ss = np.random.SeedSequence(seed)
    mean_ss, main_ss = ss.spawn(2)

    rng = np.random.default_rng(mean_ss)
    first = model.sample_data_batch(rng, min(n_mc, 50_000))
    vecs = np.stack([model.data_as_vector(x) for x in first])
    x_mean_vec = vecs.mean(axis=0)
    x_mean = model.data_from_vector(x_mean_vec)
    eta_at_mean = model.eta(x_mean)

    rng = np.random.default_rng(main_ss)
    draws = model.sample_data_batch(rng, n_mc)
    eta = np.empty(n_mc)
    etabar = np.empty(n_mc)
    bvals = np.empty(n_mc)
    sig = np.empty(n_mc)
    saturated = 0
    for i in range(n_mc):
        x = draws[i]
        e = model.eta(x)
        if not np.isfinite(e):
            saturated += 1
            e = np.finfo(float).max
        eta[i] = e
        etabar[i] = model.eta_bar(x)
        bvals[i] = model.b_of(x)
        dv = model.data_as_vector(x) - x_mean_vec
        sig[i] = (e + eta_at_mean) ** 2 * float(dv @ dv)

    fields = {
        "E_eta": eta,
        "E_eta_sq": eta**2,
        "E_one_plus_eta_4": (1.0 + eta) ** 4,
        "E_etabar": etabar,
        "E_etabar_sq": etabar**2,
        "E_etabar_3": etabar**3,
        "E_etabar_4": etabar**4,
        "E_one_plus_etabar_4": (1.0 + etabar) ** 4,
        "sigma_hat": sig,
        "E_b": bvals,
    }
    means, errs = {}, {}
    for name, vals in fields.items():
        means[name], errs[name] = _mc_field(vals)

    warnings = []
    if saturated:
        warnings.append(
            f"{saturated} of {n_mc} eta evaluations saturated the floating range"
        )
    return ModelMoments(
        n_mc=n_mc, std_errors=errs, saturated_draws=saturated,
        warnings=warnings, **means,
    )
