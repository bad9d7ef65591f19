"""Experiment orchestration: synthetic data, chain sweeps, rate fits and
one-sided bound checks.

Every experiment is reproducible from its config and seed; a manifest with
the config echo, seed, package versions and wall-clock time is written next
to the outputs.
"""

from __future__ import annotations

import json
import math
import platform
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.stats import gaussian_kde

from . import __version__
from .chain import (
    ChainConfig,
    run_chain,
    run_ensemble,
    terminal_states,
    write_samples_csv,
)
from .constants import ConstantsReport
from .models import (
    GradientModel,
    LogisticDataset,
    LogisticPosteriorModel,
    make_model,
    sigmoid,
)
from .wasserstein import (
    EmpiricalMeasure,
    sliced_wasserstein,
    wasserstein_1d,
    wasserstein_exact,
)

__all__ = [
    "ExperimentConfig",
    "CellResult",
    "RateFit",
    "BoundCheckRow",
    "BoundCheckReport",
    "FIGURE1",
    "gen_figure1_data",
    "run_figure1",
    "rate_experiment",
    "bound_check",
    "plateau_steps",
    "write_manifest",
]

# the worked two-dimensional posterior-sampling configuration
FIGURE1 = {
    "d": 2,
    "n_data": 1000,
    "z_scale": math.sqrt(0.1),
    "a_hat": (3.0, -3.0),
    "K": 10,
    "lam": 0.1,
    "beta": 1.0,
    "n_samples": 25_000,
    "kde_grid": 128,
    "kde_pad": 0.10,
}


def write_manifest(directory: Path, name: str, payload: dict) -> Path:
    import scipy

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    payload = dict(payload)
    payload["versions"] = {
        "sgldlab": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
    }
    path = directory / f"{name}_manifest.json"
    path.write_text(json.dumps(payload, indent=2, default=str))
    return path


# ---------------------------------------------------------------------------
# Synthetic data for the worked posterior
# ---------------------------------------------------------------------------


def gen_figure1_data(seed: int = 0, path: Optional[Path] = None) -> LogisticDataset:
    """Two-dimensional logistic data: z ~ N(0, 0.1 I), labels from the
    logistic likelihood at a weight drawn once from the bimodal prior.

    The generating weight is not pinned by the reference setup; drawing it
    from the prior keeps the simulation self-consistent and it is recorded in
    the manifest when the CLI writes one.
    """
    spec = FIGURE1
    ss = np.random.SeedSequence(seed)
    w_ss, z_ss, y_ss = ss.spawn(3)
    a_hat = np.asarray(spec["a_hat"])
    rng = np.random.default_rng(w_ss)
    sign = 1.0 if rng.random() < 0.5 else -1.0
    w_star = sign * a_hat + rng.standard_normal(spec["d"])
    z = spec["z_scale"] * np.random.default_rng(z_ss).standard_normal(
        (spec["n_data"], spec["d"])
    )
    probs = sigmoid(z @ w_star)
    y = (np.random.default_rng(y_ss).random(spec["n_data"]) < probs).astype(float)
    dataset = LogisticDataset(z, y)
    if path is not None:
        header = ",".join(f"z{j}" for j in range(spec["d"])) + ",y"
        body = np.column_stack([z, y])
        np.savetxt(path, body, fmt=["%.17g"] * spec["d"] + ["%d"],
                   delimiter=",", header=header, comments="")
    return dataset


def load_figure1_data(path: Path) -> LogisticDataset:
    body = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return LogisticDataset(body[:, :-1], body[:, -1])


def _kde_grid(samples: np.ndarray, n_grid: int, pad: float):
    lo = samples.min(axis=0)
    hi = samples.max(axis=0)
    span = hi - lo
    lo = lo - pad * span
    hi = hi + pad * span
    axes = [np.linspace(lo[j], hi[j], n_grid) for j in range(samples.shape[1])]
    return axes


def run_figure1(
    dataset: LogisticDataset,
    seed: int = 0,
    outdir: Optional[Path] = None,
) -> dict:
    """Sample the worked posterior and lay a kernel density estimate on a grid.

    Returns sample array, KDE grid, the Riemann integral of the density over
    the grid, and the chain's running second-moment ceiling.
    """
    spec = FIGURE1
    model = LogisticPosteriorModel(
        dataset, a_hat=spec["a_hat"], n_batch=spec["K"], beta=spec["beta"]
    )
    config = ChainConfig(
        lam=spec["lam"], beta=spec["beta"], n_steps=spec["n_samples"], seed=seed
    )
    out = run_chain(config, model)
    samples = out.samples

    kde = gaussian_kde(samples.T)  # Scott's rule bandwidth
    ax0, ax1 = _kde_grid(samples, spec["kde_grid"], spec["kde_pad"])
    g0, g1 = np.meshgrid(ax0, ax1, indexing="ij")
    density = kde(np.vstack([g0.ravel(), g1.ravel()])).reshape(g0.shape)
    cell = (ax0[1] - ax0[0]) * (ax1[1] - ax1[0])
    integral = float(density.sum() * cell)

    result = {
        "samples": samples,
        "chain": out,
        "axes": (ax0, ax1),
        "density": density,
        "kde_integral": integral,
        "moment_trail_max": float(np.nanmax(out.moment_trail[:, 0])),
        "bounded": out.diverged_at is None
        and bool(np.isfinite(out.moment_trail).all()),
        "warnings": out.warnings,
    }
    if outdir is not None:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        write_samples_csv(out, outdir / "figure1_samples.csv")
        rows = np.column_stack([g0.ravel(), g1.ravel(), density.ravel()])
        np.savetxt(outdir / "figure1_kde.csv", rows, fmt="%.17g", delimiter=",",
                   header="x0,x1,density", comments="")
        result["samples_path"] = outdir / "figure1_samples.csv"
        result["kde_path"] = outdir / "figure1_kde.csv"
    return result


# ---------------------------------------------------------------------------
# Stepsize sweeps, plateau detection, rate fits
# ---------------------------------------------------------------------------


@dataclass
class ExperimentConfig:
    """Sweep axes and estimator choices for the rate/bound experiments."""

    model: str
    model_params: dict = field(default_factory=dict)
    lambda_grid: tuple = (0.025, 0.05, 0.1, 0.2)
    n_steps: Optional[tuple] = None      # per-lambda override; None = automatic
    n_chains: int = 1024
    beta: float = 1.0
    reference: str = "exact_sampler"     # or "long_run_chain"
    metric: str = "W1"                   # W1 | W2 | sliced
    seed: int = 0
    mix_time: float = 30.0               # automatic cap: ~mix_time/lam steps
    n_groups: int = 8                    # group splits for MC standard errors
    n_reps: int = 4                      # independent replicas averaged per cell
    output_dir: Optional[str] = None

    def __post_init__(self):
        grid = tuple(float(v) for v in self.lambda_grid)
        if any(v <= 0 for v in grid) or list(grid) != sorted(grid):
            raise ValueError("lambda_grid must be positive and sorted ascending")
        if self.metric not in ("W1", "W2", "sliced"):
            raise ValueError("metric must be W1, W2 or sliced")
        if self.reference not in ("exact_sampler", "long_run_chain"):
            raise ValueError("reference must be exact_sampler or long_run_chain")
        if self.n_steps is not None and len(self.n_steps) != len(grid):
            raise ValueError("n_steps must match lambda_grid in length")
        if self.n_chains < self.n_groups:
            raise ValueError("need at least n_groups chains")
        self.lambda_grid = grid

    def build_model(self) -> GradientModel:
        return make_model(self.model, **self.model_params)


@dataclass
class CellResult:
    lam: float
    n_steps: int
    distance: float              # mean over replicas of the full-N estimate
    std_error: float             # between-replica SE of that mean
    distance_at_half: float
    plateaued: bool
    method: str
    n_theory: Optional[float] = None
    replica_values: list = field(default_factory=list)


@dataclass
class RateFit:
    cells: list
    alpha: float
    alpha_halfwidth: float
    log_prefactor: float
    residuals: list
    warnings: list = field(default_factory=list)

    def to_json(self, **kw) -> str:
        return json.dumps(
            {
                "cells": [asdict(c) for c in self.cells],
                "alpha": self.alpha,
                "alpha_halfwidth": self.alpha_halfwidth,
                "log_prefactor": self.log_prefactor,
                "residuals": self.residuals,
                "warnings": self.warnings,
            },
            **kw,
        )


def plateau_steps(
    lam: float,
    mix_time: float,
    report: Optional[ConstantsReport] = None,
    E_theta0_4: float = 0.0,
) -> tuple[int, Optional[float]]:
    """Step count for one sweep cell.

    Prefers the step count at which the computed exponential term drops below
    10% of the stepsize term; that count is astronomically conservative for
    most inputs, so it is capped at ~mix_time/lam steps and the plateau test
    has the final word.
    """
    n_cap = max(2, math.ceil(mix_time / lam))
    n_theory = None
    if report is not None:
        v = report.values
        tail = (v["C2"] + v["C3"]) * math.sqrt(lam)
        if math.isfinite(tail) and tail > 0 and v["C0"] > 0:
            num = math.log(10.0 * v["C1"] * (1.0 + E_theta0_4) / tail)
            n_exp = num / (v["C0"] * lam)
            n_fallback = 10.0 / (v["c_dot"] * lam)
            n_theory = max(1.0, min(n_exp, n_fallback))
    n = n_cap if n_theory is None else int(min(n_theory, n_cap))
    return max(2, n), n_theory


def _distance(metric: str, a: np.ndarray, b: np.ndarray, seed: int = 0) -> float:
    mu, nu = EmpiricalMeasure(a), EmpiricalMeasure(b)
    if metric in ("W1", "W2"):
        p = 1 if metric == "W1" else 2
        # in one dimension the sorted formula IS the min-cost matching
        if mu.dim == 1 and mu.n == nu.n:
            return wasserstein_1d(mu, nu, p=p).value
        return wasserstein_exact(mu, nu, p=p).value
    return sliced_wasserstein(mu, nu, p=2, seed=seed).value


def _distance_with_se(
    metric: str,
    cloud: np.ndarray,
    reference: np.ndarray,
    n_groups: int,
    seed: int = 0,
) -> tuple[float, float]:
    """Full-sample distance plus a group-split standard error."""
    value = _distance(metric, cloud, reference, seed)
    n = min(cloud.shape[0], reference.shape[0])
    size = n // n_groups
    if size < 2:
        return value, 0.0
    parts = [
        _distance(
            metric,
            cloud[g * size : (g + 1) * size],
            reference[g * size : (g + 1) * size],
            seed + g,
        )
        for g in range(n_groups)
    ]
    return value, float(np.std(parts, ddof=1) / math.sqrt(n_groups))


def _reference_cloud(
    config: ExperimentConfig, model: GradientModel, size: int, rng
) -> np.ndarray:
    if config.reference == "exact_sampler":
        if not model.has_exact_target_sampler:
            raise ValueError(
                f"{model.name} has no exact target sampler; use reference=long_run_chain"
            )
        return model.sample_target(rng, size, config.beta)
    # surrogate: one long chain at a much smaller stepsize, heavily burned in
    lam_ref = min(config.lambda_grid) / 10.0
    burn = 10 * math.ceil(config.mix_time / lam_ref)
    thin = math.ceil(1.0 / (10.0 * lam_ref))
    cfg = ChainConfig(
        lam=lam_ref,
        beta=config.beta,
        n_steps=burn + size * thin,
        burn_in=burn,
        thinning=thin,
        seed=int(rng.integers(0, 2**63 - 1)),
    )
    out = run_chain(cfg, model)
    return out.samples[:size]


def _ensemble_terminals(
    config: ExperimentConfig, model: GradientModel, lam: float, n: int, seed: int
) -> np.ndarray:
    # retain only the terminal state of each chain
    cc = ChainConfig(lam=lam, beta=config.beta, n_steps=n, burn_in=n - 1, seed=seed)
    outs = run_ensemble(cc, model, config.n_chains)
    diverged = sum(o.diverged for o in outs)
    if diverged:
        raise RuntimeError(f"{diverged} of {config.n_chains} chains diverged")
    return terminal_states(outs)


def rate_experiment(
    config: ExperimentConfig,
    report: Optional[ConstantsReport] = None,
) -> RateFit:
    """Plateau distance per stepsize and a log-log slope fit.

    Each cell averages ``n_reps`` replicas; a replica runs the ensemble to n
    and to 2n steps and measures both distances against one fresh reference
    cloud.  Replica streams are shared across the stepsize grid (common
    random numbers), so cell-to-cell comparisons see the stepsize effect
    rather than independent sampling noise.  A cell is plateaued when the
    n- and 2n-distances agree within one between-replica standard error of
    their paired difference; the 2n average is the plateau value.
    Non-plateaued cells are excluded from the fit with a warning.
    """
    model = config.build_model()
    warnings: list[str] = []
    cells: list[CellResult] = []
    R = config.n_reps
    ref_rng = np.random.default_rng(np.random.SeedSequence((config.seed, 0xEEF)))
    references = [
        _reference_cloud(config, model, config.n_chains, ref_rng) for _ in range(R)
    ]
    rep_seeds = [(config.seed * 1_000_003 + 7919 * r) & 0x7FFFFFFF for r in range(R)]
    for j, lam in enumerate(config.lambda_grid):
        if config.n_steps is not None:
            n, n_theory = int(config.n_steps[j]), None
        else:
            n, n_theory = plateau_steps(lam, config.mix_time, report)
        d_half = np.empty(R)
        d_full = np.empty(R)
        for r in range(R):
            half = _ensemble_terminals(config, model, lam, n, rep_seeds[r])
            full = _ensemble_terminals(config, model, lam, 2 * n, rep_seeds[r])
            d_half[r] = _distance(config.metric, half, references[r], rep_seeds[r])
            d_full[r] = _distance(config.metric, full, references[r], rep_seeds[r])
        mean_full = float(d_full.mean())
        mean_half = float(d_half.mean())
        se_full = float(d_full.std(ddof=1) / math.sqrt(R)) if R > 1 else 0.0
        se_half = float(d_half.std(ddof=1) / math.sqrt(R)) if R > 1 else 0.0
        se_diff = max(math.hypot(se_full, se_half), 1e-15)
        plateaued = abs(mean_full - mean_half) <= se_diff
        if not plateaued:
            warnings.append(
                f"lambda={lam}: distance moved from {mean_half:.4g} to "
                f"{mean_full:.4g} between n={n} and n={2*n}; cell excluded from the fit"
            )
        cells.append(
            CellResult(
                lam=lam,
                n_steps=2 * n,
                distance=mean_full,
                std_error=se_full,
                distance_at_half=mean_half,
                plateaued=plateaued,
                method=config.metric,
                n_theory=n_theory,
                replica_values=d_full.tolist(),
            )
        )

    used = [c for c in cells if c.plateaued and c.distance > 0]
    if len(used) >= 3:
        lx = np.log([c.lam for c in used])
        ly = np.log([c.distance for c in used])
        (slope, intercept), cov = np.polyfit(lx, ly, 1, cov=True)
        resid = (ly - (slope * lx + intercept)).tolist()
        alpha, hw = float(slope), float(1.96 * math.sqrt(cov[0, 0]))
    else:
        warnings.append("fewer than 3 plateaued cells; exponent fit skipped")
        alpha, hw, intercept, resid = math.nan, math.nan, math.nan, []
    return RateFit(
        cells=cells,
        alpha=alpha,
        alpha_halfwidth=hw,
        log_prefactor=float(intercept),
        residuals=resid,
        warnings=warnings,
    )


# ---------------------------------------------------------------------------
# One-sided consistency check of the computed bounds
# ---------------------------------------------------------------------------


@dataclass
class BoundCheckRow:
    lam: float
    n_steps: int
    w1_empirical: float
    w1_se: float
    w1_bound: float
    w2_empirical: float
    w2_se: float
    w2_bound: float
    excess_empirical: Optional[float]
    excess_se: Optional[float]
    excess_bound: Optional[float]
    consistent: bool
    vacuous: list


@dataclass
class BoundCheckReport:
    rows: list
    violations: int
    warnings: list = field(default_factory=list)

    @property
    def consistent(self) -> bool:
        return self.violations == 0

    def to_json(self, **kw) -> str:
        return json.dumps(
            {
                "rows": [asdict(r) for r in self.rows],
                "violations": self.violations,
                "warnings": self.warnings,
            },
            **kw,
        )


def theoretical_w1(report: ConstantsReport, lam: float, n: int, E_theta0_4: float = 0.0) -> float:
    v = report.values
    return v["C1"] * math.exp(-v["C0"] * lam * n) * (E_theta0_4 + 1.0) + (
        v["C2"] + v["C3"]
    ) * math.sqrt(lam)


def theoretical_w2(report: ConstantsReport, lam: float, n: int, E_theta0_4: float = 0.0) -> float:
    v = report.values
    return v["C5"] * math.exp(-v["C4"] * lam * n) * (E_theta0_4 + 1.0) + (
        v["C6"] + v["C7"]
    ) * lam**0.25


def theoretical_excess_risk(report: ConstantsReport, lam: float, n: int) -> float:
    v = report.values
    return (
        v["Csharp1"] * math.exp(-v["Csharp0"] * lam * n)
        + v["Csharp2"] * lam**0.25
        + v["Csharp3"]
    )


def bound_check(
    config: ExperimentConfig,
    report: ConstantsReport,
    include_n0: bool = True,
) -> BoundCheckReport:
    """Empirical transport distances and excess risk vs the computed bounds.

    A finite bound exceeded by more than three MC standard errors counts as a
    violation (the inequalities are proved, so a violation flags a bug);
    infinite bounds are recorded as vacuous and consistent.
    """
    model = config.build_model()
    rows: list[BoundCheckRow] = []
    warnings: list[str] = []
    rng = np.random.default_rng(np.random.SeedSequence((config.seed, 0xB0)))
    has_potential = True
    try:
        u_min = model.potential_min()
    except NotImplementedError:
        has_potential = False
        u_min = math.nan

    grid = list(config.lambda_grid)
    n_list = []
    for j, lam in enumerate(grid):
        if config.n_steps is not None:
            n_list.append(int(config.n_steps[j]))
        else:
            n_list.append(plateau_steps(lam, config.mix_time, report)[0])
    cells = list(zip(grid, n_list))
    if include_n0:
        cells.insert(0, (grid[0], 0))

    for j, (lam, n) in enumerate(cells):
        reference = _reference_cloud(config, model, config.n_chains, rng)
        if n == 0:
            cloud = np.zeros((config.n_chains, model.dim_theta))
        else:
            seed_cell = (config.seed * 7_000_003 + j) & 0x7FFFFFFF
            cloud = _ensemble_terminals(config, model, lam, n, seed_cell)
        w1, w1se = _distance_with_se("W1", cloud, reference, config.n_groups)
        w2, w2se = _distance_with_se("W2", cloud, reference, config.n_groups)
        b1 = theoretical_w1(report, lam, n)
        b2 = theoretical_w2(report, lam, n)
        vacuous = [name for name, b in (("W1", b1), ("W2", b2)) if math.isinf(b)]
        ok = (math.isinf(b1) or w1 <= b1 + 3.0 * w1se) and (
            math.isinf(b2) or w2 <= b2 + 3.0 * w2se
        )
        exc = exc_se = exc_b = None
        if has_potential and n > 0:
            u_vals = np.array([model.potential(t) for t in cloud])
            exc = float(u_vals.mean() - u_min)
            exc_se = float(u_vals.std(ddof=1) / math.sqrt(len(u_vals)))
            exc_b = theoretical_excess_risk(report, lam, n)
            if math.isinf(exc_b):
                vacuous.append("excess_risk")
            elif exc > exc_b + 3.0 * exc_se:
                ok = False
        rows.append(
            BoundCheckRow(
                lam=lam, n_steps=n,
                w1_empirical=w1, w1_se=w1se, w1_bound=b1,
                w2_empirical=w2, w2_se=w2se, w2_bound=b2,
                excess_empirical=exc, excess_se=exc_se, excess_bound=exc_b,
                consistent=ok, vacuous=vacuous,
            )
        )
        if vacuous:
            warnings.append(
                f"lambda={lam}, n={n}: vacuous (+inf) bounds for {vacuous} -- consistent"
            )
    violations = sum(not r.consistent for r in rows)
    return BoundCheckReport(rows=rows, violations=violations, warnings=warnings)


def write_cells_csv(cells: list, path: Path) -> None:
    header = "lambda,n_steps,distance,std_error,distance_at_half,plateaued,method"
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for c in cells:
            fh.write(
                f"{c.lam:.17g},{c.n_steps},{c.distance:.17g},{c.std_error:.17g},"
                f"{c.distance_at_half:.17g},{int(c.plateaued)},{c.method}\n"
            )
