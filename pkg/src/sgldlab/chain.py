"""The SGLD iteration with seeded, splittable randomness.

One step moves ``theta -> theta - lam*H(theta, x) + sqrt(2*lam/beta)*xi`` with
a fresh data draw x and standard Gaussian xi.  Noise and data come from two
independently derived sub-streams of the run seed, so changing the data law
(e.g. the minibatch size) never perturbs the noise path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .models import GradientModel

__all__ = [
    "ChainConfig",
    "ChainOutput",
    "ChainDivergenceError",
    "sgld_step",
    "run_chain",
    "run_ensemble",
    "terminal_states",
    "write_samples_csv",
    "read_samples_csv",
]

# |theta| beyond this aborts the run even if still finite
DIVERGENCE_RADIUS = 1e12


class ChainDivergenceError(RuntimeError):
    """Raised when an iterate leaves the finite range.

    Carries the step index of the failed update and the last finite iterate.
    """

    def __init__(self, step: int, last_theta: np.ndarray):
        super().__init__(
            f"chain diverged at step {step}; last finite |theta| = "
            f"{float(np.linalg.norm(last_theta)):.6g}"
        )
        self.step = step
        self.last_theta = last_theta


@dataclass(frozen=True)
class ChainConfig:
    """Run parameters for one SGLD chain.

    ``theta0=None`` starts from the origin; ``init_scale > 0`` adds a Gaussian
    perturbation drawn from a third sub-stream (ensemble diversity).
    """

    lam: float
    beta: float
    n_steps: int
    burn_in: int = 0
    thinning: int = 1
    seed: int = 0
    theta0: Optional[np.ndarray] = None
    init_scale: float = 0.0

    def __post_init__(self):
        if not (self.lam > 0 and self.beta > 0):
            raise ValueError("lam and beta must be positive")
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")
        if not 0 <= self.burn_in < self.n_steps:
            raise ValueError("need 0 <= burn_in < n_steps")
        if self.thinning < 1:
            raise ValueError("thinning must be >= 1")
        if self.init_scale < 0:
            raise ValueError("init_scale must be >= 0")
        if self.theta0 is not None:
            t0 = np.asarray(self.theta0, dtype=float)
            if t0.ndim != 1 or not np.isfinite(t0).all():
                raise ValueError("theta0 must be a finite vector")
            object.__setattr__(self, "theta0", t0)


@dataclass
class ChainOutput:
    """Retained samples plus per-step running moment averages."""

    samples: np.ndarray       # (n_retained, d), post burn-in and thinned
    sample_steps: np.ndarray  # absolute step index of each retained sample
    moment_trail: np.ndarray  # (n_steps, 2): running means of |theta|^2, |theta|^4
    config: ChainConfig
    warnings: list[str] = field(default_factory=list)
    diverged_at: Optional[int] = None

    @property
    def terminal(self) -> np.ndarray:
        if self.samples.shape[0]:
            return self.samples[-1]
        raise ValueError("chain retained no samples")

    @property
    def diverged(self) -> bool:
        return self.diverged_at is not None


def sgld_step(
    theta: np.ndarray,
    model: GradientModel,
    x,
    lam: float,
    beta: float,
    xi: np.ndarray,
) -> np.ndarray:
    """One SGLD update with caller-supplied standard Gaussian noise xi."""
    if lam <= 0 or beta <= 0:
        raise ValueError("lam and beta must be positive")
    theta = np.asarray(theta, dtype=float)
    out = theta - lam * model.stoch_grad(theta, x) + math.sqrt(2.0 * lam / beta) * np.asarray(xi, dtype=float)
    if not np.isfinite(out).all():
        raise ChainDivergenceError(0, theta)
    return out


def _initial_theta(config: ChainConfig, model: GradientModel, init_rng) -> np.ndarray:
    theta = (
        np.zeros(model.dim_theta)
        if config.theta0 is None
        else np.array(config.theta0, dtype=float)
    )
    if theta.shape != (model.dim_theta,):
        raise ValueError("theta0 dimension does not match the model")
    if config.init_scale > 0:
        theta = theta + config.init_scale * init_rng.standard_normal(model.dim_theta)
    return theta


def run_chain(
    config: ChainConfig,
    model: GradientModel,
    *,
    on_divergence: str = "raise",
    lambda_max: Optional[float] = None,
) -> ChainOutput:
    """Run one chain; deterministic and bit-identical for a fixed seed.

    ``lambda_max``, when supplied, only triggers a warning record if the
    stepsize exceeds it; the run proceeds either way.
    """
    if on_divergence not in ("raise", "warn"):
        raise ValueError("on_divergence must be 'raise' or 'warn'")
    warnings: list[str] = []
    model_beta = getattr(model, "beta", None)
    if model_beta is not None and not np.isclose(model_beta, config.beta):
        warnings.append(
            f"model was built with beta={model_beta} but the chain uses beta={config.beta}"
        )
    if lambda_max is not None and config.lam > lambda_max:
        warnings.append(
            f"stepsize {config.lam} exceeds the admissible cap {lambda_max:.6g}"
        )

    ss = np.random.SeedSequence(config.seed)
    noise_ss, data_ss, init_ss = ss.spawn(3)
    noise = np.random.default_rng(noise_ss).standard_normal(
        (config.n_steps, model.dim_theta)
    )
    data = model.sample_data_batch(np.random.default_rng(data_ss), config.n_steps)
    theta = _initial_theta(config, model, np.random.default_rng(init_ss))

    lam, beta = config.lam, config.beta
    noise_scale = math.sqrt(2.0 * lam / beta)
    sq = np.full(config.n_steps, np.nan)
    retained: list[np.ndarray] = []
    steps: list[int] = []
    diverged_at = None

    for i in range(config.n_steps):
        theta_next = theta - lam * model.stoch_grad(theta, data[i]) + noise_scale * noise[i]
        nrm2 = float(np.sum(theta_next * theta_next))
        if not np.isfinite(nrm2) or nrm2 > DIVERGENCE_RADIUS**2:
            diverged_at = i + 1
            if on_divergence == "raise":
                raise ChainDivergenceError(diverged_at, theta)
            warnings.append(
                f"diverged at step {diverged_at}: |theta| left the finite range"
            )
            break
        theta = theta_next
        sq[i] = nrm2
        step = i + 1
        if step > config.burn_in and (step - config.burn_in) % config.thinning == 0:
            retained.append(theta.copy())
            steps.append(step)

    # running means computed in one vectorized pass after the loop
    done = config.n_steps if diverged_at is None else diverged_at - 1
    counts = np.arange(1, config.n_steps + 1, dtype=float)
    trail = np.full((config.n_steps, 2), np.nan)
    if done:
        trail[:done, 0] = np.cumsum(sq[:done]) / counts[:done]
        trail[:done, 1] = np.cumsum(sq[:done] ** 2) / counts[:done]

    samples = (
        np.array(retained) if retained else np.empty((0, model.dim_theta))
    )
    return ChainOutput(
        samples=samples,
        sample_steps=np.array(steps, dtype=int),
        moment_trail=trail,
        config=config,
        warnings=warnings,
        diverged_at=diverged_at,
    )


def derive_chain_seed(seed: int, chain_index: int) -> int:
    """Splittable per-chain seed: base seed XOR chain index (64-bit)."""
    return (int(seed) ^ int(chain_index)) & 0xFFFFFFFFFFFFFFFF


class _VectorizedDivergence(RuntimeError):
    pass


def _stack_data_chunks(chunks):
    """Stack per-chain data chunks into one array when the layout allows it.

    Returns (stacked, per_item) where exactly one is usable: ``stacked`` is a
    (C, B, ...) array sliced per step, ``per_item`` falls back to per-chain
    indexing for exotic data types.
    """
    first = chunks[0]
    if isinstance(first, np.ndarray):
        return np.stack(chunks), None
    if hasattr(first, "indices"):
        return np.stack([c.indices for c in chunks]), None
    return None, chunks


def _run_ensemble_vectorized(
    config: ChainConfig,
    model: GradientModel,
    n_chains: int,
    lambda_max: Optional[float],
) -> list[ChainOutput]:
    C, d, n = n_chains, model.dim_theta, config.n_steps
    base_warnings: list[str] = []
    model_beta = getattr(model, "beta", None)
    if model_beta is not None and not np.isclose(model_beta, config.beta):
        base_warnings.append(
            f"model was built with beta={model_beta} but the chain uses beta={config.beta}"
        )
    if lambda_max is not None and config.lam > lambda_max:
        base_warnings.append(
            f"stepsize {config.lam} exceeds the admissible cap {lambda_max:.6g}"
        )

    noise_rngs, data_rngs = [], []
    thetas = np.empty((C, d))
    configs = []
    for k in range(C):
        cfg_k = replace(config, seed=derive_chain_seed(config.seed, k))
        configs.append(cfg_k)
        noise_ss, data_ss, init_ss = np.random.SeedSequence(cfg_k.seed).spawn(3)
        noise_rngs.append(np.random.default_rng(noise_ss))
        data_rngs.append(np.random.default_rng(data_ss))
        thetas[k] = _initial_theta(cfg_k, model, np.random.default_rng(init_ss))

    retain_steps = [
        s for s in range(1, n + 1)
        if s > config.burn_in and (s - config.burn_in) % config.thinning == 0
    ]
    samples = np.empty((C, len(retain_steps), d))
    sq = np.empty((C, n))
    lam, noise_scale = config.lam, math.sqrt(2.0 * config.lam / config.beta)
    r_ptr = 0
    # chunk so the stacked noise block stays around 64 MB
    chunk = max(1, min(n, 8_000_000 // max(1, C * d)))
    for start in range(0, n, chunk):
        B = min(chunk, n - start)
        noise = np.stack([rng.standard_normal((B, d)) for rng in noise_rngs])
        chunks = [model.sample_data_batch(rng, B) for rng in data_rngs]
        stacked, per_item = _stack_data_chunks(chunks)
        for j in range(B):
            xs = stacked[:, j] if stacked is not None else [c[j] for c in per_item]
            thetas = thetas - lam * model.stoch_grad_pairs(thetas, xs) \
                + noise_scale * noise[:, j]
            s = np.sum(thetas * thetas, axis=1)
            if not np.isfinite(s).all() or s.max() > DIVERGENCE_RADIUS**2:
                raise _VectorizedDivergence
            sq[:, start + j] = s
            if r_ptr < len(retain_steps) and start + j + 1 == retain_steps[r_ptr]:
                samples[:, r_ptr] = thetas
                r_ptr += 1

    counts = np.arange(1, n + 1, dtype=float)
    trails = np.empty((C, n, 2))
    trails[:, :, 0] = np.cumsum(sq, axis=1) / counts
    trails[:, :, 1] = np.cumsum(sq**2, axis=1) / counts
    steps_arr = np.array(retain_steps, dtype=int)
    return [
        ChainOutput(
            samples=samples[k],
            sample_steps=steps_arr.copy(),
            moment_trail=trails[k],
            config=configs[k],
            warnings=list(base_warnings),
        )
        for k in range(C)
    ]


def run_ensemble(
    config: ChainConfig,
    model: GradientModel,
    n_chains: int,
    *,
    lambda_max: Optional[float] = None,
    vectorized: bool = True,
) -> list[ChainOutput]:
    """Independent chains with per-chain derived seeds, ordered by index.

    Chain k consumes exactly the streams of ``run_chain`` at the derived seed,
    so chain 0 reproduces ``run_chain(config, model)``.  The vectorized driver
    steps all chains in lockstep through the models' row-paired gradients; if
    any chain diverges it falls back to the sequential path, which records the
    divergence in that chain's warnings instead of aborting.
    """
    if n_chains < 1:
        raise ValueError("n_chains must be >= 1")
    if vectorized and n_chains > 1:
        try:
            return _run_ensemble_vectorized(config, model, n_chains, lambda_max)
        except _VectorizedDivergence:
            pass
    outputs = []
    for k in range(n_chains):
        cfg_k = replace(config, seed=derive_chain_seed(config.seed, k))
        outputs.append(
            run_chain(cfg_k, model, on_divergence="warn", lambda_max=lambda_max)
        )
    return outputs


def terminal_states(outputs: list[ChainOutput]) -> np.ndarray:
    """Stack the final retained sample of each non-divergent chain."""
    rows = [o.terminal for o in outputs if not o.diverged and o.samples.shape[0]]
    if not rows:
        raise ValueError("no chain finished with a retained sample")
    return np.array(rows)


# ---------------------------------------------------------------------------
# CSV export: header step,theta_0,...,theta_{d-1}; 17 significant digits so
# values round-trip bit-exactly through the text form.
# ---------------------------------------------------------------------------


def write_samples_csv(output: ChainOutput, path) -> None:
    d = output.samples.shape[1]
    header = "step," + ",".join(f"theta_{j}" for j in range(d))
    body = np.column_stack([output.sample_steps.astype(float), output.samples])
    np.savetxt(path, body, fmt=["%d"] + ["%.17g"] * d, delimiter=",",
               header=header, comments="")


def read_samples_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Return (steps, samples) from a chain CSV written by this module."""
    body = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return body[:, 0].astype(int), body[:, 1:]
