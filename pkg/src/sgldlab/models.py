"""Gradient oracles for the SGLD sampler.

Each model packages a stochastic gradient ``H(theta, x)``, a sampler for the
data variable ``x``, and the closed-form regularity constants (Lipschitz
factors, dissipativity matrix/offset, growth bound) that the verifier and the
constants calculator consume.  All gradient evaluations are pure functions of
their inputs; models hold no mutable state and are safe to share across
threads.

Models are registered under short string identifiers ("logreg", "vi",
"linear_mse", "gaussian", "mixture") and built through :func:`make_model`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

__all__ = [
    "AssumptionConstants",
    "GradientModel",
    "MiniBatch",
    "LogisticDataset",
    "GaussianLocationModel",
    "MixturePriorModel",
    "LinearRegressorModel",
    "LogisticPosteriorModel",
    "VariationalMixtureModel",
    "make_model",
    "sigmoid",
    "inv_one_plus_exp",
    "log_one_plus_exp",
    "logreg_stoch_grad",
    "logreg_full_grad",
    "vi_stoch_grad",
    "vi_objective",
    "linear_mse_stoch_grad",
]

# exp() overflows above ~709.78 in float64; exponentials are saturated there
_MAX_EXP = 709.0


def sigmoid(t):
    """Overflow-safe logistic function 1/(1+e^-t), elementwise."""
    t = np.asarray(t, dtype=float)
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    e = np.exp(t[~pos])
    out[~pos] = e / (1.0 + e)
    if out.ndim == 0:
        return float(out)
    return out


def inv_one_plus_exp(t):
    """1/(1+e^t) computed via the sign of t, never forming e^t for t > 0."""
    return sigmoid(np.negative(t))


def log_one_plus_exp(t):
    """log(1+e^t) without overflow (equals t + log(1+e^-t) for large t)."""
    return np.logaddexp(0.0, t)


def _saturated_exp(t):
    """e^t clipped to the largest finite double; used only inside eta bounds."""
    return np.exp(np.minimum(t, _MAX_EXP))


@dataclass(frozen=True)
class AssumptionConstants:
    """Closed-form regularity constants declared by a gradient model.

    ``L1``/``L2`` scale the theta- and data-Lipschitz bounds, ``a`` is the
    smallest eigenvalue of the expected dissipativity matrix, ``b`` the
    expected dissipativity offset, ``H_star`` the gradient magnitude at the
    origin and ``eta0`` the value of the local weight function at x = 0.
    ``L2 = 0`` is allowed and marks an exact (data-free) gradient.
    """

    L1: float
    L2: float
    a: float
    b: float
    H_star: float
    eta0: float

    def __post_init__(self):
        if not (self.L1 > 0 and self.a > 0 and self.b > 0):
            raise ValueError("L1, a and b must be strictly positive")
        if self.L2 < 0 or self.H_star < 0 or self.eta0 <= 0:
            raise ValueError("L2, H_star must be >= 0 and eta0 > 0")


class GradientModel:
    """Base class for stochastic-gradient oracles.

    Subclasses implement ``stoch_grad``, ``sample_data``, ``eta``,
    ``dissipativity_quad`` and ``b_of``; the optional surfaces
    (``full_grad``, ``sample_target``, ``potential``) are gated by the
    ``has_exact_full_gradient`` / ``has_exact_target_sampler`` flags.
    """

    name: str = "abstract"
    dim_theta: int = 0
    has_exact_full_gradient: bool = False
    has_exact_target_sampler: bool = False
    constants: AssumptionConstants

    # -- gradient oracle ---------------------------------------------------

    def stoch_grad(self, theta: np.ndarray, x) -> np.ndarray:
        raise NotImplementedError

    def stoch_grad_many(self, theta: np.ndarray, xs) -> np.ndarray:
        """Evaluate H(theta, x) for a sequence of draws; rows are gradients."""
        return np.stack([self.stoch_grad(theta, x) for x in xs])

    def stoch_grad_pairs(self, thetas: np.ndarray, xs) -> np.ndarray:
        """Row-paired evaluation H(thetas[i], xs[i]) for ensemble stepping."""
        return np.stack([self.stoch_grad(thetas[i], xs[i]) for i in range(len(thetas))])

    def full_grad(self, theta: np.ndarray) -> np.ndarray:
        raise NotImplementedError(f"{self.name}: no exact full gradient")

    # -- data law ------------------------------------------------------------

    def sample_data(self, rng: np.random.Generator):
        raise NotImplementedError

    def sample_data_batch(self, rng: np.random.Generator, size: int):
        """Sequence of i.i.d. data draws; index i gives the draw for step i."""
        return [self.sample_data(rng) for _ in range(size)]

    def data_mean(self):
        """Exact E[x] in the model's data representation."""
        raise NotImplementedError

    def data_as_vector(self, x) -> np.ndarray:
        return np.asarray(x, dtype=float).ravel()

    def data_from_vector(self, v: np.ndarray):
        return np.asarray(v, dtype=float)

    def data_norm(self, x) -> float:
        return float(np.linalg.norm(self.data_as_vector(x)))

    def data_diff_norm(self, x, xp) -> float:
        return float(
            np.linalg.norm(self.data_as_vector(x) - self.data_as_vector(xp))
        )

    # -- declared assumption surfaces ---------------------------------------

    def eta(self, x) -> float:
        raise NotImplementedError

    def eta_bar(self, x) -> float:
        return (self.eta(x) + self.constants.eta0) * self.data_norm(x)

    def dissipativity_quad(self, theta: np.ndarray, x) -> float:
        """Quadratic form <theta, A(x) theta> of the dissipativity bound."""
        raise NotImplementedError

    def b_of(self, x) -> float:
        """Pointwise dissipativity offset b(x)."""
        raise NotImplementedError

    # -- target distribution -------------------------------------------------

    def sample_target(self, rng: np.random.Generator, size: int, beta: float) -> np.ndarray:
        raise NotImplementedError(f"{self.name}: no exact target sampler")

    def potential(self, theta: np.ndarray) -> float:
        """Objective U with gradient h; target density is exp(-beta U)."""
        raise NotImplementedError(f"{self.name}: no closed-form potential")

    def potential_min(self) -> float:
        raise NotImplementedError(f"{self.name}: no potential minimum")

    # -- misc ----------------------------------------------------------------

    def _check_theta(self, theta: np.ndarray) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.dim_theta,):
            raise ValueError(
                f"theta has shape {theta.shape}, expected ({self.dim_theta},)"
            )
        return theta


# ---------------------------------------------------------------------------
# Bayesian logistic regression with a two-component Gaussian prior
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LogisticDataset:
    """Fixed design matrix (n, d) with binary labels (n,)."""

    z: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        z = np.asarray(self.z, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if z.ndim != 2 or y.shape != (z.shape[0],):
            raise ValueError("need z of shape (n, d) and y of shape (n,)")
        if not (np.isfinite(z).all() and np.isin(y, (0.0, 1.0)).all()):
            raise ValueError("features must be finite and labels in {0,1}")
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.z.shape[0]

    @property
    def dim(self) -> int:
        return self.z.shape[1]


@dataclass(frozen=True)
class MiniBatch:
    """Size-K subsample of a dataset, kept with its source indices."""

    z: np.ndarray        # (K, d)
    y: np.ndarray        # (K,)
    indices: np.ndarray  # (K,) positions in the source dataset

    @property
    def size(self) -> int:
        return self.z.shape[0]

    def as_vector(self) -> np.ndarray:
        # per-point layout (z_i, y_i), flattened row-major
        return np.hstack([self.z, self.y[:, None]]).ravel()


def _prior_grad(theta: np.ndarray, a_hat: np.ndarray) -> np.ndarray:
    # gradient of |t-a|^2/2 - log(1+exp(-2 a.t)): the mixture-prior energy
    # (np.sum keeps the reduction order identical to the row-paired path)
    return theta - a_hat + 2.0 * a_hat * inv_one_plus_exp(2.0 * float(np.sum(a_hat * theta)))


def logreg_stoch_grad(
    theta: np.ndarray,
    batch: MiniBatch,
    a_hat: np.ndarray,
    n: int,
    K: int,
    beta: float,
) -> np.ndarray:
    """Minibatch posterior gradient: prior term plus (n/K)-scaled likelihood."""
    theta = np.asarray(theta, dtype=float)
    a_hat = np.asarray(a_hat, dtype=float)
    if theta.shape != a_hat.shape or batch.z.shape[1] != theta.shape[0]:
        raise ValueError("dimension mismatch between theta, a_hat and features")
    if batch.size != K:
        raise ValueError(f"batch has {batch.size} points, expected K={K}")
    s = sigmoid(np.einsum("kd,d->k", batch.z, theta))
    lik = np.einsum("kd,k->d", batch.z, s - batch.y)   # sum_l z_l (sigma - y)
    return (_prior_grad(theta, a_hat) + (n / K) * lik) / beta


def logreg_full_grad(
    theta: np.ndarray,
    dataset: LogisticDataset,
    a_hat: np.ndarray,
    beta: float,
) -> np.ndarray:
    """Full-data posterior gradient (all n likelihood terms, no scaling)."""
    theta = np.asarray(theta, dtype=float)
    a_hat = np.asarray(a_hat, dtype=float)
    if dataset.n == 0:
        raise ValueError("dataset must be nonempty")
    if theta.shape != a_hat.shape or dataset.dim != theta.shape[0]:
        raise ValueError("dimension mismatch between theta, a_hat and features")
    s = sigmoid(dataset.z @ theta)
    lik = dataset.z.T @ (s - dataset.y)
    return (_prior_grad(theta, a_hat) + lik) / beta


def logreg_potential(
    theta: np.ndarray, dataset: LogisticDataset, a_hat: np.ndarray, beta: float
) -> float:
    """Objective whose gradient is ``logreg_full_grad`` (negative log posterior / beta)."""
    theta = np.asarray(theta, dtype=float)
    a_hat = np.asarray(a_hat, dtype=float)
    t = dataset.z @ theta
    prior = 0.5 * float(np.sum((theta - a_hat) ** 2)) - float(
        log_one_plus_exp(-2.0 * float(a_hat @ theta))
    )
    nll = float(np.sum(log_one_plus_exp(t) - dataset.y * t))
    return (prior + nll) / beta


class LogisticPosteriorModel(GradientModel):
    """Minibatch gradient of a logistic-regression posterior with mixture prior.

    The data variable is a size-K minibatch drawn uniformly with replacement
    from the fixed dataset; its vector form lives in R^{K(d+1)}.
    """

    name = "logreg"

    def __init__(
        self,
        dataset: LogisticDataset,
        a_hat: Sequence[float],
        n_batch: int,
        beta: float = 1.0,
    ):
        a_hat = np.asarray(a_hat, dtype=float)
        if float(a_hat @ a_hat) <= 1.0:
            raise ValueError("need |a_hat|^2 > 1 (nonconvex prior regime)")
        if not 1 <= n_batch <= dataset.n:
            raise ValueError("n_batch must be in [1, n]")
        if beta <= 0:
            raise ValueError("beta must be positive")
        if dataset.dim != a_hat.shape[0]:
            raise ValueError("a_hat dimension must match the dataset")
        self.dataset = dataset
        self.a_hat = a_hat
        self.K = int(n_batch)
        self.beta = float(beta)
        self.dim_theta = dataset.dim
        self.has_exact_full_gradient = True
        a2 = float(a_hat @ a_hat)
        n = dataset.n
        # E|x|^2, E|x|^4 for a sum of K i.i.d. per-point squared norms
        s = np.sum(dataset.z**2, axis=1) + dataset.y**2
        m2 = float(np.mean(s))
        m4 = float(np.mean(s**2))
        ex2 = self.K * m2
        ex4 = self.K * m4 + self.K * (self.K - 1) * m2**2
        self.constants = AssumptionConstants(
            L1=(1.0 + 4.0 * a2) * n / beta,
            L2=2.0 * n / beta,
            a=1.0 / (4.0 * beta),
            b=a2 / (2.0 * beta) + 2.0 * n**2 * (ex2 + ex4) / (self.K * beta),
            H_star=0.0,
            eta0=1.0,
        )

    def stoch_grad(self, theta, x: MiniBatch):
        return logreg_stoch_grad(
            theta, x, self.a_hat, self.dataset.n, self.K, self.beta
        )

    def stoch_grad_many(self, theta, xs):
        theta = self._check_theta(theta)
        idx = np.stack([b.indices for b in xs])            # (m, K)
        z = self.dataset.z[idx]                            # (m, K, d)
        y = self.dataset.y[idx]                            # (m, K)
        s = sigmoid(np.einsum("mkd,d->mk", z, theta))
        lik = np.einsum("mkd,mk->md", z, s - y)
        prior = _prior_grad(theta, self.a_hat)
        return (prior[None, :] + (self.dataset.n / self.K) * lik) / self.beta

    def stoch_grad_pairs(self, thetas, xs):
        if isinstance(xs, np.ndarray) and xs.dtype.kind in "iu":
            idx = xs                                        # (C, K) dataset rows
        else:
            idx = np.stack([b.indices for b in xs])
        z = self.dataset.z[idx]                             # (C, K, d)
        y = self.dataset.y[idx]
        s = sigmoid(np.einsum("ckd,cd->ck", z, thetas))
        lik = np.einsum("ckd,ck->cd", z, s - y)
        dots = np.sum(thetas * self.a_hat, axis=1)
        prior = (
            thetas
            - self.a_hat[None, :]
            + 2.0 * self.a_hat[None, :] * inv_one_plus_exp(2.0 * dots)[:, None]
        )
        return (prior + (self.dataset.n / self.K) * lik) / self.beta

    def full_grad(self, theta):
        return logreg_full_grad(theta, self.dataset, self.a_hat, self.beta)

    def sample_data(self, rng):
        idx = rng.integers(0, self.dataset.n, size=self.K)
        return MiniBatch(self.dataset.z[idx], self.dataset.y[idx], idx)

    def sample_data_batch(self, rng, size):
        idx = rng.integers(0, self.dataset.n, size=(size, self.K))
        return _MiniBatchSeq(self.dataset, idx)

    def data_mean(self) -> MiniBatch:
        z_bar = np.tile(np.mean(self.dataset.z, axis=0), (self.K, 1))
        y_bar = np.full(self.K, float(np.mean(self.dataset.y)))
        return MiniBatch(z_bar, y_bar, np.full(self.K, -1))

    def data_as_vector(self, x: MiniBatch):
        return x.as_vector()

    def data_from_vector(self, v):
        v = np.asarray(v, dtype=float).reshape(self.K, self.dim_theta + 1)
        return MiniBatch(v[:, :-1], v[:, -1], np.full(self.K, -1))

    def eta(self, x) -> float:
        return (1.0 + self.data_norm(x) / np.sqrt(self.K)) ** 2

    def dissipativity_quad(self, theta, x) -> float:
        return float(theta @ theta) / (4.0 * self.beta)

    def b_of(self, x) -> float:
        r2 = self.data_norm(x) ** 2
        a2 = float(self.a_hat @ self.a_hat)
        n = self.dataset.n
        return a2 / (2.0 * self.beta) + 2.0 * n**2 * (r2 + r2**2) / (
            self.K * self.beta
        )

    def potential(self, theta) -> float:
        return logreg_potential(theta, self.dataset, self.a_hat, self.beta)


class _MiniBatchSeq:
    """Lazy view over pre-drawn minibatch indices (one row per step)."""

    def __init__(self, dataset: LogisticDataset, idx: np.ndarray):
        self._dataset = dataset
        self.indices = idx

    def __len__(self):
        return self.indices.shape[0]

    def __getitem__(self, i) -> MiniBatch:
        idx = self.indices[i]
        return MiniBatch(self._dataset.z[idx], self._dataset.y[idx], idx)


# ---------------------------------------------------------------------------
# Variational approximation of the same posterior (reparameterized gradient)
# ---------------------------------------------------------------------------


def vi_stoch_grad(
    theta: np.ndarray,
    u: np.ndarray,
    a_hat: np.ndarray,
    dataset: LogisticDataset,
) -> np.ndarray:
    """Reparameterized gradient of the variational objective at base draw u.

    The two-component variational family is folded in analytically (7/8 and
    1/8 component weights, component scale fixed to 1/4), so only the standard
    Gaussian u is random.
    """
    theta = np.asarray(theta, dtype=float)
    u = np.asarray(u, dtype=float)
    a_hat = np.asarray(a_hat, dtype=float)
    if theta.shape != u.shape or theta.shape != a_hat.shape:
        raise ValueError("theta, u and a_hat must share one dimension d")
    if dataset.n and dataset.dim != theta.shape[0]:
        raise ValueError("dataset feature dimension must match theta")
    w_plus = u / 4.0 + theta
    w_minus = u / 4.0 - theta
    out = theta / 2.0 + u / 4.0 - 0.75 * a_hat
    out = out + 0.25 * a_hat * (
        7.0 * inv_one_plus_exp(2.0 * float(np.sum(a_hat * w_plus)))
        - inv_one_plus_exp(2.0 * float(np.sum(a_hat * w_minus)))
    )
    if dataset.n:
        s_plus = sigmoid(np.einsum("nd,d->n", dataset.z, w_plus))
        s_minus = sigmoid(np.einsum("nd,d->n", dataset.z, w_minus))
        out = out + 0.125 * (
            -6.0 * np.einsum("nd,n->d", dataset.z, dataset.y)
            + 7.0 * np.einsum("nd,n->d", dataset.z, s_plus)
            - np.einsum("nd,n->d", dataset.z, s_minus)
        )
    cross = float(np.sum(theta * u)) / 4.0
    t2 = float(np.sum(theta * theta))
    out = out - 7.0 * (u + 8.0 * theta) / 16.0 * inv_one_plus_exp(2.0 * (cross + t2))
    out = out - (u - 8.0 * theta) / 16.0 * inv_one_plus_exp(2.0 * (cross - t2))
    return out


def vi_objective(
    theta: np.ndarray,
    u: np.ndarray,
    a_hat: np.ndarray,
    dataset: LogisticDataset,
) -> float:
    """Integrand F(theta, u) whose negative theta-gradient is ``vi_stoch_grad``.

    Averaging F over standard Gaussian u gives (up to a theta-free constant)
    the negative evidence lower bound being minimized.
    """
    theta = np.asarray(theta, dtype=float)
    u = np.asarray(u, dtype=float)
    a_hat = np.asarray(a_hat, dtype=float)

    def branch(w: np.ndarray) -> float:
        val = -0.5 * float(np.sum((w - a_hat) ** 2))
        val += float(log_one_plus_exp(-2.0 * float(a_hat @ w)))
        if dataset.n:
            t = dataset.z @ w
            val += float(
                np.sum(-dataset.y * log_one_plus_exp(-t) + (dataset.y - 1.0) * log_one_plus_exp(t))
            )
        return val

    w_plus = u / 4.0 + theta
    w_minus = u / 4.0 - theta
    cross = float(theta @ u) / 4.0
    t2 = float(theta @ theta)
    val = 0.875 * branch(w_plus) + 0.125 * branch(w_minus)
    val -= 0.875 * float(log_one_plus_exp(-2.0 * (cross + t2)))
    val += 0.125 * (
        0.5 * float(np.sum((u / 4.0 - 2.0 * theta) ** 2))
        - float(log_one_plus_exp(-2.0 * (cross - t2)))
    )
    return val


class VariationalMixtureModel(GradientModel):
    """Reparameterized variational gradient; the data variable is u ~ N(0, I)."""

    name = "vi"

    def __init__(self, dataset: LogisticDataset, a_hat: Sequence[float]):
        a_hat = np.asarray(a_hat, dtype=float)
        if float(a_hat @ a_hat) <= 1.0:
            raise ValueError("need |a_hat|^2 > 1 (nonconvex prior regime)")
        if dataset.n and dataset.dim != a_hat.shape[0]:
            raise ValueError("a_hat dimension must match the dataset")
        self.dataset = dataset
        self.a_hat = a_hat
        self.dim_theta = a_hat.shape[0]
        d = self.dim_theta
        n = dataset.n
        a2 = float(a_hat @ a_hat)
        self._sum_z2 = float(np.sum(dataset.z**2)) if n else 0.0
        h0 = 0.375 * (dataset.z.T @ (1.0 - 2.0 * dataset.y)) if n else np.zeros(d)
        self.constants = AssumptionConstants(
            L1=1.0,
            L2=0.25,
            a=0.25,
            # E b(u) with E|u|^2 = d
            b=2.25 * d + 30.25 * a2 + 49.0 * n * self._sum_z2 / 8.0 + 1.75 * n,
            H_star=float(np.linalg.norm(h0)),
            eta0=4.5 + 8.0 + self._sum_z2 + 4.0 * a2,
        )

    def stoch_grad(self, theta, u):
        return vi_stoch_grad(theta, u, self.a_hat, self.dataset)

    def stoch_grad_many(self, theta, us):
        theta = self._check_theta(theta)
        us = np.asarray(us, dtype=float)                     # (m, d)
        w_plus = us / 4.0 + theta
        w_minus = us / 4.0 - theta
        out = np.broadcast_to(theta / 2.0 - 0.75 * self.a_hat, us.shape).copy()
        out += us / 4.0
        out += 0.25 * self.a_hat * (
            7.0 * inv_one_plus_exp(2.0 * np.sum(w_plus * self.a_hat, axis=1))
            - inv_one_plus_exp(2.0 * np.sum(w_minus * self.a_hat, axis=1))
        )[:, None]
        if self.dataset.n:
            s_plus = sigmoid(np.einsum("md,nd->mn", w_plus, self.dataset.z))
            s_minus = sigmoid(np.einsum("md,nd->mn", w_minus, self.dataset.z))
            base = -6.0 * np.einsum("nd,n->d", self.dataset.z, self.dataset.y)
            out += 0.125 * (
                base[None, :]
                + 7.0 * np.einsum("mn,nd->md", s_plus, self.dataset.z)
                - np.einsum("mn,nd->md", s_minus, self.dataset.z)
            )
        cross = np.sum(us * theta, axis=1) / 4.0
        t2 = float(np.sum(theta * theta))
        out -= (
            7.0 * (us + 8.0 * theta) / 16.0
            * inv_one_plus_exp(2.0 * (cross + t2))[:, None]
        )
        out -= (
            (us - 8.0 * theta) / 16.0
            * inv_one_plus_exp(2.0 * (cross - t2))[:, None]
        )
        return out

    def stoch_grad_pairs(self, thetas, us):
        us = np.asarray(us, dtype=float)
        w_plus = us / 4.0 + thetas
        w_minus = us / 4.0 - thetas
        out = thetas / 2.0 + us / 4.0 - 0.75 * self.a_hat[None, :]
        out += 0.25 * self.a_hat[None, :] * (
            7.0 * inv_one_plus_exp(2.0 * np.sum(w_plus * self.a_hat, axis=1))
            - inv_one_plus_exp(2.0 * np.sum(w_minus * self.a_hat, axis=1))
        )[:, None]
        if self.dataset.n:
            s_plus = sigmoid(np.einsum("cd,nd->cn", w_plus, self.dataset.z))
            s_minus = sigmoid(np.einsum("cd,nd->cn", w_minus, self.dataset.z))
            base = -6.0 * np.einsum("nd,n->d", self.dataset.z, self.dataset.y)
            out += 0.125 * (
                base[None, :]
                + 7.0 * np.einsum("cn,nd->cd", s_plus, self.dataset.z)
                - np.einsum("cn,nd->cd", s_minus, self.dataset.z)
            )
        cross = np.sum(thetas * us, axis=1) / 4.0
        t2 = np.sum(thetas**2, axis=1)
        out -= 7.0 * (us + 8.0 * thetas) / 16.0 * inv_one_plus_exp(2.0 * (cross + t2))[:, None]
        out -= (us - 8.0 * thetas) / 16.0 * inv_one_plus_exp(2.0 * (cross - t2))[:, None]
        return out

    def sample_data(self, rng):
        return rng.standard_normal(self.dim_theta)

    def sample_data_batch(self, rng, size):
        return rng.standard_normal((size, self.dim_theta))

    def data_mean(self):
        return np.zeros(self.dim_theta)

    def eta(self, u) -> float:
        r2 = float(np.asarray(u) @ np.asarray(u))
        # the 8 e^{|u|^2/32} factor is evaluated in log space and saturated
        # to the largest finite double; eta is a bound, not a runtime path
        exp_term = _saturated_exp(np.log(8.0) + r2 / 32.0)
        return float(
            4.5
            + exp_term
            + self._sum_z2
            + 4.0 * float(self.a_hat @ self.a_hat)
            + 0.375 * r2
        )

    def dissipativity_quad(self, theta, u) -> float:
        return 0.25 * float(theta @ theta)

    def b_of(self, u) -> float:
        r2 = float(np.asarray(u) @ np.asarray(u))
        a2 = float(self.a_hat @ self.a_hat)
        n = self.dataset.n
        return 2.25 * r2 + 30.25 * a2 + 49.0 * n * self._sum_z2 / 8.0 + 1.75 * n


# ---------------------------------------------------------------------------
# Linear mean-square regression (streaming least squares)
# ---------------------------------------------------------------------------


def linear_mse_stoch_grad(theta: np.ndarray, y: np.ndarray, z: float) -> np.ndarray:
    """Per-sample gradient of |z - <y, theta>|^2: -2 y z + 2 y <y, theta>."""
    theta = np.asarray(theta, dtype=float)
    y = np.asarray(y, dtype=float)
    if theta.shape != y.shape:
        raise ValueError("theta and y must share one dimension d")
    return -2.0 * y * z + 2.0 * y * float(np.sum(y * theta))


class LinearRegressorModel(GradientModel):
    """Least-squares gradient with standard-normal regressors and response.

    The data vector packs (y, z) as (d+1,); with this law the averaged
    gradient is exactly 2*theta, so the target is a centred Gaussian.
    """

    name = "linear_mse"

    def __init__(self, dim: int = 1):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        self.dim_theta = int(dim)
        self.has_exact_full_gradient = True
        self.has_exact_target_sampler = True
        self.constants = AssumptionConstants(
            L1=2.0, L2=2.0, a=1.0, b=1.0, H_star=0.0, eta0=1.0
        )

    @staticmethod
    def _split(x):
        x = np.asarray(x, dtype=float)
        return x[:-1], float(x[-1])

    def stoch_grad(self, theta, x):
        y, z = self._split(x)
        return linear_mse_stoch_grad(theta, y, z)

    def stoch_grad_many(self, theta, xs):
        theta = self._check_theta(theta)
        xs = np.asarray(xs, dtype=float)
        y, z = xs[:, :-1], xs[:, -1]
        return 2.0 * y * (y @ theta - z)[:, None]

    def stoch_grad_pairs(self, thetas, xs):
        xs = np.asarray(xs, dtype=float)
        y, z = xs[:, :-1], xs[:, -1]
        return -2.0 * y * z[:, None] + 2.0 * y * np.sum(y * thetas, axis=1)[:, None]

    def full_grad(self, theta):
        return 2.0 * np.asarray(theta, dtype=float)

    def sample_data(self, rng):
        return rng.standard_normal(self.dim_theta + 1)

    def sample_data_batch(self, rng, size):
        return rng.standard_normal((size, self.dim_theta + 1))

    def data_mean(self):
        return np.zeros(self.dim_theta + 1)

    def eta(self, x) -> float:
        return (1.0 + self.data_norm(x)) ** 2

    def dissipativity_quad(self, theta, x) -> float:
        y, _ = self._split(x)
        return float(y @ theta) ** 2

    def b_of(self, x) -> float:
        _, z = self._split(x)
        return z * z

    def sample_target(self, rng, size, beta):
        if beta <= 0:
            raise ValueError("beta must be positive")
        return rng.standard_normal((size, self.dim_theta)) / np.sqrt(2.0 * beta)

    def potential(self, theta) -> float:
        theta = np.asarray(theta, dtype=float)
        return 1.0 + float(theta @ theta)

    def potential_min(self) -> float:
        return 1.0


# ---------------------------------------------------------------------------
# Exactly solvable calibration targets
# ---------------------------------------------------------------------------


class GaussianLocationModel(GradientModel):
    """H(theta, x) = theta - x with x ~ N(0, sigma^2 I); target N(0, I/beta).

    The linear one-step recursion has a closed-form stationary law, which is
    what the calibration experiments compare against.
    """

    name = "gaussian"

    def __init__(self, dim: int = 1, sigma_data: float = 1.0):
        if sigma_data <= 0:
            raise ValueError("sigma_data must be positive")
        if dim < 1:
            raise ValueError("dim must be >= 1")
        self.dim_theta = int(dim)
        self.sigma_data = float(sigma_data)
        self.has_exact_full_gradient = True
        self.has_exact_target_sampler = True
        self.constants = AssumptionConstants(
            L1=1.0,
            L2=1.0,
            a=0.5,
            b=0.5 * dim * sigma_data**2,
            H_star=0.0,
            eta0=1.0,
        )

    def stoch_grad(self, theta, x):
        return np.asarray(theta, dtype=float) - np.asarray(x, dtype=float)

    def stoch_grad_many(self, theta, xs):
        return np.asarray(theta, dtype=float)[None, :] - np.asarray(xs, dtype=float)

    def stoch_grad_pairs(self, thetas, xs):
        return thetas - np.asarray(xs, dtype=float)

    def full_grad(self, theta):
        return np.asarray(theta, dtype=float).copy()

    def sample_data(self, rng):
        return self.sigma_data * rng.standard_normal(self.dim_theta)

    def sample_data_batch(self, rng, size):
        return self.sigma_data * rng.standard_normal((size, self.dim_theta))

    def data_mean(self):
        return np.zeros(self.dim_theta)

    def eta(self, x) -> float:
        return 1.0

    def dissipativity_quad(self, theta, x) -> float:
        return 0.5 * float(theta @ theta)

    def b_of(self, x) -> float:
        return 0.5 * self.data_norm(x) ** 2

    def sample_target(self, rng, size, beta):
        if beta <= 0:
            raise ValueError("beta must be positive")
        return rng.standard_normal((size, self.dim_theta)) / np.sqrt(beta)

    def potential(self, theta) -> float:
        theta = np.asarray(theta, dtype=float)
        return 0.5 * float(theta @ theta)

    def potential_min(self) -> float:
        return 0.0

    def stationary_variance(self, lam: float, beta: float) -> float:
        """Per-coordinate variance of the chain's stationary law."""
        return (lam * self.sigma_data**2 + 2.0 / beta) / (2.0 - lam)


class MixturePriorModel(GradientModel):
    """Deterministic gradient of the two-component Gaussian mixture energy.

    There is no data term: H(theta, x) = h(theta) for every x.  At unit
    inverse temperature the target is the equal-weight mixture of N(+a_hat, I)
    and N(-a_hat, I), which is exactly samplable.
    """

    name = "mixture"

    def __init__(self, a_hat: Sequence[float]):
        a_hat = np.asarray(a_hat, dtype=float)
        a2 = float(a_hat @ a_hat)
        if a2 <= 1.0:
            raise ValueError("need |a_hat|^2 > 1 (nonconvex prior regime)")
        self.a_hat = a_hat
        self.dim_theta = a_hat.shape[0]
        self.has_exact_full_gradient = True
        self.has_exact_target_sampler = True
        self.constants = AssumptionConstants(
            L1=1.0 + a2, L2=0.0, a=0.5, b=0.5 * a2, H_star=0.0, eta0=1.0
        )

    def stoch_grad(self, theta, x):
        return self.full_grad(theta)

    def stoch_grad_many(self, theta, xs):
        g = self.full_grad(theta)
        return np.tile(g, (len(xs), 1))

    def stoch_grad_pairs(self, thetas, xs):
        dots = np.sum(thetas * self.a_hat, axis=1)
        return (
            thetas
            - self.a_hat[None, :]
            + 2.0 * self.a_hat[None, :] * inv_one_plus_exp(2.0 * dots)[:, None]
        )

    def full_grad(self, theta):
        theta = self._check_theta(theta)
        return _prior_grad(theta, self.a_hat)

    def sample_data(self, rng):
        return np.zeros(1)

    def sample_data_batch(self, rng, size):
        return np.zeros((size, 1))

    def data_mean(self):
        return np.zeros(1)

    def eta(self, x) -> float:
        return 1.0

    def dissipativity_quad(self, theta, x) -> float:
        return 0.5 * float(theta @ theta)

    def b_of(self, x) -> float:
        return 0.5 * float(self.a_hat @ self.a_hat)

    def sample_target(self, rng, size, beta):
        if not np.isclose(beta, 1.0):
            raise ValueError("exact mixture sampling requires beta = 1")
        signs = np.where(rng.random(size) < 0.5, 1.0, -1.0)
        return signs[:, None] * self.a_hat[None, :] + rng.standard_normal(
            (size, self.dim_theta)
        )

    def potential(self, theta) -> float:
        theta = self._check_theta(theta)
        return 0.5 * float(np.sum((theta - self.a_hat) ** 2)) - float(
            log_one_plus_exp(-2.0 * float(self.a_hat @ theta))
        )

    def potential_min(self) -> float:
        # minimizers lie on the a_hat axis; reduce to one scalar variable
        a2 = float(self.a_hat @ self.a_hat)

        def g(s):
            return 0.5 * s**2 / a2 - s + 0.5 * a2 - float(log_one_plus_exp(-2.0 * s))

        res = minimize_scalar(g, bounds=(0.0, 4.0 * a2), method="bounded",
                              options={"xatol": 1e-12})
        return float(res.fun)


# ---------------------------------------------------------------------------
# Registry
# ---------------------------------------------------------------------------

_REGISTRY: dict[str, Callable[..., GradientModel]] = {
    "logreg": LogisticPosteriorModel,
    "vi": VariationalMixtureModel,
    "linear_mse": LinearRegressorModel,
    "gaussian": GaussianLocationModel,
    "mixture": MixturePriorModel,
}


def model_names() -> list[str]:
    return sorted(_REGISTRY)


def make_model(name: str, **params) -> GradientModel:
    """Build a registered gradient model from keyword parameters."""
    try:
        factory = _REGISTRY[name]
    except KeyError:
        raise ValueError(f"unknown model {name!r}; choose from {model_names()}") from None
    return factory(**params)
