"""CMA-ES over the encoded unit cube with canonical CSA parameterization."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from reasonbo.core import MINIMIZE, PointAssignment, SearchSpace, SpaceEncoder

RESAMPLE_ATTEMPTS = 100


class CmaStateError(RuntimeError):
    """Covariance factorization failed; the optimizer state is corrupted."""


@dataclass(frozen=True)
class CmaState:
    mean: np.ndarray
    step_size: float
    cov: np.ndarray
    p_sigma: np.ndarray
    p_c: np.ndarray
    weights: np.ndarray
    lam: int
    mu: int
    generation: int
    seed: int

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


def default_population(dim: int) -> int:
    return 4 + int(math.floor(3.0 * math.log(dim)))


def _strategy_constants(dim: int, weights: np.ndarray) -> dict[str, float]:
    mu_eff = 1.0 / float(np.sum(weights ** 2))
    c_sigma = (mu_eff + 2.0) / (dim + mu_eff + 5.0)
    d_sigma = 1.0 + 2.0 * max(0.0, math.sqrt((mu_eff - 1.0) / (dim + 1.0)) - 1.0) + c_sigma
    c_c = (4.0 + mu_eff / dim) / (dim + 4.0 + 2.0 * mu_eff / dim)
    c_1 = 2.0 / ((dim + 1.3) ** 2 + mu_eff)
    c_mu = min(1.0 - c_1,
               2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((dim + 2.0) ** 2 + mu_eff))
    chi_n = math.sqrt(dim) * (1.0 - 1.0 / (4.0 * dim) + 1.0 / (21.0 * dim ** 2))
    return {"mu_eff": mu_eff, "c_sigma": c_sigma, "d_sigma": d_sigma,
            "c_c": c_c, "c_1": c_1, "c_mu": c_mu, "chi_n": chi_n}


def cma_init(
    space: SearchSpace,
    seed: int,
    x0: PointAssignment | None = None,
    sigma0: float = 0.3,
    lam: int | None = None,
    mu: int | None = None,
) -> CmaState:
    encoder = SpaceEncoder(space)
    d = encoder.width
    lam = lam if lam is not None else default_population(d)
    mu = mu if mu is not None else lam // 2
    if not (1 <= mu <= lam):
        raise ValueError("need 1 <= mu <= lam")
    raw = np.log(mu + 0.5) - np.log(np.arange(1, mu + 1))
    weights = raw / np.sum(raw)
    mean = encoder.encode(x0) if x0 is not None else np.full(d, 0.5)
    return CmaState(
        mean=mean,
        step_size=float(sigma0),
        cov=np.eye(d),
        p_sigma=np.zeros(d),
        p_c=np.zeros(d),
        weights=weights,
        lam=lam,
        mu=mu,
        generation=0,
        seed=int(seed),
    )


def _cov_eig(cov: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if not np.all(np.isfinite(cov)):
        raise CmaStateError("covariance contains non-finite entries")
    eigvals, eigvecs = np.linalg.eigh(0.5 * (cov + cov.T))
    if float(eigvals[0]) <= 0.0:
        raise CmaStateError(f"covariance not positive definite (min eig {eigvals[0]:g})")
    return eigvals, eigvecs


def cma_ask(state: CmaState, space: SearchSpace) -> list[PointAssignment]:
    """Draw lambda individuals from N(m, sigma^2 C), kept inside the unit box.

    Out-of-box draws are resampled a bounded number of times, then clipped.
    The call is pure: the same state always yields the same population.
    """
    encoder = SpaceEncoder(space)
    eigvals, eigvecs = _cov_eig(state.cov)
    transform = eigvecs * np.sqrt(eigvals)
    rng = np.random.default_rng(np.random.SeedSequence([state.seed, state.generation]))
    points: list[PointAssignment] = []
    for _ in range(state.lam):
        x = None
        for _ in range(RESAMPLE_ATTEMPTS):
            z = rng.standard_normal(state.dim)
            cand = state.mean + state.step_size * (transform @ z)
            if np.all((cand >= 0.0) & (cand <= 1.0)):
                x = cand
                break
        if x is None:
            x = np.clip(cand, 0.0, 1.0)
        points.append(encoder.decode(x))
    return points


def cma_tell(
    state: CmaState,
    space: SearchSpace,
    points: list[PointAssignment],
    values,
    direction: str = MINIMIZE,
) -> CmaState:
    """Rank-based mean, step-size, and covariance update.

    Only the ranking of values is used, so any strictly monotone transform of
    the objective leaves the resulting state unchanged. Non-finite values rank
    worst. Maximization negates internally.
    """
    if len(points) != state.lam or len(values) != state.lam:
        raise ValueError(f"expected exactly {state.lam} points and values")
    encoder = SpaceEncoder(space)
    xs = np.vstack([encoder.encode(p) for p in points])
    vals = np.asarray(values, dtype=float)
    if direction != MINIMIZE:
        vals = -vals
    vals = np.where(np.isfinite(vals), vals, np.inf)
    order = np.argsort(vals, kind="stable")
    sel = xs[order[: state.mu]]

    consts = _strategy_constants(state.dim, state.weights)
    mu_eff, c_sigma, d_sigma = consts["mu_eff"], consts["c_sigma"], consts["d_sigma"]
    c_c, c_1, c_mu, chi_n = consts["c_c"], consts["c_1"], consts["c_mu"], consts["chi_n"]

    old_mean = state.mean
    new_mean = state.weights @ sel
    y = (sel - old_mean) / state.step_size
    y_w = state.weights @ y

    eigvals, eigvecs = _cov_eig(state.cov)
    inv_sqrt = (eigvecs / np.sqrt(eigvals)) @ eigvecs.T
    p_sigma = ((1.0 - c_sigma) * state.p_sigma
               + math.sqrt(c_sigma * (2.0 - c_sigma) * mu_eff) * (inv_sqrt @ y_w))
    step_size = state.step_size * math.exp(
        (c_sigma / d_sigma) * (float(np.linalg.norm(p_sigma)) / chi_n - 1.0)
    )

    gen1 = state.generation + 1
    denom = math.sqrt(1.0 - (1.0 - c_sigma) ** (2 * gen1))
    h_sigma = (np.linalg.norm(p_sigma) / denom) < ((1.4 + 2.0 / (state.dim + 1.0)) * chi_n)
    p_c = ((1.0 - c_c) * state.p_c
           + (math.sqrt(c_c * (2.0 - c_c) * mu_eff) * y_w if h_sigma else 0.0))
    delta_h = (1.0 - float(h_sigma)) * c_c * (2.0 - c_c)

    rank_mu = (y.T * state.weights) @ y
    cov = ((1.0 - c_1 - c_mu) * state.cov
           + c_1 * (np.outer(p_c, p_c) + delta_h * state.cov)
           + c_mu * rank_mu)
    cov = 0.5 * (cov + cov.T)

    return replace(
        state,
        mean=new_mean,
        step_size=step_size,
        cov=cov,
        p_sigma=p_sigma,
        p_c=p_c,
        generation=gen1,
    )
