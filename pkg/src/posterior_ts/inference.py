"""Posterior maintenance over dynamics parameters.

Two families are supported: a discretised posterior on a product grid
over ``[0.01, 0.99]^d`` for Bernoulli-parameterised finite MDPs, and the
conjugate Gaussian posterior of a linear-Gaussian model with known noise
for the glucose regression coefficients.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import linalg

from .environments import THETA_HIGH, THETA_LOW
from .errors import DomainError, NumericalError, PosteriorStateError
from .rng import RngStream

NORMALIZATION_TOL = 1e-12


@dataclass
class SufficientCounts:
    """Bernoulli success/failure counts, one pair per dynamics parameter."""

    success: np.ndarray
    failure: np.ndarray

    @classmethod
    def zeros(cls, n_params: int) -> "SufficientCounts":
        return cls(np.zeros(n_params, dtype=np.int64), np.zeros(n_params, dtype=np.int64))

    def add(self, param: int, success: bool, n: int = 1) -> None:
        if n < 0:
            raise DomainError("counts only increase")
        if success:
            self.success[param] += n
        else:
            self.failure[param] += n

    def copy(self) -> "SufficientCounts":
        return SufficientCounts(self.success.copy(), self.failure.copy())

    def __add__(self, other: "SufficientCounts") -> "SufficientCounts":
        return SufficientCounts(self.success + other.success, self.failure + other.failure)

    @property
    def n_params(self) -> int:
        return len(self.success)


@dataclass(frozen=True, eq=False)
class GridPosterior:
    """Discretised posterior on the product of per-dimension grids.

    ``log_weights`` has one axis per parameter. Weights are normalised
    in log space, so ``exp(log_weights).sum() == 1`` when ``normalized``.
    ``prior_factors`` holds per-dimension log priors when the prior is a
    product; the Bernoulli likelihood separates too, so updates can then
    work dimension by dimension.
    """

    grids: tuple
    log_prior: np.ndarray
    log_weights: np.ndarray
    normalized: bool = True
    prior_factors: tuple | None = None

    @classmethod
    def uniform(cls, n_points, n_dims: int = 1, low: float = THETA_LOW, high: float = THETA_HIGH):
        if np.isscalar(n_points):
            n_points = (int(n_points),) * n_dims
        grids = tuple(np.linspace(low, high, n) for n in n_points)
        shape = tuple(len(g) for g in grids)
        log_prior = np.full(shape, -np.log(np.prod(shape, dtype=float)))
        factors = tuple(np.full(len(g), -np.log(len(g))) for g in grids)
        return cls(grids, log_prior, log_prior.copy(), True, factors)

    @property
    def shape(self) -> tuple:
        return self.log_weights.shape

    @property
    def n_dims(self) -> int:
        return len(self.grids)

    @cached_property
    def _log_grids(self):
        return [(np.log(g), np.log1p(-g)) for g in self.grids]

    @cached_property
    def _cdf(self) -> np.ndarray:
        return np.cumsum(np.exp(self.log_weights).ravel())

    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)

    def point(self, flat_index: int) -> np.ndarray:
        idx = np.unravel_index(flat_index, self.shape)
        return np.array([g[i] for g, i in zip(self.grids, idx)])

    def marginal(self, dim: int) -> np.ndarray:
        axes = tuple(i for i in range(self.n_dims) if i != dim)
        return self.weights().sum(axis=axes) if axes else self.weights()

    def mean(self) -> np.ndarray:
        return np.array([self.marginal(d) @ g for d, g in enumerate(self.grids)])


def _normalize(lw: np.ndarray):
    """Max-shifted log normalisation; also returns the flat CDF of the weights."""
    m = np.max(lw)
    if not np.isfinite(m):
        raise NumericalError("grid posterior has no finite log weight")
    lw = lw - m
    cdf = np.cumsum(np.exp(lw).ravel())
    return lw - np.log(cdf[-1]), cdf / cdf[-1]


def _log_likelihoods(post: GridPosterior, counts: SufficientCounts):
    return [counts.success[d] * log_g + counts.failure[d] * log_1mg
            for d, (log_g, log_1mg) in enumerate(post._log_grids)]


def grid_update(post: GridPosterior, counts: SufficientCounts, method: str = "auto") -> GridPosterior:
    """Posterior from the prior and the full counts, recomputed from scratch.

    ``method="full"`` always works on the whole product grid; ``"auto"``
    updates each dimension separately when the prior factorises.
    """
    if counts.n_params != post.n_dims:
        raise DomainError(f"{counts.n_params} count pairs for a {post.n_dims}-d grid")
    lls = _log_likelihoods(post, counts)
    if method == "auto" and post.prior_factors is not None:
        log_w, w = [], []
        for prior_d, ll in zip(post.prior_factors, lls):
            lw_d = prior_d + ll
            lw_d = lw_d - np.max(lw_d)
            e = np.exp(lw_d)
            log_w.append(lw_d - np.log(e.sum()))
            w.append(e / e.sum())
        log_weights = functools.reduce(np.add.outer, log_w)
        cdf = np.cumsum(functools.reduce(np.multiply.outer, w).ravel())
        cdf /= cdf[-1]
    elif method in ("auto", "full"):
        lw = post.log_prior
        for d, ll in enumerate(lls):
            shape = [1] * post.n_dims
            shape[d] = -1
            lw = lw + ll.reshape(shape)
        log_weights, cdf = _normalize(lw)
    else:
        raise DomainError(f"unknown update method {method!r}")
    new = GridPosterior(post.grids, post.log_prior, log_weights, True, post.prior_factors)
    new.__dict__["_log_grids"] = post._log_grids
    new.__dict__["_cdf"] = cdf
    return new


def grid_sample_index(post: GridPosterior, rng: RngStream) -> int:
    if not post.normalized:
        raise PosteriorStateError("grid posterior must be normalised before sampling")
    cdf = post._cdf
    idx = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    return min(idx, cdf.size - 1)


def grid_sample(post: GridPosterior, rng: RngStream) -> np.ndarray:
    """Inverse-CDF draw over grid cells; returns the grid point itself."""
    return post.point(grid_sample_index(post, rng))


# --------------------------------------------------------------------------
# Conjugate Gaussian linear regression with known noise
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GaussianPosterior:
    mean: np.ndarray
    covariance: np.ndarray
    noise_sd: float = 5.0
    _chol: np.ndarray = field(default=None, repr=False)

    @classmethod
    def prior(cls, dim: int = 9, variance: float = 0.25, noise_sd: float = 5.0):
        return cls(np.zeros(dim), variance * np.eye(dim), noise_sd)

    @property
    def cholesky(self) -> np.ndarray:
        if self._chol is None:
            try:
                L = np.linalg.cholesky(self.covariance)
            except np.linalg.LinAlgError as exc:
                raise NumericalError(
                    f"covariance not positive definite (cond={np.linalg.cond(self.covariance):.3e})"
                ) from exc
            object.__setattr__(self, "_chol", L)
        return self._chol


def _cho(matrix: np.ndarray, what: str):
    try:
        return linalg.cho_factor(matrix, lower=True)
    except linalg.LinAlgError as exc:
        raise NumericalError(f"{what} not SPD (cond={np.linalg.cond(matrix):.3e})") from exc


def blr_update(prior_mean, prior_cov, X, y, noise_sd: float) -> GaussianPosterior:
    """Gaussian prior times Gaussian likelihood with known noise s.d.

    precision = prior_precision + X'X / noise_sd^2
    mean      = precision^-1 (prior_precision @ prior_mean + X'y / noise_sd^2)
    """
    prior_mean = np.asarray(prior_mean, dtype=float)
    prior_cov = np.asarray(prior_cov, dtype=float)
    p = prior_mean.size
    X = np.asarray(X, dtype=float).reshape(-1, p)
    y = np.asarray(y, dtype=float).ravel()
    if X.shape[0] != y.size:
        raise DomainError(f"{X.shape[0]} design rows but {y.size} responses")
    if X.shape[0] == 0:
        return GaussianPosterior(prior_mean.copy(), prior_cov.copy(), noise_sd)

    prior_factor = _cho(prior_cov, "prior covariance")
    prior_prec = linalg.cho_solve(prior_factor, np.eye(p))
    prec = prior_prec + X.T @ X / noise_sd**2
    prec = 0.5 * (prec + prec.T)
    factor = _cho(prec, "posterior precision")
    rhs = prior_prec @ prior_mean + X.T @ y / noise_sd**2
    mean = linalg.cho_solve(factor, rhs)
    cov = linalg.cho_solve(factor, np.eye(p))
    cov = 0.5 * (cov + cov.T)
    return GaussianPosterior(mean, cov, noise_sd)


def blr_sample(post: GaussianPosterior, rng: RngStream, size: int | None = None) -> np.ndarray:
    """``mean + L z`` with ``L`` the lower Cholesky factor of the covariance."""
    L = post.cholesky
    p = post.mean.size
    if size is None:
        return post.mean + L @ rng.normal(p)
    z = rng.normal((size, p))
    return post.mean + z @ L.T
