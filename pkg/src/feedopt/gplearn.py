"""Gaussian-process regression of unknown input costs, one coordinate at a time.

The separable part of the decision cost, ``U_t(x) = sum_m u_m(x_m)``, may be
unknown to the controller (user preferences, device wear).  Each coordinate
function ``u_m`` is learned from sparse noisy functional evaluations with a
scalar Gaussian process under the squared-exponential kernel

    k(x, x') = sigma_f2 * exp(-(x - x')^2 / (2 ell^2)).

Given sites ``x_1..x_q`` and observations ``z_i = u(x_i) + noise``, the
posterior mean and variance at a query ``x`` are

    mean(x) = k_q(x)^T (K + noise_var I)^{-1} z,
    var(x)  = k(x, x) - k_q(x)^T (K + noise_var I)^{-1} k_q(x),

and because the kernel is smooth the posterior mean has the closed-form
derivative

    mean'(x) = sum_i c_i * (x_i - x) / ell^2 * k(x_i, x),
    c = (K + noise_var I)^{-1} z,

which is what the online update consumes in place of the true gradient of
``u``.  No finite differencing is involved.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

__all__ = ["SquaredExponential", "GPPosterior", "estimate_U_gradient"]


@dataclass(frozen=True)
class SquaredExponential:
    """Stationary squared-exponential kernel on the real line."""

    sigma_f2: float
    ell: float

    def __post_init__(self):
        if not self.sigma_f2 > 0:
            raise ValueError(f"signal variance must be positive, got {self.sigma_f2}")
        if not self.ell > 0:
            raise ValueError(f"length scale must be positive, got {self.ell}")

    def __call__(self, x1, x2):
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        diff = x1 - x2
        return self.sigma_f2 * np.exp(-(diff * diff) / (2.0 * self.ell**2))

    def gram(self, xs) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        return self(xs[:, None], xs[None, :])


class GPPosterior:
    """Posterior over one scalar cost coordinate.

    With no observations the object represents the prior (zero mean,
    ``sigma_f2`` variance, zero mean-gradient).  ``add_observation`` returns
    a new posterior; passing ``max_obs`` keeps only the most recent sites,
    which lets stale data age out when the underlying cost switches.
    """

    def __init__(self, kernel: SquaredExponential, noise_var: float, sites=(), values=()):
        if not noise_var >= 0:
            raise ValueError(f"observation noise variance must be nonnegative, got {noise_var}")
        self.kernel = kernel
        self.noise_var = float(noise_var)
        self.sites = np.asarray(sites, dtype=float).reshape(-1)
        self.values = np.asarray(values, dtype=float).reshape(-1)
        if self.sites.shape != self.values.shape:
            raise ValueError("sites and values must have the same length")
        if self.sites.size:
            gram = kernel.gram(self.sites)
            self._chol = _robust_cholesky(gram, self.noise_var, kernel.sigma_f2)
            self._coeffs = cho_solve(self._chol, self.values)
        else:
            self._chol = None
            self._coeffs = np.zeros(0)

    @property
    def n_obs(self) -> int:
        return self.sites.size

    def add_observation(self, x: float, z: float, max_obs: int | None = None) -> "GPPosterior":
        sites = np.append(self.sites, float(x))
        values = np.append(self.values, float(z))
        if max_obs is not None and sites.size > max_obs:
            sites, values = sites[-max_obs:], values[-max_obs:]
        return GPPosterior(self.kernel, self.noise_var, sites, values)

    def _cross(self, xs) -> np.ndarray:
        # k_q(x) for each query, shape (n_queries, q)
        return self.kernel(np.atleast_1d(np.asarray(xs, dtype=float))[:, None], self.sites[None, :])

    def posterior_mean(self, xs):
        xs_arr = np.atleast_1d(np.asarray(xs, dtype=float))
        if self.n_obs == 0:
            out = np.zeros(xs_arr.shape)
        else:
            out = self._cross(xs_arr) @ self._coeffs
        return float(out[0]) if np.isscalar(xs) or np.ndim(xs) == 0 else out

    def posterior_var(self, xs):
        xs_arr = np.atleast_1d(np.asarray(xs, dtype=float))
        prior = self.kernel(xs_arr, xs_arr)
        if self.n_obs == 0:
            out = prior
        else:
            cross = self._cross(xs_arr)
            reduction = np.einsum("ij,ji->i", cross, cho_solve(self._chol, cross.T))
            out = np.maximum(prior - reduction, 0.0)  # clamp the numerical negatives
        return float(out[0]) if np.isscalar(xs) or np.ndim(xs) == 0 else out

    def posterior_cov(self, xs) -> np.ndarray:
        xs = np.asarray(xs, dtype=float).reshape(-1)
        prior = self.kernel(xs[:, None], xs[None, :])
        if self.n_obs == 0:
            return prior
        cross = self._cross(xs)
        return prior - cross @ cho_solve(self._chol, cross.T)

    def mean_gradient(self, xs):
        """Exact derivative of the posterior mean at the query point(s)."""
        xs_arr = np.atleast_1d(np.asarray(xs, dtype=float))
        if self.n_obs == 0:
            out = np.zeros(xs_arr.shape)
        else:
            cross = self._cross(xs_arr)
            slope = (self.sites[None, :] - xs_arr[:, None]) / self.kernel.ell**2
            out = (cross * slope) @ self._coeffs
        return float(out[0]) if np.isscalar(xs) or np.ndim(xs) == 0 else out


def estimate_U_gradient(gps, x) -> np.ndarray:
    """Stacked posterior mean-gradient of a separable cost at the point ``x``.

    ``gps`` holds one :class:`GPPosterior` per coordinate; the result is the
    vector whose m-th entry is the m-th posterior's mean-gradient at
    ``x[m]``.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    if len(gps) != x.size:
        raise ValueError(f"{len(gps)} coordinate models but a point of dimension {x.size}")
    return np.array([gp.mean_gradient(float(xm)) for gp, xm in zip(gps, x)])


def _robust_cholesky(gram: np.ndarray, noise_var: float, sigma_f2: float):
    """Cholesky of ``gram + noise_var I``, escalating a tiny jitter if needed."""
    eye = np.eye(gram.shape[0])
    for jitter in (0.0, 1e-12, 1e-10, 1e-8):
        try:
            return cho_factor(gram + (noise_var + jitter * sigma_f2) * eye, lower=True)
        except np.linalg.LinAlgError:
            continue
    raise np.linalg.LinAlgError(
        "kernel matrix is numerically singular even with jitter; "
        "observation sites are likely duplicated with zero noise"
    )
