"""Online projected gradient tracking with intermittent measurements.

At every step an output measurement is available with probability ``p``
(an i.i.d. Bernoulli indicator ``v_t``).  When it is, the iterate moves
along an inexact gradient assembled from the measured output and a noisy
model of the separable input cost; when it is not, the iterate is only
re-projected onto the current feasible box:

    x_t = P_{X_t}[ x_{t-1} - v_t * alpha * ( beta G^T (y_hat - yref_t)
                                             + grad U_t(x_{t-1}) + eps_t + xi_t ) ],
    y_hat = G x_{t-1} + H w_{t-1} + n_t.

``eps_t`` is input-cost gradient error (e.g. from a learned model),
``xi_t`` is error in the tracking part, ``n_t`` is measurement noise.

Randomness protocol: at each step the generator is consumed in the fixed
order (availability uniform, eps, xi, measurement noise), and the noise is
drawn even on steps where no measurement arrives.  Runs with the same seed
but different ``p`` therefore share one underlying sample path, and their
availability indicators are monotone in ``p`` (v coupling), which makes
cross-``p`` comparisons well paired.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .subweibull import ErrorSampler

__all__ = ["AlgoConfig", "Trajectory", "noisy_gradient", "step", "run"]


@dataclass(frozen=True)
class AlgoConfig:
    """Step size, measurement availability, error models and the run seed."""

    alpha: float
    p: float
    eps_sampler: ErrorSampler
    xi_sampler: ErrorSampler
    meas_noise: ErrorSampler
    seed: int = 0

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"step size must be positive, got {self.alpha}")
        if not 0.0 < self.p <= 1.0:
            raise ValueError(f"availability probability must lie in (0, 1], got {self.p}")


@dataclass
class Trajectory:
    """One realized run over ``t = 0 .. n_steps``.

    ``v[t]`` is the availability indicator consumed at update ``t``
    (``v[0] = 0``: no update produces the initial point).  ``e_norm[t]`` is
    the norm of the gradient error drawn at step ``t`` whether or not the
    update consumed it, and ``grad[t]`` is the gradient estimate actually
    applied (zeros on skipped updates).  ``d[t]`` is the distance to the
    step-``t`` constrained optimum.
    """

    x: np.ndarray
    v: np.ndarray
    d: np.ndarray
    e_norm: np.ndarray
    grad: np.ndarray

    @property
    def n_steps(self) -> int:
        return self.x.shape[0] - 1

    def to_csv(self, path) -> None:
        """Rows ``t, v, d_t, e_norm, x_1..x_M`` with 15 significant digits."""
        m = self.x.shape[1]
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["t", "v", "d_t", "e_norm"] + [f"x_{j + 1}" for j in range(m)])
            for t in range(self.x.shape[0]):
                writer.writerow(
                    [t, int(self.v[t]), _fmt(self.d[t]), _fmt(self.e_norm[t])]
                    + [_fmt(val) for val in self.x[t]]
                )


def _fmt(value: float) -> str:
    return format(float(value), ".15g")


def noisy_gradient(prob, x, y_hat, t, eps_sampler, xi_sampler, rng):
    """Inexact gradient at ``x`` given a measured output ``y_hat``.

    Returns ``(gradient, error_vector)`` where the error vector is the drawn
    ``eps + xi`` (measurement noise enters through ``y_hat`` and is not part
    of it).
    """
    eps = eps_sampler.sample(rng, prob.n_inputs)
    xi = xi_sampler.sample(rng, prob.n_inputs)
    grad = prob.tracking_gradient(y_hat, t) + prob.u_gradient(x, t) + eps + xi
    return grad, eps + xi


def step(prob, x_prev, t, v, grad, alpha):
    """One update: gradient move when ``v`` is set, then projection onto ``X_t``."""
    x_prev = np.asarray(x_prev, dtype=float)
    if v:
        return prob.project(x_prev - alpha * np.asarray(grad, dtype=float), t)
    return prob.project(x_prev, t)


def run(prob, cfg, x0=None, n_steps=None, input_grad=None, after_step=None, rng=None):
    """Simulate the online update for ``n_steps`` steps.

    Parameters
    ----------
    prob : TimeVaryingProblem
    cfg : AlgoConfig
    x0 : starting point, feasible for the step-0 box; defaults to the box
        midpoint.
    n_steps : number of updates; defaults to the full schedule.
    input_grad : optional callable ``(x, t) -> vector`` replacing the model
        term ``grad U_t(x) + eps_t`` (used for learned costs).  The
        eps sampler is still drawn each step so the underlying sample path
        is unchanged, and the recorded error norm uses the callable's
        deviation from the true input-cost gradient.
    after_step : optional callable ``(t, x_t, rng)`` invoked after every
        update (measurement scheduling hooks live here).
    rng : optional generator overriding ``default_rng(cfg.seed)``.

    Returns a :class:`Trajectory`.
    """
    if n_steps is None:
        n_steps = prob.n_steps
    n_steps = int(n_steps)
    if not 1 <= n_steps <= prob.n_steps:
        raise ValueError(
            f"step count must lie in [1, {prob.n_steps}] for this schedule, got {n_steps}"
        )
    _, curv_l = prob.curvature_all()
    l_sup = float(curv_l[1 : n_steps + 1].max())
    if not cfg.alpha < 2.0 / l_sup:
        raise ValueError(
            f"step size {cfg.alpha} violates the contraction condition "
            f"alpha < 2/L = {2.0 / l_sup:.6g} for this instance"
        )
    m = prob.n_inputs
    if x0 is None:
        x0 = 0.5 * (prob.boxes.lower[0] + prob.boxes.upper[0])
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (m,):
        raise ValueError(f"starting point must have shape ({m},), got {x0.shape}")
    if np.linalg.norm(prob.project(x0, 0) - x0) > 1e-9:
        raise ValueError("starting point is infeasible for the step-0 box")
    if rng is None:
        rng = np.random.default_rng(cfg.seed)

    optima = prob.optimal_points()
    x = np.empty((n_steps + 1, m))
    v = np.zeros(n_steps + 1, dtype=np.int8)
    d = np.empty(n_steps + 1)
    e_norm = np.zeros(n_steps + 1)
    grad_used = np.zeros((n_steps + 1, m))
    x[0] = x0
    d[0] = float(np.linalg.norm(x0 - optima[0]))

    for t in range(1, n_steps + 1):
        x_prev = x[t - 1]
        # fixed consumption order; draws happen regardless of availability
        u = rng.random()
        eps = cfg.eps_sampler.sample(rng, m)
        xi = cfg.xi_sampler.sample(rng, m)
        noise = cfg.meas_noise.sample(rng, prob.n_outputs)
        avail = u < cfg.p
        if input_grad is None:
            model_term = prob.u_gradient(x_prev, t) + eps
            err = eps + xi
        else:
            model_term = np.asarray(input_grad(x_prev, t), dtype=float)
            err = (model_term - prob.u_gradient(x_prev, t)) + xi
        e_norm[t] = float(np.linalg.norm(err))
        if avail:
            y_hat = prob.output(x_prev, t - 1) + noise
            grad = prob.tracking_gradient(y_hat, t) + model_term + xi
            grad_used[t] = grad
            v[t] = 1
        else:
            grad = None
        x[t] = step(prob, x_prev, t, avail, grad, cfg.alpha)
        d[t] = float(np.linalg.norm(x[t] - optima[t]))
        if after_step is not None:
            after_step(t, x[t], rng)

    return Trajectory(x=x, v=v, d=d, e_norm=e_norm, grad=grad_used)
