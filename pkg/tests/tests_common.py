"""Shared fixtures-by-hand for the test suite."""

import numpy as np

from feedopt import algorithm, problem, subweibull


def static_instance(n_t=101, silent=False, p=0.7, seed=0):
    """Fixed 3-input, 2-output quadratic tracking instance.

    Static schedules (phi = 0), known curvature, step size 1/L.  With
    ``silent`` every error channel is switched off.
    """
    G = np.array([[0.7, 0.3, 0.2], [0.1, 0.6, 0.4]])
    H = np.array([[1.0], [0.8]])
    y_ref = np.tile([0.8, -0.3], (n_t, 1))
    a = np.tile([0.4, 0.7, 0.5], (n_t, 1))
    b = np.tile([0.1, -0.3, 0.2], (n_t, 1))
    c = np.zeros((n_t, 3))
    w = 0.2 * np.ones((n_t, 1))
    lower = np.full((n_t, 3), -3.0)
    upper = np.full((n_t, 3), 3.0)
    prob = problem.TimeVaryingProblem(
        problem.LinearPlantMap(G, H),
        problem.BoxSchedule(lower, upper),
        problem.CostSchedule(1.0, y_ref, a, b, c, w),
    )
    _, L = prob.curvature_all()
    if silent:
        eps = xi = noise = subweibull.zero()
    else:
        eps = subweibull.gaussian(0.05)
        xi = subweibull.gaussian(0.05)
        noise = subweibull.gaussian(0.02)
    cfg = algorithm.AlgoConfig(
        alpha=1.0 / float(L.max()), p=p,
        eps_sampler=eps, xi_sampler=xi, meas_noise=noise, seed=seed,
    )
    return prob, cfg
