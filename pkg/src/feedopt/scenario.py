"""Demand-response study: distributed energy resources tracking setpoints.

Six controllable resources (two per box family: a symmetric band, a
mid-range band and a wide band) feed two points of common coupling through
a normalized sensitivity matrix.  The operator tracks periodic power
references at the couplings over a 12-hour run at 5-second steps while
each resource carries a private quadratic cost that alternates between
two preference profiles at the configured switch steps.  Output
measurements arrive with probability ``p``; the private costs are either
known exactly (``exact`` mode) or learned online from sparse functional
evaluations with per-coordinate Gaussian processes (``gp`` mode).  Owners
signal profile changes, so the learner keeps one dataset per profile and
data recorded under the outgoing profile never contaminates the posterior
used while the other one is active.

Everything is generated from one seed: the instance, the starting points,
the measurement pattern and the noise.  Runs with the same seed and
different ``p`` share a sample path, so the suite's cross-``p``
comparisons are paired.
"""

from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import algorithm, gplearn, problem, subweibull

__all__ = [
    "ScenarioConfig",
    "ExperimentResult",
    "active_profile",
    "build_scenario",
    "run_experiment",
    "run_suite",
    "seed_cost_learners",
    "coordinate_cost",
    "algo_config",
    "scaled_down",
]


@dataclass(frozen=True)
class ScenarioConfig:
    """Knobs of the study; defaults reproduce the reference configuration."""

    # plant
    n_ders: int = 6
    n_pcc: int = 2
    n_loads: int = 2
    # costs
    beta: float = 1.0
    a_range_one: tuple = (0.1, 0.5)
    a_range_two: tuple = (0.5, 1.0)
    b_range: tuple = (-3.0, 3.0)
    switch_steps: tuple = (2880, 5760)
    ref_base: float = 25.0
    ref_amplitude: float = 8.0
    ref_period: int = 960
    dist_base: float = 20.0
    dist_amplitude: float = 4.0
    dist_period: int = 5760
    trace_decay: float = 0.15
    obs_noise_sigma: float = 0.1
    # constraints: (lower_min, lower_max, upper_min, upper_max) per box family
    box_ranges: tuple = ((-10.0, -6.0, 6.0, 10.0), (3.0, 7.0, 13.0, 17.0), (0.0, 3.0, 28.0, 32.0))
    box_period: int = 2880
    # algorithm
    alpha: float = 0.5
    p_values: tuple = (0.4, 0.6, 0.8, 1.0)
    eps_kind: str = "gaussian"
    eps_scale: float = 0.0
    eps_theta: float = 1.0
    xi_kind: str = "weibull-tail"
    xi_scale: float = 0.15
    xi_theta: float = 2.0
    meas_kind: str = "gaussian"
    meas_scale: float = 0.1
    meas_theta: float = 1.0
    # gp learning
    gp_sigma_f2: float | None = None   # None: match the seed observations' spread
    gp_ell: float | None = None        # None: half the step-0 box width
    gp_noise_var: float | None = None  # None: obs_noise_sigma**2
    gp_seed_obs: int = 5
    eval_period: int = 360
    gp_max_obs: int | None = None      # None: keep every evaluation
    # suite
    horizon: int = 8640
    n_experiments: int = 10
    modes: tuple = ("exact", "gp")
    seed: int = 7

    def __post_init__(self):
        if self.n_ders < 1 or self.n_pcc < 1 or self.n_loads < 1:
            raise ValueError("plant dimensions must be positive")
        if self.horizon < 1:
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        if self.n_experiments < 1:
            raise ValueError(f"need at least one experiment, got {self.n_experiments}")
        if not all(0.0 < p <= 1.0 for p in self.p_values):
            raise ValueError(f"availability probabilities must lie in (0, 1], got {self.p_values}")
        if any(m not in ("exact", "gp") for m in self.modes):
            raise ValueError(f"modes must be drawn from exact/gp, got {self.modes}")
        if any(not 0 < s <= self.horizon for s in self.switch_steps):
            raise ValueError(f"switch steps must lie in (0, horizon], got {self.switch_steps}")
        if list(self.switch_steps) != sorted(set(self.switch_steps)):
            raise ValueError("switch steps must be strictly increasing")
        if self.eval_period < 1 or self.gp_seed_obs < 1:
            raise ValueError("evaluation period and seed-observation count must be positive")
        if self.gp_max_obs is not None and self.gp_max_obs < 2:
            raise ValueError("the observation window must keep at least 2 points")
        if not self.beta > 0:
            raise ValueError(f"tracking weight beta must be positive, got {self.beta}")
        for chan, kind, scale in (
            ("eps", self.eps_kind, self.eps_scale),
            ("xi", self.xi_kind, self.xi_scale),
            ("meas", self.meas_kind, self.meas_scale),
        ):
            if kind not in ("gaussian", "bounded-uniform", "weibull-tail"):
                raise ValueError(f"unknown sampler kind {kind!r} for {chan}")
            if scale < 0:
                raise ValueError(f"{chan} noise scale must be nonnegative, got {scale}")


def _sampler(kind: str, scale: float, theta: float) -> subweibull.ErrorSampler:
    if kind == "gaussian":
        return subweibull.gaussian(scale)
    if kind == "bounded-uniform":
        return subweibull.bounded_uniform(scale)
    if kind == "weibull-tail":
        return subweibull.weibull_tail(theta, scale)
    raise ValueError(f"unknown sampler kind {kind!r}")


def algo_config(cfg: ScenarioConfig, p: float) -> algorithm.AlgoConfig:
    """The algorithm settings the suite uses at availability ``p``."""
    return algorithm.AlgoConfig(
        alpha=cfg.alpha,
        p=p,
        eps_sampler=_sampler(cfg.eps_kind, cfg.eps_scale, cfg.eps_theta),
        xi_sampler=_sampler(cfg.xi_kind, cfg.xi_scale, cfg.xi_theta),
        meas_noise=_sampler(cfg.meas_kind, cfg.meas_scale, cfg.meas_theta),
        seed=cfg.seed,
    )


def build_scenario(cfg: ScenarioConfig, rng=None) -> problem.TimeVaryingProblem:
    """Generate the problem instance (plant, traces, boxes, switching costs).

    Deterministic in ``cfg.seed`` unless an explicit generator is passed.
    """
    if rng is None:
        rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(0,)))
    m, n_out, n_w = cfg.n_ders, cfg.n_pcc, cfg.n_loads
    G = rng.uniform(0.5, 1.0, (n_out, m))
    G /= np.linalg.svd(G, compute_uv=False)[0]
    H = rng.uniform(0.5, 1.0, (n_out, n_w))
    H /= np.linalg.svd(H, compute_uv=False)[0]

    n_t = cfg.horizon + 1
    t = np.arange(n_t, dtype=float)
    envelope = 1.0 - cfg.trace_decay * t / cfg.horizon

    # boxes breathe inside their families' ranges; two resources share a family
    lower = np.empty((n_t, m))
    upper = np.empty((n_t, m))
    for j in range(m):
        lo_min, lo_max, up_min, up_max = cfg.box_ranges[j % len(cfg.box_ranges)]
        phase_lo, phase_up = rng.uniform(0.0, 2.0 * np.pi, 2)
        wave_lo = 0.5 * (1.0 + np.sin(2.0 * np.pi * t / cfg.box_period + phase_lo))
        wave_up = 0.5 * (1.0 + np.sin(2.0 * np.pi * t / cfg.box_period + phase_up))
        lower[:, j] = lo_min + (lo_max - lo_min) * wave_lo
        upper[:, j] = up_min + (up_max - up_min) * wave_up

    w = np.empty((n_t, n_w))
    for j in range(n_w):
        scale_j = rng.uniform(0.8, 1.2)
        phase_j = rng.uniform(0.0, 2.0 * np.pi)
        w[:, j] = cfg.dist_base * scale_j + cfg.dist_amplitude * envelope * np.sin(
            2.0 * np.pi * t / cfg.dist_period + phase_j
        )

    y_ref = np.empty((n_t, n_out))
    for j in range(n_out):
        scale_j = rng.uniform(0.9, 1.1)
        ph1, ph2 = rng.uniform(0.0, 2.0 * np.pi, 2)
        y_ref[:, j] = cfg.ref_base * scale_j + cfg.ref_amplitude * envelope * (
            np.sin(2.0 * np.pi * t / cfg.ref_period + ph1)
            + 0.3 * np.sin(6.0 * np.pi * t / cfg.ref_period + ph2)
        )

    a_one = rng.uniform(*cfg.a_range_one, m)
    b_one = rng.uniform(*cfg.b_range, m)
    a_two = rng.uniform(*cfg.a_range_two, m)
    b_two = rng.uniform(*cfg.b_range, m)
    # profiles alternate at every switch step: one, two, one, ...
    in_second = (np.searchsorted(np.asarray(cfg.switch_steps), t, side="right") % 2).astype(bool)
    a = np.where(in_second[:, None], a_two[None, :], a_one[None, :])
    b = np.where(in_second[:, None], b_two[None, :], b_one[None, :])
    c = np.zeros((n_t, m))

    prob = problem.TimeVaryingProblem(
        problem.LinearPlantMap(G, H),
        problem.BoxSchedule(lower, upper),
        problem.CostSchedule(cfg.beta, y_ref, a, b, c, w),
    )
    prob.curvature_all()  # strong convexity holds for every step or this raises
    return prob


def coordinate_cost(prob: problem.TimeVaryingProblem, m: int, x: float, t: int) -> float:
    """The separable input cost of one coordinate, ``a_t[m] x^2 + b_t[m] x + c_t[m]``."""
    costs = prob.costs
    return float(costs.a[t, m] * x * x + costs.b[t, m] * x + costs.c[t, m])


def seed_cost_learners(prob, cfg, rng_obs):
    """One freshly seeded learner per coordinate, from noisy evaluations at
    uniform sites in the step-0 box."""
    gps = []
    for m in range(prob.n_inputs):
        lo = float(prob.boxes.lower[0, m])
        up = float(prob.boxes.upper[0, m])
        ell = cfg.gp_ell if cfg.gp_ell is not None else (up - lo) / 2.0
        noise_var = cfg.gp_noise_var if cfg.gp_noise_var is not None else cfg.obs_noise_sigma**2
        sites = rng_obs.uniform(lo, up, cfg.gp_seed_obs)
        values = np.array([coordinate_cost(prob, m, s, 0) for s in sites])
        values += cfg.obs_noise_sigma * rng_obs.standard_normal(cfg.gp_seed_obs)
        if cfg.gp_sigma_f2 is not None:
            sigma_f2 = cfg.gp_sigma_f2
        else:
            # prior variance matched to the observed cost spread, so the
            # posterior is not shrunk toward zero on costs of large magnitude
            sigma_f2 = max(float(np.var(values)), 1.0)
        kernel = gplearn.SquaredExponential(sigma_f2, ell)
        gps.append(gplearn.GPPosterior(kernel, noise_var, sites, values))
    return gps


def active_profile(switch_steps, t: int) -> int:
    """Index of the preference profile in force at step ``t`` (profiles
    alternate at every switch step)."""
    return int(np.searchsorted(np.asarray(switch_steps), t, side="right") % 2)


def run_experiment(prob, cfg: ScenarioConfig, p: float, mode: str, exp_index: int):
    """One full run of the study at availability ``p``.

    The experiment index seeds two child streams: the main one drives the
    starting point, the measurement pattern and the noise; a separate one
    drives the cost evaluations for the learner, so ``exact`` and ``gp``
    runs of the same experiment see identical sample paths.

    In ``gp`` mode the owners signal profile changes, so the learner holds
    one dataset per profile, each starting from the initial profiling
    samples.  Evaluations recorded under one profile never enter the
    posterior used while the other is active; when a profile returns, its
    accumulated dataset is restored.
    """
    if mode not in ("exact", "gp"):
        raise ValueError(f"mode must be 'exact' or 'gp', got {mode!r}")
    rng_main = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(1, exp_index, 0)))
    rng_obs = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(1, exp_index, 1)))
    x0 = rng_main.uniform(prob.boxes.lower[0], prob.boxes.upper[0])
    acfg = algo_config(cfg, p)

    if mode == "exact":
        return algorithm.run(prob, acfg, x0=x0, n_steps=cfg.horizon, rng=rng_main)

    seeded = seed_cost_learners(prob, cfg, rng_obs)
    archive = {0: list(seeded), 1: list(seeded)}

    def input_grad(x, t):
        return gplearn.estimate_U_gradient(archive[active_profile(cfg.switch_steps, t)], x)

    def observe(t, x_t, _rng):
        if t % cfg.eval_period == 0:
            current = archive[active_profile(cfg.switch_steps, t)]
            for m in range(prob.n_inputs):
                z = coordinate_cost(prob, m, float(x_t[m]), t)
                z += cfg.obs_noise_sigma * rng_obs.standard_normal()
                current[m] = current[m].add_observation(float(x_t[m]), z, max_obs=cfg.gp_max_obs)

    return algorithm.run(
        prob, acfg, x0=x0, n_steps=cfg.horizon,
        input_grad=input_grad, after_step=observe, rng=rng_main,
    )


@dataclass
class ExperimentResult:
    """Ensemble statistics of the suite, keyed by ``(p, mode)``.

    ``mean_d`` and ``std_d`` hold curves over ``t = 1 .. horizon``;
    ``per_experiment`` holds the raw per-run distance curves.
    """

    p_values: tuple
    modes: tuple
    horizon: int
    n_experiments: int
    mean_d: dict = field(default_factory=dict)
    std_d: dict = field(default_factory=dict)
    per_experiment: dict = field(default_factory=dict)

    def plateau(self, p: float, mode: str, window: int = 500) -> float:
        """Mean tracking error over the last ``window`` steps."""
        return float(self.mean_d[(p, mode)][-window:].mean())

    def to_csv(self, path) -> None:
        """Rows ``p, mode, t, mean_d, std_d`` in config order, t ascending."""
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["p", "mode", "t", "mean_d", "std_d"])
            for p in self.p_values:
                for mode in self.modes:
                    mean = self.mean_d[(p, mode)]
                    std = self.std_d[(p, mode)]
                    for i in range(self.horizon):
                        writer.writerow(
                            [
                                format(float(p), ".15g"),
                                mode,
                                i + 1,
                                format(float(mean[i]), ".15g"),
                                format(float(std[i]), ".15g"),
                            ]
                        )


def _experiment_worker(args):
    prob, cfg, p, mode, exp_index = args
    traj = run_experiment(prob, cfg, p, mode, exp_index)
    return traj


def run_suite(cfg: ScenarioConfig, prob=None, n_jobs: int = 1, trajectory_sink=None) -> ExperimentResult:
    """All ``(p, mode, experiment)`` runs of the study.

    ``trajectory_sink(p, mode, exp_index, trajectory)`` is invoked for every
    finished run in a fixed order, so file outputs are deterministic for
    any ``n_jobs``.
    """
    if prob is None:
        prob = build_scenario(cfg)
    prob.optimal_points()  # fill the oracle cache before any pickling
    tasks = [
        (p, mode, e)
        for p in cfg.p_values
        for mode in cfg.modes
        for e in range(cfg.n_experiments)
    ]
    if n_jobs <= 1:
        trajectories = [run_experiment(prob, cfg, p, mode, e) for (p, mode, e) in tasks]
    else:
        args = [(prob, cfg, p, mode, e) for (p, mode, e) in tasks]
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            trajectories = list(pool.map(_experiment_worker, args, chunksize=1))

    result = ExperimentResult(
        p_values=tuple(cfg.p_values), modes=tuple(cfg.modes),
        horizon=cfg.horizon, n_experiments=cfg.n_experiments,
    )
    for p in cfg.p_values:
        for mode in cfg.modes:
            rows = np.stack(
                [
                    trajectories[tasks.index((p, mode, e))].d[1:]
                    for e in range(cfg.n_experiments)
                ]
            )
            result.per_experiment[(p, mode)] = rows
            result.mean_d[(p, mode)] = rows.mean(axis=0)
            ddof = 1 if cfg.n_experiments > 1 else 0
            result.std_d[(p, mode)] = rows.std(axis=0, ddof=ddof)
    if trajectory_sink is not None:
        for (p, mode, e), traj in zip(tasks, trajectories):
            trajectory_sink(p, mode, e, traj)
    return result


def scaled_down(cfg: ScenarioConfig, horizon: int = 1440, n_experiments: int = 3) -> ScenarioConfig:
    """A shorter variant of a config with proportionally placed switches
    (useful for smoke runs; the full study stays the default)."""
    factor = horizon / cfg.horizon
    switches = tuple(max(1, int(round(s * factor))) for s in cfg.switch_steps)
    return replace(
        cfg,
        horizon=horizon,
        n_experiments=n_experiments,
        switch_steps=switches,
        ref_period=max(2, int(round(cfg.ref_period * factor))),
        dist_period=max(2, int(round(cfg.dist_period * factor))),
        box_period=max(2, int(round(cfg.box_period * factor))),
        eval_period=max(1, int(round(cfg.eval_period * factor))),
    )
