"""Envelope evaluators checked against brute-force reference computations.

The production code evaluates the product-weighted sums through forward
recurrences; the references here expand the sums literally, so any indexing
slip between the two shows up immediately.
"""

import math

import numpy as np
import pytest

from feedopt import algorithm, bounds, subweibull
from feedopt.bounds import BoundInputs


def make_inputs(T=12, alpha=0.4, p=0.7, delta=None, seed=0):
    rng = np.random.default_rng(seed)
    zeta_t = np.concatenate(([0.9], rng.uniform(0.55, 0.92, T)))
    phi = rng.uniform(0.0, 0.3, T)
    e_mean = rng.uniform(0.05, 0.2, T + 1)
    nu_e = rng.uniform(0.5, 2.0, T + 1)
    return BoundInputs(
        alpha=alpha, p=p, zeta_t=zeta_t, phi=phi, e_mean=e_mean, nu_e=nu_e,
        theta_eps=0.5, theta_xi=1.0, d0=3.0, delta=delta,
    )


# -- elementary pieces ---------------------------------------------------------


def test_zeta_values():
    assert bounds.zeta(0.5, 1.0, 2.0) == pytest.approx(0.5)
    assert bounds.zeta(1.0, 0.2, 1.0) == pytest.approx(0.8)
    # minimized at alpha = 2/(mu+L), symmetric around it
    assert bounds.zeta(2.0 / 3.0, 1.0, 2.0) == pytest.approx(1.0 / 3.0)
    with pytest.raises(ValueError, match="0 < mu <= L"):
        bounds.zeta(0.5, 2.0, 1.0)
    with pytest.raises(ValueError, match="step size"):
        bounds.zeta(0.0, 1.0, 2.0)


def test_binomial_moment_frozen_and_exact_at_p1():
    assert bounds.binomial_moment(0.5, 0.5, 2, 1) == pytest.approx(0.5625)
    # p = 1 collapses to zeta^t exactly
    for zeta_val in (0.3, 0.9):
        for t in (0, 3, 17):
            assert bounds.binomial_moment(zeta_val, 1.0, t, 4) == pytest.approx(
                zeta_val**t, rel=1e-12
            )
    with pytest.raises(ValueError, match="zeta"):
        bounds.binomial_moment(1.2, 0.5, 2, 1)
    with pytest.raises(ValueError, match="moment order"):
        bounds.binomial_moment(0.5, 0.5, 2, 0.5)


def test_binomial_moment_matches_direct_expectation():
    # small t: enumerate Binomial(t, p) outcomes exactly
    from scipy.stats import binom

    zeta_val, p, t, k = 0.6, 0.4, 6, 3.0
    direct = sum(
        binom.pmf(j, t, p) * zeta_val ** (k * j) for j in range(t + 1)
    ) ** (1.0 / k)
    assert bounds.binomial_moment(zeta_val, p, t, k) == pytest.approx(direct, rel=1e-12)


def test_eta_frozen_value_and_maximizer():
    assert bounds.eta(2, 0.5, 0.5, 3) == pytest.approx(0.5625)
    # the k=1 candidate is (1-p+p*zeta)^t; eta can only improve on it
    for t in (1, 10, 60):
        assert bounds.eta(t, 0.7, 0.8, 200) >= (1 - 0.7 + 0.7 * 0.8) ** t / 1.0 - 1e-15
    k_star = bounds.eta_maximizer(60, 0.7, 0.8, 200)
    assert 1 <= k_star < 200  # interior, so the grid truncation is harmless
    with pytest.raises(ValueError, match="t >= 1"):
        bounds.eta(0, 0.5, 0.5, 10)
    with pytest.raises(ValueError, match="contraction factor"):
        bounds.eta(2, 0.5, 1.0, 10)
    with pytest.raises(ValueError, match="k_max"):
        bounds.eta(2, 0.5, 0.5, 0)


# -- input container -----------------------------------------------------------


def test_bound_inputs_validation():
    ok = make_inputs()
    assert ok.horizon == 12
    np.testing.assert_allclose(ok.rho, 1 - ok.p + ok.p * ok.zeta_t)
    with pytest.raises(ValueError, match="one entry fewer"):
        BoundInputs(0.4, 0.7, ok.zeta_t, ok.phi[:-1], ok.e_mean, ok.nu_e, 0.5, 1.0, 1.0)
    with pytest.raises(ValueError, match="align"):
        BoundInputs(0.4, 0.7, ok.zeta_t, ok.phi, ok.e_mean[:-1], ok.nu_e[:-1], 0.5, 1.0, 1.0)
    bad_zeta = ok.zeta_t.copy()
    bad_zeta[3] = 1.0
    with pytest.raises(ValueError, match="contraction factors"):
        BoundInputs(0.4, 0.7, bad_zeta, ok.phi, ok.e_mean, ok.nu_e, 0.5, 1.0, 1.0)
    with pytest.raises(ValueError, match="nonnegative"):
        BoundInputs(0.4, 0.7, ok.zeta_t, -ok.phi, ok.e_mean, ok.nu_e, 0.5, 1.0, 1.0)
    with pytest.raises(ValueError, match="initial distance"):
        BoundInputs(0.4, 0.7, ok.zeta_t, ok.phi, ok.e_mean, ok.nu_e, 0.5, 1.0, -1.0)
    with pytest.raises(ValueError, match="delta"):
        BoundInputs(0.4, 0.7, ok.zeta_t, ok.phi, ok.e_mean, ok.nu_e, 0.5, 1.0, 1.0, delta=0.0)


# -- expectation envelope --------------------------------------------------------


def brute_force_expectation(inputs, T):
    rho = inputs.rho
    out = np.empty(T + 1)
    out[0] = inputs.d0
    for t in range(1, T + 1):
        trans = inputs.d0 * np.prod(rho[1 : t + 1])
        path = sum(np.prod(rho[i : t + 1]) * inputs.phi[i - 1] for i in range(1, t + 1))
        err = sum(
            np.prod(rho[i + 1 : t + 1]) * inputs.alpha * inputs.p * inputs.e_mean[i]
            for i in range(1, t + 1)
        )
        out[t] = trans + path + err
    return out


def test_expectation_bound_matches_literal_sums():
    inputs = make_inputs()
    curve = bounds.expectation_bound(inputs)
    np.testing.assert_allclose(curve.value, brute_force_expectation(inputs, 12), rtol=1e-12)
    assert curve.value[0] == inputs.d0
    np.testing.assert_allclose(
        curve.value, curve.transient + curve.path_term + curve.error_term, rtol=1e-12
    )
    assert curve.meta["kind"] == "expectation"


def test_expectation_bound_horizon_argument():
    inputs = make_inputs()
    short = bounds.expectation_bound(inputs, 5)
    full = bounds.expectation_bound(inputs)
    np.testing.assert_allclose(short.value, full.value[:6], rtol=1e-12)
    with pytest.raises(ValueError, match="horizon"):
        bounds.expectation_bound(inputs, 0)
    with pytest.raises(ValueError, match="horizon"):
        bounds.expectation_bound(inputs, 13)


def test_asymptotic_envelope_dominates_the_exact_one():
    inputs = make_inputs()
    exact = bounds.expectation_bound(inputs)
    geo = bounds.expectation_bound_asymptotic(inputs)
    assert np.all(geo.value >= exact.value - 1e-12)
    assert geo.meta["rho_sup"] == pytest.approx(float(inputs.rho[1:].max()))
    # geometric transient decays to the fixed-point level
    tail_span = geo.value[-1] - (geo.path_term[-1] + geo.error_term[-1])
    assert tail_span == pytest.approx(geo.transient[-1])


def test_expectation_bound_dominates_a_simulated_static_mean():
    # cheap end-to-end sanity: static instance, modest ensemble
    from tests_common import static_instance

    prob, cfg = static_instance()
    inputs = bounds.bound_inputs_from_problem(prob, cfg, n_steps=80, seed=1)
    curve = bounds.expectation_bound(inputs, 80)
    d = np.stack(
        [
            algorithm.run(
                prob, cfg, n_steps=80,
                rng=np.random.default_rng(np.random.SeedSequence(2, spawn_key=(i,))),
            ).d
            for i in range(60)
        ]
    )
    assert np.all(d.mean(axis=0) <= curve.value + 1e-12)


# -- high-probability envelope -----------------------------------------------------


def brute_force_hp(inputs, T):
    theta_x = max(1.0, inputs.theta_eps, inputs.theta_xi)
    pref = math.log(2.0 / inputs.delta) ** theta_x * (2 * math.e / theta_x) ** theta_x
    phi_pad = np.concatenate((inputs.phi[:T], [0.0]))
    out = np.empty(T + 1)
    out[0] = pref * inputs.d0
    for t in range(1, T + 1):
        zs = float(inputs.zeta_t[1 : t + 1].max())
        eta_t = max(
            (1 - inputs.p + inputs.p * zs**k) ** (t / k) / math.sqrt(k)
            for k in range(1, max(t, 100) + 1)
        )
        geo = (1 - zs**t) / (1 - zs)
        joint = max(
            inputs.alpha * inputs.nu_e[i] + phi_pad[i] / inputs.p for i in range(t + 1)
        )
        out[t] = pref * (inputs.d0 * eta_t + geo * joint)
    return out


def test_hp_bound_matches_literal_construction():
    inputs = make_inputs(delta=0.1)
    curve = bounds.hp_bound_trajectory(inputs)
    np.testing.assert_allclose(curve.value, brute_force_hp(inputs, 12), rtol=1e-12)
    assert curve.meta["delta"] == 0.1
    assert curve.meta["prefactor"] == pytest.approx(
        math.log(20.0) * 2 * math.e, rel=1e-12
    )


def test_hp_bound_grows_as_delta_shrinks():
    tight = bounds.hp_bound_trajectory(make_inputs(delta=0.3))
    loose = bounds.hp_bound_trajectory(make_inputs(delta=0.01))
    assert np.all(loose.value[1:] > tight.value[1:])


def test_hp_bound_needs_delta():
    with pytest.raises(ValueError, match="delta"):
        bounds.hp_bound_trajectory(make_inputs())


# -- error statistics ----------------------------------------------------------------


def test_expected_error_norm_matches_chi_mean():
    # eps gaussian, xi silent, dim 2: ||e|| is scale * chi(2)
    rng = np.random.default_rng(0)
    mean, se = bounds.expected_error_norm(
        subweibull.gaussian(0.3), subweibull.zero(), 2, 200_000, rng
    )
    assert se > 0
    assert mean == pytest.approx(0.3 * math.sqrt(math.pi / 2.0), abs=4 * se)


def test_expected_error_norm_degenerate_and_validation():
    rng = np.random.default_rng(0)
    assert bounds.expected_error_norm(
        subweibull.zero(), subweibull.zero(), 3, 10**4, rng
    ) == (0.0, 0.0)
    with pytest.raises(ValueError, match="1e4 samples"):
        bounds.expected_error_norm(subweibull.zero(), subweibull.zero(), 3, 100, rng)


def test_expected_error_norm_with_measurement_noise():
    rng = np.random.default_rng(1)
    base, _ = bounds.expected_error_norm(
        subweibull.gaussian(0.1), subweibull.zero(), 2, 50_000,
        np.random.default_rng(1),
    )
    with_noise, _ = bounds.expected_error_norm(
        subweibull.gaussian(0.1), subweibull.zero(), 2, 50_000, rng,
        noise_sampler=subweibull.gaussian(0.5), noise_map=np.ones((2, 3)),
    )
    assert with_noise > base


def test_effective_tracking_error_class():
    xi = subweibull.SubWeibull(1.0, 0.2)
    assert bounds.effective_tracking_error_class(xi) is xi
    noise = subweibull.SubWeibull(0.5, 0.1)
    grown = bounds.effective_tracking_error_class(
        xi, noise, np.array([[1.0, -2.0], [0.5, 0.5]])
    )
    # worst absolute row sum of the map is 3
    assert grown.theta == 1.0
    assert grown.nu == pytest.approx(0.2 + 0.3)
    silent = bounds.effective_tracking_error_class(xi, subweibull.SubWeibull(0.5, 0.0), None)
    assert silent is xi


# -- assembly from a problem ----------------------------------------------------------


def test_bound_inputs_from_problem_shapes_and_fields():
    from tests_common import static_instance

    prob, cfg = static_instance()
    inputs = bounds.bound_inputs_from_problem(prob, cfg, n_steps=40, delta=0.2, seed=3)
    assert inputs.horizon == 40
    assert inputs.delta == 0.2
    assert inputs.alpha == cfg.alpha and inputs.p == cfg.p
    assert inputs.phi.shape == (40,)
    assert np.all(inputs.nu_e == inputs.nu_e[0])  # stationary noise model
    assert inputs.theta_eps == 0.5
    # d0 defaults to the distance from the step-0 box midpoint
    mid = 0.5 * (prob.boxes.lower[0] + prob.boxes.upper[0])
    d0 = float(np.linalg.norm(mid - prob.optimal_points()[0]))
    assert inputs.d0 == pytest.approx(d0)
    with pytest.raises(ValueError, match="horizon"):
        bounds.bound_inputs_from_problem(prob, cfg, n_steps=10**6)


def test_bound_inputs_silent_noise_gives_zero_error_mean():
    from tests_common import static_instance

    prob, cfg = static_instance(silent=True)
    inputs = bounds.bound_inputs_from_problem(prob, cfg, n_steps=20)
    assert np.all(inputs.e_mean == 0.0)
    assert np.all(inputs.nu_e == 0.0)


def test_bound_curve_csv(tmp_path):
    curve = bounds.expectation_bound(make_inputs(), 4)
    path = tmp_path / "curve.csv"
    curve.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,bound,transient_term,path_term,error_term"
    assert len(lines) == 6
    assert float(lines[1].split(",")[1]) == pytest.approx(curve.value[0])
