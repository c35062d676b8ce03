import math

import numpy as np
import pytest

import spde_deepsplit as sd


def test_philox_known_answer():
    assert sd.philox4x32([0, 0, 0, 0], [0, 0]) == [0x6627E8D5, 0xE169C58D, 0xBC57AC4C, 0x9B00DBD8]


def test_normals_deterministic_and_standard():
    a = np.array(sd.normals(3, 7, 20000))
    b = np.array(sd.normals(3, 7, 20000))
    assert np.array_equal(a, b)
    assert abs(a.mean()) < 0.03
    assert abs(a.var() - 1.0) < 0.05


def test_param_count_matches_formula():
    d, h = 3, 53
    expected = (d * h + h) + (h * h + h) + (h + 1) + 2 * (d + 2 * h)
    assert sd.param_count(d, hidden_dim=h) == expected


def test_forward_and_gradient_against_finite_differences():
    d = 2
    theta = np.array(sd.init_params(d, seed=1, hidden_dim=5))
    rng = np.random.default_rng(0)
    batch = rng.normal(size=(d, 6))
    w = rng.normal(size=6)
    out = np.array(sd.forward_train(theta, batch, hidden_dim=5))
    assert out.shape == (6,)
    g = np.array(sd.param_grad(theta, batch, w, hidden_dim=5))
    scale = np.abs(g).max()
    h = 1e-6
    for k in range(0, theta.size, 7):
        tp, tm = theta.copy(), theta.copy()
        tp[k] += h
        tm[k] -= h
        fd = (np.dot(sd.forward_train(tp, batch, hidden_dim=5), w) - np.dot(sd.forward_train(tm, batch, hidden_dim=5), w)) / (2 * h)
        assert abs(fd - g[k]) <= 1e-5 * max(abs(fd), abs(g[k]), 1e-3 * scale)


def test_adam_first_step_is_signed_learning_rate():
    g = np.array([0.3, -2.0, 5.0])
    theta, m, v, step = sd.adam_step(np.zeros(3), g, 0.1, np.zeros(3), np.zeros(3), 0)
    assert step == 1
    np.testing.assert_allclose(theta, -0.1 * np.sign(g), atol=1e-6)


def test_schedule_and_references():
    assert sd.lr_at("2000:1e-1,4000:1e-2,8000:1e-3", 1000) == pytest.approx(0.1)
    assert sd.lr_at("2000:1e-1,4000:1e-2,8000:1e-3", 2500) == pytest.approx(0.01)
    assert sd.reference_heat_additive(1.0, np.array([0.3]), 0.5) == pytest.approx(0.09 + 2.0 + 0.5)
    assert sd.reference_heat_mult(1.0, np.zeros(2), 0.0) == pytest.approx(4.0 * math.exp(-0.5))
    assert sd.rel_l2([0.0084, 0.0064, 0.0063, 0.0006, 0.0053]) == pytest.approx(0.0060, abs=1e-4)


def test_small_experiment_is_reproducible():
    overrides = [("problem", "heat-add"), ("iters", "50"), ("runs", "1"), ("steps", "2")]
    a = sd.run_experiment("", overrides)
    b = sd.run_experiment("", overrides)
    assert a["csv"] == b["csv"]
    assert a["problem"] == "heat-add"
    row = a["rows"][0]
    assert math.isfinite(row["result"]) and math.isfinite(row["reference"])


def test_bad_config_raises():
    with pytest.raises(Exception, match="dim"):
        sd.run_experiment("dim = abc\n")


def test_selftest_passes():
    results = sd.selftest()
    assert results
    assert all(passed for _, passed, _ in results), [r for r in results if not r[1]]
