import json

import numpy as np
import pytest

import mheq


def small_config(**overrides):
    cfg = json.loads(mheq.default_config_json())
    cfg["steps"] = 40
    cfg["schedule"] = {"mpc_start": 10, "mhe_start": 20}
    cfg.update(overrides)
    return json.dumps(cfg)


def test_component_names_cover_the_flat_layout():
    names = mheq.component_names()
    assert len(names) == 31
    assert len(set(names)) == 31


def test_default_config_round_trips_through_json():
    cfg = json.loads(mheq.default_config_json())
    assert cfg["steps"] == 1200
    assert cfg["scenario"] == "mpc_and_mhe"
    assert cfg["schedule"] == {"mpc_start": 100, "mhe_start": 600}


def test_solve_qp_pinned_scalar():
    out = mheq.solve_qp(
        np.array([[1.0]]),
        np.array([0.0]),
        np.array([[1.0]]),
        np.array([3.0]),
        np.zeros((0, 1)),
        np.zeros(0),
    )
    assert out["status"] == "solved"
    assert out["p"] == pytest.approx([3.0], abs=1e-10)
    assert out["objective"] == pytest.approx(4.5, abs=1e-10)
    assert out["lambda"] == pytest.approx([-3.0], abs=1e-10)


def test_baseline_cost_examples():
    assert mheq.baseline_cost([-1.0, 0.0], 0.0, r=1.0) == pytest.approx(10.5)
    assert mheq.baseline_cost([5.0, 0.0], 0.5, r=1.0) == pytest.approx(12.625)
    assert mheq.td_error(10.5, 3.0, 5.0, 0.9) == pytest.approx(8.2)


def test_project_psd_clips_the_negative_eigenvalue():
    out = mheq.project_psd(np.diag([-1.0, 2.0]))
    assert out == pytest.approx(np.diag([0.0, 2.0]), abs=1e-12)


def test_bellman_identity_at_the_greedy_action():
    cfg = mheq.default_config_json()
    for x0 in ([2.0, 0.5], [8.0, -1.5], [-0.5, 0.5]):
        v = mheq.mpc_value(cfg, x0)
        pi = mheq.mpc_policy(cfg, x0)
        q = mheq.mpc_action_value(cfg, x0, pi)
        assert abs(v - q) <= 1e-7


def test_estimate_reproduces_quiet_data():
    cfg = json.loads(mheq.default_config_json())
    h = cfg["mhe"]["horizon"]
    out = mheq.estimate(
        mheq.default_config_json(),
        np.zeros(h + 1),
        np.zeros(h),
        [0.0, 0.0],
    )
    assert out["x_hat"] == pytest.approx([0.0, 0.0], abs=1e-9)
    assert out["x"].shape == (2, h + 1)
    assert out["u"] == pytest.approx(np.zeros(h), abs=1e-9)


def test_episode_is_deterministic_and_shaped():
    cfg = small_config()
    a = mheq.run_episode(cfg)
    b = mheq.run_episode(cfg)
    assert a["x_true"].shape == (40, 4)
    assert a["theta"].shape == (40, 31)
    assert np.array_equal(a["x_true"], b["x_true"])
    assert np.array_equal(a["u"], b["u"])
    assert np.array_equal(a["theta"], b["theta"])
    assert a["updates_applied"] == b["updates_applied"]
    assert a["updates_applied"] > 0


def test_scenario_sweep_returns_grouped_means():
    out = mheq.run_scenarios(small_config(), 1)
    assert out["num_seeds"] == 1
    assert len(out["runs"]) == 3
    labels = {run["scenario"] for run in out["runs"]}
    assert labels == {"no_learning", "mpc_only", "mpc_and_mhe"}
    assert set(out["mean_tail_cost"]) == labels
