import math

import pytest

semmec = pytest.importorskip("semmec", reason="install with: pip install --no-build-isolation -e .")

SMALL = {"env": {"n_ues": 2, "queue_len": 4}, "ppo": {"episodes": 3}, "d3qn": {"episodes": 2}}


def test_local_policy_scores_half():
    m = semmec.evaluate_local(runs=20)
    assert abs(m["qoe"]["mean"] - 0.5) < 1e-9
    assert m["offload_fraction"] == 0.0


def test_env_round():
    env = semmec.Env(SMALL, seed=3)
    obs = env.reset()
    assert len(obs) == 2 and len(obs[0]["gains"]) == env.k_channels
    steps = 0
    while not env.done:
        r = env.step([{"offload": False, "f_hz": 1.6e9}, {"offload": True, "channel": 1, "p_w": 0.05, "mu": 0.5}])
        assert len(r["rewards"]) == 2
        assert math.isclose(r["outcomes"][0]["qoe"], 0.5, abs_tol=1e-12)
        steps += 1
    assert steps == 4


def test_config_errors_carry_the_path():
    with pytest.raises(ValueError, match="env.n_uess"):
        semmec.normalize_config({"env": {"n_uess": 3}})
    cfg = semmec.normalize_config({"env": {"noise_mw": 4}})
    assert cfg["env"]["noise_mw"] == pytest.approx(4)


def test_train_and_evaluate_are_deterministic():
    ckpt, log = semmec.train("mappo", SMALL, seed=5)
    assert len(log) == 3
    again, _ = semmec.train("mappo", SMALL, seed=5)
    assert ckpt == again
    a = semmec.evaluate_checkpoint(ckpt, runs=10)
    b = semmec.evaluate_checkpoint(again, runs=10)
    assert a["qoe"]["mean"] == b["qoe"]["mean"]


def test_oracle_beats_local():
    inst = semmec.freeze_instance({"env": {"n_ues": 2}}, seed=4)
    best = semmec.oracle(inst)
    assert best["total_qoe"] >= 1.0 - 1e-12
    assert len(best["actions"]) == 2


def test_mann_kendall():
    assert semmec.mann_kendall([5, 4, 3, 2, 1])["s"] == -10
