"""Smoke test for the offdyn_py extension module.

Build and install first:

    pip install -e crates/python --no-build-isolation
"""

import math
import random
import tempfile
from pathlib import Path

import offdyn_py

ROOT = Path(__file__).resolve().parents[3]
CONFIG = ROOT / "configs" / "broken_source.toml"
SHORT = ["schedule.total_steps=2000", "eval.period=500", "seeds=[0, 1]"]


def check_rewards():
    rng = random.Random(0)
    for _ in range(100):
        r = rng.uniform(-10, 10)
        d = rng.uniform(1e-6, 1 - 1e-6)
        assert abs(offdyn_py.reward_augmented(1.0, r, d) - r) < 1e-12
    assert abs(offdyn_py.dail_reward(1.0, 0.5) - math.log(2)) < 1e-15


def check_experiment():
    exp = offdyn_py.Experiment.load(str(CONFIG), SHORT)
    assert exp.seeds == [0, 1]
    assert exp.n_states == 25 and exp.n_actions == 4
    # an intact diagonal move from (1, 1) reaches (2, 2) five times as often
    # in the target as in the 80%-frozen source
    assert abs(exp.exact_ratio(6, 0, 12) - 5.0) < 1e-12
    q = exp.soft_q("trg")
    assert len(q) == 25 and len(q[0]) == 4

    darc = exp.train("darc", seed=0)
    assert darc.has_expert and darc.target_reward_reads == 0
    assert darc.metrics_csv().splitlines()[0] == offdyn_py.CSV_HEADER
    darail = exp.train("darail", seed=0, expert=darc)
    assert darail.target_reward_reads == 0
    mean, se = darail.evaluate(exp, domain="trg", episodes=50)
    assert math.isfinite(mean) and se >= 0
    oracle = exp.train("target-oracle", seed=0)
    assert oracle.method == "target-oracle"

    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "agent.json"
        darail.save_agent(str(path))
        again = offdyn_py.evaluate_checkpoint(str(path), exp, domain="trg", episodes=50)
        assert again == (mean, se)
        aggregates = exp.run(["darc", "source-only"], out=tmp)
        assert [a["method"] for a in aggregates] == ["darc", "source-only"]
        assert (Path(tmp) / "darc" / "seed_1" / "metrics.csv").exists()

    try:
        exp.with_overrides(["eta=0.5"])
    except ValueError as e:
        assert "eta" in str(e)
    else:
        raise AssertionError("eta below 1 should be rejected")
    print(darail, aggregates[0]["target_eval_mean"])


if __name__ == "__main__":
    check_rewards()
    check_experiment()
    print("smoke test passed")
