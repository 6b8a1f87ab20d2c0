# SPDX-License-Identifier: Apache-2.0
import math

import pytest

import lidmsr


def test_cosine_probs_ignore_scale():
    theta = [[1.0, 0.0], [0.0, 2.0]]
    a = lidmsr.cosine_probs([1.0, 1.0], theta, 50.0)
    b = lidmsr.cosine_probs([5.0, 5.0], [[3.0, 0.0], [0.0, 0.1]], 50.0)
    assert a == pytest.approx([0.5, 0.5], abs=1e-12)
    assert a == pytest.approx(b, abs=1e-12)


def test_dot_scores_depend_on_scale():
    assert lidmsr.dot_scores([1.0, 1.0], [[0.6, 0.0], [0.0, 0.5]]) == pytest.approx([0.6, 0.5])


def test_loss_spot_values():
    assert lidmsr.kd_loss([0.0, 0.0], [0.0, 0.0], 2.0) == pytest.approx(math.log(2.0), abs=1e-12)
    assert lidmsr.fkd_loss([1.0, 0.0], [0.0, 1.0]) == pytest.approx(1.0, abs=1e-12)
    assert lidmsr.fkd_loss([1.0, 2.0], [-1.0, -2.0]) == pytest.approx(2.0, abs=1e-12)
    assert lidmsr.icml_loss([[1.0, 0.0]], [[0.6, 0.8]], -0.1) == pytest.approx(0.7, abs=1e-12)
    assert lidmsr.cross_entropy([0.25, 0.75], [0.0, 1.0]) == pytest.approx(-math.log(0.75))


def test_memory_quota():
    assert [lidmsr.memory_quota(200, t, 0) for t in (5, 10, 20)] == [40, 20, 10]
    assert sum(lidmsr.memory_quota(200, 3, r) for r in range(3)) == 200


def test_synthetic_generator():
    a = lidmsr.synth_generate(3, 5, seed=4)
    assert len(a) == 15
    assert a == lidmsr.synth_generate(3, 5, seed=4)
    assert {label for _, label in a} == {0, 1, 2}


def test_names():
    assert "msr" in lidmsr.strategy_names()
    assert len(lidmsr.ablation_variants()) == 8


def test_schedule_and_run():
    sched = lidmsr.schedule(seed=2)
    assert len(sched["steps"]) == 5
    report = lidmsr.run(strategy="finetune", seed=2, hyperparams={"epochs": 1})
    accs = report["acc"]
    assert len(accs) == 5
    assert report["average_acc"] == pytest.approx(sum(accs) / len(accs), abs=0.0)
    assert report["whole_acc"] == accs[-1]
    assert report["config"]["strategy"]["name"] == "finetune"


def test_errors():
    with pytest.raises(lidmsr.ConfigError):
        lidmsr.run(strategy="bogus")
    assert issubclass(lidmsr.ConfigError, ValueError)
    with pytest.raises(ValueError):
        lidmsr.fkd_loss([0.0, 0.0], [1.0, 0.0])


def test_cli_entry_point():
    code, out, _ = lidmsr.cli(["--help"])
    assert code == 0 and "prepare" in out
    code, _, err = lidmsr.cli(["run", "--strategy", "bogus"])
    assert code == 2 and "bogus" in err
