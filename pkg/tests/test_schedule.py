import numpy as np
import pytest

from pada.schedule import (
    ConfigError,
    PruneSchedule,
    ScheduleError,
    preset_schedule,
    read_log_jsonl,
    run_dft,
    run_pada,
    validate,
    write_log_jsonl,
)
from pada.strategies import StrategySpec
from pada.trainer import LabeledBatch, ModelArch, TrainConfig, init_model

ARCH = ModelArch(input_dim=5, hidden=(8,), num_classes=3, activation="tanh")


def toy_labeled(n=40, seed=0):
    rng = np.random.default_rng(seed)
    means = rng.normal(0, 2.0, size=(3, 5))
    y = rng.integers(0, 3, size=n)
    return LabeledBatch(means[y] + rng.normal(0, 0.5, size=(n, 5)), y)


def tcfg(seed=0, lr=0.05, batch=8, updates=0):
    return TrainConfig(lr=lr, batch=batch, updates=updates, seed=seed, loss="cross_entropy")


def test_validate_accepts_paper_presets():
    validate(PruneSchedule("dynamic_iterative", (40, 20, 10), 10000, 1000))
    validate(PruneSchedule("iterative", (30, 30, 30), 10000, 1000))
    validate(PruneSchedule("once", (40,), 10000, 1000))
    validate(PruneSchedule("dynamic_iterative", (30, 25, 20, 10), 9000, 1000))  # BASE preset


def test_validate_rejections_have_distinct_messages():
    with pytest.raises(ScheduleError, match="strictly decreasing"):
        validate(PruneSchedule("dynamic_iterative", (30, 30, 10), 100, 10))
    with pytest.raises(ScheduleError, match="equal"):
        validate(PruneSchedule("iterative", (30, 25, 20), 100, 10))
    with pytest.raises(ScheduleError, match="exactly one"):
        validate(PruneSchedule("once", (40, 20), 100, 10))
    with pytest.raises(ScheduleError, match="at least one"):
        validate(PruneSchedule("iterative", (), 100, 10))
    with pytest.raises(ScheduleError, match="frequency"):
        validate(PruneSchedule("sometimes", (40,), 100, 10))
    with pytest.raises(ScheduleError, match=r"outside \[0, 100\]"):
        validate(PruneSchedule("once", (140,), 100, 10))
    with pytest.raises(ScheduleError, match="total_updates"):
        validate(PruneSchedule("once", (40,), 0, 10))
    with pytest.raises(ScheduleError, match="interval must be positive"):
        validate(PruneSchedule("iterative", (30, 30), 100, 0))
    with pytest.raises(ScheduleError, match="exceed"):
        validate(PruneSchedule("iterative", (30, 30), 100, 200))


def test_preset_schedules():
    s = preset_schedule("large", "dynamic_iterative", 10000, 1000)
    assert s.rates == (40.0, 20.0, 10.0)
    s = preset_schedule("base", "dynamic_iterative", 9000, 1000)
    assert s.rates == (30.0, 25.0, 20.0, 10.0)
    s = preset_schedule("large", "once", 27000, 2400)
    assert s.rates == (40.0,)
    with pytest.raises(ScheduleError):
        preset_schedule("huge", "once", 100, 10)


def test_event_timing_dynamic():
    pre = init_model(ARCH, 0)
    data = toy_labeled(seed=1)
    sched = PruneSchedule("dynamic_iterative", (40, 20, 10), 50, 10)
    _, log = run_pada(pre, StrategySpec("TAG", 40.0), sched, data, tcfg(seed=2))
    assert [e.update for e in log.events] == [0, 10, 20]
    assert [e.rate for e in log.events] == [40.0, 20.0, 10.0]
    assert log.final["total_updates"] == 50


def test_event_timing_iterative_guard():
    # third rate unapplied: next candidate point 2000 exceeds N=1500
    pre = init_model(ARCH, 3)
    data = toy_labeled(seed=4)
    sched = PruneSchedule("iterative", (30, 30, 30), 1500, 1000)
    _, log = run_pada(pre, StrategySpec("TAG", 30.0), sched, data, tcfg(seed=5))
    assert [e.update for e in log.events] == [0, 1000]


def test_event_exactly_at_n_is_executed():
    pre = init_model(ARCH, 6)
    data = toy_labeled(seed=7)
    sched = PruneSchedule("iterative", (30, 30, 30), 20, 10)
    _, log = run_pada(pre, StrategySpec("TAG", 30.0), sched, data, tcfg(seed=8))
    assert [e.update for e in log.events] == [0, 10, 20]


def test_once_single_event():
    pre = init_model(ARCH, 9)
    data = toy_labeled(seed=10)
    sched = PruneSchedule("once", (40,), 30, 10)
    _, log = run_pada(pre, StrategySpec("TAG", 40.0), sched, data, tcfg(seed=11))
    assert [e.update for e in log.events] == [0]


def test_event_count_bound_property():
    pre = init_model(ARCH, 12)
    data = toy_labeled(seed=13)
    rng = np.random.default_rng(14)
    for _ in range(25):
        n_total = int(rng.integers(1, 60))
        interval = int(rng.integers(1, n_total + 1))
        k = int(rng.integers(1, 6))
        rates = tuple(np.linspace(50, 5, k))  # strictly decreasing
        freq = "dynamic_iterative" if k > 1 else "once"
        sched = PruneSchedule(freq, rates, n_total, interval)
        _, log = run_pada(pre, StrategySpec("TAG", rates[0]), sched, data, tcfg(seed=15))
        expected = min(k, n_total // interval + 1) if freq != "once" else 1
        assert len(log.events) == expected
        assert [e.update for e in log.events] == [i * interval for i in range(len(log.events))] or freq == "once"


def test_rate_zero_collapses_to_dft():
    pre = init_model(ARCH, 16)
    data = toy_labeled(seed=17)
    cfg = tcfg(seed=18, updates=40)
    sched = PruneSchedule("iterative", (0, 0, 0), 40, 10)
    adapted, log = run_pada(pre, StrategySpec("TAG", 0.0), sched, data, cfg)
    baseline, _ = run_dft(pre, data, cfg)
    assert adapted.tensors == baseline.tensors  # bit-identical weights
    assert all(e.rate == 0.0 for e in log.events)


def test_once_rate_zero_equals_dft():
    pre = init_model(ARCH, 19)
    data = toy_labeled(seed=20)
    cfg = tcfg(seed=21, updates=35)
    sched = PruneSchedule("once", (0,), 35, 5)
    adapted, _ = run_pada(pre, StrategySpec("TAG", 0.0), sched, data, cfg)
    baseline, _ = run_dft(pre, data, cfg)
    assert adapted.tensors == baseline.tensors


def test_no_persistent_mask_regrowth():
    pre = init_model(ARCH, 22)
    data = toy_labeled(seed=23)
    sched = PruneSchedule("once", (40,), 200, 10)
    adapted, log = run_pada(pre, StrategySpec("TAG", 40.0), sched, data, tcfg(seed=24))
    assert log.final["final_sparsity"] < log.events[0].sparsity_after


def test_reproducible_bit_identical():
    pre = init_model(ARCH, 25)
    data = toy_labeled(seed=26)
    sched = PruneSchedule("dynamic_iterative", (40, 20, 10), 60, 20)
    spec = StrategySpec("TAG", 40.0)
    a, _ = run_pada(pre, spec, sched, data, tcfg(seed=27))
    b, _ = run_pada(pre, spec, sched, data, tcfg(seed=27))
    assert a == b
    assert a.role == "adapted"


def test_rate_mismatch_is_config_error():
    pre = init_model(ARCH, 28)
    data = toy_labeled(seed=29)
    sched = PruneSchedule("once", (40,), 10, 5)
    with pytest.raises(ConfigError, match="r1"):
        run_pada(pre, StrategySpec("TAG", 30.0), sched, data, tcfg(seed=30))


def test_invalid_schedule_rejected_by_run():
    pre = init_model(ARCH, 31)
    data = toy_labeled(seed=32)
    sched = PruneSchedule("dynamic_iterative", (10, 20), 10, 5)
    with pytest.raises(ScheduleError):
        run_pada(pre, StrategySpec("TAG", 10.0), sched, data, tcfg(seed=33))


def test_divergence_carries_global_step():
    # one poisoned row makes the loss NaN on the first batch that samples it;
    # the reported step must be the GLOBAL update index across prune chunks
    from pada.trainer import TrainingDivergedError

    pre = init_model(ARCH, 34)
    data = toy_labeled(n=40, seed=35)
    x = data.x.copy()
    x[17] = np.nan
    data = LabeledBatch(x, data.y)
    cfg = tcfg(seed=0, batch=8)
    # independent replay of the documented sampling contract:
    # one rng.integers(0, n, batch) call per update
    rng = np.random.default_rng(cfg.seed)
    expected = next(
        step for step in range(400) if 17 in rng.integers(0, data.n, size=cfg.batch)
    )
    sched = PruneSchedule("iterative", (10, 10, 10), 400, 2)
    assert expected >= sched.interval  # fails in a later chunk, not the first
    with pytest.raises(TrainingDivergedError) as info:
        run_pada(pre, StrategySpec("TAG", 10.0), sched, data, cfg)
    assert info.value.step == expected


def test_run_dft_no_events_and_deterministic():
    pre = init_model(ARCH, 37)
    data = toy_labeled(seed=38)
    eval_data = toy_labeled(seed=39)
    cfg = tcfg(seed=40, updates=50)
    model1, log1 = run_dft(pre, data, cfg, eval_data=eval_data)
    model2, log2 = run_dft(pre, data, cfg, eval_data=eval_data)
    assert log1.events == []
    assert model1 == model2
    assert log1.final["error_rate"] == log2.final["error_rate"]
    assert log1.final["strategy"] == "DFT"
    assert model1.role == "finetuned_target"


def test_log_jsonl_roundtrip(tmp_path):
    pre = init_model(ARCH, 41)
    data = toy_labeled(seed=42)
    eval_data = toy_labeled(seed=43)
    sched = PruneSchedule("dynamic_iterative", (40, 20, 10), 30, 10)
    _, log = run_pada(
        pre, StrategySpec("TAG", 40.0), sched, data, tcfg(seed=44), eval_data=eval_data
    )
    path = str(tmp_path / "log.jsonl")
    write_log_jsonl(log, path)
    back = read_log_jsonl(path)
    assert back.events == log.events
    assert back.final == log.final
    # events sorted, first at update 0
    updates = [e.update for e in back.events]
    assert updates == sorted(updates)
    assert updates[0] == 0
    assert "error_rate" in back.final


def test_taw_strategy_inside_run():
    pre = init_model(ARCH, 45)
    data = toy_labeled(seed=46)
    cfg = tcfg(seed=47, updates=30)
    sched = PruneSchedule("once", (40,), 30, 10)
    spec = StrategySpec("TAW", 40.0, taw_cfg=tcfg(seed=48, updates=20))
    a, _ = run_pada(pre, spec, sched, data, cfg)
    b, _ = run_pada(pre, spec, sched, data, cfg)
    assert a == b
