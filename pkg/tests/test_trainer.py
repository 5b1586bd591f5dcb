import csv

import numpy as np
import pytest

from fsed.contrastive import ContrastiveConfig
from fsed.encoder import EncoderDims, PARAM_ORDER, init_params
from fsed.episodes import SynthSpec, synth_dataset
from fsed.errors import ValidationError
from fsed.trainer import (ABLATION_VARIANTS, AdamW, Config, ablation_config,
                          accumulate_counts, evaluate, micro_scores,
                          run_experiment, train, write_ablation_csv)

DIMS = EncoderDims(d_in=4, d_hidden=6, d_rep=4, d_proj_hidden=4, d_proj=4)


def tiny_config(**kw):
    base = dict(n_way=2, k_shot=2, m_query=1, dims=DIMS, train_iterations=5,
                eval_episodes=5, val_episodes=2, val_interval=5, runs=1,
                seed=0)
    base.update(kw)
    return Config(**base)


def tiny_data(seed, split="train"):
    return synth_dataset(SynthSpec(class_count=3, sentences_per_class=5,
                                   sentence_length=4, d_in=4,
                                   cluster_separation=4.0), seed, split=split)


def test_adamw_three_step_hand_oracle():
    # one scalar parameter, reference recurrence written out independently
    lr, b1, b2, eps, wd = 0.1, 0.9, 0.999, 1e-8, 0.01
    grads = [1.0, -2.0, 0.5]
    theta_ref = 3.0
    m = v = 0.0
    for t, g in enumerate(grads, start=1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        m_hat = m / (1 - b1 ** t)
        v_hat = v / (1 - b2 ** t)
        theta_ref -= lr * (m_hat / (np.sqrt(v_hat) + eps) + wd * theta_ref)

    opt = AdamW(lr, b1, b2, eps, wd)
    theta = {"w": np.array([3.0])}
    for g in grads:
        opt.step(theta, {"w": np.array([g])})
    assert abs(theta["w"][0] - theta_ref) < 1e-14


def test_adamw_decay_is_decoupled():
    # with zero gradient the adaptive term stays zero and only decay acts
    opt = AdamW(0.5, weight_decay=0.1)
    theta = {"w": np.array([2.0])}
    opt.step(theta, {"w": np.array([0.0])})
    assert abs(theta["w"][0] - 2.0 * (1 - 0.5 * 0.1)) < 1e-14


def test_micro_scores_hand_fixture():
    p, r, f1 = micro_scores(tp=3, fp=1, fn=2)
    assert p == 0.75
    assert r == 0.6
    assert abs(f1 - 2 * 0.75 * 0.6 / 1.35) < 1e-15
    assert micro_scores(0, 0, 0) == (0.0, 0.0, 0.0)
    assert micro_scores(0, 2, 3) == (0.0, 0.0, 0.0)


def test_accumulate_counts_fixture():
    gold = np.array([0, 1, 2, 1, 0, 2])
    pred = np.array([0, 1, 1, 0, 2, 2])
    # tp: idx1, idx5; fp: idx2 (wrong event), idx4 (event on O);
    # fn: idx2 (gold 2 missed), idx3 (gold 1 missed)
    assert accumulate_counts(pred, gold) == (2, 2, 2)


def test_zero_iterations_returns_initial_params():
    cfg = tiny_config(train_iterations=0)
    params, log = train(cfg, tiny_data(0, "train"), tiny_data(1, "valid"))
    init = init_params(cfg.seed, DIMS)
    for name in PARAM_ORDER:
        assert np.array_equal(getattr(params, name), getattr(init, name))
    assert log.iterations == []


def test_training_is_deterministic():
    cfg = tiny_config(train_iterations=8, val_interval=4)
    outs = []
    for _ in range(2):
        params, log = train(cfg, tiny_data(0, "train"), tiny_data(1, "valid"))
        outs.append((params, [r["total"] for r in log.iterations]))
    assert outs[0][1] == outs[1][1]
    for name in PARAM_ORDER:
        assert np.array_equal(getattr(outs[0][0], name),
                              getattr(outs[1][0], name))


def test_loss_decreases_on_separable_data():
    ds = synth_dataset(SynthSpec(class_count=3, sentences_per_class=8,
                                 sentence_length=4, d_in=4,
                                 cluster_separation=8.0,
                                 o_noise_scale=0.5), 7)
    cfg = tiny_config(train_iterations=60, val_interval=60,
                      contrastive=ContrastiveConfig(alpha=0.0, beta=0.0))
    _, log = train(cfg, ds, tiny_data(1, "valid"), check_disjoint=False)
    totals = [r["total"] for r in log.iterations]
    assert np.mean(totals[-10:]) < np.mean(totals[:10])


def test_train_rejects_shared_event_names():
    with pytest.raises(ValidationError, match="share event types"):
        train(tiny_config(), tiny_data(0, "train"), tiny_data(1, "train"))


def test_train_rejects_dim_mismatch():
    bad = Config(n_way=2, k_shot=2, m_query=1,
                 dims=EncoderDims(d_in=9), train_iterations=1)
    with pytest.raises(ValidationError, match="d_in"):
        train(bad, tiny_data(0, "train"), tiny_data(1, "valid"))


def test_evaluate_deterministic():
    cfg = tiny_config()
    params = init_params(3, DIMS)
    ds = tiny_data(5, "test")
    a = evaluate(params, cfg, ds)
    b = evaluate(params, cfg, ds)
    assert (a.tp, a.fp, a.fn) == (b.tp, b.fp, b.fn)
    assert (a.tp + a.fn) == cfg.eval_episodes * cfg.n_way * cfg.m_query


def test_run_experiment_aggregates_runs():
    cfg = tiny_config(runs=2, train_iterations=2, val_interval=2,
                      eval_episodes=3)
    m = run_experiment(cfg, tiny_data(0, "train"), tiny_data(1, "valid"),
                       tiny_data(2, "test"))
    assert len(m.per_run_f1) == 2
    assert m.f1_mean == pytest.approx(np.mean(m.per_run_f1))
    assert m.f1_std == pytest.approx(np.std(m.per_run_f1))


def test_ablation_configs():
    cfg = tiny_config()
    assert ablation_config(cfg, "full") is cfg
    assert ablation_config(cfg, "w/o SSCL").contrastive.alpha == 0.0
    assert ablation_config(cfg, "w/o SSCL").contrastive.beta == 0.5
    assert ablation_config(cfg, "w/o PQCL").contrastive.beta == 0.0
    hcl = ablation_config(cfg, "w/o HCL")
    assert hcl.contrastive.alpha == 0.0 and hcl.contrastive.beta == 0.0
    assert hcl.tat_enabled
    assert not ablation_config(cfg, "w/o TAT").tat_enabled
    with pytest.raises(ValidationError):
        ablation_config(cfg, "w/o everything")
    assert len(ABLATION_VARIANTS) == 5


def test_variant_names():
    cfg = tiny_config()
    assert cfg.variant_name() == "hybrid"
    assert ablation_config(cfg, "w/o TAT").variant_name() == "hybrid-no-tat"
    proto = ablation_config(ablation_config(cfg, "w/o HCL"), "w/o TAT")
    assert proto.variant_name() == "proto-baseline"


def test_config_validation():
    with pytest.raises(ValidationError):
        tiny_config(n_way=0)
    with pytest.raises(ValidationError):
        tiny_config(metric="hamming")
    with pytest.raises(ValidationError):
        tiny_config(train_iterations=-1)


def test_ablation_csv(tmp_path):
    from fsed.trainer import EvalMetrics
    results = {"full": EvalMetrics(3, 1, 1, 0.75, 0.75, 0.75,
                                   f1_mean=0.75, f1_std=0.01)}
    path = tmp_path / "ablation.csv"
    write_ablation_csv(results, path)
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    assert rows[0][0] == "variant"
    assert rows[1][0] == "full"
    assert float(rows[1][4]) == 0.75
