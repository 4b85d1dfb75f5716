import json
from dataclasses import replace

import numpy as np
import pytest

from endef import augmentation as aug
from endef.corpus import Corpus, SplitResult
from endef.experiments import (
    default_detector_spec,
    default_entity_spec,
    default_train_config,
    flipped_bias_spec,
    run_entity_only_probe,
    split_for,
    unbiased_spec,
)
from endef.framework import make_endef_model
from endef.models import BAG_OF_EMBEDDINGS, CONV_NGRAM, EncoderSpec, ScalarModel
from endef.synthetic import BiasSpec, generate
from endef.training import (
    AugmentSettings,
    TrainConfig,
    TrainingError,
    evaluate_model,
    grid_search_alpha,
    train,
    train_baseline,
    truncate_piece,
)
from endef.vocab import build_vocabulary

from conftest import make_piece


def tiny_setup(seed=0, det_kind=BAG_OF_EMBEDDINGS, n_train=120):
    spec = BiasSpec(
        n_entities=8,
        vocab_size=60,
        n_train=n_train,
        n_val=40,
        n_test=40,
        train_corr=(0.05, 0.95) * 4,
        test_corr=(0.7, 0.3) * 4,
        content_signal_strength=0.3,
        min_tokens=8,
        max_tokens=14,
        seed=11,
    )
    corpus, _ = generate(spec)
    split = split_for(spec, corpus, seed=11)
    vocab = build_vocabulary(split.train, 2)
    det_spec = EncoderSpec(det_kind, embed_dim=8, hidden_dim=12, window_sizes=(1, 2), n_filters=3)
    ent_spec = EncoderSpec(BAG_OF_EMBEDDINGS, embed_dim=6, hidden_dim=8)
    cfg = TrainConfig(lr=5e-3, batch_size=32, max_epochs=3, patience=2, seed=seed)
    return split, vocab, det_spec, ent_spec, cfg


def test_config_validation():
    with pytest.raises(TrainingError):
        TrainConfig(lr=0.0)
    with pytest.raises(TrainingError):
        TrainConfig(batch_size=0)
    with pytest.raises(TrainingError):
        TrainConfig(patience=0)
    with pytest.raises(TrainingError):
        AugmentSettings(probability=1.2)
    with pytest.raises(TrainingError):
        AugmentSettings(kinds=("nope",))


def test_config_dict_round_trip():
    cfg = TrainConfig(lr=1e-3, augment=AugmentSettings(probability=0.2, kinds=("word_level",)))
    assert TrainConfig.from_dict(cfg.to_dict()) == cfg


def test_truncate_piece_relocates_entities():
    piece = make_piece("a", ("e1", "x", "y", "e2"), ("e1", "e2"))
    cut = truncate_piece(piece, 2)
    assert cut.tokens == ("e1", "x")
    assert cut.entities == ("e1",)
    assert truncate_piece(piece, 10) is piece


def test_empty_split_part_rejected():
    split, vocab, det_spec, ent_spec, cfg = tiny_setup()
    empty = SplitResult(split.train, Corpus((), name="empty"), split.test)
    model = ScalarModel(det_spec, vocab, seed=0)
    with pytest.raises(TrainingError, match="validation part is empty"):
        train_baseline(model, empty, cfg)


def test_early_stop_fires_after_patience_without_improvement():
    # a vanishing learning rate freezes the model, so epoch 1 sets the best
    # metric and epoch 2 cannot improve: with patience=1 the loop stops at 2
    split, vocab, det_spec, ent_spec, cfg = tiny_setup()
    cfg = replace(cfg, lr=1e-12, patience=1, max_epochs=10)
    model = ScalarModel(det_spec, vocab, seed=0)
    result = train_baseline(model, split, cfg)
    assert len(result.history) == 2
    assert result.best_epoch == 1


def test_training_is_deterministic():
    split, vocab, det_spec, ent_spec, cfg = tiny_setup()

    def run():
        model = make_endef_model(det_spec, ent_spec, vocab, seed=3)
        return train(model, split, replace(cfg, seed=3))

    a, b = run(), run()
    assert a.history == b.history
    assert np.array_equal(a.model.detector.params, b.model.detector.params)
    assert np.array_equal(a.model.entity_model.params, b.model.entity_model.params)


def test_alpha_one_beta_zero_matches_baseline_bit_for_bit():
    split, vocab, det_spec, ent_spec, cfg = tiny_setup()
    seed = 5
    cfg = replace(cfg, seed=seed, max_epochs=4)

    baseline = ScalarModel(det_spec, vocab, seed=seed)
    base_result = train_baseline(baseline, split, cfg)

    fused = make_endef_model(det_spec, ent_spec, vocab, seed=seed, alpha=1.0, beta=0.0)
    fused_result = train(fused, split, cfg)

    assert np.array_equal(fused.detector.params, baseline.params)
    assert fused_result.history == base_result.history
    assert fused_result.best_epoch == base_result.best_epoch


def test_validation_and_test_never_augmented(monkeypatch):
    split, vocab, det_spec, ent_spec, cfg = tiny_setup()
    train_ids = set(split.train.ids())
    seen = []
    real_augment = aug.augment

    def spy(piece, policy, rng):
        seen.append(piece.id)
        return real_augment(piece, policy, rng)

    monkeypatch.setattr(aug, "augment", spy)
    model = make_endef_model(det_spec, ent_spec, vocab, seed=0)
    result = train(model, split, replace(cfg, augment=AugmentSettings(probability=0.5)))
    evaluate_model(result.model, split.test, cfg.max_len)
    assert seen, "augmentation never ran on the train part"
    assert set(seen) <= train_ids


def test_augment_disabled_consumes_no_randomness():
    split, vocab, det_spec, ent_spec, cfg = tiny_setup()
    cfg = replace(cfg, augment=AugmentSettings(enabled=False))
    model = ScalarModel(det_spec, vocab, seed=1)
    result = train_baseline(model, split, cfg)
    assert len(result.history) >= 1


def test_vocabulary_from_train_split_only():
    split, *_ = tiny_setup()
    vocab = build_vocabulary(split.train, min_freq=2)
    val_only = set(t for p in split.validation for t in p.tokens) - set(
        t for p in split.train for t in p.tokens
    )
    for token in list(val_only)[:5]:
        assert token not in vocab


def test_early_stopping_returns_best_checkpoint_not_last():
    split, vocab, det_spec, ent_spec, cfg = tiny_setup()
    cfg = replace(cfg, max_epochs=8, patience=8, lr=2e-2)
    model = make_endef_model(det_spec, ent_spec, vocab, seed=2)
    result = train(model, split, cfg)
    best_recorded = max(h["val_macf1"] for h in result.history)
    assert result.best_val_macf1 == best_recorded
    rescored = evaluate_model(result.model, split.validation, cfg.max_len)
    assert rescored.macf1 == pytest.approx(best_recorded, abs=1e-12)


def test_both_encoder_kinds_train():
    for kind in (BAG_OF_EMBEDDINGS, CONV_NGRAM):
        split, vocab, det_spec, ent_spec, cfg = tiny_setup(det_kind=kind)
        model = make_endef_model(det_spec, ent_spec, vocab, seed=1)
        result = train(model, split, cfg)
        report = evaluate_model(result.model, split.test, cfg.max_len)
        assert 0.0 <= report.macf1 <= 1.0
        assert len(result.history) >= 1


def test_baseline_sanity_floor_on_unbiased_corpus():
    spec = unbiased_spec(seed=7, n_train=800, n_val=160, n_test=160)
    corpus, _ = generate(spec)
    split = split_for(spec, corpus, seed=spec.seed)
    vocab = build_vocabulary(split.train, 2)
    cfg = default_train_config(seed=0)
    model = ScalarModel(default_detector_spec(), vocab, seed=0)
    train_baseline(model, split, cfg)
    report = evaluate_model(model, split.test, cfg.max_len)
    assert report.macf1 > 0.8


def test_baseline_underperforms_its_unbiased_self_on_flipped_corpus():
    cfg = default_train_config(seed=0)
    det_spec = default_detector_spec()

    def run(spec):
        corpus, _ = generate(spec)
        split = split_for(spec, corpus, seed=spec.seed)
        vocab = build_vocabulary(split.train, 2)
        model = ScalarModel(det_spec, vocab, seed=0)
        train_baseline(model, split, cfg)
        return evaluate_model(model, split.test, cfg.max_len)

    unbiased = run(unbiased_spec(seed=7, n_train=800, n_val=160, n_test=160))
    flipped = run(flipped_bias_spec(seed=7, n_train=800, n_val=160, n_test=160))
    assert flipped.macf1 < unbiased.macf1


def test_entity_only_classifier_saturates_on_perfect_correlation():
    spec = replace(
        flipped_bias_spec(seed=5, n_train=400, n_val=80, n_test=80),
        train_corr=(0.0, 1.0) * 6,
    )
    probe = run_entity_only_probe(spec, default_entity_spec(), default_train_config(), seed=0)
    assert probe["train_acc"] >= 0.99


def test_grid_search_alpha_table_and_tie_breaking():
    split, vocab, det_spec, ent_spec, cfg = tiny_setup()
    # frozen parameters make every alpha tie, so the largest must win
    frozen = replace(cfg, lr=1e-12, max_epochs=1)
    best_alpha, rows = grid_search_alpha(split, frozen, det_spec, ent_spec)
    assert len(rows) == 11
    assert [r["alpha"] for r in rows] == [i / 10 for i in range(11)]
    assert best_alpha == 1.0
    again_alpha, again_rows = grid_search_alpha(split, frozen, det_spec, ent_spec)
    assert again_alpha == best_alpha and again_rows == rows


def test_history_rows_are_json_serializable():
    split, vocab, det_spec, ent_spec, cfg = tiny_setup()
    model = make_endef_model(det_spec, ent_spec, vocab, seed=0)
    result = train(model, split, cfg)
    for row in result.history:
        encoded = json.loads(json.dumps(row))
        assert set(encoded) == {"epoch", "train_loss", "val_macf1", "improved"}
