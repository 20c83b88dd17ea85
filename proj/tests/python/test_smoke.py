import math

import pytest

import wapiti as w

VOCAB = 32
KEY = 0xC0FFEE


@pytest.fixture(scope="module")
def lab():
    src = w.synth_source(VOCAB, 1, seed=11, spread=1.0)
    corpus = w.synth_corpus(src, 60, 64, seed=12)
    base = w.train(w.make_checkpoint(VOCAB, 1), corpus,
                   w.TrainConfig(steps=500, batch_size=32, learning_rate=0.5,
                                 seed=13))
    # metadata is exposed by value, so mutate through reassignment
    base.metadata = {"model_id": "base"}
    kgw = w.WatermarkConfig(scheme="kgw", k=1, gamma=0.25, delta=4.0, key=KEY)
    distilled = w.distill(base, kgw, base, 40, 32,
                          w.TrainConfig(steps=400, batch_size=32,
                                        learning_rate=0.5, seed=14))
    delta = w.extract_delta(base, distilled)
    src2 = w.synth_source(VOCAB, 1, seed=21, spread=1.0)
    finetuned = w.train(base, w.synth_corpus(src2, 60, 64, seed=22),
                        w.TrainConfig(steps=200, batch_size=32,
                                      learning_rate=0.5, seed=23))
    return {"src": src, "corpus": corpus, "base": base, "kgw": kgw,
            "distilled": distilled, "delta": delta, "finetuned": finetuned}


def test_prng_primitives():
    assert w.mix64(0) == w.mix64(0) != 0
    u = w.uniform_at(99, 0)
    assert 0.0 < u <= 1.0
    stream = w.uniform_stream(99, 16)
    assert len(stream) == 16
    assert stream[0] == w.uniform_at(99, 0)
    perm = w.permutation(7, 100)
    assert sorted(perm) == list(range(100))
    assert w.context_seed(KEY, 1, [3, 4]) != w.context_seed(KEY, 1, [4, 3])
    assert w.derive_seed(5, 1) != w.derive_seed(5, 2)


def test_stats():
    assert w.normal_sf(0.0) == pytest.approx(0.5)
    assert w.normal_sf(3.0) < w.normal_sf(1.0)
    assert w.binomial_sf(0, 10, 0.25) == pytest.approx(1.0)
    assert w.gamma_q(1.0, 0.0) == pytest.approx(1.0)
    assert w.auroc([3.0, 4.0], [1.0, 2.0]) == 1.0
    assert w.spearman([1, 2, 3, 4], [10, 20, 30, 40]) == pytest.approx(1.0)
    assert w.median([3.0, 1.0, 2.0]) == 2.0
    grid = [(i + 0.5) / 50 for i in range(50)]
    assert w.ks_uniformity(grid) < 0.05
    assert 0.03 < w.ks_critical(1000, 0.005) < 0.08


def test_kgw_pipeline(lab):
    wm_p, nat_p, wm_s, nat_s = [], [], [], []
    for i in range(30):
        rec = w.generate_watermarked(lab["base"], lab["kgw"], [], 100, 1.0,
                                     w.derive_seed(1000, i))
        r = w.detect(rec.completion, lab["kgw"], VOCAB)
        wm_p.append(r.p_value)
        wm_s.append(r.statistic)
        nat = w.sample(lab["base"], [], 100, 1.0, w.derive_seed(2000, i))
        r = w.detect(nat.completion, lab["kgw"], VOCAB)
        nat_p.append(r.p_value)
        nat_s.append(r.statistic)
    assert w.median(wm_p) < 1e-8
    assert w.median(nat_p) > 1e-4
    assert w.auroc(wm_s, nat_s) >= 0.95


def test_aar_deterministic_and_detectable(lab):
    aar = w.WatermarkConfig(scheme="aar", k=2, key=KEY)
    ps = []
    for i in range(30):
        rec = w.generate_watermarked(lab["base"], aar, [], 100, 1.0,
                                     w.derive_seed(3000, i))
        rec2 = w.generate_watermarked(lab["base"], aar, [], 100, 1.0,
                                      w.derive_seed(3000, i))
        assert rec.completion == rec2.completion
        ps.append(w.detect(rec.completion, aar, VOCAB).p_value)
    assert w.median(ps) < 1e-8


def test_distill_and_transfer(lab):
    base, distilled, delta = lab["base"], lab["distilled"], lab["delta"]
    green, scored = 0, 0
    for i in range(30):
        rec = w.sample(distilled, [], 100, 1.0, w.derive_seed(4000, i))
        r = w.detect(rec.completion, lab["kgw"], VOCAB)
        green += r.green_fraction * r.scored_tokens
        scored += r.scored_tokens
    assert green / scored > lab["kgw"].gamma + 0.05

    ident = w.integrate(base, delta, 0.0)
    assert ident.checkpoint.logits == base.logits
    merged = w.integrate(base, delta, 1.0)
    assert merged.checkpoint.logits == distilled.logits
    assert merged.delta_norm > 0

    report = w.orthogonality_report(base, distilled, lab["finetuned"])
    assert -1.0 <= report.cosine <= 1.0
    assert report.watermark_delta_norm > 0
    assert report.finetune_delta_norm > 0

    with pytest.raises(ValueError):
        w.orthogonality_report(base, distilled, base)


def test_lambda_sweep(lab):
    rows = w.lambda_sweep(lab["base"], lab["delta"], [0.0, 1.0], lab["kgw"],
                          lab["src"], w.EvalBudget(n_texts=8, text_len=40,
                                                   seed=15))
    assert [r.lambda_ for r in rows] == [0.0, 1.0]
    assert rows[1].median_p < rows[0].median_p
    assert all(math.isfinite(r.perplexity) for r in rows)


def test_edit_attack(lab):
    before, after = [], []
    for i in range(20):
        rec = w.generate_watermarked(lab["base"], lab["kgw"], [], 100, 1.0,
                                     w.derive_seed(5000, i))
        edited = w.text_edit_attack(rec.completion, 0.5, w.derive_seed(6000, i),
                                    VOCAB)
        assert len(edited) == len(rec.completion)
        changed = sum(a != b for a, b in zip(edited, rec.completion))
        assert changed <= 0.5 * len(edited)
        before.append(w.detect(rec.completion, lab["kgw"], VOCAB).p_value)
        after.append(w.detect(edited, lab["kgw"], VOCAB).p_value)
    assert w.median(after) > w.median(before)


def test_persistence_roundtrip(lab, tmp_path):
    ckpt_path = str(tmp_path / "m.ckpt")
    w.save_checkpoint(ckpt_path, lab["base"])
    loaded = w.load_checkpoint(ckpt_path)
    assert loaded.logits == lab["base"].logits
    assert loaded.metadata["model_id"] == "base"

    delta_path = str(tmp_path / "m.delta")
    w.save_delta(delta_path, lab["delta"])
    assert w.load_delta(delta_path).values == lab["delta"].values

    corpus_path = str(tmp_path / "c.txt")
    w.save_corpus(corpus_path, lab["corpus"])
    assert w.load_corpus(corpus_path, VOCAB) == lab["corpus"]

    rec = w.generate_watermarked(lab["base"], lab["kgw"], [1, 2], 20, 1.0, 77)
    rec_path = str(tmp_path / "r.jsonl")
    w.save_records(rec_path, [rec], "feedc0de")
    back = w.load_records(rec_path)
    assert len(back) == 1
    assert back[0].prompt == [1, 2]
    assert back[0].completion == rec.completion
    assert back[0].watermark.key == KEY


def test_validation_errors(lab, tmp_path):
    with pytest.raises(ValueError):
        w.detect([1], lab["kgw"], VOCAB)
    with pytest.raises(ValueError):
        w.load_checkpoint(str(tmp_path / "missing.ckpt"))
    with pytest.raises(ValueError):
        w.WatermarkConfig(scheme="kgw", gamma=0.0).validate(VOCAB)
    with pytest.raises(ValueError):
        w.WatermarkConfig(scheme="nope")


def test_training_improves_fit(lab):
    untrained = w.make_checkpoint(VOCAB, 1)
    assert w.perplexity(lab["base"], lab["corpus"]) < \
        w.perplexity(untrained, lab["corpus"])
