import math
import random

import pytest

import metsfuse


def test_auroc_worked_example():
    assert metsfuse.auroc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == 0.75


def test_auroc_agrees_with_trapezoid():
    rng = random.Random(0)
    for _ in range(20):
        n = rng.randint(4, 40)
        labels = [rng.randint(0, 1) for _ in range(n)]
        labels[0], labels[1] = 0, 1
        scores = [round(rng.random(), 1) for _ in range(n)]
        assert abs(metsfuse.auroc(scores, labels) - metsfuse.auroc_trapezoid(scores, labels)) < 1e-12


def test_single_class_is_a_data_error():
    with pytest.raises(metsfuse.DataError):
        metsfuse.auroc([0.1, 0.2], [1, 1])
    with pytest.raises(ValueError):
        metsfuse.auroc([0.1, 0.2], [1, 1])


def test_evaluate_fields():
    s = metsfuse.evaluate([0.9, 0.2, 0.7, 0.4], [1, 0, 0, 1])
    assert s["acc"] == 0.5
    assert s["auroc"] == 0.75


def test_contrastive_loss_branches():
    assert metsfuse.contrastive_loss([0.3, -0.2], [0.3, -0.2], 1, 1) == 0.0
    assert metsfuse.contrastive_loss([0.0, 0.0], [math.sqrt(0.3), 0.0], 0, 1, 0.5) == pytest.approx(0.2, abs=1e-15)
    assert metsfuse.contrastive_loss([0.0, 0.0], [math.sqrt(0.8), 0.0], 0, 1, 0.5) == 0.0


def test_generate_default_cohort_is_deterministic():
    a = metsfuse.generate()
    b = metsfuse.generate()
    assert a == b
    assert len(a["panels"]) == 40
    labels = metsfuse.labels_of(a["panels"])
    assert sum(labels.values()) == 8
    assert metsfuse.generate(seed=1)["records"] != a["records"]


def test_malformed_spec_is_rejected():
    with pytest.raises(metsfuse.ConfigError):
        metsfuse.generate(n_mets=-1)


def test_label_mets_counts_criteria():
    panel = {"subject_id": "S", "bmi": 30.0, "fpg": 7.0, "sbp": 150.0, "dbp": 95.0, "tg": 2.0, "hdl": 0.8,
             "sex": "male"}
    label = metsfuse.label_mets(panel)
    assert label["is_mets"] and label["count"] == 4


def test_split_keeps_subjects_whole():
    cohort = metsfuse.generate(days=6, extra_mets_days=0)
    labels = metsfuse.labels_of(cohort["panels"])
    for seed in range(5):
        plan = metsfuse.split(cohort["records"], labels, seed=seed)
        assert set(plan["subjects"]) == set(labels)
        assert set(plan["subjects"].values()) == {0, 1, 2, 3}


def test_cross_validate_small():
    cohort = metsfuse.generate(days=6, extra_mets_days=0)
    labels = metsfuse.labels_of(cohort["panels"])
    plan = metsfuse.split(cohort["records"], labels)
    report = metsfuse.cross_validate(
        cohort["records"], labels, plan,
        hyperparams={"max_epochs": 1},
        features=["hr_min", "hr_max", "steps"],
        encoder={"d_model": 8, "heads": 2, "layers": 1, "ff_dim": 16, "max_len": 32},
    )
    assert report["architecture"] == "TS_HCL"
    assert len(report["rotations"]) == 3


def test_lime_finds_planted_token():
    def breathless(texts):
        return [0.9 if "breathless" in t.split() else 0.1 for t in texts]

    e = metsfuse.lime_text(breathless, "walked the dog and felt breathless after the stairs", samples=300, seed=4)
    top = max(e["tokens"], key=lambda t: t["weight"])
    assert top["token"] == "breathless"


def test_lime_propagates_classifier_errors():
    def broken(texts):
        raise RuntimeError("boom")

    with pytest.raises(Exception):
        metsfuse.lime_text(broken, "some words here", samples=20)
