"""Python access to the metsfuse library.

Records and panels are plain dicts with the same fields as the records.jsonl and
panels.json files written by the command-line tool.
"""

import json

from . import _metsfuse
from ._metsfuse import (
    ConfigError,
    DataError,
    LeakageError,
    NumericError,
    ShapeError,
    auroc,
    auroc_trapezoid,
    contrastive_loss,
)

__version__ = getattr(_metsfuse, "__version__", "0.0.0")

__all__ = [
    "ConfigError",
    "DataError",
    "LeakageError",
    "Model",
    "NumericError",
    "ShapeError",
    "auroc",
    "auroc_trapezoid",
    "contrastive_loss",
    "cross_validate",
    "default_spec",
    "evaluate",
    "generate",
    "label_mets",
    "labels_of",
    "lime_text",
    "read_records",
    "split",
]


def default_spec():
    return json.loads(_metsfuse.default_spec())


def generate(spec=None, **overrides):
    """Synthetic cohort as {"panels": [...], "records": [...]}.

    Keyword overrides are merged into the top level of the spec, e.g. seed=3.
    """
    spec = dict(spec or {})
    spec.update(overrides)
    return json.loads(_metsfuse.generate(json.dumps(spec) if spec else ""))


def label_mets(panel):
    return json.loads(_metsfuse.label_mets(json.dumps(panel)))


def labels_of(panels):
    """{subject_id: 0 or 1} for a list of panels."""
    return {p["subject_id"]: int(label_mets(p)["is_mets"]) for p in panels}


def evaluate(scores, labels, threshold=0.5):
    return json.loads(_metsfuse.evaluate(list(scores), list(labels), threshold))


def split(records, labels, test_fraction=0.25, k=3, seed=0, mode="subject"):
    return json.loads(_metsfuse.split(json.dumps(records), labels, test_fraction, k, seed, mode))


def cross_validate(records, labels, plan, architecture="TS_HCL", hyperparams=None, encoder=None,
                   target_ratio=0.5, features=None, jobs=1):
    """Cross-validation report; `features` fixes the physiological features instead of selecting them."""
    return json.loads(
        _metsfuse.cross_validate(
            json.dumps(records),
            labels,
            json.dumps(plan),
            architecture,
            json.dumps(hyperparams) if hyperparams else "",
            json.dumps(encoder) if encoder else "",
            target_ratio,
            list(features or []),
            jobs,
        )
    )


def lime_text(classify, text, samples=1000, kernel_width=0.75, ridge=1e-3, seed=0):
    """Token attributions for `classify`, a callable from a list of texts to probabilities."""
    return json.loads(_metsfuse.lime_text(lambda texts: list(classify(texts)), text, samples, kernel_width, ridge, seed))


def read_records(path):
    with open(path, encoding="utf-8") as f:
        return [json.loads(line) for line in f if line.strip()]


class Model:
    """A trained fusion model loaded from a checkpoint written by `metsfuse train`."""

    def __init__(self, path):
        self._m = _metsfuse.Model.load(str(path))

    @property
    def architecture(self):
        return self._m.architecture

    @property
    def parameter_count(self):
        return self._m.parameter_count

    @property
    def hyperparams(self):
        return json.loads(self._m.hyperparams_json())

    def predict(self, records):
        return self._m.predict(json.dumps(records))

    def pfi(self, records, labels, repetitions=50, seed=0):
        return json.loads(self._m.pfi(json.dumps(records), list(labels), repetitions, seed))
