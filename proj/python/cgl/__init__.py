# SPDX-License-Identifier: Apache-2.0
"""Python interface to the CGL diagnosis-prediction library.

Commands take keyword settings with the same names as the `cgl` command-line
options and config-file keys (``ontology``, ``dataset``, ``out``, ``epochs``,
``ks``, ``generator.patients``, ...). Lists are joined with commas and
booleans are written as ``true``/``false``.
"""

from __future__ import annotations

import json
from os import PathLike
from typing import Any, Mapping, Sequence

import numpy as np

from . import _core
from ._core import (
    CglError,
    OntologyTree,
    auc,
    onset_split_recall,
    recall_at_k,
    tfidf_beta,
    tokenize,
    weighted_f1,
)

__all__ = [
    "CglError",
    "Model",
    "OntologyTree",
    "auc",
    "evaluate",
    "export",
    "generate",
    "onset_split_recall",
    "predict",
    "recall_at_k",
    "tfidf_beta",
    "tokenize",
    "train",
    "weighted_f1",
]


def _text(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (list, tuple)):
        return ",".join(_text(v) for v in value)
    return str(value)


def _settings(settings: Mapping[str, Any] | None, kwargs: Mapping[str, Any]) -> list[tuple[str, str]]:
    merged = dict(settings or {})
    merged.update(kwargs)
    return [(k, _text(v)) for k, v in merged.items()]


def generate(settings: Mapping[str, Any] | None = None, **kwargs: Any) -> str:
    """Writes a synthetic ontology and dataset into ``out``. Returns the log."""
    return _core._generate(_settings(settings, kwargs))


def train(settings: Mapping[str, Any] | None = None, **kwargs: Any) -> str:
    """Trains and writes ``<out>/checkpoint`` and ``<out>/history.csv``."""
    return _core._train(_settings(settings, kwargs))


def evaluate(settings: Mapping[str, Any] | None = None, **kwargs: Any) -> dict[str, float]:
    """Evaluates a checkpoint and returns the metrics of ``<out>/report.tsv``."""
    merged = _settings(settings, kwargs)
    _core._evaluate(merged)
    out = dict(merged).get("out", ".")
    report: dict[str, float] = {}
    with open(f"{out}/report.tsv", encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#") or not line.strip():
                continue
            name, value = line.rstrip("\n").split("\t")
            report[name] = float(value)
    return report


def predict(settings: Mapping[str, Any] | None = None, **kwargs: Any) -> str:
    """Scores the history file given as ``history``; returns the CSV text."""
    return _core._predict(_settings(settings, kwargs))


def export(settings: Mapping[str, Any] | None = None, **kwargs: Any) -> str:
    """Writes code embeddings or attention weights, selected by ``what``."""
    return _core._export(_settings(settings, kwargs))


Visits = Sequence[Mapping[str, Any]]


class Model:
    """A trained checkpoint loaded for in-process scoring.

    Histories are lists of visits, each ``{"codes": [...], "note": [...] or "text"}``.
    """

    def __init__(self, checkpoint: str | PathLike[str]):
        self._model = _core.Model(str(checkpoint))

    @property
    def task(self) -> str:
        return self._model.task

    @property
    def codes(self) -> list[str]:
        return self._model.codes

    def code_embeddings(self) -> np.ndarray:
        return self._model.code_embeddings()

    def predict(self, visits: Visits) -> np.ndarray:
        return self._model._predict(json.dumps(list(visits)))

    def explain(self, visits: Visits) -> dict[str, Any]:
        return self._model._explain(json.dumps(list(visits)))

    def top(self, visits: Visits, k: int) -> list[tuple[str, float]]:
        scores = self.predict(visits)
        order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))[:k]
        return [(self.codes[i], float(scores[i])) for i in order]
