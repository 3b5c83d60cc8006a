"""Q-error tables for the model and the baseline on a labelled workload."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ..model import METRIC_NAMES, metrics, qerrors


@dataclass
class ErrorSet:
    estimator: str
    target: str  # "cost" | "card"
    true: np.ndarray
    est: np.ndarray

    @property
    def errors(self) -> np.ndarray:
        return qerrors(self.true, self.est)

    def summary(self) -> dict[str, float]:
        return metrics(self.errors)


@dataclass
class Evaluation:
    sets: list[ErrorSet] = field(default_factory=list)

    def add(self, estimator: str, cost_true, cost_est, card_true, card_est) -> None:
        self.sets.append(ErrorSet(estimator, "cost", np.asarray(cost_true, float), np.asarray(cost_est, float)))
        self.sets.append(ErrorSet(estimator, "card", np.asarray(card_true, float), np.asarray(card_est, float)))

    def get(self, estimator: str, target: str) -> ErrorSet:
        for s in self.sets:
            if s.estimator == estimator and s.target == target:
                return s
        raise KeyError((estimator, target))

    def table(self) -> str:
        lines = ["\t".join(("estimator", "target", "n") + METRIC_NAMES)]
        for s in self.sets:
            m = s.summary()
            lines.append("\t".join([s.estimator, s.target, str(len(s.true))] + [f"{m[k]:.6g}" for k in METRIC_NAMES]))
        return "\n".join(lines) + "\n"

    def raw(self, names: Sequence[str] | None = None) -> str:
        lines = ["query\testimator\ttarget\ttrue\testimate\tqerror"]
        for s in self.sets:
            for i, (t, e, q) in enumerate(zip(s.true, s.est, s.errors)):
                name = names[i] if names is not None else str(i)
                lines.append(f"{name}\t{s.estimator}\t{s.target}\t{t:.9g}\t{e:.9g}\t{q:.9g}")
        return "\n".join(lines) + "\n"

    def write(self, metrics_path: str | Path, raw_path: str | Path | None = None, names=None) -> None:
        Path(metrics_path).write_text(self.table())
        if raw_path is not None:
            Path(raw_path).write_text(self.raw(names))
