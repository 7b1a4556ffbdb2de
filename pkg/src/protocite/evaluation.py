"""Multi-label F1 reporting."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class LabelScores:
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    f1: float
    support: int


@dataclass
class EvalReport:
    per_label: list[LabelScores]
    macro_f1: float
    micro_f1: float

    def to_tsv(self, label_names: list[str] | None = None) -> str:
        names = label_names or [str(i) for i in range(len(self.per_label))]
        lines = ["label\tprecision\trecall\tf1\tsupport\ttp\tfp\tfn"]
        for name, s in zip(names, self.per_label):
            lines.append(
                f"{name}\t{s.precision:.6f}\t{s.recall:.6f}\t{s.f1:.6f}"
                f"\t{s.support}\t{s.tp}\t{s.fp}\t{s.fn}"
            )
        lines.append(f"macro_f1\t{self.macro_f1:.6f}")
        lines.append(f"micro_f1\t{self.micro_f1:.6f}")
        return "\n".join(lines) + "\n"


def f1_report(predictions: np.ndarray, golds: np.ndarray) -> EvalReport:
    """Per-label precision/recall/F1 plus macro and micro aggregates.

    Uses the 0/0 := 0 convention throughout. Macro-F1 is the unweighted
    mean of per-label F1; micro-F1 pools counts across labels.
    """
    predictions = np.asarray(predictions)
    golds = np.asarray(golds)
    if predictions.shape != golds.shape:
        raise ValueError(f"shape mismatch: {predictions.shape} vs {golds.shape}")
    if predictions.size == 0:
        raise ValueError("empty input")
    pred = predictions.astype(bool)
    gold = golds.astype(bool)
    per_label = []
    for j in range(pred.shape[1]):
        tp = int(np.sum(pred[:, j] & gold[:, j]))
        fp = int(np.sum(pred[:, j] & ~gold[:, j]))
        fn = int(np.sum(~pred[:, j] & gold[:, j]))
        per_label.append(
            LabelScores(tp, fp, fn, _ratio(tp, tp + fp), _ratio(tp, tp + fn),
                        _f1(tp, fp, fn), tp + fn)
        )
    macro = float(np.mean([s.f1 for s in per_label]))
    tp = sum(s.tp for s in per_label)
    fp = sum(s.fp for s in per_label)
    fn = sum(s.fn for s in per_label)
    return EvalReport(per_label, macro, _f1(tp, fp, fn))


def _ratio(num: int, denom: int) -> float:
    return num / denom if denom else 0.0


def _f1(tp: int, fp: int, fn: int) -> float:
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom else 0.0
