"""Micro precision/recall/F1 scoring for the three tasks.

Each scorer works on one sentence's predicted and gold sets and returns a
:class:`MetricReport`; :func:`evaluate` pools counts across a corpus before
computing ratios, which is what makes the result *micro*-averaged.

String cleanup before comparison is the same cleanup the answer parser
applies to cells, so a gold mention and a parsed mention compare equal when
they differ only in quoting, trailing punctuation or spacing. Mentions keep
their case; relation, type and role names are compared case-insensitively.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import IdMismatch, RegimeUnsupported
from .model import Entity, EventRecord, Triple
from .text import canonicalize, clean_cell, contains_cjk

REGIMES = ("RE-border", "RE-strict", "NER-exact", "EE-wordlevel", "EE-entitylevel")
REGIME_TASK = {
    "RE-border": "RE",
    "RE-strict": "RE",
    "NER-exact": "NER",
    "EE-wordlevel": "EE",
    "EE-entitylevel": "EE",
}
REGIME_LABELS = {"EE-wordlevel": "word-level (chatextract definition)"}

Equivalences = Sequence[tuple[str, str]]


def micro_f1(tp: float, n_pred: int, n_gold: int) -> tuple[float, float, float]:
    precision = tp / n_pred if n_pred else 0.0
    recall = tp / n_gold if n_gold else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


@dataclass(frozen=True)
class MetricReport:
    task: str
    regime: str
    tp: float
    n_pred: int
    n_gold: int
    per_type: Mapping[str, tuple[float, int, int]] = field(default_factory=dict)

    @property
    def precision(self) -> float:
        return micro_f1(self.tp, self.n_pred, self.n_gold)[0]

    @property
    def recall(self) -> float:
        return micro_f1(self.tp, self.n_pred, self.n_gold)[1]

    @property
    def f1(self) -> float:
        return micro_f1(self.tp, self.n_pred, self.n_gold)[2]

    @classmethod
    def from_counts(cls, regime: str, counts: Mapping[str, tuple[float, int, int]]) -> "MetricReport":
        tp = sum(c[0] for c in counts.values())
        n_pred = sum(c[1] for c in counts.values())
        n_gold = sum(c[2] for c in counts.values())
        return cls(REGIME_TASK[regime], regime, tp, n_pred, n_gold, dict(sorted(counts.items())))

    def __add__(self, other: "MetricReport") -> "MetricReport":
        if other.regime != self.regime:
            raise ValueError(f"cannot pool {self.regime} with {other.regime}")
        return MetricReport.from_counts(self.regime, _merge(self.per_type, other.per_type))

    def to_record(self) -> dict:
        return {
            "task": self.task,
            "regime": self.regime,
            "label": REGIME_LABELS.get(self.regime, self.regime),
            "tp": self.tp,
            "n_pred": self.n_pred,
            "n_gold": self.n_gold,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "per_type": {k: list(v) for k, v in self.per_type.items()},
        }

    def table(self, name: str = "") -> str:
        """Percentages to one decimal, in a P / R / F1 column layout."""
        head = name or REGIME_LABELS.get(self.regime, self.regime)
        width = max([len(head), 8] + [len(k) + 2 for k in self.per_type])
        lines = [f"{'':<{width}}  {'P':>6}  {'R':>6}  {'F1':>6}"]

        def row(label: str, tp: float, n_pred: int, n_gold: int) -> str:
            p, r, f = micro_f1(tp, n_pred, n_gold)
            return f"{label:<{width}}  {100 * p:6.1f}  {100 * r:6.1f}  {100 * f:6.1f}"

        lines.append(row(head, self.tp, self.n_pred, self.n_gold))
        for key, (tp, n_pred, n_gold) in self.per_type.items():
            lines.append(row(f"  {key}", tp, n_pred, n_gold))
        return "\n".join(lines)


def _merge(*counts: Mapping[str, tuple[float, int, int]]) -> dict[str, tuple[float, int, int]]:
    out: dict[str, tuple[float, int, int]] = {}
    for c in counts:
        for key, (tp, n_pred, n_gold) in c.items():
            a, b, g = out.get(key, (0, 0, 0))
            out[key] = (a + tp, b + n_pred, g + n_gold)
    return out


def _mention(text: str) -> str:
    # repeat until stable so '"U.S."' and 'U.S.' land on the same key
    prev, cur = None, text
    while cur != prev:
        prev, cur = cur, " ".join(clean_cell(cur).split())
    return cur


def _display_names(names: Iterable[str]) -> dict[str, str]:
    """Canonical key -> first spelling seen, for per-type labels."""
    out: dict[str, str] = {}
    for n in names:
        out.setdefault(canonicalize(n), n)
    return out


def _count_exact(pred: set, gold: set, type_of, names: Mapping[str, str]) -> dict[str, tuple[int, int, int]]:
    counts: dict[str, tuple[int, int, int]] = {}
    for key in pred | gold:
        t = names.get(type_of(key), type_of(key))
        tp, n_pred, n_gold = counts.get(t, (0, 0, 0))
        counts[t] = (tp + (key in pred and key in gold), n_pred + (key in pred), n_gold + (key in gold))
    return counts


# relation triples

def _inverse_map(equivalences: Equivalences | None) -> dict[str, str]:
    """Map the second name of each pair to the first."""
    return {canonicalize(b): canonicalize(a) for a, b in (equivalences or ())}


def _triple_key(t: Triple, strict: bool, inverse: Mapping[str, str]) -> tuple:
    subject, relation, obj = _mention(t.subject), canonicalize(t.relation), _mention(t.object)
    st, ot = t.subject_type, t.object_type
    if relation in inverse:
        subject, obj, st, ot, relation = obj, subject, ot, st, inverse[relation]
    attrs = tuple(sorted((canonicalize(k), _mention(v)) for k, v in t.attributes))
    key = (subject, relation, obj, attrs)
    if strict:
        key += (canonicalize(st or ""), canonicalize(ot or ""))
    return key


def score_re(
    pred: Iterable[Triple],
    gold: Iterable[Triple],
    regime: str = "border",
    equivalences: Equivalences | None = None,
) -> MetricReport:
    """Score triples under the border or strict regime.

    ``equivalences`` lists ``(r, inv_r)`` pairs; ``(a, inv_r, b)`` is scored as
    ``(b, r, a)`` on both sides. Complex-object attributes must match too.
    """
    name = regime if regime.startswith("RE-") else f"RE-{regime}"
    if name not in ("RE-border", "RE-strict"):
        raise RegimeUnsupported(f"relation triples cannot be scored under {regime!r}")
    strict = name == "RE-strict"
    inverse = _inverse_map(equivalences)
    pred, gold = list(pred), list(gold)
    p = {_triple_key(t, strict, inverse) for t in pred}
    g = {_triple_key(t, strict, inverse) for t in gold}
    names = _display_names(t.relation for t in gold + pred)
    names.update({k: names.get(v, v) for k, v in inverse.items() if v in names})
    return MetricReport.from_counts(name, _count_exact(p, g, lambda k: k[1], names))


# entities

def score_ner(pred: Iterable[Entity], gold: Iterable[Entity]) -> MetricReport:
    pred, gold = list(pred), list(gold)
    p = {(_mention(e.name), canonicalize(e.type)) for e in pred}
    g = {(_mention(e.name), canonicalize(e.type)) for e in gold}
    names = _display_names(e.type for e in gold + pred)
    return MetricReport.from_counts("NER-exact", _count_exact(p, g, lambda k: k[1], names))


# events

def _argument_tuples(events: Iterable[EventRecord]) -> set[tuple[str, str, str]]:
    return {
        (canonicalize(ev.event_type), canonicalize(role), _mention(content))
        for ev in events
        for role, content in ev.arguments
    }


def score_ee_entity(pred: Iterable[EventRecord], gold: Iterable[EventRecord]) -> MetricReport:
    """Exact match on (event type, role, content) argument tuples."""
    pred, gold = list(pred), list(gold)
    p, g = _argument_tuples(pred), _argument_tuples(gold)
    names = _display_names(e.event_type for e in gold + pred)
    return MetricReport.from_counts("EE-entitylevel", _count_exact(p, g, lambda k: k[0], names))


def tokens(text: str) -> list[str]:
    """Characters for CJK text, whitespace tokens otherwise."""
    if contains_cjk(text):
        return [ch for ch in text if not ch.isspace()]
    return text.split()


def token_f1(pred: str, gold: str) -> float:
    p, g = tokens(_mention(pred)), tokens(_mention(gold))
    overlap = sum((Counter(p) & Counter(g)).values())
    if not overlap:
        return 0.0
    precision, recall = overlap / len(p), overlap / len(g)
    return 2 * precision * recall / (precision + recall)


def _slot_credit(pred: list[str], gold: list[str]) -> float:
    if not pred or not gold:
        return 0.0
    credit = np.array([[token_f1(p, g) for g in gold] for p in pred])
    rows, cols = linear_sum_assignment(credit, maximize=True)
    return float(credit[rows, cols].sum())


def score_ee_wordlevel(pred: Iterable[EventRecord], gold: Iterable[EventRecord]) -> MetricReport:
    """Fractional credit: token F1 between contents filling the same slot.

    A slot is an (event type, role) pair. When a slot holds several contents
    on either side they are paired one-to-one so total credit is maximal.
    """
    pred, gold = list(pred), list(gold)
    names = _display_names(e.event_type for e in gold + pred)
    slots: dict[tuple[str, str], tuple[list[str], list[str]]] = {}
    for side, events in ((0, pred), (1, gold)):
        for et, role, content in _argument_tuples(events):
            slots.setdefault((et, role), ([], []))[side].append(content)
    counts: dict[str, tuple[float, int, int]] = {}
    for (et, _), (p, g) in sorted(slots.items()):
        et = names.get(et, et)
        tp, n_pred, n_gold = counts.get(et, (0.0, 0, 0))
        counts[et] = (tp + _slot_credit(sorted(p), sorted(g)), n_pred + len(p), n_gold + len(g))
    return MetricReport.from_counts("EE-wordlevel", counts)


def score(pred: Iterable, gold: Iterable, regime: str, equivalences: Equivalences | None = None) -> MetricReport:
    if regime in ("RE-border", "RE-strict"):
        return score_re(pred, gold, regime, equivalences)
    if regime == "NER-exact":
        return score_ner(pred, gold)
    if regime == "EE-entitylevel":
        return score_ee_entity(pred, gold)
    if regime == "EE-wordlevel":
        return score_ee_wordlevel(pred, gold)
    raise RegimeUnsupported(f"unknown regime {regime!r}; expected one of {REGIMES}")


def evaluate(
    predictions: Mapping[str, Iterable],
    gold: Mapping[str, Iterable],
    regime: str,
    equivalences: Equivalences | None = None,
) -> MetricReport:
    """Pool per-sentence counts over a corpus.

    Every prediction id must exist in ``gold``; gold sentences with no
    prediction count as empty predictions (all their elements are misses).
    """
    if regime not in REGIMES:
        raise RegimeUnsupported(f"unknown regime {regime!r}; expected one of {REGIMES}")
    unknown = sorted(set(predictions) - set(gold))
    if unknown:
        raise IdMismatch(f"{len(unknown)} prediction id(s) have no gold sample, e.g. {unknown[0]!r}")
    counts: dict[str, tuple[float, int, int]] = {}
    for sample_id, g in gold.items():
        report = score(predictions.get(sample_id, ()), g, regime, equivalences)
        counts = _merge(counts, report.per_type)
    return MetricReport.from_counts(regime, counts)


def default_regime(task: str, has_types: bool = False, language: str = "EN") -> str:
    if task == "RE":
        return "RE-strict" if has_types else "RE-border"
    if task == "NER":
        return "NER-exact"
    return "EE-wordlevel" if language == "ZH" else "EE-entitylevel"
