"""Loaders for the benchmark evaluation splits.

Every format is JSON lines, one sentence per line; the field layout of each
is documented in ``docs/datasets.md``. Labels are mapped onto the schema's
names (aliases and inverse relations included) at load time, so a gold
element that does not fit the schema fails here rather than during scoring.
"""

from __future__ import annotations

import json
import random
from pathlib import Path
from typing import Any, Iterator, Sequence

from .errors import BadSize, MalformedRecord, UnknownLabel, UnknownType
from .model import Entity, EventRecord, GoldAnnotation, Sample, Triple
from .schema import TaskSchema, builtin_schema
from .text import canonicalize

FORMATS = ("nyt11", "duie2", "conllpp", "msra", "duee1", "ace05-lines")
DEFAULT_SCHEMA = {
    "nyt11": "nyt11",
    "duie2": "duie2",
    "conllpp": "conllpp",
    "msra": "msra",
    "duee1": "duee1",
    "ace05-lines": "ace05",
}


def bio_to_spans(tags: Sequence[str]) -> list[tuple[int, int, str]]:
    """Decode BIO/IOB1/BIOES tags into ``(start, end, type)`` spans (end exclusive)."""
    spans: list[tuple[int, int, str]] = []
    start: int | None = None
    current: str | None = None

    def close(end: int) -> None:
        nonlocal start, current
        if start is not None:
            spans.append((start, end, current))
        start = current = None

    for i, tag in enumerate(tags):
        if tag == "O" or not tag:
            close(i)
            continue
        prefix, _, label = tag.partition("-")
        if not label:
            raise ValueError(f"tag {tag!r} has no type")
        if prefix in ("B", "S") or current != label:
            close(i)
            start, current = i, label
        if prefix in ("E", "S"):
            close(i + 1)
    close(len(tags))
    return spans


def spans_to_bio(spans: Sequence[tuple[int, int, str]], length: int) -> list[str]:
    tags = ["O"] * length
    for start, end, label in spans:
        tags[start] = f"B-{label}"
        for i in range(start + 1, end):
            tags[i] = f"I-{label}"
    return tags


def _resolve(schema: TaskSchema, label: str, where: str) -> str:
    try:
        return schema.resolve_label(label)
    except UnknownType:
        raise UnknownLabel(f"{where}: label {label!r} is not in the schema and not a declared alias") from None


def _records(path: Path) -> Iterator[tuple[int, dict[str, Any]]]:
    with path.open(encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedRecord(path, line_no, f"invalid JSON ({exc.msg})") from None
            if not isinstance(rec, dict):
                raise MalformedRecord(path, line_no, "record must be a JSON object")
            yield line_no, rec


def _field(rec: dict, names: Sequence[str], path: Path, line_no: int):
    for name in names:
        if name in rec:
            return rec[name]
    raise MalformedRecord(path, line_no, f"missing field {names[0]!r}")


def _relation_types(schema: TaskSchema, relation: str) -> tuple[str | None, str | None]:
    try:
        rel = schema.lookup(relation)
        return rel.subject_type, rel.object_type
    except UnknownType:
        inverse = schema.inverse_of(relation)
        if inverse is None:
            return None, None
        rel = schema.lookup(inverse)
        return rel.object_type, rel.subject_type


def _nyt11(rec, schema, path, line_no) -> tuple[str, GoldAnnotation]:
    text = _field(rec, ("sentText", "text"), path, line_no)
    triples = []
    for m in rec.get("relationMentions", []):
        label = m.get("label")
        if label in (None, "None", "NA"):
            continue
        rel = _resolve(schema, label, f"{path}:{line_no}")
        st, ot = _relation_types(schema, rel)
        triples.append(Triple(m["em1Text"], rel, m["em2Text"], (), st, ot))
    return text, GoldAnnotation.of("RE", triples)


def _duie2(rec, schema, path, line_no) -> tuple[str, GoldAnnotation]:
    text = _field(rec, ("text",), path, line_no)
    triples = []
    for spo in rec.get("spo_list", []):
        rel_name = _resolve(schema, spo["predicate"], f"{path}:{line_no}")
        rel = schema.lookup(rel_name)
        obj = spo["object"]
        obj_type = spo.get("object_type", {})
        if not isinstance(obj, dict):
            obj = {"@value": obj}
        if not isinstance(obj_type, dict):
            obj_type = {"@value": obj_type}
        allowed = {a.attribute_name for a in rel.object_chain}
        attrs = {k: str(v) for k, v in obj.items() if k != "@value"}
        extra = set(attrs) - allowed
        if extra:
            raise UnknownLabel(f"{path}:{line_no}: {rel.name} has no attribute(s) {sorted(extra)}")
        triples.append(
            Triple(
                spo["subject"],
                rel.name,
                str(obj["@value"]),
                attrs,
                spo.get("subject_type") or rel.subject_type,
                obj_type.get("@value") or rel.object_type,
            )
        )
    return text, GoldAnnotation.of("RE", triples)


def _tagged(rec, schema, path, line_no, joiner: str) -> tuple[str, GoldAnnotation]:
    tokens = rec.get("tokens")
    if tokens is None and "text" in rec:
        tokens = list(rec["text"])
    tags = _field(rec, ("tags", "labels"), path, line_no)
    if tokens is None or len(tokens) != len(tags):
        raise MalformedRecord(path, line_no, "tokens and tags must have equal length")
    try:
        spans = bio_to_spans(tags)
    except ValueError as exc:
        raise MalformedRecord(path, line_no, str(exc)) from None
    entities = [
        Entity(joiner.join(tokens[s:e]), _resolve(schema, label, f"{path}:{line_no}"))
        for s, e, label in spans
    ]
    return joiner.join(tokens), GoldAnnotation.of("NER", entities)


def _events(event_list, schema, path, line_no, content_keys) -> GoldAnnotation:
    grouped: dict[str, list[tuple[str, str]]] = {}
    for ev in event_list:
        name = _resolve(schema, ev["event_type"], f"{path}:{line_no}")
        spec = schema.lookup(name)
        roles = {canonicalize(r): r for r in spec.roles}
        args = grouped.setdefault(spec.name, [])
        for a in ev.get("arguments", []):
            role = roles.get(canonicalize(a["role"]))
            if role is None:
                raise UnknownLabel(f"{path}:{line_no}: {spec.name} has no role {a['role']!r}")
            content = next((a[k] for k in content_keys if k in a), None)
            if content is None:
                raise MalformedRecord(path, line_no, "argument without content")
            args.append((role, content))
    # several instances of one event type collapse into one record
    return GoldAnnotation.of("EE", [EventRecord(t, tuple(a)) for t, a in grouped.items()])


def _duee1(rec, schema, path, line_no):
    text = _field(rec, ("text",), path, line_no)
    return text, _events(rec.get("event_list", []), schema, path, line_no, ("argument",))


def _ace05(rec, schema, path, line_no):
    text = _field(rec, ("sentence", "text"), path, line_no)
    return text, _events(rec.get("events", []), schema, path, line_no, ("text", "argument"))


def load_dataset(path: str | Path, format: str, schema: TaskSchema | None = None) -> list[Sample]:
    """Load an evaluation split as :class:`Sample` objects with gold attached."""
    if format not in FORMATS:
        raise ValueError(f"unknown dataset format {format!r}; expected one of {FORMATS}")
    path = Path(path)
    schema = schema or builtin_schema(DEFAULT_SCHEMA[format])
    samples = []
    for line_no, rec in _records(path):
        try:
            if format == "nyt11":
                text, gold = _nyt11(rec, schema, path, line_no)
            elif format == "duie2":
                text, gold = _duie2(rec, schema, path, line_no)
            elif format == "conllpp":
                text, gold = _tagged(rec, schema, path, line_no, " ")
            elif format == "msra":
                text, gold = _tagged(rec, schema, path, line_no, "")
            elif format == "duee1":
                text, gold = _duee1(rec, schema, path, line_no)
            else:
                text, gold = _ace05(rec, schema, path, line_no)
        except (KeyError, TypeError) as exc:
            raise MalformedRecord(path, line_no, f"missing or mistyped field {exc}") from None
        if not isinstance(text, str) or not text:
            raise MalformedRecord(path, line_no, "empty sentence")
        sample_id = str(rec.get("id", rec.get("sentId", f"{path.stem}-{line_no}")))
        samples.append(Sample(sample_id, text, gold))
    return samples


def subsample(samples: Sequence[Sample], n: int, seed: int) -> list[Sample]:
    """Deterministic subset of size ``n``, kept in input order."""
    if not 0 < n <= len(samples):
        raise BadSize(f"cannot draw {n} of {len(samples)} samples")
    picked = sorted(random.Random(seed).sample(range(len(samples)), n))
    return [samples[i] for i in picked]
