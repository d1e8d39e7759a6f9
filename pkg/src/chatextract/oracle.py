"""Gold-oracle replies: what a perfectly cooperative model would answer.

The oracle reads the structured view of each question from
``RenderedPrompt.meta`` and formats the matching gold elements in exactly the
answer form the question asks for. ``parse(gold_oracle_reply(...))`` is the
identity on the gold projection, which is what makes end-to-end pipeline
runs checkable without a model.
"""

from __future__ import annotations

import json

from .errors import UnsupportedForm
from .model import GoldAnnotation
from .text import QUOTE_CHARS, QUOTES, TRAILING_PUNCT, canonicalize, is_none_signal

NONE_REPLY = "none"

_SPECIAL = set(",()[]{}|\n\t;") | set(QUOTE_CHARS)


def _needs_quotes(cell: str) -> bool:
    return (
        cell != cell.strip()
        or any(ch in _SPECIAL for ch in cell)
        or cell[-1] in TRAILING_PUNCT
        or is_none_signal(cell)
    )


def quote_cell(cell: str, always: bool = False, prefer: str = '"') -> str:
    """Quote ``cell`` with a quote style whose closers it does not contain."""
    if not cell or not cell.strip():
        raise UnsupportedForm("cannot express an empty value")
    if not always and not _needs_quotes(cell):
        return cell
    for q in (prefer, '"', "'", "“", "「", "『"):
        if q not in cell and not any(c in cell for c in QUOTES[q]):
            return f"{q}{cell}{q if q in QUOTES[q] else QUOTES[q][0]}"
    raise UnsupportedForm(f"no quote style can wrap {cell!r}")


def _stage1(prompt, gold: GoldAnnotation, schema) -> str:
    inventory = list(prompt.meta.get("types") or (schema.type_names if schema else []))
    keys = {canonicalize(t): t for t in inventory}
    present: set[str] = set()
    if gold.task == "RE":
        for t in gold.triples:
            name = t.relation
            if canonicalize(name) not in keys and schema is not None:
                name = schema.inverse_of(name) or name
            present.add(canonicalize(name))
    elif gold.task == "NER":
        present = {canonicalize(e.type) for e in gold.entities}
    else:
        present = {canonicalize(e.event_type) for e in gold.events}
    names = [t for t in inventory if canonicalize(t) in present]
    if not names:
        return NONE_REPLY
    form = prompt.expected_answer_form
    if form == "TypeTuple":
        return "(" + ", ".join(names) + ")"
    if form == "TypeList":
        return ", ".join(names)
    if form == "EventTypeLine":
        return "\n".join(names)
    raise UnsupportedForm(f"stage I form {form!r}")


def _pairs_for(relation: str, gold: GoldAnnotation, schema) -> list[tuple[str, str, object]]:
    key = canonicalize(relation)
    inverse = schema.inverse_of(relation) if schema is not None else None
    out = []
    for t in gold.triples:
        if canonicalize(t.relation) == key:
            out.append((t.subject, t.object, t))
        elif inverse and canonicalize(t.relation) == canonicalize(inverse):
            out.append((t.object, t.subject, t))
    return sorted(out, key=lambda p: (p[0], p[1]))


def _pair_rows(rows: list[tuple[str, str]]) -> str:
    if not rows:
        return NONE_REPLY
    seen = []
    for r in rows:
        if r not in seen:
            seen.append(r)
    return "\n".join(f"({quote_cell(a)}, {quote_cell(b)})" for a, b in seen)


def _entities(entity_type: str, gold: GoldAnnotation) -> str:
    key = canonicalize(entity_type)
    names = sorted({e.name for e in gold.entities if canonicalize(e.type) == key})
    if not names:
        return NONE_REPLY
    return ", ".join(
        f"[{quote_cell(n, always=True, prefer=chr(39))}, '{entity_type}']" for n in names
    )


def _roles(event_type: str, roles, gold: GoldAnnotation) -> str:
    key = canonicalize(event_type)
    args: list[tuple[str, str]] = []
    found = False
    for ev in gold.events:
        if canonicalize(ev.event_type) == key:
            found = True
            args.extend(ev.arguments)
    if not found:
        return NONE_REPLY
    if not args:
        # every role present but empty, as the prompt asks
        args = [(r, "None") for r in roles]
    records = [
        "{" + f'"role": {json.dumps(r, ensure_ascii=False)}, "argument": {json.dumps(c, ensure_ascii=False)}' + "}"
        for r, c in sorted(set(args))
    ]
    return '"arguments": [\n' + ",\n".join(records) + "\n]"


def gold_oracle_reply(conversation, prompt, gold: GoldAnnotation, schema=None) -> str:
    """Reply to ``prompt`` from ``gold``; ``"none"`` when nothing applies."""
    meta = prompt.meta or {}
    kind = meta.get("kind")
    if kind == "stage1":
        return _stage1(prompt, gold, schema)
    if kind == "pairs":
        rows = [(s, o) for s, o, _ in _pairs_for(meta["relation"], gold, schema)]
        return _pair_rows(rows)
    if kind == "attribute":
        groups = {tuple(g) for g in meta.get("groups", ())}
        rows = []
        for s, o, triple in _pairs_for(meta["relation"], gold, schema):
            value = triple.attribute_map.get(meta["attribute"])
            if (s, o) in groups and value is not None:
                rows.append((o, value))
        return _pair_rows(rows)
    if kind == "entities":
        return _entities(meta["entity_type"], gold)
    if kind == "roles":
        return _roles(meta["event_type"], meta.get("roles", ()), gold)
    raise UnsupportedForm(f"prompt {prompt.template_id!r} carries no question metadata")
