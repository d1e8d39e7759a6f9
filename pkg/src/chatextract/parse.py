"""Turn free-form chat replies into typed answers.

Each ``parse_*`` function accepts the surface syntaxes listed in
``docs/answer-grammar.md`` and returns one of the answer classes below.
Parsers are pure. They never invent text: every name or cell they return
is a cleaned substring of the (full-width normalised) reply, or the
schema's spelling of a type name found in it.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import ArityMismatch, Unparseable
from .text import (
    canonicalize,
    clean_cell,
    contains_cjk,
    find_groups,
    is_none_signal,
    normalize_reply,
    split_cells,
)


@dataclass(frozen=True)
class NoneAnswer:
    warnings: tuple[str, ...] = field(default=(), compare=False)


@dataclass(frozen=True)
class TypeList:
    names: tuple[str, ...]
    warnings: tuple[str, ...] = field(default=(), compare=False)


@dataclass(frozen=True)
class PairTable:
    header: tuple[str, str]
    rows: tuple[tuple[str, str], ...]
    warnings: tuple[str, ...] = field(default=(), compare=False)


@dataclass(frozen=True)
class EntityList:
    items: tuple[tuple[str, str], ...]
    warnings: tuple[str, ...] = field(default=(), compare=False)


@dataclass(frozen=True)
class RoleTable:
    rows: tuple[tuple[str, str, str], ...]
    warnings: tuple[str, ...] = field(default=(), compare=False)


ParsedAnswer = NoneAnswer | TypeList | PairTable | EntityList | RoleTable

NONE_CONTENT = {"none", "null", "n/a", "无", ""}

_LIST_MARKER = re.compile(r"^\s*(?:[-*•]|\d{1,3}[.)])\s+")
_ALIGN_ROW = re.compile(r"^\|?\s*:?-{2,}:?\s*(?:\|\s*:?-{2,}:?\s*)*\|?\s*$")
_LABEL_PREFIX = re.compile(r"^[^\(\[\|,\n]{0,40}?:\s*(?=[\(\[])")


@dataclass
class _Row:
    cells: list[str]
    structured: bool
    line: str


def _pipe_cells(line: str) -> list[str]:
    inner = line.strip()
    if inner.startswith("|"):
        inner = inner[1:]
    if inner.endswith("|"):
        inner = inner[:-1]
    return [clean_cell(c) for c in inner.split("|")]


def _trim_empty_tail(cells: list[str]) -> list[str]:
    while cells and cells[-1] == "":
        cells = cells[:-1]
    return cells


def _rows(reply: str) -> list[_Row]:
    """Split a reply into candidate table rows, one grammar per line."""
    rows: list[_Row] = []
    last_pipe: _Row | None = None
    for raw in normalize_reply(reply).split("\n"):
        line = raw.strip()
        if not line or is_none_signal(line):
            continue
        if _ALIGN_ROW.match(line) and "-" in line:
            # markdown alignment row: the pipe row just above it is a header
            if last_pipe is not None and rows and rows[-1] is last_pipe:
                rows.pop()
            last_pipe = None
            continue
        body = _LIST_MARKER.sub("", line, count=1)
        body = _LABEL_PREFIX.sub("", body, count=1)
        if body[:1] in ("(", "["):
            groups = find_groups(body)
            if groups:
                for g in groups:
                    cells = _trim_empty_tail([clean_cell(c) for c in split_cells(g)])
                    rows.append(_Row(cells, True, line))
                last_pipe = None
                continue
        if "|" in line:
            row = _Row(_trim_empty_tail(_pipe_cells(line)), True, line)
            rows.append(row)
            last_pipe = row
            continue
        sep = "\t" if "\t" in body else ","
        cells = _trim_empty_tail([clean_cell(c) for c in split_cells(body, sep)])
        rows.append(_Row(cells, len(cells) > 1, line))
        last_pipe = None
    return rows


# --- type lists --------------------------------------------------------------

_PIECE_SPLIT = re.compile(r"[,;\n]")
_EDGE = "()[]{} \t"


def _boundary_ok(text: str, start: int, end: int) -> bool:
    before = text[start - 1] if start > 0 else " "
    after = text[end] if end < len(text) else " "
    word = lambda ch: ch.isalnum() or ch in "-_:/"
    return not word(before) and not word(after)


def _scan_for_names(piece: str, inventory: Sequence[str]) -> list[str]:
    """Inventory names mentioned inside a longer piece of text."""
    low = canonicalize(piece)
    spans: list[tuple[int, int, str]] = []
    for name in sorted(inventory, key=len, reverse=True):
        key = canonicalize(name)
        start = low.find(key)
        while start != -1:
            end = start + len(key)
            free = all(end <= s or start >= e for s, e, _ in spans)
            if free and (contains_cjk(key) or _boundary_ok(low, start, end)):
                spans.append((start, end, name))
                break
            start = low.find(key, start + 1)
    return [name for _, _, name in sorted(spans)]


def parse_type_list(reply: str, inventory: Sequence[str]) -> TypeList | NoneAnswer:
    if not inventory:
        raise ValueError("inventory must be non-empty")
    if is_none_signal(reply):
        return NoneAnswer()
    by_key = {canonicalize(n): n for n in inventory}
    names: list[str] = []
    warnings: list[str] = []
    saw_piece = False
    for piece in _PIECE_SPLIT.split(normalize_reply(reply)):
        piece = _LIST_MARKER.sub("", piece.strip(), count=1).strip(_EDGE)
        piece = clean_cell(piece).strip(_EDGE)
        if not piece or is_none_signal(piece):
            continue
        saw_piece = True
        hit = by_key.get(canonicalize(piece))
        found = [hit] if hit else _scan_for_names(piece, inventory)
        if not found:
            warnings.append(f"dropped type outside the inventory: {piece!r}")
        for name in found:
            if name not in names:
                names.append(name)
    if not saw_piece:
        raise Unparseable(f"no type names found in reply {reply!r}")
    return TypeList(tuple(names), tuple(warnings))


def parse_event_types(reply: str, inventory: Sequence[str]) -> TypeList | NoneAnswer:
    """Event classification reply: like :func:`parse_type_list`, and one type
    per line is the expected shape."""
    return parse_type_list(reply, inventory)


# --- two-column tables -------------------------------------------------------

def _table(rows: Iterable[_Row], arity: int, reply: str, header_keys: set | None = None):
    good: list[list[str]] = []
    warnings: list[str] = []
    structured = bad = 0
    for row in rows:
        if not row.structured:
            warnings.append(f"ignored unstructured line: {row.line!r}")
            continue
        structured += 1
        cells = row.cells
        if len(cells) != arity:
            bad += 1
            warnings.append(f"expected {arity} cells, got {len(cells)}: {row.line!r}")
            continue
        if not good and header_keys and tuple(canonicalize(c) for c in cells) in header_keys:
            continue
        if any(c == "" for c in cells):
            warnings.append(f"empty cell in row: {row.line!r}")
            continue
        good.append(cells)
    if not structured:
        raise Unparseable(f"no table rows found in reply {reply!r}")
    if not good and bad:
        raise ArityMismatch(f"no row has {arity} cells in reply {reply!r}")
    return good, warnings


def parse_pair_table(reply: str, header: Sequence[str]) -> PairTable | NoneAnswer:
    if len(header) != 2:
        raise ValueError("header must name two columns")
    if is_none_signal(reply):
        return NoneAnswer()
    keys = {tuple(canonicalize(h) for h in header)}
    good, warnings = _table(_rows(reply), 2, reply, keys)
    return PairTable(tuple(header), tuple((a, b) for a, b in good), tuple(warnings))


_ENTITY_HEADERS = {
    ("entity name", "entity type"),
    ("entity", "type"),
    ("name", "type"),
    ("实体名称", "实体类型"),
}


def parse_entity_list(reply: str, inventory: Sequence[str]) -> EntityList | NoneAnswer:
    if not inventory:
        raise ValueError("inventory must be non-empty")
    if is_none_signal(reply):
        return NoneAnswer()
    by_key = {canonicalize(n): n for n in inventory}
    good, warnings = _table(_rows(reply), 2, reply, _ENTITY_HEADERS)
    items: list[tuple[str, str]] = []
    for name, etype in good:
        hit = by_key.get(canonicalize(etype))
        if hit is None:
            warnings.append(f"dropped entity {name!r} with type outside the inventory: {etype!r}")
            continue
        items.append((name, hit))
    return EntityList(tuple(items), tuple(warnings))


# --- role tables -------------------------------------------------------------

_ROLE_KEYS = {"role", "argument role", "论元角色", "角色"}
_CONTENT_KEYS = {"argument", "content", "argument content", "text", "论元内容", "论元"}
_EVENT_KEYS = {"event type", "type", "事件类型"}
_ROLE_HEADER_CELLS = _ROLE_KEYS

_BRACE_BLOCK = re.compile(r"\{[^{}]*\}")
_KV = re.compile(
    r"""(?:"((?:[^"\\]|\\.)*)"|'([^']*)')\s*:\s*(?:"((?:[^"\\]|\\.)*)"|'([^']*)')""",
    re.DOTALL,
)


def _unescape(s: str) -> str:
    try:
        return json.loads(f'"{s}"')
    except json.JSONDecodeError:
        return s


def _records(text: str) -> list[dict[str, str]]:
    out = []
    for block in _BRACE_BLOCK.findall(text):
        rec: dict[str, str] = {}
        for m in _KV.finditer(block):
            key = m.group(1) if m.group(1) is not None else m.group(2)
            if m.group(3) is not None:
                value = _unescape(m.group(3))
            else:
                value = m.group(4)
            rec[canonicalize(key).replace("_", " ")] = value
        if rec:
            out.append(rec)
    return out


def _pick(rec: dict[str, str], keys: set[str]) -> str | None:
    for k in keys:
        if k in rec:
            return rec[k]
    return None


def _squash(name: str) -> str:
    return canonicalize(name).replace(" ", "")


def parse_role_table(reply: str, event_type: str, roles: Sequence[str]) -> RoleTable | NoneAnswer:
    if not roles:
        raise ValueError("roles must be non-empty")
    if is_none_signal(reply):
        return NoneAnswer()
    by_key = {canonicalize(r): r for r in roles}
    text = normalize_reply(reply)
    warnings: list[str] = []
    triples: list[tuple[str | None, str, str, str]] = []

    records = [r for r in _records(text) if _pick(r, _ROLE_KEYS) is not None]
    if records:
        for rec in records:
            content = _pick(rec, _CONTENT_KEYS)
            if content is None:
                warnings.append(f"record without argument content: {rec!r}")
                continue
            triples.append((_pick(rec, _EVENT_KEYS), _pick(rec, _ROLE_KEYS), content.strip(), repr(rec)))
    else:
        rows = _rows(reply)
        good3, good2 = [], []
        structured = 0
        for row in rows:
            if not row.structured:
                warnings.append(f"ignored unstructured line: {row.line!r}")
                continue
            structured += 1
            if len(row.cells) == 3:
                good3.append(row)
            elif len(row.cells) == 2:
                good2.append(row)
            else:
                warnings.append(f"expected 3 cells, got {len(row.cells)}: {row.line!r}")
        if not structured:
            raise Unparseable(f"no role table found in reply {reply!r}")
        if not good3 and not good2:
            raise ArityMismatch(f"no row has 3 cells in reply {reply!r}")
        for row in good3:
            et, role, content = row.cells
            triples.append((et, role, content, row.line))
        for row in good2:
            role, content = row.cells
            triples.append((None, role, content, row.line))

    out: list[tuple[str, str, str]] = []
    for et, role, content, src in triples:
        if canonicalize(role) in _ROLE_HEADER_CELLS:
            continue
        if et is not None and _squash(et) != _squash(event_type):
            warnings.append(f"row for a different event type {et!r}: {src}")
            continue
        hit = by_key.get(canonicalize(role))
        if hit is None:
            warnings.append(f"dropped argument with unknown role {role!r}")
            continue
        if canonicalize(content) in NONE_CONTENT:
            continue
        out.append((event_type, hit, content))
    return RoleTable(tuple(out), tuple(warnings))

