"""String normalisation shared by schemas, parsers and scorers.

Three operations matter downstream and must agree everywhere:

* :func:`canonicalize` for comparing *type names* (relations, entity types,
  event types, roles);
* :func:`clean_cell` for *extracted values* (entity spans, argument content);
* :func:`is_none_signal` for the explicit "nothing here" reply.
"""

from __future__ import annotations

import re

# opener -> accepted closers
QUOTES: dict[str, str] = {
    "'": "'’",
    '"': '"”',
    "‘": "’'",
    "“": "”\"",
    "`": "`'",
    "「": "」",
    "『": "』",
}
QUOTE_CHARS = "".join(sorted(set(QUOTES) | set("".join(QUOTES.values()))))

TRAILING_PUNCT = ".,;:!?。，；：！？、"

_FULLWIDTH = str.maketrans(
    {
        "，": ",",
        "、": ",",
        "（": "(",
        "）": ")",
        "【": "[",
        "】": "]",
        "［": "[",
        "］": "]",
        "；": ";",
        "：": ":",
        "｜": "|",
        "\r": None,
    }
)

_WS_RUN = re.compile(r"\s+")

_NONE_WORD = re.compile(
    r"""^\s*(?:answer\s*:\s*)?
        [\(\[\{'"`‘’“”「」]*\s*
        (?:none|null|nil|无|没有|不存在)
        \s*[\)\]\}'"`‘’“”「」]*\s*[.!。]?\s*$""",
    re.IGNORECASE | re.VERBOSE,
)
_EMPTY_CONTAINER = re.compile(r"^\s*(?:\(\s*\)|\[\s*\])\s*$")


def canonicalize(name: str) -> str:
    """Comparison key for type names.

    Trims whitespace and quote characters, lower-cases, and collapses inner
    whitespace runs. Hyphens and underscores are kept distinct.
    """
    s = name.strip().strip(QUOTE_CHARS).strip()
    return _WS_RUN.sub(" ", s).lower()


def normalize_reply(reply: str) -> str:
    """Map full-width punctuation to ASCII and drop carriage returns."""
    return reply.translate(_FULLWIDTH)


def is_none_signal(reply: str) -> bool:
    text = normalize_reply(reply)
    return bool(_NONE_WORD.match(text) or _EMPTY_CONTAINER.match(text))


def clean_cell(cell: str) -> str:
    """Strip whitespace, trailing punctuation and one layer of matching quotes.

    Text inside a matching quote pair is returned untouched, so a quoted
    value may legitimately end in punctuation.
    """
    s = cell.strip()
    if _quoted(s):
        return s[1:-1]
    s = s.rstrip(TRAILING_PUNCT).rstrip()
    if _quoted(s):
        return s[1:-1]
    return s


def _quoted(s: str) -> bool:
    return len(s) >= 2 and s[0] in QUOTES and s[-1] in QUOTES[s[0]]


def _closes_at(text: str, k: int, stops: str) -> int | None:
    """If position ``k`` is followed by optional blanks then a stop char or
    end of text, return the index of that stop (or ``len(text)``)."""
    m = k + 1
    n = len(text)
    while m < n and text[m] in " \t":
        m += 1
    if m == n or text[m] in stops:
        return m
    return None


def split_cells(text: str, sep: str = ",") -> list[str]:
    """Split ``text`` on ``sep`` while respecting quoted cells.

    A quote only opens a cell when it is the first non-blank character of
    that cell, and only closes when followed by ``sep`` or end of text, so
    apostrophes inside unquoted words (``O'Neil``) are harmless. Cells are
    returned raw; callers apply :func:`clean_cell`.
    """
    cells: list[str] = []
    n = len(text)
    i = 0
    while True:
        j = i
        while j < n and text[j] in " \t":
            j += 1
        if j < n and text[j] in QUOTES:
            closers = QUOTES[text[j]]
            k = j + 1
            stop = None
            while k < n:
                if text[k] in closers:
                    stop = _closes_at(text, k, sep)
                    if stop is not None:
                        break
                k += 1
            if stop is not None:
                cells.append(text[i:k + 1])
                if stop >= n:
                    return cells
                i = stop + 1
                continue
        k = text.find(sep, j)
        if k == -1:
            cells.append(text[i:])
            return cells
        cells.append(text[i:k])
        i = k + 1


_OPEN = "(["
_CLOSE = ")]"


def _match_group(text: str, start: int) -> int | None:
    depth = 0
    quote: str | None = None
    prev = ""
    n = len(text)
    k = start
    while k < n:
        c = text[k]
        if quote is not None:
            if c in QUOTES[quote] and _closes_at(text, k, ",)]") is not None:
                quote = None
                prev = c
            k += 1
            continue
        if c in _OPEN:
            depth += 1
        elif c in _CLOSE:
            depth -= 1
            if depth == 0:
                return k
        elif c in QUOTES and prev in ("(", "[", ","):
            quote = c
        if not c.isspace():
            prev = c
        k += 1
    return None


def find_groups(text: str) -> list[str]:
    """Return the contents of innermost ``(...)``/``[...]`` groups.

    A group whose content itself starts with a bracket is treated as a list
    of groups and descended into; otherwise brackets inside a cell (e.g.
    ``Bosnia (Herzegovina)``) stay part of that cell.
    """
    out: list[str] = []
    i = 0
    n = len(text)
    while i < n:
        if text[i] in _OPEN:
            j = _match_group(text, i)
            if j is None:
                i += 1
                continue
            inner = text[i + 1:j]
            head = inner.lstrip()[:1]
            if head and head in _OPEN:
                out.extend(find_groups(inner))
            else:
                out.append(inner)
            i = j + 1
        else:
            i += 1
    return out


def contains_cjk(text: str) -> bool:
    return any("一" <= ch <= "鿿" for ch in text)
