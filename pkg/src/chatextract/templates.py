"""Prompt templates and rendering.

Slots are written ``${name}`` in template bodies; a literal dollar sign is
written ``$$``. Any other ``$`` is rejected when the registry loads, so a
rendered prompt can never contain a half-filled slot.
"""

from __future__ import annotations

import string
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Mapping

import yaml

from .errors import SlotMissing, TaskMismatch, TemplateError

ANSWER_FORMS = ("TypeTuple", "TypeList", "PairTable", "EntityList", "RoleTable", "EventTypeLine")
SLOT_SENTINEL = "${"

TEMPLATE_DIR = Path(__file__).parent / "data" / "templates"


class _SlotTemplate(string.Template):
    # braced slots only; a bare `$name` is invalid
    idpattern = r"(?!)"
    braceidpattern = r"[A-Za-z_][A-Za-z0-9_]*"


def _slots_in(body: str) -> tuple[str, ...]:
    names: list[str] = []
    for m in _SlotTemplate.pattern.finditer(body):
        if m.group("invalid") is not None:
            raise TemplateError(f"stray '$' at offset {m.start()}; write '$$' for a literal dollar")
        name = m.group("braced")
        if name and name not in names:
            names.append(name)
    return tuple(names)


@dataclass(frozen=True)
class PromptTemplate:
    id: str
    task: str
    stage: str
    language: str
    body: str
    expected_answer_form: str
    slots: tuple[str, ...]
    element_slot: str | None = None

    def __post_init__(self) -> None:
        found = _slots_in(self.body)
        if set(found) != set(self.slots):
            raise TemplateError(
                f"{self.id}: body uses slots {sorted(found)} but declares {sorted(self.slots)}"
            )
        if self.expected_answer_form not in ANSWER_FORMS:
            raise TemplateError(f"{self.id}: unknown answer form {self.expected_answer_form!r}")
        if self.stage == "I" and not {"sentence", "types"} <= set(self.slots):
            raise TemplateError(f"{self.id}: stage I templates need 'sentence' and 'types' slots")
        if self.stage == "II":
            if "sentence" in self.slots:
                raise TemplateError(f"{self.id}: stage II questions rely on dialogue context, not a sentence slot")
            if self.element_slot not in self.slots:
                raise TemplateError(f"{self.id}: element_slot {self.element_slot!r} is not declared")

    def fill(self, bindings: Mapping[str, str]) -> str:
        missing = [s for s in self.slots if s not in bindings]
        if missing:
            raise SlotMissing(f"{self.id}: no binding for {missing}")
        return _SlotTemplate(self.body).substitute({s: bindings[s] for s in self.slots})


@dataclass(frozen=True)
class RenderedPrompt:
    template_id: str
    text: str
    expected_answer_form: str
    stage: str = "I"
    element_type: str | None = None
    # structured view of what was asked; read by the gold oracle
    meta: Mapping = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self) -> None:
        if not self.text:
            raise TemplateError("rendered prompt is empty")


def format_inventory(names: Iterable[str]) -> str:
    """``['a', 'b']``: the bracketed list shape used inside prompts."""
    return "[" + ", ".join(f"'{n}'" for n in names) + "]"


def format_header(columns: Iterable[str]) -> str:
    return "(" + ", ".join(f"'{c}'" for c in columns) + ")"


def format_group(cells: Iterable[str]) -> str:
    return "(" + ", ".join(cells) + ")"


def render_stage1(template: PromptTemplate, schema, sentence: str) -> RenderedPrompt:
    if template.stage != "I":
        raise TemplateError(f"{template.id} is a stage {template.stage} template")
    if template.task != schema.task:
        raise TaskMismatch(f"{template.id} is for {template.task}, schema is {schema.task}")
    if not sentence:
        raise SlotMissing("sentence must be non-empty")
    types = schema.type_names
    text = template.fill({"sentence": sentence, "types": format_inventory(types)})
    return RenderedPrompt(
        template_id=template.id,
        text=text,
        expected_answer_form=template.expected_answer_form,
        stage="I",
        meta={"kind": "stage1", "types": tuple(types)},
    )


def render_stage2(
    template: PromptTemplate,
    element_type: str,
    bindings: Mapping[str, str] | None = None,
    meta: Mapping | None = None,
) -> RenderedPrompt:
    if template.stage != "II":
        raise TemplateError(f"{template.id} is a stage {template.stage} template")
    full = dict(bindings or {})
    full[template.element_slot] = element_type
    text = template.fill(full)
    return RenderedPrompt(
        template_id=template.id,
        text=text,
        expected_answer_form=template.expected_answer_form,
        stage="II",
        element_type=element_type,
        meta=dict(meta or {}),
    )


_TEMPLATE_FIELDS = {"id", "task", "stage", "language", "answer_form", "slots", "element_slot", "body"}


class TemplateRegistry:
    """Immutable id -> template mapping."""

    def __init__(self, templates: Iterable[PromptTemplate] = ()):
        self._by_id: dict[str, PromptTemplate] = {}
        for t in templates:
            if t.id in self._by_id:
                raise TemplateError(f"duplicate template id {t.id!r}")
            self._by_id[t.id] = t

    @classmethod
    def from_files(cls, paths: Iterable[str | Path]) -> "TemplateRegistry":
        templates = []
        for path in paths:
            doc = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
            for item in doc.get("templates", []):
                unknown = set(item) - _TEMPLATE_FIELDS
                if unknown:
                    raise TemplateError(f"{path}: unknown template fields {sorted(unknown)}")
                templates.append(
                    PromptTemplate(
                        id=item["id"],
                        task=item["task"],
                        stage=item["stage"],
                        language=item["language"],
                        body=item["body"],
                        expected_answer_form=item["answer_form"],
                        slots=tuple(item["slots"]),
                        element_slot=item.get("element_slot"),
                    )
                )
        return cls(templates)

    def __contains__(self, template_id: str) -> bool:
        return template_id in self._by_id

    def __getitem__(self, template_id: str) -> PromptTemplate:
        try:
            return self._by_id[template_id]
        except KeyError:
            raise TemplateError(f"no template {template_id!r}") from None

    def __iter__(self):
        return iter(self._by_id.values())

    def for_schema(self, schema, stage: str) -> PromptTemplate:
        """The stage template a schema uses: its override, else the default id."""
        slot = {"I": "stage1", "II": "stage2"}[stage]
        tid = schema.template_for(slot) or f"{schema.task.lower()}.{slot}.{schema.language.lower()}"
        return self[tid]


@lru_cache(maxsize=1)
def default_registry() -> TemplateRegistry:
    return TemplateRegistry.from_files(sorted(TEMPLATE_DIR.glob("*.yaml")))
