"""Task schemas: the closed type inventories a run extracts against.

Schemas live in YAML files (see ``docs/schema-format.md``). A schema is
immutable once loaded and may be shared between worker threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .errors import InvalidSchema, MalformedSchema, UnknownType, UnresolvedTemplate
from .text import canonicalize

TASKS = ("RE", "NER", "EE")
LANGUAGES = ("EN", "ZH")


@dataclass(frozen=True)
class AttributeSpec:
    attribute_name: str
    question_template_id: str
    label: str | None = None

    @property
    def display_name(self) -> str:
        return self.label or self.attribute_name


@dataclass(frozen=True)
class RelationType:
    name: str
    subject_type: str
    object_type: str
    object_chain: tuple[AttributeSpec, ...] = ()

    @property
    def is_complex(self) -> bool:
        return bool(self.object_chain)


@dataclass(frozen=True)
class EntityTypeInventory:
    types: tuple[str, ...]


@dataclass(frozen=True)
class EventTypeSpec:
    name: str
    roles: tuple[str, ...]


@dataclass(frozen=True)
class TaskSchema:
    task: str
    language: str
    relations: tuple[RelationType, ...] | None = None
    entities: EntityTypeInventory | None = None
    events: tuple[EventTypeSpec, ...] | None = None
    skip_stage1: bool = False
    inverse_relations: tuple[tuple[str, str], ...] = ()
    aliases: tuple[tuple[str, str], ...] = ()
    templates: tuple[tuple[str, str], ...] = ()
    name: str | None = None
    _index: dict = field(default=None, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self) -> None:
        _validate(self)
        index: dict[str, Any] = {}
        for rel in self.relations or ():
            index[canonicalize(rel.name)] = rel
        for ev in self.events or ():
            index[canonicalize(ev.name)] = ev
        for t in self.entities.types if self.entities else ():
            index[canonicalize(t)] = t
        object.__setattr__(self, "_index", index)

    @property
    def type_names(self) -> list[str]:
        """The Stage I inventory for this task, in schema order."""
        if self.task == "RE":
            return [r.name for r in self.relations]
        if self.task == "NER":
            return list(self.entities.types)
        return [e.name for e in self.events]

    def lookup(self, name: str):
        """Return the inventory element whose canonical name matches."""
        try:
            return self._index[canonicalize(name)]
        except KeyError:
            raise UnknownType(f"{name!r} is not in the {self.task} inventory") from None

    def lookup_event(self, name: str) -> EventTypeSpec:
        if self.task != "EE":
            raise UnknownType(f"schema task is {self.task}, not EE")
        return self.lookup(name)

    def inverse_of(self, relation: str) -> str | None:
        key = canonicalize(relation)
        for a, b in self.inverse_relations:
            if canonicalize(a) == key:
                return b
            if canonicalize(b) == key:
                return a
        return None

    def resolve_label(self, label: str) -> str:
        """Map a dataset label onto a schema name, honouring declared aliases
        and inverse relation names. Raises :class:`UnknownType`."""
        key = canonicalize(label)
        for alias, target in self.aliases:
            if canonicalize(alias) == key:
                label, key = target, canonicalize(target)
                break
        if key in self._index:
            found = self._index[key]
            return found if isinstance(found, str) else found.name
        for a, b in self.inverse_relations:
            for name in (a, b):
                if canonicalize(name) == key:
                    return name
        raise UnknownType(f"{label!r} is neither a schema name nor a declared alias")

    def template_for(self, slot: str) -> str | None:
        return dict(self.templates).get(slot)


def lookup_relation(schema: TaskSchema, name: str) -> RelationType:
    if schema.task != "RE":
        raise UnknownType(f"schema task is {schema.task}, not RE")
    return schema.lookup(name)


def _dupes(names) -> list[str]:
    seen: set[str] = set()
    out = []
    for n in names:
        k = canonicalize(n)
        if k in seen:
            out.append(n)
        seen.add(k)
    return out


def _validate(s: TaskSchema) -> None:
    if s.task not in TASKS:
        raise InvalidSchema("task-enum", f"task must be one of {TASKS}, got {s.task!r}")
    if s.language not in LANGUAGES:
        raise InvalidSchema("language-enum", f"language must be one of {LANGUAGES}, got {s.language!r}")
    populated = {
        "RE": s.relations is not None,
        "NER": s.entities is not None,
        "EE": s.events is not None,
    }
    if not populated[s.task] or sum(populated.values()) != 1:
        raise InvalidSchema(
            "task-inventory", f"a {s.task} schema must populate exactly the {s.task} inventory"
        )
    if s.skip_stage1 and s.task != "NER":
        raise InvalidSchema("skip-stage1-ner-only", "skip_stage1 is only meaningful for NER")

    if s.task == "RE":
        if not s.relations:
            raise InvalidSchema("relations-nonempty")
        if d := _dupes(r.name for r in s.relations):
            raise InvalidSchema("relation-name-unique", f"duplicate relation {d[0]!r}")
        for rel in s.relations:
            if d := _dupes(a.attribute_name for a in rel.object_chain):
                raise InvalidSchema(
                    "chain-attribute-distinct", f"{rel.name}: attribute {d[0]!r} repeated"
                )
        names = {canonicalize(r.name) for r in s.relations}
        for pair in s.inverse_relations:
            if len(pair) != 2 or not ({canonicalize(p) for p in pair} & names):
                raise InvalidSchema(
                    "inverse-relation-known", f"{pair!r} must name two relations, one in the inventory"
                )
    elif s.inverse_relations:
        raise InvalidSchema("inverse-relation-known", "inverse_relations only apply to RE schemas")

    if s.task == "NER":
        if not s.entities.types:
            raise InvalidSchema("entities-nonempty")
        if d := _dupes(s.entities.types):
            raise InvalidSchema("entities-unique", f"duplicate entity type {d[0]!r}")

    if s.task == "EE":
        if not s.events:
            raise InvalidSchema("events-nonempty")
        if d := _dupes(e.name for e in s.events):
            raise InvalidSchema("event-name-unique", f"duplicate event type {d[0]!r}")
        for ev in s.events:
            if not ev.roles:
                raise InvalidSchema("event-roles-nonempty", ev.name)
            if d := _dupes(ev.roles):
                raise InvalidSchema("event-roles-unique", f"{ev.name}: role {d[0]!r} repeated")


# --- file format -----------------------------------------------------------

_TOP_FIELDS = {
    "name", "task", "language", "skip_stage1", "relations", "entities", "events",
    "inverse_relations", "aliases", "templates",
}
_RELATION_FIELDS = {"name", "subject_type", "object_type", "object_chain"}
_ATTRIBUTE_FIELDS = {"attribute", "template", "label"}
_EVENT_FIELDS = {"name", "roles"}
_TEMPLATE_SLOTS = {"stage1", "stage2", "attribute"}


def _check_fields(where: str, doc: Any, allowed: set[str], required: set[str]) -> None:
    if not isinstance(doc, dict):
        raise InvalidSchema("structure", f"{where} must be a mapping")
    unknown = set(doc) - allowed
    if unknown:
        raise InvalidSchema("unknown-field", f"{where}: {sorted(unknown)}")
    missing = required - set(doc)
    if missing:
        raise InvalidSchema("required-field", f"{where}: missing {sorted(missing)}")


def _str_list(where: str, value: Any) -> tuple[str, ...]:
    if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
        raise InvalidSchema("structure", f"{where} must be a list of strings")
    return tuple(value)


def schema_from_dict(doc: Any, registry=None) -> TaskSchema:
    _check_fields("schema", doc, _TOP_FIELDS, {"task", "language"})
    relations = entities = events = None

    if "relations" in doc:
        if not isinstance(doc["relations"], list):
            raise InvalidSchema("structure", "relations must be a list")
        rels = []
        for i, r in enumerate(doc["relations"]):
            _check_fields(f"relations[{i}]", r, _RELATION_FIELDS, {"name", "subject_type", "object_type"})
            chain = []
            for j, a in enumerate(r.get("object_chain") or []):
                _check_fields(f"relations[{i}].object_chain[{j}]", a, _ATTRIBUTE_FIELDS, {"attribute", "template"})
                chain.append(AttributeSpec(str(a["attribute"]), str(a["template"]), a.get("label")))
            rels.append(RelationType(str(r["name"]), str(r["subject_type"]), str(r["object_type"]), tuple(chain)))
        relations = tuple(rels)
    if "entities" in doc:
        entities = EntityTypeInventory(_str_list("entities", doc["entities"]))
    if "events" in doc:
        if not isinstance(doc["events"], list):
            raise InvalidSchema("structure", "events must be a list")
        evs = []
        for i, e in enumerate(doc["events"]):
            _check_fields(f"events[{i}]", e, _EVENT_FIELDS, {"name", "roles"})
            evs.append(EventTypeSpec(str(e["name"]), _str_list(f"events[{i}].roles", e["roles"])))
        events = tuple(evs)

    inverse = []
    for pair in doc.get("inverse_relations") or []:
        inverse.append(_str_list("inverse_relations[]", pair))
    aliases = doc.get("aliases") or {}
    if not isinstance(aliases, dict):
        raise InvalidSchema("structure", "aliases must be a mapping")
    templates = doc.get("templates") or {}
    _check_fields("templates", templates, _TEMPLATE_SLOTS, set())

    skip = doc.get("skip_stage1", False)
    if not isinstance(skip, bool):
        raise InvalidSchema("structure", "skip_stage1 must be a boolean")

    schema = TaskSchema(
        task=str(doc["task"]).upper(),
        language=str(doc["language"]).upper(),
        relations=relations,
        entities=entities,
        events=events,
        skip_stage1=skip,
        inverse_relations=tuple(tuple(p) for p in inverse),
        aliases=tuple((str(k), str(v)) for k, v in aliases.items()),
        templates=tuple((str(k), str(v)) for k, v in templates.items()),
        name=doc.get("name"),
    )
    for alias, target in schema.aliases:
        try:
            schema.resolve_label(target)
        except UnknownType:
            raise InvalidSchema("alias-target-known", f"{alias!r} -> {target!r}") from None
    _resolve_templates(schema, registry)
    return schema


def _resolve_templates(schema: TaskSchema, registry) -> None:
    if registry is None:
        from .templates import default_registry

        registry = default_registry()
    wanted = [tid for _, tid in schema.templates]
    for rel in schema.relations or ():
        wanted.extend(a.question_template_id for a in rel.object_chain)
    for tid in wanted:
        if tid not in registry:
            raise UnresolvedTemplate(f"template {tid!r} is not registered")


def load_schema(path: str | Path, registry=None) -> TaskSchema:
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise MalformedSchema(f"{path}: {exc}") from exc
    return schema_from_dict(doc, registry)


def schema_to_dict(schema: TaskSchema) -> dict:
    doc: dict[str, Any] = {}
    if schema.name is not None:
        doc["name"] = schema.name
    doc["task"] = schema.task
    doc["language"] = schema.language
    if schema.skip_stage1:
        doc["skip_stage1"] = True
    if schema.relations is not None:
        rels = []
        for r in schema.relations:
            item: dict[str, Any] = {"name": r.name, "subject_type": r.subject_type, "object_type": r.object_type}
            if r.object_chain:
                item["object_chain"] = [
                    {"attribute": a.attribute_name, "template": a.question_template_id}
                    | ({"label": a.label} if a.label else {})
                    for a in r.object_chain
                ]
            rels.append(item)
        doc["relations"] = rels
    if schema.entities is not None:
        doc["entities"] = list(schema.entities.types)
    if schema.events is not None:
        doc["events"] = [{"name": e.name, "roles": list(e.roles)} for e in schema.events]
    if schema.inverse_relations:
        doc["inverse_relations"] = [list(p) for p in schema.inverse_relations]
    if schema.aliases:
        doc["aliases"] = dict(schema.aliases)
    if schema.templates:
        doc["templates"] = dict(schema.templates)
    return doc


def serialize_schema(schema: TaskSchema) -> str:
    return yaml.safe_dump(schema_to_dict(schema), allow_unicode=True, sort_keys=False)


def builtin_schema_path(name: str) -> Path:
    return Path(__file__).parent / "data" / "schemas" / f"{name}.yaml"


def builtin_schema(name: str) -> TaskSchema:
    """Load one of the shipped benchmark schemas by file stem."""
    return load_schema(builtin_schema_path(name))
