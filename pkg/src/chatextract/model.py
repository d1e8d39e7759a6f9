"""Value types for samples, gold annotations and extracted elements.

All element types are frozen and hashable so results can be held in sets.
The ``turn`` field records which conversation turn produced an element; it
is provenance only and takes no part in equality.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping


def _pairs(value: Mapping[str, str] | Iterable[tuple[str, str]]) -> tuple[tuple[str, str], ...]:
    items = value.items() if isinstance(value, Mapping) else value
    return tuple(sorted((str(k), str(v)) for k, v in items))


@dataclass(frozen=True)
class Triple:
    subject: str
    relation: str
    object: str
    attributes: tuple[tuple[str, str], ...] = ()
    subject_type: str | None = None
    object_type: str | None = None
    turn: int | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "attributes", _pairs(self.attributes))

    @property
    def attribute_map(self) -> dict[str, str]:
        return dict(self.attributes)

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"subject": self.subject, "relation": self.relation, "object": self.object}
        if self.attributes:
            d["attributes"] = dict(self.attributes)
        if self.subject_type is not None:
            d["subject_type"] = self.subject_type
        if self.object_type is not None:
            d["object_type"] = self.object_type
        if self.turn is not None:
            d["turn"] = self.turn
        return d

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "Triple":
        return cls(
            d["subject"], d["relation"], d["object"], d.get("attributes") or {},
            d.get("subject_type"), d.get("object_type"), d.get("turn"),
        )


@dataclass(frozen=True)
class Entity:
    name: str
    type: str
    turn: int | None = field(default=None, compare=False)

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"name": self.name, "type": self.type}
        if self.turn is not None:
            d["turn"] = self.turn
        return d

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "Entity":
        return cls(d["name"], d["type"], d.get("turn"))


@dataclass(frozen=True)
class EventRecord:
    event_type: str
    arguments: tuple[tuple[str, str], ...] = ()
    turn: int | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        # (role, content) pairs, deduplicated; several contents per role are fine
        object.__setattr__(self, "arguments", tuple(sorted(set(map(tuple, self.arguments)))))

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {
            "event_type": self.event_type,
            "arguments": [{"role": r, "argument": c} for r, c in self.arguments],
        }
        if self.turn is not None:
            d["turn"] = self.turn
        return d

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "EventRecord":
        args = [(a["role"], a["argument"]) for a in d.get("arguments", [])]
        return cls(d["event_type"], tuple(args), d.get("turn"))


ELEMENT_TYPES = {"RE": Triple, "NER": Entity, "EE": EventRecord}
PAYLOAD_FIELD = {"RE": "triples", "NER": "entities", "EE": "events"}


@dataclass(frozen=True)
class GoldAnnotation:
    task: str
    triples: frozenset[Triple] = frozenset()
    entities: frozenset[Entity] = frozenset()
    events: frozenset[EventRecord] = frozenset()

    @property
    def elements(self) -> frozenset:
        return getattr(self, PAYLOAD_FIELD[self.task])

    @classmethod
    def of(cls, task: str, elements: Iterable) -> "GoldAnnotation":
        return cls(task, **{PAYLOAD_FIELD[task]: frozenset(elements)})


@dataclass(frozen=True)
class Sample:
    id: str
    sentence: str
    gold: GoldAnnotation | None = None

    def __post_init__(self) -> None:
        if not self.sentence:
            raise ValueError(f"sample {self.id!r} has an empty sentence")


def elements_to_dicts(elements: Iterable) -> list[dict[str, Any]]:
    """Serialise a set of elements in a stable order."""
    dicts = [e.to_dict() for e in elements]
    return sorted(dicts, key=lambda d: repr(sorted((k, v) for k, v in d.items() if k != "turn")))


def elements_from_dicts(task: str, dicts: Iterable[Mapping[str, Any]]) -> frozenset:
    cls = ELEMENT_TYPES[task]
    return frozenset(cls.from_dict(d) for d in dicts)
