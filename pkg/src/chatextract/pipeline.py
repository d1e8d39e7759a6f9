"""Two-stage multi-turn extraction.

Every sample gets one fresh :class:`~chatextract.chat.Conversation`. Stage I
asks which element types occur; Stage II asks one question per surviving
type in the same conversation (so the sentence need not be repeated), and
for relations with complex objects one further question per attribute.
Turn counts therefore follow closed forms:

* RE:  ``1 + |surviving relations| + sum(chain length)`` over chained
  relations that produced at least one pair;
* NER: ``|inventory|`` with Stage I skipped, else ``1 + |surviving types|``;
* EE:  ``1 + |predicted event types|``.
"""

from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Sequence

from .chat import Conversation, ask, transcript_key
from .errors import ChatExtractError, ConfigError, ParseError
from .model import (
    PAYLOAD_FIELD,
    Entity,
    EventRecord,
    Sample,
    Triple,
    elements_from_dicts,
    elements_to_dicts,
)
from .parse import (
    NoneAnswer,
    parse_entity_list,
    parse_event_types,
    parse_pair_table,
    parse_role_table,
    parse_type_list,
)
from .schema import TaskSchema
from .templates import (
    TemplateRegistry,
    default_registry,
    format_group,
    format_header,
    format_inventory,
    render_stage1,
    render_stage2,
)
from .text import clean_cell

logger = logging.getLogger(__name__)


@dataclass
class ExtractionResult:
    sample_id: str
    task: str
    triples: frozenset[Triple] | None = None
    entities: frozenset[Entity] | None = None
    events: frozenset[EventRecord] | None = None
    turns_used: int = 0
    warnings: list[str] = field(default_factory=list)
    transcript_ref: str | None = None
    error: str | None = None

    @property
    def elements(self) -> frozenset:
        return getattr(self, PAYLOAD_FIELD[self.task]) or frozenset()

    @property
    def failed(self) -> bool:
        return self.error is not None

    def to_record(self) -> dict[str, Any]:
        rec: dict[str, Any] = {
            "sample_id": self.sample_id,
            "task": self.task,
            PAYLOAD_FIELD[self.task]: elements_to_dicts(self.elements),
            "turns_used": self.turns_used,
            "warnings": list(self.warnings),
            "transcript_ref": self.transcript_ref,
            "error": self.error,
        }
        return rec

    @classmethod
    def from_record(cls, rec: dict[str, Any]) -> "ExtractionResult":
        task = rec["task"]
        payload = elements_from_dicts(task, rec.get(PAYLOAD_FIELD[task], []))
        return cls(
            sample_id=rec["sample_id"],
            task=task,
            **{PAYLOAD_FIELD[task]: payload},
            turns_used=rec.get("turns_used", 0),
            warnings=list(rec.get("warnings", [])),
            transcript_ref=rec.get("transcript_ref"),
            error=rec.get("error"),
        )


class _Run:
    """State for one sample: its conversation, turn counter and warnings."""

    def __init__(self, sample: Sample, schema: TaskSchema, backend, registry, span_check: bool):
        self.sample = sample
        self.schema = schema
        self.backend = backend.bind(sample)
        self.registry = registry
        self.span_check = span_check
        self.conversation = Conversation(id=sample.id)
        self.warnings: list[str] = []
        self.turns = 0

    def ask(self, prompt) -> str:
        reply = ask(self.conversation, prompt, self.backend)
        self.turns += 1
        return reply

    def note(self, answer) -> None:
        self.warnings.extend(f"turn {self.turns}: {w}" for w in answer.warnings)

    def keep(self, value: str) -> bool:
        if not self.span_check or clean_cell(value) in self.sample.sentence:
            return True
        self.warnings.append(f"turn {self.turns}: dropped span not found in sentence: {value!r}")
        return False

    def stage1(self, parser) -> list[str]:
        prompt = render_stage1(self.registry.for_schema(self.schema, "I"), self.schema, self.sample.sentence)
        answer = parser(self.ask(prompt), self.schema.type_names)
        self.note(answer)
        return [] if isinstance(answer, NoneAnswer) else list(answer.names)

    def result(self, payload: list) -> ExtractionResult:
        unique = frozenset(payload)
        if len(unique) < len(payload):
            self.warnings.append(f"collapsed {len(payload) - len(unique)} duplicate element(s)")
        ref = None
        if self.conversation.messages:
            ref = transcript_key(self.backend.fingerprint, self.conversation.history()[:-1])
        return ExtractionResult(
            sample_id=self.sample.id,
            task=self.schema.task,
            **{PAYLOAD_FIELD[self.schema.task]: unique},
            turns_used=self.turns,
            warnings=self.warnings,
            transcript_ref=ref,
        )


def _check_task(schema: TaskSchema, task: str) -> None:
    if schema.task != task:
        raise ConfigError(f"schema is for {schema.task}, extractor is for {task}")


def extract_triples(
    sample: Sample,
    schema: TaskSchema,
    backend,
    registry: TemplateRegistry | None = None,
    span_check: bool = False,
) -> ExtractionResult:
    _check_task(schema, "RE")
    run = _Run(sample, schema, backend, registry or default_registry(), span_check)
    relations = run.stage1(parse_type_list)
    template = run.registry.for_schema(schema, "II")
    triples: list[Triple] = []
    for name in relations:
        rel = schema.lookup(name)
        header = (rel.subject_type, rel.object_type)
        prompt = render_stage2(
            template,
            rel.name,
            {"header": format_header(header)},
            meta={"kind": "pairs", "relation": rel.name, "header": header},
        )
        answer = parse_pair_table(run.ask(prompt), header)
        run.note(answer)
        if isinstance(answer, NoneAnswer):
            continue
        turn = run.turns
        pairs: list[tuple[str, str]] = []
        for s, o in answer.rows:
            if (s, o) in pairs:
                run.warnings.append(f"turn {turn}: collapsed duplicate row ({s!r}, {o!r})")
            elif run.keep(s) and run.keep(o):
                pairs.append((s, o))
        attributes: dict[tuple[str, str], dict[str, str]] = {p: {} for p in pairs}
        if pairs:
            for spec in rel.object_chain:
                _ask_attribute(run, schema, rel, spec, pairs, attributes)
        for s, o in pairs:
            triples.append(
                Triple(s, rel.name, o, attributes[(s, o)], rel.subject_type, rel.object_type, turn=turn)
            )
    return run.result(triples)


def _ask_attribute(run: _Run, schema, rel, spec, pairs, attributes) -> None:
    template = run.registry[spec.question_template_id]
    header = (rel.object_type, spec.display_name)
    prompt = render_stage2(
        template,
        spec.display_name,
        {
            "relation": rel.name,
            "groups": ", ".join(format_group(p) for p in pairs),
            "header": format_header(header),
        },
        meta={
            "kind": "attribute",
            "relation": rel.name,
            "attribute": spec.attribute_name,
            "groups": tuple(pairs),
            "header": header,
        },
    )
    try:
        answer = parse_pair_table(run.ask(prompt), header)
    except ParseError as exc:
        # a missing attribute leaves the triple without it
        run.warnings.append(f"turn {run.turns}: attribute {spec.attribute_name!r} unreadable: {exc}")
        return
    run.note(answer)
    if isinstance(answer, NoneAnswer):
        return
    for obj, value in answer.rows:
        targets = [p for p in pairs if p[1] == obj]
        if not targets:
            run.warnings.append(f"turn {run.turns}: attribute row for unknown object {obj!r}")
            continue
        for p in targets:
            attributes[p].setdefault(spec.attribute_name, value)


def extract_entities(
    sample: Sample,
    schema: TaskSchema,
    backend,
    registry: TemplateRegistry | None = None,
    span_check: bool = False,
) -> ExtractionResult:
    _check_task(schema, "NER")
    run = _Run(sample, schema, backend, registry or default_registry(), span_check)
    if schema.skip_stage1:
        types = list(schema.entities.types)
    else:
        types = run.stage1(parse_type_list)
    template = run.registry.for_schema(schema, "II")
    inventory = list(schema.entities.types)
    entities: list[Entity] = []
    for etype in types:
        prompt = render_stage2(template, etype, meta={"kind": "entities", "entity_type": etype})
        answer = parse_entity_list(run.ask(prompt), inventory)
        run.note(answer)
        if isinstance(answer, NoneAnswer):
            continue
        entities.extend(Entity(n, t, turn=run.turns) for n, t in answer.items if run.keep(n))
    return run.result(entities)


def extract_events(
    sample: Sample,
    schema: TaskSchema,
    backend,
    registry: TemplateRegistry | None = None,
    span_check: bool = False,
) -> ExtractionResult:
    _check_task(schema, "EE")
    run = _Run(sample, schema, backend, registry or default_registry(), span_check)
    event_types = run.stage1(parse_event_types)
    template = run.registry.for_schema(schema, "II")
    events: list[EventRecord] = []
    for name in event_types:
        spec = schema.lookup(name)
        prompt = render_stage2(
            template,
            spec.name,
            {"roles": format_inventory(spec.roles)},
            meta={"kind": "roles", "event_type": spec.name, "roles": spec.roles},
        )
        answer = parse_role_table(run.ask(prompt), spec.name, spec.roles)
        run.note(answer)
        rows = () if isinstance(answer, NoneAnswer) else answer.rows
        args = [(role, content) for _, role, content in rows if run.keep(content)]
        if len(set(args)) < len(args):
            run.warnings.append(f"turn {run.turns}: collapsed duplicate arguments")
        # all rows for one event type form one record
        events.append(EventRecord(spec.name, tuple(args), turn=run.turns))
    return run.result(events)


EXTRACTORS = {"RE": extract_triples, "NER": extract_entities, "EE": extract_events}


def extract(sample: Sample, schema: TaskSchema, backend, **kw) -> ExtractionResult:
    """Run the task's extractor; any error becomes a failed-sample record."""
    try:
        return EXTRACTORS[schema.task](sample, schema, backend, **kw)
    except ConfigError:
        raise
    except ChatExtractError as exc:
        logger.info("sample %s failed: %s", sample.id, exc)
        return ExtractionResult(
            sample_id=sample.id,
            task=schema.task,
            **{PAYLOAD_FIELD[schema.task]: frozenset()},
            error=f"{type(exc).__name__}: {exc}",
        )


@dataclass
class BatchReport:
    task: str
    results: list[ExtractionResult]
    wall_time: float = 0.0
    request_count: int = 0

    @property
    def failures(self) -> list[ExtractionResult]:
        return [r for r in self.results if r.failed]

    @property
    def total_turns(self) -> int:
        return sum(r.turns_used for r in self.results)

    def summary(self) -> dict[str, Any]:
        return {
            "summary": True,
            "task": self.task,
            "samples": len(self.results),
            "failures": len(self.failures),
            "failure_kinds": sorted({r.error.split(":")[0] for r in self.failures}),
            "warnings": sum(len(r.warnings) for r in self.results),
            "turns": self.total_turns,
            "requests": self.request_count,
            "wall_time": round(self.wall_time, 3),
        }

    def to_jsonl(self, include_run_stats: bool = True) -> str:
        """One line per result plus a summary line.

        With ``include_run_stats=False`` the wall time and request count are
        left out, so a live run and its replay serialize identically.
        """
        lines = [json.dumps(r.to_record(), ensure_ascii=False, sort_keys=True) for r in self.results]
        summary = self.summary()
        if not include_run_stats:
            del summary["wall_time"], summary["requests"]
        lines.append(json.dumps(summary, ensure_ascii=False, sort_keys=True))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text: str) -> "BatchReport":
        results = []
        task = None
        wall = 0.0
        requests = 0
        for line in text.splitlines():
            if not line.strip():
                continue
            rec = json.loads(line)
            if rec.get("summary"):
                task = rec["task"]
                wall = rec.get("wall_time", 0.0)
                requests = rec.get("requests", 0)
                continue
            results.append(ExtractionResult.from_record(rec))
        if task is None:
            task = results[0].task if results else "RE"
        return cls(task, results, wall, requests)


def run_batch(
    samples: Sequence[Sample],
    schema: TaskSchema,
    backend,
    *,
    workers: int = 1,
    registry: TemplateRegistry | None = None,
    span_check: bool = False,
    clock=None,
) -> BatchReport:
    """Extract every sample with bounded parallelism, preserving input order."""
    if not samples:
        raise ConfigError("no samples to run")
    if workers < 1:
        raise ConfigError("workers must be >= 1")
    registry = registry or default_registry()
    timer = clock.monotonic if clock is not None else time.monotonic
    start = timer()

    def one(sample: Sample) -> ExtractionResult:
        return extract(sample, schema, backend, registry=registry, span_check=span_check)

    if workers == 1:
        results = [one(s) for s in samples]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, samples))
    return BatchReport(
        task=schema.task,
        results=results,
        wall_time=timer() - start,
        request_count=getattr(backend, "request_count", 0),
    )
