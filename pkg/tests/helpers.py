"""Random schemas and gold annotations shared by the property and acceptance suites."""

from __future__ import annotations

import random
from pathlib import Path

from chatextract.model import Entity, EventRecord, GoldAnnotation, Sample, Triple
from chatextract.schema import TaskSchema, schema_from_dict

FIXTURES = Path(__file__).parent / "fixtures"
CASEBOOK = FIXTURES / "casebook"
PROMPTS = FIXTURES / "prompts"

# mentions chosen to stress quoting and punctuation handling in replies
EN_NAMES = [
    "Paris", "New York", "St. Louis", "Smith, John", "Apple Inc.", "O'Brien",
    "AT&T", "Lake (North)", "U.S.", "the 3rd of October", "Shona Brown",
    "Jacques Chirac", "Bellerive Oval", "$ 250,000", "50%", "C-3PO", "[draft]",
    "Mr. Smith", "Delhi", "India", "Google", "Victoria", "a;b", "x | y",
]
ZH_NAMES = ["北京", "周杰伦", "《七里香》", "2004年", "中国", "上海大学", "李白", "“长江”", "三国"]
WORDS = ["alpha", "beta", "gamma", "delta", "omega", "kappa", "sigma", "theta"]


def mention(rng: random.Random, language: str = "EN") -> str:
    pool = ZH_NAMES if language == "ZH" else EN_NAMES
    if rng.random() < 0.6:
        return rng.choice(pool)
    if language == "ZH":
        return "".join(rng.choice("甲乙丙丁戊己庚辛") for _ in range(rng.randint(2, 4)))
    return " ".join(rng.choice(WORDS).title() for _ in range(rng.randint(1, 3)))


def sentence_for(mentions, language: str = "EN") -> str:
    sep = "，" if language == "ZH" else " and "
    return (sep.join(mentions) or "nothing here") + ("。" if language == "ZH" else ".")


# --- schemas -------------------------------------------------------------------

def random_re_schema(rng: random.Random, language: str = "EN", inverse: bool = False) -> TaskSchema:
    n = rng.randint(1, 6)
    tmpl = f"re.attribute.{language.lower()}"
    relations = []
    for i in range(n):
        rel = {"name": f"rel-{i}", "subject_type": rng.choice(["person", "org"]), "object_type": f"type{i}"}
        k = rng.choice([0, 0, 1, 2, 3])
        if k:
            rel["object_chain"] = [
                {"attribute": f"attr{j}", "template": tmpl, "label": f"label {j}"} for j in range(k)
            ]
        relations.append(rel)
    doc = {"task": "RE", "language": language, "relations": relations}
    if inverse:
        doc["inverse_relations"] = [["rel-inv", "rel-0"]]
    return schema_from_dict(doc)


def random_ner_schema(rng: random.Random, skip: bool) -> TaskSchema:
    types = rng.sample(["LOC", "PER", "ORG", "MISC", "DATE", "EVENT"], rng.randint(1, 6))
    return schema_from_dict({"task": "NER", "language": "EN", "entities": types, "skip_stage1": skip})


def random_ee_schema(rng: random.Random) -> TaskSchema:
    events = []
    for i in range(rng.randint(1, 5)):
        roles = rng.sample(["Agent", "Victim", "Time", "Place", "Instrument", "Target"], rng.randint(1, 5))
        events.append({"name": f"Kind:Sub-{i}", "roles": roles})
    return schema_from_dict({"task": "EE", "language": "EN", "events": events})


# --- gold ------------------------------------------------------------------------

def random_re_gold(rng: random.Random, schema: TaskSchema, nonempty: bool = True) -> Sample:
    triples = []
    chosen = rng.sample(schema.relations, rng.randint(1 if nonempty else 0, len(schema.relations)))
    inverse_names = {b: a for a, b in schema.inverse_relations}
    for rel in chosen:
        objects_used = set()
        for _ in range(rng.randint(1, 3)):
            s, o = mention(rng, schema.language), mention(rng, schema.language)
            if rel.object_chain:
                # attribute answers are keyed by object, so objects stay unique
                if o in objects_used:
                    continue
                objects_used.add(o)
            attrs = {
                a.attribute_name: mention(rng, schema.language)
                for a in rel.object_chain
                if rng.random() < 0.8
            }
            if rel.name in inverse_names and rng.random() < 0.5:
                triples.append(Triple(o, inverse_names[rel.name], s, attrs, rel.object_type, rel.subject_type))
            else:
                triples.append(Triple(s, rel.name, o, attrs, rel.subject_type, rel.object_type))
    names = [x for t in triples for x in (t.subject, t.object)]
    return Sample(f"re-{rng.random():.12f}", sentence_for(names, schema.language), GoldAnnotation.of("RE", triples))


def random_ner_gold(rng: random.Random, schema: TaskSchema, nonempty: bool = True) -> Sample:
    types = schema.entities.types
    entities = {
        Entity(mention(rng), rng.choice(types))
        for _ in range(rng.randint(1 if nonempty else 0, 6))
    }
    return Sample(
        f"ner-{rng.random():.12f}",
        sentence_for([e.name for e in entities]),
        GoldAnnotation.of("NER", entities),
    )


def random_ee_gold(rng: random.Random, schema: TaskSchema, nonempty: bool = True) -> Sample:
    events = []
    for spec in rng.sample(schema.events, rng.randint(1, len(schema.events))):
        lo = 1 if nonempty else 0
        args = [(rng.choice(spec.roles), mention(rng)) for _ in range(rng.randint(lo, 4))]
        events.append(EventRecord(spec.name, tuple(args)))
    contents = [c for e in events for _, c in e.arguments]
    return Sample(f"ee-{rng.random():.12f}", sentence_for(contents), GoldAnnotation.of("EE", events))


def expected_turns(schema: TaskSchema, sample: Sample) -> int:
    """Closed-form turn count for a gold-oracle run."""
    gold = sample.gold
    if schema.task == "NER":
        if schema.skip_stage1:
            return len(schema.entities.types)
        return 1 + len({e.type for e in gold.entities})
    if schema.task == "EE":
        return 1 + len({e.event_type for e in gold.events})
    inventory = set(schema.type_names)
    relations = {t.relation if t.relation in inventory else schema.inverse_of(t.relation) for t in gold.triples}
    chained = sum(len(schema.lookup(r).object_chain) for r in relations)
    return 1 + len(relations) + chained
