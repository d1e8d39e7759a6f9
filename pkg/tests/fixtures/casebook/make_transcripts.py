"""Regenerate transcripts.jsonl from the scripted replies below.

Run from the repository root: ``python3 tests/fixtures/casebook/make_transcripts.py``.
Each sample's replies are consumed in question order; the resulting store is
keyed exactly as a live recording would be.
"""

import dataclasses
from pathlib import Path

from chatextract.chat import TranscriptStore
from chatextract.datasets import load_dataset
from chatextract.pipeline import extract
from chatextract.schema import builtin_schema

HERE = Path(__file__).parent
FINGERPRINT = "chatgpt-2023-01|temperature=0"

REPLIES = {
    "case-chirac": [
        "(person-nationality)",
        "(Jacques Chirac, France)",
    ],
    "case-delhi": [
        "(location-located_in, administrative_division-country)",
        "(Delhi, India)",
        "(Delhi, India)",
    ],
    "case-google": [
        "(person-company)",
        "| person | organization |\n"
        "| --- | --- |\n"
        "| George Reyes | Google |\n"
        "| Shona Brown | Google |\n"
        "| David Drummond | Google |\n"
        "| Jonathan Rosenberg | Google |",
    ],
    "case-japan": [
        "LOC, MISC",
        '["Japan", "LOC"], ["Syrian", "LOC"]',
        "none",
    ],
    "case-sheffield": [
        "LOC, MISC, ORG",
        "['Bellerive Oval', 'LOC']",
        "['Sheffield Shield', 'MISC']",
        "['Tasmania', 'ORG'], ['Victoria', 'ORG']",
    ],
    "case-saddam": [
        "Life:Die",
        '"arguments": [\n'
        "{\n"
        '"role": "Victim",\n'
        '"argument": "over a million of his own citizens"\n'
        "},\n"
        "{\n"
        '    "role": "Agent",\n'
        '    "argument": "Saddam Hussein"\n'
        "}",
    ],
    "case-clinton": [
        "Life:Die",
        "| event type | argument role | argument content |\n"
        "| --- | --- | --- |\n"
        "| Life:Die | Agent | Clinton |\n"
        "| Life:Die | Victim | 19 Rangers |\n"
        "| Life:Die | Instrument | None |\n"
        "| Life:Die | Time | 3rd of October |\n"
        "| Life:Die | Time | three days later |\n"
        "| Life:Die | Place | None |",
    ],
}


class Scripted:
    fingerprint = FINGERPRINT

    def __init__(self, store):
        self.store = store

    def bind(self, sample):
        replies = iter(REPLIES[sample.id])
        store = self.store

        class Bound:
            fingerprint = FINGERPRINT

            def complete(self, conversation, prompt=None):
                reply = next(replies)
                store.append(FINGERPRINT, conversation.history(), reply)
                return reply

        return Bound()


def main() -> None:
    out = HERE / "transcripts.jsonl"
    out.unlink(missing_ok=True)
    store = TranscriptStore(out, create=True)
    backend = Scripted(store)
    runs = [
        ("re.jsonl", "nyt11", builtin_schema("nyt11")),
        # the stage I type question is asked for these NER samples
        ("ner.jsonl", "conllpp", dataclasses.replace(builtin_schema("conllpp"), skip_stage1=False)),
        ("ee.jsonl", "ace05-lines", builtin_schema("ace05")),
    ]
    for name, fmt, schema in runs:
        for sample in load_dataset(HERE / name, fmt, schema):
            result = extract(sample, schema, backend)
            assert not result.failed, result.error
    print(f"{len(store)} exchanges -> {out}")


if __name__ == "__main__":
    main()
