"""Acceptance criteria 1-8, runnable offline.

Each test prints one ``criterion N: PASS|FAIL`` line (see them with ``-s``)
and enforces its time bound.
"""

import contextlib
import dataclasses
import json
import random
import time

import httpx
import pytest

import test_metrics
import test_parse
from chatextract.chat import (
    BackendConfig,
    Conversation,
    FakeClock,
    GoldOracleBackend,
    LiveBackend,
    ReplayBackend,
    TranscriptStore,
    forbid_network,
    make_backend,
)
from chatextract.datasets import load_dataset
from chatextract.errors import ArityMismatch, Unparseable
from chatextract.metrics import score, score_ner, score_re
from chatextract.model import Entity, EventRecord
from chatextract.parse import (
    EntityList,
    NoneAnswer,
    PairTable,
    TypeList,
    parse_entity_list,
    parse_pair_table,
    parse_role_table,
    parse_type_list,
)
from chatextract.pipeline import extract, run_batch
from chatextract.schema import builtin_schema
from chatextract.text import is_none_signal
from helpers import (
    CASEBOOK,
    expected_turns,
    random_ee_gold,
    random_ee_schema,
    random_ner_gold,
    random_ner_schema,
    random_re_gold,
    random_re_schema,
)

NYT = builtin_schema("nyt11")
ACE = builtin_schema("ace05")
CONLL_ASKED = dataclasses.replace(builtin_schema("conllpp"), skip_stage1=False)


@contextlib.contextmanager
def criterion(n, budget):
    start = time.perf_counter()
    try:
        yield
        elapsed = time.perf_counter() - start
        assert elapsed < budget, f"took {elapsed:.2f} s, budget {budget} s"
    except BaseException:
        print(f"\ncriterion {n}: FAIL")
        raise
    print(f"\ncriterion {n}: PASS ({elapsed:.2f} s, budget {budget} s)")


@pytest.fixture(scope="module")
def replay():
    return ReplayBackend(TranscriptStore(CASEBOOK / "transcripts.jsonl"))


def casebook_samples(name, fmt, schema):
    return {s.id: s for s in load_dataset(CASEBOOK / name, fmt, schema)}


def test_criterion_1_worked_transcripts(replay):
    with criterion(1, 1.0):
        re_ = casebook_samples("re.jsonl", "nyt11", NYT)["case-chirac"]
        ner = casebook_samples("ner.jsonl", "conllpp", CONLL_ASKED)["case-japan"]
        ee = casebook_samples("ee.jsonl", "ace05-lines", ACE)["case-saddam"]
        with forbid_network():
            r1 = extract(re_, NYT, replay)
            r2 = extract(ner, CONLL_ASKED, replay)
            r3 = extract(ee, ACE, replay)

        assert {(t.subject, t.relation, t.object) for t in r1.triples} == {
            ("Jacques Chirac", "person-nationality", "France")
        }
        assert r2.entities == {Entity("Japan", "LOC"), Entity("Syrian", "LOC")}
        m = score_ner(r2.entities, ner.gold.entities)
        assert (m.precision, m.recall, m.f1) == (0.5, 0.5, 0.5)
        assert r3.events == {EventRecord("Life:Die", (
            ("Victim", "over a million of his own citizens"),
            ("Agent", "Saddam Hussein"),
        ))}
        for regime in ("EE-entitylevel", "EE-wordlevel"):
            assert score(r3.events, ee.gold.events, regime).f1 == 1.0


def test_criterion_2_case_studies(replay):
    with criterion(2, 1.0):
        re_samples = casebook_samples("re.jsonl", "nyt11", NYT)
        ee = casebook_samples("ee.jsonl", "ace05-lines", ACE)["case-clinton"]
        with forbid_network():
            delhi = extract(re_samples["case-delhi"], NYT, replay)
            google = extract(re_samples["case-google"], NYT, replay)
            clinton = extract(ee, ACE, replay)

        assert {(t.subject, t.relation, t.object) for t in delhi.triples} == {
            ("Delhi", "location-located_in", "India"),
            ("Delhi", "administrative_division-country", "India"),
        }
        m = score_re(delhi.triples, re_samples["case-delhi"].gold.triples, "border", NYT.inverse_relations)
        assert (m.tp, m.n_gold) == (2, 2)
        without = score_re(delhi.triples, re_samples["case-delhi"].gold.triples, "border")
        assert without.tp == 1

        assert {(t.subject, t.relation, t.object) for t in google.triples} == {
            (name, "person-company", "Google")
            for name in ("George Reyes", "Shona Brown", "David Drummond", "Jonathan Rosenberg")
        }

        (event,) = clinton.events
        assert event.event_type == "Life:Die"
        assert set(event.arguments) == {
            ("Agent", "Clinton"),
            ("Victim", "19 Rangers"),
            ("Time", "3rd of October"),
            ("Time", "three days later"),
        }


def _closure_batch(rng, task):
    if task == "RE":
        if rng.random() < 0.3:
            schema = builtin_schema("duie2")
        else:
            schema = random_re_schema(rng, rng.choice(["EN", "ZH"]), inverse=rng.random() < 0.5)
        return schema, random_re_gold(rng, schema)
    if task == "NER":
        schema = random_ner_schema(rng, skip=rng.random() < 0.5)
        return schema, random_ner_gold(rng, schema)
    schema = random_ee_schema(rng)
    return schema, random_ee_gold(rng, schema)


def test_criterion_3_gold_oracle_closure():
    with criterion(3, 10.0):
        rng = random.Random(31)
        seen = {"chains": 0, "skip": 0, "ask": 0}
        for task, regimes in (("RE", ("RE-strict", "RE-border")), ("NER", ("NER-exact",)),
                              ("EE", ("EE-entitylevel", "EE-wordlevel"))):
            for _ in range(200):
                schema, sample = _closure_batch(rng, task)
                result = extract(sample, schema, GoldOracleBackend(schema))
                assert not result.failed, result.error
                assert len(result.elements) == len(sample.gold.elements)
                for regime in regimes:
                    # inverse-named gold triples come back in the declared direction
                    m = score(result.elements, sample.gold.elements, regime, schema.inverse_relations)
                    assert m.f1 == 1.0, (regime, sample.id)
                if task == "RE":
                    seen["chains"] += any(t.attributes for t in sample.gold.triples)
                if task == "NER":
                    seen["skip" if schema.skip_stage1 else "ask"] += 1
        assert all(seen.values()), seen


def test_criterion_4_metric_oracle():
    with criterion(4, 10.0):
        test_metrics.test_exact_regimes_match_brute_force_oracle()


def test_criterion_5_parser_grammar():
    with criterion(5, 10.0):
        for reply, names in test_parse.TYPE_LIST_FORMS:
            assert parse_type_list(reply, test_parse.NYT) == TypeList(names)
        for reply in test_parse.PAIR_FORMS:
            assert parse_pair_table(reply, test_parse.HEADER) == PairTable(
                test_parse.HEADER, (("Jacques Chirac", "France"),))
        for reply in test_parse.ENTITY_FORMS:
            assert parse_entity_list(reply, test_parse.CONLL) == EntityList(
                (("Japan", "LOC"), ("Syrian", "LOC")))
        test_parse.test_role_table_json_records()
        test_parse.test_role_table_pipe_rows_drop_none_content()
        test_parse.test_role_table_two_columns()

        life_die = test_parse.LIFE_DIE
        for error, call in (
            (Unparseable, lambda: parse_type_list("...", test_parse.NYT)),
            (Unparseable, lambda: parse_pair_table("I could not find anything like that", test_parse.HEADER)),
            (ArityMismatch, lambda: parse_pair_table("(a, b, c)", test_parse.HEADER)),
            (Unparseable, lambda: parse_role_table("nothing to see", "Life:Die", life_die)),
            (ArityMismatch, lambda: parse_role_table("(a, b, c, d)", "Life:Die", life_die)),
        ):
            with pytest.raises(error):
                call()

        for reply in test_parse.NONE_REPLIES:
            assert parse_type_list(reply, test_parse.NYT) == NoneAnswer()
            assert parse_pair_table(reply, test_parse.HEADER) == NoneAnswer()
            assert parse_entity_list(reply, test_parse.CONLL) == NoneAnswer()
            assert parse_role_table(reply, "Life:Die", life_die) == NoneAnswer()
        # the converse: replies that are not a none signal never come back as one
        rng = random.Random(11)
        for _ in range(1000):
            reply = test_parse.fuzz_reply(rng)
            for parse in (lambda r: parse_pair_table(r, test_parse.HEADER),
                          lambda r: parse_entity_list(r, test_parse.CONLL)):
                try:
                    answer = parse(reply)
                except (Unparseable, ArityMismatch):
                    continue
                if isinstance(answer, NoneAnswer):
                    assert is_none_signal(reply), reply

        test_parse.test_parsers_never_fabricate_text()


URL = "https://chat.example/v1/chat/completions"


def _scripted_endpoint(request):
    """A deterministic stand-in for a chat service."""
    messages = json.loads(request.content)["messages"]
    if len(messages) == 1:
        text = "(person-company, person-nationality)"
    else:
        words = [w.strip(".,") for w in messages[0]["content"].split() if w[:1].isupper()]
        text = f"({words[0]}, {words[-1]})" if len(words) > 1 else "none"
    return httpx.Response(200, json={"choices": [{"message": {"role": "assistant", "content": text}}]})


def test_criterion_6_record_replay_determinism(tmp_path, monkeypatch):
    with criterion(6, 5.0):
        monkeypatch.setenv("CHATEXTRACT_API_KEY", "sk-test")
        samples = list(load_dataset(CASEBOOK / "re.jsonl", "nyt11", NYT))
        store = tmp_path / "t.jsonl"
        config = BackendConfig(kind="live", endpoint=URL, model_name="m-1")
        recorder = make_backend(config, transport=httpx.MockTransport(_scripted_endpoint),
                                clock=FakeClock(), record_to=store)
        recorded = run_batch(samples, NYT, recorder, workers=3)
        assert recorded.request_count > 0 and not recorded.failures

        with forbid_network():
            first = run_batch(samples, NYT, ReplayBackend(TranscriptStore(store)))
            second = run_batch(samples, NYT, ReplayBackend(TranscriptStore(store)), workers=4)
        live_bytes = recorded.to_jsonl(include_run_stats=False)
        assert first.to_jsonl(include_run_stats=False) == live_bytes
        assert second.to_jsonl(include_run_stats=False) == live_bytes


def test_criterion_7_turn_accounting():
    with criterion(7, 5.0):
        rng = random.Random(77)
        for i in range(100):
            task = ("RE", "NER", "EE")[i % 3]
            schema, sample = _closure_batch(rng, task)
            result = extract(sample, schema, GoldOracleBackend(schema))
            assert result.turns_used == expected_turns(schema, sample), (task, sample.id)


def test_criterion_8_rate_limit():
    with criterion(8, 5.0):
        clock = FakeClock()
        per_minute = 120
        sent = []

        def handler(request):
            sent.append(clock.monotonic())
            return httpx.Response(200, json={"choices": [{"message": {"role": "assistant", "content": "ok"}}]})

        config = BackendConfig(kind="live", endpoint=URL, model_name="m-1", rate_limit=per_minute)
        backend = LiveBackend(config, clock=clock, transport=httpx.MockTransport(handler))
        conv = Conversation("s")
        conv.append("user", "q")
        rng = random.Random(8)
        for _ in range(10_000):
            backend.complete(conv)
            clock.advance(rng.choice([0.0, 0.0, 0.1, 0.5, 2.0]))
        assert len(sent) == 10_000
        # any window (t - 60, t] holds at most per_minute requests (1e-6 s float tolerance)
        assert all(sent[i + per_minute] - sent[i] >= 60 - 1e-6 for i in range(len(sent) - per_minute))
