import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from chatextract.datasets import bio_to_spans, load_dataset, spans_to_bio, subsample
from chatextract.errors import BadSize, MalformedRecord, UnknownLabel
from chatextract.model import Entity, EventRecord, Triple
from helpers import FIXTURES

DATA = FIXTURES / "datasets"


def test_nyt11_aliases_types_and_none_label():
    samples = load_dataset(DATA / "nyt11.jsonl", "nyt11")
    assert [s.id for s in samples] == ["n1", "n2"]
    assert samples[0].gold.triples == {Triple("Smith", "person-place_lived", "Boston", (), "person", "location")}
    assert samples[1].gold.triples == frozenset()


def test_duie2_complex_object_attributes():
    samples = load_dataset(DATA / "duie2.jsonl", "duie2")
    (award,) = samples[0].gold.triples
    assert award.attribute_map == {"inWork": "七里香", "period": "5"}
    assert (award.subject_type, award.object_type) == ("娱乐人物", "奖项")
    assert samples[1].id == "duie2-2"


def test_conllpp_bio_and_iob1():
    samples = load_dataset(DATA / "conllpp.jsonl", "conllpp")
    assert samples[0].gold.entities == {Entity("EU", "ORG"), Entity("German", "MISC"), Entity("British", "MISC")}
    assert samples[1].gold.entities == {Entity("Peter Blackburn", "PER"), Entity("New York", "LOC")}
    assert samples[0].sentence == "EU rejects German call to boycott British lamb ."


def test_msra_aliases_and_character_join():
    (sample,) = load_dataset(DATA / "msra.jsonl", "msra")
    assert sample.sentence == "周杰伦在北京大学"
    assert sample.gold.entities == {Entity("周杰伦", "PER"), Entity("北京大学", "ORG")}


def test_duee1_events():
    (sample,) = load_dataset(DATA / "duee1.jsonl", "duee1")
    assert sample.gold.events == {EventRecord("人生-死亡", (("死者", "乔丹"), ("时间", "2020年")))}


def test_ace05_lines_groups_by_event_type():
    samples = load_dataset(DATA / "ace05.jsonl", "ace05-lines")
    assert len(samples) == 5
    assert {e.event_type for e in samples[3].gold.events} == {"Conflict:Attack", "Life:Die"}
    assert samples[4].gold.events == frozenset()
    # two Person arguments of one event both survive
    (marry,) = samples[2].gold.events
    assert (("Person", "She") in marry.arguments) and (("Person", "him") in marry.arguments)


def write(tmp_path, lines):
    path = tmp_path / "d.jsonl"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def test_bad_json_reports_line(tmp_path):
    path = write(tmp_path, ['{"sentText": "a", "relationMentions": []}', "{oops"])
    with pytest.raises(MalformedRecord) as err:
        load_dataset(path, "nyt11")
    assert err.value.line_no == 2


def test_missing_field_is_malformed(tmp_path):
    path = write(tmp_path, [json.dumps({"relationMentions": []})])
    with pytest.raises(MalformedRecord):
        load_dataset(path, "nyt11")


def test_unknown_label(tmp_path):
    rec = {"sentText": "a b", "relationMentions": [{"em1Text": "a", "em2Text": "b", "label": "/x/y"}]}
    with pytest.raises(UnknownLabel):
        load_dataset(write(tmp_path, [json.dumps(rec)]), "nyt11")


def test_unknown_role(tmp_path):
    rec = {"id": "x", "sentence": "s", "events": [{"event_type": "Life:Die", "arguments": [{"role": "Weapon", "text": "k"}]}]}
    with pytest.raises(UnknownLabel):
        load_dataset(write(tmp_path, [json.dumps(rec)]), "ace05-lines")


def test_token_tag_length_mismatch(tmp_path):
    rec = {"tokens": ["a", "b"], "tags": ["O"]}
    with pytest.raises(MalformedRecord):
        load_dataset(write(tmp_path, [json.dumps(rec)]), "conllpp")


def test_unknown_format():
    with pytest.raises(ValueError):
        load_dataset(DATA / "nyt11.jsonl", "semeval")


def test_subsample_is_seeded_and_ordered():
    samples = load_dataset(DATA / "ace05.jsonl", "ace05-lines")
    a = subsample(samples, 3, seed=11)
    assert a == subsample(samples, 3, seed=11)
    assert [samples.index(s) for s in a] == sorted(samples.index(s) for s in a)
    with pytest.raises(BadSize):
        subsample(samples, 6, seed=1)
    with pytest.raises(BadSize):
        subsample(samples, 0, seed=1)


@st.composite
def spans(draw):
    n = draw(st.integers(1, 20))
    out, i = [], 0
    while i < n:
        if draw(st.booleans()):
            length = draw(st.integers(1, min(3, n - i)))
            out.append((i, i + length, draw(st.sampled_from(["PER", "LOC", "ORG"]))))
            i += length
        else:
            i += 1
    return n, out


@given(spans())
def test_bio_roundtrip(case):
    n, sp = case
    assert bio_to_spans(spans_to_bio(sp, n)) == sp


def test_bioes_tags():
    assert bio_to_spans(["S-PER", "B-LOC", "E-LOC", "O"]) == [(0, 1, "PER"), (1, 3, "LOC")]
