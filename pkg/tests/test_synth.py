import pytest

from dialrex.corpus import (
    RelationSet,
    WhitespaceTokenizer,
    align_trigger,
    build_input_sequence,
    build_prefix_instance,
    expand_for_training,
    load_dialogre,
)
from dialrex.knowledge import load_lexicon
from dialrex.synth import FILLERS, RELATION_PHRASES, TEMPLATES, generate_corpus, write_corpus


def test_deterministic_given_seed():
    a = generate_corpus(20, seed=7)
    b = generate_corpus(20, seed=7)
    assert a == b
    c = generate_corpus(20, seed=8)
    assert a != c


def test_size_zero():
    entries, labels, lexicon = generate_corpus(0, seed=1)
    assert entries == []
    assert len(labels) == 4
    assert set(lexicon) == set(labels)


def test_every_trigger_alignable(tmp_path):
    paths = write_corpus(tmp_path, 20, seed=7)
    relations = RelationSet.from_file(paths["relations"])
    instances = load_dialogre(paths["data"], relations)
    assert len(instances) == 20
    tok = WhitespaceTokenizer()
    for inst in expand_for_training(instances):
        tokenized = build_input_sequence(inst, tok)
        assert align_trigger(inst, tokenized, tok) is not None


def test_trigger_vocabulary_disjoint_from_filler():
    tok = WhitespaceTokenizer()
    trigger_tokens = {t for _, phrases in RELATION_PHRASES
                      for p in phrases for t in tok(p)}
    background = {t for s in FILLERS for t in tok(s)}
    background |= {t for s in TEMPLATES for t in tok(s.format("X")) if t != "x"}
    assert not trigger_tokens & background


def test_relation_trigger_tokens_pairwise_disjoint():
    tok = WhitespaceTokenizer()
    sets = [{t for p in phrases for t in tok(p)} for _, phrases in RELATION_PHRASES]
    for i in range(len(sets)):
        for j in range(i + 1, len(sets)):
            assert not sets[i] & sets[j]


def test_late_fraction_places_trigger_after_prefix():
    entries, _, _ = generate_corpus(30, seed=3, late_fraction=0.5)
    n_late = 15
    for idx, (utterances, records) in enumerate(entries):
        phrase = records[0]["t"][0]
        hits = [i for i, u in enumerate(utterances) if phrase in u]
        assert len(hits) == 1
        if idx < n_late:
            assert hits[0] >= 2       # both arguments already seen by turn 2
        else:
            assert hits[0] <= 1


def test_prefix_is_always_two_turns(tmp_path):
    paths = write_corpus(tmp_path, 12, seed=5, late_fraction=0.5)
    relations = RelationSet.from_file(paths["relations"])
    for inst in load_dialogre(paths["data"], relations):
        assert len(build_prefix_instance(inst).turns) == 2


def test_lexicon_file_is_valid(tmp_path):
    paths = write_corpus(tmp_path, 8, seed=2)
    relations = RelationSet.from_file(paths["relations"])
    lexicon = load_lexicon(paths["lexicon"], relations)
    assert set(lexicon.entries) == set(relations.labels)


def test_written_files_identical_for_same_seed(tmp_path):
    p1 = write_corpus(tmp_path / "a", 10, seed=4)
    p2 = write_corpus(tmp_path / "b", 10, seed=4)
    for key in p1:
        assert open(p1[key], "rb").read() == open(p2[key], "rb").read()


def test_parameter_validation(tmp_path):
    with pytest.raises(ValueError):
        generate_corpus(5, seed=0, n_relations=99)
    with pytest.raises(ValueError):
        generate_corpus(5, seed=0, late_fraction=1.5)
