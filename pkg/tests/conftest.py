from pathlib import Path

import pytest
from hypothesis import settings

from dialrex.corpus import RelationSet, WhitespaceTokenizer, load_dialogre
from dialrex.knowledge import load_lexicon

settings.register_profile("suite", deadline=None, max_examples=50)
settings.load_profile("suite")

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir():
    return FIXTURES


@pytest.fixture(scope="session")
def tokenizer():
    return WhitespaceTokenizer()


@pytest.fixture(scope="session")
def relations():
    return RelationSet.from_file(FIXTURES / "relations.txt")


@pytest.fixture(scope="session")
def lexicon(relations):
    return load_lexicon(FIXTURES / "lexicon.json", relations)


@pytest.fixture()
def instances(relations):
    return load_dialogre(FIXTURES / "fixture_dialogues.json", relations)
