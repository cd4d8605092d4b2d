import json

import pytest
import torch

from dialrex.corpus import RelationSet
from dialrex.knowledge import (
    KnowledgeLexicon,
    LexiconError,
    context_max_feature,
    encode_knowledge,
    guidance_loss,
    knowledge_feature,
    load_lexicon,
)
from helpers import build_model


def vec(*xs):
    return torch.tensor(xs, dtype=torch.float64)


# ----------------------------------------------------------------- lexicon

def test_fixture_lexicon_entry(lexicon):
    assert lexicon.phrases("per:girl/boyfriend") == (
        "girlfriend", "boyfriend", "engagement", "marry", "relationship",
        "wedding", "lover", "love", "couple", "together",
    )


def test_missing_relation_named(tmp_path, relations):
    path = tmp_path / "lex.json"
    path.write_text(json.dumps({
        "per:girl/boyfriend": ["love"],
        "per:friends": ["pal"],
    }))
    with pytest.raises(LexiconError, match="per:siblings"):
        load_lexicon(path, relations)


def test_unknown_relation_rejected(tmp_path, relations):
    path = tmp_path / "lex.json"
    path.write_text(json.dumps({
        "per:girl/boyfriend": ["love"],
        "per:friends": ["pal"],
        "per:siblings": ["sister"],
        "per:enemies": ["feud"],
    }))
    with pytest.raises(LexiconError, match="per:enemies"):
        load_lexicon(path, relations)


@pytest.mark.parametrize("bad", [[], ["ok", ""], "notalist"])
def test_invalid_phrase_lists(tmp_path, relations, bad):
    path = tmp_path / "lex.json"
    path.write_text(json.dumps({
        "per:girl/boyfriend": bad,
        "per:friends": ["pal"],
        "per:siblings": ["sister"],
    }))
    with pytest.raises(LexiconError):
        load_lexicon(path, relations)


def test_duplicates_preserved_in_order(tmp_path):
    rs = RelationSet(("a", "b"))
    path = tmp_path / "lex.json"
    path.write_text(json.dumps({"a": ["x", "x", "y"], "b": ["z"]}))
    lex = load_lexicon(path, rs)
    assert lex.phrases("a") == ("x", "x", "y")


def test_phrases_unknown_relation():
    lex = KnowledgeLexicon({"a": ("x",)})
    with pytest.raises(LexiconError):
        lex.phrases("b")


# ---------------------------------------------------------------- features

def test_componentwise_max_hand_case():
    k = torch.stack([vec(1.0, -1.0), vec(0.0, 2.0)])
    assert torch.equal(context_max_feature(k, vec(1.0, 1.0)), vec(1.0, 2.0))


def test_max_monotone_in_products():
    g = torch.Generator().manual_seed(3)
    for _ in range(20):
        k = torch.randn(4, 6, dtype=torch.float64, generator=g)
        cls = torch.randn(6, dtype=torch.float64, generator=g)
        base = context_max_feature(k, cls)
        i = int(torch.randint(0, 4, (1,), generator=g))
        j = int(torch.randint(0, 6, (1,), generator=g))
        bumped = k.clone()
        if cls[j] != 0:
            bumped[i, j] += 0.5 * torch.sign(cls[j])
        after = context_max_feature(bumped, cls)
        assert after[j] >= base[j] - 1e-15
        mask = torch.ones(6, dtype=torch.bool)
        mask[j] = False
        assert torch.equal(after[mask], base[mask])


def test_singleton_knowledge_feature(relations, instances):
    lex = KnowledgeLexicon({
        "per:girl/boyfriend": ("love",),
        "per:friends": ("pal",),
        "per:siblings": ("sister",),
    })
    model, _ = build_model(instances, relations, lex, d_h=8)
    cls1 = torch.randn(8, dtype=torch.float64)
    cls2 = torch.randn(8, dtype=torch.float64)
    k_vec = model.encoder.encode_phrase(["love"])
    out = knowledge_feature("per:girl/boyfriend", cls1, cls2, lex,
                            model.encoder, model.tokenizer,
                            torch.zeros(8, dtype=torch.float64))
    expected = (k_vec * cls1 + k_vec * cls2) / 2     # singleton max, even gate
    assert torch.allclose(out, expected, atol=1e-12)


def test_zero_gate_halves_views(relations, lexicon, instances):
    model, _ = build_model(instances, relations, lexicon, d_h=8)
    cls1 = torch.randn(8, dtype=torch.float64)
    cls2 = torch.randn(8, dtype=torch.float64)
    vecs = encode_knowledge("per:friends", lexicon, model.encoder, model.tokenizer)
    h1 = context_max_feature(vecs, cls1)
    h2 = context_max_feature(vecs, cls2)
    out = knowledge_feature("per:friends", cls1, cls2, lexicon, model.encoder,
                            model.tokenizer, torch.zeros(8, dtype=torch.float64))
    assert torch.allclose(out, (h1 + h2) / 2, atol=1e-12)
    lo = torch.minimum(h1, h2)
    hi = torch.maximum(h1, h2)
    assert ((out >= lo - 1e-12) & (out <= hi + 1e-12)).all()


def test_cache_freezes_vectors(relations, lexicon, instances):
    model, _ = build_model(instances, relations, lexicon, d_h=8)
    cache = {}
    a = encode_knowledge("per:friends", lexicon, model.encoder,
                         model.tokenizer, cache)
    b = encode_knowledge("per:friends", lexicon, model.encoder,
                         model.tokenizer, cache)
    assert a is b
    assert not a.requires_grad


# ------------------------------------------------------------ guidance loss

def test_guidance_zero_on_equal():
    x = vec(0.4, -2.0, 1.5)
    assert float(guidance_loss(x, x.clone())) == 0.0


def test_guidance_unit_offsets():
    assert float(guidance_loss(vec(1.0, 0.0), vec(0.0, 1.0))) == 2.0


def test_guidance_matches_elementwise_recomputation():
    g = torch.Generator().manual_seed(11)
    a = torch.randn(64, dtype=torch.float64, generator=g)
    b = torch.randn(64, dtype=torch.float64, generator=g)
    manual = sum((float(a[j]) - float(b[j])) ** 2 for j in range(64))
    assert abs(float(guidance_loss(a, b)) - manual) < 1e-9


def test_guidance_symmetric_nonnegative():
    g = torch.Generator().manual_seed(12)
    for _ in range(10):
        a = torch.randn(5, dtype=torch.float64, generator=g)
        b = torch.randn(5, dtype=torch.float64, generator=g)
        assert float(guidance_loss(a, b)) == float(guidance_loss(b, a))
        assert float(guidance_loss(a, b)) > 0


def test_guidance_shape_mismatch():
    with pytest.raises(ValueError):
        guidance_loss(vec(1.0, 2.0), vec(1.0))
