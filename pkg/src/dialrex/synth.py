"""Synthetic DialogRE-format corpora for overfit and ablation studies.

Every generated dialogue plants exactly one trigger phrase, and that
phrase alone determines the relation between the two speaker arguments;
filler turns share one neutral vocabulary across all relations.  The
``late_fraction`` knob moves the trigger turn past the two-turn prefix
that contains both arguments, starving prefix-truncated inputs of
evidence.
"""

from __future__ import annotations

import json
import random
from pathlib import Path

# trigger token inventories are pairwise disjoint and disjoint from the
# filler/template vocabulary below, so only the trigger carries signal
RELATION_PHRASES: list[tuple[str, list[str]]] = [
    ("rel:ally", ["joined forces", "loyal partner", "alliance"]),
    ("rel:rival", ["bitter feud", "sworn enemy", "rivalry"]),
    ("rel:mentor", ["wise mentor", "apprentice", "taught carefully"]),
    ("rel:sibling", ["twin sibling", "shared childhood", "family resemblance"]),
    ("rel:neighbor", ["backyard fence", "street corner", "next door"]),
    ("rel:colleague", ["office project", "quarterly report", "staff meeting"]),
]

FILLERS = [
    "the weather looked cloudy this morning",
    "coffee sounds perfect right now",
    "did you watch the game last night",
    "the bus was late again today",
    "my phone battery died yesterday",
    "that new bakery smells amazing",
    "i should water the plants soon",
    "the train station was crowded",
    "let me grab my jacket first",
    "somebody left the lights on",
]

TEMPLATES = [
    "honestly the {} story still comes up",
    "everyone remembers that {} business",
    "i keep thinking about the {} from before",
    "you know the {} changed everything",
]

SPEAKERS = ["Alice", "Bob", "Carol", "Dave", "Erin", "Frank", "Grace", "Henry"]


def generate_corpus(size: int, seed: int, n_relations: int = 4,
                    late_fraction: float = 0.0,
                    min_turns: int = 4, max_turns: int = 6):
    """Build ``size`` single-annotation dialogues.

    Returns ``(entries, labels, lexicon)`` where entries are in the
    DialogRE file format, and the lexicon maps each label to its trigger
    phrase inventory.
    """
    if not 1 <= n_relations <= len(RELATION_PHRASES):
        raise ValueError(f"n_relations must be in 1..{len(RELATION_PHRASES)}")
    if not 0.0 <= late_fraction <= 1.0:
        raise ValueError("late_fraction must be in [0, 1]")
    rng = random.Random(seed)
    pool = RELATION_PHRASES[:n_relations]
    labels = [label for label, _ in pool]
    n_late = round(late_fraction * size)

    entries = []
    for i in range(size):
        label, phrases = pool[i % n_relations]
        phrase = rng.choice(phrases)
        a, b = rng.sample(SPEAKERS, 2)
        n_turns = rng.randint(min_turns, max_turns)
        # A speaks first, B second: both arguments occur within two turns
        speakers = [a if t % 2 == 0 else b for t in range(n_turns)]
        if i < n_late:
            trigger_turn = rng.randint(2, n_turns - 1)
        else:
            trigger_turn = rng.randint(0, min(1, n_turns - 1))
        utterances = []
        for t in range(n_turns):
            if t == trigger_turn:
                text = rng.choice(TEMPLATES).format(phrase)
            else:
                text = rng.choice(FILLERS)
            utterances.append(f"{speakers[t]}: {text}")
        entries.append([
            utterances,
            [{"x": a, "y": b, "r": [label], "t": [phrase]}],
        ])
    lexicon = {label: list(phrases) for label, phrases in pool}
    return entries, labels, lexicon


def write_corpus(out_dir, size: int, seed: int, n_relations: int = 4,
                 late_fraction: float = 0.0) -> dict:
    """Generate and write data/relations/lexicon files; returns their paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries, labels, lexicon = generate_corpus(size, seed, n_relations,
                                               late_fraction)
    paths = {
        "data": out / "data.json",
        "relations": out / "relations.txt",
        "lexicon": out / "lexicon.json",
    }
    with open(paths["data"], "w", encoding="utf-8") as f:
        json.dump(entries, f, ensure_ascii=False, indent=1)
    with open(paths["relations"], "w", encoding="utf-8") as f:
        f.writelines(label + "\n" for label in labels)
    with open(paths["lexicon"], "w", encoding="utf-8") as f:
        json.dump(lexicon, f, ensure_ascii=False, indent=1, sort_keys=True)
    return {k: str(v) for k, v in paths.items()}
