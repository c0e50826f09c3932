"""Small synthetic corpora for tests."""
from __future__ import annotations

import json
import random
from pathlib import Path

from granseg.corpus import Dialogue, Message


def make_dialogue(did: str, num_messages: int, gold=(), texts=None) -> Dialogue:
    texts = texts or [f"message {i}" for i in range(num_messages)]
    msgs = tuple(Message("A" if i % 2 == 0 else "B", texts[i]) for i in range(num_messages))
    return Dialogue(did, msgs, tuple(sorted(gold)))


def random_corpus(rng: random.Random, n: int = 20, max_len: int = 30, boundary_rate: float = 0.2) -> list[Dialogue]:
    out = []
    for k in range(n):
        T = rng.randint(1, max_len)
        gold = [i for i in range(1, T) if rng.random() < boundary_rate]
        out.append(make_dialogue(f"d{k:03d}", T, gold))
    return out


TOPICS = (
    ("pizza", "cheese", "oven", "dough", "slice"),
    ("train", "ticket", "station", "delay", "platform"),
    ("movie", "actor", "scene", "film", "director"),
    ("dog", "walk", "park", "leash", "puppy"),
)


def topical_records(seed: int = 1, n: int = 12) -> list[dict]:
    """Raw dialogue records whose topic switches are visible in the vocabulary."""
    rng = random.Random(seed)
    records = []
    for k in range(n):
        msgs, seg, topic = [], 0, rng.randrange(len(TOPICS))
        for i in range(rng.randint(8, 20)):
            if i and rng.random() < 0.2:
                seg += 1
                topic = (topic + 1) % len(TOPICS)
            words = " ".join(rng.choice(TOPICS[topic]) for _ in range(5))
            msgs.append({"speaker": "AB"[i % 2], "text": words, "segment_id": seg, "label": f"t{topic}"})
        records.append({"id": f"dlg{k:02d}", "messages": msgs})
    return records


def write_jsonl(path: Path, records) -> Path:
    path.write_text("".join(json.dumps(r) + "\n" for r in records), encoding="utf-8")
    return path
