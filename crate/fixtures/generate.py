"""Regenerates the synthetic corpora under fixtures/. Deterministic."""

import json
import random
from pathlib import Path

HERE = Path(__file__).parent
WORDS = ("apple river stone cloud music garden window coffee paper ocean "
         "candle forest train summer winter violin pencil mirror desert castle").split()


def sentence(rng, tag):
    return " ".join(rng.choice(WORDS) for _ in range(rng.randint(3, 7))) + f" ({tag})."


def write(path, records):
    with open(path, "w", encoding="utf-8") as f:
        for r in records:
            f.write(json.dumps(r, ensure_ascii=False, separators=(",", ":")) + "\n")


def full_dialogues(rng, n=507, bot_total=1889):
    # bot turns per dialogue in 2..6, adjusted to hit the total exactly
    counts = [rng.randint(2, 6) for _ in range(n)]
    i = 0
    while sum(counts) != bot_total:
        step = 1 if sum(counts) < bot_total else -1
        if 2 <= counts[i % n] + step <= 6:
            counts[i % n] += step
        i += 1
    out = []
    for d, b in enumerate(counts):
        turns = []
        for k in range(b):
            turns.append({"speaker": "human", "text": sentence(rng, f"h{d}.{k}")})
            turns.append({"speaker": "bot", "text": sentence(rng, f"b{d}.{k}")})
        out.append({"id": f"full{d}", "turns": turns})
    return out


def raw_corpus(rng, full):
    extras = []
    for j in range(60):
        src = rng.choice(full)["turns"]
        extras.append({"id": f"prefix{j}", "turns": src[: rng.randint(3, len(src) - 1)]})
    for j in range(33):
        turns = [{"speaker": "human", "text": sentence(rng, f"o{j}")}]
        if j % 3:
            turns.append({"speaker": "bot", "text": sentence(rng, f"ob{j}")})
        extras.append({"id": f"short{j}", "turns": turns})
    raw = full + extras
    order = list(range(len(raw)))
    rng.shuffle(order)
    # survivors must keep input order, so keep the full dialogues sorted
    full_slots = sorted(i for i in order if i < len(full))
    return [raw[i] for i in order], full_slots


def labeled_cuts(rng, full, positives=453):
    cuts = []
    for d in full:
        bots = [i for i, t in enumerate(d["turns"]) if t["speaker"] == "bot"]
        for k, end in enumerate(bots, start=1):
            cuts.append({"id": f"{d['id']}#{k}", "turns": d["turns"][: end + 1], "k": k})
    eligible = [i for i, c in enumerate(cuts) if c["k"] >= 2]
    pos = set(rng.sample(eligible, positives))
    out = []
    for i, c in enumerate(cuts):
        k = c.pop("k")
        if i in pos:
            ev = sorted(rng.sample(range(1, k), rng.randint(1, min(2, k - 1))))
            out.append({**c, "label": 1, "evidence": ev})
        else:
            out.append({**c, "label": 0, "evidence": []})
    return out


TOPICS = [
    ("singer", "johnny cash", "elvis presley"),
    ("food", "pizza", "sushi"),
    ("color", "blue", "green"),
    ("sport", "tennis", "soccer"),
    ("city", "paris", "tokyo"),
]


def smoke(rng):
    examples, rules = [], []
    for i in range(20):
        topic, a, b = TOPICS[i % len(TOPICS)]
        contradict = i % 2 == 0
        mine = f"Mine is {a} for sure."
        last = f"My favorite {topic} is {b if contradict else a}."
        turns = [
            {"speaker": "human", "text": f"Hi, what's your favorite {topic}?"},
            {"speaker": "bot", "text": mine},
            {"speaker": "human", "text": "Nice, tell me more."},
            {"speaker": "bot", "text": f"I have liked it since I was {10 + i}."},
            {"speaker": "human", "text": f"So which {topic} do you like best?"},
            {"speaker": "bot", "text": last},
        ]
        ex = {"id": f"smoke{i}", "turns": turns, "label": int(contradict), "evidence": [1] if contradict else []}
        examples.append(ex)
        rule = (mine, f"My favorite {topic} is {a} for sure.")
        if rule not in rules:
            rules.append(rule)
    return examples, rules


def main():
    rng = random.Random(20231)
    full = full_dialogues(rng)
    raw, _ = raw_corpus(rng, full)
    write(HERE / "dataset" / "raw_600.jsonl", raw)
    write(HERE / "dataset" / "full_507.jsonl", full)
    write(HERE / "dataset" / "labeled_1889.jsonl", labeled_cuts(rng, full))
    examples, rules = smoke(rng)
    write(HERE / "smoke" / "examples.jsonl", examples)
    with open(HERE / "smoke" / "rules.tsv", "w", encoding="utf-8") as f:
        f.write("# pattern<TAB>replacement, first match wins\n")
        for p, r in rules:
            f.write(f"{p}\t{r}\n")


if __name__ == "__main__":
    main()
