"""Writes the 200-document Twitter fixture corpus and its mock classifier rules."""
import json
import random
import sys
from pathlib import Path

# item: (keyword as written in text, conservative phrase, liberal phrase)
PHRASES = {
    "trump": ("Trump", "MAGA, {k} is the best president ever", "dump {k}, worst president ever"),
    "biden": ("Biden", "sleepy {k} is a disaster", "ridin' with {k}, decency is back"),
    "republicans": ("Republicans", "proud to stand with the {k}", "the {k} are a disgrace"),
    "conservatives": ("conservatives", "I'm proud of our {k}", "{k} are destroying this country"),
    "democrats": ("Democrats", "{k} are ruining everything", "vote blue, {k} deliver"),
    "liberals": ("liberals", "the {k} hate america", "thank god for {k}"),
    "pelosi": ("Pelosi", "{k} must go", "Madam Speaker {k} is a hero"),
    "cruz": ("Cruz", "Ted {k} fights for us", "{k} fled to Cancún"),
    "mask": ("mask", "no {k} mandates, freedom", "{k} mandate saves lives"),
    "vaccin": ("vaccine", "no forced {k}s ever", "get the {k}, it works"),
    "covid": ("COVID", "{k} is overblown hysteria", "{k} is killing thousands, stay home"),
    "gun_control": ("gun control", "{k} disarms law abiding citizens", "we need {k} now"),
    "second_amendment": ("Second Amendment", "defend the {k}", "repeal the {k}"),
    "police": ("police", "back the blue, support our {k}", "defund the {k}"),
    "abortion": ("abortion", "{k} is murder", "{k} is healthcare"),
    "voter_fraud": ("voter fraud", "massive {k} happened", "there was no {k}, stop lying"),
}

# Mock rules: patterns are sub-phrases of the templates above.
RULES = [
    ("maga", "trump", "conservative"), ("dump trump", "trump", "liberal"),
    ("sleepy biden", "biden", "conservative"), ("decency is back", "biden", "liberal"),
    ("proud to stand with", "republicans", "conservative"), ("are a disgrace", "republicans", "liberal"),
    ("i'm proud of our", "conservatives", "conservative"), ("destroying this country", "conservatives", "liberal"),
    ("are ruining everything", "democrats", "conservative"), ("vote blue", "democrats", "liberal"),
    ("hate america", "liberals", "conservative"), ("thank god for", "liberals", "liberal"),
    ("must go", "pelosi", "conservative"), ("is a hero", "pelosi", "liberal"),
    ("fights for us", "cruz", "conservative"), ("fled to cancún", "cruz", "liberal"),
    ("freedom", "mask", "conservative"), ("mask mandate saves lives", "mask", "liberal"),
    ("no forced", "vaccin", "conservative"), ("it works", "vaccin", "liberal"),
    ("overblown", "covid", "conservative"), ("stay home", "covid", "liberal"),
    ("disarms", "gun_control", "conservative"), ("we need gun control", "gun_control", "liberal"),
    ("defend the", "second_amendment", "conservative"), ("repeal the", "second_amendment", "liberal"),
    ("back the blue", "police", "conservative"), ("defund the", "police", "liberal"),
    ("is murder", "abortion", "conservative"), ("is healthcare", "abortion", "liberal"),
    ("massive voter fraud", "voter_fraud", "conservative"), ("no voter fraud", "voter_fraud", "liberal"),
    # A global rule: applies to any item tagged on the document.
    ("lol whatever", "", "neutral"),
]

NEUTRAL = [
    "{k} was in the news again today",
    "watching the {k} coverage tonight 📺",
    "anyone have thoughts on {k}?",
    "lol whatever, {k} again",
]
OFFTOPIC = [
    "Good morning everyone ☀️",
    "Coffee first, then emails.",
    "Café crème at the usual spot!!",
    "Touchdown!!! 🏈🏈",
    "Reading a great book about whales & oceans.",
    "Traffic on I-95 is terrible #commute",
    "Happy birthday to my mom ❤️",
    "Fun fact: octopuses have three hearts.",
]


def main(out_dir):
    rng = random.Random(20240601)
    items = sorted(PHRASES)
    authors = [f"u{i:02d}" for i in range(1, 21)]
    lean = {a: ("conservative" if i < 10 else "liberal") for i, a in enumerate(authors)}
    docs = []
    for n in range(200):
        a = authors[n % 20]
        r = rng.random()
        if r < 0.12:
            text = rng.choice(OFFTOPIC)
        elif r < 0.27:
            text = rng.choice(NEUTRAL).format(k=PHRASES[rng.choice(items)][0])
        else:
            side = lean[a] if rng.random() < 0.8 else ("liberal" if lean[a] == "conservative" else "conservative")
            parts = []
            for item in rng.sample(items, 2 if rng.random() < 0.2 else 1):
                kw, con, lib = PHRASES[item]
                parts.append((con if side == "conservative" else lib).format(k=kw))
            text = ". ".join(p[0].upper() + p[1:] for p in parts) + rng.choice(["", "!", "!!", " 🇺🇸", "."])
        docs.append({"doc_id": f"t{n:03d}", "author_id": a, "text": text, "source": "post"})
    out = Path(out_dir)
    with open(out / "corpus_200.jsonl", "w", encoding="utf-8") as f:
        for d in docs:
            f.write(json.dumps(d, ensure_ascii=False) + "\n")
    with open(out / "twitter_mock_rules.yaml", "w", encoding="utf-8") as f:
        f.write("# Keyword -> stance rules for the offline mock classifier on corpus_200.jsonl.\n")
        f.write("# The first matching rule for an item wins; no item means every item.\n")
        f.write("rules:\n")
        for p, i, l in RULES:
            item = f", item: {i}" if i else ""
            f.write(f"  - {{pattern: \"{p}\"{item}, label: {l}}}\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "fixtures")
