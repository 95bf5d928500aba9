#!/usr/bin/env python3
"""Regenerate the bundled toy corpora under data/toy/.

The corpora are synthetic and license-free. Output is deterministic for a
given seed, and the generated files are committed so the C++ pipeline never
needs Python at build or test time.

    python3 tools/make_toy_corpora.py [--out data/toy] [--seed 20240601]
"""

import argparse
import json
import random
from pathlib import Path

DISEASES = [
    "septic shock", "pneumonia", "heart failure", "atrial fibrillation",
    "diabetes", "hypertension", "acute kidney injury", "cellulitis",
    "asthma", "anemia", "liver failure", "bowel obstruction",
    "urinary tract infection", "stroke", "pancreatitis", "sepsis",
]
DRUGS = [
    "vancomycin", "metoprolol", "furosemide", "insulin", "heparin",
    "lisinopril", "ceftriaxone", "warfarin", "albuterol", "prednisone",
    "aspirin", "morphine", "amoxicillin", "omeprazole",
]
PROCEDURES = [
    "chest x-ray", "ct scan", "colonoscopy", "blood transfusion",
    "dialysis", "appendectomy", "cardiac catheterization", "intubation",
    "ultrasound", "wound debridement",
]
ANATOMY = [
    "abdomen", "chest", "left leg", "right arm", "lungs", "liver",
    "kidney", "heart", "bowel", "skin",
]
SYMPTOMS = [
    "fever", "chest pain", "shortness of breath", "nausea", "fatigue",
    "abdominal pain", "cough", "dizziness", "swelling", "confusion",
]
SPECIALTIES = [
    "cardiology", "nephrology", "general surgery", "gastroenterology",
    "pulmonology", "infectious disease", "primary care",
]
CONDITIONS = ["stable", "good", "improved", "fair"]
DAYS = ["monday", "tuesday", "wednesday", "thursday", "friday"]


def medical_doc(rng):
    d = lambda: rng.choice(DISEASES)
    m = lambda: rng.choice(DRUGS)
    p = lambda: rng.choice(PROCEDURES)
    a = lambda: rng.choice(ANATOMY)
    s = lambda: rng.choice(SYMPTOMS)
    sp = lambda: rng.choice(SPECIALTIES)
    n = lambda: str(rng.randint(2, 9))
    pron, poss = rng.choice([("he", "his"), ("she", "her")])
    opening = [
        f"The patient was admitted with {d()} and {s()}.",
        f"The patient presented to the emergency department with {s()} and {s()}.",
        f"This is a {rng.randint(30, 89)} year old patient admitted for {d()}.",
        f"You were admitted to the hospital with {d()}.",
    ]
    middle = [
        f"A {p()} showed changes in the {a()}.",
        f"{pron.capitalize()} was treated with {m()} and {m()}.",
        f"{pron.capitalize()} was started on {m()} for {d()}.",
        f"A {p()} of the {a()} was performed on day {n()}.",
        f"{poss.capitalize()} {s()} improved after treatment with {m()}.",
        f"The team was concerned for {d()} given {poss} {s()}.",
        f"{pron.capitalize()} developed {d()} and required {p()}.",
        f"{pron.capitalize()} reported {s()} and {s()} for {n()} days.",
        f"Labs were notable for {d()} and {pron} received {m()}.",
        f"The {a()} was examined and a {p()} was ordered.",
        f"{m().capitalize()} was held because of {d()}.",
        f"{pron.capitalize()} has a history of {d()} and {d()}.",
    ]
    closing = [
        f"{pron.capitalize()} was discharged home in {rng.choice(CONDITIONS)} condition.",
        f"Please follow up with {sp()} in {n()} weeks.",
        f"Please attend the {sp()} appointment on {rng.choice(DAYS)}.",
        f"Continue {m()} and follow up with {sp()}.",
        f"{pron.capitalize()} will continue {m()} at home.",
    ]
    sents = [rng.choice(opening)]
    sents += rng.sample(middle, rng.randint(3, 5))
    sents += rng.sample(closing, rng.randint(1, 2))
    return " ".join(sents)


def medical_lexicon():
    rows = []
    for kind, items in (("DISEASE", DISEASES), ("DRUG", DRUGS),
                        ("PROCEDURE", PROCEDURES), ("ANATOMY", ANATOMY),
                        ("SYMPTOM", SYMPTOMS)):
        for it in items:
            rows.append(f"{it}\t{kind}")
    return rows


TAG_VOCAB = {
    "murder": ["a body is found", "the detective investigates the killing",
               "a brutal murder shocks the town", "the killer hides the weapon",
               "the police search for the murderer"],
    "romantic": ["they fall in love", "a tender kiss under the stars",
                 "the lovers meet again in paris", "she writes him a love letter",
                 "their romance blossoms slowly"],
    "violence": ["a violent fight breaks out", "gunshots echo through the street",
                 "the gang attacks the village", "blood is spilled in the battle",
                 "he is beaten by the thugs"],
    "revenge": ["he swears revenge for his family", "she plots to avenge her father",
                "the betrayed soldier seeks vengeance", "they hunt down the traitor",
                "payback comes years later"],
    "flashback": ["in a flashback we see his childhood", "memories of the war return",
                  "years earlier the sisters were close", "the story jumps back in time",
                  "an old photograph reveals the past"],
    "comedy": ["a series of silly mishaps follows", "the clumsy hero makes everyone laugh",
               "a hilarious misunderstanding at the wedding", "the prank goes wrong",
               "the family holiday turns into chaos"],
    "cult": ["a strange sect gathers in the woods", "the cult leader preaches to followers",
             "midnight rituals in the old church", "the commune hides a dark secret",
             "followers chant in the desert"],
    "horror": ["a ghost haunts the old house", "something moves in the dark cellar",
               "screams are heard at midnight", "the creature stalks the campers",
               "the cursed doll comes to life"],
}
NAMES = ["john", "mary", "sam", "lucy", "peter", "anna", "victor", "elena",
         "tom", "grace", "marco", "nina", "oscar", "ruth"]
PLACES = ["a small town", "new york", "the countryside", "a coastal village",
          "london", "an island", "the desert", "a mining camp"]
TAG_WEIGHTS = {"murder": 9, "romantic": 8, "violence": 8, "revenge": 6,
               "flashback": 5, "comedy": 4, "cult": 3, "horror": 3}


def movie_doc(rng):
    tags = list(TAG_WEIGHTS)
    weights = [TAG_WEIGHTS[t] for t in tags]
    k = rng.choice([1, 1, 2, 2, 3])
    chosen = []
    while len(chosen) < k:
        t = rng.choices(tags, weights)[0]
        if t not in chosen:
            chosen.append(t)
    a, b = rng.sample(NAMES, 2)
    sents = [f"{a.capitalize()} lives in {rng.choice(PLACES)} with {b}."]
    for t in chosen:
        for phrase in rng.sample(TAG_VOCAB[t], 2):
            sents.append(phrase[0].upper() + phrase[1:] + ".")
    body = sents[:1] + sorted(sents[1:], key=lambda _: rng.random())
    body.append(rng.choice([
        f"In the end {a} must choose between {b} and the truth.",
        f"Finally {a} and {b} leave {rng.choice(PLACES)} forever.",
        f"The film ends with {b} alone.",
    ]))
    return " ".join(body), sorted(chosen)


STYLES = [
    dict(fill=["honestly", "basically"], punct="!", open="Well,", topic=["coffee", "mornings", "the office"]),
    dict(fill=["indeed", "moreover"], punct=";", open="Indeed,", topic=["history", "archives", "letters"]),
    dict(fill=["like", "totally"], punct="...", open="So", topic=["music", "concerts", "guitars"]),
    dict(fill=["perhaps", "arguably"], punct=" --", open="Perhaps", topic=["philosophy", "ethics", "reason"]),
    dict(fill=["yeah", "anyway"], punct="?!", open="Yeah,", topic=["football", "the match", "goals"]),
    dict(fill=["frankly", "clearly"], punct=".", open="Frankly,", topic=["politics", "elections", "taxes"]),
    dict(fill=["gosh", "really"], punct="!!", open="Gosh,", topic=["gardening", "roses", "soil"]),
    dict(fill=["thus", "hence"], punct=":", open="Thus", topic=["mathematics", "proofs", "numbers"]),
    dict(fill=["okay", "right"], punct=",", open="Okay,", topic=["cooking", "recipes", "spices"]),
    dict(fill=["alas", "verily"], punct="!", open="Alas,", topic=["poetry", "sonnets", "rhyme"]),
    dict(fill=["literally", "super"], punct="!!!", open="Omg", topic=["fashion", "shoes", "style"]),
    dict(fill=["notably", "crucially"], punct=";", open="Notably,", topic=["software", "databases", "servers"]),
    dict(fill=["mate", "proper"], punct="!", open="Right mate,", topic=["fishing", "boats", "tides"]),
    dict(fill=["kindly", "respectfully"], punct=".", open="Dear all,", topic=["meetings", "reports", "budgets"]),
    dict(fill=["dude", "seriously"], punct="?", open="Dude,", topic=["skating", "ramps", "tricks"]),
    dict(fill=["naturally", "evidently"], punct=".", open="Naturally,", topic=["biology", "cells", "genes"]),
    dict(fill=["hmm", "maybe"], punct="...", open="Hmm,", topic=["travel", "trains", "maps"]),
    dict(fill=["surely", "certainly"], punct="!", open="Surely", topic=["chess", "openings", "endgames"]),
    dict(fill=["wow", "awesome"], punct="!", open="Wow,", topic=["movies", "actors", "popcorn"]),
    dict(fill=["therefore", "accordingly"], punct=";", open="Accordingly,", topic=["law", "contracts", "courts"]),
]
GENERIC = [
    "i think about {t} every day", "my friend told me about {t}",
    "there is a lot to say about {t}", "we talked about {t} for hours",
    "nobody really understands {t}", "i wrote some notes on {t}",
    "the best part is {t}", "i was reading about {t} yesterday",
]


def author_doc(rng, style):
    sents = [style["open"]]
    for _ in range(rng.randint(5, 7)):
        g = rng.choice(GENERIC).format(t=rng.choice(style["topic"]))
        f = rng.choice(style["fill"])
        s = f"{f} {g}" if rng.random() < 0.6 else f"{g} {f}"
        sents.append(s[0].upper() + s[1:] + style["punct"])
    return " ".join(sents)


def write_jsonl(path, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in rows:
            fh.write(json.dumps(r, ensure_ascii=False) + "\n")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="data/toy")
    ap.add_argument("--seed", type=int, default=20240601)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    rng = random.Random(args.seed)
    write_jsonl(out / "medical.jsonl",
                [{"id": f"med-{i:03d}", "text": medical_doc(rng)} for i in range(200)])
    (out / "medical_lexicon.tsv").write_text("\n".join(medical_lexicon()) + "\n", encoding="utf-8")

    rng = random.Random(args.seed + 1)
    rows = []
    for i in range(200):
        text, tags = movie_doc(rng)
        rows.append({"id": f"mov-{i:03d}", "text": text, "labels": tags})
    write_jsonl(out / "movies.jsonl", rows)

    rng = random.Random(args.seed + 2)
    rows = []
    for i in range(200):
        a = i % len(STYLES)
        rows.append({"id": f"auth-{i:03d}", "text": author_doc(rng, STYLES[a]),
                     "author": f"author-{a:02d}"})
    write_jsonl(out / "authors.jsonl", rows)


if __name__ == "__main__":
    main()
