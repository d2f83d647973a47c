#!/usr/bin/env python3
"""Builds the trimmed resource files under data/ from full upstream copies.

Inputs:
  --cmudict   path to the CMU pronouncing dictionary (cmudict.dict layout)
  --wordnet   directory holding WordNet 3.1 database files (index.noun, data.noun, ...)

The WordNet reference similarities are computed with NLTK's
``Synset.path_similarity`` over the *full* database; the trimmed ontology keeps
every hypernym ancestor of every kept sense, so distances are unchanged.
"""
import argparse
import json
import os
import random
import re
import zlib

import numpy as np

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
DATA = os.path.join(ROOT, "data")

EXTRA_WORDS = """
a add all an are assure at because benthic but cap'n caught cause charge claimed
consumerism creation crew deep dreams extremes fellow filled flaw for forever found free
from get grow hadn't hair he'd helm hide his home i i'll i'm if in inflation is its jack
large law law's longer marge most named need needs nor not number of on once oration our
out over realm reside result salvation searched seed side society some striving taxes
that themes then this to unfortunate upon was washed went where with you
""".split()

# Heteronyms and multi-pronunciation words for the rhyme fixture.
RHYME_FIXTURE_EXTRAS = """
read lead live wind tear bass bow row close wound minute object present record desert
either neither route tomato data often again either been says said garage caramel
pecan aunt roof room creek envelope vase
""".split()

STOPWORDS_NOT_NOUNS = set()


def lexicon_words():
    with open(os.path.join(DATA, "synth", "lexicon.json")) as f:
        lex = json.load(f)
    words = set()
    for g in lex["rhyme_groups"]:
        words.update(g)
    for fillers in lex["slots"].values():
        words.update(fillers)
    for line_templates in lex["templates"]:
        for t in line_templates:
            for tok in t.split():
                if not tok.startswith("{"):
                    words.add(tok)
    return lex, words


def load_cmudict(path):
    entries = {}
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            word = re.sub(r"\(\d+\)$", "", parts[0])
            entries.setdefault(word, []).append(parts[1:])
    return entries


def write_dict(path, words, cmu, header):
    with open(path, "w", encoding="utf-8") as f:
        f.write(f";;; {header}\n")
        f.write(";;; Subset of the CMU Pronouncing Dictionary (see data/LICENSE-cmudict).\n")
        for w in sorted(words):
            for i, pron in enumerate(cmu[w]):
                key = w.upper() if i == 0 else f"{w.upper()}({i + 1})"
                f.write(f"{key}  {' '.join(pron)}\n")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--cmudict", required=True)
    ap.add_argument("--wordnet", required=True)
    args = ap.parse_args()

    lex, words = lexicon_words()
    words.update(EXTRA_WORDS)
    cmu = load_cmudict(args.cmudict)
    missing = sorted(w for w in words if w not in cmu)
    if missing:
        print("no pronunciation for:", " ".join(missing))
    write_dict(
        os.path.join(DATA, "cmudict-subset.dict"),
        [w for w in words if w in cmu],
        cmu,
        "Pronunciations for the synthetic-corpus lexicon and sample poems.",
    )

    rng = random.Random(20221)
    group_words = sorted({w for g in lex["rhyme_groups"] for w in g})
    extras = sorted({w for w in RHYME_FIXTURE_EXTRAS if w in cmu})
    pool = rng.sample([w for w in group_words if w not in extras], 200 - len(extras))
    fixture = sorted(set(pool) | set(extras))
    assert len(fixture) == 200, len(fixture)
    write_dict(
        os.path.join(DATA, "rhyme-fixture.dict"),
        fixture,
        cmu,
        "200-word rhyme fixture.",
    )

    wordnet_fixtures(args.wordnet, words)
    embeddings(words)


def wordnet_fixtures(wn_dir, words):
    import nltk
    from nltk.corpus.reader.wordnet import WordNetCorpusReader

    nltk.data.path.append(os.path.dirname(os.path.abspath(wn_dir)))
    WordNetCorpusReader.map_wn = lambda self, version="3.0": None
    wn = WordNetCorpusReader(wn_dir, None)

    index_lines = {}
    with open(os.path.join(wn_dir, "index.noun"), encoding="utf-8") as f:
        for line in f:
            if line.startswith("  "):
                continue
            index_lines[line.split(" ", 1)[0]] = line

    lemmas = set()
    for w in words:
        if w in index_lines:
            lemmas.add(w)
        for form in wn._morphy(w, "n"):
            if form in index_lines:
                lemmas.add(form)

    keep = set()
    for lemma in lemmas:
        for s in wn.synsets(lemma, "n"):
            if lemma not in [l.name().lower() for l in s.lemmas()]:
                continue
            stack = [s]
            while stack:
                cur = stack.pop()
                if cur in keep:
                    continue
                keep.add(cur)
                stack.extend(cur.hypernyms())
                stack.extend(cur.instance_hypernyms())

    out = os.path.join(DATA, "wordnet-subset")
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "index.noun"), "w", encoding="utf-8") as f:
        f.write("  WordNet 3.1 noun index, trimmed (see data/LICENSE-wordnet).\n")
        for lemma in sorted(lemmas):
            f.write(index_lines[lemma])

    kept_offsets = {s.offset() for s in keep}
    with open(os.path.join(wn_dir, "data.noun"), "rb") as src, open(
        os.path.join(out, "data.noun"), "w", encoding="utf-8"
    ) as dst:
        dst.write("  WordNet 3.1 noun data, trimmed to hypernym closures (see data/LICENSE-wordnet).\n")
        for off in sorted(kept_offsets):
            src.seek(off)
            line = src.readline().decode("utf-8").rstrip("\n")
            body, gloss = line.split(" | ", 1) if " | " in line else (line, "")
            fields = body.split()
            w_cnt = int(fields[3], 16)
            head = fields[: 4 + 2 * w_cnt]
            rest = fields[4 + 2 * w_cnt:]
            p_cnt = int(rest[0])
            ptrs = [rest[1 + 4 * i: 5 + 4 * i] for i in range(p_cnt)]
            ptrs = [p for p in ptrs if p[0] in ("@", "@i") and int(p[1]) in kept_offsets]
            flat = [x for p in ptrs for x in p]
            dst.write(" ".join(head + [f"{len(ptrs):03d}"] + flat) + " | " + gloss + "\n")

    with open(os.path.join(DATA, "ontology.edges.tsv"), "w", encoding="utf-8") as f:
        f.write("# child_sense\tparent_sense\trelation\n")
        for s in sorted(keep, key=lambda s: s.name()):
            for h in sorted(s.hypernyms(), key=lambda s: s.name()):
                f.write(f"{s.name()}\t{h.name()}\thypernym\n")
            for h in sorted(s.instance_hypernyms(), key=lambda s: s.name()):
                f.write(f"{s.name()}\t{h.name()}\tinstance_hypernym\n")
    with open(os.path.join(DATA, "ontology.lemmas.tsv"), "w", encoding="utf-8") as f:
        f.write("# word\tsense\n")
        for lemma in sorted(lemmas):
            for s in wn.synsets(lemma, "n"):
                if lemma in [l.name().lower() for l in s.lemmas()]:
                    f.write(f"{lemma}\t{s.name()}\n")

    rng = random.Random(4221)
    base_nouns = sorted(w for w in words if w in lemmas)
    pairs = [("cat", "dog"), ("helm", "realm"), ("hair", "hide"), ("crew", "hide"), ("side", "side")]
    while len(pairs) < 60:
        a, b = rng.sample(base_nouns, 2)
        pairs.append((a, b))
    with open(os.path.join(DATA, "reference", "path_similarity.tsv"), "w") as f:
        f.write("# word1\tword2\tmax NLTK path_similarity over noun synset pairs (WordNet 3.1)\n")
        for a, b in pairs:
            sa = [s for s in wn.synsets(a, "n") if a in [l.name().lower() for l in s.lemmas()]]
            sb = [s for s in wn.synsets(b, "n") if b in [l.name().lower() for l in s.lemmas()]]
            best = max((x.path_similarity(y) or 0.0) for x in sa for y in sb)
            f.write(f"{a}\t{b}\t{best!r}\n")


def embeddings(words, dim=16):
    with open(os.path.join(DATA, "embeddings.txt"), "w") as f:
        for w in sorted(words):
            rs = np.random.RandomState(zlib.crc32(w.encode("utf-8")))
            vec = rs.normal(size=dim)
            f.write(w + " " + " ".join(f"{x:.6f}" for x in vec) + "\n")


if __name__ == "__main__":
    os.makedirs(os.path.join(DATA, "reference"), exist_ok=True)
    main()
