#!/usr/bin/env python3
#
# Copyright 2026 The Attackscope Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
#
"""Generates the bundled miniature sentiment corpus and its resources.

The corpus mimics two well-known properties of static word embeddings:

  * antonyms often sit close together ("good"/"bad" share contexts), so a
    nearest-neighbour synonym swap can silently reverse sentiment;
  * wordnet-style synonym lists occasionally contain a sense of the opposite
    polarity.

Sentiment words come in three kinds:

  fragile       an opposite-polarity twin with cosine similarity ~0.58;
                reachable by both embedding-neighbour attacks.
  semi-fragile  an opposite-polarity twin with cosine similarity ~0.34;
                reachable only by the looser-neighbourhood attack.
  sturdy        same-polarity neighbours only; some lexicon entries leak an
                opposite-polarity word.

Fragile words share one cluster direction and sturdy words another, so
whether a sample is attackable is visible in its embedding but not in
its classifier confidence.

Usage: make_corpus.py OUT_DIR [--seed N]
"""

import argparse
import json
import os

import numpy as np

DIM = 24
POL, FRAG, STURDY = 0, 1, 2  # reserved axes; identity components use 3..DIM-1

STOPWORDS = {
    "the": "DET", "a": "DET", "this": "DET", "its": "PRON", "it": "PRON",
    "is": "VERB", "was": "VERB", "and": "CONJ", "of": "ADP", "with": "ADP",
    "in": "ADP", "for": "ADP", "at": "ADP", "to": "PRT", "all": "DET",
}

NOUN_GROUPS = [
    ["movie", "film", "picture"], ["plot", "story", "storyline"],
    ["acting", "performances"], ["director", "filmmaker"],
    ["script", "screenplay"], ["cast", "actors"], ["ending", "finale"],
    ["soundtrack", "music"], ["visuals", "cinematography"],
    ["characters", "roles"], ["dialogue", "lines"], ["pacing", "rhythm"],
]
FILLER_GROUPS = {
    "VERB": [["feels", "seems", "looks"], ["remains", "stays"]],
    "ADV": [["very", "really", "truly"], ["quite", "rather", "fairly"],
            ["overall", "ultimately"], ["honestly", "frankly"]],
}

# (positive, negative) twins.
FRAGILE = [
    ("good", "bad"), ("exciting", "dull"), ("clever", "stupid"),
    ("strong", "weak"), ("beautiful", "ugly"), ("fresh", "stale"),
    ("smart", "dumb"), ("warm", "cold"), ("interesting", "tedious"),
    ("happy", "sad"), ("best", "worst"), ("funny", "unfunny"),
]
SEMI_FRAGILE = [
    ("charming", "annoying"), ("brilliant", "mediocre"), ("moving", "flat"),
    ("gripping", "slow"), ("delightful", "irritating"), ("engaging", "lifeless"),
    ("thoughtful", "shallow"), ("lovely", "clumsy"),
]
STURDY_POS = [
    ["excellent", "superb", "outstanding"], ["wonderful", "marvelous"],
    ["enjoyable", "pleasant"], ["masterful", "accomplished"],
    ["hilarious", "witty"], ["touching", "heartfelt"],
    ["fantastic", "terrific"], ["remarkable", "impressive"],
]
STURDY_NEG = [
    ["terrible", "horrible", "dreadful"], ["pointless", "worthless"],
    ["painful", "unbearable"], ["incoherent", "muddled"], ["lame", "feeble"],
    ["predictable", "formulaic"], ["disappointing", "underwhelming"],
    ["pretentious", "smug"],
]


class Builder:
  def __init__(self, rng):
    self.rng = rng
    self.vectors = {}
    self.pos = {}
    self.synonyms = {}

  def identity(self, norm=1.0):
    v = np.zeros(DIM)
    v[3:] = self.rng.normal(size=DIM - 3)
    return norm * v / np.linalg.norm(v)

  def add(self, word, vec, tag):
    assert word not in self.vectors, word
    self.vectors[word] = vec
    self.pos[word] = tag

  def group(self, words, tag, base, spread=0.25, extra=None):
    for w in words:
      v = base + spread * self.identity()
      if extra is not None:
        v = v + extra
      self.add(w, v, tag)
    for w in words:
      self.synonyms[w] = [o for o in words if o != w]


def build_vocabulary(rng):
  b = Builder(rng)
  for w, tag in STOPWORDS.items():
    b.add(w, b.identity(), tag)
  for g in NOUN_GROUPS:
    b.group(g, "NOUN", b.identity())
  for tag, groups in FILLER_GROUPS.items():
    for g in groups:
      b.group(g, tag, b.identity())

  pol = np.eye(DIM)[POL]
  frag = np.eye(DIM)[FRAG]
  sturdy = np.eye(DIM)[STURDY]

  kinds = {}
  # Twins share their identity component and differ only in polarity.
  for pos_w, neg_w in FRAGILE:
    base = b.identity() + 0.6 * frag
    b.add(pos_w, base + 0.6 * pol, "ADJ")
    b.add(neg_w, base - 0.6 * pol, "ADJ")
    kinds[pos_w] = kinds[neg_w] = "fragile"
  for pos_w, neg_w in SEMI_FRAGILE:
    base = b.identity()
    b.add(pos_w, base + 0.7 * pol, "ADJ")
    b.add(neg_w, base - 0.7 * pol, "ADJ")
    kinds[pos_w] = kinds[neg_w] = "semi"
  for groups, sign in ((STURDY_POS, 1.0), (STURDY_NEG, -1.0)):
    for g in groups:
      b.group(g, "ADJ", b.identity() + 0.6 * sturdy, spread=0.3, extra=sign * 0.6 * pol)
      for w in g:
        kinds[w] = "sturdy"

  # Wordnet-style lexicon for the sentiment words: same-polarity words
  # of the same kind, plus occasional opposite-polarity senses for sturdy
  # words.
  pos_words = {"fragile": [p for p, _ in FRAGILE], "semi": [p for p, _ in SEMI_FRAGILE]}
  neg_words = {"fragile": [n for _, n in FRAGILE], "semi": [n for _, n in SEMI_FRAGILE]}
  for kind in ("fragile", "semi"):
    for words in (pos_words[kind], neg_words[kind]):
      for w in words:
        others = [o for o in words if o != w]
        b.synonyms[w] = list(rng.choice(others, size=2, replace=False))
  for g_pos, g_neg in zip(STURDY_POS, STURDY_NEG):
    if rng.random() < 0.5:
      leak_from = g_pos[0]
      leak_to = g_neg[int(rng.integers(len(g_neg)))]
      b.synonyms[leak_from] = b.synonyms[leak_from] + [leak_to]
      leak_back = g_neg[0]
      b.synonyms[leak_back] = b.synonyms[leak_back] + [g_pos[-1]]

  # Small polarity noise on every non-sentiment word.
  for w, v in b.vectors.items():
    if w not in kinds:
      v[POL] += 0.05 * rng.normal()
  return b, kinds


def sentiment_pool(kinds, polarity):
  pools = {"fragile": [], "semi": [], "sturdy": []}
  positives = set(p for p, _ in FRAGILE + SEMI_FRAGILE)
  positives |= {w for g in STURDY_POS for w in g}
  for w, kind in kinds.items():
    if (w in positives) == (polarity == 1):
      pools[kind].append(w)
  for k in pools:
    pools[k].sort()
  return pools


def pick_noun(rng):
  group = NOUN_GROUPS[int(rng.integers(len(NOUN_GROUPS)))]
  return group[int(rng.integers(len(group)))]


def make_sentence(rng, kinds_pools, label):
  pools = kinds_pools[label]
  n_sent = int(rng.choice([1, 2, 3], p=[0.55, 0.35, 0.10]))
  sentiment = []
  for _ in range(n_sent):
    kind = rng.choice(["fragile", "semi", "sturdy"], p=[0.4, 0.25, 0.35])
    sentiment.append(str(rng.choice(pools[kind])))
  noun = pick_noun(rng)
  words = [str(rng.choice(["the", "this", "a"])), noun]
  words.append(str(rng.choice(["is", "was", "feels", "seems", "looks", "remains"])))
  if rng.random() < 0.5:
    words.append(str(rng.choice(["very", "really", "truly", "quite", "rather", "fairly"])))
  for i, w in enumerate(sentiment):
    if i > 0:
      words.append("and")
    words.append(w)
  if rng.random() < 0.4:
    tail_noun = pick_noun(rng)
    words += ["with", "its", tail_noun]
  if rng.random() < 0.3:
    words.insert(0, str(rng.choice(["overall", "ultimately", "honestly", "frankly"])))
  text = " ".join(words)
  return text[0].upper() + text[1:] + "."


def write_split(path, rng, pools, n, prefix, noise):
  with open(path, "w") as f:
    for i in range(n):
      label = i % 2
      text = make_sentence(rng, pools, label)
      if rng.random() < noise:
        label = 1 - label
      f.write(json.dumps({"id": f"{prefix}-{i:04d}", "text": text, "label": label}) + "\n")


def main():
  parser = argparse.ArgumentParser()
  parser.add_argument("out_dir")
  parser.add_argument("--seed", type=int, default=20260)
  args = parser.parse_args()
  rng = np.random.default_rng(args.seed)
  os.makedirs(args.out_dir, exist_ok=True)

  b, kinds = build_vocabulary(rng)
  with open(os.path.join(args.out_dir, "embeddings.txt"), "w") as f:
    for w in sorted(b.vectors):
      f.write(w + " " + " ".join(f"{x:.6f}" for x in b.vectors[w]) + "\n")
  with open(os.path.join(args.out_dir, "stopwords.txt"), "w") as f:
    for w in sorted(STOPWORDS):
      f.write(w + "\n")
  with open(os.path.join(args.out_dir, "synonyms.json"), "w") as f:
    json.dump({w: b.synonyms[w] for w in sorted(b.synonyms)}, f, indent=1, sort_keys=True)
    f.write("\n")
  with open(os.path.join(args.out_dir, "pos.json"), "w") as f:
    json.dump({w: b.pos[w] for w in sorted(b.pos)}, f, indent=1, sort_keys=True)
    f.write("\n")

  pools = {label: sentiment_pool(kinds, label) for label in (0, 1)}
  write_split(os.path.join(args.out_dir, "train.jsonl"), rng, pools, 800, "tr", 0.04)
  write_split(os.path.join(args.out_dir, "validation.jsonl"), rng, pools, 300, "va", 0.04)
  write_split(os.path.join(args.out_dir, "test.jsonl"), rng, pools, 300, "te", 0.04)


if __name__ == "__main__":
  main()
