#!/usr/bin/env python3
"""Generate the bundled desk-scale corpora (run once; outputs are committed).

Produces four TSV files under src/typoguard/data/corpora/:

  sentiment_train.tsv   500 labeled sentences; includes a low-frequency
                        "tail" of words so a capped vocabulary leaves some
                        training tokens out-of-vocabulary.
  sentiment_dev.tsv     100 labeled sentences drawn from the frequent pools
                        only (no tail, no rare words).
  sentiment_test.tsv    200 labeled sentences; roughly half carry one word
                        that never occurs in train/dev but is frequent in
                        the background corpus (>=5% of word tokens overall).
  background.tsv        650 unlabeled-ish sentences (label column is 0)
                        with a broader vocabulary for background-model
                        training.

Everything is drawn from a fixed seed so the files are reproducible.
"""

import random
from collections import Counter
from pathlib import Path

OUT_DIR = Path(__file__).resolve().parent.parent / "src" / "typoguard" / "data" / "corpora"

POS = [
    "beautiful", "wonderful", "fantastic", "superb", "delightful", "brilliant",
    "charming", "gripping", "touching", "stellar", "graceful", "inspired",
    "vibrant", "masterful", "radiant", "soulful", "elegant", "sincere",
    "tender", "luminous", "powerful", "stunning", "moving", "uplifting",
]
NEG = [
    "terrible", "horrible", "boring", "dreadful", "awful", "tedious",
    "clumsy", "bland", "shallow", "lifeless", "annoying", "painful",
    "hollow", "sloppy", "dismal", "wooden", "grating", "aimless",
    "muddled", "stale", "dreary", "forgettable", "messy", "tiresome",
]
NOUNS = [
    "movie", "film", "story", "plot", "acting", "script", "scene", "ending",
    "dialogue", "pacing", "cast", "drama", "comedy", "thriller", "sequel",
    "director", "character", "soundtrack", "humor", "romance",
]
INTENS = ["truly", "really", "quite", "simply", "utterly", "rather", "genuinely", "almost"]

TAIL_ADJ = [
    "quirky", "offbeat", "uneven", "daring", "lavish", "austere", "frantic",
    "languid", "ornate", "rustic", "brisk", "stilted", "garish", "opaque",
    "jaunty", "morose", "placid", "sullen", "breezy", "turgid",
]
TAIL_NOUN = [
    "prologue", "epilogue", "subplot", "cameo", "framing", "lighting",
    "tempo", "motif", "backdrop", "vignette", "undertone", "flourish",
    "backstory", "voiceover", "interlude", "closeup", "overture", "texture",
    "cadence", "palette",
]
# long-shaped rare words so a capped vocabulary sees UNK targets of the
# same shape as unseen test words
TAIL_LONG = [
    "documentary", "storytelling", "collaboration", "introduction",
    "retrospective", "imagination", "presentation", "performance",
    "transition", "illustration", "inspiration", "exploration",
    "celebration", "observation", "conversation", "destination",
    "explanation", "declaration", "preparation", "recollection",
]
RARE = [
    "cinematography", "screenwriter", "narration", "choreography", "ambience",
    "protagonist", "symbolism", "atmosphere", "composition", "landscape",
]
BG_ONLY = [
    "critics", "praised", "audience", "review", "theater", "screen",
    "festival", "award", "season", "opening", "budget", "studio", "debut",
    "remake", "classic", "trilogy", "franchise", "premiere", "ticket",
    "crowd", "watched", "enjoyed", "admired", "discussed", "compared",
    "described", "impressed",
]

BASE_TEMPLATES = [
    ("the {noun} was {int} {adj}.", 1),
    ("this {noun} felt {adj} from start to finish.", 1),
    ("a {adj} {noun} with a {adj2} {noun2}.", 2),
    ("{int} {adj} and {adj2}, a {noun} to remember.", 2),
    ("i found the {noun} {int} {adj}.", 1),
    ("the {noun} seemed {adj}, and the {noun2} looked {adj2}.", 2),
    ("its {adj} {noun} shaped the whole {noun2}.", 1),
    ("{adj} {noun}, {adj2} {noun2}.", 2),
    ("the {noun} was {adj}, the {noun2} even more so.", 1),
    ("never has a {noun} been this {adj}.", 1),
]

TAIL_TEMPLATES = [
    ("the {noun} had a {adj} {tailnoun}.", "noun"),
    ("a {tailadj} {noun} that felt {adj}.", "adj"),
    ("the {taillong} of the {noun} felt {adj}.", "long"),
]

OOV_TEMPLATES = [
    "the {rare} was {int} {adj}.",
    "i found the {rare} {int} {adj}.",
    "the {rare} seemed {adj} from start to finish.",
    "its {adj} {rare} shaped the whole {noun}.",
]

BG_TEMPLATES = [
    "the {rare} of the {noun} was {int} {adj}.",
    "critics praised the {rare} and called the {noun} {adj}.",
    "the audience discussed the {adj} {rare} after the premiere.",
    "every review described the {rare} as {adj}.",
    "the studio compared the {noun} to a {adj} classic.",
    "the crowd at the festival watched the {adj} {noun}.",
    "a {tailadj} {noun} impressed the audience during the opening season.",
    "the {noun} enjoyed a {adj} debut on the big screen.",
    "critics admired the {tailnoun} and the {rare} of the {noun}.",
    "the award season praised this {adj} {noun} and its {rare}.",
]


def pick2(rng, pool):
    a = rng.choice(pool)
    b = rng.choice([w for w in pool if w != a])
    return a, b


def fill_base(rng, label):
    adjpool = POS if label == 1 else NEG
    tpl, _ = rng.choice(BASE_TEMPLATES)
    adj, adj2 = pick2(rng, adjpool)
    noun, noun2 = pick2(rng, NOUNS)
    return tpl.format(adj=adj, adj2=adj2, noun=noun, noun2=noun2,
                      int=rng.choice(INTENS))


def fill_tail(rng, label, tail_word, slot):
    adjpool = POS if label == 1 else NEG
    tpl = {s: t for t, s in TAIL_TEMPLATES}[slot]
    return tpl.format(noun=rng.choice(NOUNS), adj=rng.choice(adjpool),
                      tailnoun=tail_word, tailadj=tail_word, taillong=tail_word)


def fill_oov(rng, label, rare):
    adjpool = POS if label == 1 else NEG
    tpl = rng.choice(OOV_TEMPLATES)
    return tpl.format(rare=rare, adj=rng.choice(adjpool),
                      noun=rng.choice(NOUNS), int=rng.choice(INTENS))


def fill_bg(rng):
    tpl = rng.choice(BG_TEMPLATES)
    return tpl.format(rare=rng.choice(RARE), noun=rng.choice(NOUNS),
                      adj=rng.choice(POS + NEG), int=rng.choice(INTENS),
                      tailadj=rng.choice(TAIL_ADJ), tailnoun=rng.choice(TAIL_NOUN))


def main():
    rng = random.Random(20240803)
    OUT_DIR.mkdir(parents=True, exist_ok=True)

    # train: 320 base + 180 tail-bearing (each of the 60 tail words thrice)
    train = []
    for i in range(320):
        label = i % 2
        train.append((label, fill_base(rng, label)))
    tails = ([(w, "adj") for w in TAIL_ADJ] + [(w, "noun") for w in TAIL_NOUN]
             + [(w, "long") for w in TAIL_LONG])
    for rep in range(3):
        for w, slot in tails:
            label = rng.randint(0, 1)
            train.append((label, fill_tail(rng, label, w, slot)))
    rng.shuffle(train)

    dev = []
    for i in range(100):
        label = i % 2
        dev.append((label, fill_base(rng, label)))
    rng.shuffle(dev)

    # test: 104 base + 96 with one rare word
    test = []
    for i in range(104):
        label = i % 2
        test.append((label, fill_base(rng, label)))
    for i in range(96):
        label = i % 2
        test.append((label, fill_oov(rng, label, RARE[i % len(RARE)])))
    rng.shuffle(test)

    background = []
    for _ in range(450):
        background.append((0, fill_bg(rng)))
    for i in range(200):
        background.append((0, fill_base(rng, i % 2)))
    rng.shuffle(background)

    for name, rows in [("sentiment_train", train), ("sentiment_dev", dev),
                       ("sentiment_test", test), ("background", background)]:
        path = OUT_DIR / f"{name}.tsv"
        path.write_text("".join(f"{label}\t{text}\n" for label, text in rows),
                        encoding="utf-8")
        print(f"wrote {path} ({len(rows)} examples)")

    # report the statistics the corpus design must hit
    def words_of(rows):
        out = []
        for _, text in rows:
            out.extend(w.strip(".,").lower() for w in text.split())
        return [w for w in out if w]

    train_counts = Counter(words_of(train))
    test_words = words_of(test)
    rare_tokens = sum(1 for w in test_words if w in RARE)
    oov_tokens = sum(1 for w in test_words if w not in train_counts)
    print(f"train vocab size: {len(train_counts)}")
    cap = 120
    covered = sum(c for _, c in train_counts.most_common(cap))
    print(f"token coverage at cap={cap}: {covered / sum(train_counts.values()):.4f}")
    print(f"test rare-word token share: {rare_tokens / len(test_words):.4f}")
    print(f"test OOV-vs-train token share: {oov_tokens / len(test_words):.4f}")
    bg_counts = Counter(words_of(background))
    print(f"background vocab size: {len(bg_counts)}")
    print(f"rare-word counts in background: {[bg_counts[w] for w in RARE]}")


if __name__ == "__main__":
    main()
