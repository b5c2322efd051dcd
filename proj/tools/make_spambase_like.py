#!/usr/bin/env python3
"""Generate a synthetic table shaped like the UCI spambase data.

57 non-negative features (48 word frequencies, 6 character frequencies and
3 capital-run statistics) and a binary `spam` label with ~39% positives.
Most frequency cells are zero, non-zero ones are skewed, and the label is
only partly predictable, so tree models land around 90% accuracy.

    python3 tools/make_spambase_like.py --rows 3000 --seed 7 --out tests/data/spambase_like.csv
"""

import argparse

import numpy as np


def generate(rows: int, seed: int) -> tuple[list[str], np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed)
    y = (rng.random(rows) < 0.394).astype(int)

    n_word, n_char = 48, 6
    names = [f"word_freq_{i}" for i in range(n_word)]
    names += [f"char_freq_{i}" for i in range(n_char)]
    names += ["capital_run_length_average", "capital_run_length_longest", "capital_run_length_total"]

    # Per-feature presence rates for ham/spam; a third of the features carry signal.
    base = rng.uniform(0.05, 0.45, n_word + n_char)
    lift = rng.normal(0.0, 0.3, n_word + n_char)
    informative = rng.random(n_word + n_char) < 0.35
    lift[~informative] *= 0.15
    scale = rng.uniform(0.1, 1.2, n_word + n_char)

    # A latent "spamminess" per row blurs the classes.
    latent = rng.normal(0.0, 1.0, rows) + 1.9 * (2 * y - 1)
    X = np.zeros((rows, len(names)))
    for j in range(n_word + n_char):
        logit = np.log(base[j] / (1 - base[j])) + 2.2 * lift[j] * latent
        present = rng.random(rows) < 1 / (1 + np.exp(-logit))
        amount = rng.exponential(scale[j] * (1 + 0.4 * np.tanh(lift[j] * latent)), rows)
        X[:, j] = np.where(present, np.round(amount, 2), 0.0)
    X[:, : n_word + n_char] = np.clip(X[:, : n_word + n_char], 0.0, 100.0)

    avg = np.exp(rng.normal(0.8 + 0.35 * latent, 0.6))
    longest = np.maximum(1, np.round(avg * np.exp(rng.normal(1.2 + 0.2 * latent, 0.7))))
    total = np.maximum(longest, np.round(longest * np.exp(rng.normal(1.8 + 0.25 * latent, 0.9))))
    X[:, -3] = np.round(np.maximum(avg, 1.0), 3)
    X[:, -2] = longest
    X[:, -1] = total
    return names, X, y


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--rows", type=int, default=3000)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--out", required=True)
    args = ap.parse_args()

    names, X, y = generate(args.rows, args.seed)
    with open(args.out, "w", newline="\n") as f:
        f.write(",".join(names + ["spam"]) + "\n")
        for row, label in zip(X, y):
            f.write(",".join(f"{v:g}" for v in row) + f",{label}\n")


if __name__ == "__main__":
    main()
