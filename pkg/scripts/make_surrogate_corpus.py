#!/usr/bin/env python3
"""Generate a 4-class news-like surrogate corpus in the AG News CSV layout.

For pipeline exercises on machines without the real corpus: each class mixes
its own topical vocabulary with a shared pool and a little cross-class noise,
so neither branch of the model gets a free ride. This is NOT AG News and
results on it say nothing about accuracy on the real corpus.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from agff.rng import Rng

CLASSES = ("World", "Sports", "Business", "Sci/Tech")

TOPICAL = {
    0: ["minister", "border", "treaty", "embassy", "election", "parliament",
        "diplomat", "sanctions", "summit", "regime", "ceasefire", "province",
        "refugee", "coalition", "envoy", "unrest", "protest", "capital"],
    1: ["coach", "season", "playoff", "striker", "tournament", "scored",
        "championship", "stadium", "injury", "defender", "goalkeeper",
        "innings", "league", "halftime", "contract", "transfer", "title",
        "finals"],
    2: ["shares", "earnings", "profit", "investor", "quarterly", "merger",
        "stocks", "revenue", "forecast", "dividend", "acquisition", "market",
        "inflation", "lender", "bankruptcy", "regulator", "ipo", "retail"],
    3: ["software", "satellite", "researchers", "spacecraft", "browser",
        "processor", "telescope", "genome", "robotics", "encryption", "server",
        "vaccine", "quantum", "startup", "chipmaker", "laboratory", "orbit"],
}

SHARED = ["the", "a", "of", "in", "on", "after", "new", "report", "today",
          "week", "group", "officials", "announced", "plans", "amid", "says",
          "first", "major", "latest", "two", "year", "deal", "talks", "move",
          "record", "top", "key", "rise", "fall", "against", "over", "under",
          "before", "between", "during", "leader", "team", "company", "study",
          "people", "world", "city", "national", "public", "early", "late"]


def _pick(rng: Rng, pool: list[str]) -> str:
    return pool[int(rng.uniform(()) * len(pool))]


def make_rows(num_rows: int, seed: int) -> list[tuple[int, str, str]]:
    rng = Rng(seed)
    rows = []
    for i in range(num_rows):
        label = i % 4
        own = TOPICAL[label]
        other = TOPICAL[(label + 1 + int(rng.uniform(()) * 3)) % 4]

        def word():
            r = rng.uniform(())
            if r < 0.55:
                return _pick(rng, SHARED)
            if r < 0.92:
                return _pick(rng, own)
            return _pick(rng, other)  # cross-topic noise

        title = " ".join(word() for _ in range(6)).capitalize()
        desc = " ".join(word() for _ in range(28)).capitalize() + "."
        rows.append((label + 1, title, desc))
    return rows


def write_csv(path: Path, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, quoting=csv.QUOTE_ALL)
        writer.writerows(rows)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out-dir", required=True)
    parser.add_argument("--train-size", type=int, default=12000)
    parser.add_argument("--test-size", type=int, default=3000)
    parser.add_argument("--seed", type=int, default=20240)
    args = parser.parse_args()

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "train.csv", make_rows(args.train_size, args.seed))
    write_csv(out / "test.csv", make_rows(args.test_size, args.seed + 1))
    print(f"wrote {args.train_size}+{args.test_size} rows to {out}")


if __name__ == "__main__":
    main()
