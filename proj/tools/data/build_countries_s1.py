#!/usr/bin/env python3
"""Rebuild the Countries S1 link-prediction dataset from mledoze country data.

Input is the ``countries.json`` shipped in the npm package ``world-countries@1.4.0``.
The output directory receives ``train.tsv``, ``valid.tsv`` and ``test.tsv``.

Graph:
  * ``c neighborOf d`` for every land border (symmetrised; a few upstream
    country codes are misspelled and get corrected).
  * ``c locatedIn subregion``, ``c locatedIn region`` and
    ``subregion locatedIn region``.

S1 split: 24 test and 24 validation countries (drawn with a fixed seed among
countries that have at least one neighbour) lose their ``locatedIn region``
fact, which becomes the held-out triple. Everything else is training data.
"""

import argparse
import json
import random
import re
import unicodedata
from pathlib import Path

CODE_FIXES = {"LDY": "LBY", "PRU": "PER", "The Gambia": "GMB", "Burma": "MMR"}
# Country names that clash with a subregion name.
NAME_FIXES = {"micronesia": "Federated States of Micronesia"}


def slug(text: str) -> str:
    text = unicodedata.normalize("NFKD", text).encode("ascii", "ignore").decode()
    text = re.sub(r"[^A-Za-z0-9 ]+", "", text).strip().lower()
    return re.sub(r"\s+", "_", text)


def display_name(country: dict) -> str:
    name = country["name"]
    name = name["common"] if isinstance(name, dict) else name
    return NAME_FIXES.get(slug(name), name)


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("countries_json", type=Path)
    ap.add_argument("out_dir", type=Path)
    ap.add_argument("--seed", type=int, default=1234)
    ap.add_argument("--held-out", type=int, default=24)
    args = ap.parse_args()

    raw = json.loads(args.countries_json.read_text())
    countries = {c["cca3"]: c for c in raw if c["region"]}
    names = {code: slug(display_name(c)) for code, c in countries.items()}

    borders = set()
    for code, c in countries.items():
        for b in c["borders"]:
            b = CODE_FIXES.get(b, b)
            if b in countries:
                borders.add((code, b))
                borders.add((b, code))

    triples = []
    for a, b in sorted(borders, key=lambda p: (names[p[0]], names[p[1]])):
        triples.append((names[a], "neighborOf", names[b]))
    located = {}
    sub_region = set()
    for code in sorted(countries, key=names.get):
        c = countries[code]
        region = slug(c["region"])
        sub = slug(c["subregion"])
        triples.append((names[code], "locatedIn", sub))
        located[names[code]] = (names[code], "locatedIn", region)
        sub_region.add((sub, "locatedIn", region))
    triples.extend(sorted(sub_region))

    with_neighbors = sorted({names[a] for a, _ in borders})
    rng = random.Random(args.seed)
    picked = rng.sample(with_neighbors, 2 * args.held_out)
    test_c, valid_c = picked[: args.held_out], picked[args.held_out :]
    held = set(test_c) | set(valid_c)

    train = triples + [located[n] for n in sorted(located) if n not in held]
    valid = [located[n] for n in sorted(valid_c)]
    test = [located[n] for n in sorted(test_c)]

    args.out_dir.mkdir(parents=True, exist_ok=True)
    for split, rows in (("train", train), ("valid", valid), ("test", test)):
        with open(args.out_dir / f"{split}.tsv", "w") as fh:
            for s, p, o in rows:
                fh.write(f"{s}\t{p}\t{o}\n")

    ents = {x for s, _, o in train + valid + test for x in (s, o)}
    print(f"entities={len(ents)} train={len(train)} valid={len(valid)} test={len(test)}")


if __name__ == "__main__":
    main()
