#!/usr/bin/env python3
"""Independent reference computation for the golden preprocessing fixture.

Reads triples.csv, merge_map.csv and abbreviations.csv from this directory and
writes expected_report.json and expected_triples.csv. Defaults mirror the
pipeline defaults: min_relation_count=3, relabel to "other", no second pass.

Run: python3 oracle.py
"""

import csv
import io
import json
import os
import re
from collections import Counter

HERE = os.path.dirname(os.path.abspath(__file__))
MIN_COUNT = 3
OTHER = "other"


def norm(label):
    label = label.lower().replace("-", " ").replace("_", " ")
    return re.sub(r"\s+", " ", label).strip()


def read_rows(name):
    with open(os.path.join(HERE, name), newline="", encoding="utf-8") as fh:
        return [row for row in csv.reader(fh)]


def load_triples():
    out = []
    for row in read_rows("triples.csv"):
        if len(row) < 3:
            continue
        s, p, o = row[0].strip(), norm(row[1]), row[2].strip()
        if not s or not p or not o:
            continue
        paper = row[3].strip() if len(row) > 3 and row[3].strip() else None
        source = row[4].strip() if len(row) > 4 and row[4].strip() else None
        mult = int(row[5]) if len(row) > 5 and row[5].strip() else 1
        out.append({"s": s, "p": p, "o": o, "paper": paper, "source": source, "m": mult})
    return out


def weighted(triples):
    c = Counter()
    for t in triples:
        c[t["p"]] += t["m"]
    return c


def freq_table(triples):
    c = weighted(triples)
    return [
        {"relation": rel, "count": n}
        for rel, n in sorted(c.items(), key=lambda kv: (-kv[1], kv[0]))
    ]


def main():
    triples = load_triples()
    merge = {norm(a): norm(b) for a, b in read_rows("merge_map.csv")}
    abbrev = {norm(a): b.strip() for a, b in read_rows("abbreviations.csv")}

    before = freq_table(triples)
    input_triples = len(triples)
    input_weight = sum(t["m"] for t in triples)

    # stage I: relabel tail
    counts = weighted(triples)
    tail = {p for p, n in counts.items() if n < MIN_COUNT and p != OTHER}
    triples_consolidated = 0
    for t in triples:
        if t["p"] in tail:
            t["p"] = OTHER
            triples_consolidated += 1

    # stage II: merge map
    merged_labels = set()
    triples_merged = 0
    for t in triples:
        if t["p"] in merge:
            merged_labels.add(t["p"])
            t["p"] = merge[t["p"]]
            triples_merged += 1

    # stage III: dedup, brute-force pairwise comparison against kept rows
    kept = []
    for t in triples:
        key = (norm(t["s"]), t["p"], norm(t["o"]))
        match = None
        for k in kept:
            if (norm(k["s"]), k["p"], norm(k["o"])) == key:
                match = k
                break
        if match is None:
            kept.append(dict(t))
        else:
            match["m"] += t["m"]

    # stage IV: integrity against abbreviation table
    missing = sorted({t["p"] for t in kept} - set(abbrev))

    report = {
        "input_triples": input_triples,
        "input_weight": input_weight,
        "relations_consolidated": len(tail),
        "triples_consolidated": triples_consolidated,
        "relations_merged": len(merged_labels),
        "triples_merged": triples_merged,
        "duplicates_removed": len(triples) - len(kept),
        "labels_missing_abbrev": len(missing),
        "missing_abbreviations": missing,
        "output_triples": len(kept),
        "output_weight": sum(k["m"] for k in kept),
        "frequency_before": before,
        "frequency_after": freq_table(kept),
    }
    with open(os.path.join(HERE, "expected_report.json"), "w", encoding="utf-8") as fh:
        fh.write(json.dumps(report, indent=2, ensure_ascii=False) + "\n")

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["subject", "predicate", "object", "paper_id", "source", "multiplicity"])
    for k in kept:
        w.writerow([k["s"], k["p"], k["o"], k["paper"] or "", k["source"] or "", k["m"]])
    with open(os.path.join(HERE, "expected_triples.csv"), "w", encoding="utf-8") as fh:
        fh.write(buf.getvalue())


if __name__ == "__main__":
    main()
