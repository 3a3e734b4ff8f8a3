#!/usr/bin/env python3
"""Download the UCI soybean-small dataset into data/soybean_small.csv.

The file is 47 rows of 35 integer-coded categorical attributes with a class
label (D1..D4) in the last field. The download is validated (row count,
field count, class sizes 10/10/10/17) before anything is written.
"""

import sys
import urllib.request
from collections import Counter
from pathlib import Path

URLS = [
    "https://archive.ics.uci.edu/ml/machine-learning-databases/soybean/soybean-small.data",
    "https://raw.githubusercontent.com/jbrownlee/Datasets/master/soybean-small.data",
]

OUT = Path(__file__).resolve().parent / "soybean_small.csv"
EXPECTED_CLASSES = {"D1": 10, "D2": 10, "D3": 10, "D4": 17}


def fetch() -> str:
    errors = []
    for url in URLS:
        try:
            with urllib.request.urlopen(url, timeout=30) as resp:
                return resp.read().decode("utf-8")
        except Exception as exc:  # noqa: BLE001 - report and try the mirror
            errors.append(f"  {url}: {exc}")
    sys.exit("could not download soybean-small.data:\n" + "\n".join(errors))


def main() -> None:
    rows = [line.strip() for line in fetch().splitlines() if line.strip()]
    if len(rows) != 47:
        sys.exit(f"expected 47 rows, got {len(rows)}")
    parsed = []
    for i, row in enumerate(rows, start=1):
        fields = row.split(",")
        if len(fields) != 36:
            sys.exit(f"row {i}: expected 35 attributes + class, got {len(fields)} fields")
        *attrs, cls = fields
        if cls not in EXPECTED_CLASSES:
            sys.exit(f"row {i}: unexpected class {cls!r}")
        for j, a in enumerate(attrs, start=1):
            int(a)  # raises if an attribute is not an integer code
        parsed.append((attrs, cls))
    counts = Counter(cls for _, cls in parsed)
    if dict(counts) != EXPECTED_CLASSES:
        sys.exit(f"class sizes {dict(counts)} differ from {EXPECTED_CLASSES}")

    header = ",".join(f"a{j}" for j in range(1, 36)) + ",class"
    body = "\n".join(",".join(attrs) + f",{cls}" for attrs, cls in parsed)
    OUT.write_text(header + "\n" + body + "\n")
    print(f"wrote {OUT} ({len(parsed)} rows)")


if __name__ == "__main__":
    main()
