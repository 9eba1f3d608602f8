#!/usr/bin/env python3
"""Build data/adult.csv and data/adult.schema.json from a raw adult-census file.

Accepts either the UCI ``adult.data`` file (15 columns, no header) or a
headered CSV carrying the same records (e.g. the copy bundled with the ``xai``
package, which omits ``fnlwgt`` and ``native-country``). Rows with a missing
value (``?``) are dropped; ``fnlwgt`` and ``native-country`` are not kept so
that both sources produce the same table.

    python scripts/prepare_adult.py RAW_FILE [--out-dir data]
"""
import argparse
import csv
from pathlib import Path

from nuncf.dataset import infer_schema

UCI_COLUMNS = ["age", "workclass", "fnlwgt", "education", "education-num", "marital-status",
               "occupation", "relationship", "race", "sex", "capital-gain", "capital-loss",
               "hours-per-week", "native-country", "income"]
KEEP = ["age", "workclass", "education", "education-num", "marital-status", "occupation",
        "relationship", "race", "sex", "capital-gain", "capital-loss", "hours-per-week", "income"]
RENAME = {"ethnicity": "race", "gender": "sex", "loan": "income"}


def read_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [[c.strip() for c in r] for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if rows[0][0] in ("", "age") or "age" in rows[0]:
        header = [RENAME.get(h, h) for h in rows[0]]
        body = rows[1:]
    else:
        header, body = UCI_COLUMNS, rows
    return header, body


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("raw")
    ap.add_argument("--out-dir", default="data")
    args = ap.parse_args(argv)

    header, body = read_rows(args.raw)
    pos = [header.index(c) for c in KEEP]
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    kept = 0
    with open(out_dir / "adult.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(KEEP)
        for row in body:
            vals = [row[p].rstrip(".") for p in pos]   # adult.test labels end in '.'
            if "?" in vals:
                continue
            w.writerow(vals)
            kept += 1
    infer_schema(out_dir / "adult.csv", "income").save(out_dir / "adult.schema.json")
    print(f"wrote {kept} rows to {out_dir / 'adult.csv'}")


if __name__ == "__main__":
    main()
