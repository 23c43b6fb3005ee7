#!/usr/bin/env python3
"""Seed data/openml-cache and data/local from locally available copies.

The OpenML host is not reachable from the build sandbox, so the raw payloads
(description JSON + ARFF) are regenerated here in the same format the REST
API serves. `tabcl fetch` then finds them as a warm cache.

    python3 tools/build_offline_cache.py --biopsy MASS/biopsy.csv \
        --pima-tr MASS/Pima.tr.csv --pima-te MASS/Pima.te.csv
"""
import argparse
import csv
import hashlib
import itertools
import json
import os
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def write_payload(did, name, target, attributes, rows, out_root):
    lines = [f"@RELATION {name}", ""]
    for attr, kind in attributes:
        decl = kind if isinstance(kind, str) else "{" + ",".join(kind) + "}"
        lines.append(f"@ATTRIBUTE '{attr}' {decl}")
    lines += ["", "@DATA"]
    lines += [",".join(str(v) for v in r) for r in rows]
    arff = "\n".join(lines) + "\n"
    d = out_root / str(did)
    d.mkdir(parents=True, exist_ok=True)
    (d / "data.arff").write_text(arff)
    desc = {
        "data_set_description": {
            "id": str(did),
            "name": name,
            "format": "ARFF",
            "file_id": str(did),
            "default_target_attribute": target,
            "md5_checksum": hashlib.md5(arff.encode()).hexdigest(),
            "status": "active",
        }
    }
    (d / "description.json").write_text(json.dumps(desc, indent=2) + "\n")
    print(f"DID {did}: {len(rows)} rows, {len(attributes) - 1} features")


def breast_w(path):
    names = ["Clump_Thickness", "Cell_Size_Uniformity", "Cell_Shape_Uniformity", "Marginal_Adhesion",
             "Single_Epi_Cell_Size", "Bare_Nuclei", "Bland_Chromatin", "Normal_Nucleoli", "Mitoses"]
    rows = []
    with open(path) as f:
        for rec in csv.DictReader(f):
            vals = ["?" if rec[f"V{i}"] in ("NA", "") else rec[f"V{i}"] for i in range(1, 10)]
            rows.append(vals + [rec["class"]])
    attrs = [(n, "NUMERIC") for n in names] + [("Class", ["benign", "malignant"])]
    return attrs, rows


def wdbc():
    import sklearn.datasets
    ds = sklearn.datasets.load_breast_cancer()
    rows = []
    for x, y in zip(ds.data, ds.target):
        # sklearn codes malignant as 0; OpenML wdbc uses 1 = benign, 2 = malignant.
        rows.append([repr(float(v)) for v in x] + ["2" if y == 0 else "1"])
    attrs = [(f"V{i}", "NUMERIC") for i in range(1, 31)] + [("Class", ["1", "2"])]
    return attrs, rows


def balance_scale():
    rows = []
    for lw, ld, rw, rd in itertools.product(range(1, 6), repeat=4):
        left, right = lw * ld, rw * rd
        cls = "B" if left == right else ("L" if left > right else "R")
        rows.append([cls, lw, ld, rw, rd])
    attrs = [("class", ["L", "B", "R"]), ("left-weight", "NUMERIC"), ("left-distance", "NUMERIC"),
             ("right-weight", "NUMERIC"), ("right-distance", "NUMERIC")]
    return attrs, rows


def winner(board):
    lines = [(0, 1, 2), (3, 4, 5), (6, 7, 8), (0, 3, 6), (1, 4, 7), (2, 5, 8), (0, 4, 8), (2, 4, 6)]
    for a, b, c in lines:
        if board[a] != "b" and board[a] == board[b] == board[c]:
            return board[a]
    return None


def tic_tac_toe():
    # Every terminal position reachable with x moving first.
    seen, rows = set(), []

    def play(board, turn):
        w = winner(board)
        if w or "b" not in board:
            key = "".join(board)
            if key not in seen:
                seen.add(key)
                rows.append(list(board) + ["positive" if w == "x" else "negative"])
            return
        for i in range(9):
            if board[i] == "b":
                board[i] = turn
                play(board, "o" if turn == "x" else "x")
                board[i] = "b"

    play(["b"] * 9, "x")
    rows.sort()
    squares = ["top-left", "top-middle", "top-right", "middle-left", "middle-middle", "middle-right",
               "bottom-left", "bottom-middle", "bottom-right"]
    attrs = [(f"{s}-square", ["b", "o", "x"]) for s in squares] + [("Class", ["negative", "positive"])]
    return attrs, rows


def pima(tr, te, out_dir):
    out_dir.mkdir(parents=True, exist_ok=True)
    cols = ["npreg", "glu", "bp", "skin", "bmi", "ped", "age"]
    with open(out_dir / "pima.csv", "w", newline="") as out:
        w = csv.writer(out)
        w.writerow(cols + ["type"])
        n = 0
        for path in (tr, te):
            with open(path) as f:
                for rec in csv.DictReader(f):
                    w.writerow([rec[c] for c in cols] + [rec["type"]])
                    n += 1
    schema = {"label": "type", "classes": ["No", "Yes"],
              "features": [{"name": c, "kind": "numerical"} for c in cols]}
    (out_dir / "pima.schema.json").write_text(json.dumps(schema, indent=2) + "\n")
    print(f"pima: {n} rows, {len(cols)} features")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--biopsy", required=True, help="MASS biopsy.csv")
    ap.add_argument("--pima-tr", required=True, help="MASS Pima.tr.csv")
    ap.add_argument("--pima-te", required=True, help="MASS Pima.te.csv")
    ap.add_argument("--out", default=str(ROOT / "data"))
    args = ap.parse_args()
    cache = Path(args.out) / "openml-cache"
    write_payload(15, "breast-w", "Class", *breast_w(args.biopsy), cache)
    write_payload(1510, "wdbc", "Class", *wdbc(), cache)
    write_payload(11, "balance-scale", "class", *balance_scale(), cache)
    write_payload(50, "tic-tac-toe", "Class", *tic_tac_toe(), cache)
    pima(args.pima_tr, args.pima_te, Path(args.out) / "local")


if __name__ == "__main__":
    main()
