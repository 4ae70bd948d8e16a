#!/usr/bin/env python3
"""Convert a Planetoid-style citation dataset to the line-oriented graph format.

The toolkit's `data/cora.graph` input (used by the acceptance gate's
citation-benchmark criterion and by `hdgcn train`) is produced from the
standard Planetoid pickles (ind.<name>.x / .y / .tx / .ty / .allx / .ally /
.graph / .test.index) as distributed with the original Planetoid code.

Usage:
    python3 tools/convert_planetoid.py --input-dir planetoid/data --name cora \
        --output data/cora.graph

Output format (one record per line):
    n <num_nodes>
    d <feature_dim>
    e <i> <j> <weight>      # undirected, i < j
    y <node> <class>
    m <node> train|val|test
    x <node> <v0> <v1> ...  # feature row

The standard split is reproduced: train = first 20 per class (the y/ty
ordering already encodes this: nodes 0..len(y)-1), val = next 500 nodes,
test = the indices from test.index.
"""

import argparse
import pickle
import sys
from pathlib import Path


def load_pickle(path: Path):
    with path.open("rb") as fh:
        return pickle.load(fh, encoding="latin1")


def to_dense_rows(mat):
    """Accepts a scipy sparse matrix or numpy array; returns list of lists."""
    if hasattr(mat, "todense"):
        mat = mat.todense()
    return [[float(v) for v in row] for row in mat.tolist()]


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--input-dir", required=True, type=Path,
                    help="directory holding the ind.<name>.* files")
    ap.add_argument("--name", default="cora", help="dataset name (cora/citeseer/pubmed)")
    ap.add_argument("--output", required=True, type=Path, help="graph file to write")
    args = ap.parse_args()

    d = args.input_dir
    x = load_pickle(d / f"ind.{args.name}.x")
    y = load_pickle(d / f"ind.{args.name}.y")
    tx = load_pickle(d / f"ind.{args.name}.tx")
    ty = load_pickle(d / f"ind.{args.name}.ty")
    allx = load_pickle(d / f"ind.{args.name}.allx")
    ally = load_pickle(d / f"ind.{args.name}.ally")
    graph = load_pickle(d / f"ind.{args.name}.graph")
    test_idx = [int(line) for line in (d / f"ind.{args.name}.test.index").read_text().split()]

    allx_rows = to_dense_rows(allx)
    tx_rows = to_dense_rows(tx)
    ally_rows = to_dense_rows(ally)
    ty_rows = to_dense_rows(ty)

    n = len(allx_rows) + len(tx_rows)
    dim = len(allx_rows[0])
    features = [[0.0] * dim for _ in range(n)]
    labels = [-1] * n
    for i, row in enumerate(allx_rows):
        features[i] = row
        labels[i] = max(range(len(ally_rows[i])), key=lambda c: ally_rows[i][c])
    # Test features/labels live at the (possibly permuted) test indices.
    sorted_test = sorted(test_idx)
    for row_pos, node in enumerate(test_idx):
        features[node] = tx_rows[row_pos]
        labels[node] = max(range(len(ty_rows[row_pos])), key=lambda c: ty_rows[row_pos][c])

    num_train = len(to_dense_rows(y))
    train = set(range(num_train))
    val = set(range(num_train, num_train + 500))
    test = set(sorted_test)

    edges = set()
    for src, nbrs in graph.items():
        for dst in nbrs:
            if src == dst:
                continue
            a, b = (src, dst) if src < dst else (dst, src)
            edges.add((a, b))

    args.output.parent.mkdir(parents=True, exist_ok=True)
    with args.output.open("w") as out:
        out.write(f"n {n}\n")
        out.write(f"d {dim}\n")
        for a, b in sorted(edges):
            out.write(f"e {a} {b} 1\n")
        for node in range(n):
            if labels[node] >= 0:
                out.write(f"y {node} {labels[node]}\n")
        for node in range(n):
            if node in test:
                out.write(f"m {node} test\n")
            elif node in train:
                out.write(f"m {node} train\n")
            elif node in val:
                out.write(f"m {node} val\n")
        for node in range(n):
            vals = " ".join(f"{v:.17g}" for v in features[node])
            out.write(f"x {node} {vals}\n")
    print(f"wrote {args.output}: {n} nodes, {len(edges)} edges, dim {dim}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
