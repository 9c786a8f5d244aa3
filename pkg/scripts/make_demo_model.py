#!/usr/bin/env python3
"""Write a small random model plus matching input vectors, for trying the CLI.

    python scripts/make_demo_model.py demo
    treegrate inspect demo/model.json
    treegrate compile demo/model.json -o demo/model.c
    treegrate predict demo/model.json demo/vectors.txt
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from treegrate.model import save_model
from treegrate.verify import (
    EnsembleSpec,
    UniformInputs,
    generate_vectors,
    random_ensemble,
    write_vectors_file,
)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("outdir", type=Path)
    parser.add_argument("--trees", type=int, default=10)
    parser.add_argument("--features", type=int, default=5)
    parser.add_argument("--classes", type=int, default=3)
    parser.add_argument("--depth", type=int, default=4)
    parser.add_argument("--vectors", type=int, default=20)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    spec = EnsembleSpec(
        num_features=args.features,
        num_classes=args.classes,
        num_trees=args.trees,
        max_depth=args.depth,
    )
    ensemble = random_ensemble(spec, seed=args.seed)
    args.outdir.mkdir(parents=True, exist_ok=True)
    (args.outdir / "model.json").write_text(save_model(ensemble))
    write_vectors_file(
        args.outdir / "vectors.txt",
        generate_vectors(
            ensemble, args.vectors, args.seed + 1, UniformInputs(nan_rate=0.05)
        ),
    )
    print(f"wrote {args.outdir}/model.json and {args.outdir}/vectors.txt")
    return 0


if __name__ == "__main__":
    sys.exit(main())
