"""Tree-spec files: parsing, validation, digests, and the CLI.

Trees live in a strict TOML dialect (see trees/*.tree).  This demo
round-trips the shipped files and shows the equivalent CLI calls.  Run:

    python demos/05_tree_files.py
"""

from pathlib import Path

from poptree import (
    informed_leaves,
    load_tree_file,
    serialize_tree_spec,
    tree_digest,
    validate_tree,
)

trees_dir = Path(__file__).resolve().parent.parent / "trees"

for name in ("full_opioid.tree", "simple_opioid.tree", "full_opioid_bayes.tree"):
    tree, priors, _ = load_tree_file(trees_dir / name)
    leaves = [p.leaf for p in informed_leaves(tree)]
    print(f"{name}: {tree.name}")
    print(f"  violations: {validate_tree(tree) or 'none'}")
    print(f"  informed leaves ({len(leaves)}): {', '.join(leaves)}")
    print(f"  digest: {tree_digest(tree, priors)[:20]}...")
    if priors is not None:
        groups = ", ".join(f"{g.name}@{g.parent}" for g in priors.groups)
        print(f"  bayes priors: root {priors.root.kind}, groups {groups}")
    round_trip = serialize_tree_spec(tree, priors)
    assert round_trip == (trees_dir / name).read_text()
    print("  serialization round-trips byte-identically")
    print()

print("CLI equivalents:")
print("  poptree validate trees/full_opioid.tree")
print("  poptree wmm trees/full_opioid.tree --iterations 10000 --seed 1 --out out/wmm")
print("  poptree bayes trees/full_opioid_bayes.tree --chains 6 --iterations 200000 \\")
print("      --burn-in 100000 --thin 10 --seed 1 --out out/bayes")
print("  poptree report out/wmm")
