"""Generate a noisy world, identify its deposits, match them, and score the result.

    python3 demos/closed_loop.py [seed]
"""

import sys
from collections import Counter

from bridgelink.matcher import score
from bridgelink.pipeline import extract, identify_loo, match_deposits, parse_deposits, registry_for, relevant_for, train_bundle
from bridgelink.synth import DEPOSIT, generate, preset


def main(seed=0):
    world = generate(preset("noisy", seed=seed, pairs=200, non_deposits=200))
    src = world.spec.source_chain
    reg = registry_for(world.configs, src, world.abis.get(src))
    rel = relevant_for(world.configs, src)
    samples = [extract(world.store, src, h, reg, rel, lab.bridge, lab.label) for h, lab in world.truth.labeled(src)]
    print(f"{len(samples)} bridge transactions on {src}")

    # held-out accuracy first, then one model on everything for the predictions we act on
    table = identify_loo(samples, ("structural", "fused"), T=50, seed=seed)
    for bridge in sorted(table["fused"]):
        print(f"  {bridge:8s} structural {float(table['structural'][bridge]):.3f}  fused {float(table['fused'][bridge]):.3f}")
    model = train_bundle(samples, "fused", T=50, seed=seed)
    predicted = [s.tx_hash for s, (label, _) in zip(samples, model.predict(samples)) if label == DEPOSIT]

    rows = parse_deposits(world.store, src, predicted, world.configs, reg)
    results = match_deposits(rows, world.configs, world.store, workers=4)
    rates = score(results, world.truth.withdrawal_of())
    deleted = sum(p.deleted for p in world.truth.pairs)
    print(f"{len(rows)} predicted deposits, {deleted} withdrawals were deleted from the ledger")
    print("outcomes:", dict(Counter(r.outcome for r in results)))
    print("rates:", rates.rendered())


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 0)
