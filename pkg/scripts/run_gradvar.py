"""Gradient variance over random circuit initialisations, physics on vs off, across seeds and sizes.

    python scripts/run_gradvar.py --sizes 4x2 8x3 --inits 100 --seeds 5 --out runs/gradvar.csv
"""

import argparse

from hqcpinn.circuit import CircuitSpec
from hqcpinn.diagnostics import gradient_variance_study, write_table
from hqcpinn.physics import PhysicsConfig
from hqcpinn.reference_solver import ScenarioSpec, generate_dataset, temporal_split


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", nargs="+", default=["4x2", "6x2", "8x3"], help="QUBITSxLAYERS")
    ap.add_argument("--inits", type=int, default=100)
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--out", default="runs/gradvar.csv")
    args = ap.parse_args()

    tr, _, _ = temporal_split(generate_dataset(ScenarioSpec(seed=3)))
    rows = []
    for size in args.sizes:
        n, L = map(int, size.lower().split("x"))
        for seed in range(args.seeds):
            rep = gradient_variance_study(CircuitSpec(n, L), PhysicsConfig(), tr.features, tr.labels, args.inits, seed)
            for r in rep.rows():
                rows.append(r | {"qubits": n, "layers": L, "seed": seed})
            print(f"{n}q/{L}L seed {seed}: on {rep.mean_on:.3e} off {rep.mean_off:.3e}")
    write_table(rows, ["qubits", "layers", "seed", "quantity", "mean_variance", "max_variance", "n_inits"], args.out)


if __name__ == "__main__":
    main()
