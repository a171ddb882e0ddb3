"""Epochs-to-target for physics-on, physics-off and transfer-learning hybrids over several seeds.

    python scripts/run_convergence.py --seeds 5 --qubits 4 --layers 2 --out runs/convergence.csv
"""

import argparse
import time

from hqcpinn.circuit import CircuitSpec
from hqcpinn.diagnostics import write_table
from hqcpinn.hybrid_model import HybridModel, Scaler, TrainConfig, fit, transfer_protocol
from hqcpinn.physics import PhysicsConfig
from hqcpinn.reference_solver import ScenarioSpec, generate_dataset, synthesize_multihazard, temporal_split


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--qubits", type=int, default=4)
    ap.add_argument("--layers", type=int, default=2)
    ap.add_argument("--collocation", type=int, default=16)
    ap.add_argument("--pretrain-records", type=int, default=4000)
    ap.add_argument("--pretrain-epochs", type=int, default=20)
    ap.add_argument("--out", default="runs/convergence.csv")
    args = ap.parse_args()

    tr, va, _ = temporal_split(generate_dataset(ScenarioSpec(seed=3)))
    spec = CircuitSpec(args.qubits, args.layers)
    arms = {
        "physics_on": PhysicsConfig(n_collocation=args.collocation),
        "physics_off": PhysicsConfig(lambda_sv=0.0, lambda_m=0.0, n_collocation=args.collocation),
    }
    rows = []
    for seed in range(args.seeds):
        cfg = TrainConfig(seed=seed)
        for arm, physics in arms.items():
            t0 = time.perf_counter()
            model = HybridModel.create(spec, seed, scaler=Scaler.fit(tr.features))
            _, trace = fit(model, tr.xy, va.xy, physics, cfg)
            rows.append({"seed": seed, "arm": arm, "epochs_to_target": trace.epochs_to_target, "best_epoch": trace.best_epoch, "seconds": time.perf_counter() - t0})
            print(rows[-1])
        t0 = time.perf_counter()
        pre = synthesize_multihazard(tr, args.pretrain_records, seed)
        _, _, trace = transfer_protocol(pre.xy, tr.xy, va.xy, spec, arms["physics_on"], TrainConfig(max_epochs=args.pretrain_epochs, seed=seed), cfg)
        rows.append({"seed": seed, "arm": "transfer", "epochs_to_target": trace.epochs_to_target, "best_epoch": trace.best_epoch, "seconds": time.perf_counter() - t0})
        print(rows[-1])
    write_table(rows, ["seed", "arm", "epochs_to_target", "best_epoch", "seconds"], args.out)


if __name__ == "__main__":
    main()
