"""Ablation table over several seeds by driving the ``ablate`` command.

    python scripts/run_ablation.py configs/ablation.ini --seeds 3
"""

import argparse
from pathlib import Path

from hqcpinn.cli import ExperimentConfig, main as cli_main
from hqcpinn.diagnostics import read_table, write_table


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("config")
    ap.add_argument("--seeds", type=int, default=3)
    args = ap.parse_args()

    base = ExperimentConfig.load(args.config)
    root = base.out_dir
    rows = []
    for seed in range(args.seeds):
        cfg = ExperimentConfig.load(args.config)
        cfg.values["run"]["out_dir"] = str(root / f"seed{seed}")
        cfg.values["run"]["seed"] = seed
        root.mkdir(parents=True, exist_ok=True)
        path = root / f"seed{seed}.ini"
        cfg.write(path, "ablate")
        if cli_main(["ablate", str(path)]) != 0:
            raise SystemExit(f"ablate failed for seed {seed}")
        rows += [r | {"seed": seed} for r in read_table(Path(cfg.out_dir) / "ablation.csv")]
    write_table(rows, ["seed", "configuration", "accuracy", "macro_f1", "epochs_to_target", "params"], root / "ablation_seeds.csv")
    print(f"wrote {root / 'ablation_seeds.csv'}")


if __name__ == "__main__":
    main()
