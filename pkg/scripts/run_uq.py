"""Train a hybrid, then report uncertainty and coverage with deterministic and randomised sets.

    python scripts/run_uq.py configs/hybrid.ini
"""

import argparse

from hqcpinn.cli import ExperimentConfig, main as cli_main
from hqcpinn.diagnostics import read_table


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("config")
    args = ap.parse_args()

    cfg = ExperimentConfig.load(args.config)
    out = cfg.out_dir
    if not (out / "model.npz").exists() and cli_main(["train", args.config]) != 0:
        raise SystemExit("training failed")
    for randomized in (False, True):
        cfg.values["uq"]["randomized_sets"] = randomized
        path = out / f"uq_{'randomized' if randomized else 'deterministic'}.ini"
        cfg.write(path, "uq")
        if cli_main(["uq", str(path)]) != 0:
            raise SystemExit("uq failed")
        s = read_table(out / "uq_summary.csv")[0]
        kind = "randomised" if randomized else "deterministic"
        print(f"{kind:>13}: coverage {float(s['coverage']):.3f} mean set size {float(s['mean_set_size']):.2f} entropy {float(s['entropy']):.3f}")


if __name__ == "__main__":
    main()
