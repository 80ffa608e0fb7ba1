"""Ablation table on the synthetic benchmark (DSTR, NDT, NDR, NHD, UB, LB).

    python scripts/run_ablations.py --seeds 5
"""

import argparse
import json
from pathlib import Path

from dstr.pipeline import ABLATIONS, PipelineConfig, ablation, evaluate_loso, load_config
from dstr.synth import benchmark_script, synth_generate


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--config", help="YAML pipeline configuration (defaults otherwise)")
    ap.add_argument("--data-seed", type=int, default=0)
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--out", type=Path, help="write the table as JSON here")
    args = ap.parse_args()

    base = load_config(args.config) if args.config else PipelineConfig()
    ds = synth_generate(benchmark_script(), args.data_seed)
    rows = {}
    print(f"{'variant':8s} {'accuracy':>16s} {'precision':>16s} {'recall':>16s}")
    for name in ABLATIONS:
        rep = evaluate_loso(ablation(base, name), ds, args.seeds)
        rows[name] = {"accuracy": rep.accuracy, "precision": rep.precision, "recall": rep.recall}
        cells = " ".join(f"{m:.3f} ± {s:.3f}".rjust(16) for m, s in rows[name].values())
        print(f"{name:8s} {cells}")
    if args.out:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(json.dumps(rows, indent=1), encoding="utf-8")


if __name__ == "__main__":
    main()
