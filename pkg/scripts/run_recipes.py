"""Run recipe specs into a results directory, skipping any whose CSV is current.

    python3 scripts/run_recipes.py                 # everything the acceptance suite reads
    python3 scripts/run_recipes.py fig4 figS2      # selected recipes
    python3 scripts/run_recipes.py --all           # every recipe in recipes/
"""

import argparse
import csv
import sys
import time
from pathlib import Path

from hybridnoise.experiment import ExperimentSpec, run_experiment, write_outputs

ROOT = Path(__file__).resolve().parent.parent
RECIPES = ROOT / "recipes"
ACCEPTANCE = ["fig4_smoke", "fig4", "fig4_powerlaw", "figS4a", "fig5", "fig5_alpha", "figS1", "figS2",
              "figS6_quarter_scr0", "figS6_half_scr0", "figS6_one_scr0",
              "figS6_quarter_scrL", "figS6_half_scrL", "figS6_one_scrL",
              "figS3", "figS4b", "figS7", "figS8", "figS9", "boundary"]


def is_current(spec: ExperimentSpec, out: Path) -> bool:
    path = out / f"{spec.name}.csv"
    if not path.exists() or not path.with_suffix(".samples.npz").exists():
        return False
    with open(path, newline="", encoding="utf-8") as fh:
        first = next(csv.DictReader(fh), None)
    return first is not None and first["spec_hash"] == spec.spec_hash


def run(names, out: Path, workers=None, force=False, log=sys.stderr) -> None:
    for name in names:
        spec = ExperimentSpec.from_json(RECIPES / f"{name}.json")
        if not force and is_current(spec, out):
            print(f"{name}: up to date", file=log, flush=True)
            continue
        t0 = time.perf_counter()
        print(f"{name}: {spec.size} points x {spec.trajectories} trajectories", file=log, flush=True)
        write_outputs(run_experiment(spec, workers), out)
        print(f"{name}: done in {time.perf_counter() - t0:.0f} s", file=log, flush=True)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("names", nargs="*")
    ap.add_argument("--all", action="store_true")
    ap.add_argument("--out", default=str(ROOT / "results"))
    ap.add_argument("--workers", type=int, default=None)
    ap.add_argument("--force", action="store_true")
    args = ap.parse_args()
    names = sorted(p.stem for p in RECIPES.glob("*.json")) if args.all else (args.names or ACCEPTANCE)
    run(names, Path(args.out), args.workers, args.force)


if __name__ == "__main__":
    main()
