"""Jump recovery on a noisy step signal, driven through the CLI.

Runs the bundled piecewise experiment config end to end with the
command-line entry point and summarizes the artifacts it writes.  The
signal has five jumps; the trimmed solver gets a budget of exactly five
while the convex baseline sweeps a strength grid and has to trade
sparsity against fit.

Run from the repository root:

    python3 demos/piecewise_signal.py
"""

import json
import subprocess
import sys
from pathlib import Path

HERE = Path(__file__).resolve().parent
CONFIG = HERE / "configs" / "piecewise_n200.json"
OUT = HERE / "out" / "piecewise"


def main():
    cmd = [sys.executable, "-m", "netlasso", "piecewise",
           "--config", str(CONFIG), "--out-dir", str(OUT)]
    print("running:", " ".join(["python3"] + cmd[1:]))
    proc = subprocess.run(cmd)
    if proc.returncode != 0:
        sys.exit(proc.returncode)

    report = json.loads((OUT / "piecewise.json").read_text())
    print()
    print(f"signal length {report['n']}, noise sd {report['noise_sd']}, "
          f"jump budget {report['cardinality']}")
    print(f"true jumps:            {report['true_jumps']}")

    ntl = report["ntl"]
    print(f"trimmed estimate:      jumps {ntl['jumps']}  "
          f"error {ntl['error']:.3f}")

    nl = report["nl_best_quality"]
    print(f"best convex estimate:  {nl['num_jumps']} jumps  "
          f"error {nl['error']:.3f}  (strength {nl['gamma']:.3g})")
    sparse = report["nl_best_cardinality"]
    if sparse is None:
        print("no convex strength stayed within the jump budget")
    else:
        print(f"sparsest-fit convex:   jumps {sparse['jumps']}  "
              f"error {sparse['error']:.3f}  (strength "
              f"{sparse['gamma']:.3g})")

    print()
    print(f"exact jump set found:  {report['ntl_jumps_exact']}")
    print(f"beats best convex fit: {report['ntl_beats_best_nl']}")
    print()
    print("The convex penalty shrinks every difference it keeps, so at")
    print("strengths sparse enough to respect the budget the plateau")
    print("estimates are biased toward each other.  Trimming exempts")
    print("the five largest differences from the penalty entirely,")
    print("which removes that bias.")
    print()
    print(f"artifacts: {OUT}/piecewise.json, {OUT}/signals.csv")


if __name__ == "__main__":
    main()
