"""Run the 5-class mixture experiment (forest-vs-trees curves) and audit it.

Equivalent to:
  orf train --config configs/fig1_mog.json
  orf diagnose runs/fig1
"""

import pathlib
import sys

from orf.cli import main

REPO = pathlib.Path(__file__).resolve().parent.parent

if __name__ == "__main__":
    rc = main(["train", "--config", str(REPO / "configs" / "fig1_mog.json"),
               *sys.argv[1:]])
    if rc == 0:
        rc = main(["diagnose", str(REPO / "runs" / "fig1")])
    sys.exit(rc)
