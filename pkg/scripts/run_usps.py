"""Run the USPS comparison at desk scale (25 trees, 2 passes).

Fetch the data first if needed:  python scripts/fetch_usps.py
"""

import pathlib
import sys

from orf.cli import main

REPO = pathlib.Path(__file__).resolve().parent.parent

if __name__ == "__main__":
    if not (REPO / "data" / "usps").exists():
        print("data/usps missing; run scripts/fetch_usps.py first",
              file=sys.stderr)
        sys.exit(3)
    rc = main(["train", "--config", str(REPO / "configs" / "usps.json"),
               *sys.argv[1:]])
    if rc == 0:
        rc = main(["diagnose", str(REPO / "runs" / "usps")])
    sys.exit(rc)
