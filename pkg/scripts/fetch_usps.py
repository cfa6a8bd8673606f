"""Download the USPS train/test files (LIBSVM repository) into data/.

Needs outbound network access. The files are bzip2-compressed LIBSVM text:
7291 training and 2007 test digits, 256 features, labels 1..10.
"""

import bz2
import pathlib
import sys
import urllib.request

BASE = "https://www.csie.ntu.edu.tw/~cjlin/libsvmtools/datasets/multiclass"
FILES = {"usps": f"{BASE}/usps.bz2", "usps.t": f"{BASE}/usps.t.bz2"}


def main():
    out_dir = pathlib.Path(__file__).resolve().parent.parent / "data"
    out_dir.mkdir(exist_ok=True)
    for name, url in FILES.items():
        dest = out_dir / name
        if dest.exists():
            print(f"{dest} already present")
            continue
        print(f"fetching {url}")
        with urllib.request.urlopen(url) as resp:
            dest.write_bytes(bz2.decompress(resp.read()))
        print(f"wrote {dest}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
