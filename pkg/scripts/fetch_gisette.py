# ============================================================
# Imports
# ============================================================

import bz2
import os
import sys

import requests
from tqdm import tqdm

# ============================================================
# Configuration
# ============================================================

# LIBSVM mirror of the Gisette digit-separation task (scaled to [-1, 1])
BASE_URL = "https://www.csie.ntu.edu.tw/~cjlin/libsvmtools/datasets/binary"
FILES = {
    "gisette_scale.bz2": "data/gisette_train.svm",
    "gisette_scale.t.bz2": "data/gisette_test.svm",
}

CHUNK_SIZE = 1 << 16

# ============================================================
# Download and Convert
# ============================================================

def download(url, path):
    """Stream a file to disk with a progress bar."""
    with requests.get(url, stream=True, timeout=60) as response:
        response.raise_for_status()
        total = int(response.headers.get("content-length", 0))
        with open(path, "wb") as f, tqdm(total=total, unit="B", unit_scale=True, desc=os.path.basename(path)) as bar:
            for chunk in response.iter_content(CHUNK_SIZE):
                f.write(chunk)
                bar.update(len(chunk))


def relabel(src, dest):
    """
    Decompress and rewrite the -1/+1 labels as 0/1 so AUC and precision@k apply.
    Feature tokens are copied unchanged.
    """
    n_rows = 0
    with bz2.open(src, "rt") as fin, open(dest, "w") as fout:
        for line in fin:
            label, _, rest = line.strip().partition(" ")
            if not label:
                continue
            fout.write(("1" if float(label) > 0 else "0") + " " + rest + "\n")
            n_rows += 1
    return n_rows


def fetch_gisette():
    os.makedirs("data", exist_ok=True)
    for name, dest in FILES.items():
        if os.path.exists(dest):
            print(f"[Gisette] {dest} already present. Skipping.")
            continue
        archive = os.path.join("data", name)
        try:
            print(f"[Gisette] Downloading {name}...")
            download(f"{BASE_URL}/{name}", archive)
        except requests.RequestException as e:
            print(f"[Gisette] Download failed for {name}: {e}")
            return 1
        rows = relabel(archive, dest)
        os.remove(archive)
        print(f"[Gisette] Wrote {rows} rows to {dest}")
    return 0

# ============================================================
# Entry Point
# ============================================================

if __name__ == "__main__":
    sys.exit(fetch_gisette())
