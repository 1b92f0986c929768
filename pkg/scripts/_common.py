import argparse
import csv
from pathlib import Path

RESULTS = Path(__file__).resolve().parent.parent / "results"


def out_path(default_name: str) -> Path:
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", type=Path, default=RESULTS / default_name)
    path = ap.parse_args().out
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([f"{v:.12g}" if isinstance(v, float) else v for v in r])
    print(f"wrote {len(rows)} rows to {path}")
