#!/usr/bin/env python3
"""Fetch the GBSG node-positive breast cancer dataset and convert it to the
survelicit dataset schema (id, time, event, arm; time in days).

The file is not redistributed with this repository; this script obtains it
from locally installed packages that bundle it, or from their public source
repositories, and writes data/gbsg.csv.  Arm 1 = no hormonal therapy (n=440),
arm 2 = hormonal therapy (n=246).

Usage: python scripts/fetch_gbsg.py [output_path]
"""

from __future__ import annotations

import csv
import io
import sys
import urllib.request
from pathlib import Path

EXPECTED = {1: (440, 205), 2: (246, 94)}

URLS = [
    # scikit-survival bundles GBSG2 as ARFF
    "https://raw.githubusercontent.com/sebp/scikit-survival/master/sksurv/datasets/data/GBSG2.arff",
    # lifelines bundles it as CSV
    "https://raw.githubusercontent.com/CamDavidsonPilon/lifelines/master/lifelines/datasets/gbsg2.csv",
]


def rows_from_installed_packages():
    try:
        from sksurv.datasets import load_gbsg2  # type: ignore

        x, y = load_gbsg2()
        horm = x["horTh"].astype(str).tolist()
        times = [float(v) for v in y["time"]]
        events = [int(v) for v in y["cens"]]
        return list(zip(horm, times, events)), "scikit-survival"
    except Exception:
        pass
    try:
        from lifelines.datasets import load_gbsg2  # type: ignore

        df = load_gbsg2()
        horm = df["horTh"].astype(str).tolist()
        times = [float(v) for v in df["time"]]
        events = [int(v) for v in df["cens"]]
        return list(zip(horm, times, events)), "lifelines"
    except Exception:
        pass
    return None, None


def parse_arff(text: str):
    attributes = []
    data_lines = []
    in_data = False
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("%"):
            continue
        if line.lower().startswith("@attribute"):
            attributes.append(line.split()[1].strip("'\""))
        elif line.lower().startswith("@data"):
            in_data = True
        elif in_data:
            data_lines.append(line)
    reader = csv.reader(io.StringIO("\n".join(data_lines)))
    idx_h = attributes.index("horTh")
    idx_t = attributes.index("time")
    idx_c = attributes.index("cens")
    rows = []
    for row in reader:
        rows.append((row[idx_h].strip("'\""), float(row[idx_t]), int(float(row[idx_c]))))
    return rows


def parse_csv(text: str):
    reader = csv.DictReader(io.StringIO(text))
    fields = {f.lower(): f for f in reader.fieldnames or []}

    def pick(*names):
        for n in names:
            if n in fields:
                return fields[n]
        raise KeyError(names)

    col_h = pick("horth", "hormon", "hormone")
    col_t = pick("time", "rfstime")
    col_c = pick("cens", "status", "event")
    rows = []
    for row in reader:
        rows.append((str(row[col_h]), float(row[col_t]), int(float(row[col_c]))))
    return rows


def rows_from_urls():
    for url in URLS:
        try:
            with urllib.request.urlopen(url, timeout=30) as resp:
                text = resp.read().decode("utf-8")
        except Exception as exc:
            print(f"  {url}: {exc}")
            continue
        try:
            rows = parse_arff(text) if url.endswith(".arff") else parse_csv(text)
            return rows, url
        except Exception as exc:
            print(f"  {url}: could not parse ({exc})")
    return None, None


def to_arm(horm_value: str) -> int:
    v = horm_value.strip().lower()
    if v in ("no", "0", "false"):
        return 1
    if v in ("yes", "1", "true"):
        return 2
    raise ValueError(f"unrecognised hormonal-therapy code {horm_value!r}")


def main():
    # fetch_gbsg.py [existing_gbsg2_file] [output_path]
    args = sys.argv[1:]
    in_path = Path(args[0]) if args and Path(args[0]).exists() else None
    out_idx = 1 if in_path is not None else 0
    out_path = Path(args[out_idx]) if len(args) > out_idx else Path("data/gbsg.csv")

    if in_path is not None:
        text = in_path.read_text()
        rows = parse_arff(text) if in_path.suffix == ".arff" else parse_csv(text)
        source = str(in_path)
    else:
        rows, source = rows_from_installed_packages()
        if rows is None:
            print("no installed package provides GBSG2; trying public sources...")
            rows, source = rows_from_urls()
    if rows is None:
        print(
            "Could not obtain the dataset automatically.\n"
            "Manual route: obtain GBSG2 (columns horTh, time [days], cens) from\n"
            "the R packages TH.data/survival or from scikit-survival, save it as\n"
            "CSV or ARFF, and rerun:  python scripts/fetch_gbsg.py path/to/gbsg2.csv"
        )
        sys.exit(1)

    counts = {1: [0, 0], 2: [0, 0]}
    out_rows = []
    for i, (horm, time_days, event) in enumerate(rows, start=1):
        arm = to_arm(horm)
        counts[arm][0] += 1
        counts[arm][1] += event
        out_rows.append((i, time_days, event, arm))

    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["id", "time", "event", "arm"])
        writer.writerows(out_rows)

    print(f"wrote {out_path} from {source}")
    for arm, (n, d) in sorted(counts.items()):
        exp_n, exp_d = EXPECTED[arm]
        status = "ok" if (n, d) == (exp_n, exp_d) else f"EXPECTED {exp_n}/{exp_d}"
        print(f"  arm {arm}: n={n} events={d} [{status}]")


if __name__ == "__main__":
    main()
