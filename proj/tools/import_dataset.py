#!/usr/bin/env python3
"""One-shot converter from a raw gait-EMG export into the emgait on-disk layout.

Output layout (what `emgait --data-dir` reads):

    OUT/manifest.json            {"sample_rate_hz", "channel_names", "entries": [...]}
    OUT/<subject>_<leg>/emg.csv  header t_s,VL,BF,MH,GL,GM
    OUT/<subject>_<leg>/events.csv  header t_s,leg  (leg = self | opposite)

The source layout is NOT known in advance. This stub assumes one directory per
subject holding, per leg, a CSV with a time column, the five muscle columns and
0/1 foot-contact columns for both legs, plus an optional `injured.txt` listing
subject ids with an injury history. Adjust `SOURCE_COLUMNS` and `read_subject`
to the real export before use.
"""

import argparse
import csv
import json
from pathlib import Path

CHANNELS = ["VL", "BF", "MH", "GL", "GM"]
SOURCE_COLUMNS = {
    "time": "time",
    "VL": "vastus_lateralis",
    "BF": "biceps_femoris",
    "MH": "medial_hamstring",
    "GL": "gastrocnemius_lateralis",
    "GM": "gluteus_maximus",
    "contact_self": "contact_self",
    "contact_opposite": "contact_opposite",
}
LEG_FILES = {"dominant": "dominant.csv", "nondominant": "nondominant.csv"}


def rising_edges(times, contact):
    out = []
    for i in range(1, len(contact)):
        if contact[i - 1] < 0.5 <= contact[i]:
            out.append(times[i])
    return out


def read_subject(path):
    """Yields (leg, times, channels dict, self strikes, opposite strikes)."""
    for leg, name in LEG_FILES.items():
        src = path / name
        if not src.exists():
            continue
        with src.open(newline="") as f:
            rows = list(csv.DictReader(f))
        times = [float(r[SOURCE_COLUMNS["time"]]) for r in rows]
        t0 = times[0]
        times = [t - t0 for t in times]
        chans = {c: [float(r[SOURCE_COLUMNS[c]]) for r in rows] for c in CHANNELS}
        own = rising_edges(times, [float(r[SOURCE_COLUMNS["contact_self"]]) for r in rows])
        opp = rising_edges(times, [float(r[SOURCE_COLUMNS["contact_opposite"]]) for r in rows])
        yield leg, times, chans, own, opp


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("source", type=Path)
    ap.add_argument("out", type=Path)
    ap.add_argument("--sample-rate", type=float, default=1500.0)
    args = ap.parse_args()

    injured = set()
    inj_file = args.source / "injured.txt"
    if inj_file.exists():
        injured = {line.strip() for line in inj_file.read_text().splitlines() if line.strip()}

    entries = []
    args.out.mkdir(parents=True, exist_ok=True)
    for subj_dir in sorted(p for p in args.source.iterdir() if p.is_dir()):
        sid = subj_dir.name
        for leg, times, chans, own, opp in read_subject(subj_dir):
            rec_dir = args.out / f"{sid}_{leg}"
            rec_dir.mkdir(exist_ok=True)
            with (rec_dir / "emg.csv").open("w", newline="") as f:
                w = csv.writer(f)
                w.writerow(["t_s"] + CHANNELS)
                for i, t in enumerate(times):
                    w.writerow([repr(t)] + [repr(chans[c][i]) for c in CHANNELS])
            events = sorted([(t, "self") for t in own] + [(t, "opposite") for t in opp])
            with (rec_dir / "events.csv").open("w", newline="") as f:
                w = csv.writer(f)
                w.writerow(["t_s", "leg"])
                w.writerows((repr(t), which) for t, which in events)
            entries.append({"subject_id": sid, "leg": leg, "file_path": f"{sid}_{leg}/emg.csv",
                            "injury_history": sid in injured})

    manifest = {"sample_rate_hz": args.sample_rate, "channel_names": CHANNELS, "entries": entries}
    (args.out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    print(f"wrote {len(entries)} recordings to {args.out}")


if __name__ == "__main__":
    main()
