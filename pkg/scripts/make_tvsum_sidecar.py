"""Write the videos.json sidecar for a TVSum annotation TSV.

The public annotation file stores one score per frame, so each video's
frame count is the length of its rows. Frame rates come from the info file
(``ydata-tvsum50-info.tsv``, durations as ``m:ss``) when given, otherwise
from ``--fps``.
"""

import argparse
import csv
import json
from pathlib import Path


def durations(info_path):
    out = {}
    with open(info_path, encoding="utf-8") as fh:
        for row in csv.DictReader(fh, delimiter="\t"):
            minutes, seconds = row["length"].split(":")
            out[row["video_id"]] = 60 * int(minutes) + int(seconds)
    return out


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0], formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("tsv", help="annotation TSV (video_id, category, comma-joined scores)")
    p.add_argument("--info", default=None, help="TVSum info TSV with per-video durations")
    p.add_argument("--fps", type=float, default=30.0, help="frame rate used when no duration is known")
    p.add_argument("--out", default=None, help="sidecar path (default: videos.json next to the TSV)")
    args = p.parse_args()

    counts = {}
    with open(args.tsv, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            vid, _category, scores = line.rstrip("\r\n").split("\t")
            n = scores.count(",") + 1
            if counts.setdefault(vid, n) != n:
                raise SystemExit(f"{args.tsv}:{lineno}: {vid} rows disagree on length ({counts[vid]} vs {n})")
    secs = durations(args.info) if args.info else {}
    videos = [
        {"video_id": vid, "n_frames": n, "fps": n / secs[vid] if secs.get(vid) else args.fps}
        for vid, n in counts.items()
    ]
    out = Path(args.out) if args.out else Path(args.tsv).with_name("videos.json")
    out.write_text(json.dumps(videos, indent=1) + "\n", encoding="utf-8")
    print(f"wrote {out} ({len(videos)} videos)")


if __name__ == "__main__":
    main()
