"""Bar charts of per-branch probabilities from hybridsurgery JSON reports.

    hybridsurgery run-protocol t-gate --exhaustive -o t.json
    hybridsurgery cross-check -o cc.json
    python scripts/plot_branches.py t.json cc.json --out branches.png

Protocol reports colour bars by fidelity; cross-check reports by deviation.
Needs matplotlib (``pip install -e .[plot]``).
"""

import argparse
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def series(report: dict) -> list[tuple[str, list[float], list[float], str]]:
    payload = report.get("payload") or {}
    if report["command"] == "run-protocol":
        br = payload.get("branches") or []
        return [(payload.get("name", "protocol"), [b["probability"] for b in br], [1 - b["fidelity"] for b in br],
                 "1 - fidelity")]
    if report["command"] == "cross-check":
        return [(f["fragment"], [b["probability"] for b in f["branches"]], [b["deviation"] for b in f["branches"]],
                 "deviation") for f in payload.get("fragments", [])]
    raise SystemExit(f"unsupported report command {report['command']!r}")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("reports", nargs="+", type=Path)
    ap.add_argument("--out", type=Path, default=Path("branches.png"))
    args = ap.parse_args()

    panels = [s for path in args.reports for s in series(json.loads(path.read_text()))]
    panels = [p for p in panels if p[1]]
    if not panels:
        raise SystemExit("no branch data in the given reports (use --exhaustive for protocols)")
    fig, axes = plt.subplots(len(panels), 1, figsize=(8, 2.4 * len(panels)), squeeze=False)
    for ax, (title, probs, err, err_name) in zip(axes[:, 0], panels):
        worst = max(err)
        ax.bar(range(len(probs)), probs, color="tab:red" if worst > 1e-9 else "tab:blue")
        ax.set_title(f"{title}: {len(probs)} branches, max {err_name} {worst:.1e}", fontsize=9)
        ax.set_ylabel("probability")
    axes[-1, 0].set_xlabel("branch")
    fig.tight_layout()
    fig.savefig(args.out, dpi=120)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
