"""Rendering of run envelopes: CSV tables and companion figures.

CSV keeps one rectangular table per run.  Row-shaped results become one row
per entry with the run configuration repeated in `config.*` columns, so a
single file still carries everything needed to reproduce it; scalar results
become a two-column key/value dump.
"""

from __future__ import annotations

import csv
import io


def _flat(obj, prefix: str = "") -> dict:
    out = {}
    if isinstance(obj, dict):
        for k in sorted(obj):
            key = f"{prefix}.{k}" if prefix else str(k)
            out.update(_flat(obj[k], key))
    elif isinstance(obj, (list, tuple)):
        out[prefix] = " ".join(str(v) for v in obj)
    else:
        out[prefix] = obj
    return out


def to_csv(envelope: dict) -> str:
    result = envelope.get("result", {})
    rows = result.get("rows") if isinstance(result, dict) else None
    buf = io.StringIO()
    if rows:
        meta = _flat({k: v for k, v in envelope.items() if k != "result"})
        row_keys = sorted({k for r in rows for k in r})
        header = row_keys + sorted(meta)
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        for r in rows:
            writer.writerow([r.get(k, "") for k in row_keys]
                            + [meta[k] for k in sorted(meta)])
    else:
        flat = _flat(envelope)
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["key", "value"])
        for k in sorted(flat):
            writer.writerow([k, flat[k]])
    return buf.getvalue()


def render_figure(envelope: dict, path: str) -> None:
    """One summary figure per run, written as PNG next to the data file."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    command = envelope.get("command", "")
    result = envelope.get("result", {})
    fig, ax = plt.subplots(figsize=(6.4, 4.2))

    if command == "orlicz-scan" and result.get("rows"):
        ns = [r["n"] for r in result["rows"]]
        ks = [r["k"] for r in result["rows"]]
        ratios = [r["ratio"] for r in result["rows"]]
        ax.loglog(ns, ks, "o-", base=2, label="K(n)")
        ax.set_xlabel("n")
        ax.set_ylabel("Orlicz K")
        twin = ax.twinx()
        twin.semilogx(ns, ratios, "s--", color="tab:red", base=2,
                      label="K sqrt(q) / n^1.5")
        twin.set_ylabel("normalized ratio")
        ax.legend(loc="upper left")
        twin.legend(loc="lower right")
    elif command == "witness3d" and result.get("rows"):
        xs = [r["restart"] for r in result["rows"]]
        ys = [r["value"] for r in result["rows"]]
        ok = [r["passed"] for r in result["rows"]]
        ax.scatter(xs, ys, c=["tab:green" if p else "tab:red" for p in ok], s=18)
        ax.axhline(result.get("threshold", 0.0), ls="--", color="gray",
                   label="tau n / sqrt(q)")
        ax.set_xlabel("restart")
        ax.set_ylabel("stage maximum")
        ax.legend()
    elif command == "identity-check" and result.get("rows"):
        xs = [r["first_scale"] for r in result["rows"]]
        ys = [r["cells"] for r in result["rows"]]
        colors = ["tab:green" if r["ok"] else "tab:red" for r in result["rows"]]
        ax.bar(xs, ys, color=colors)
        ax.set_yscale("log")
        ax.set_xlabel("first scale")
        ax.set_ylabel("cells certified")
    elif command == "lemmas" and result.get("rows"):
        names = [r["suite"] for r in result["rows"]]
        viol = [r["violations"] for r in result["rows"]]
        ax.bar(range(len(names)), viol, color="tab:blue")
        ax.set_xticks(range(len(names)), names, rotation=20, ha="right")
        ax.set_ylabel("violations")
    elif command == "discrepancy":
        labels = ["sup |D|", "L2 estimate"]
        vals = [result.get("sup_abs_float", 0.0), result.get("l2_norm", 0.0)]
        ax.bar(labels, vals, color=["tab:blue", "tab:orange"])
        ax.set_ylabel("discrepancy")
    elif command == "supnorm":
        vals = [result.get("value", 0), result.get("l2_sq", 0) ** 0.5]
        ax.bar(["sup |H|", "sqrt #family"], vals,
               color=["tab:blue", "tab:gray"])
    else:
        flat = {k: v for k, v in _flat(result).items()
                if isinstance(v, (int, float)) and not isinstance(v, bool)}
        keys = sorted(flat)[:12]
        ax.bar(range(len(keys)), [flat[k] for k in keys])
        ax.set_xticks(range(len(keys)), keys, rotation=30, ha="right", fontsize=7)
    ax.set_title(command or "run")
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
