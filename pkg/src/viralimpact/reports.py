"""CSV tables and SVG figures derived from the stage JSON documents."""

from __future__ import annotations

import csv
from pathlib import Path

from viralimpact.causal import WINDOW_WEEKS


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow(["" if v is None else v for v in row])


def _platform_of(docs) -> dict[str, str]:
    return {s["source_id"]: s["platform"] for s in docs["detection.json"]["sources"]}


def table2_rows(docs):
    for c in docs["correlations.json"]["table"]:
        yield c["platform"], c["n_weeks"], c["rho"], c["n_pairs"]


def table3_rows(docs):
    for entry in docs["persistency.json"]["platforms"]:
        fit = entry["decay_fit"]
        if fit is None:
            continue
        yield entry["platform"], "lambda", fit["lambda"], fit["se_lambda"], fit["p_lambda"]
        yield entry["platform"], "beta", fit["beta"], fit["se_beta"], fit["p_beta"]


def write_tables(out: Path, docs: dict[str, dict]) -> list[Path]:
    out.mkdir(parents=True, exist_ok=True)
    platform_of = _platform_of(docs)
    written = []

    def emit(name, header, rows):
        path = out / name
        _write_csv(path, header, rows)
        written.append(path)

    emit("table2_correlations.csv", ["platform", "n_weeks", "rho", "n_events"],
         table2_rows(docs))
    emit("table3_decay.csv", ["platform", "parameter", "estimate", "std_error", "p_value"],
         table3_rows(docs))

    results = docs["impacts.json"]["results"]
    cols = ["source_id", "post_id", "n_weeks", "avg_absolute_effect", "cumulative_effect",
            "p_value", "pre_trend_slope", "ols_pre_trend_slope", "classification",
            "n_draws", "excluded", "reason"]
    emit("impacts.csv", ["platform"] + cols,
         ([platform_of[r["source_id"]]] + [r[c] for c in cols] for r in results))

    fig1 = []
    for h in docs["detection.json"]["zscore_histograms"]:
        edges = h["bin_edges"]
        for metric, m in sorted(h["metrics"].items()):
            fig1 += [(h["platform"], metric, edges[i], edges[i + 1], c)
                     for i, c in enumerate(m["counts"])]
    emit("fig1_zscore_histogram.csv", ["platform", "metric", "bin_lo", "bin_hi", "count"], fig1)
    emit("fig2_viral_per_source.csv", ["platform", "source_id", "n_posts", "n_viral"],
         ((s["platform"], s["source_id"], s["n_posts"], s["n_viral"])
          for s in docs["detection.json"]["sources"]))

    flows, marginals = [], []
    for p in docs["flows.json"]["platforms"]:
        classes = p["flow"]["classes"]
        for t in p["flow"]["transitions"]:
            for i, a in enumerate(classes):
                for j, b in enumerate(classes):
                    flows.append((p["platform"], t["from_n"], t["to_n"], a, b, t["counts"][i][j]))
        for m in p["flow"]["marginals"]:
            marginals += [(p["platform"], m["n_weeks"], c, m["counts"][c], m["percentages"][c])
                          for c in classes]
    emit("fig3_flows.csv", ["platform", "from_n", "to_n", "from_class", "to_class", "count"], flows)
    emit("fig3_marginals.csv", ["platform", "n_weeks", "class", "count", "percentage"], marginals)

    emit("fig4_density_pairs.csv",
         ["platform", "n_weeks", "source_id", "post_id", "pre_trend_slope",
          "avg_absolute_effect", "classification"],
         ((platform_of[r["source_id"]], r["n_weeks"], r["source_id"], r["post_id"],
           r["pre_trend_slope"], r["avg_absolute_effect"], r["classification"])
          for r in results if not r["excluded"] and r["classification"] != "NoEffect"))

    fig5 = []
    for entry in docs["persistency.json"]["platforms"]:
        observed = {(c["k"], c["h"]): c["value"] for c in entry["matrix"]["phi"]}
        for (k, h), v in sorted(observed.items()):
            fig5.append((entry["platform"], k, h, v, "observed"))
        for curve in entry["curves"]:
            kind = "extrapolated" if curve["extrapolated"] else "fitted"
            fig5 += [(entry["platform"], curve["k"], h, v, kind)
                     for h, v in zip(curve["h"], curve["phi"])]
    emit("fig5_persistency.csv", ["platform", "k", "h", "phi", "kind"], fig5)
    return written


def write_plots(out: Path, docs: dict[str, dict]) -> list[Path]:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "viralimpact"
    out.mkdir(parents=True, exist_ok=True)
    written = []

    def save(fig, name):
        path = out / name
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
        written.append(path)

    hists = docs["detection.json"]["zscore_histograms"]
    if hists:
        fig, axes = plt.subplots(len(hists), 2, figsize=(9, 3 * len(hists)), squeeze=False)
        for row, h in zip(axes, hists):
            edges = h["bin_edges"]
            for ax, (metric, m) in zip(row, sorted(h["metrics"].items())):
                ax.stairs(m["counts"], edges)
                ax.axvline(h["threshold"], ls="--", color="k")
                ax.set_yscale("symlog")
                ax.set_title(f"{h['platform']} {metric}")
        save(fig, "fig1_zscores.svg")

    sources = docs["detection.json"]["sources"]
    fig, ax = plt.subplots(figsize=(6, 3))
    ax.hist([s["n_viral"] for s in sources], bins=20)
    ax.set_xlabel("viral posts per source")
    save(fig, "fig2_viral_per_source.svg")

    for p in docs["flows.json"]["platforms"]:
        marg = p["flow"]["marginals"]
        fig, ax = plt.subplots(figsize=(6, 3))
        bottom = [0.0] * len(marg)
        for c in p["flow"]["classes"]:
            vals = [m["percentages"][c] for m in marg]
            ax.bar([m["n_weeks"] for m in marg], vals, bottom=bottom, label=c)
            bottom = [b + v for b, v in zip(bottom, vals)]
        ax.set_xlabel("window (weeks)")
        ax.set_ylabel("%")
        ax.legend()
        save(fig, f"fig3_flows_{p['platform']}.svg")

    platform_of = _platform_of(docs)
    sig = [r for r in docs["impacts.json"]["results"]
           if not r["excluded"] and r["classification"] != "NoEffect"]
    for platform in sorted(set(platform_of.values())):
        fig, axes = plt.subplots(1, len(WINDOW_WEEKS), figsize=(15, 3), sharey=True)
        for ax, n in zip(axes, WINDOW_WEEKS):
            pts = [r for r in sig if r["n_weeks"] == n and platform_of[r["source_id"]] == platform]
            ax.scatter([r["avg_absolute_effect"] for r in pts],
                       [r["pre_trend_slope"] for r in pts], s=6)
            ax.set_title(f"{n} weeks")
            ax.set_xlabel("avg absolute effect")
        axes[0].set_ylabel("trend pre virality")
        save(fig, f"fig4_density_{platform}.svg")

    for entry in docs["persistency.json"]["platforms"]:
        fig, ax = plt.subplots(figsize=(6, 4))
        for curve in entry["curves"]:
            ax.plot(curve["h"], curve["phi"], ls=":" if curve["extrapolated"] else "-",
                    label=f"k={curve['k']}")
        pts = [c for c in entry["matrix"]["phi"] if c["value"] is not None]
        ax.scatter([c["h"] for c in pts], [c["value"] for c in pts], s=12, color="k")
        ax.set_xlabel("h (weeks)")
        ax.set_ylabel("persistency")
        if entry["curves"]:
            ax.legend()
        save(fig, f"fig5_persistency_{entry['platform']}.svg")
    return written
