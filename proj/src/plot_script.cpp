#include "lac/scenario.hpp"

#include <ostream>

namespace lac {

namespace {

constexpr const char* kPrelude = R"(#!/usr/bin/env python3
# Generated by `lac run`; reads only the CSV files next to this script.
import csv
import math
import os
import sys
from collections import defaultdict

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))


def read_rows(name):
    with open(os.path.join(HERE, name), newline="") as f:
        return list(csv.DictReader(f))


def num(s):
    return float(s) if s not in ("nan", "") else math.nan


def run_series(name, column):
    rows = [r for r in read_rows(name) if not math.isnan(num(r[column]))]
    return [int(r["t"]) for r in rows], [num(r[column]) for r in rows]

)";

constexpr const char* kFig1 = R"(
def main():
    rows = read_rows(METRICS)
    by = defaultdict(lambda: defaultdict(list))
    for r in rows:
        by[r["policy"]][float(r["error_norm"])].append(float(r["J"]))
    fig, ax = plt.subplots(figsize=(6, 4))
    for policy in sorted(by):
        levels = sorted(by[policy])
        mean = [sum(by[policy][e]) / len(by[policy][e]) for e in levels]
        std = [math.sqrt(sum((v - m) ** 2 for v in by[policy][e]) / len(by[policy][e])) for e, m in zip(levels, mean)]
        ax.plot(levels, mean, label=policy)
        ax.fill_between(levels, [m - s for m, s in zip(mean, std)], [m + s for m, s in zip(mean, std)], alpha=0.2)
    ax.set_xlabel("prediction error norm")
    ax.set_ylabel("total cost")
    ax.legend()
    fig.tight_layout()
    fig.savefig(os.path.join(HERE, "fig1_sweep.png"), dpi=150)
)";

constexpr const char* kFig2 = R"(
def prediction_error(stream):
    rows = read_rows(stream)
    truth = {}
    err = defaultdict(float)
    for r in rows:
        comps = [num(v) for k, v in r.items() if k.startswith("c")]
        if r["kind"] == "truth":
            truth[int(r["tau"])] = comps
    for r in rows:
        if r["kind"] != "pred":
            continue
        comps = [num(v) for k, v in r.items() if k.startswith("c")]
        tau = int(r["tau"])
        err[int(r["t"])] += sum((a - b) ** 2 for a, b in zip(comps, truth[tau]))
    ts = sorted(err)
    return ts, [math.sqrt(err[t]) for t in ts]


def main():
    runs = list(RUNS)
    fig, axes = plt.subplots(3, 1, figsize=(7, 8), sharex=True)
    stream = os.path.join("streams", os.path.basename(runs[0]).split("_", 1)[1]) if runs else None
    if stream and os.path.exists(os.path.join(HERE, stream)):
        t, e = prediction_error(stream)
        axes[0].plot(t, e, color="tab:red")
    axes[0].set_ylabel("prediction error")
    totals = []
    for run in runs:
        policy = os.path.basename(run).split("_seed")[0]
        t, cost = run_series(run, "cost")
        axes[1].plot(t, cost, label=policy)
        totals.append("{}: {:.1f}".format(policy, sum(cost) / NORMALIZE))
        if policy in ("LAC", "SelfTuning"):
            t, lam = run_series(run, "lambda")
            axes[2].plot(t, lam, label=policy)
    axes[1].set_ylabel("instantaneous cost")
    axes[1].legend()
    axes[1].text(0.02, 0.95, "totals / {:g}\n".format(NORMALIZE) + "\n".join(totals), transform=axes[1].transAxes, va="top", fontsize=8)
    axes[2].set_ylabel("lambda")
    axes[2].set_xlabel("t")
    axes[2].legend()
    fig.tight_layout()
    fig.savefig(os.path.join(HERE, "fig2_attack.png"), dpi=150)
)";

constexpr const char* kFig3 = R"(
def main():
    runs = list(RUNS)
    fig, axes = plt.subplots(4, 1, figsize=(7, 10), sharex=True)
    totals = []
    for run in runs:
        policy = os.path.basename(run).split("_seed")[0]
        t, x = run_series(run, "x0")
        axes[0].plot(t, x, label=policy)
        t, u = run_series(run, "u0")
        axes[1].plot(t, u, label=policy)
        t, cost = run_series(run, "cost")
        axes[2].plot(t, cost, label=policy)
        totals.append("{}: {:.4g}".format(policy, sum(cost)))
        if policy in ("LAC", "SelfTuning"):
            t, lam = run_series(run, "lambda")
            axes[3].plot(t, lam, label=policy)
    axes[0].set_ylabel("state")
    axes[0].legend()
    axes[1].set_ylabel("input")
    axes[2].set_ylabel("instantaneous cost")
    axes[2].text(0.02, 0.95, "\n".join(totals), transform=axes[2].transAxes, va="top", fontsize=8)
    axes[3].set_ylabel("lambda")
    axes[3].set_xlabel("t")
    axes[3].legend()
    fig.tight_layout()
    fig.savefig(os.path.join(HERE, "fig3_arm.png"), dpi=150)
)";

constexpr const char* kCustom = R"(
def main():
    fig, axes = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    for run in RUNS:
        label = os.path.basename(run)[:-4]
        t, cost = run_series(run, "cost")
        axes[0].plot(t, cost, label=label)
        t, lam = run_series(run, "lambda")
        axes[1].plot(t, lam, label=label)
    axes[0].set_ylabel("instantaneous cost")
    axes[0].legend(fontsize=6)
    axes[1].set_ylabel("lambda")
    axes[1].set_xlabel("t")
    fig.tight_layout()
    fig.savefig(os.path.join(HERE, "custom.png"), dpi=150)
)";

std::string py_quote(const std::string& s) {
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '\\' || ch == '"') out += '\\';
    out += ch;
  }
  return out + "\"";
}

}  // namespace

void emit_plot_script(std::ostream& out, ScenarioKind kind, const std::string& metrics_csv,
                      const std::vector<std::string>& run_csvs) {
  out << kPrelude;
  out << "METRICS = " << py_quote(metrics_csv) << "\n";
  out << "NORMALIZE = " << (kind == ScenarioKind::Fig2Attack ? "5.0" : "1.0") << "\n";
  out << "RUNS = [\n";
  // The sweep figure only needs metrics, so its script does not list a thousand run files.
  if (kind != ScenarioKind::Fig1Sweep) {
    for (const auto& r : run_csvs) out << "    " << py_quote(r) << ",\n";
  }
  out << "]\n";
  switch (kind) {
    case ScenarioKind::Fig1Sweep: out << kFig1; break;
    case ScenarioKind::Fig2Attack: out << kFig2; break;
    case ScenarioKind::Fig3Arm: out << kFig3; break;
    case ScenarioKind::Custom: out << kCustom; break;
  }
  out << "\n\nif __name__ == \"__main__\":\n    sys.exit(main())\n";
}

}  // namespace lac
