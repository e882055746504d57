"""Gender/marital hiring scenario: unfair baseline, equalized-odds thresholds, frontier.

Writes before/after scatter plots and per-group ROC curves, and prints the
gap table and the accuracy-fairness frontier.

    python scripts/scenario_reproduction.py --out-dir scenario_out
"""

import argparse
import os

from fairaudit.dataset import drop_protected
from fairaudit.metrics import fairness_gaps, group_metrics, roc_curve
from fairaudit.mitigate import accuracy_fairness_frontier, apply_policy, fit_thresholds
from fairaudit.model import predict_scores, train
from fairaudit.plots import combined_groups, render_roc_svg, render_scatter_svg
from fairaudit.synth import gen_gender_marital


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--epsilon", type=float, default=0.05)
    ap.add_argument("--out-dir", default="scenario_out")
    args = ap.parse_args()
    os.makedirs(args.out_dir, exist_ok=True)

    ds = gen_gender_marital(args.n, seed=args.seed)
    inputs = drop_protected(ds)
    scores = predict_scores(train(inputs), inputs)
    y = ds.labels
    gender = ds.group_labels("gender")
    clusters = combined_groups(ds, ["gender", "marital"])

    pre = fairness_gaps(group_metrics(scores, y, gender, 0.5), "equalized_odds", args.epsilon)
    policy = fit_thresholds(scores, y, gender, "equalized_odds", args.epsilon, attribute="gender")
    post = fairness_gaps(group_metrics(scores, y, gender, policy), "equalized_odds", args.epsilon)

    print(f"{'':16}{'positive_rate':>14}{'tpr':>10}{'fpr':>10}")
    for name, rep in (("threshold 0.5", pre), ("mitigated", post)):
        g = rep.gaps
        print(f"{name:16}{g['positive_rate']:>14.4f}{g['tpr']:>10.4f}{g['fpr']:>10.4f}")
    print(f"accuracy after mitigation: {policy.achieved_accuracy:.4f}")
    for group, rule in sorted(policy.per_group.items()):
        print(f"  {group}: t_lo={rule.t_lo:.4f} t_hi={rule.t_hi:.4f} mix={rule.mix:.2f}")

    print("\nepsilon  best_accuracy")
    for p in accuracy_fairness_frontier(scores, y, gender, "equalized_odds", [0.0, 0.01, 0.02, 0.05, 0.1, 0.2]):
        acc = "infeasible" if p.best_accuracy is None else f"{p.best_accuracy:.4f}"
        print(f"{p.epsilon:7.2f}  {acc}")

    plots = {
        "scatter_before.svg": render_scatter_svg(ds, "x1", "x2", clusters, scores >= 0.5,
                                                 title="baseline decisions"),
        "scatter_after.svg": render_scatter_svg(ds, "x1", "x2", clusters, apply_policy(policy, scores, gender),
                                                title="equalized-odds decisions"),
        "roc.svg": render_roc_svg({g: [(p.fpr, p.tpr) for p in roc_curve(scores[gender == g], y[gender == g])]
                                   for g in sorted(set(gender))}),
    }
    for name, svg in plots.items():
        with open(os.path.join(args.out_dir, name), "w", encoding="utf-8") as fh:
            fh.write(svg)
    print(f"\nplots written to {args.out_dir}/")


if __name__ == "__main__":
    main()
