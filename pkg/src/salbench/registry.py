"""Metric registry: family membership, score direction and scheduling
hints consumed by the pipeline and the rank tables."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class MetricSpec:
    name: str
    family: str  # faithfulness | robustness | complexity | randomization
    curve: bool  # curve metrics are reduced to a scalar via AUC
    higher_better: bool
    needs_baseline: bool = False
    needs_explainer: bool = False  # must re-invoke the explainer


METRICS: dict[str, MetricSpec] = {
    m.name: m
    for m in [
        MetricSpec("faithfulness_correlation", "faithfulness", False, True, True),
        MetricSpec("faithfulness_estimate", "faithfulness", False, True, True),
        MetricSpec("monotonicity_arya", "faithfulness", False, True, True),
        MetricSpec("monotonicity_nguyen", "faithfulness", False, True, True),
        # deletion curves: a faithful map drives the probability down fast,
        # so a smaller area under the curve is better
        MetricSpec("pixel_flipping", "faithfulness", True, False, True),
        MetricSpec("selectivity", "faithfulness", True, False, True),
        MetricSpec("local_lipschitz", "robustness", False, False, False, True),
        MetricSpec("max_sensitivity", "robustness", False, False, False, True),
        MetricSpec("avg_sensitivity", "robustness", False, False, False, True),
        MetricSpec("sparseness", "complexity", False, True),
        MetricSpec("complexity", "complexity", False, False),
        MetricSpec("effective_complexity", "complexity", False, False),
        # low post-randomization similarity is good, so the MPR AUC is
        # lower-better; a large random-logit distance is good
        MetricSpec("model_parameter_randomization", "randomization", True, False,
                   False, True),
        MetricSpec("random_logit", "randomization", False, True, False, True),
    ]
}

FAMILIES = ("faithfulness", "randomization", "robustness", "complexity")


def metric_names(selection: list[str] | str | None = None) -> list[str]:
    """Resolve a metric selection (names, families or 'all') to names."""
    if selection is None or selection == "all" or selection == ["all"]:
        return list(METRICS)
    out: list[str] = []
    for item in selection:
        if item in METRICS:
            out.append(item)
        elif item in FAMILIES:
            out.extend(m for m, s in METRICS.items() if s.family == item)
        else:
            raise KeyError(f"unknown metric or family: {item!r}")
    return out


def instance_label(metric: str, baseline: str | None) -> str:
    return f"{metric}/{baseline}" if baseline else metric
