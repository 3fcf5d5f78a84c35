"""Rank metrics over graded judgments, judged-only condensing, and paired
significance testing.

Conventions match the standard external evaluator: an unjudged document
contributes zero gain, and the ideal DCG is computed from all judgments
for the topic, not just the retrieved ones.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

from .trecio import QrelSet, Run

log = logging.getLogger(__name__)


class EvalError(Exception):
    pass


@dataclass
class MetricReport:
    metric_name: str
    per_topic: dict[str, float]
    mean: float

    @classmethod
    def from_values(cls, name: str, per_topic: dict[str, float]) -> "MetricReport":
        if not per_topic:
            raise EvalError(f"{name}: no topics to evaluate")
        mean = sum(per_topic.values()) / len(per_topic)
        return cls(name, per_topic, mean)


def _eval_topics(run: Run, qrels: QrelSet) -> list[str]:
    topics = []
    for topic_id in sorted(run.entries):
        if topic_id in qrels.judgments:
            topics.append(topic_id)
        else:
            log.warning("topic %s has no judgments; skipped", topic_id)
    return topics


def _dcg(grades: list[int], k: int) -> float:
    return sum(g / math.log2(i + 1) for i, g in enumerate(grades[:k], start=1))


def ndcg_at(run: Run, qrels: QrelSet, k: int = 10) -> MetricReport:
    if k <= 0:
        raise EvalError("k must be positive")
    values = {}
    for topic_id in _eval_topics(run, qrels):
        judged = qrels.judgments[topic_id]
        gains = [judged.get(doc_id, 0) for doc_id, _ in run.entries[topic_id]]
        ideal = sorted(judged.values(), reverse=True)
        idcg = _dcg(ideal, k)
        values[topic_id] = _dcg(gains, k) / idcg if idcg > 0 else 0.0
    return MetricReport.from_values(f"ndcg@{k}", values)


def precision_at(run: Run, qrels: QrelSet, k: int = 5, min_grade: int = 1) -> MetricReport:
    """P@k counting documents with grade >= min_grade; unjudged counts as
    non-relevant and the denominator is always k."""
    if k <= 0:
        raise EvalError("k must be positive")
    values = {}
    for topic_id in _eval_topics(run, qrels):
        judged = qrels.judgments[topic_id]
        top = run.entries[topic_id][:k]
        hits = sum(1 for doc_id, _ in top if judged.get(doc_id, 0) >= min_grade)
        values[topic_id] = hits / k
    name = f"p@{k}" + ("f" if min_grade >= 2 else "")
    return MetricReport.from_values(name, values)


def judged_at(run: Run, qrels: QrelSet, k: int = 10) -> MetricReport:
    """Fraction of the top k that received any judgment (grade 0 counts)."""
    if k <= 0:
        raise EvalError("k must be positive")
    values = {}
    for topic_id in _eval_topics(run, qrels):
        judged = qrels.judgments[topic_id]
        top = run.entries[topic_id][:k]
        hits = sum(1 for doc_id, _ in top if doc_id in judged)
        values[topic_id] = hits / k if top else 0.0
    return MetricReport.from_values(f"j@{k}", values)


def mrr_at(run: Run, qrels: QrelSet, k: int = 10) -> MetricReport:
    values = {}
    for topic_id in _eval_topics(run, qrels):
        judged = qrels.judgments[topic_id]
        value = 0.0
        for rank, (doc_id, _) in enumerate(run.entries[topic_id][:k], start=1):
            if judged.get(doc_id, 0) >= 1:
                value = 1.0 / rank
                break
        values[topic_id] = value
    return MetricReport.from_values(f"mrr@{k}", values)


def condense(run: Run, qrels: QrelSet) -> Run:
    """Drop unjudged entries per topic, closing ranks and keeping scores.

    Topics absent from the qrels keep their entries untouched.
    """
    out = Run(tag=run.tag)
    for topic_id, items in run.entries.items():
        judged = qrels.judgments.get(topic_id)
        if judged is None:
            out.entries[topic_id] = list(items)
            continue
        kept = [(doc_id, score) for doc_id, score in items if doc_id in judged]
        if not kept:
            log.warning("topic %s: no judged documents in run", topic_id)
        out.entries[topic_id] = kept
    return out


METRIC_FUNCS = {
    "ndcg": ndcg_at,
    "p": precision_at,
    "j": judged_at,
    "mrr": mrr_at,
}


def compute_metric(spec: str, run: Run, qrels: QrelSet) -> MetricReport:
    """Compute a metric from a compact name: ndcg@10, p@5, p@5f, j@10, mrr@10."""
    name = spec.strip().lower()
    fully = name.endswith("f") and name.startswith("p@")
    if fully:
        name = name[:-1]
    try:
        prefix, k_str = name.split("@")
        k = int(k_str)
    except ValueError:
        raise EvalError(f"unrecognized metric: {spec}") from None
    if prefix not in METRIC_FUNCS:
        raise EvalError(f"unrecognized metric: {spec}")
    if prefix == "p":
        return precision_at(run, qrels, k, min_grade=2 if fully else 1)
    return METRIC_FUNCS[prefix](run, qrels, k)


# -- significance ------------------------------------------------------------

def _betacf(a: float, b: float, x: float) -> float:
    # continued fraction for the incomplete beta (Lentz's method)
    max_iter = 300
    eps = 3e-14
    fpmin = 1e-300
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < fpmin:
        d = fpmin
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < fpmin:
            d = fpmin
        c = 1.0 + aa / c
        if abs(c) < fpmin:
            c = fpmin
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < fpmin:
            d = fpmin
        c = 1.0 + aa / c
        if abs(c) < fpmin:
            c = fpmin
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            break
    return h


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_bt = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log(1.0 - x)
    )
    bt = math.exp(ln_bt)
    if x < (a + 1.0) / (a + b + 2.0):
        return bt * _betacf(a, b, x) / a
    return 1.0 - bt * _betacf(b, a, 1.0 - x) / b


def paired_t_test(a: dict[str, float], b: dict[str, float]) -> float:
    """Two-sided paired t-test over per-topic values keyed by topic id.

    Degenerate conventions: all-zero differences give p=1.0; zero variance
    with a nonzero mean gives p=0.0.
    """
    if set(a) != set(b):
        extra_a = sorted(set(a) - set(b))
        extra_b = sorted(set(b) - set(a))
        raise EvalError(
            f"topic sets differ (only in a: {extra_a}; only in b: {extra_b})"
        )
    n = len(a)
    if n < 2:
        raise EvalError("paired t-test needs at least 2 topics")
    diffs = [a[k] - b[k] for k in sorted(a)]
    mean = sum(diffs) / n
    var = sum((d - mean) ** 2 for d in diffs) / (n - 1)
    if var == 0.0:
        return 1.0 if mean == 0.0 else 0.0
    t = mean / math.sqrt(var / n)
    df = n - 1
    return regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t))


def bonferroni(p: float, m: int) -> float:
    if m < 1:
        raise EvalError("number of comparisons must be >= 1")
    return min(1.0, p * m)
