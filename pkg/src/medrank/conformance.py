"""Wire-protocol conformance harness for external scorers.

Feeds randomized batches of pairs (including adversarial-but-legal
whitespace and empty texts) through a scorer and checks that every
request is answered exactly once with a finite score, that no duplicate
or unknown responses appear, and that identical inputs score identically.

    python -m medrank.conformance --pipe "python -m medrank.refscorers echo"
    python -m medrank.conformance --tcp 127.0.0.1:9100 --pairs 10000
"""

from __future__ import annotations

import argparse
import random
import sys
from dataclasses import dataclass, field

from .pipeline import ScorerHandle, ScorerProtocolError, ScorerTransportError, score_pairs

_WORDS = (
    "virus outbreak vaccine trial symptom fever cough transmission mask "
    "antibody protein cell lung patient therapy dose immunity spread risk"
).split()

# legal whitespace oddities: runs of spaces and non-breaking spaces survive
# sanitization because only tabs and newlines are forbidden on the wire
_ADVERSARIAL = ("", " ", "  leading", "trailing  ", "a b", "x " * 40, " thin")


@dataclass
class ConformanceReport:
    pairs_sent: int = 0
    batches: int = 0
    failures: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


def _random_text(rng: random.Random) -> str:
    words = [rng.choice(_WORDS) for _ in range(rng.randint(0, 12))]
    if rng.random() < 0.25:
        words.append(rng.choice(_ADVERSARIAL))
    return " ".join(words).strip()


def run_conformance(
    scorer: ScorerHandle,
    n_pairs: int = 10000,
    seed: int = 0,
    max_batch: int = 512,
) -> ConformanceReport:
    rng = random.Random(seed)
    report = ConformanceReport()
    remaining = n_pairs
    serial = 0
    while remaining > 0:
        size = min(remaining, rng.randint(1, max_batch))
        remaining -= size
        pairs = []
        twin_ids: list[tuple[str, str]] = []
        for _ in range(size):
            pair_id = f"c{serial}"
            serial += 1
            pairs.append((pair_id, _random_text(rng), _random_text(rng)))
        # plant twins: same content under two ids, scores must agree
        if size >= 2:
            first = pairs[0]
            twin_id = f"c{serial}"
            serial += 1
            pairs.append((twin_id, first[1], first[2]))
            twin_ids.append((first[0], twin_id))
        try:
            scores = dict(score_pairs(scorer, pairs))
        except (ScorerProtocolError, ScorerTransportError) as exc:
            report.failures.append(f"batch {report.batches}: {exc}")
            report.batches += 1
            report.pairs_sent += len(pairs)
            continue
        # score_pairs already enforces coverage, uniqueness, and finiteness
        for a, b in twin_ids:
            if scores[a] != scores[b]:
                report.failures.append(
                    f"batch {report.batches}: identical pair scored "
                    f"{scores[a]} vs {scores[b]}"
                )
        report.batches += 1
        report.pairs_sent += len(pairs)
    return report


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    group = parser.add_mutually_exclusive_group(required=True)
    group.add_argument("--pipe", metavar="CMD", help="scorer command line")
    group.add_argument("--tcp", metavar="HOST:PORT", help="scorer TCP endpoint")
    parser.add_argument("--pairs", type=int, default=10000)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--max-batch", type=int, default=512)
    args = parser.parse_args(argv)

    scorer = ScorerHandle.pipe(args.pipe) if args.pipe else ScorerHandle.tcp(args.tcp)
    report = run_conformance(scorer, args.pairs, args.seed, args.max_batch)
    print(
        f"conformance: {report.pairs_sent} pairs in {report.batches} batches, "
        f"{len(report.failures)} failure(s)"
    )
    for failure in report.failures:
        print(f"  {failure}", file=sys.stderr)
    return 0 if report.ok else 1


if __name__ == "__main__":
    sys.exit(main())
