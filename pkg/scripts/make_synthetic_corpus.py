#!/usr/bin/env python3
"""
Write the planted-signal synthetic corpus and a matching learner-score file.

Usage:
  python scripts/make_synthetic_corpus.py
  python scripts/make_synthetic_corpus.py --topics 40 --generated 2 --seed 7
  python scripts/make_synthetic_corpus.py --output data/synthetic/corpus.jsonl --scores ''
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / 'tools' / 'alignment-bench'))

from corpus import validate_corpus, write_corpus, write_learner_scores  # noqa: E402
from synthetic import make_learner_scores, make_synthetic_corpus  # noqa: E402


def main():
    parser = argparse.ArgumentParser(description="Generate a synthetic alignment corpus")
    parser.add_argument("--output", type=Path, default=Path("data/synthetic/corpus.jsonl"))
    parser.add_argument("--scores", default="data/synthetic/learner_scores.jsonl",
                        help="Learner-score output path; empty string skips it")
    parser.add_argument("--topics", type=int, default=20)
    parser.add_argument("--accepted", type=int, default=3)
    parser.add_argument("--rejected", type=int, default=7)
    parser.add_argument("--generated", type=int, default=0,
                        help="Generated resources per label and generation tag")
    parser.add_argument("--learners", type=int, default=40, help="Learners per group")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    if args.accepted < 2 or args.rejected < 1:
        parser.error("need --accepted >= 2 and --rejected >= 1 for every topic to be evaluable")

    corpus = make_synthetic_corpus(
        topic_count=args.topics,
        accepted_per_topic=args.accepted,
        rejected_per_topic=args.rejected,
        generated_per_label=args.generated,
        seed=args.seed,
    )
    report = validate_corpus(corpus)
    if not report.ok:
        for issue in report.errors:
            print(f"error: {issue.location}: {issue.message}", file=sys.stderr)
        sys.exit(1)

    write_corpus(corpus, args.output)
    resources = sum(len(topic.resources) for topic in corpus.topics)
    print(f"Wrote {len(corpus.topics)} topics / {resources} resources to {args.output}")

    if args.scores:
        scores = make_learner_scores(per_group=args.learners, seed=args.seed)
        write_learner_scores(scores, args.scores)
        print(f"Wrote {len(scores.rows)} learner scores to {args.scores}")


if __name__ == "__main__":
    main()
