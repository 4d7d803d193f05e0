#!/usr/bin/env python3
"""Repeated-run coherence protocol on the bundled fixture.

Executes the full pipeline at each requested topic count, three seeded
runs per count, and prints the averaged coherence report: the evaluation
scheme used for the headline tables (topic counts 10..50, 15 runs).
"""

import argparse
import logging
from pathlib import Path

from semtopic.cli import PipelineConfig, resolve_provider
from semtopic.cluster import cluster_points
from semtopic.coherence import CoherenceConfig, evaluate_topics, run_protocol
from semtopic.corpus import load_corpus
from semtopic.embed import embed_texts
from semtopic.reduce import ReduceConfig, reduce_embeddings
from semtopic.topic import TopicConfig, build_vocabulary, extract_topic, merge_topics


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    root = Path(__file__).resolve().parent.parent
    parser.add_argument("--corpus", default=str(root / "data" / "fixture" / "corpus.jsonl"))
    parser.add_argument("--provider", default=str(root / "data" / "fixture" / "embeddings"))
    parser.add_argument("--format", default="jsonl", choices=("lines", "jsonl"))
    parser.add_argument("--topic-counts", default="10,20,30,40,50")
    parser.add_argument("--runs", type=int, default=3)
    parser.add_argument("--base-seed", type=int, default=0)
    parser.add_argument("--metrics", default="c_v,c_npmi")
    args = parser.parse_args()

    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    config = PipelineConfig(provider_kind="file", provider_location=args.provider)
    corpus = load_corpus(args.corpus, args.format)
    provider = resolve_provider(config)
    sentence_matrix = embed_texts(provider, [s.text for s in corpus.sentences], "sentence")
    doc_tokens = corpus.doc_tokens()
    metrics = args.metrics.split(",")

    def runner(topic_count: int, seed: int):
        layout = reduce_embeddings(sentence_matrix, ReduceConfig(seed=seed))
        assignment = cluster_points(layout, config.cluster)
        import numpy as np

        topic_cfg = TopicConfig(target_topic_count=topic_count)
        topics = []
        for label in range(assignment.n_clusters):
            ids = [int(i) for i in np.flatnonzero(assignment.labels == label)]
            vocab = build_vocabulary(
                label,
                [corpus.sentences[i] for i in ids],
                ids,
                sentence_matrix.subset(ids),
                provider,
            )
            topics.append(extract_topic(vocab, topic_cfg))
        merged = merge_topics(topics, topic_cfg)
        report = evaluate_topics(merged.topics, doc_tokens, metrics=metrics)
        return {m: [score for _, score in rows] for m, rows in report.per_topic.items()}

    counts = tuple(int(c) for c in args.topic_counts.split(","))
    report = run_protocol(runner, topic_counts=counts, runs=args.runs, base_seed=args.base_seed)
    print(f"\nexecutions: {report.metadata['executions']}")
    for metric, value in report.averages.items():
        print(f"{metric}: {value:.4f}")


if __name__ == "__main__":
    main()
