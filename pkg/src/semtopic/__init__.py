"""Semantic topic extraction engine.

Pipeline: embed sentences through an external provider, reduce the vectors
to a low-dimensional space, cluster by density with explicit noise, score
each cluster's candidate words by mean similarity to the cluster's
sentences, and merge similar topics. Coherence metrics (c_v, c_npmi,
c_uci, u_mass) evaluate the result against a reference corpus.
"""

from .cluster import ClusterAssignment, ClusterConfig, cluster_points
from .coherence import CoherenceConfig, CoherenceReport, evaluate_topics, run_protocol
from .corpus import Corpus, Document, Sentence, load_corpus, split_sentences, tokenize
from .embed import (
    EmbeddingMatrix,
    EmbeddingProvider,
    cosine,
    embed_texts,
    read_embedding_file,
    write_embedding_file,
)
from .reduce import Layout, ReduceConfig, reduce_embeddings
from .topic import (
    Topic,
    TopicConfig,
    TopicSet,
    build_vocabulary,
    extract_topic,
    merge_topics,
    score_words,
    topic_similarity,
)

__version__ = "0.1.0"

__all__ = [
    "ClusterAssignment",
    "ClusterConfig",
    "CoherenceConfig",
    "CoherenceReport",
    "Corpus",
    "Document",
    "EmbeddingMatrix",
    "EmbeddingProvider",
    "Layout",
    "ReduceConfig",
    "Sentence",
    "Topic",
    "TopicConfig",
    "TopicSet",
    "build_vocabulary",
    "cluster_points",
    "cosine",
    "embed_texts",
    "evaluate_topics",
    "extract_topic",
    "load_corpus",
    "merge_topics",
    "read_embedding_file",
    "reduce_embeddings",
    "run_protocol",
    "score_words",
    "split_sentences",
    "tokenize",
    "topic_similarity",
    "write_embedding_file",
]
