"""Entity-duet neural ranking: knowledge-graph enriched kernel-pooling ranker."""

__version__ = "0.1.0"
