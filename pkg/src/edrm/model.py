"""Model configuration, parameter construction, scoring, and pairwise loss.

Two base modes exist: ``knrm`` matches raw word embeddings, ``cknrm``
matches ReLU-composed h-grams for every window up to ``h_max``. The
entity channel and its three semantic branches are switchable; with all
switches off the model reduces exactly to the word-only ranker.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .corpus import PairwiseInstance
from .encoder import EncoderConfig, bow_context, embed_words, encode_entity
from .interaction import TermSequence, TextEncoding, duet_kinds, duet_matrices
from .kernels import KernelBank, build_phi, default_bank
from .kg import DuetText, Entity, KnowledgeGraph
from .params import OptimizerConfig, ParamStore, init_uniform, init_xavier, init_zeros

VARIANTS = {
    "word_only": (False, False, False),
    "embed": (True, False, False),
    "type": (False, True, False),
    "description": (False, False, True),
    "embed_type": (True, True, False),
    "embed_description": (True, False, True),
    "full": (True, True, True),
}
ABLATION_ORDER = ["word_only", "embed", "type", "description", "embed_type", "embed_description", "full"]


@dataclass(frozen=True)
class VocabSizes:
    words: int
    entities: int
    types: int


@dataclass(frozen=True)
class ModelConfig:
    mode: str = "knrm"  # knrm | cknrm
    h_max: int = 3  # cknrm only
    use_entity_embed: bool = True
    use_type: bool = True
    use_description: bool = True
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    kernel_count: int = 11
    kernel_mus: tuple[float, ...] | None = None  # explicit bank overrides kernel_count
    kernel_deltas: tuple[float, ...] | None = None
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("knrm", "cknrm"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "cknrm" and self.h_max < 1:
            raise ValueError("h_max must be >= 1")

    @property
    def use_entities(self) -> bool:
        return self.use_entity_embed or self.use_type or self.use_description

    @property
    def word_grams(self) -> list[int]:
        return [1] if self.mode == "knrm" else list(range(1, self.h_max + 1))

    def bank(self) -> KernelBank:
        if self.kernel_mus is not None:
            return KernelBank(mus=self.kernel_mus, deltas=self.kernel_deltas)
        return default_bank(self.kernel_count)

    def matrix_kinds(self) -> list[str]:
        return duet_kinds(self.word_grams, self.use_entities)

    @property
    def feature_count(self) -> int:
        return len(self.matrix_kinds()) * self.bank().size

    def variant_name(self) -> str:
        switches = (self.use_entity_embed, self.use_type, self.use_description)
        for name, s in VARIANTS.items():
            if s == switches:
                return name
        return "custom"

    def with_variant(self, name: str) -> "ModelConfig":
        if name not in VARIANTS:
            raise ValueError(f"unknown variant {name!r}; known: {', '.join(ABLATION_ORDER)}")
        embed, typ, desc = VARIANTS[name]
        return replace(self, use_entity_embed=embed, use_type=typ, use_description=desc)


def config_to_dict(config: ModelConfig) -> dict:
    enc = config.encoder
    return {
        "mode": config.mode,
        "h_max": config.h_max,
        "use_entity_embed": config.use_entity_embed,
        "use_type": config.use_type,
        "use_description": config.use_description,
        "kernel_count": config.kernel_count,
        "kernel_mus": list(config.kernel_mus) if config.kernel_mus is not None else None,
        "kernel_deltas": list(config.kernel_deltas) if config.kernel_deltas is not None else None,
        "seed": config.seed,
        "encoder": {
            "embed_dim": enc.embed_dim,
            "desc_window": enc.desc_window,
            "desc_max_len": enc.desc_max_len,
            "bow_mean": enc.bow_mean,
            "max_query_words": enc.max_query_words,
            "max_query_entities": enc.max_query_entities,
            "max_doc_words": enc.max_doc_words,
            "max_doc_entities": enc.max_doc_entities,
        },
        "optimizer": {
            "learning_rate": config.optimizer.learning_rate,
            "epsilon": config.optimizer.epsilon,
            "beta1": config.optimizer.beta1,
            "beta2": config.optimizer.beta2,
            "patience": config.optimizer.patience,
        },
    }


def config_from_dict(d: dict) -> ModelConfig:
    return ModelConfig(
        mode=d["mode"],
        h_max=d["h_max"],
        use_entity_embed=d["use_entity_embed"],
        use_type=d["use_type"],
        use_description=d["use_description"],
        kernel_count=d["kernel_count"],
        kernel_mus=tuple(d["kernel_mus"]) if d.get("kernel_mus") else None,
        kernel_deltas=tuple(d["kernel_deltas"]) if d.get("kernel_deltas") else None,
        seed=d["seed"],
        encoder=EncoderConfig(**d["encoder"]),
        optimizer=OptimizerConfig(**d["optimizer"]),
    )


# ---------------------------------------------------------------------------
# parameters


def init_params(config: ModelConfig, vocab: VocabSizes) -> ParamStore:
    """Create exactly the tensors this configuration trains.

    Each tensor draws from its own named random stream, so enabling or
    disabling branches never perturbs the initialization of the others.
    """
    dim = config.encoder.embed_dim
    seed = config.seed
    store = ParamStore()
    init_uniform(store, "word_embedding", (vocab.words, dim), seed)
    if config.use_entity_embed:
        init_uniform(store, "entity_embedding", (vocab.entities, dim), seed)
    if config.use_type:
        init_uniform(store, "type_embedding", (vocab.types, dim), seed)
        init_xavier(store, "type_context_weight", (dim, dim), seed)
    if config.use_description:
        init_xavier(store, "desc_conv_weight", (config.encoder.desc_window * dim, dim), seed)
        init_zeros(store, "desc_conv_bias", (dim,))
    if config.use_type or config.use_description:
        init_xavier(store, "entity_combine_weight", (dim, 2 * dim), seed)
        init_zeros(store, "entity_combine_bias", (dim,))
    if config.mode == "cknrm":
        for h in config.word_grams:
            init_xavier(store, f"ngram_weight_h{h}", (h * dim, dim), seed)
            init_zeros(store, f"ngram_bias_h{h}", (dim,))
    # Small init keeps tanh out of saturation: pooled features carry
    # log(eps) terms of magnitude ~23, so Xavier here would start the
    # score layer pinned at +-1 with vanishing gradients.
    init_uniform(store, "rank_weight", (config.feature_count,), seed, half_width=0.014)
    init_zeros(store, "rank_bias", ())
    return store


# ---------------------------------------------------------------------------
# forward pass


def encode_text(
    text: DuetText,
    kg: KnowledgeGraph | None,
    leaves: dict[str, Tensor],
    config: ModelConfig,
    role: str,
) -> TextEncoding:
    """Word channel plus (when enabled) the semantic entity channel."""
    enc = config.encoder
    if role == "query":
        max_words, max_entities = enc.max_query_words, enc.max_query_entities
    else:
        max_words, max_entities = enc.max_doc_words, enc.max_doc_entities
    words = text.words[:max_words]
    word_embs = embed_words(words, leaves["word_embedding"])

    if config.mode == "knrm":
        word_seqs = [TermSequence(word_embs, "w", 1)]
    else:
        from .interaction import compose_ngrams

        word_seqs = [
            compose_ngrams(word_embs, h, leaves[f"ngram_weight_h{h}"], leaves[f"ngram_bias_h{h}"])
            for h in config.word_grams
        ]

    entity_seq = None
    if config.use_entities:
        if kg is None:
            raise ValueError("entity channels need a knowledge graph")
        mentions = [m for m in text.entities if m.end <= max_words][:max_entities]
        context_vec = None
        if config.use_type:
            context_vec = bow_context(word_embs, leaves["type_context_weight"], enc.bow_mean)
        sems = [
            encode_entity(
                kg.entity(m.entity_id),
                leaves,
                enc,
                use_entity_embed=config.use_entity_embed,
                use_type=config.use_type,
                use_description=config.use_description,
                context_vec=context_vec,
            ).v_sem
            for m in mentions
        ]
        if sems:
            entity_seq = TermSequence(ad.vstack(sems), "e", 1)
        else:
            entity_seq = TermSequence(ad.constant(np.zeros((0, enc.embed_dim))), "e", 1)
    return TextEncoding(word_seqs=word_seqs, entity_seq=entity_seq)


def score_encoded(
    qenc: TextEncoding,
    denc: TextEncoding,
    leaves: dict[str, Tensor],
    config: ModelConfig,
    bank: KernelBank | None = None,
) -> Tensor:
    phi = build_phi(duet_matrices(qenc, denc), bank or config.bank(), config.matrix_kinds())
    return ad.tanh(ad.add(ad.dot(leaves["rank_weight"], phi.values), leaves["rank_bias"]))


def score(
    query: DuetText,
    doc: DuetText,
    kg: KnowledgeGraph | None,
    store: ParamStore,
    config: ModelConfig,
) -> float:
    """Ranking score in (-1, 1) for one query-document pair."""
    leaves = store.leaves()
    qenc = encode_text(query, kg, leaves, config, "query")
    denc = encode_text(doc, kg, leaves, config, "document")
    return float(score_encoded(qenc, denc, leaves, config).value)


class _EncodingCache:
    """Per-batch memo of text encodings keyed by (role, text id)."""

    def __init__(self, kg, leaves, config):
        self.kg = kg
        self.leaves = leaves
        self.config = config
        self._memo: dict[tuple[str, int], TextEncoding] = {}

    def get(self, role: str, text_id: int, text: DuetText) -> TextEncoding:
        key = (role, text_id)
        if key not in self._memo:
            self._memo[key] = encode_text(text, self.kg, self.leaves, self.config, role)
        return self._memo[key]


@dataclass
class PairwiseLossResult:
    loss: float
    scores: list[tuple[float, float]]  # (positive score, negative score) per pair

    @property
    def accuracy(self) -> float:
        if not self.scores:
            return 0.0
        return sum(1.0 for sp, sn in self.scores if sp > sn) / len(self.scores)


def pairwise_loss(
    batch: list[PairwiseInstance],
    kg: KnowledgeGraph | None,
    store: ParamStore,
    config: ModelConfig,
    accumulate: bool = True,
) -> PairwiseLossResult:
    """Summed hinge loss max(0, 1 - f(q,d+) + f(q,d-)) over the batch.

    With ``accumulate`` the gradients are backpropagated into the store;
    pairs whose margin is already satisfied contribute zero gradient.
    """
    if not batch:
        raise ValueError("empty batch")
    leaves = store.leaves()
    bank = config.bank()
    cache = _EncodingCache(kg, leaves, config)
    hinges = []
    scores = []
    for pair in batch:
        qenc = cache.get("query", pair.query_id, pair.query)
        s_pos = score_encoded(qenc, cache.get("document", pair.pos_id, pair.doc_pos), leaves, config, bank)
        s_neg = score_encoded(qenc, cache.get("document", pair.neg_id, pair.doc_neg), leaves, config, bank)
        hinges.append(ad.relu(ad.add_scalar(ad.sub(s_neg, s_pos), 1.0)))
        scores.append((float(s_pos.value), float(s_neg.value)))
    loss = ad.sum_all(ad.stack_scalars(hinges))
    if accumulate:
        loss.backward()
    return PairwiseLossResult(loss=float(loss.value), scores=scores)
