"""Word embedding lookup and the semantic entity representation.

An entity's representation combines three branches: its id embedding, a
max-pooled one-layer CNN over its description words, and an attention
mix of its type embeddings steered by the containing text's bag of
words. A linear layer folds the description and type branches back into
the embedding dimension.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .kg import Entity


@dataclass(frozen=True)
class EncoderConfig:
    embed_dim: int = 32
    desc_window: int = 3
    desc_max_len: int = 64
    desc_filters: int | None = None  # output channels; must equal embed_dim
    bow_mean: bool = False  # mean instead of sum for the attention context
    max_query_words: int = 16
    max_query_entities: int = 8
    max_doc_words: int = 64
    max_doc_entities: int = 16

    def __post_init__(self):
        if self.embed_dim < 1:
            raise ValueError("embed_dim must be >= 1")
        if self.desc_filters is not None and self.desc_filters != self.embed_dim:
            raise ValueError("description filter count must equal embed_dim")


@dataclass
class SemanticEntityRep:
    v_emb: Tensor | None
    v_des: Tensor
    v_type: Tensor
    v_sem: Tensor
    attention: Tensor | None  # per-type weights, None when the entity has no types


def embed_words(tokens, word_table: Tensor) -> Tensor:
    """Rows of the word embedding table; unknown ids fall back to row 0."""
    vocab = word_table.value.shape[0]
    ids = np.asarray([t if 0 <= t < vocab else 0 for t in tokens], dtype=np.intp)
    return ad.gather(word_table, ids)


def bow_context(word_embs: Tensor, context_weight: Tensor, mean: bool = False) -> Tensor:
    """Attention context vector: linear map of the summed word embeddings."""
    summed = ad.sum_rows(word_embs)
    if mean and word_embs.value.shape[0] > 0:
        summed = ad.scale(summed, 1.0 / word_embs.value.shape[0])
    return ad.matvec(context_weight, summed)


def encode_description(
    desc,
    word_table: Tensor,
    conv_weight: Tensor,
    conv_bias: Tensor,
    window: int,
    max_len: int,
) -> Tensor:
    """Max over ReLU'd convolution windows; empty descriptions encode to 0.

    Descriptions shorter than the window are padded with zero-embedding
    rows so exactly one window exists.
    """
    desc = tuple(desc)[:max_len]
    if not desc:
        return ad.constant(np.zeros(conv_weight.value.shape[1]))
    embs = embed_words(desc, word_table)
    if len(desc) < window:
        embs = ad.pad_rows(embs, window)
    grams = ad.relu(ad.add(ad.matmul(ad.windows(embs, window), conv_weight), conv_bias))
    return ad.max_rows(grams)


def encode_types(type_ids, type_table: Tensor, context_vec: Tensor) -> tuple[Tensor, Tensor | None]:
    """Attention-weighted combination of the entity's type embeddings."""
    if not type_ids:
        return ad.constant(np.zeros(type_table.value.shape[1])), None
    type_embs = ad.gather(type_table, np.asarray(type_ids, dtype=np.intp))
    logits = ad.matvec(type_embs, context_vec)
    attention = ad.softmax1d(logits)
    return ad.vecmat(attention, type_embs), attention


def encode_entity(
    entity: Entity,
    leaves: dict[str, Tensor],
    config: EncoderConfig,
    use_entity_embed: bool = True,
    use_type: bool = True,
    use_description: bool = True,
    context_vec: Tensor | None = None,
    context_ids=None,
) -> SemanticEntityRep:
    """Full semantic representation of one entity.

    The attention context is the containing text's bag of words; pass
    ``context_vec`` to share it across the entities of one text, or
    ``context_ids`` to compute it here.
    """
    dim = config.embed_dim
    zero = ad.constant(np.zeros(dim))

    v_emb = None
    if use_entity_embed:
        v_emb = ad.gather(leaves["entity_embedding"], np.asarray([entity.id], dtype=np.intp))
        v_emb = ad.sum_rows(v_emb)  # (1, L) -> (L,)

    if use_description:
        v_des = encode_description(
            entity.description,
            leaves["word_embedding"],
            leaves["desc_conv_weight"],
            leaves["desc_conv_bias"],
            config.desc_window,
            config.desc_max_len,
        )
    else:
        v_des = zero

    attention = None
    if use_type:
        if context_vec is None:
            if context_ids is None:
                raise ValueError("type attention needs a context")
            context_vec = bow_context(
                embed_words(context_ids, leaves["word_embedding"]),
                leaves["type_context_weight"],
                config.bow_mean,
            )
        v_type, attention = encode_types(entity.types, leaves["type_embedding"], context_vec)
    else:
        v_type = zero

    if use_description or use_type:
        combined = ad.matvec(leaves["entity_combine_weight"], ad.concat1d([v_des, v_type]))
        combined = ad.add(combined, leaves["entity_combine_bias"])
        v_sem = ad.add(v_emb, combined) if v_emb is not None else combined
    else:
        v_sem = v_emb if v_emb is not None else zero

    return SemanticEntityRep(v_emb=v_emb, v_des=v_des, v_type=v_type, v_sem=v_sem, attention=attention)
