"""N-gram composition and the four-way word/entity translation matrices."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor


@dataclass
class TermSequence:
    """A run of term vectors on one side of the match: words (as h-grams) or entities."""

    embeddings: Tensor  # (n, L); n may be 0
    family: str  # "w" | "e"
    gram: int = 1

    def __len__(self) -> int:
        return self.embeddings.value.shape[0]


@dataclass
class TextEncoding:
    word_seqs: list[TermSequence]  # ascending gram size
    entity_seq: TermSequence | None  # None when the entity channel is off


@dataclass
class TranslationMatrix:
    scores: Tensor  # (|q|, |d|) cosines in [-1, 1]
    valid: np.ndarray  # False cells are excluded downstream, never matched as 0
    kind: str


def pair_kind(q: TermSequence, d: TermSequence) -> str:
    if q.family == "w" and d.family == "w":
        return f"ww_{q.gram}_{d.gram}"
    if q.family == "e" and d.family == "w":
        return f"ew_1_{d.gram}"
    if q.family == "w" and d.family == "e":
        return f"we_{q.gram}_1"
    return "ee"


def compose_ngrams(word_embs: Tensor, h: int, weight: Tensor, bias: Tensor) -> TermSequence:
    """ReLU(h-window convolution) over the word embeddings; empty if the text is shorter than h."""
    if h < 1:
        raise ValueError("h must be >= 1")
    out_dim = weight.value.shape[1]
    if word_embs.value.shape[0] < h:
        return TermSequence(ad.constant(np.zeros((0, out_dim))), "w", h)
    grams = ad.relu(ad.add(ad.matmul(ad.windows(word_embs, h), weight), bias))
    return TermSequence(grams, "w", h)


def translation_matrix(qseq: TermSequence, dseq: TermSequence) -> TranslationMatrix:
    scores, valid = ad.cosine_matrix(qseq.embeddings, dseq.embeddings)
    return TranslationMatrix(scores=scores, valid=valid, kind=pair_kind(qseq, dseq))


def duet_kinds(word_grams: list[int], entities_on: bool) -> list[str]:
    """Canonical matrix layout: ww blocks by (h_q, h_d), then ew, then we, then ee."""
    kinds = [f"ww_{hq}_{hd}" for hq, hd in product(word_grams, word_grams)]
    if entities_on:
        kinds += [f"ew_1_{hd}" for hd in word_grams]
        kinds += [f"we_{hq}_1" for hq in word_grams]
        kinds.append("ee")
    return kinds


def duet_matrices(q: TextEncoding, d: TextEncoding) -> list[TranslationMatrix]:
    """All cross matrices between the two sides, in canonical layout order.

    Word-side matrices are built solely from the word sequences, so they
    are identical whether or not entity channels are present.
    """
    out = [translation_matrix(qs, ds) for qs, ds in product(q.word_seqs, d.word_seqs)]
    if q.entity_seq is not None and d.entity_seq is not None:
        out += [translation_matrix(q.entity_seq, ds) for ds in d.word_seqs]
        out += [translation_matrix(qs, d.entity_seq) for qs in q.word_seqs]
        out.append(translation_matrix(q.entity_seq, d.entity_seq))
    return out


def dump_matrices(matrices: list[TranslationMatrix], directory) -> list[str]:
    """Write each matrix as a CSV named by its kind; returns the file names."""
    from pathlib import Path

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    names = []
    for m in matrices:
        name = f"matrix_{m.kind}.csv"
        rows, cols = m.scores.value.shape
        with open(directory / name, "w", encoding="utf-8", newline="\n") as f:
            f.write("# kind=%s rows=%d cols=%d\n" % (m.kind, rows, cols))
            for i in range(rows):
                cells = [
                    ("%.10g" % m.scores.value[i, j]) if m.valid[i, j] else "NA"
                    for j in range(cols)
                ]
                f.write(",".join(cells) + "\n")
        names.append(name)
    return names
