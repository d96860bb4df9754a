"""Query/document/click ingestion, DCTR labels, and pairwise instances."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field

from .kg import DuetText, EntityMention, KnowledgeGraph, annotate


class CorpusFormatError(ValueError):
    pass


@dataclass(frozen=True)
class ClickRecord:
    query_id: int
    doc_id: int
    impressions: int
    clicks: int

    def __post_init__(self):
        if self.impressions < 1:
            raise ValueError(
                f"click record ({self.query_id},{self.doc_id}): impressions must be >= 1"
            )
        if not 0 <= self.clicks <= self.impressions:
            raise ValueError(
                f"click record ({self.query_id},{self.doc_id}): clicks outside [0, impressions]"
            )


@dataclass(frozen=True)
class LabeledPair:
    query_id: int
    doc_id: int
    grade: float


@dataclass(frozen=True)
class PairwiseInstance:
    query_id: int
    pos_id: int
    neg_id: int
    query: DuetText
    doc_pos: DuetText
    doc_neg: DuetText


@dataclass
class PairBuildResult:
    pairs: list[PairwiseInstance] = field(default_factory=list)
    skipped_queries: int = 0


def dctr_labels(records: list[ClickRecord]) -> list[LabeledPair]:
    """Click-through-rate grades, aggregating duplicate (query, doc) rows."""
    clicks: dict[tuple[int, int], int] = defaultdict(int)
    impressions: dict[tuple[int, int], int] = defaultdict(int)
    for r in records:
        clicks[(r.query_id, r.doc_id)] += r.clicks
        impressions[(r.query_id, r.doc_id)] += r.impressions
    return [
        LabeledPair(query_id=q, doc_id=d, grade=clicks[(q, d)] / impressions[(q, d)])
        for q, d in sorted(impressions)
    ]


def make_pairs(
    labels: list[LabeledPair],
    queries: dict[int, DuetText],
    docs: dict[int, DuetText],
    max_per_query: int | None = None,
) -> PairBuildResult:
    """All ordered within-query pairs with strictly differing grades.

    Order is deterministic: (query id, positive doc id, negative doc id).
    Queries with fewer than two labeled documents are counted and skipped.
    """
    by_query: dict[int, list[LabeledPair]] = defaultdict(list)
    for lab in labels:
        by_query[lab.query_id].append(lab)
    result = PairBuildResult()
    for qid in sorted(by_query):
        rows = sorted(by_query[qid], key=lambda l: l.doc_id)
        if len(rows) < 2:
            result.skipped_queries += 1
            continue
        emitted = 0
        for pos in rows:
            for neg in rows:
                if pos.grade > neg.grade:
                    if max_per_query is not None and emitted >= max_per_query:
                        break
                    result.pairs.append(
                        PairwiseInstance(
                            query_id=qid,
                            pos_id=pos.doc_id,
                            neg_id=neg.doc_id,
                            query=queries[qid],
                            doc_pos=docs[pos.doc_id],
                            doc_neg=docs[neg.doc_id],
                        )
                    )
                    emitted += 1
    return result


# ---------------------------------------------------------------------------
# corpus files


@dataclass
class CorpusStore:
    """Immutable-after-load bundle of texts, clicks and the query split."""

    queries: dict[int, DuetText]
    docs: dict[int, DuetText]
    clicks: list[ClickRecord]
    split: dict[int, str]
    stratum: dict[int, str]

    def candidates(self) -> dict[int, list[int]]:
        """Per-query candidate document ids, ascending."""
        cand: dict[int, set[int]] = defaultdict(set)
        for r in self.clicks:
            cand[r.query_id].add(r.doc_id)
        return {q: sorted(ds) for q, ds in sorted(cand.items())}

    def query_ids(self, split: str) -> list[int]:
        return sorted(q for q, s in self.split.items() if s == split)


def _parse_mentions(text: str) -> tuple[EntityMention, ...]:
    if not text:
        return ()
    out = []
    for item in text.split(","):
        eid, start, end = item.split(":")
        out.append(EntityMention(entity_id=int(eid), start=int(start), end=int(end)))
    return tuple(out)


def load_texts(path, kg: KnowledgeGraph | None = None, max_mention_len: int = 5) -> dict[int, DuetText]:
    """Load an ``id \\t tokens [\\t links]`` file.

    Pre-linked entity fields are used verbatim when present; otherwise the
    knowledge graph (if given) annotates each token sequence.
    """
    texts: dict[int, DuetText] = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) not in (2, 3):
                raise CorpusFormatError(f"{path}:{lineno}: expected 2 or 3 fields, got {len(parts)}")
            try:
                text_id = int(parts[0])
                words = tuple(int(t) for t in parts[1].split()) if parts[1] else ()
                if len(parts) == 3:
                    mentions = _parse_mentions(parts[2])
                elif kg is not None:
                    mentions = tuple(annotate(words, kg, max_mention_len))
                else:
                    mentions = ()
                texts[text_id] = DuetText(words=words, entities=mentions)
            except (ValueError, IndexError) as exc:
                raise CorpusFormatError(f"{path}:{lineno}: {exc}") from exc
    return texts


def save_texts(texts: dict[int, DuetText], path, with_links: bool = False) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for text_id in sorted(texts):
            t = texts[text_id]
            fields = [str(text_id), " ".join(map(str, t.words))]
            if with_links:
                fields.append(",".join(f"{m.entity_id}:{m.start}:{m.end}" for m in t.entities))
            f.write("\t".join(fields) + "\n")


def load_clicks(path) -> list[ClickRecord]:
    records = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise CorpusFormatError(f"{path}:{lineno}: expected 4 fields, got {len(parts)}")
            try:
                records.append(
                    ClickRecord(
                        query_id=int(parts[0]),
                        doc_id=int(parts[1]),
                        impressions=int(parts[2]),
                        clicks=int(parts[3]),
                    )
                )
            except ValueError as exc:
                raise CorpusFormatError(f"{path}:{lineno}: {exc}") from exc
    return records


def load_split(path) -> tuple[dict[int, str], dict[int, str]]:
    split: dict[int, str] = {}
    stratum: dict[int, str] = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise CorpusFormatError(f"{path}:{lineno}: expected 3 fields, got {len(parts)}")
            qid, name, tag = parts
            if name not in ("train", "test"):
                raise CorpusFormatError(f"{path}:{lineno}: split must be train or test, got {name!r}")
            split[int(qid)] = name
            stratum[int(qid)] = tag
    return split, stratum


def load_corpus(directory, kg: KnowledgeGraph | None = None, max_mention_len: int = 5) -> CorpusStore:
    """Load the standard corpus layout from ``directory``."""
    from pathlib import Path

    directory = Path(directory)
    split, stratum = load_split(directory / "split.tsv")
    return CorpusStore(
        queries=load_texts(directory / "queries.tsv", kg, max_mention_len),
        docs=load_texts(directory / "docs.tsv", kg, max_mention_len),
        clicks=load_clicks(directory / "clicks.tsv"),
        split=split,
        stratum=stratum,
    )
