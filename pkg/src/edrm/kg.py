"""Knowledge graph storage and commonness-based entity annotation.

The graph holds entities (name and description token sequences plus type
ids) and a surface-form table mapping mention token sequences to candidate
entities with commonness priors. Annotation is greedy left-to-right
longest match, linking each matched mention to its top-commonness
candidate. The graph is immutable after load and all operations here are
pure.
"""

from __future__ import annotations

from dataclasses import dataclass

Span = tuple[int, int]  # [start, end) over word positions
Mention = tuple[int, ...]  # token-id sequence


class KgValidationError(ValueError):
    pass


@dataclass(frozen=True)
class Entity:
    id: int
    name: tuple[int, ...]
    description: tuple[int, ...]
    types: tuple[int, ...]


@dataclass(frozen=True)
class EntityMention:
    entity_id: int
    start: int
    end: int


@dataclass(frozen=True)
class DuetText:
    """A text as parallel bag-of-words and bag-of-entities."""

    words: tuple[int, ...]
    entities: tuple[EntityMention, ...] = ()

    def __post_init__(self):
        prev_end = 0
        for m in self.entities:
            if not (0 <= m.start < m.end <= len(self.words)):
                raise ValueError(f"entity span ({m.start},{m.end}) outside word sequence")
            if m.start < prev_end:
                raise ValueError("entity spans overlap or are out of order")
            prev_end = m.end


class KnowledgeGraph:
    def __init__(
        self,
        entities: list[Entity],
        surface_forms: dict[Mention, list[tuple[int, float]]],
        word_vocab_size: int | None = None,
        type_vocab_size: int | None = None,
    ):
        ids = [e.id for e in entities]
        if ids != list(range(len(entities))):
            raise KgValidationError("entity ids must be contiguous from 0")
        for e in entities:
            if len(set(e.types)) != len(e.types):
                raise KgValidationError(f"entity {e.id}: duplicate type ids")
        derived_type = max((t for e in entities for t in e.types), default=-1) + 1
        derived_word = max(
            (w for e in entities for w in (*e.name, *e.description)), default=-1
        ) + 1
        if type_vocab_size is not None:
            for e in entities:
                bad = [t for t in e.types if t >= type_vocab_size]
                if bad:
                    raise KgValidationError(f"entity {e.id}: undefined type id {bad[0]}")
        if word_vocab_size is not None:
            for e in entities:
                bad = [w for w in (*e.name, *e.description) if w >= word_vocab_size]
                if bad:
                    raise KgValidationError(f"entity {e.id}: undefined word id {bad[0]}")
        for mention, cands in surface_forms.items():
            total = 0.0
            for eid, score in cands:
                if not 0 <= eid < len(entities):
                    raise KgValidationError(f"surface form {mention}: unknown entity id {eid}")
                if not 0.0 <= score <= 1.0:
                    raise KgValidationError(f"surface form {mention}: commonness {score} outside [0,1]")
                total += score
            if total > 1.0 + 1e-9:
                raise KgValidationError(f"surface form {mention}: commonness sums to {total} > 1")
        self.entities = tuple(entities)
        # candidates sorted by descending commonness, ties by ascending id
        self.surface_forms = {
            m: sorted(c, key=lambda x: (-x[1], x[0])) for m, c in surface_forms.items()
        }
        self.word_vocab_size = word_vocab_size if word_vocab_size is not None else derived_word
        self.type_vocab_size = type_vocab_size if type_vocab_size is not None else derived_type
        self.max_surface_len = max((len(m) for m in surface_forms), default=0)

    def __len__(self) -> int:
        return len(self.entities)

    def entity(self, entity_id: int) -> Entity:
        return self.entities[entity_id]


# ---------------------------------------------------------------------------
# file formats (tab-separated, UTF-8, \n endings)


def _parse_ids(field: str, sep: str) -> tuple[int, ...]:
    if not field:
        return ()
    return tuple(int(tok) for tok in field.split(sep))


def load_kg(
    entities_path,
    surface_forms_path,
    word_vocab_size: int | None = None,
    type_vocab_size: int | None = None,
) -> KnowledgeGraph:
    entities: list[Entity] = []
    with open(entities_path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise KgValidationError(
                    f"{entities_path}:{lineno}: expected 4 tab-separated fields, got {len(parts)}"
                )
            try:
                entities.append(
                    Entity(
                        id=int(parts[0]),
                        name=_parse_ids(parts[1], " "),
                        description=_parse_ids(parts[2], " "),
                        types=_parse_ids(parts[3], ","),
                    )
                )
            except ValueError as exc:
                raise KgValidationError(f"{entities_path}:{lineno}: {exc}") from exc

    surface_forms: dict[Mention, list[tuple[int, float]]] = {}
    with open(surface_forms_path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise KgValidationError(
                    f"{surface_forms_path}:{lineno}: expected 3 tab-separated fields, got {len(parts)}"
                )
            try:
                mention = _parse_ids(parts[0], " ")
                entry = (int(parts[1]), float(parts[2]))
            except ValueError as exc:
                raise KgValidationError(f"{surface_forms_path}:{lineno}: {exc}") from exc
            if not mention:
                raise KgValidationError(f"{surface_forms_path}:{lineno}: empty mention")
            surface_forms.setdefault(mention, []).append(entry)

    return KnowledgeGraph(entities, surface_forms, word_vocab_size, type_vocab_size)


def save_kg(kg: KnowledgeGraph, entities_path, surface_forms_path) -> None:
    """Write the graph back out in canonical order (round-trips bit-exactly)."""
    with open(entities_path, "w", encoding="utf-8", newline="\n") as f:
        for e in kg.entities:
            f.write(
                "%d\t%s\t%s\t%s\n"
                % (
                    e.id,
                    " ".join(map(str, e.name)),
                    " ".join(map(str, e.description)),
                    ",".join(map(str, e.types)),
                )
            )
    with open(surface_forms_path, "w", encoding="utf-8", newline="\n") as f:
        for mention in sorted(kg.surface_forms):
            for eid, score in kg.surface_forms[mention]:
                f.write("%s\t%d\t%s\n" % (" ".join(map(str, mention)), eid, repr(score)))


# ---------------------------------------------------------------------------
# annotation


def annotate(words, kg: KnowledgeGraph, max_mention_len: int) -> list[EntityMention]:
    """Greedy left-to-right longest-match annotation.

    Each matched mention is linked to its single highest-commonness
    candidate; returned spans are non-overlapping and in text order.
    """
    if max_mention_len < 1:
        raise ValueError("max_mention_len must be >= 1")
    words = tuple(words)
    cap = min(max_mention_len, kg.max_surface_len) if kg.max_surface_len else 0
    out: list[EntityMention] = []
    i = 0
    n = len(words)
    while i < n:
        matched = False
        for length in range(min(cap, n - i), 0, -1):
            cands = kg.surface_forms.get(words[i : i + length])
            if cands:
                out.append(EntityMention(entity_id=cands[0][0], start=i, end=i + length))
                i += length
                matched = True
                break
        if not matched:
            i += 1
    return out
