"""Label set construction and the tab-separated label file format."""

from __future__ import annotations

from collections import Counter
from pathlib import Path
from typing import Iterable, Sequence

from .types import CitationRef, CorpusError, Document, LabelSet


def build_label_set(
    corpus: Sequence[Document],
    top_k: int,
    exclude: Iterable[CitationRef] = (),
) -> LabelSet:
    """The top_k most-cited citation keys, minus the excluded ones.

    Frequency is the citing-document count (a document counts once per
    key no matter how often it repeats the citation). Ranking is by
    descending count with ties broken lexicographically by canonical
    key. Exclusion applies after the top_k cut, mirroring a curation
    pass over an automatically chosen target list.
    """
    if top_k < 1:
        raise CorpusError(f"top_k must be >= 1, got {top_k}")
    counts: Counter[str] = Counter()
    refs: dict[str, CitationRef] = {}
    for doc in corpus:
        for ref, _ in doc.citations:
            refs.setdefault(ref.key, ref)
        for key in doc.citation_keys():
            counts[key] += 1
    ranked = sorted(counts, key=lambda k: (-counts[k], k))[:top_k]
    excluded_keys = {ref.key for ref in exclude}
    kept = [refs[k] for k in ranked if k not in excluded_keys]
    if not kept:
        raise CorpusError("no labels survive exclusion")
    return LabelSet(labels=kept)


def write_label_file(label_set: LabelSet, path: str | Path, provision_paths: dict[str, str] | None = None) -> None:
    """Write labels as TSV rows: canonical key, procedural flag, provision path."""
    provision_paths = provision_paths or {}
    lines = []
    for key in label_set.keys():
        flag = "1" if label_set.procedural.get(key, False) else "0"
        lines.append(f"{key}\t{flag}\t{provision_paths.get(key, '')}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_label_file(path: str | Path, load_provisions: bool = True) -> LabelSet:
    """Load a label file; provision texts are read from the referenced paths.

    Relative provision paths resolve against the label file's directory.
    """
    path = Path(path)
    labels: list[CitationRef] = []
    provision_texts: dict[str, str] = {}
    procedural: dict[str, bool] = {}
    for line_no, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise CorpusError(f"{path}:{line_no}: expected 3 tab-separated fields")
        key, flag, prov_path = parts
        ref = CitationRef.from_key(key)
        labels.append(ref)
        procedural[ref.key] = flag.strip() == "1"
        if prov_path.strip() and load_provisions:
            prov = Path(prov_path)
            if not prov.is_absolute():
                prov = path.parent / prov
            provision_texts[ref.key] = prov.read_text(encoding="utf-8")
    return LabelSet(labels=labels, provision_texts=provision_texts, procedural=procedural)


def read_exclusion_file(path: str | Path) -> list[CitationRef]:
    """Plain-text exclusion list: one canonical citation key per line."""
    refs = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            refs.append(CitationRef.from_key(line))
    return refs
