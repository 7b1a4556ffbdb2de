"""Encode span files with a pretrained transformer into PCEM embeddings.

Pooling is first-token only (the sequence-summary token of BERT-style
encoders); record ids follow the engine's span-identity convention
"<doc_id>#<j>" with j the 0-based index among a document's spans in
file order, and record order matches input order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from transformers import AutoModel, AutoTokenizer

from .pcem_writer import write_pcem


class ExportError(RuntimeError):
    pass


@dataclass
class ExportJob:
    model_name: str
    input_path: str
    output_path: str
    max_length: int = 512
    batch_size: int = 8
    pooling: str = "first_token"

    def __post_init__(self):
        if self.max_length <= 0:
            raise ExportError(f"max_length must be positive, got {self.max_length}")
        if self.pooling != "first_token":
            raise ExportError("only first_token pooling is supported")


@dataclass
class ExportReport:
    count: int
    dim: int
    truncated: int

    def to_json(self) -> str:
        return json.dumps({"count": self.count, "dim": self.dim, "truncated": self.truncated})


def read_spans(path: str | Path) -> list[tuple[str, str]]:
    """Span file -> [(span_uid, text)] in file order."""
    counters: dict[str, int] = {}
    out: list[tuple[str, str]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                doc_id = record["doc_id"]
                text = " ".join(record["sentences"])
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ExportError(f"{path}:{line_no}: unreadable span record ({exc})") from exc
            ordinal = counters.get(doc_id, 0)
            counters[doc_id] = ordinal + 1
            out.append((f"{doc_id}#{ordinal}", text))
    return out


def export_embeddings(job: ExportJob) -> ExportReport:
    """Run the model over every span and write a PCEM v1 file."""
    spans = read_spans(job.input_path)
    try:
        tokenizer = AutoTokenizer.from_pretrained(job.model_name)
        model = AutoModel.from_pretrained(job.model_name)
    except Exception as exc:
        raise ExportError(f"cannot load model {job.model_name!r}: {exc}") from exc
    model.eval()
    torch.manual_seed(0)

    dim = int(getattr(model.config, "hidden_size", 0))
    if dim <= 0:
        raise ExportError(f"model {job.model_name!r} reports hidden size {dim}")

    records: list[tuple[str, np.ndarray]] = []
    truncated = 0
    with torch.no_grad():
        for start in range(0, len(spans), job.batch_size):
            chunk = spans[start : start + job.batch_size]
            texts = [text for _, text in chunk]
            full = tokenizer(texts, truncation=False, padding=False)["input_ids"]
            truncated += sum(1 for ids in full if len(ids) > job.max_length)
            batch = tokenizer(
                texts,
                truncation=True,
                max_length=job.max_length,
                padding=True,
                return_tensors="pt",
            )
            hidden = model(**batch).last_hidden_state
            pooled = hidden[:, 0, :].cpu().numpy().astype(np.float32)
            records.extend((uid, pooled[i]) for i, (uid, _) in enumerate(chunk))

    try:
        count = write_pcem(records, job.output_path, dim)
    except OSError as exc:
        raise ExportError(f"cannot write {job.output_path!r}: {exc}") from exc
    return ExportReport(count=count, dim=dim, truncated=truncated)
