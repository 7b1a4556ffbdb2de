"""Bridge pretrained transformer encoders to PCEM embedding files."""

from .export import ExportError, ExportJob, ExportReport, export_embeddings

__version__ = "0.1.0"
__all__ = ["ExportError", "ExportJob", "ExportReport", "export_embeddings"]
