"""Offline keyword embedding exporter.

Encodes a canonical keyword list with a pretrained sentence encoder and
writes the line-delimited embedding file the forecasting core consumes.
The boundary with the core is format-only: no code is shared.
"""

__version__ = "0.1.0"

from .exporter import ExportSummary, ModelUnavailableError, export

__all__ = ["ExportSummary", "ModelUnavailableError", "export", "__version__"]
