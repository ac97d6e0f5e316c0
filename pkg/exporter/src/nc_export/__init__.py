"""Exporter bridge: turns externally trained checkpoints into `.nceb` embedding
tables, plus naive reference oracles for cross-validating the main toolkit.

Deliberately shares no code with the main toolkit: the `.nceb` serializer here
is an independent implementation of the published byte layout, which is what
makes the golden-file round trip a real cross-check.
"""

from nc_export.export import ExportJob, export_embeddings
from nc_export.oracles import oracle_suite

__version__ = "0.1.0"

__all__ = ["ExportJob", "export_embeddings", "oracle_suite"]
