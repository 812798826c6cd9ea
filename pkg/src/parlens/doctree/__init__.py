"""Document structure, per-section format extraction and merging."""

from .extract import (
    DEFAULT_MAX_RETRIES,
    ExtractionError,
    ExtractionResult,
    build_trace_index,
    extract_formats,
    extract_node_format,
    merge_formats,
    parse_hierarchy,
    parse_merge_answer,
    refine_hierarchy,
    run_extraction,
    summarize_all,
)
from .ingest import IngestError, RfcDocument, load_rfc, parse_rfc
from .tree import (
    EMPTY_SUMMARY,
    SYNTHETIC_ROOT,
    DocNode,
    DocTree,
    DocTreeError,
    TraceIndex,
    build_initial_tree,
    trace,
)

__all__ = [
    "DEFAULT_MAX_RETRIES",
    "DocNode",
    "DocTree",
    "DocTreeError",
    "EMPTY_SUMMARY",
    "ExtractionError",
    "ExtractionResult",
    "IngestError",
    "RfcDocument",
    "SYNTHETIC_ROOT",
    "TraceIndex",
    "build_initial_tree",
    "build_trace_index",
    "extract_formats",
    "extract_node_format",
    "load_rfc",
    "merge_formats",
    "parse_hierarchy",
    "parse_merge_answer",
    "parse_rfc",
    "refine_hierarchy",
    "run_extraction",
    "summarize_all",
    "trace",
]
