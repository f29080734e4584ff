"""Logging and OpenTelemetry setup for the command line.

This module provides:
- ``configure_logging``: the single logging format used by every command
- ``StageAttributeSpanProcessor``: stamps deployment metadata on pipeline spans
- ``FilteringSpanExporter``: drops spans whose names match regex patterns
- ``JsonLinesSpanExporter``: writes one JSON record per span to a local file
- ``configure_tracing``: wires the above into a global ``TracerProvider``
"""

from __future__ import annotations

import json
import logging
import os
import re
import threading
from pathlib import Path
from typing import Optional, Sequence

from opentelemetry import trace
from opentelemetry.sdk.trace import ReadableSpan, Span, SpanProcessor, TracerProvider
from opentelemetry.sdk.trace.export import BatchSpanProcessor, SpanExporter, SpanExportResult

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


def configure_logging(level: Optional[str] = None) -> None:
    """Configure the root logger once for a command line run.

    Args:
        level: Level name; falls back to ``ROOMSYNTH_LOG_LEVEL`` then ``INFO``.
    """
    level_name = (level or os.getenv("ROOMSYNTH_LOG_LEVEL", "INFO")).upper()
    logging.basicConfig(level=getattr(logging, level_name, logging.INFO), format=LOG_FORMAT)


class StageAttributeSpanProcessor(SpanProcessor):
    """Adds deployment metadata to every span and logs finished stages."""

    def on_start(self, span: Span, parent_context=None) -> None:
        span.set_attribute("deployment.environment", os.getenv("ENVIRONMENT", "development"))
        span.set_attribute("service.version", os.getenv("SERVICE_VERSION", "0.1.0"))

    def on_end(self, span: ReadableSpan) -> None:
        if span.end_time and span.start_time:
            duration_ms = (span.end_time - span.start_time) / 1_000_000
            logger.debug(f"Span '{span.name}' finished in {duration_ms:.1f} ms")

    def shutdown(self) -> None:
        pass

    def force_flush(self, timeout_millis: int = 30000) -> bool:
        return True


def compile_filter_patterns(pattern_strings: Sequence[str]) -> list[re.Pattern]:
    """Compile regex patterns, skipping (and logging) invalid ones."""
    patterns = []
    for pattern_str in pattern_strings:
        try:
            patterns.append(re.compile(pattern_str))
        except re.error as e:
            logger.warning(f"Invalid span filter pattern '{pattern_str}': {e}. Skipping.")
    return patterns


def should_filter_span(span: ReadableSpan, filter_patterns: Sequence[re.Pattern]) -> bool:
    """Return True when the span name matches any filter pattern."""
    return any(pattern.search(span.name) for pattern in filter_patterns)


class FilteringSpanExporter(SpanExporter):
    """Wrapper exporter that drops spans by name before export.

    Spans whose parent was dropped keep their original parent id; the
    consumers we export to render them as detached subtrees.
    """

    def __init__(self, base_exporter: SpanExporter, filter_patterns: Sequence[str] = ()):
        self.base_exporter = base_exporter
        self.filter_patterns = compile_filter_patterns(filter_patterns)

    def export(self, spans: Sequence[ReadableSpan]) -> SpanExportResult:
        kept = [span for span in spans if not should_filter_span(span, self.filter_patterns)]
        if len(kept) != len(spans):
            logger.debug(f"Filtered {len(spans) - len(kept)} of {len(spans)} span(s)")
        if not kept:
            return SpanExportResult.SUCCESS
        try:
            return self.base_exporter.export(kept)
        except Exception as e:
            logger.error(f"Exception during span export: {e}", exc_info=True)
            return SpanExportResult.FAILURE

    def shutdown(self) -> None:
        self.base_exporter.shutdown()

    def force_flush(self, timeout_millis: int = 30000) -> bool:
        return self.base_exporter.force_flush(timeout_millis)


class JsonLinesSpanExporter(SpanExporter):
    """Appends one JSON object per span to a local file."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()

    def export(self, spans: Sequence[ReadableSpan]) -> SpanExportResult:
        records = []
        for span in spans:
            duration_ms = None
            if span.end_time and span.start_time:
                duration_ms = (span.end_time - span.start_time) / 1_000_000
            records.append(json.dumps({
                "name": span.name,
                "trace_id": f"{span.context.trace_id:032x}",
                "span_id": f"{span.context.span_id:016x}",
                "parent_id": f"{span.parent.span_id:016x}" if span.parent else None,
                "duration_ms": duration_ms,
                "attributes": {k: v for k, v in (span.attributes or {}).items()},
            }, default=str))
        try:
            with self._lock:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with self.path.open("a", encoding="utf-8") as handle:
                    for record in records:
                        handle.write(record + "\n")
        except OSError as e:
            logger.error(f"Could not write spans to {self.path}: {e}")
            return SpanExportResult.FAILURE
        return SpanExportResult.SUCCESS

    def shutdown(self) -> None:
        pass

    def force_flush(self, timeout_millis: int = 30000) -> bool:
        return True


def parse_otlp_headers(raw: str) -> dict[str, str]:
    """Parse ``key1=value1,key2: value2`` header strings."""
    headers = {}
    for header_pair in raw.split(","):
        header_pair = header_pair.strip()
        if "=" in header_pair:
            key, value = header_pair.split("=", 1)
        elif ":" in header_pair:
            key, value = header_pair.split(":", 1)
        else:
            continue
        headers[key.strip()] = value.strip()
    return headers


def _base_exporter() -> Optional[SpanExporter]:
    endpoint = os.getenv("OTEL_EXPORTER_OTLP_ENDPOINT")
    if endpoint:
        from opentelemetry.exporter.otlp.proto.http.trace_exporter import OTLPSpanExporter

        headers = parse_otlp_headers(os.getenv("OTEL_EXPORTER_OTLP_HEADERS", ""))
        logger.info(f"Exporting spans to OTLP endpoint {endpoint}")
        return OTLPSpanExporter(endpoint=endpoint, headers=headers or None, timeout=10)
    trace_file = os.getenv("ROOMSYNTH_TRACE_FILE")
    if trace_file:
        logger.info(f"Writing spans to {trace_file}")
        return JsonLinesSpanExporter(trace_file)
    return None


def configure_tracing(service_name: str = "roomsynth") -> TracerProvider:
    """Install a global tracer provider for the current process."""
    tracer_provider = TracerProvider()
    tracer_provider.add_span_processor(StageAttributeSpanProcessor())
    exporter = _base_exporter()
    if exporter is not None:
        filter_patterns_str = os.getenv("OTEL_SPAN_FILTER_PATTERNS", "")
        filter_patterns = [p.strip() for p in filter_patterns_str.split(",") if p.strip()]
        tracer_provider.add_span_processor(
            BatchSpanProcessor(FilteringSpanExporter(exporter, filter_patterns=filter_patterns))
        )
    trace.set_tracer_provider(tracer_provider)
    logger.debug(f"Tracing configured for service '{service_name}'")
    return tracer_provider


def get_tracer(name: str) -> trace.Tracer:
    return trace.get_tracer(name)
