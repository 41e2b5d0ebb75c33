import json
import logging
import os
from collections.abc import Sequence
from pathlib import Path

from opentelemetry import trace
from opentelemetry.sdk.trace import ReadableSpan, TracerProvider
from opentelemetry.sdk.trace.export import (
    BatchSpanProcessor,
    SpanExporter,
    SpanExportResult,
)

# attribute payloads above this size are written to disk instead of the log
MAX_ATTRIBUTE_BYTES = 250 * 1024


class LoggingSpanExporter(SpanExporter):
    """
    Span exporter that emits every finished span as one structured log record.

    Attribute payloads too large for a sensible log line are offloaded to a JSON
    file under ``offload_dir`` and replaced with a reference to that file.
    """

    def __init__(
        self,
        offload_dir: Path | None = None,
        logger_name: str = "app.spans",
        debug: bool = False,
    ) -> None:
        """
        Initialize the exporter.

        :param offload_dir: Directory receiving ``<span_id>.json`` payload files
        :param logger_name: Name of the logger the span records go to
        :param debug: Also print each span dict
        """
        self.offload_dir = offload_dir
        self.debug = debug
        self.logger = logging.getLogger(logger_name)

    def export(self, spans: Sequence[ReadableSpan]) -> SpanExportResult:
        """
        Log the spans.

        :param spans: A sequence of spans to export
        :return: The result of the export operation
        """
        for span in spans:
            span_context = span.get_span_context()
            trace_id = format(span_context.trace_id, "032x")
            span_id = format(span_context.span_id, "016x")
            span_dict = json.loads(span.to_json())

            span_dict["trace_id"] = trace_id
            span_dict["span_id"] = span_id

            span_dict = self._process_large_attributes(
                span_dict=span_dict, span_id=span_id
            )

            if self.debug:
                print(span_dict)

            self.logger.info(
                json.dumps(span_dict, sort_keys=True),
                extra={"type": "span", "span_name": span.name},
            )
        return SpanExportResult.SUCCESS

    def shutdown(self) -> None:
        """Nothing to release; records go through the stdlib logger."""

    def store_locally(self, content: str, span_id: str) -> str:
        """
        Write a large payload next to the run's artifacts.

        :param content: The content to store
        :param span_id: The ID of the span
        :return: URI of the stored content
        """
        if self.offload_dir is None:
            self.logger.warning(
                "No offload directory configured. Unable to store span attributes."
            )
            return "offload directory not configured"

        self.offload_dir.mkdir(parents=True, exist_ok=True)
        path = self.offload_dir / f"{span_id}.json"
        path.write_text(content, encoding="utf-8")
        return path.resolve().as_uri()

    def _process_large_attributes(self, span_dict: dict, span_id: str) -> dict:
        """
        Move oversized attribute values out of the span record.

        :param span_dict: The span data dictionary
        :param span_id: The span ID
        :return: The updated span dictionary
        """
        attributes = span_dict.get("attributes") or {}
        if len(json.dumps(attributes).encode()) > MAX_ATTRIBUTE_BYTES:
            uri = self.store_locally(json.dumps(attributes), span_id)
            span_dict["attributes"] = {
                key: value
                for key, value in attributes.items()
                if len(json.dumps(value).encode()) <= 1024
            }
            span_dict["attributes"]["uri_payload"] = uri
            self.logger.info(
                "Length of payload span above 250 KB, storing attributes on disk "
                "to avoid large log entry errors"
            )
        return span_dict


def tracing_requested(flag: bool) -> bool:
    value = os.environ.get("DOB_BODE_TRACE", "")
    return flag or value.lower() in {"1", "true", "yes"}


def setup_tracing(out_dir: Path) -> TracerProvider:
    """Install (once per process) a provider logging spans via LoggingSpanExporter."""
    current = trace.get_tracer_provider()
    if isinstance(current, TracerProvider):
        return current
    provider = TracerProvider()
    provider.add_span_processor(
        BatchSpanProcessor(LoggingSpanExporter(offload_dir=out_dir / "spans"))
    )
    trace.set_tracer_provider(provider)
    return provider
