import json
import logging
import sys
from datetime import datetime, timezone

_HANDLER_NAME = "susy8v-stderr"


class JsonFormatter(logging.Formatter):
    """One JSON object per record; structured payload goes in ``extra={"fields": {...}}``."""

    def format(self, record: logging.LogRecord) -> str:
        log_entry = {
            "ts": datetime.fromtimestamp(record.created, tz=timezone.utc).isoformat(),
            "level": record.levelname,
            "logger": record.name,
            "event": record.getMessage(),
        }
        fields = getattr(record, "fields", None)
        if isinstance(fields, dict):
            log_entry.update(fields)
        if record.exc_info:
            log_entry["exc"] = self.formatException(record.exc_info)
        return json.dumps(log_entry, default=str)


def configure_logging(level: str = "WARNING") -> logging.Logger:
    """Attach a single JSON stderr handler to the ``app`` logger tree."""
    root = logging.getLogger("app")
    root.setLevel(level.upper())
    if not any(h.get_name() == _HANDLER_NAME for h in root.handlers):
        handler = logging.StreamHandler(sys.stderr)
        handler.set_name(_HANDLER_NAME)
        handler.setFormatter(JsonFormatter())
        root.addHandler(handler)
    root.propagate = False
    return root
