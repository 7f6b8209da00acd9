"""
SpinLoop - Run Log
==================
Structured record of what a run did: closures computed, verdicts reached,
protocols executed, pulses validated, errors hit.

Entries carry a sequence number instead of a wall-clock time so two runs
with the same inputs log the same thing. Every entry is also forwarded to
the standard ``spinloop`` logger.
"""

import json
import logging
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List

_forward = logging.getLogger("spinloop")

_LEVELS = {
    "ERROR": logging.ERROR,
    "WARNING": logging.WARNING,
}


@dataclass
class RunLogEntry:
    """Single run log entry"""
    seq: int
    event_type: str
    details: str
    source: str = "kernel"

    def to_dict(self) -> dict:
        return {
            'seq': self.seq,
            'event_type': self.event_type,
            'details': self.details,
            'source': self.source
        }


class RunLogger:
    """Keeps the most recent ``max_entries`` events of a run"""

    def __init__(self, max_entries: int = 1000):
        self.entries: List[RunLogEntry] = []
        self.lock = threading.Lock()
        self.max_entries = max_entries
        self._seq = 0

    def log(self, event_type: str, details: str, source: str = "kernel"):
        """Add a new log entry"""
        with self.lock:
            self._seq += 1
            entry = RunLogEntry(self._seq, event_type, details, source)
            self.entries.append(entry)

            # Trim old entries
            if len(self.entries) > self.max_entries:
                self.entries = self.entries[-self.max_entries:]

        _forward.log(_LEVELS.get(event_type, logging.INFO), "[%s] %s", event_type, details)

    def get_entries_by_type(self, event_type: str, limit: int = 50) -> List[Dict]:
        """The last ``limit`` entries of one type (all when ``limit`` is 0), oldest first"""
        with self.lock:
            filtered = [e for e in self.entries if e.event_type == event_type]
        recent = filtered[-limit:] if limit else filtered
        return [e.to_dict() for e in recent]

    def save(self, path: str):
        """Write the log as JSON, oldest entry first"""
        log_path = Path(path)
        log_path.parent.mkdir(parents=True, exist_ok=True)
        with self.lock:
            data = [e.to_dict() for e in self.entries]
        with open(log_path, 'w') as f:
            json.dump(data, f, indent=2)
