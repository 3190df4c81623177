"""Formatting of decoder trace events and simulation progress events.

Decoders and the simulation engine report through an ``on_event`` callback
that receives plain dicts:

    {"event": "leaf", "index": 3, "frozen": False, "paths": [(0.0, 1), ...]}
    {"event": "node", "class": "Rate1", "stage": 2, "offset": 4, "paths": [...]}
    {"event": "partition", "index": 0, "pm": 1.5, "crc_ok": True}
    {"event": "point_start", "ebn0_db": 2.0, "workers": 8}
    {"event": "block_complete", "ebn0_db": 2.0, "block": 3, "frames": 256, ...}
    {"event": "point_complete", "ebn0_db": 2.0, "frames": 2048, "fer": 0.05, ...}

:class:`EventFormatter` turns them into terminal lines.
"""

from typing import Any, Callable, TextIO


def format_trace_event(event: dict[str, Any]) -> str:
    """One debug-trace line: position, frozen flag, per-path (pm, bit) tuples."""
    event_type = event.get("event", "")
    if event_type == "leaf":
        paths = " ".join(f"({pm:g},{bit})" for pm, bit in event["paths"])
        kind = "frozen" if event["frozen"] else "info"
        return f"leaf {event['index']:>5} {kind:<6} {paths}"
    if event_type == "node":
        paths = " ".join(f"({values[0]:g})" for values in event["paths"])
        return f"node {event['offset']:>5} {event['class']:<6} stage={event['stage']} {paths}"
    if event_type == "partition":
        verdict = "pass" if event["crc_ok"] else "fail"
        return f"partition {event['index']} pm={event['pm']:g} crc={verdict}"
    return ""


class EventFormatter:
    """Write progress and trace events as text lines.

    Point summaries are always written; block progress only from verbosity 1.
    """

    _COLOR_OK = "\033[0;32m"
    _COLOR_ERRORS = "\033[0;33m"
    _COLOR_RESET = "\033[0m"

    def __init__(
        self,
        stream: TextIO,
        verbosity: int = 0,
        color: bool = False,
        on_line: Callable[[str], None] | None = None,
    ):
        """Initialize formatter.

        Args:
            stream: Where lines are written
            verbosity: 0 for point summaries, 1+ adds block progress
            color: Wrap point summaries in ANSI colors
            on_line: Optional extra consumer of every written line
        """
        self.stream = stream
        self.verbosity = verbosity
        self.color = color
        self.on_line = on_line

    def _paint(self, text: str, color: str) -> str:
        if not self.color:
            return text
        return f"{color}{text}{self._COLOR_RESET}"

    def format(self, event: dict[str, Any]) -> str:
        event_type = event.get("event", "")
        if event_type == "point_start":
            return f"Eb/N0 {event['ebn0_db']:g} dB: starting on {event['workers']} worker(s)"
        if event_type == "block_complete":
            if self.verbosity < 1:
                return ""
            return (
                f"  block {event['block']}: {event['frame_errors']} frame errors "
                f"in {event['frames']} frames"
            )
        if event_type == "point_complete":
            text = (
                f"Eb/N0 {event['ebn0_db']:g} dB: FER {event['fer']:.3e} "
                f"({event['frame_errors']}/{event['frames']}) in {event['wall_time']:.1f}s"
            )
            return self._paint(text, self._COLOR_ERRORS if event["frame_errors"] else self._COLOR_OK)
        return format_trace_event(event)

    def __call__(self, event: dict[str, Any]) -> None:
        line = self.format(event)
        if not line:
            return
        self.stream.write(line + "\n")
        self.stream.flush()
        if self.on_line:
            self.on_line(line)
