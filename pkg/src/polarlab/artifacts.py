"""Result files: CSV tables and their JSON sidecars."""

import json
import os
from pathlib import Path
from typing import Any


class ResultWriter:
    """Write a result table and its sidecar.

    For an output ``results/pc512.csv`` the writer produces:
        results/
        ├── pc512.csv        deterministic table, one row per point
        └── pc512.csv.json   config, fingerprint, wall times, host info

    Wall-clock data lives only in the sidecar so that equal configurations
    give byte-identical tables.
    """

    def __init__(self, output_path: Path | str):
        """Initialize result writer.

        Args:
            output_path: Path of the CSV table
        """
        self.output_path = Path(output_path)

    @property
    def sidecar_path(self) -> Path:
        return self.output_path.with_name(self.output_path.name + ".json")

    def setup(self) -> None:
        """Create the output directory."""
        self.output_path.parent.mkdir(parents=True, exist_ok=True)

    def write_table(self, text: str) -> Path:
        """Write the CSV table atomically.

        Args:
            text: CSV content
        """
        _write_atomic(self.output_path, text)
        return self.output_path

    def write_sidecar(self, metadata: dict[str, Any]) -> Path:
        """Write the JSON sidecar atomically.

        Args:
            metadata: JSON-serializable run description
        """
        _write_atomic(self.sidecar_path, json.dumps(metadata, indent=2, sort_keys=True, default=str) + "\n")
        return self.sidecar_path


def _write_atomic(path: Path, text: str) -> None:
    temp_path = path.with_name(f".{path.name}.{os.getpid()}.tmp")
    with open(temp_path, "w", encoding="utf-8", newline="") as f:
        f.write(text)
    temp_path.replace(path)
