"""
Result model for experiment commands.
"""
from typing import Dict, List, Optional


class ExperimentResult:
    """
    Result object returned by the experiment commands.

    Attributes:
        command: Name of the command that produced the result (e.g. 'privic')
        files: Paths of the report files written, in write order
        summary: Headline numbers of the run (e.g. {'median_emd_km_beta_1.0': 0.14})
        details: Per-row records of the run, kept in memory for tests and callers
    """

    def __init__(
        self,
        command: str,
        files: Optional[List[str]] = None,
        summary: Optional[Dict[str, object]] = None,
        details: Optional[List[Dict[str, object]]] = None
    ):
        self.command = command
        self.files = files or []
        self.summary = summary or {}
        self.details = details or []

    def __str__(self) -> str:
        parts = [f"Command: {self.command}"]

        if self.summary:
            stats = ", ".join(f"{k}: {v}" for k, v in self.summary.items())
            parts.append(f"Summary: {stats}")
        else:
            parts.append("Summary: {}")

        if self.files:
            parts.append("Files: " + ", ".join(self.files))
        parts.append(f"Rows: {len(self.details)}")
        return "\n".join(parts)

    def __repr__(self) -> str:
        return self.__str__()
