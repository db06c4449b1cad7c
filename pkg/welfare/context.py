from typing import Any, Dict, List, Optional
from datetime import datetime, timezone
import uuid

from welfare.types import StepRecord


class AuditContext:
    """
    Run metadata carried through an audit, check or reproduction.

    The context records what operation ran, with which parameters, when it
    started and finished, and a history of the items it evaluated. Reports
    embed its dictionary form as their runtime metadata.
    """

    def __init__(
        self,
        operation: str,
        run_id: Optional[str] = None,
        parameters: Optional[Dict[str, Any]] = None,
        keep_history: bool = True
    ) -> None:
        """
        Initialize an audit context.

        Args:
            operation: Name of the operation being run (e.g. "monotonicity_sweep")
            run_id: Unique identifier for this run. Auto-generated if not provided.
            parameters: Parameters of the run, reported verbatim
            keep_history: Whether to keep per-item records or only count them
        """
        self.operation = operation
        self.run_id = run_id or f"run_{uuid.uuid4().hex[:8]}"
        self.parameters = parameters or {}
        self.keep_history = keep_history

        self.started_at = datetime.now(timezone.utc)
        self.finished_at: Optional[datetime] = None

        self.step_number = 0
        self._history: List[StepRecord] = []

    def record(self, item: str, outcome: Any = None) -> None:
        """
        Record one evaluated item (a bid profile, a fixture, a table entry).

        Args:
            item: Canonical description of the evaluated item
            outcome: Short outcome summary for the item
        """
        self.step_number += 1
        if not self.keep_history:
            return
        self._history.append({
            "step_number": self.step_number,
            "item": item,
            "outcome": outcome,
            "timestamp": datetime.now(timezone.utc).isoformat(),
        })

    def get_history(self) -> List[StepRecord]:
        """Return a copy of the recorded items."""
        return self._history.copy()

    def finish(self) -> "AuditContext":
        """Stamp the finish time. Returns self for chaining."""
        self.finished_at = datetime.now(timezone.utc)
        return self

    @property
    def elapsed_ms(self) -> float:
        end = self.finished_at or datetime.now(timezone.utc)
        return round((end - self.started_at).total_seconds() * 1000, 4)

    def to_dict(self) -> Dict[str, Any]:
        """
        Convert the context to a dictionary for embedding in reports.

        The per-item history is left out; only its length is reported.
        """
        return {
            "run_id": self.run_id,
            "operation": self.operation,
            "parameters": self.parameters,
            "started_at": self.started_at.isoformat(),
            "finished_at": self.finished_at.isoformat() if self.finished_at else None,
            "elapsed_ms": self.elapsed_ms,
            "items_evaluated": self.step_number,
        }

    def __repr__(self) -> str:
        return (
            f"AuditContext(operation='{self.operation}', "
            f"run_id='{self.run_id}', "
            f"steps={self.step_number})"
        )
