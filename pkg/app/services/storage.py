import csv
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import yaml

from app.core.exceptions import OutputError
from app.schemas.experiment import ExperimentSpec, ResultRow, SchemeName

logger = logging.getLogger(__name__)

COLUMNS = list(ResultRow.model_fields)

TIME_SWITCHING_NOTE = (
    "time_switching splits the frame between the sensing design (fraction tau) and the "
    "comm-only design; Fisher information adds over time so crb = 1 / (tau / crb_s + "
    "(1 - tau) / crb_c) and rate = (1 - tau) * rate_c, with tau the smallest fraction meeting epsilon"
)


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.12g}"
    return str(value)


def _parse(column: str, text: str):
    annotation = ResultRow.model_fields[column].annotation
    if annotation is bool:
        return text == "true"
    if annotation is int:
        return int(text)
    if annotation is float:
        return float(text)
    return text


class ResultStorage:
    """Writes result tables and their metadata to the local filesystem."""

    def __init__(self, newline: str = "\n"):
        self.newline = newline

    @staticmethod
    def _prepare(path: str) -> Path:
        target = Path(path)
        try:
            target.parent.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            logger.error(f"Cannot create directory for {path}: {e}")
            raise OutputError(path, str(e)) from e
        return target

    def emit_csv(self, rows: Sequence[ResultRow], path: str) -> None:
        """
        UTF-8 CSV with a header row and 12 significant digits.
        Identical rows always produce identical bytes.
        """
        target = self._prepare(path)
        try:
            with open(target, "w", encoding="utf-8", newline="") as handle:
                writer = csv.writer(handle, lineterminator=self.newline)
                writer.writerow(COLUMNS)
                for row in rows:
                    writer.writerow([_format(getattr(row, column)) for column in COLUMNS])
        except OSError as e:
            logger.error(f"Failed to write results to {path}: {e}")
            raise OutputError(path, str(e)) from e
        logger.info(f"Wrote {len(rows)} rows to {path}")

    def read_csv(self, path: str) -> List[ResultRow]:
        try:
            with open(path, encoding="utf-8", newline="") as handle:
                reader = csv.DictReader(handle)
                return [ResultRow(**{c: _parse(c, record[c]) for c in COLUMNS}) for record in reader]
        except OSError as e:
            raise OutputError(path, str(e)) from e

    def emit_metadata(self, spec: ExperimentSpec, path: str,
                      skipped_k: Optional[Dict[int, List[int]]] = None) -> str:
        """Sidecar `<csv>.meta.yaml` describing how the table was produced."""
        meta_path = f"{path}.meta.yaml"
        meta = {
            "experiment": spec.name.value,
            "seed": spec.seed,
            "schemes": [s.value for s in spec.schemes],
            "sweep": [float(v) for v in spec.sweep],
            "epsilon_db": spec.epsilon_db,
            "k": spec.k,
            "mode": spec.mode.value if spec.mode else None,
            "symmetry_shortcut": spec.symmetry_shortcut,
            "columns": COLUMNS,
            "system": spec.system.model_dump(mode="json"),
        }
        if SchemeName.TIME_SWITCHING in spec.schemes:
            meta["time_switching_model"] = TIME_SWITCHING_NOTE
        if skipped_k:
            meta["skipped_k"] = {int(n): ks for n, ks in skipped_k.items()}

        target = self._prepare(meta_path)
        try:
            with open(target, "w", encoding="utf-8", newline="") as handle:
                yaml.safe_dump(meta, handle, sort_keys=False, default_flow_style=None)
        except OSError as e:
            logger.error(f"Failed to write metadata to {meta_path}: {e}")
            raise OutputError(meta_path, str(e)) from e
        return meta_path


storage = ResultStorage()


def emit_csv(rows: Sequence[ResultRow], path: str) -> None:
    storage.emit_csv(rows, path)


def emit_metadata(spec: ExperimentSpec, path: str, skipped_k: Optional[Dict[int, List[int]]] = None) -> str:
    return storage.emit_metadata(spec, path, skipped_k)


def read_csv(path: str) -> List[ResultRow]:
    return storage.read_csv(path)
