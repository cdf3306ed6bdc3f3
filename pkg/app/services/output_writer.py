"""CSV / JSON artifact writer with a metadata header block."""

import csv
import io
import json
import logging
import math
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional

import joblib
import numpy as np
import pydantic
import scipy

from app import __version__
from app.models import OutputFormat, ResultTable

logger = logging.getLogger(__name__)

SIGNIFICANT_DIGITS = 17


def format_value(value: Any) -> str:
    """Numbers at 17 significant digits; complex values as re+imj; labels verbatim."""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value) or math.isinf(value):
            return str(value)
        return f"{value:.{SIGNIFICANT_DIGITS}g}"
    if isinstance(value, (complex, np.complexfloating)):
        return f"{format_value(value.real)}{'+' if value.imag >= 0 else '-'}{format_value(abs(value.imag))}j"
    return str(value)


def _json_value(value: Any) -> Any:
    if isinstance(value, (np.generic,)):
        value = value.item()
    if isinstance(value, complex):
        return {"re": value.real, "im": value.imag}
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    if isinstance(value, dict):
        return {str(k): _json_value(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [_json_value(v) for v in value]
    if hasattr(value, "value") and not isinstance(value, (int, float, str)):
        return value.value
    return value


class OutputWriter:
    """Writes ResultTables; each artifact starts with `#` header lines (CSV) or a header object (JSON)."""

    def header(self, config: Dict[str, Any], seed: Optional[int], extra: Optional[Dict[str, Any]] = None,
               created: Optional[str] = None) -> Dict[str, Any]:
        block = {
            "tool": f"polariton-lab {__version__}",
            "created": created or datetime.now(timezone.utc).isoformat(timespec="seconds"),
            "versions": {
                "python": sys.version.split()[0],
                "numpy": np.__version__,
                "scipy": scipy.__version__,
                "pydantic": pydantic.VERSION,
                "joblib": joblib.__version__,
            },
            "seed": seed,
            "config": config,
        }
        block.update(extra or {})
        return _json_value(block)

    def render_csv(self, table: ResultTable, header: Dict[str, Any]) -> str:
        buffer = io.StringIO()
        for key, value in {**header, **_json_value(table.metadata)}.items():
            text = value if isinstance(value, str) else json.dumps(value, sort_keys=True, separators=(",", ":"))
            buffer.write(f"# {key}: {text}\n")
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(table.columns)
        for row in table.rows:
            writer.writerow([format_value(v) for v in row])
        return buffer.getvalue()

    def render_json(self, table: ResultTable, header: Dict[str, Any]) -> str:
        document = {
            "header": {**header, **_json_value(table.metadata)},
            "columns": table.columns,
            "rows": [[_json_value(v) for v in row] for row in table.rows],
        }
        return json.dumps(document, indent=2, sort_keys=False) + "\n"

    def render(self, table: ResultTable, header: Dict[str, Any], fmt: OutputFormat) -> str:
        if fmt == OutputFormat.JSON:
            return self.render_json(table, header)
        return self.render_csv(table, header)

    @staticmethod
    def target_paths(path: str, tables: List[ResultTable], fmt: OutputFormat) -> List[Optional[Path]]:
        """One path per table; several tables share the stem with a `_name` suffix. None means stdout."""
        if path == "-":
            return [None] * len(tables)
        base = Path(path)
        if base.suffix == "":
            base = base.with_suffix(f".{fmt.value}")
        if len(tables) == 1:
            return [base]
        return [base.with_name(f"{base.stem}_{t.name}{base.suffix}") for t in tables]

    def write(self, tables: List[ResultTable], header: Dict[str, Any], path: str, fmt: OutputFormat) -> List[str]:
        written = []
        for table, target in zip(tables, self.target_paths(path, tables, fmt)):
            text = self.render(table, header, fmt)
            if target is None:
                sys.stdout.write(text)
                continue
            target.parent.mkdir(parents=True, exist_ok=True)
            target.write_text(text, encoding="utf-8")
            logger.info("Wrote %s (%d rows)", target, len(table.rows))
            written.append(str(target))
        return written


output_writer = OutputWriter()
