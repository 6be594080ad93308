import logging
from collections.abc import Sequence
from io import StringIO
from pathlib import Path

import pandas as pd
from pydantic import BaseModel

from g3m.core.config import settings

logger = logging.getLogger(__name__)


def rows_to_frame(rows: Sequence[BaseModel], model: type[BaseModel]) -> pd.DataFrame:
    """One column per model field, in declaration order, even when there are no rows."""
    return pd.DataFrame(
        [row.model_dump() for row in rows], columns=list(model.model_fields)
    )


def check_rows(frame: pd.DataFrame, model: type[BaseModel]) -> pd.DataFrame:
    """Validate every record against ``model`` so emitted CSVs always read back."""
    for record in frame.to_dict("records"):
        model.model_validate(record)
    return frame


def render_csv(frame: pd.DataFrame) -> str:
    return frame.to_csv(
        index=False, float_format=settings.CSV_FLOAT_FORMAT, lineterminator="\n"
    )


def write_csv(frame: pd.DataFrame, out: Path | None) -> str | None:
    """Write ``frame`` to ``out``; without a path the CSV text is returned for stdout."""
    text = render_csv(frame)
    if out is None:
        return text
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text, encoding="utf-8", newline="")
    logger.info("wrote %d rows to %s", len(frame), out)
    return None


def read_rows(text: str, model: type[BaseModel]) -> list[BaseModel]:
    """Parse emitted CSV text back into validated rows."""
    text_columns = {
        name: str for name, field in model.model_fields.items() if field.annotation is str
    }
    frame = pd.read_csv(StringIO(text), dtype=text_columns)
    frame = frame.astype(object).where(frame.notna(), None)
    return [model.model_validate(record) for record in frame.to_dict("records")]
