"""Format result rows as aligned text tables and CSV files."""
import math
import numbers
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Union

import pandas as pd

from app.config.constants import OUTPUT_DIGITS


def format_number(value, digits: int = OUTPUT_DIGITS) -> str:
    """Floats to ``digits`` significant digits; everything else as str."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, numbers.Integral):
        return str(int(value))
    if isinstance(value, numbers.Real):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        text = f"{value:.{digits}g}"
        return "0" if text == "-0" else text
    return str(value)


def to_frame(rows: Iterable[Mapping], digits: int = OUTPUT_DIGITS) -> pd.DataFrame:
    rows = list(rows)
    frame = pd.DataFrame(rows)
    if frame.empty:
        return frame
    return frame.apply(lambda column: column.map(lambda v: format_number(v, digits)))


def render_table(rows: Iterable[Mapping], digits: int = OUTPUT_DIGITS) -> str:
    frame = to_frame(rows, digits)
    if frame.empty:
        return "(no rows)"
    return frame.to_string(index=False)


def write_csv(rows: Iterable[Mapping], path: Union[str, Path], digits: int = OUTPUT_DIGITS) -> Path:
    """Header row, '.' decimals, LF line endings; identical rows give identical bytes."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    to_frame(rows, digits).to_csv(path, index=False, lineterminator="\n")
    return path


def config_lines(config: Mapping[str, object], digits: int = OUTPUT_DIGITS) -> List[str]:
    return [f"# {key}: {format_number(value, digits)}" for key, value in config.items()]


def describe_model(spec: Dict[str, object]) -> str:
    params = ", ".join(f"{k}={format_number(v)}" for k, v in spec.items() if k != "family")
    return f"{spec['family']}({params})"
