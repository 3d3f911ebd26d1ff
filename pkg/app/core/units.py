import re
from typing import Union

import numpy as np

_QUANTITY = re.compile(r"^\s*([-+]?[0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)\s*(dBm|dB|W|mW)?\s*$")


def db_to_linear(value_db: float) -> float:
    return float(10.0 ** (value_db / 10.0))


def linear_to_db(value: float) -> float:
    if value <= 0:
        return float("-inf") if value == 0 else float("nan")
    if np.isinf(value):
        return float("inf")
    return float(10.0 * np.log10(value))


def dbm_to_watts(value_dbm: float) -> float:
    return db_to_linear(value_dbm - 30.0)


def watts_to_dbm(value_w: float) -> float:
    return linear_to_db(value_w) + 30.0


def parse_power(value: Union[str, float, int]) -> float:
    """
    Converts "30 dBm", "0.1 W", "100 mW" or a bare number (watts) to watts.
    """
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    match = _QUANTITY.match(str(value))
    if not match:
        raise ValueError(f"Unrecognized power value: {value!r}")
    number, unit = float(match.group(1)), match.group(2)
    if unit == "dBm":
        return dbm_to_watts(number)
    if unit == "mW":
        return number * 1e-3
    if unit in (None, "W"):
        return number
    raise ValueError(f"Unit {unit} is not a power unit: {value!r}")


def parse_ratio_db(value: Union[str, float, int]) -> float:
    """
    Reads a dB quantity ("-40 dB" or -40) and returns its value in dB.
    """
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    match = _QUANTITY.match(str(value))
    if not match or match.group(2) not in (None, "dB"):
        raise ValueError(f"Expected a dB value, got {value!r}")
    return float(match.group(1))
