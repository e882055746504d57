"""Fairness audit toolkit for tabular hiring-style decision data."""

from .criteria import Criterion
from .dataset import ColumnSchema, Dataset, load_csv, save_csv
from .errors import AuditError

__version__ = "0.1.0"

__all__ = ["AuditError", "ColumnSchema", "Criterion", "Dataset", "load_csv", "save_csv"]
