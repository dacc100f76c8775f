"""Analyzer data: ingestion, cleaning, synthetic generation and features."""

from .cleaning import CleaningConfig, clean
from .features import (
    FEATURE_HEADER,
    Dataset,
    Scaler,
    WindowedDataset,
    feature_row,
    fit_scaler,
    harmonic_series,
    make_tabular_features,
    make_windows,
    read_feature_csv,
    split,
    split_sizes,
    time_features,
    write_feature_csv,
)
from .records import (
    LINES,
    ORDERS,
    RAW_HEADER,
    AnalyzerRecord,
    IngestError,
    LineReading,
    Reject,
    SchemaError,
    ingest_csv,
    write_csv,
)
from .synthetic import ProfileConfig, generate_synthetic

__all__ = [
    "AnalyzerRecord",
    "CleaningConfig",
    "Dataset",
    "FEATURE_HEADER",
    "IngestError",
    "LINES",
    "LineReading",
    "ORDERS",
    "ProfileConfig",
    "RAW_HEADER",
    "Reject",
    "Scaler",
    "SchemaError",
    "WindowedDataset",
    "clean",
    "feature_row",
    "fit_scaler",
    "generate_synthetic",
    "harmonic_series",
    "ingest_csv",
    "make_tabular_features",
    "make_windows",
    "read_feature_csv",
    "split",
    "split_sizes",
    "time_features",
    "write_csv",
    "write_feature_csv",
]
