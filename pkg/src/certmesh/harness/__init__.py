from certmesh.harness.config import ConfigParseError, format_config, parse_config, parse_config_text
from certmesh.harness.sweep import (
    CSV_HEADER,
    RunRow,
    SweepError,
    SweepSpec,
    aggregate,
    emit_csv,
    read_csv,
    run_sweep,
    summarise,
)
from certmesh.metrics import MetricsReport, Rates, compute_rates
