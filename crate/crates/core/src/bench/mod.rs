//! Benchmark tasks, metrics, and the published-table reproduction.

pub mod metrics;
pub mod run;
pub mod table;
pub mod tasks;

pub use metrics::{consistency, exact_accuracy, gms, micro_prf, ntu, variety, MetricsError, Prf};
pub use run::{
    aggregate, load_dataset, parse_dataset, run_task, summarize, synthetic_rows, write_outputs, BenchError,
    BenchRecord, BenchSummary, MetricsReport, RunMetadata, RunOptions, METRICS_FILE, RECORDS_FILE,
    RUN_METADATA_FILE,
};
pub use table::{load_tables, reproduce_gms_table, shipped_tables, SHIPPED_TABLES_JSON, GmsRow, GmsTable, PublishedTables, TableError, TABLE_TOLERANCE};
pub use tasks::{DatasetRow, TaskKind, TaskSpec};
