//! Columnar analytics over nested particle-physics events.
//!
//! Events carry scalar metadata plus variable-length particle lists (jets,
//! muons, electrons). They are stored column-wise with offsets arrays,
//! partitioned into row groups, and queried with vectorized kernels. Each
//! benchmark query also has a row-at-a-time reference implementation used to
//! check the engine.
//!
//! - [`physics`]: four-vectors, invariant mass, delta R, transverse mass
//! - [`model`]: the row view of an event and its JSON-lines form
//! - [`columnar`]: nested columns, row groups, the native file format
//! - [`datagen`]: seeded synthetic events
//! - [`ops`]: filter/unnest/combinations/reduction kernels
//! - [`histogram`]: equi-width histograms
//! - [`queries`]: the benchmark queries, complexity counters and oracle
//! - [`engine`]: parallel driver and benchmark sweep

pub mod columnar;
pub mod datagen;
pub mod engine;
pub mod error;
pub mod histogram;
pub mod model;
pub mod ops;
pub mod physics;
pub mod queries;

pub use columnar::{
    ingest_jsonl, replicate_scale, Collection, ColumnPath, ColumnarRowGroup, DatasetFile,
    DatasetWriter, NestedListColumn, Offsets, ParticleField, Projection, ScaleFactor,
    DEFAULT_ROW_GROUP_SIZE,
};
pub use datagen::{generate, make_event_with_counts, GenConfig};
pub use engine::{bench, execute, run_parallel, BenchConfig, BenchRow, RunConfig, RunMetrics};
pub use error::{Error, Result};
pub use histogram::{Histogram, HistogramSpec};
pub use model::{concat_leptons, validate_event, ChargedLepton, Event, Jet, LightLepton, Met};
pub use physics::{CartesianFourVector, FourVector};
pub use queries::{
    complexity_formula, oracle_run, Cuts, HistogramSpecs, OpCountInputs, Query, QueryConfig,
    QueryId, QueryResult,
};
