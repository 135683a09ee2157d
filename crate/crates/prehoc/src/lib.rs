//! Crowd-table DDL, model store, feedback service and command line on top
//! of `prehoc-core`.

pub mod corpus;
pub mod ddl;
pub mod pipeline;
pub mod store;
pub mod suite;
pub mod http;
