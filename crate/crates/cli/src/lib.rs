//! Library surface of the CLI crate: the problem-file schema and the
//! table/CSV writers, shared by the binary, the integration tests, and the
//! problem-file generator.

pub mod output;
pub mod schema;
