pub mod config;
pub mod emscr;
pub mod field;
pub mod indexspace;
pub mod linalg;
pub mod mscr;
pub mod repair;
pub mod scalarcode;
pub mod shardstore;
