//! Command-line front end and HTTP session service for `teachlab`.

pub mod commands;
pub mod http;
