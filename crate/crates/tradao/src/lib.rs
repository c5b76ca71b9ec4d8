//! Storage, service layer, REST API and CLI plumbing for the tradao workbench.

pub mod api;
pub mod demo;
pub mod error;
pub mod service;
pub mod store;

pub use error::ServiceError;
pub use service::Service;
