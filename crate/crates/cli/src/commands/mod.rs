pub mod report;
pub mod resolvent;
pub mod simulate;
pub mod spectrum;
pub mod validate;
