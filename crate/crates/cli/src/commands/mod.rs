pub mod condex;
pub mod marginal;
pub mod nbe;
pub mod synthetic;
pub mod tailprob;
