pub mod expr;
pub mod symplin;
pub mod poisson;
pub mod integrate;
pub mod catalog;
pub mod cli;
