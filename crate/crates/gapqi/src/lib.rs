pub mod extreal;
pub mod gap;
pub mod measures;
pub mod model;
pub mod operators;
pub mod potential;
pub mod ruelle;
pub mod space;
