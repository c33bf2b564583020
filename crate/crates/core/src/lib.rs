pub mod autodiff;
pub mod boundary;
pub mod cli;
pub mod config;
pub mod femref;
pub mod ffnet;
pub mod io;
pub mod metrics;
pub mod residual;
pub mod surface;
pub mod trainer;
