pub mod analytics;
pub mod basis;
pub mod cluster;
pub mod effective;
pub mod error;
pub mod master;
pub mod model;
pub mod params;
pub mod propagator;
pub mod protocols;
pub mod quadrature;
pub mod trajectory;
pub mod rng;
